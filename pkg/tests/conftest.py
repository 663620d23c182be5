import numpy as np
import pytest

from robust_pricing import ChoiceParams, GevModel, MixtureUncertaintySet, Nest


@pytest.fixture
def mnl():
    return GevModel.mnl()


@pytest.fixture
def one_nest_model():
    # single nest over two products, mu=1, mu_1=2, sigma=1
    return GevModel.nested_logit([Nest((0, 1), mu_n=2.0)])


@pytest.fixture
def homog_set():
    """K=2, m=2 joint-mode set with homogeneous b anchors."""
    anchors = [ChoiceParams([0.5, 1.0], [1.0, 1.0]),
               ChoiceParams([1.5, 0.3], [2.0, 2.0])]
    return MixtureUncertaintySet(anchors, [0.6, 0.4], eps=0.3, mode="joint")


@pytest.fixture
def homog_costs():
    return np.array([0.2, 0.4])


@pytest.fixture
def partition_parts():
    return ((0,), (1,))


@pytest.fixture
def partition_set(partition_parts):
    """K=2, m=2 partition-mode set, single-product partitions."""
    anchors = [ChoiceParams([0.5, 1.0], [1.0, 0.8]),
               ChoiceParams([1.5, 0.3], [2.0, 1.4])]
    return MixtureUncertaintySet(anchors, [0.6, 0.4], eps=0.3,
                                 mode="partition", partitions=partition_parts)


def random_nested_model(rng, m):
    """Random valid nested-logit model over m products (mu = 1)."""
    perm = rng.permutation(m)
    n_nests = int(rng.integers(1, max(2, m // 2 + 1)))
    cuts = sorted(rng.choice(range(1, m), size=n_nests - 1, replace=False)) if n_nests > 1 else []
    groups = np.split(perm, cuts)
    nests = [
        Nest(tuple(int(i) for i in g), mu_n=float(rng.uniform(1.0, 3.0)),
             sigma=tuple(rng.uniform(0.5, 2.0, size=len(g))))
        for g in groups
    ]
    return GevModel.nested_logit(nests)

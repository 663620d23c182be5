"""Command-line client for the pricing toolkit.

Subcommands mirror the service endpoints (gen / solve / evaluate run either
in process or, with --server, against a running service) plus the batch
``experiment`` protocol which always runs locally.

Exit codes: 0 success, 2 configuration/domain error, 3 convergence/numeric
error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DomainError, NumericError
from .harness import (
    comparison_csv,
    generate_instance,
    histograms_json,
    instance_from_json,
    instance_to_json,
    penalty_comparison_csv,
    run_comparison,
    run_penalty_comparison,
    solutions_json,
)
from .pricing_robust import sampled_worst_case, solution_to_json


def _write(path, text):
    Path(path).write_text(text)


def _load_json(path):
    return json.loads(Path(path).read_text())


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _post(server, endpoint, payload):
    import httpx

    resp = httpx.post(f"{server.rstrip('/')}{endpoint}", json=payload,
                      timeout=600.0)
    if resp.status_code == 422:
        raise ConfigurationError(resp.text)
    if resp.status_code >= 400:
        raise NumericError(resp.text)
    return resp.json()


def _cmd_gen(args):
    if args.server:
        payload = {
            "seed": args.seed, "m": args.m, "k": args.k, "n": args.n,
            "eps": args.eps, "psp": args.psp, "variant": args.variant,
        }
        obj = _post(args.server, "/generate", payload)
    else:
        instance = generate_instance(
            args.seed, m=args.m, k=args.k, n_partitions=args.n, eps=args.eps,
            psp=args.psp, variant=args.variant,
        )
        obj = instance_to_json(instance)
    _write(args.out, _dump_json(obj))
    return 0


def _cmd_solve(args):
    obj = _load_json(args.instance)
    if args.server:
        result = _post(args.server, "/solve",
                       {"instance": obj, "mode": args.mode})
    else:
        from .service.app import solve_instance

        instance = instance_from_json(obj)
        result = solution_to_json(solve_instance(instance, args.mode))
    _write(args.out, _dump_json(result))
    return 0


def _cmd_evaluate(args):
    obj = _load_json(args.instance)
    prices_obj = _load_json(args.prices)
    prices = prices_obj["prices"] if isinstance(prices_obj, dict) else prices_obj
    if args.server:
        result = _post(args.server, "/evaluate", {
            "instance": obj, "prices": prices,
            "samples": args.samples, "seed": args.seed,
        })
    else:
        instance = instance_from_json(obj)
        ev = sampled_worst_case(
            instance.model, instance.uncertainty, instance.products.costs,
            np.asarray(prices, dtype=float), args.samples,
            np.random.default_rng(args.seed),
        )
        result = {
            "worst": ev.worst, "average": ev.average, "max": ev.max_value,
            "revenues": [float(v) for v in ev.revenues],
        }
    _write(args.out, _dump_json(result))
    return 0


def _parse_grid(text):
    """LO:HI:STEP inclusive of HI (up to float wobble)."""
    lo, hi, step = (float(v) for v in text.split(":"))
    if step <= 0:
        raise ConfigurationError("eps-grid step must be positive")
    values = []
    k = 0
    while lo + k * step <= hi + 1e-12:
        values.append(round(lo + k * step, 12))
        k += 1
    if not values:
        raise ConfigurationError(f"empty eps grid from {text!r}")
    return values


def _cmd_experiment(args):
    instance = instance_from_json(_load_json(args.instance))
    eps_grid = _parse_grid(args.eps_grid)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.penalty:
        lambda_grid = [float(v) for v in args.lambda_grid.split(",")]
        reports = run_penalty_comparison(
            instance, lambda_grid=lambda_grid, eps_grid=eps_grid,
            n_eval=args.samples, seed=args.seed,
        )
        _write(out / "penalty_comparison.csv", penalty_comparison_csv(reports))
    else:
        s1_values = tuple(int(v) for v in args.s1.split(","))
        reports = run_comparison(
            instance, eps_grid, args.samples, args.seed, s1_values=s1_values,
        )
        _write(out / "comparison.csv", comparison_csv(reports))
    _write(out / "histograms.json", histograms_json(reports))
    _write(out / "solutions.json", solutions_json(reports))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robust-pricing",
        description="Robust product-line pricing under GEV choice models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--psp", choices=["homogeneous", "partition"],
                   default="partition")
    p.add_argument("--variant", choices=["nested", "mnl"], default="nested")
    p.add_argument("--out", required=True)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=["homogeneous", "partition", "penalty"],
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("evaluate", help="Monte-Carlo evaluation of prices")
    p.add_argument("--instance", required=True)
    p.add_argument("--prices", required=True,
                   help="JSON file with a 'prices' array (e.g. solve output)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run the comparison protocol")
    p.add_argument("--instance", required=True)
    p.add_argument("--eps-grid", default="0.02:0.40:0.02",
                   help="LO:HI:STEP, inclusive of HI")
    p.add_argument("--s1", default="10,50")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--penalty", action="store_true",
                   help="run the penalty-mode comparison instead")
    p.add_argument("--lambda-grid", default="0.2,0.4,0.6,0.8")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

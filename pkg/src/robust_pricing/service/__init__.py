from .app import app, solve_instance

__all__ = ["app", "solve_instance"]

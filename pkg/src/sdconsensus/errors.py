"""Shared exception types."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its budget without converging."""

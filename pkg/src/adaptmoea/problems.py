"""Box-constrained benchmark problems behind one evaluation interface."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from adaptmoea.errors import DimensionError, DomainError, ParameterError


@dataclass
class ProblemSpec:
    """A multi-objective minimization problem on a box.

    ``evaluate`` maps one decision vector to its objective vector and must be
    deterministic. ``known_ideal`` and ``known_nadir`` are optional bounds of
    the Pareto front used to normalize the hypervolume.
    """

    name: str
    n_vars: int
    n_obj: int
    lower: np.ndarray
    upper: np.ndarray
    evaluate: Callable[[np.ndarray], np.ndarray]
    known_ideal: np.ndarray | None = None
    known_nadir: np.ndarray | None = None

    def evaluate_many(self, X, executor=None) -> np.ndarray:
        """Evaluate rows of ``X``; ``executor`` may map them concurrently."""
        X = np.atleast_2d(X)
        rows = list(X)
        if executor is None:
            out = [self.evaluate(x) for x in rows]
        else:
            out = list(executor.map(self.evaluate, rows))
        return np.array(out, dtype=float).reshape(len(rows), self.n_obj)


def _check_box(x, n_obj):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < n_obj:
        raise DimensionError(f"need at least {n_obj} variables, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("DTLZ variables must lie in [0, 1]")
    return x


def dtlz2_eval(x, m: int = 3) -> np.ndarray:
    x = _check_box(x, m)
    tail = x[m - 1 :]
    g = float(np.sum((tail - 0.5) ** 2))
    theta = x[: m - 1] * np.pi / 2
    f = np.full(m, 1.0 + g)
    for i in range(m):
        f[i] *= np.prod(np.cos(theta[: m - 1 - i]))
        if i > 0:
            f[i] *= np.sin(theta[m - 1 - i])
    return f


def dtlz1_eval(x, m: int = 3) -> np.ndarray:
    x = _check_box(x, m)
    tail = x[m - 1 :]
    g = 100.0 * (tail.size + np.sum((tail - 0.5) ** 2 - np.cos(20 * np.pi * (tail - 0.5))))
    head = x[: m - 1]
    f = np.full(m, 0.5 * (1.0 + g))
    for i in range(m):
        f[i] *= np.prod(head[: m - 1 - i])
        if i > 0:
            f[i] *= 1.0 - head[m - 1 - i]
    return f


class _Dtlz:
    # picklable evaluator so populations can be farmed out to processes
    def __init__(self, fn, m):
        self.fn, self.m = fn, m

    def __call__(self, x):
        return self.fn(x, self.m)


def dtlz2(n_vars: int = 12, m: int = 3) -> ProblemSpec:
    if n_vars < m:
        raise ParameterError("DTLZ2 needs n_vars >= m")
    return ProblemSpec(
        "dtlz2", n_vars, m, np.zeros(n_vars), np.ones(n_vars), _Dtlz(dtlz2_eval, m),
        known_ideal=np.zeros(m), known_nadir=np.ones(m),
    )


def dtlz1(n_vars: int = 7, m: int = 3) -> ProblemSpec:
    if n_vars < m:
        raise ParameterError("DTLZ1 needs n_vars >= m")
    return ProblemSpec(
        "dtlz1", n_vars, m, np.zeros(n_vars), np.ones(n_vars), _Dtlz(dtlz1_eval, m),
        known_ideal=np.zeros(m), known_nadir=np.full(m, 0.5),
    )


def make_problem(name: str, **kw) -> ProblemSpec:
    """Build a registered problem by name (``dtlz1``, ``dtlz2``, ``wdcp-lite``)."""
    if name == "dtlz1":
        return dtlz1(**kw)
    if name == "dtlz2":
        return dtlz2(**kw)
    if name == "wdcp-lite":
        from adaptmoea.wdcp import wdcp_lite_problem

        return wdcp_lite_problem(**kw)
    raise ParameterError(f"unknown problem {name!r}; choose dtlz1, dtlz2 or wdcp-lite")


PROBLEM_NAMES = ("dtlz1", "dtlz2", "wdcp-lite")

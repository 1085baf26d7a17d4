"""Hypervolume indicator: exact dimension sweep, Monte-Carlo estimate, tracking."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from adaptmoea.core import dominance_matrix
from adaptmoea.errors import DimensionError

log = logging.getLogger(__name__)


def _prepare(points, r) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=float).ravel()
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return np.empty((0, r.size)), r
    P = np.atleast_2d(P)
    if P.shape[1] != r.size:
        raise DimensionError(f"points have {P.shape[1]} objectives, reference has {r.size}")
    return P[np.all(P <= r, axis=1)], r


def _hv2d(P: np.ndarray, r: np.ndarray) -> float:
    order = np.lexsort((P[:, 1], P[:, 0]))
    x = P[order, 0]
    y = np.minimum.accumulate(P[order, 1])
    widths = np.diff(np.append(x, r[0]))
    return float(np.sum(widths * (r[1] - y)))


def _hv(P: np.ndarray, r: np.ndarray) -> float:
    m = r.size
    if P.shape[0] == 0:
        return 0.0
    if m == 1:
        return float(r[0] - P[:, 0].min())
    if m == 2:
        return _hv2d(P, r)
    # sweep along the last objective; each slab is the (m-1)-D volume of the
    # points already passed
    P = P[np.argsort(P[:, -1], kind="stable")]
    z = np.append(P[:, -1], r[-1])
    total = 0.0
    for i in range(P.shape[0]):
        depth = z[i + 1] - z[i]
        if depth > 0:
            total += depth * _hv(P[: i + 1, :-1], r[:-1])
    return total


def hypervolume(points, r) -> float:
    """Exact hypervolume dominated by ``points`` and bounded by ``r``.

    Points with any coordinate above ``r`` are dropped first. An empty set
    has volume 0.
    """
    P, r = _prepare(points, r)
    if P.shape[0] > 1:
        P = np.unique(P, axis=0)
        P = P[~dominance_matrix(P).any(axis=0)]
    return _hv(P, r)


def hypervolume_monte_carlo(points, r, samples: int, rng, chunk: int = 100_000):
    """Monte-Carlo hypervolume over the box ``[ideal, r]``.

    Returns:
        ``(estimate, stderr)`` where ``stderr`` is the binomial standard error
        scaled by the box volume.
    """
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    P, r = _prepare(points, r)
    if P.shape[0] == 0:
        return 0.0, 0.0
    lo = P.min(axis=0)
    vol = float(np.prod(r - lo))
    if vol == 0.0:
        return 0.0, 0.0
    hits = 0
    left = samples
    while left:
        k = min(chunk, left)
        S = lo + rng.random((k, r.size)) * (r - lo)
        dom = np.zeros(k, dtype=bool)
        for p in P:
            dom |= np.all(S >= p, axis=1)
        hits += int(dom.sum())
        left -= k
    frac = hits / samples
    return frac * vol, vol * np.sqrt(frac * (1.0 - frac) / samples)


def normalized_hv(points, ideal, nadir_ref) -> float:
    """Hypervolume after mapping ``ideal -> 0`` and ``nadir_ref -> 1``.

    Coordinates with a degenerate range are mapped to 0, and coordinates
    better than ``ideal`` are clipped to 0 so the result stays in [0, 1].
    """
    ideal = np.asarray(ideal, dtype=float)
    nadir_ref = np.asarray(nadir_ref, dtype=float)
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return 0.0
    P = np.atleast_2d(P)
    if P.shape[1] != ideal.size or ideal.size != nadir_ref.size:
        raise DimensionError("points, ideal and nadir_ref disagree in dimension")
    span = nadir_ref - ideal
    flat = span <= 0
    if np.any(flat):
        log.debug("degenerate normalization range on objectives %s", np.flatnonzero(flat))
    Z = np.where(flat, 0.0, (P - ideal) / np.where(flat, 1.0, span))
    Z = np.maximum(Z, 0.0)
    return hypervolume(Z, np.ones(ideal.size))


def dtlz2_true_hv(nadir_ref: float = 1.1, m: int = 3, samples: int = 1_000_000, rng=None):
    """Normalized hypervolume of the exact DTLZ2 front, by Monte-Carlo.

    A point of the positive orthant is dominated by the spherical front iff
    its norm is at least one, so each sample is classified exactly.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    S = rng.random((samples, m)) * nadir_ref
    frac = float(np.mean(np.sum(S**2, axis=1) >= 1.0))
    return frac, float(np.sqrt(frac * (1 - frac) / samples))


class ParetoArchive:
    """Cumulative set of non-dominated objective vectors."""

    def __init__(self, m: int):
        self.F = np.empty((0, m))

    def update(self, F) -> None:
        F = np.unique(np.atleast_2d(np.asarray(F, dtype=float)), axis=0)
        F = F[~dominance_matrix(F).any(axis=0)]
        if self.F.shape[0]:
            A = self.F
            weakly = np.all(A[:, None, :] <= F[None, :, :], axis=2)
            F = F[~weakly.any(axis=0)]
            if F.shape[0] == 0:
                return
            beaten = np.all(F[:, None, :] <= A[None, :, :], axis=2).any(axis=0)
            A = A[~beaten]
            F = np.vstack([A, F])
        self.F = F

    def __len__(self) -> int:
        return self.F.shape[0]


@dataclass
class HvTrace:
    """Per-generation hypervolume values against fixed normalization bounds."""

    ideal: np.ndarray
    nadir_ref: np.ndarray
    per_generation_hv: list[float] = field(default_factory=list)

    def record(self, points) -> float:
        value = normalized_hv(points, self.ideal, self.nadir_ref)
        self.per_generation_hv.append(value)
        return value

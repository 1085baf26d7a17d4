"""NSGA-III engine: dominance, sorting, reference-point niching and variation.

Populations are stored row-wise: ``X`` holds decision vectors (one row per
member) and ``F`` the matching objective vectors (minimization). All random
draws go through a :class:`numpy.random.Generator` so that a fixed seed
reproduces a run bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from adaptmoea.errors import DimensionError, ParameterError, StateError

if TYPE_CHECKING:
    from adaptmoea.problems import ProblemSpec


@dataclass(frozen=True)
class VariationParams:
    """Operator settings for one generation."""

    eta_sbx: float = 30.0
    eta_plm: float = 20.0
    indpb: float = 0.01
    crossover_prob: float = 1.0

    def __post_init__(self):
        if self.eta_sbx <= 0 or self.eta_plm <= 0:
            raise ParameterError("distribution indices must be positive")
        for name in ("indpb", "crossover_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name}={p} is not a probability")


DEFAULT_PARAMS = VariationParams()


@dataclass
class Population:
    """A generation of candidate solutions.

    ``F`` is ``None`` until the members have been evaluated.
    """

    X: np.ndarray
    F: np.ndarray | None = None
    generation: int = 0

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def evaluated(self) -> bool:
        return self.F is not None

    def require_evaluated(self) -> np.ndarray:
        if self.F is None:
            raise StateError("population has unevaluated members")
        return self.F

    def subset(self, idx) -> Population:
        idx = np.asarray(idx, dtype=int)
        F = None if self.F is None else self.F[idx].copy()
        return Population(self.X[idx].copy(), F, self.generation)


def dominates(a, b) -> bool:
    """Return True when ``a`` Pareto-dominates ``b`` (minimization)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare vectors of shape {a.shape} and {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """Boolean matrix ``D`` with ``D[i, j]`` true iff row i dominates row j."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def non_dominated_sort(F) -> list[np.ndarray]:
    """Partition rows of ``F`` into Pareto fronts.

    Args:
        F: (n, m) objective matrix, or an evaluated :class:`Population`.

    Returns:
        List of index arrays, best front first. Indices inside a front are
        ascending, so the result only depends on the input order.
    """
    if isinstance(F, Population):
        F = F.require_evaluated()
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise DimensionError(f"expected a 2-D objective matrix, got shape {F.shape}")
    n = F.shape[0]
    if n == 0:
        return []
    D = dominance_matrix(F)
    dominated_by = D.sum(axis=0)
    fronts = []
    current = np.flatnonzero(dominated_by == 0)
    while current.size:
        fronts.append(current)
        dominated_by = dominated_by - D[current].sum(axis=0)
        dominated_by[current] = -1
        current = np.flatnonzero(dominated_by == 0)
    return fronts


def das_dennis_points(m: int, p: int) -> np.ndarray:
    """Structured reference points on the unit simplex.

    Returns every vector with coordinates in ``{0, 1/p, ..., 1}`` that sums
    to one; there are ``C(p + m - 1, m - 1)`` of them.
    """
    if m < 2 or p < 1:
        raise ParameterError(f"need m >= 2 and p >= 1, got m={m}, p={p}")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for tail in compositions(total - head, parts - 1):
                yield (head,) + tail

    pts = np.array(list(compositions(p, m)), dtype=float) / p
    assert pts.shape[0] == math.comb(p + m - 1, m - 1)
    return pts


def divisions_for(m: int, n: int) -> int:
    """Smallest lattice resolution giving at least ``n`` reference points."""
    p = 1
    while math.comb(p + m - 1, m - 1) < n:
        p += 1
    return p


def sbx_beta(u, eta: float):
    u = np.asarray(u, dtype=float)
    expo = 1.0 / (eta + 1.0)
    with np.errstate(divide="ignore"):
        return np.where(
            u <= 0.5,
            (2.0 * u) ** expo,
            (1.0 / (2.0 * (1.0 - u))) ** expo,
        )


def sbx_crossover(p1, p2, eta: float, rng, lower=0.0, upper=1.0, clip=True):
    """Simulated binary crossover of two parents.

    Each gene draws its own ``u`` and therefore its own spread factor. The
    children are symmetric around the parents' midpoint before clipping.
    """
    if eta <= 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise DimensionError("parents differ in length")
    u = rng.random(p1.shape[0])
    # 1 - u == 0 gives an infinite spread; keep u strictly below one
    u = np.minimum(u, 1.0 - 1e-12)
    beta = sbx_beta(u, eta)
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    if clip:
        c1 = np.clip(c1, lower, upper)
        c2 = np.clip(c2, lower, upper)
    return c1, c2


def pm_delta(u, eta: float):
    u = np.asarray(u, dtype=float)
    expo = 1.0 / (eta + 1.0)
    return np.where(u < 0.5, (2.0 * u) ** expo - 1.0, 1.0 - (2.0 * (1.0 - u)) ** expo)


def polynomial_mutation(x, eta: float, indpb: float, rng, lower=0.0, upper=1.0):
    """Polynomial mutation with independent per-gene probability ``indpb``.

    Two uniform vectors are always drawn (gate and shape) so the number of
    generator calls does not depend on the outcome.
    """
    if eta <= 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if not 0.0 <= indpb <= 1.0:
        raise ParameterError(f"indpb={indpb} is not a probability")
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    gate = rng.random(n) < indpb
    u = rng.random(n)
    span = np.broadcast_to(np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float), x.shape)
    out = np.where(gate, x + pm_delta(u, eta) * span, x)
    return np.clip(out, lower, upper)


# --- NSGA-III survival -------------------------------------------------------


@dataclass
class Normalization:
    ideal: np.ndarray
    intercepts: np.ndarray

    def apply(self, F: np.ndarray) -> np.ndarray:
        return (F - self.ideal) / self.intercepts


def normalize(F: np.ndarray) -> Normalization:
    """Ideal-point translation plus hyperplane intercepts from extreme points."""
    F = np.asarray(F, dtype=float)
    m = F.shape[1]
    ideal = F.min(axis=0)
    Ft = F - ideal
    weights = np.full((m, m), 1e-6)
    np.fill_diagonal(weights, 1.0)
    asf = np.max(Ft[None, :, :] / weights[:, None, :], axis=2)
    extremes = Ft[np.argmin(asf, axis=1)]
    worst = Ft.max(axis=0)
    try:
        plane = np.linalg.solve(extremes, np.ones(m))
        with np.errstate(divide="ignore"):
            intercepts = 1.0 / plane
        if not np.all(np.isfinite(intercepts)) or np.any(intercepts <= 1e-6):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        intercepts = worst.copy()
    intercepts = np.where(intercepts <= 1e-6, 1.0, intercepts)
    return Normalization(ideal, intercepts)


def associate(Fn: np.ndarray, refs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference line (by perpendicular distance) for each row."""
    w = refs / np.linalg.norm(refs, axis=1, keepdims=True)
    proj = Fn @ w.T
    sq = np.sum(Fn**2, axis=1, keepdims=True) - proj**2
    dist = np.sqrt(np.maximum(sq, 0.0))
    niche = np.argmin(dist, axis=1)
    return niche, dist[np.arange(Fn.shape[0]), niche]


def _first_occurrences(F: np.ndarray, idx: np.ndarray, taken: set) -> tuple[list, list]:
    fresh, dup = [], []
    seen = set(taken)
    for i in idx:
        key = F[i].tobytes()
        if key in seen:
            dup.append(i)
        else:
            seen.add(key)
            fresh.append(i)
    return fresh, dup


def _niching(k, candidates, niche, dist, counts, rng) -> list:
    chosen = []
    pool = {}
    for i in candidates:
        pool.setdefault(int(niche[i]), []).append(i)
    while len(chosen) < k and pool:
        live = np.array(sorted(pool))
        rho = counts[live]
        jmin = live[rho == rho.min()]
        j = int(jmin[rng.integers(jmin.size)]) if jmin.size > 1 else int(jmin[0])
        members = pool[j]
        if counts[j] == 0:
            pick = min(members, key=lambda i: (dist[i], i))
        else:
            pick = members[int(rng.integers(len(members)))]
        members.remove(pick)
        if not members:
            del pool[j]
        chosen.append(pick)
        counts[j] += 1
    return chosen


def nsga3_select(F, refs: np.ndarray, n: int, rng) -> np.ndarray:
    """Choose ``n`` survivors from a merged population.

    Whole fronts are admitted in order; the front that does not fit is
    thinned by reference-point niching. Within that front, exact duplicates
    of already admitted objective vectors are only used once every distinct
    candidate is exhausted, so cloning can never push out a distinct point.

    Returns:
        Sorted indices of the survivors.
    """
    F = np.asarray(F, dtype=float)
    if F.shape[0] < n:
        raise ParameterError(f"cannot select {n} survivors from {F.shape[0]} members")
    if n < 1:
        raise ParameterError("survivor count must be positive")
    refs = np.asarray(refs, dtype=float)
    if refs.size == 0:
        raise ParameterError("reference point set is empty")

    fronts = non_dominated_sort(F)
    admitted: list[int] = []
    last = None
    for front in fronts:
        if len(admitted) + front.size <= n:
            admitted.extend(front.tolist())
            if len(admitted) == n:
                return np.sort(np.array(admitted, dtype=int))
        else:
            last = front
            break

    considered = np.array(admitted + last.tolist(), dtype=int)
    norm = normalize(F[considered])
    niche, dist = associate(norm.apply(F), refs)
    counts = np.zeros(refs.shape[0], dtype=int)
    np.add.at(counts, niche[np.array(admitted, dtype=int)], 1)

    taken = {F[i].tobytes() for i in admitted}
    fresh, dup = _first_occurrences(F, last, taken)
    k = n - len(admitted)
    chosen = _niching(k, fresh, niche, dist, counts, rng)
    if len(chosen) < k:
        chosen += _niching(k - len(chosen), dup, niche, dist, counts, rng)
    return np.sort(np.array(admitted + chosen, dtype=int))


# --- generation step ----------------------------------------------------------


def make_offspring(X: np.ndarray, params: VariationParams, rng, lower, upper) -> np.ndarray:
    """Random pairing, SBX with probability ``crossover_prob``, then mutation."""
    n = X.shape[0]
    order = rng.permutation(n)
    if n % 2:
        order = np.append(order, rng.integers(n))
    children = []
    for a, b in order.reshape(-1, 2):
        if rng.random() < params.crossover_prob:
            c1, c2 = sbx_crossover(X[a], X[b], params.eta_sbx, rng, lower, upper)
        else:
            c1, c2 = X[a].copy(), X[b].copy()
        children.append(c1)
        children.append(c2)
    kids = np.array(children[:n])
    for i in range(n):
        kids[i] = polynomial_mutation(kids[i], params.eta_plm, params.indpb, rng, lower, upper)
    return kids


def evolve_generation(
    pop: Population,
    problem: ProblemSpec,
    params: VariationParams,
    refs: np.ndarray,
    rng,
    executor=None,
) -> Population:
    """One NSGA-III generation: variation, evaluation, survival."""
    F = pop.require_evaluated()
    kids = make_offspring(pop.X, params, rng, problem.lower, problem.upper)
    kid_F = problem.evaluate_many(kids, executor=executor)
    X_all = np.vstack([pop.X, kids])
    F_all = np.vstack([F, kid_F])
    keep = nsga3_select(F_all, refs, len(pop), rng)
    return Population(X_all[keep], F_all[keep], pop.generation + 1)


def random_population(problem: ProblemSpec, n: int, rng, executor=None) -> Population:
    """Uniform initial population inside the problem box, evaluated."""
    X = problem.lower + rng.random((n, problem.n_vars)) * (problem.upper - problem.lower)
    return Population(X, problem.evaluate_many(X, executor=executor), 0)


@dataclass
class NSGA3:
    """Plain NSGA-III loop with fixed operator settings."""

    problem: ProblemSpec
    pop_size: int
    divisions: int | None = None
    params: VariationParams = field(default_factory=VariationParams)

    def run(self, generations: int, seed: int, callback=None) -> Population:
        rng = np.random.default_rng(seed)
        p = self.divisions or divisions_for(self.problem.n_obj, self.pop_size)
        refs = das_dennis_points(self.problem.n_obj, p)
        pop = random_population(self.problem, self.pop_size, rng)
        if callback:
            callback(pop)
        for _ in range(generations):
            pop = evolve_generation(pop, self.problem, self.params, refs, rng)
            if callback:
                callback(pop)
        return pop

    def with_params(self, **kw) -> NSGA3:
        return replace(self, params=replace(self.params, **kw))

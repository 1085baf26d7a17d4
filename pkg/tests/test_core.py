import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptmoea.core import (
    NSGA3,
    Population,
    VariationParams,
    associate,
    das_dennis_points,
    dominates,
    evolve_generation,
    non_dominated_sort,
    normalize,
    nsga3_select,
    polynomial_mutation,
    random_population,
    sbx_crossover,
)
from adaptmoea.errors import DimensionError, ParameterError, StateError
from adaptmoea.hv import hypervolume
from adaptmoea.problems import dtlz2

from conftest import FixedUniform, brute_force_fronts, simplex_lattice


@pytest.mark.parametrize(
    "a, b, expected",
    [((1, 2), (2, 3), True), ((1, 2), (2, 1), False), ((1, 2), (1, 2), False), ((1, 1), (1, 2), True)],
)
def test_dominates(a, b, expected):
    assert dominates(a, b) is expected


def test_dominates_length_mismatch():
    with pytest.raises(DimensionError):
        dominates((1, 2), (1, 2, 3))


def test_sort_small_examples():
    fronts = non_dominated_sort(np.array([[1, 2], [2, 1], [3, 3]]))
    assert [f.tolist() for f in fronts] == [[0, 1], [2]]
    assert [f.tolist() for f in non_dominated_sort(np.array([[5.0, 5.0]]))] == [[0]]


def test_sort_rejects_unevaluated():
    with pytest.raises(StateError):
        non_dominated_sort(Population(np.zeros((3, 2))))


def test_sort_matches_brute_force_30_points(rng):
    F = rng.random((30, 3))
    assert [f.tolist() for f in non_dominated_sort(F)] == brute_force_fronts(F)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 25), st.integers(2, 4)),
           elements=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))
)
def test_front_partition_invariants(F):
    fronts = non_dominated_sort(F)
    flat = np.concatenate(fronts)
    assert sorted(flat.tolist()) == list(range(F.shape[0]))
    for i in fronts[0]:
        assert not any(dominates(F[j], F[i]) for j in fronts[0])
    for k in range(1, len(fronts)):
        for i in fronts[k]:
            assert any(dominates(F[j], F[i]) for j in fronts[k - 1])
    assert [f.tolist() for f in fronts] == brute_force_fronts(F)


def test_das_dennis_small():
    assert {tuple(p) for p in das_dennis_points(2, 1)} == {(0.0, 1.0), (1.0, 0.0)}
    assert {tuple(p) for p in das_dennis_points(3, 1)} == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}


@pytest.mark.parametrize("m, p", [(3, 12), (2, 5), (4, 3)])
def test_das_dennis_matches_enumeration(m, p):
    pts = das_dennis_points(m, p)
    assert pts.shape[0] == math.comb(p + m - 1, m - 1)
    assert np.allclose(pts.sum(axis=1), 1.0, atol=1e-9)
    assert {tuple(np.round(x, 12)) for x in pts} == {tuple(np.round(x, 12)) for x in simplex_lattice(m, p)}
    if (m, p) == (3, 12):
        assert pts.shape[0] == 91


@pytest.mark.parametrize("m, p", [(1, 3), (3, 0)])
def test_das_dennis_bad_args(m, p):
    with pytest.raises(ParameterError):
        das_dennis_points(m, p)


def test_sbx_u_half_returns_parents():
    p1, p2 = np.array([0.1, 0.4, 0.9]), np.array([0.3, 0.2, 0.5])
    c1, c2 = sbx_crossover(p1, p2, 30.0, FixedUniform(0.5))
    assert np.allclose(c1, p1) and np.allclose(c2, p2)


def test_sbx_scalar_oracle():
    def scalar(a, b, eta, u):
        beta = (2 * u) ** (1 / (eta + 1)) if u <= 0.5 else (1 / (2 * (1 - u))) ** (1 / (eta + 1))
        return 0.5 * ((1 + beta) * a + (1 - beta) * b), 0.5 * ((1 - beta) * a + (1 + beta) * b)

    c1, c2 = sbx_crossover(np.full(4, 0.2), np.full(4, 0.8), 30.0, FixedUniform(0.9))
    e1, e2 = scalar(0.2, 0.8, 30.0, 0.9)
    assert np.allclose(c1, e1, atol=1e-15) and np.allclose(c2, e2, atol=1e-15)
    # frozen from the scalar formula
    assert c1[0] == pytest.approx(0.18401339398181288, abs=1e-14)
    assert c2[0] == pytest.approx(0.8159866060181871, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=8),
    st.floats(0.05, 100),
    st.integers(0, 2**32 - 1),
)
def test_sbx_midpoint_and_bounds(genes, eta, seed):
    p1 = np.array(genes)
    p2 = np.random.default_rng(seed).random(p1.size)
    c1, c2 = sbx_crossover(p1, p2, eta, np.random.default_rng(seed), clip=False)
    assert np.allclose((c1 + c2) / 2, (p1 + p2) / 2, atol=1e-9 * (1 + np.abs(c1).max()))
    d1, d2 = sbx_crossover(p1, p2, eta, np.random.default_rng(seed))
    assert np.all((d1 >= 0) & (d1 <= 1) & (d2 >= 0) & (d2 <= 1))


def test_sbx_rejects_bad_eta(rng):
    with pytest.raises(ParameterError):
        sbx_crossover(np.zeros(2), np.ones(2), 0.0, rng)


def test_mutation_examples(rng):
    x = np.array([0.3, 0.5, 0.7])
    assert np.array_equal(polynomial_mutation(x, 20.0, 1.0, FixedUniform(0.5)), x)
    assert np.array_equal(polynomial_mutation(x, 20.0, 0.0, rng), x)
    out = polynomial_mutation(np.array([0.5]), 20.0, 1.0, FixedUniform(0.8))
    assert out[0] == pytest.approx(0.5 + (1 - 0.4 ** (1 / 21)), abs=1e-15)
    assert out[0] == pytest.approx(0.5426946725763838, abs=1e-14)


@pytest.mark.parametrize("eta, indpb", [(0.0, 0.1), (20.0, -0.1), (20.0, 1.5)])
def test_mutation_bad_params(rng, eta, indpb):
    with pytest.raises(ParameterError):
        polynomial_mutation(np.zeros(3), eta, indpb, rng)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0.05, 100),
       st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_mutation_stays_in_bounds(genes, eta, indpb, seed):
    out = polynomial_mutation(np.array(genes), eta, indpb, np.random.default_rng(seed))
    assert np.all((out >= 0) & (out <= 1))


def test_variation_params_validation():
    with pytest.raises(ParameterError):
        VariationParams(indpb=2.0)
    with pytest.raises(ParameterError):
        VariationParams(eta_plm=-1.0)


# --- selection ------------------------------------------------------------------


def test_select_front_exactly_n(rng):
    front = np.array([[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]])
    F = np.vstack([front, front + 1.0])
    assert nsga3_select(F, das_dennis_points(2, 4), 3, rng).tolist() == [0, 1, 2]


def test_select_single_survivor(rng):
    F = rng.random((12, 3))
    keep = nsga3_select(F, das_dennis_points(3, 4), 1, rng)
    assert keep.size == 1 and keep[0] in non_dominated_sort(F)[0]


def test_select_too_few_members(rng):
    with pytest.raises(ParameterError):
        nsga3_select(rng.random((3, 2)), das_dennis_points(2, 3), 5, rng)


def _niching_audit(F, refs, keep):
    """Recompute associations with an explicit loop and check niche fairness."""
    norm = normalize(F)
    Z = norm.apply(F)
    niche = []
    for z in Z:
        best, best_d = None, np.inf
        for j, w in enumerate(refs):
            w = w / np.linalg.norm(w)
            d = np.linalg.norm(z - np.dot(z, w) * w)
            if d < best_d:
                best, best_d = j, d
        niche.append(best)
    counts = np.bincount([niche[i] for i in keep], minlength=len(refs))
    dropped = [i for i in range(F.shape[0]) if i not in set(keep.tolist())]
    starved = [i for i in dropped if counts[niche[i]] == 0]
    return starved, counts


@pytest.mark.parametrize("seed", range(10))
def test_select_niching_audit(seed):
    rng = np.random.default_rng(seed)
    # points on the positive unit sphere: all mutually non-dominated
    F = np.abs(rng.normal(size=(40, 3)))
    F /= np.linalg.norm(F, axis=1, keepdims=True)
    assert len(non_dominated_sort(F)) == 1
    refs = das_dennis_points(3, 4)
    keep = nsga3_select(F, refs, 12, rng)
    assert keep.size == 12
    starved, counts = _niching_audit(F, refs, keep)
    assert not (starved and counts.max() >= 2)


def test_association_agrees_with_loop(rng):
    Z = rng.random((15, 3))
    refs = das_dennis_points(3, 3)
    niche, dist = associate(Z, refs)
    for z, j, d in zip(Z, niche, dist):
        w = refs[j] / np.linalg.norm(refs[j])
        assert d == pytest.approx(np.linalg.norm(z - z @ w * w), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(2, 4), st.integers(0, 2**32 - 1), st.data())
def test_select_returns_exactly_n(size, m, seed, data):
    rng = np.random.default_rng(seed)
    F = rng.integers(0, 4, (size, m)).astype(float)
    n = data.draw(st.integers(1, size))
    keep = nsga3_select(F, das_dennis_points(m, 3), n, rng)
    assert keep.size == n and np.unique(keep).size == n


# --- generations ------------------------------------------------------------------


def test_generation_clones_keep_hypervolume(rng):
    prob = dtlz2()
    refs = das_dennis_points(3, 5)
    pop = random_population(prob, 20, rng)
    for _ in range(5):
        pop = evolve_generation(pop, prob, VariationParams(), refs, rng)
    frozen = VariationParams(indpb=0.0, crossover_prob=0.0)
    r = np.full(3, 5.0)
    before = hypervolume(pop.F, r)
    after = evolve_generation(pop, prob, frozen, refs, rng)
    assert after.generation == pop.generation + 1
    assert hypervolume(after.F, r) == pytest.approx(before, abs=1e-12)


def test_generation_is_deterministic():
    a = NSGA3(dtlz2(), 20).run(3, seed=7)
    b = NSGA3(dtlz2(), 20).run(3, seed=7)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.F, b.F)


def test_population_size_constant(rng):
    prob = dtlz2()
    pop = random_population(prob, 21, rng)
    refs = das_dennis_points(3, 5)
    for _ in range(3):
        pop = evolve_generation(pop, prob, VariationParams(indpb=0.1), refs, rng)
        assert len(pop) == 21
        assert np.all((pop.X >= 0) & (pop.X <= 1))

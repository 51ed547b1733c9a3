import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hpl.measures import (Domain, DomainMismatchError, GridFunction, GridIntensity,
                          MeasureWithAtoms, affinity, dumps_grid, haar_analyze,
                          haar_function_norm_sq, haar_synthesize, hellinger, hellinger_sq,
                          hellinger_sq_matrix, hellinger_sq_with_atoms, l2_dist, l2_dist_sqrt,
                          loads_grid, rescale_to_unit)

cells = arrays(np.float64, 8, elements=st.floats(0, 50, allow_nan=False))


def grid(vals, r=3):
    return GridIntensity(Domain.unit(), r, np.asarray(vals, dtype=float))


def test_constant_pair():
    # sqrt 1 = 1, sqrt 4 = 2: (1/2) * 1^2 * 1
    assert hellinger_sq(GridIntensity.constant(1.0), GridIntensity.constant(4.0)) == 0.5


def test_hand_values():
    s = GridIntensity.constant(1.0, resolution=1)
    t = GridIntensity(Domain.unit(), 1, [0.0, 4.0])
    # (1/2)(1/2)[(1 - 0)^2 + (1 - 2)^2]
    assert hellinger_sq(s, t) == pytest.approx(0.5, abs=1e-15)
    assert affinity(s, t) == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_counting_measure():
    d = Domain.points(3)
    s = GridIntensity(d, 0, [1.0, 4.0, 9.0])
    t = GridIntensity(d, 0, [4.0, 4.0, 0.0])
    assert hellinger_sq(s, t) == pytest.approx(0.5 * (1 + 0 + 9))
    assert s.mass == 14


def test_grid_mismatch():
    with pytest.raises(DomainMismatchError):
        hellinger_sq(GridIntensity.constant(1.0, resolution=1), GridIntensity.constant(1.0, Domain.points(2)))


def test_negative_intensity_rejected():
    with pytest.raises(ValueError):
        grid([-1.0] + [0.0] * 7)


@given(cells, cells)
def test_identity_with_sqrt_distance(a, b):
    s, t = grid(a), grid(b)
    assert hellinger_sq(s, t) == pytest.approx(0.5 * l2_dist_sqrt(s, t) ** 2, abs=1e-9)
    cross = s.cell_measure * float(np.sum(np.sqrt(a * b)))
    assert hellinger_sq(s, t) == pytest.approx(0.5 * (s.mass + t.mass) - cross, abs=1e-9)
    assert affinity(s, t) == pytest.approx(math.exp(-hellinger_sq(s, t)))


@given(cells, cells, cells)
def test_triangle(a, b, c):
    s, t, u = grid(a), grid(b), grid(c)
    assert hellinger(s, u) <= hellinger(s, t) + hellinger(t, u) + 1e-9


@given(cells, cells)
def test_symmetry_and_zero(a, b):
    s, t = grid(a), grid(b)
    assert hellinger_sq(s, t) == hellinger_sq(t, s)
    assert hellinger_sq(s, s) == 0.0


@given(cells, st.floats(0, 50))
def test_refinement_preserves_distance(a, c):
    s = grid(a).refine(5)
    t = GridIntensity(Domain.unit(), 1, [c, 2 * c])
    direct = 0.5 / 8 * float(np.sum((np.sqrt(a) - np.sqrt(np.repeat([c, 2 * c], 4))) ** 2))
    assert hellinger_sq(s, t.refine(5)) == pytest.approx(direct, abs=1e-9)


def test_matrix_matches_pairwise():
    rng = np.random.default_rng(0)
    vals = rng.exponential(size=(5, 8))
    m = hellinger_sq_matrix(np.sqrt(vals), 1 / 8)
    for i in range(5):
        for j in range(5):
            assert m[i, j] == pytest.approx(hellinger_sq(grid(vals[i]), grid(vals[j])), abs=1e-12)


def test_atoms_add_half_mass():
    s = GridIntensity.constant(2.0)
    m = MeasureWithAtoms(s, (((0.5,), 3.0),))
    assert hellinger_sq_with_atoms(m, s) == 1.5
    with pytest.raises(ValueError):
        MeasureWithAtoms(s, (((0.5,), 1.0), ((0.5,), 2.0)))


def test_rescale_keeps_mass():
    t = GridIntensity(Domain.interval(4.0), 2, [1.0, 2.0, 3.0, 4.0])
    u = rescale_to_unit(t)
    assert u.mass == pytest.approx(t.mass)


def test_from_function_is_cell_average():
    f = GridIntensity.from_function(lambda x: 2 * x, resolution=2, samples=4)
    # linear integrand: midpoint rule is exact
    assert np.allclose(f.values, [0.25, 0.75, 1.25, 1.75])


def test_l2_distance():
    a = GridFunction(Domain.unit(), 1, [1.0, -1.0])
    b = GridFunction(Domain.unit(), 1, [0.0, 0.0])
    assert l2_dist(a, b) == pytest.approx(1.0)


@pytest.mark.parametrize("domain,r,vals", [
    (Domain.unit(), 2, [0.1, 2.0, 3.5, 0.0]),
    (Domain.points(3), 0, [1.0, 1e-17, 7.0]),
    (Domain.unit(2), 1, [[1.0, 2.0], [3.0, 4.0]]),
])
def test_serialization_roundtrip(domain, r, vals):
    f = GridIntensity(domain, r, np.asarray(vals))
    g = loads_grid(dumps_grid(f))
    assert g == f
    assert dumps_grid(g) == dumps_grid(f)


def test_haar_hand_values():
    c = haar_analyze(np.array([1.0, 0.0]))
    # <1_[0,1/2), 1> = 1/2 and <1_[0,1/2), psi> = 1/2
    assert c.coefficients == {(-1, 0): 0.5, (0, 0): 0.5}
    flat = haar_analyze(np.ones(8))
    assert flat.coefficients[(-1, 0)] == pytest.approx(1.0)
    assert np.allclose(flat.detail_array(), 0)


@settings(max_examples=30)
@given(st.integers(0, 5), st.integers(1, 2), st.integers(0, 10_000))
def test_haar_roundtrip_parseval(J, dim, seed):
    f = np.random.default_rng(seed).normal(size=(2 ** J,) * dim)
    c = haar_analyze(f)
    assert np.allclose(haar_synthesize(c), f, atol=1e-12)
    assert float(np.sum(c.as_array() ** 2)) == pytest.approx(haar_function_norm_sq(f), abs=1e-10)


def test_haar_rejects_bad_sizes():
    with pytest.raises(ValueError):
        haar_analyze(np.ones(6))
    with pytest.raises(ValueError):
        haar_analyze(np.ones((4, 2)))


def test_cell_measure():
    assert Domain.unit(2).cell_measure(2) == 1 / 16
    assert Domain.points(5).cell_measure(7) == 1.0
    assert math.isclose(Domain.interval(3.0).cell_measure(1), 1.5)

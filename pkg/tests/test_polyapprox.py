import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpl.measures import GridIntensity, Domain
from hpl.polyapprox import haar_bv_tail_check, legendre_unit, loglog_slope, piecewise_poly_approx


def test_legendre_orthonormal():
    x, w = np.polynomial.legendre.leggauss(8)
    u, w = (x + 1) / 2, w / 2
    B = np.stack([legendre_unit(n, u) for n in range(3)])
    assert np.allclose((B * w) @ B.T, np.eye(3), atol=1e-14)


@pytest.mark.parametrize("N", [1, 3, 8])
def test_linear_is_exact(N):
    assert piecewise_poly_approx(lambda x: x, N, 1).l2_error <= 1e-10


def test_member_of_space_has_zero_error():
    vals = np.repeat([1.0, 4.0, -2.0, 0.5], 16)
    assert piecewise_poly_approx(vals, 4, 0).l2_error == pytest.approx(0, abs=1e-12)
    xy = lambda x, y: (x < 0.5) * x * y + 2.0   # noqa: E731
    assert piecewise_poly_approx(xy, 2, 1, dim=2).l2_error <= 1e-10


def test_step_error_hand_value():
    # step at 1/4 inside one of two cells, r = 0: residual +-1/2 on [0,1/2): error sqrt(1/2 * 1/4)
    vals = np.r_[np.zeros(16), np.ones(48)]
    assert piecewise_poly_approx(vals, 2, 0).l2_error == pytest.approx(math.sqrt(1 / 8), abs=1e-12)


def test_dimension():
    assert piecewise_poly_approx(lambda x, y: x, (2, 4), 2, dim=2).dimension == 9 * 8


def test_divisibility():
    with pytest.raises(ValueError):
        piecewise_poly_approx(np.ones(10), 4, 0)
    with pytest.raises(ValueError):
        piecewise_poly_approx(np.ones(4), 2, 3)


def test_sqrt_kink_rates():
    Ns = list(range(2, 65))
    fits = [piecewise_poly_approx(lambda x: np.abs(x - 0.5) ** 0.5, N, 0) for N in Ns]
    # the sup error decays like N^-1/2; in L2 the singularity costs only a log factor
    assert loglog_slope(Ns, [f.sup_error for f in fits]) == pytest.approx(-0.5, abs=0.05)
    assert loglog_slope(Ns, [f.l2_error for f in fits]) <= -0.5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 2))
def test_projection_is_idempotent_and_best(seed, r):
    vals = np.random.default_rng(seed).normal(size=32)
    fit = piecewise_poly_approx(vals, 4, r)
    coarser = piecewise_poly_approx(vals, 4, max(r - 1, 0))
    assert fit.l2_error <= coarser.l2_error + 1e-12
    assert fit.l2_error <= math.sqrt(np.mean((vals - vals.mean()) ** 2)) + 1e-12


def test_haar_axis_aligned_indicator():
    levels = []
    for r in range(4, 8):
        n = 2 ** r
        f = np.zeros((n, n))
        f[: n // 2, :] = 1.0
        rep = haar_bv_tail_check(f, 4.0)
        assert rep.slope == -math.inf          # no detail energy beyond level 0
        assert np.all(rep.level_l1 <= 0.5 + 1e-12)
        levels.append(rep.weak_l1_weight)
    assert np.allclose(levels, levels[0])


def test_haar_half_plane_slope():
    g = GridIntensity.from_function(lambda x, y: (x + y < 1.0).astype(float), Domain.unit(2),
                                    resolution=7, samples=4)
    rep = haar_bv_tail_check(g, 4.0)
    assert rep.slope <= rep.bound_slope + 0.1
    assert rep.level_l1.max() <= 2 * rep.level_l1[0] + 1


def test_haar_constant_rejected():
    with pytest.raises(ValueError):
        haar_bv_tail_check(np.ones((8, 8)), 4.0)
    with pytest.raises(ValueError):
        haar_bv_tail_check(np.eye(8), 2.0)

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import lambertw

from hpl import approx
from hpl.acceptance import brute_force_p_variation

small_arrays = arrays(np.float64, st.integers(1, 9), elements=st.floats(-5, 5))


def test_p_variation_hand_values():
    assert approx.p_variation([0, 1, 0], 2) == pytest.approx(math.sqrt(2))
    assert approx.p_variation([0, 1, 0, 3], 1) == pytest.approx(5.0)
    # for p = 2 skipping the middle point wins: |0 - 3|^2 > 1 + 4
    assert approx.p_variation([0, 1, 3], 2) == pytest.approx(3.0)
    assert approx.p_variation([7.0], 2) == 0.0


@settings(max_examples=60)
@given(small_arrays, st.sampled_from([1.0, 1.5, 2.0, 4.0]))
def test_p_variation_matches_exhaustive(f, p):
    assert approx.p_variation(f, p) == pytest.approx(brute_force_p_variation(f, p), abs=1e-9)


@given(small_arrays)
def test_total_variation_is_sum_of_jumps(f):
    assert approx.alpha_variation(f, 1.0) == pytest.approx(float(np.sum(np.abs(np.diff(f)))), abs=1e-9)


def test_variation_rejects_small_p():
    with pytest.raises(ValueError):
        approx.p_variation([0, 1], 0.5)


def test_dyadic_partition():
    part = approx.DyadicPartition("10100")
    assert part.leaf_count == 3
    assert part.intervals() == [(0.0, 0.5), (0.5, 0.75), (0.75, 1.0)]
    assert part.depth_counts() == {1: 1, 2: 2}
    with pytest.raises(ValueError):
        approx.DyadicPartition("101")
    assert approx.DyadicPartition("100").intervals() == [(0.0, 0.5), (0.5, 1.0)]
    assert approx.DyadicPartition("100").piecewise_mean([1, 3, 5, 7]).tolist() == [2, 2, 6, 6]


def test_adaptive_partition_splits_at_jump():
    f = np.r_[np.zeros(8), np.ones(8)]
    part = approx.adaptive_alpha_partition(f, 1.0, 0.1)
    assert part.bits == "100"
    # single cells carry no variation, so splitting always stops at the grid
    assert approx.adaptive_alpha_partition(np.r_[0.0, 1.0], 1.0, 1e-3).bits == "100"


def test_constants_frozen():
    c1, c2 = approx.prop3_constants(1.0)
    assert c1 == pytest.approx(1 + 1 / math.sqrt(2) + 0.5, abs=1e-12)
    assert c2 == pytest.approx(6.500159360549963, abs=1e-12)
    assert approx.prop3_constants(0.5) == pytest.approx((1.5, math.sqrt(8)))


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0]), st.integers(1, 6))
def test_partition_bounds(seed, alpha, j):
    rng = np.random.default_rng(seed)
    f = np.repeat(rng.normal(size=8), 64)
    V = approx.alpha_variation(f, alpha)
    if V == 0:
        return
    part = approx.adaptive_alpha_partition(f, alpha, approx.partition_epsilon(alpha, j, V))
    c1, c2 = approx.prop3_constants(alpha)
    assert part.leaf_count <= c1 * 2 ** j
    err = math.sqrt(np.mean((f - part.piecewise_mean(f)) ** 2))
    assert err <= c2 * V * 2 ** (-j * alpha)


def test_catalan_counts():
    assert [approx.catalan_number(j) for j in range(8)] == [1, 1, 2, 5, 14, 42, 132, 429]
    fam = approx.catalan_tree_family(5)
    assert len(fam) == 1 + 1 + 2 + 5 + 14
    assert all(w == 2 * m.leaf_count for m, w in fam)
    with pytest.raises(approx.CapacityError):
        approx.catalan_tree_family(20)


def test_catalan_weight_limit():
    assert approx.catalan_weight_limit() == pytest.approx(0.1948621385680009, abs=1e-15)
    tail = approx.catalan_weight_partial(200)
    assert abs(tail[-1] - approx.catalan_weight_limit()) < 1e-12


@pytest.mark.parametrize("n,d", [(4, 1), (5, 2), (6, 3), (8, 4)])
def test_interval_partitions_brute_force(n, d):
    fam, w = approx.interval_partition_family(n, d)
    # brute force: every labelling of n points into d contiguous nonempty runs
    runs = {tuple(labels) for labels in itertools.product(range(d), repeat=n)
            if labels[0] == 0 and labels[-1] == d - 1
            and all(b - a in (0, 1) for a, b in zip(labels, labels[1:]))}
    assert len(fam) == len(runs) == approx.interval_partition_count(n, d)
    assert w == pytest.approx(math.log(math.comb(n, d)) + 2 * math.log(d))


def test_mix_families_shifts_weights():
    mixed = approx.mix_families([[("a", 1.0)], [("b", 2.0), ("c", 3.0)]])
    assert mixed == [(0, "a", 1 + math.log(2)), (1, "b", 2 + math.log(2)), (1, "c", 3 + math.log(2))]


def test_weak_lq_hand():
    beta = [0.1, -3.0, 0.5, 2.0]
    assert approx.rearrangement(beta).tolist() == [3.0, 2.0, 0.5, 0.1]
    # max(3 * 1, 2 * 2, 0.5 * 3, 0.1 * 4) for q = 1
    assert approx.weak_lq_weight(beta, 1.0) == pytest.approx(4.0)
    idx, w = approx.weak_lq_subset(beta, 1, 2)
    assert idx == [1, 3]
    assert w == pytest.approx(2 + math.log(6))
    assert approx.residual_energy(beta, idx) == pytest.approx(0.26)


def test_weak_lq_subset_ties_prefer_low_index():
    idx, _ = approx.weak_lq_subset([1.0, 1.0, 1.0, 1.0], 0, 2)
    assert idx == [0]


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 1.5]), st.integers(0, 40))
def test_tail_bounds_property(seed, q, n):
    rng = np.random.default_rng(seed)
    j = np.arange(1, 65)
    beta = rng.uniform(0.5, 2) * j ** (-1 / q) * rng.uniform(0.1, 1, 64) * rng.choice([-1, 1], 64)
    for p in (2.0, q + 1):
        tb = approx.tail_bounds(rng.permutation(beta), q, p, n)
        assert tb["holds_p"] and tb["holds_2"]


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 1.5]), st.integers(0, 5))
def test_subset_residual(seed, q, j):
    k = 5
    rng = np.random.default_rng(seed)
    beta = np.arange(1, 65) ** (-1 / q) * rng.uniform(0.1, 1, 64)
    beta = rng.permutation(beta)
    idx, _ = approx.weak_lq_subset(beta, min(j, k), k)
    assert approx.residual_energy(beta, idx) <= approx.subset_residual_bound(beta, q, min(j, k), k) * (1 + 1e-12)


@pytest.mark.parametrize("B", [1.0, 16.0, 1e4])
def test_two_term_root_matches_lambert_w(B):
    # B 2^-x = x  <=>  x = W(B ln 2) / ln 2
    x, f, _ = approx.lemma6_minimize(B, 1.0, 1.0)
    assert x == pytest.approx(float(lambertw(B * math.log(2)).real) / math.log(2), rel=1e-12)


def test_two_term_reports():
    _, _, small = approx.lemma6_minimize(1.0, 1.0, 1.0)
    assert small.regime == "small" and 0.5 <= small.c1 < 1
    _, _, large = approx.lemma6_minimize(16.0, 1.0, 1.0)
    assert large.z == pytest.approx(0.6534582549821266)
    assert large.c2_natural == pytest.approx(0.9427409838906698)
    assert large.two_thirds_claim is False


@settings(max_examples=60)
@given(st.floats(0.01, 1e6), st.floats(0.1, 5), st.floats(0.1, 3))
def test_two_term_residual(B, delta, a):
    x, f, rep = approx.lemma6_minimize(B, delta, a)
    assert abs(B * 2 ** (-delta * x) - x ** a) <= 1e-12 * max(1.0, x ** a)
    if rep.regime == "large":
        assert 0.469 < rep.z < 1
    else:
        # c1 tends to 1 as V -> 0
        assert 2 ** -a <= rep.c1 < 1 or (rep.c1 == 1 and rep.V < 1e-12)


@given(st.floats(0.1, 100), st.floats(0.2, 4), st.floats(0.2, 2))
def test_two_term_scaling(B, delta, a):
    # x' = delta x turns B 2^-(delta x) = x^a into (B delta^a) 2^-x' = x'^a
    x, _, _ = approx.lemma6_minimize(B, delta, a)
    y, _, _ = approx.lemma6_minimize(B * delta ** a, 1.0, a)
    assert x == pytest.approx(y / delta, rel=1e-10)

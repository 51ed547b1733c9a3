import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpl import nets, robust, tselect
from hpl.measures import Domain, GridIntensity, hellinger
from hpl.process import PointSample, Seed, poisson_cell_counts, sample_process


def naive_select(net, counts):
    """Straight from the definitions: R_t, D_X(t) = sup over R_t of H, argmin with ties."""
    n = len(net)
    els = net.elements
    rejected_by = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            spec = robust.make_test(els[i], els[j], 0.25, (net.eta[i] ** 2 - net.eta[j] ** 2) / 4)
            if robust.statistic_from_counts(spec, counts) > 0:
                rejected_by[j].add(i)
            else:
                rejected_by[i].add(j)
    dx = [max((hellinger(els[t], els[u]) for u in rejected_by[t]), default=0.0) for t in range(n)]
    best = min(dx)
    tied = [t for t in range(n) if dx[t] == best]
    return min(tied, key=lambda t: (net.eta[t], t)), dx


def random_net(seed, n=6, cells=4):
    rng = np.random.default_rng(seed)
    b = nets.NetBuilder(Domain.unit(), 2)
    for i in range(n):
        b.add_model(f"m{i}", rng.uniform(0, 4, (1, cells)), rng.choice([4.0, 5.0, 6.0]), 0.5, 0.2)
    return b.build()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_matches_naive(seed):
    net = random_net(seed)
    counts = np.random.default_rng(seed + 1).poisson(3, size=4).astype(float)
    want, dx = naive_select(net, counts)
    tests = tselect.PairwiseTests(net)
    got_dx, sel, _ = tests.reduce(tests.statistics(counts))
    assert int(sel[0]) == want
    assert np.allclose(got_dx[0], dx)


def test_select_many_matches_single():
    net = random_net(3)
    counts = poisson_cell_counts(net.element(0), Seed(2).rng(), 30)
    many = tselect.select_many(net, counts, batch=7)
    x = PointSample(Domain.unit(), np.zeros((0, 1)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in (0, 5, 29):
            pts = np.repeat((np.arange(4) + 0.5) / 4, counts[r].astype(int))[:, None]
            x = PointSample(Domain.unit(), pts)
            _, trace = tselect.select(net, x)
            assert trace.selected_index == many[r]


@pytest.mark.parametrize("etas,want", [((5.0, 5.0, 5.0), 1), ((5.0, 6.0, 5.5), 2)])
def test_ties_break_on_eta_then_index(etas, want):
    b = nets.NetBuilder(Domain.unit(), 0)
    for i, (r, e) in enumerate(zip((1.0, 2.0, 3.0), etas)):
        b.add_model(f"m{i}", np.array([[r]]), e, 0.5, 0.3)
    tests = tselect.PairwiseTests(b.build())
    # 0 beats 1, 2 beats 0, 1 beats 2: D_X = (H02, H01, H12) with H01 = H12
    dx, sel, ties = tests.reduce(np.array([[1.0, -1.0, 1.0]]))
    assert dx[0].tolist() == pytest.approx([math.sqrt(2), math.sqrt(0.5), math.sqrt(0.5)])
    assert ties[0] == 2 and sel[0] == want


def test_trace_dumps_and_rejection_sets():
    net = random_net(11, n=4)
    x = sample_process(net.element(2), Seed(0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est, trace = tselect.select(net, x)
    pairs_csv, dx_csv = trace.dumps()
    assert pairs_csv.count("\n") == 1 + 6 and dx_csv.count("\n") == 1 + 4
    for t in range(4):
        for u in trace.rejection_set(t):
            assert trace.decisions[tuple(sorted((t, u)))] == u
    assert est == net.element(trace.selected_index)


def test_warns_when_weights_fail():
    net = nets.build_grid_net(nets.BasisSpec(Domain.points(1), 0, np.eye(1)), 1.0, 4)
    x = PointSample(Domain.points(1), [0, 0])
    with pytest.warns(RuntimeWarning):
        tselect.select(net, x)


def test_net_cap():
    net = random_net(0, n=5)
    with pytest.raises(tselect.NetTooLargeError):
        tselect.PairwiseTests(net, max_elements=4)


def test_estimator_select_picks_truth():
    truth = GridIntensity.constant(100.0, resolution=1)
    cands = [GridIntensity.constant(400.0, resolution=1), truth, GridIntensity.constant(0.0, resolution=1)]
    x = sample_process(truth, Seed(4))
    assert tselect.estimator_select(cands, [1.0, 1.0, 1.0], x) == 1
    with pytest.raises(ValueError):
        tselect.estimator_select(cands, [0.01, 1.0, 1.0], x)


def test_risk_mc():
    truth = GridIntensity.constant(9.0)
    rep = tselect.risk_mc(truth, lambda x: GridIntensity.constant(float(len(x))), 2.0, 400, Seed(1))
    # E (sqrt N - 3)^2 / 2 is about 1/8 for Poisson(9)
    assert 0.05 < rep.mean < 0.25
    with pytest.raises(ValueError):
        tselect.risk_mc(truth, lambda x: truth, 0.5, 10, Seed(1))


def test_zero_intensity_candidates():
    d = Domain.unit()
    b = nets.NetBuilder(d, 1)
    b.add_model("z", np.array([[0.0, 3.0]]), 5.0, 0.5, 0.3)
    b.add_model("w", np.array([[3.0, 0.0]]), 5.0, 0.5, 0.3)
    net = b.build()
    tests = tselect.PairwiseTests(net)
    # a point in the first half is impossible under the first element
    _, sel, _ = tests.reduce(tests.statistics(np.array([1.0, 0.0])))
    assert sel[0] == 1
    assert math.isfinite(tests.statistics(np.array([0.0, 0.0]))[0, 0])

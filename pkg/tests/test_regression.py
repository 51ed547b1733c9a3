import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hpl import nets
from hpl.measures import Domain, GridIntensity
from hpl.process import Seed, poisson_cell_counts
from hpl.regression import (DYADIC, GENERAL, _dyadic_trees, build_regression_family, counts_to_sample,
                            family_weight_sum, matched_eta, minimal_model, oracle_value,
                            piecewise_basis, regression_estimate, regression_net, regression_select_many)


def test_dyadic_tree_counts():
    # depth-2 trees over 4 cells by leaf count
    assert [len(_dyadic_trees(2, n)) for n in (1, 2, 3, 4, 5)] == [1, 1, 2, 1, 0]
    assert _dyadic_trees(2, 3) == ((2, 3), (1, 2))


def test_small_family_frozen():
    fam = build_regression_family(4, 4, general=False) + \
        [m for m in build_regression_family(4, 2) if m.kind == GENERAL]
    kinds = [m.kind for m in fam]
    assert kinds.count(DYADIC) == 1 + 1 + 2 + 5 and kinds.count(GENERAL) == 14
    # e^-2 + e^-4 + 2 e^-6 + 5 e^-8 + 14 / (C(16, 2) * 4)
    want = math.exp(-2) + math.exp(-4) + 2 * math.exp(-6) + 5 * math.exp(-8) + 14 / 480
    assert family_weight_sum(fam) == pytest.approx(want, rel=1e-12)


def test_general_family_has_no_duplicates():
    fam = build_regression_family(3, 3)
    parts = [m.partition for m in fam]
    assert len(parts) == len(set(parts))
    # every partition into <= 3 intervals of 8 points appears once
    assert len(parts) == sum(math.comb(7, d - 1) for d in (1, 2, 3))


def test_family_capacity():
    with pytest.raises(Exception):
        build_regression_family(6, 6, cap=1000)


@given(st.floats(0.1, 10), st.integers(1, 4), st.floats(1, 1e4))
def test_matched_eta_conditions(delta, k, n_obs):
    eta = matched_eta(delta, k, n_obs)
    assert eta ** 2 >= 84 * delta * (1 - 1e-12)
    assert eta ** 2 >= 84 * nets.lattice_dimension(n_obs, eta, k) / 5 * (1 - 1e-9)


def test_piecewise_basis():
    fam = build_regression_family(2, 2, general=False)
    b = piecewise_basis(fam[1], 4)
    assert b.dim == 2 and np.allclose(b.functions[0], [1, 1, 0, 0] / np.sqrt(2))


def test_counts_to_sample():
    x = counts_to_sample([2, 0, 1])
    assert x.counts(0).tolist() == [2, 0, 1]
    with pytest.raises(ValueError):
        counts_to_sample([-1])


def test_oracle_value_prefers_true_cut():
    truth = GridIntensity(Domain.points(4), 0, [100.0, 100.0, 400.0, 400.0])
    fam = build_regression_family(2, 2)
    best = min(fam, key=lambda m: oracle_value(truth, [m]))
    assert best.breakpoints == frozenset({2})


def test_selection_recovers_cut():
    models = build_regression_family(2, 2)
    truth = GridIntensity(Domain.points(4), 0, [1000.0, 1000.0, 4000.0, 4000.0])
    # four cells need large counts before the cut beats eta^2
    net = regression_net(models, 4, truth.mass)
    assert nets.weight_conditions(net)["condition_3_2"]
    sel = regression_select_many(net, poisson_cell_counts(truth, Seed(0).rng(), 40))
    hits = [models[int(net.models[minimal_model(net, int(i))].model_id[1:])].breakpoints == {2}
            for i in sel]
    assert np.mean(hits) >= 0.9
    est, trace, mi = regression_estimate(net, np.array([1000, 1000, 4000, 4000]))
    assert est.values[3] > est.values[0]
    with pytest.raises(ValueError):
        regression_estimate(net, np.array([1, 2, 3]))

"""The acceptance suite: one seeded check per criterion, each returning a result row."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import approx, lower_bounds as lb, measures as ms, nets, process as pr, robust, tselect
from .estimators import histogram_estimator, projection_estimator, rt_aggregate
from .polyapprox import haar_bv_tail_check
from .regression import (build_regression_family, family_weight_sum, minimal_model,
                         regression_net, regression_select_many)

DEFAULT_SEED = 20240611


@dataclass
class Row:
    criterion: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _se(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


# -- 1 ---------------------------------------------------------------------

def metric_exactness(seed: pr.Seed) -> Row:
    one = ms.GridIntensity.constant(1.0)
    four = ms.GridIntensity.constant(4.0)
    h2 = ms.hellinger_sq(one, four)
    rng = seed.rng()
    vals = rng.exponential(size=(3 * 10_000, 8)) * (rng.random((3 * 10_000, 8)) > 0.2)
    roots = np.sqrt(vals).reshape(10_000, 3, 8)
    cm = 1 / 8

    def h(a, b):
        return np.sqrt(0.5 * cm * np.sum((a - b) ** 2, axis=1))

    a, b, c = roots[:, 0], roots[:, 1], roots[:, 2]
    worst_tri = float(np.max(h(a, c) - h(a, b) - h(b, c)))
    worst_id = 0.0
    for i in range(200):
        s = ms.GridIntensity(ms.Domain.unit(), 3, vals[3 * i])
        t = ms.GridIntensity(ms.Domain.unit(), 3, vals[3 * i + 1])
        worst_id = max(worst_id, abs(ms.hellinger_sq(s, t) - 0.5 * ms.l2_dist_sqrt(s, t) ** 2))
        # the affinity form 1/2 (mass + mass') - int sqrt(s t) agrees as well
        alt = 0.5 * (s.mass + t.mass) - cm * float(np.sum(np.sqrt(s.flat * t.flat)))
        worst_id = max(worst_id, abs(ms.hellinger_sq(s, t) - alt))
    ok = abs(h2 - 0.5) <= 1e-12 and worst_tri <= 1e-12 and worst_id <= 1e-12
    return Row(1, "metric exactness", ok, {"H2(1,4)": h2, "max_triangle_excess": worst_tri,
                                           "max_identity_error": worst_id})


# -- 2 ---------------------------------------------------------------------

def flat_family_constant(seed: pr.Seed) -> Row:
    r = 12
    lo, hi = math.inf, -math.inf
    for D in (1, 2, 4):
        width = 2 ** r // D
        for g in (np.ones(width), lb.triangular_g(D, r)):
            fam = lb.build_lemma2_family(D, g, r)
            ratios = lb.neighbor_ratios(fam)
            lo, hi = min(lo, ratios.min()), max(hi, ratios.max())
    ok = lo >= 1 / 8 - 1e-9 and hi <= 1 / 7 + 1e-9
    return Row(2, "neighbour H2/Hamming in [1/8, 1/7]", ok, {"min_ratio": lo, "max_ratio": hi})


# -- 3 ---------------------------------------------------------------------

def _brute_force_trees(leaves: int) -> int:
    """Count preorder 0/1 strings of length 2n-1 that parse as complete binary trees."""
    count = 0
    for bits in itertools.product("01", repeat=2 * leaves - 1):
        need = 1
        ok = True
        for i, b in enumerate(bits):
            need += 1 if b == "1" else -1
            if need == 0 and i != len(bits) - 1:
                ok = False
                break
        count += ok and need == 0
    return count


def catalan_weights(seed: pr.Seed) -> Row:
    partial = approx.catalan_weight_partial(60)
    limit = approx.catalan_weight_limit()
    trunc = abs(limit - partial[-1])
    fam = approx.catalan_tree_family(9)
    counts = [sum(1 for m, _ in fam if m.leaf_count == n) for n in range(1, 10)]
    brute = [_brute_force_trees(n) for n in range(1, 10)]
    closed = [approx.catalan_number(n - 1) for n in range(1, 10)]
    # the exact Catalan-weighted sum sits below the 4^j/(j+1) majorant
    exact = sum(approx.catalan_number(j) * math.exp(-2 * (j + 1)) for j in range(60))
    ok = (trunc < 1e-12 and limit < 1 and abs(limit - 0.1949) < 5e-5 and exact <= limit
          and counts == brute == closed and bool(np.all(np.diff(partial) >= 0)))
    return Row(3, "tree weight sum and Catalan counts", ok,
               {"weight_sum": limit, "catalan_sum": exact, "truncation": trunc,
                "counts": "/".join(map(str, counts))})


# -- 4 ---------------------------------------------------------------------

def _process_truth() -> ms.GridIntensity:
    return ms.GridIntensity.from_function(lambda x: 3 + 2 * np.sin(2 * np.pi * x), resolution=6)


def process_laws(seed: pr.Seed) -> Row:
    s = _process_truth()
    reps = 20_000
    counts = pr.poisson_cell_counts(s, seed.rng(), reps)
    n = counts.sum(axis=1)
    ok_mean = abs(n.mean() - s.mass) <= 4 * math.sqrt(s.mass / reps)
    x = (np.arange(64) + 0.5) / 64
    phi = x ** 2
    f11 = counts @ phi
    exp11 = float(np.sum(phi * s.flat) / 64)
    ok11 = abs(f11.mean() - exp11) <= 4 * _se(f11)
    psi = 0.5 + x
    f12 = np.exp(counts @ np.log(psi))
    exp12 = math.exp(float(np.sum((psi - 1) * s.flat) / 64))
    ok12 = abs(f12.mean() - exp12) <= 4 * _se(f12)
    # exponential bound for log dQ_mu'/dQ_mu >= 2x under mu
    mu2 = ms.GridIntensity(s.domain, s.resolution, s.values * 1.6)
    lr = counts @ pr.log_ratio_cells(mu2, s) + s.mass - mu2.mass
    h2 = ms.hellinger_sq(s, mu2)
    ok19 = True
    worst = -math.inf
    for xx in (0.0, 1.0):
        hit = (lr >= 2 * xx).astype(float)
        bound = math.exp(-h2 - xx)
        worst = max(worst, hit.mean() - bound)
        ok19 &= hit.mean() <= bound + 3 * _se(hit)
    ok = bool(ok_mean and ok11 and ok12 and ok19)
    return Row(4, "process laws", ok, {"mean_N": float(n.mean()), "mass": s.mass,
                                       "linear_mean": float(f11.mean()), "linear_exact": exp11,
                                       "exp_mean": float(f12.mean()), "exp_exact": exp12,
                                       "lr_tail_worst_excess": worst})


# -- 5 ---------------------------------------------------------------------

def thinning(seed: pr.Seed) -> Row:
    s = ms.GridIntensity.constant(5.0, resolution=3)
    p = 0.3
    reps = 20_000
    n1, n2 = np.empty(reps), np.empty(reps)
    rng = seed.rng()
    for r in range(reps):
        a, b = pr.thin(pr.sample_process(s, rng), p, rng)
        n1[r], n2[r] = len(a), len(b)
    rho = float(np.corrcoef(n1, n2)[0, 1])
    ok = (abs(rho) <= 4 / math.sqrt(reps)
          and abs(n1.mean() - p * s.mass) <= 4 * _se(n1)
          and abs(n2.mean() - (1 - p) * s.mass) <= 4 * _se(n2))
    return Row(5, "thinning independence", bool(ok), {"rho": rho, "mean1": float(n1.mean()),
                                                      "mean2": float(n2.mean())})


# -- 6 ---------------------------------------------------------------------

def robust_test_centers(kind: str, h2: float):
    d = ms.Domain.unit()
    if kind == "constant":
        pi = ms.GridIntensity.constant(4.0, d, 1)
        root = 2 + math.sqrt(2 * h2)
        nu = ms.GridIntensity.constant(root ** 2, d, 1)
    else:
        pi = ms.GridIntensity(d, 1, [4.0, 1.0])
        kappa = 2 * math.sqrt(h2)   # raise sqrt on the first half only
        nu = ms.GridIntensity(d, 1, [(2 + kappa) ** 2, 1.0])
    return pi, nu


def robust_test_grid(seed: pr.Seed, reps: int = 5000) -> list[dict]:
    """One row per (centres, H2, x, truth, error kind): empirical error against its bound."""
    rows = []
    cell = 0
    for kind in ("constant", "step"):
        for h2 in (0.25, 0.5, 1.0, 2.0):
            pi, nu = robust_test_centers(kind, h2)
            mid = robust.mix_sqrt(pi, nu, 0.5)
            for x in (-1.0, 0.0, 1.0):
                spec = robust.make_test(pi, nu, 0.25, x)
                cases = (("nu_c", nu, robust.error_bounds(spec, robust.NEAR_NU_C), lambda t: t > 0),
                         ("pi_c", pi, robust.error_bounds(spec, robust.NEAR_PI_C), lambda t: t <= 0),
                         ("mid_upper", mid, robust.theorem5_tail_bound(spec, mid, robust.UPPER),
                          lambda t: t >= 0),
                         ("mid_lower", mid, robust.theorem5_tail_bound(spec, mid, robust.LOWER),
                          lambda t: t <= 0))
                stats = {}
                for truth_name, truth, bound, wrong in cases:
                    key = id(truth)
                    if key not in stats:
                        counts = pr.poisson_cell_counts(truth, seed.substream(cell).rng(), reps)
                        cell += 1
                        stats[key] = robust.statistics_many(spec, counts)
                    err = wrong(stats[key]).astype(float)
                    rows.append({"centers": kind, "H2": h2, "x": x, "truth": truth_name,
                                 "empirical": float(err.mean()), "stderr": _se(err),
                                 "bound": float(bound)})
    return rows


def robust_tests(seed: pr.Seed, reps: int = 5000) -> Row:
    rows = robust_test_grid(seed, reps)
    excess = [r["empirical"] - r["bound"] - 3 * r["stderr"] for r in rows]
    return Row(6, "robust test error bounds", max(excess) <= 0,
               {"cells": len(rows), "worst_excess": max(excess)})


# -- 7 ---------------------------------------------------------------------

def lattice_net_1d(theta: float = 10.0, n_observed: float = 120_000) -> nets.Net:
    basis = nets.BasisSpec(ms.Domain.unit(), 0, np.ones((1, 1)))
    return nets.build_grid_net(basis, theta, n_observed)


def t_estimator_tail(seed: pr.Seed, reps: int = 2000) -> Row:
    net = lattice_net_1d()
    wc = nets.weight_conditions(net)
    truth_idx = int(np.argmin(np.abs(net.roots[:, 0] - 250.0)))
    truth = net.element(truth_idx)
    eta = float(net.eta[truth_idx])
    counts = pr.poisson_cell_counts(truth, seed.rng(), reps)
    sel = tselect.select_many(net, counts)
    h = np.sqrt(net.hellinger_sq_matrix()[truth_idx, sel])
    y = 4 * eta
    hit = (h > y).astype(float)
    bound = net.bprime * wc["sigma_eta"] / 7 * math.exp(-y * y / 6)
    se = _se(hit) if hit.any() else 0.0
    ok = len(net) == 50 and wc["condition_3_2"] and hit.mean() <= bound + 3 * se
    return Row(7, "selection tail bound", bool(ok),
               {"net_size": len(net), "eta": eta, "p_exceed": float(hit.mean()), "bound": bound,
                "mean_H": float(h.mean())})


# -- 8 ---------------------------------------------------------------------

def identity_basis(k: int) -> nets.BasisSpec:
    return nets.BasisSpec(ms.Domain.points(k), 0, np.eye(k))


def cardinality_nets():
    out = []
    for N, k in ((10, 1), (50, 2), (100, 3)):
        eta = nets.default_eta(N, k)
        for theta in (nets.theta_for_eta(eta, k), 1.0):
            out.append((N, k, theta, nets.build_grid_net(identity_basis(k), theta, N)))
    return out


def net_cardinality(seed: pr.Seed) -> Row:
    ok = True
    sizes = []
    for N, k, theta, net in cardinality_nets():
        K = nets.cardinality_bound(N, nets.lattice_eta(k, theta), k)
        sizes.append(f"{len(net)}<={K:.4g}")
        ok &= len(net) <= K
    k2 = nets.lattice_cardinality_bound(100, 5) ** 2
    ok &= 1e9 <= k2 <= 1e11
    return Row(8, "net cardinality bound", bool(ok), {"sizes": " ".join(sizes), "K2_100_5": k2})


# -- 9 ---------------------------------------------------------------------

def dmodel_checks(seed: pr.Seed) -> Row:
    results = []
    candidates = [net for *_, net in cardinality_nets()] + [lattice_net_1d()]
    for net in candidates:
        m = net.models[0]
        results.append(nets.dmodel_check(net, m.eta, m.D, net.bprime, seed=seed).ok)
    single = nets.singleton_net([ms.GridIntensity.constant(c) for c in (1.0, 4.0, 9.0)],
                                [3.0, 3.0, 3.0])
    for m in single.models:
        sub = nets.Net(single.domain, single.resolution, single.roots[list(m.members)],
                       single.eta[list(m.members)], [m], single.bprime)
        results.append(nets.dmodel_check(sub, m.eta, m.D, single.bprime, seed=seed).ok)
    dense = over_dense_net()
    neg = nets.dmodel_check(dense, 1.0, 0.5, 1.0, seed=seed)
    ok = all(results) and not neg.ok
    return Row(9, "D-model counting check", bool(ok),
               {"nets_checked": len(results), "negative_control_ratio": neg.max_ratio})


def over_dense_net(n: int = 200, eta: float = 1.0) -> nets.Net:
    """n elements all within eta/10 of sqrt-constant 10, as a single model."""
    roots = 10 + np.linspace(0, 0.1 * eta * math.sqrt(2) * 0.99, n)[:, None]
    b = nets.NetBuilder(ms.Domain.unit(), 0)
    b.add_model("dense", roots, eta, 0.5, eta ** 2 / 84)
    return b.build()


# -- 10 ----------------------------------------------------------------------

def step_truths(seed: pr.Seed, count: int = 3, cells: int = 1024):
    rng = seed.rng()
    out = []
    for _ in range(count):
        jumps = np.sort(rng.choice(np.arange(1, cells), size=rng.integers(2, 7), replace=False))
        levels = rng.normal(size=jumps.size + 1)
        out.append(np.repeat(levels, np.diff(np.concatenate([[0], jumps, [cells]]))))
    return out


def brute_force_p_variation(f, p: float) -> float:
    f = np.asarray(f, dtype=float)
    n = len(f)
    best = 0.0
    for r in range(n - 1):
        for inner in itertools.combinations(range(1, n - 1), r):
            idx = (0,) + inner + (n - 1,)
            best = max(best, float(np.sum(np.abs(np.diff(f[list(idx)])) ** p)))
    return best ** (1 / p)


def partition_bounds(seed: pr.Seed) -> Row:
    ok = True
    worst_count, worst_err = 0.0, 0.0
    for f in step_truths(seed):
        for alpha in (0.5, 1.0):
            V = approx.alpha_variation(f, alpha)
            c1, c2 = approx.prop3_constants(alpha)
            for j in range(1, 7):
                eps = approx.partition_epsilon(alpha, j, V)
                part = approx.adaptive_alpha_partition(f, alpha, eps)
                err = math.sqrt(np.mean((f - part.piecewise_mean(f)) ** 2))
                worst_count = max(worst_count, part.leaf_count / (c1 * 2 ** j))
                worst_err = max(worst_err, err / (c2 * V * 2 ** (-j * alpha)))
                ok &= part.leaf_count <= c1 * 2 ** j and err <= c2 * V * 2 ** (-j * alpha)
    rng = seed.substream(1).rng()
    dp_err = 0.0
    for n in range(2, 13):
        f = rng.normal(size=n)
        for p in (1.0, 1.5, 2.0, 3.0):
            dp_err = max(dp_err, abs(approx.p_variation(f, p) - brute_force_p_variation(f, p)))
    ok &= dp_err <= 1e-12
    return Row(10, "adaptive partition bounds", bool(ok),
               {"max_count_ratio": worst_count, "max_error_ratio": worst_err, "dp_error": dp_err})


# -- 11 ----------------------------------------------------------------------

def weak_lq_sequences(seed: pr.Seed, count: int = 1000, length: int = 200):
    rng = seed.rng()
    for i in range(count):
        q = (0.5, 1.0, 1.5)[i % 3]
        w = rng.uniform(0.5, 3)
        j = np.arange(1, length + 1)
        a = w * j ** (-1 / q) * rng.uniform(0.2, 1.0, size=length)
        beta = a * rng.choice([-1.0, 1.0], size=length)
        yield q, rng.permutation(beta), int(rng.integers(1, 60))


def weak_lq_bounds(seed: pr.Seed) -> Row:
    ok = True
    worst = 0.0
    for q, beta, n in weak_lq_sequences(seed):
        for p in (2.0, q + 1.0):
            tb = approx.tail_bounds(beta, q, p, n)
            ok &= tb["holds_p"] and tb.get("holds_2", True)
            worst = max(worst, tb["lhs_p"] / tb["rhs_p"], tb.get("lhs_2", 0) / tb.get("rhs_2", 1))
    return Row(11, "weak-lq tail bounds", bool(ok), {"max_ratio": worst})


# -- 12 ----------------------------------------------------------------------

def two_term_minimization(seed: pr.Seed) -> Row:
    ok = True
    worst_res, small, large = 0.0, 0, 0
    claim_fails = 0
    for B in (0.1, 0.5, 1.0, 2.0, 16.0, 100.0, 1e4, 1e8):
        for delta in (0.25, 1.0, 3.0):
            for a in (0.25, 0.5, 1.0, 2.0):
                x, f, rep = approx.lemma6_minimize(B, delta, a)
                res = abs(B * 2 ** (-delta * x) - x ** a) / max(1.0, x ** a)
                worst_res = max(worst_res, res)
                ok &= res <= 1e-12
                if rep.V <= 2:
                    small += 1
                    ok &= 2 ** -a <= rep.c1 < 1
                else:
                    large += 1
                    ok &= 0.469 < rep.z < 1 and rep.z >= rep.z_lower - 1e-12
                    claim_fails += not rep.two_thirds_claim
    return Row(12, "two-term minimization", bool(ok),
               {"max_residual": worst_res, "small_V": small, "large_V": large,
                "two_thirds_claim_failures": claim_fails})


# -- 13 ----------------------------------------------------------------------

def _indicator_basis(res: int, pieces: int) -> nets.BasisSpec:
    labels = np.arange(2 ** res) * pieces // 2 ** res
    return nets.BasisSpec.piecewise_constant(ms.Domain.unit(), res, labels)


def estimator_bound_scenarios():
    f1 = ms.GridIntensity.from_function(lambda x: 20 + 10 * np.cos(3 * x), resolution=5)
    f2 = ms.GridIntensity.from_function(lambda x: 40 * (x > 0.3) + 5, resolution=5)
    f3 = ms.GridIntensity.from_function(lambda x: 60 * x ** 2, resolution=5)
    return [(f1, 4), (f2, 8), (f3, 2)]


def estimator_bounds(seed: pr.Seed, reps: int = 1500) -> Row:
    ok = True
    detail = {}
    for si, (s, pieces) in enumerate(estimator_bound_scenarios()):
        basis = _indicator_basis(s.resolution, pieces)
        coef = basis.cell_measure * basis.functions @ s.flat
        approx_err = float(ms.l2_dist(s, ms.GridFunction(s.domain, s.resolution, coef @ basis.functions)) ** 2)
        sup = float(s.flat.max())
        rng = seed.substream(si).rng()
        l2 = np.empty(reps)
        hh = np.empty(reps)
        labels = [(k * 2 ** s.resolution // pieces, (k + 1) * 2 ** s.resolution // pieces)
                  for k in range(pieces)]
        proj = None
        for r in range(reps):
            x = pr.sample_process(s, rng)
            l2[r] = ms.l2_dist(projection_estimator(x, basis).raw, s) ** 2
            rep = histogram_estimator(x, labels, s.resolution, truth=s)
            hh[r] = rep.loss_hellinger_sq
            proj = rep.truth_projection
        b22 = approx_err + sup * basis.dim
        bh = ms.hellinger_sq(s, proj) + pieces / 2
        ok &= l2.mean() <= b22 + 3 * _se(l2) and hh.mean() <= bh + 3 * _se(hh)
        detail[f"s{si}_proj"] = f"{l2.mean():.4g}<={b22:.4g}"
        detail[f"s{si}_hist"] = f"{hh.mean():.4g}<={bh:.4g}"
    # aggregation by thinning at p = 1/2
    s, _ = estimator_bound_scenarios()[0]
    p = 0.5
    bases = [_indicator_basis(s.resolution, k) for k in (1, 2, 4)]
    rng = seed.substream(10).rng()
    lhs, rhs = np.empty(reps), np.empty(reps)
    for r in range(reps):
        x1, x2 = pr.thin(pr.sample_process(s, rng), p, rng)
        ests = [projection_estimator(x1, b).raw for b in bases]
        agg = rt_aggregate(ests, x2, p)
        tilde = agg.coefficients
        lhs[r] = s.cell_measure * float(np.sum((tilde - (1 - p) * s.flat) ** 2))
        A = np.array([e.flat for e in ests]).T
        coef, *_ = np.linalg.lstsq(A, p * s.flat, rcond=None)
        rhs[r] = s.cell_measure * float(np.sum((A @ coef - p * s.flat) ** 2))
    bound = rhs.mean() + (1 - p) * float(s.flat.max()) * len(bases)
    ok &= lhs.mean() <= bound + 3 * math.sqrt(_se(lhs) ** 2 + _se(rhs) ** 2)
    detail["aggregate"] = f"{lhs.mean():.4g}<={bound:.4g}"
    return Row(13, "estimator risk bounds", bool(ok), detail)


# -- 14 ----------------------------------------------------------------------

def selection_candidates():
    d = ms.Domain.unit()
    truth = ms.GridIntensity.constant(100.0, d, 2)
    others = [ms.GridIntensity.constant(400.0, d, 2), ms.GridIntensity.constant(0.0, d, 2),
              ms.GridIntensity(d, 2, [400.0, 400.0, 0.0, 0.0]),
              ms.GridIntensity(d, 2, [0.0, 0.0, 400.0, 400.0])]
    return truth, [others[0], others[1], truth, others[2], others[3]]


def aggregation_selects_truth(seed: pr.Seed, reps: int = 2000) -> Row:
    truth, cands = selection_candidates()
    min_h2 = min(ms.hellinger_sq(truth, c) for c in cands if c != truth)
    deltas = [1.0] * len(cands)
    net = nets.singleton_net(cands, [math.sqrt(84 * d) for d in deltas], deltas)
    counts = pr.poisson_cell_counts(truth, seed.rng(), reps)
    sel = tselect.select_many(net, counts)
    chosen = np.array([tselect.candidate_index(net, int(i)) for i in sel])
    freq = float(np.mean(chosen == 2))
    return Row(14, "selection among candidates", freq >= 0.9 and min_h2 >= 50,
               {"frequency": freq, "min_H2": min_h2})


# -- 15 ----------------------------------------------------------------------

def lower_bound_checks(seed: pr.Seed, reps: int = 5000) -> Row:
    ok = True
    worst_avg = math.inf
    r = 10
    for D in (1, 2, 4, 8):
        for g in (np.ones(2 ** r // D), lb.triangular_g(D, r)):
            avg = lb.neighbor_affinity_average(lb.build_lemma2_family(D, g, r))
            worst_avg = min(worst_avg, avg)
            ok &= avg >= lb.EXP_M2_7
    D, L = 4, 6.0
    fam = lb.build_corollary1_family(D, L)
    value = lb.linf_family_bound(D, L)
    exact = D * L / 24 * math.exp(-2 / 7)
    bound = lb.assouad_lower_bound(fam)
    ok &= abs(value - exact) <= 1e-9 and bound >= value - 1e-12
    blocks = [(k * 2 ** fam.resolution // D, (k + 1) * 2 ** fam.resolution // D) for k in range(D)]
    deltas = [(0, 0, 0, 0), (1, 1, 1, 1), (0, 1, 0, 1), (1, 0, 0, 1)]
    chk = lb.estimator_vs_bound(fam, lambda x: histogram_estimator(x, blocks, fam.resolution).estimate,
                                reps, seed, deltas)
    ok &= chk.max_risk >= 0.9 * value
    cert = True
    for Dp in (1, 2, 4):
        pf = lb.build_prop4_family(Dp)
        vals = np.concatenate([m.flat for m in pf.members().values()])
        cert &= bool(vals.min() >= 9 * Dp ** 3 and vals.max() <= 15 * Dp ** 3)
        for alpha in (0.5, 1.0):
            cert &= lb.variation_certificate(pf, alpha)[0]
    ok &= cert
    return Row(15, "lower bounds", bool(ok), {"min_affinity_avg": worst_avg, "linf_bound": value,
                                              "assouad_bound": bound, "hist_max_risk": chk.max_risk,
                                              "variation_certificate_ok": cert})


# -- 16 ----------------------------------------------------------------------

def likelihood_inequalities(seed: pr.Seed, reps: int = 20_000) -> Row:
    rng = seed.rng()
    ok = True
    worst = -math.inf
    for _ in range(1000):
        f = rng.uniform(0.1, 3, 16)
        g = rng.uniform(0, 3, 16) * f
        fp = rng.uniform(0, 3, 16)
        K = float(np.max(g / f))
        lhs, rhs = robust.weighted_ratio_sides(f, g, fp, K, 1 / 16)
        worst = max(worst, lhs - rhs)
        ok &= lhs <= rhs + 1e-12
    d = ms.Domain.unit()
    worst9 = -math.inf
    for i in range(5):
        r2 = seed.substream(i).rng()
        nu = ms.GridIntensity(d, 2, r2.uniform(1, 6, 4))
        pi = ms.GridIntensity(d, 2, nu.flat * r2.uniform(0.3, 2.0, 4))
        mu = ms.GridIntensity(d, 2, r2.uniform(0.5, 6, 4))
        vals = robust.sqrt_likelihood_ratio_many(pr.poisson_cell_counts(mu, r2, reps), pi, nu)
        bound = robust.loglr_tail_bound(mu, pi, nu)
        worst9 = max(worst9, vals.mean() - bound)
        ok &= vals.mean() <= bound + 3 * _se(vals)
    return Row(16, "likelihood inequalities", bool(ok), {"weighted_ratio_max_excess": worst,
                                                   "loglr_tail_max_excess": worst9})


# -- 17 ----------------------------------------------------------------------

def haar_checks(seed: pr.Seed) -> Row:
    rng = seed.rng()
    err = 0.0
    for shape in ((64,), (16, 16), (32, 32)):
        f = rng.normal(size=shape)
        c = ms.haar_analyze(f)
        err = max(err, float(np.max(np.abs(ms.haar_synthesize(c) - f))))
        err = max(err, abs(float(np.sum(c.as_array() ** 2)) - ms.haar_function_norm_sq(f)))
    slopes = []
    for func in (lambda x, y: (x + y < 1.0).astype(float), lambda x, y: (x < 1 / 3).astype(float)):
        g = ms.GridIntensity.from_function(func, ms.Domain.unit(2), resolution=8, samples=4)
        slopes.append(haar_bv_tail_check(g, 4.0).slope)
    bound = -2 * (0.5 - 1 / 4) + 0.1
    ok = err <= 1e-12 and all(s <= bound for s in slopes)
    return Row(17, "Haar transform and tail decay", bool(ok),
               {"roundtrip_parseval_error": err, "slopes": " ".join(f"{s:.4f}" for s in slopes),
                "slope_limit": bound})


# -- 18 ----------------------------------------------------------------------

def regression_models():
    dyadic = build_regression_family(4, 4, general=False)
    general = [m for m in build_regression_family(4, 2) if m.kind == "general"]
    return dyadic + general


def regression_scenarios():
    d = ms.Domain.points(16)
    return {"constant": ms.GridIntensity(d, 0, np.full(16, 100.0)),
            "cut": ms.GridIntensity(d, 0, np.r_[np.full(8, 100.0), np.full(8, 400.0)])}


def regression_checks(seed: pr.Seed, reps: int = 500) -> Row:
    models = regression_models()
    out = {"weight_sum": family_weight_sum(models)}
    ok = out["weight_sum"] < 3
    for si, (name, truth) in enumerate(regression_scenarios().items()):
        net = regression_net(models, 16, truth.mass)
        counts = pr.poisson_cell_counts(truth, seed.substream(si).rng(), reps)
        sel = regression_select_many(net, counts)
        chosen = [models[int(net.models[minimal_model(net, int(i))].model_id[1:])] for i in sel]
        if name == "constant":
            freq = float(np.mean([m.size <= 2 for m in chosen]))
        else:
            freq = float(np.mean([8 in m.breakpoints for m in chosen]))
        out[f"{name}_frequency"] = freq
        out[f"{name}_net_size"] = len(net)
        ok &= freq >= 0.9
    return Row(18, "Poisson regression selection", bool(ok), out)


CHECKS: list[Callable[[pr.Seed], Row]] = [
    metric_exactness, flat_family_constant, catalan_weights, process_laws, thinning, robust_tests,
    t_estimator_tail, net_cardinality, dmodel_checks, partition_bounds, weak_lq_bounds, two_term_minimization,
    estimator_bounds, aggregation_selects_truth, lower_bound_checks, likelihood_inequalities, haar_checks,
    regression_checks,
]


def run_checks(seed_value: int = DEFAULT_SEED) -> list[Row]:
    """Criteria 1-18; each gets its own stream so they can run in any order."""
    return [check(pr.Seed(seed_value, 100 + i)) for i, check in enumerate(CHECKS)]


def verify_all(seed_value: int = DEFAULT_SEED) -> tuple[list[Row], str]:
    """Run 1-18 twice and add the byte-identity row for 19."""
    rows = run_checks(seed_value)
    first = rows_csv(rows, seed_value)
    second = rows_csv(run_checks(seed_value), seed_value)
    rows.append(Row(19, "reproducibility", first == second, {"csv_bytes": len(first.encode())}))
    return rows, rows_csv(rows, seed_value)


def rows_csv(rows: list[Row], seed_value: int) -> str:
    lines = [f"# verify-all seed={seed_value}", "criterion,name,status,measured"]
    for r in rows:
        measured = ";".join(f"{k}={fmt(v)}" for k, v in r.measured.items())
        lines.append(f"{r.criterion},{r.name},{r.status},\"{measured}\"")
    return "\n".join(lines) + "\n"

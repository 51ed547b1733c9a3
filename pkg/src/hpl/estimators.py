"""Projection and histogram estimators, thinning-based aggregation and spanned model families."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .approx import DyadicPartition
from .measures import GridFunction, GridIntensity, check_same_grid, hellinger_sq, l2_dist
from .nets import (BasisSpec, Net, NetBuilder, build_grid_net, condition_eta, lattice_dimension,
                   lattice_eta, default_eta, theta_for_eta)
from .process import PointSample

MAX_AGGREGATION_ESTIMATES = 12


@dataclass
class EstimatorReport:
    raw: GridFunction                 # before clipping, may be signed
    estimate: GridIntensity
    coefficients: np.ndarray | None = None
    loss_l2_sq: float | None = None
    loss_hellinger_sq: float | None = None
    truth_projection: GridIntensity | None = None


def _with_losses(rep: EstimatorReport, truth: GridIntensity | None) -> EstimatorReport:
    if truth is not None:
        check_same_grid(truth, rep.estimate)
        rep.loss_l2_sq = l2_dist(rep.estimate, truth) ** 2
        rep.loss_hellinger_sq = hellinger_sq(rep.estimate, truth)
    return rep


def _clip(f: GridFunction) -> GridIntensity:
    return GridIntensity(f.domain, f.resolution, np.maximum(f.values, 0.0))


def projection_estimator(sample: PointSample, basis: BasisSpec,
                         truth: GridIntensity | None = None) -> EstimatorReport:
    """sum_j [sum_i phi_j(X_i)] phi_j, plus its positive part."""
    if sample.domain != basis.domain:
        raise ValueError("sample lives on a different domain")
    counts = sample.counts(basis.resolution)
    coef = basis.functions @ counts
    raw = GridFunction(basis.domain, basis.resolution,
                       (coef @ basis.functions).reshape(basis.domain.shape(basis.resolution)))
    return _with_losses(EstimatorReport(raw, _clip(raw), coef), truth)


def _partition_slices(partition, ncells: int) -> list[tuple[int, int]]:
    if isinstance(partition, DyadicPartition):
        return partition.grid_slices(ncells)
    slices = [(int(lo), int(hi)) for lo, hi in partition]
    edges = [lo for lo, _ in slices] + [slices[-1][1]]
    if edges[0] != 0 or edges[-1] != ncells or any(lo >= hi for lo, hi in slices) \
            or any(slices[i][1] != slices[i + 1][0] for i in range(len(slices) - 1)):
        raise ValueError("partition does not tile the grid with nonempty cells")
    return slices


def histogram_estimator(sample: PointSample, partition, resolution: int = 0,
                        truth: GridIntensity | None = None) -> EstimatorReport:
    """sum_j N_j / lambda(I_j) 1_{I_j} on a 1-D domain.

    `partition` is a DyadicPartition or a list of [lo, hi) grid-cell ranges.
    When the truth is given its cellwise projection s_bar_m is reported too.
    """
    d = sample.domain
    if d.dim != 1:
        raise ValueError("histograms are implemented for 1-D domains")
    ncells = d.side_cells(resolution)
    cm = d.cell_measure(resolution)
    slices = _partition_slices(partition, ncells)
    counts = sample.counts(resolution)
    vals = np.empty(ncells)
    proj = np.empty(ncells) if truth is not None else None
    for lo, hi in slices:
        measure = cm * (hi - lo)
        if measure <= 0:
            raise ValueError("zero-measure cell")
        vals[lo:hi] = counts[lo:hi].sum() / measure
        if truth is not None:
            proj[lo:hi] = truth.flat[lo:hi].mean()
    est = GridIntensity(d, resolution, vals)
    rep = EstimatorReport(est, est, None)
    if truth is not None:
        rep.truth_projection = GridIntensity(d, resolution, proj)
    return _with_losses(rep, truth)


def rt_aggregate(estimates: Sequence[GridFunction], sample2: PointSample, p: float,
                 truth: GridIntensity | None = None) -> EstimatorReport:
    """Projection estimate of (1-p)s on the span of the first-stage estimates, divided by 1-p.

    `coefficients` holds the raw (un-rescaled) projection tilde-s cell values.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not estimates:
        raise ValueError("no estimates to aggregate")
    first = estimates[0]
    vecs = np.array([e.flat for e in estimates])
    if not np.any(vecs):
        raise ValueError("zero span")
    basis = BasisSpec.orthonormalize(first.domain, first.resolution, vecs)
    tilde = projection_estimator(sample2, basis).raw
    raw = GridFunction(first.domain, first.resolution, tilde.values / (1 - p))
    rep = EstimatorReport(raw, _clip(raw), tilde.flat.copy())
    return _with_losses(rep, truth)


def span_dimension(estimates: Sequence[GridFunction]) -> int:
    first = estimates[0]
    vecs = np.array([e.flat for e in estimates])
    return BasisSpec.orthonormalize(first.domain, first.resolution, vecs).dim


def subset_weight(k: int, size: int) -> float:
    """log C(k, |m|) + 2 log |m|."""
    return math.log(math.comb(k, size)) + 2 * math.log(size)


def linear_aggregation_models(estimates: Sequence[GridIntensity], n_observed: float,
                              theta: float | None = None, cap: int = 2000) -> Net:
    """One discretized model per nonvoid subset m, spanned by sqrt of the estimates in m.

    The default theta follows the default eta for each subset's span
    dimension; eta_m is raised until the weight conditions hold.
    """
    k = len(estimates)
    if k == 0:
        raise ValueError("no estimates")
    if k > MAX_AGGREGATION_ESTIMATES:
        raise ValueError(f"at most {MAX_AGGREGATION_ESTIMATES} estimates (2^k - 1 subsets)")
    first = estimates[0]
    builder = NetBuilder(first.domain, first.resolution)
    for size in range(1, k + 1):
        for m in itertools.combinations(range(k), size):
            vecs = np.array([np.sqrt(estimates[i].flat) for i in m])
            if not np.any(vecs):
                continue
            basis = BasisSpec.orthonormalize(first.domain, first.resolution, vecs)
            th = theta if theta is not None else theta_for_eta(default_eta(n_observed, basis.dim), basis.dim)
            delta = subset_weight(k, size)
            lat = lattice_eta(basis.dim, th)
            eta = condition_eta(delta, lattice_dimension(n_observed, lat, basis.dim), lat)
            before = len(builder)
            build_grid_net(basis, th, n_observed, model_id="m" + "-".join(map(str, m)),
                           delta=delta, builder=builder, eta_model=eta)
            if len(builder) > cap:
                raise RuntimeError(f"aggregation net exceeds {cap} elements after subset {m} "
                                   f"({len(builder) - before} new)")
    return builder.build()

"""Poisson regression on {1..N}: piecewise-constant model families, nets and selection."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .approx import CapacityError, interval_partition_weight
from .measures import Domain, GridIntensity
from .nets import (BasisSpec, Net, NetBuilder, build_grid_net, lattice_dimension)
from .process import PointSample
from .tselect import select, select_many

DYADIC = "dyadic"
GENERAL = "general"


@dataclass(frozen=True)
class RegressionModel:
    partition: tuple[tuple[int, int], ...]   # [lo, hi) cell ranges
    weight: float
    kind: str

    @property
    def size(self) -> int:
        return len(self.partition)

    @property
    def breakpoints(self) -> frozenset:
        return frozenset(lo for lo, _ in self.partition[1:])


@lru_cache(maxsize=None)
def _dyadic_trees(depth: int, leaves: int) -> tuple[tuple[int, ...], ...]:
    """Breakpoint sets (in units of the root length / 2^depth) of trees with given leaf count."""
    if leaves == 1:
        return ((),)
    if depth == 0:
        return ()
    half = 2 ** (depth - 1)
    out = []
    for k in range(1, leaves):
        for left in _dyadic_trees(depth - 1, k):
            for right in _dyadic_trees(depth - 1, leaves - k):
                out.append(left + (half,) + tuple(half + b for b in right))
    return tuple(out)


def _partition_from_breaks(breaks, n_cells: int) -> tuple[tuple[int, int], ...]:
    edges = (0,) + tuple(breaks) + (n_cells,)
    return tuple(zip(edges[:-1], edges[1:]))


def build_regression_family(n: int, max_d: int = 6, max_dyadic_leaves: int | None = None,
                            general: bool = True, cap: int = 200_000) -> list[RegressionModel]:
    """Dyadic tree partitions (weight 2|m|) plus the other interval partitions up to max_d pieces.

    Regular partitions are dyadic, so they always carry the dyadic weight.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    N = 2 ** n
    max_leaves = max_d if max_dyadic_leaves is None else max_dyadic_leaves
    models = []
    seen = set()
    for leaves in range(1, min(max_leaves, N) + 1):
        for breaks in _dyadic_trees(n, leaves):
            part = _partition_from_breaks(breaks, N)
            seen.add(part)
            models.append(RegressionModel(part, 2.0 * leaves, DYADIC))
            if len(models) > cap:
                raise CapacityError(f"more than {cap} dyadic models")
    if general:
        for d in range(2, min(max_d, N) + 1):
            if math.comb(N - 1, d - 1) > cap:
                raise CapacityError(f"too many partitions into {d} intervals")
            w = interval_partition_weight(N, d)
            for breaks in itertools.combinations(range(1, N), d - 1):
                part = _partition_from_breaks(breaks, N)
                if part not in seen:
                    models.append(RegressionModel(part, w, GENERAL))
            if len(models) > cap:
                raise CapacityError(f"more than {cap} models")
    return models


def family_weight_sum(models) -> float:
    return float(sum(math.exp(-m.weight) for m in models))


def piecewise_basis(model: RegressionModel, N: int) -> BasisSpec:
    labels = np.empty(N, dtype=int)
    for i, (lo, hi) in enumerate(model.partition):
        labels[lo:hi] = i
    return BasisSpec.piecewise_constant(Domain.points(N), 0, labels)


def matched_eta(delta: float, k: int, n_observed: float) -> float:
    """Smallest eta with eta^2 >= 84 Delta and eta^2 >= 84 D(eta) / 5, D from the lattice count."""
    eta = math.sqrt(84 * delta)
    for _ in range(100):
        need = math.sqrt(84 * lattice_dimension(n_observed, eta, k) / 5)
        if need <= eta:
            return eta
        eta = need
    return eta


def regression_net(models, N: int, n_observed: float, theta: float | None = None) -> Net:
    """Union of lattice nets, one per model; theta = 2 eta_m / sqrt|m| unless given."""
    builder = NetBuilder(Domain.points(N), 0)
    for i, m in enumerate(models):
        basis = piecewise_basis(m, N)
        eta = matched_eta(m.weight, basis.dim, n_observed)
        th = 2 * eta / math.sqrt(basis.dim) if theta is None else theta
        build_grid_net(basis, th, n_observed, model_id=f"m{i}", delta=m.weight, builder=builder,
                       eta_model=max(eta, math.sqrt(basis.dim) * th / 2))
    return builder.build()


def counts_to_sample(counts) -> PointSample:
    counts = np.asarray(counts, dtype=np.int64).reshape(-1)
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    return PointSample(Domain.points(counts.size), np.repeat(np.arange(counts.size), counts))


def minimal_model(net: Net, element: int) -> int:
    """Index of the smallest-eta model containing the element (lowest index on ties)."""
    best = None
    for mi, m in enumerate(net.models):
        if element in m.members and (best is None or m.eta < net.models[best].eta):
            best = mi
    return best


def regression_estimate(net: Net, counts):
    """Select from the merged net; returns (estimate, trace, index of its minimal model)."""
    sample = counts_to_sample(counts)
    if sample.domain != net.domain:
        raise ValueError("counts length does not match the net")
    est, trace = select(net, sample)
    return est, trace, minimal_model(net, trace.selected_index)


def regression_select_many(net: Net, counts: np.ndarray) -> np.ndarray:
    return select_many(net, np.asarray(counts, dtype=float))


def oracle_value(truth: GridIntensity, models) -> float:
    """min over models of ||sqrt s - proj||^2 + Delta_m, the right-hand side shape of the risk bound."""
    r = np.sqrt(truth.flat)
    best = math.inf
    for m in models:
        err = sum(float(np.sum((r[lo:hi] - r[lo:hi].mean()) ** 2)) for lo, hi in m.partition)
        best = min(best, err + m.weight)
    return best

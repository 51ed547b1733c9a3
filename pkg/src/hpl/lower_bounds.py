"""Hypercube families of intensities and the minimax lower bounds they certify."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .approx import p_variation
from .measures import Domain, GridIntensity, hellinger_sq, l2_dist
from .process import PointSample, Seed, sample_process

EXP_M2_7 = math.exp(-2 / 7)
MAX_MATERIALIZED_D = 16
MAX_ENUMERATED_PAIRS_D = 12


@dataclass(eq=False)
class AssouadFamily:
    """s_delta = a^-1 [1 + sum_j (delta_j - 1/2) g_j], g_j the translate of g to block j.

    `g` holds cell values of g on the first block [0, 1/D) of a 2^r grid on
    [0, 1]. When `explicit` is given the members are read from it instead.
    """

    D: int
    resolution: int
    g: np.ndarray | None
    a: float
    explicit: dict | None = None
    theta: float | None = None        # d^2 / Hamming ratio for the L2 metric
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def domain(self) -> Domain:
        return Domain.unit() if self.explicit is None else next(iter(self.explicit.values())).domain

    def member(self, delta: Sequence[int]) -> GridIntensity:
        delta = tuple(int(d) for d in delta)
        if len(delta) != self.D or any(d not in (0, 1) for d in delta):
            raise ValueError("delta must be a 0/1 vector of length D")
        if self.explicit is not None:
            return self.explicit[delta]
        if delta not in self._cache:
            signs = np.asarray(delta, dtype=float) - 0.5
            vals = (1 + np.outer(signs, self.g).reshape(-1)) / self.a
            m = GridIntensity(Domain.unit(), self.resolution, vals)
            if self.D > MAX_MATERIALIZED_D:
                return m
            self._cache[delta] = m
        return self._cache[delta]

    def deltas(self):
        return itertools.product((0, 1), repeat=self.D)

    def members(self) -> dict:
        if self.D > MAX_MATERIALIZED_D:
            raise ValueError("too many members to materialize; use member(delta)")
        return {d: self.member(d) for d in self.deltas()}


def hamming(d1: Sequence[int], d2: Sequence[int]) -> int:
    return int(sum(a != b for a, b in zip(d1, d2)))


def neighbor_pairs(D: int):
    """The pair set C: delta_k = 0, delta'_k = 1, equal elsewhere; |C| = D 2^(D-1)."""
    for delta in itertools.product((0, 1), repeat=D):
        for k in range(D):
            if delta[k] == 0:
                other = list(delta)
                other[k] = 1
                yield delta, tuple(other)


def _grid_cells(D: int, resolution: int) -> int:
    n = 2 ** resolution
    if n % D:
        raise ValueError(f"a grid of {n} cells does not align with {D} blocks")
    return n // D


def build_lemma2_family(D: int, g_cells: Sequence[float], resolution: int) -> AssouadFamily:
    """Family from a bump g on [0, 1/D) with 0 <= g <= 1 and a = int g^2 > 0 (grid exact)."""
    if D < 1:
        raise ValueError("D must be >= 1")
    width = _grid_cells(D, resolution)
    g = np.asarray(g_cells, dtype=float).reshape(-1)
    if g.size != width:
        raise ValueError(f"g needs {width} cell values on [0, 1/D)")
    if g.min() < 0 or g.max() > 1:
        raise ValueError("g must take values in [0, 1]")
    a = float(np.sum(g * g)) / 2 ** resolution
    if a <= 0:
        raise ValueError("g must not vanish")
    return AssouadFamily(D, resolution, g, a, theta=1 / a)


def build_corollary1_family(D: int, L: float, resolution: int = 10) -> AssouadFamily:
    """g = sqrt(D/theta) on [0, 1/D) with theta = 2L/3, so a = 1/theta and sup s <= L."""
    if L < 1.5 * D:
        raise ValueError("need L >= 3D/2")
    theta = 2 * L / 3
    width = _grid_cells(D, resolution)
    return build_lemma2_family(D, np.full(width, math.sqrt(D / theta)), resolution)


def triangular_g(D: int, resolution: int) -> np.ndarray:
    """Exact cell averages of the tent x on [0,1/(2D)], 1/D - x on [1/(2D), 1/D]."""
    width = _grid_cells(D, resolution)
    h = 2.0 ** -resolution
    lo = np.arange(width) * h
    hi = lo + h
    peak = 1 / (2 * D)

    def antider(x):
        # integral of the tent from 0 to x
        x = np.minimum(x, 1 / D)
        left = np.minimum(x, peak) ** 2 / 2
        right = np.where(x > peak, (x - peak) / D - (x ** 2 - peak ** 2) / 2, 0.0)
        return left + right

    return (antider(hi) - antider(lo)) / h


def build_prop4_family(D: int, resolution: int | None = None) -> AssouadFamily:
    """Tent-bump family; needs 2^r >= 64 D so the tent apex sits on a cell boundary."""
    if D < 1:
        raise ValueError("D must be >= 1")
    if resolution is None:
        resolution = max(10, math.ceil(math.log2(64 * D)))
    if 2 ** resolution < 64 * D:
        raise ValueError("grid too coarse for the tent construction")
    return build_lemma2_family(D, triangular_g(D, resolution), resolution)


def tent_square_integral(D: int, resolution: int) -> float:
    """int g^2 for the exact (not cell-averaged) tent by Simpson per cell; g^2 is quadratic per cell."""
    width = _grid_cells(D, resolution)
    h = 2.0 ** -resolution
    x = np.arange(width) * h
    peak = 1 / (2 * D)

    def tent(t):
        return np.where(t <= peak, t, 1 / D - t)

    return float(np.sum(h / 6 * (tent(x) ** 2 + 4 * tent(x + h / 2) ** 2 + tent(x + h) ** 2)))


def two_point_family(s0: GridIntensity, s1: GridIntensity) -> AssouadFamily:
    theta = l2_dist(s0, s1) ** 2
    return AssouadFamily(1, s0.resolution, None, 1.0, {(0,): s0, (1,): s1}, theta)


def neighbor_affinity_average(family: AssouadFamily) -> float:
    """|C|^-1 sum over C of exp(-2 H^2(s_delta, s_delta'))."""
    D = family.D
    if family.explicit is not None or D <= MAX_ENUMERATED_PAIRS_D:
        total, count = 0.0, 0
        for d0, d1 in neighbor_pairs(D):
            total += math.exp(-2 * hellinger_sq(family.member(d0), family.member(d1)))
            count += 1
        return total / count
    # members differ on one block only, so each coordinate contributes a fixed H^2
    r0 = np.sqrt((1 - family.g / 2) / family.a)
    r1 = np.sqrt((1 + family.g / 2) / family.a)
    h2 = 0.5 * float(np.sum((r1 - r0) ** 2)) / 2 ** family.resolution
    return math.exp(-2 * h2)


def neighbor_ratios(family: AssouadFamily) -> np.ndarray:
    """H^2 / Hamming over neighbor pairs (each has Hamming distance 1)."""
    return np.array([hellinger_sq(family.member(d0), family.member(d1))
                     for d0, d1 in neighbor_pairs(min(family.D, MAX_ENUMERATED_PAIRS_D))]) \
        if family.D <= MAX_ENUMERATED_PAIRS_D else None


def assouad_lower_bound(family: AssouadFamily, theta: float | None = None) -> float:
    """(D theta / 16) times the neighbor affinity average."""
    theta = family.theta if theta is None else theta
    return family.D * theta / 16 * neighbor_affinity_average(family)


def linf_family_bound(D: int, L: float) -> float:
    return D * L / 24 * EXP_M2_7


def two_point_bound(s0: GridIntensity, s1: GridIntensity) -> float:
    """d^2(s0, s1) / 16 * exp(-2 H^2(s0, s1)), d the L2 distance."""
    return l2_dist(s0, s1) ** 2 / 16 * math.exp(-2 * hellinger_sq(s0, s1))


def sqrt_lipschitz_ok(member: GridIntensity, D: int) -> bool:
    """|sqrt s(x) - sqrt s(y)| <= sqrt(D) [1 ^ D|x - y|] over all pairs of cell centers.

    On cell averages the distance between centers is used, so a one-cell
    slack h is allowed in |x - y|.
    """
    r = np.sqrt(member.flat)
    n = r.size
    h = 1.0 / n
    x = (np.arange(n) + 0.5) * h
    diff = np.abs(r[:, None] - r[None, :])
    bound = math.sqrt(D) * np.minimum(1.0, D * (np.abs(x[:, None] - x[None, :]) + h))
    return bool(np.all(diff <= bound + 1e-12))


def variation_certificate(family: AssouadFamily, alpha: float, deltas=None) -> tuple[bool, float, float]:
    """(ok, worst V_alpha(sqrt s_delta), D^((1+2 alpha)/2)) over the given deltas."""
    bound = family.D ** ((1 + 2 * alpha) / 2)
    deltas = list(family.deltas()) if deltas is None else deltas
    worst = max(p_variation(np.sqrt(family.member(d).flat), 1 / alpha) for d in deltas)
    return worst <= bound * (1 + 1e-12), worst, bound


@dataclass
class BoundCheck:
    bound: float
    max_risk: float
    max_risk_stderr: float
    worst_delta: tuple
    passed: bool
    risks: dict


def estimator_vs_bound(family: AssouadFamily, procedure: Callable[[PointSample], GridIntensity],
                       reps: int, seed: Seed, deltas=None, metric: str = "l2") -> BoundCheck:
    """Max over deltas of the MC risk E d^2(procedure(X), s_delta) against the lower bound."""
    if metric == "l2":
        loss = lambda a, b: l2_dist(a, b) ** 2   # noqa: E731
        bound = assouad_lower_bound(family)
    elif metric == "hellinger":
        loss = hellinger_sq
        ratios = [hellinger_sq(family.member(d0), family.member(d1))
                  for d0, d1 in neighbor_pairs(family.D)]
        bound = assouad_lower_bound(family, min(ratios) if ratios else 0.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    deltas = list(family.deltas()) if deltas is None else [tuple(d) for d in deltas]
    risks = {}
    for di, delta in enumerate(deltas):
        s = family.member(delta)
        sub = seed.substream(di)
        losses = np.array([loss(procedure(sample_process(s, sub.replication(r))), s)
                           for r in range(reps)])
        risks[delta] = (float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(reps)))
    worst = max(risks, key=lambda d: risks[d][0])
    mean, se = risks[worst]
    return BoundCheck(bound, mean, se, worst, mean >= bound - 3 * se, risks)

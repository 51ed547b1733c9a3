"""Piecewise-polynomial L2 projection on regular partitions and Haar tail diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .approx import weak_lq_weight
from .measures import haar_analyze

MAX_DEGREE = 2


def legendre_unit(n: int, u: np.ndarray) -> np.ndarray:
    """Orthonormal Legendre polynomial of degree n on [0, 1]."""
    if n == 0:
        return np.ones_like(u)
    if n == 1:
        return math.sqrt(3) * (2 * u - 1)
    if n == 2:
        return math.sqrt(5) * (6 * u * u - 6 * u + 1)
    raise ValueError("degree above 2 is not supported")


def _cell_nodes(sub: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [0, 1] with `sub` equal pieces."""
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = (x + 1) / 2, w / 2
    starts = np.arange(sub) / sub
    return (starts[:, None] + x[None, :] / sub).reshape(-1), np.tile(w / sub, sub)


@dataclass
class PolyApprox:
    degree: int
    cells: tuple[int, ...]
    coefficients: np.ndarray      # (*cells, (r+1)^k) in the per-cell orthonormal basis
    l2_error: float
    sup_error: float

    @property
    def dimension(self) -> int:
        return (self.degree + 1) ** len(self.cells) * math.prod(self.cells)


def piecewise_poly_approx(f, cells: int | Sequence[int], degree: int, dim: int | None = None,
                          sub: int = 16, order: int = 6) -> PolyApprox:
    """L2 projection onto piecewise polynomials of degree <= r per axis on an N_1 x ... grid.

    `f` is either an array of cell values on a regular grid over [0,1)^k (exact
    computation) or a callable of k coordinates (composite Gauss-Legendre with
    `sub` pieces of `order` nodes per cell and axis).
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError("degree must be 0, 1 or 2")
    if callable(f):
        k = dim or 1
        N = (cells,) * k if np.isscalar(cells) else tuple(cells)
        u, w = _cell_nodes(sub, order)
        axes = [((np.arange(n)[:, None] + u[None, :]) / n) for n in N]
        grids = np.meshgrid(*[a.reshape(-1) for a in axes], indexing="ij")
        F = np.broadcast_to(np.asarray(f(*grids), dtype=float), grids[0].shape)
    else:
        vals = np.asarray(f, dtype=float)
        k = vals.ndim
        N = (cells,) * k if np.isscalar(cells) else tuple(cells)
        if k > 2 or len(N) != k:
            raise ValueError("need a 1-D or 2-D grid and one cell count per axis")
        for m, n in zip(vals.shape, N):
            if m % n:
                raise ValueError(f"grid of {m} cells is not divisible into {n} cells")
        # per fine cell a 3-point rule integrates the squared degree-<=4 residual exactly
        subs = [m // n for m, n in zip(vals.shape, N)]
        if len(set(subs)) != 1:
            raise ValueError("grids must have the same refinement on every axis")
        u, w = _cell_nodes(subs[0], 3)
        F = vals
        for ax in range(k):
            F = np.repeat(F, 3, axis=ax)
    k = len(N)
    if k > 2:
        raise ValueError("dimension must be 1 or 2")
    Q = u.size
    B = np.stack([legendre_unit(n, u) for n in range(degree + 1)])     # (r+1, Q)
    proj = B.T @ (B * w[None, :])                                        # (Q, Q) node-space projector
    if k == 1:
        Fc = F.reshape(N[0], Q)
        coef = Fc @ (B * w[None, :]).T
        G = Fc @ proj.T
        W = w
    else:
        Fc = F.reshape(N[0], Q, N[1], Q)
        G = np.einsum("pq,aqbs,rs->apbr", proj, Fc, proj)
        Bw = B * w[None, :]
        coef = np.einsum("mq,aqbs,ns->abmn", Bw, Fc, Bw).reshape(N[0], N[1], -1)
        W = np.einsum("q,s->qs", w, w)[None, :, None, :]
    R = Fc - G
    vol = 1.0 / math.prod(N)
    l2 = math.sqrt(vol * float(np.sum((R * R) * (W if k == 2 else W[None, :]))))
    return PolyApprox(degree, tuple(N), coef, l2, float(np.max(np.abs(R))))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class HaarTailReport:
    slope: float                  # fitted d log2(tail) / dJ
    tails: np.ndarray             # sum over levels > J of detail energy, J = 0..max_level-1
    level_l1: np.ndarray          # sum_k |beta_jk| per level
    weak_l1_weight: float
    bound_slope: float            # -2 (1/2 - 1/p)


def haar_bv_tail_check(f, p: float) -> HaarTailReport:
    """Haar tail energies of a 2-D grid function and the fitted decay exponent in J."""
    if p <= 2:
        raise ValueError("p must exceed 2")
    vals = np.asarray(f.values if hasattr(f, "values") else f, dtype=float)
    if vals.ndim != 2:
        raise ValueError("need a 2-D grid")
    if np.ptp(vals) == 0:
        raise ValueError("constant function: no detail coefficients")
    c = haar_analyze(vals, 2)
    J = c.max_level
    energy = np.array([float(np.sum(c.level(j) ** 2)) for j in range(J + 1)])
    level_l1 = np.array([float(np.sum(np.abs(c.level(j)))) for j in range(J + 1)])
    tails = np.array([energy[j + 1:].sum() for j in range(J)])
    good = tails > 1e-300
    slope = float(np.polyfit(np.arange(J)[good], np.log2(tails[good]), 1)[0]) if good.sum() >= 2 \
        else -math.inf
    return HaarTailReport(slope, tails, level_l1, weak_lq_weight(c.as_array(), 1.0),
                          -2 * (0.5 - 1 / p))

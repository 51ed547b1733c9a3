"""Model families and approximation routines: variation, dyadic trees, weak-lq subsets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

DEFAULT_MAX_LEAVES = 12
DEFAULT_PARTITION_CAP = 10 ** 6


class ResolutionExhaustedError(RuntimeError):
    pass


class CapacityError(RuntimeError):
    pass


# -- p-variation -------------------------------------------------------------

def p_variation(f: Sequence[float], p: float) -> float:
    """(sup over increasing index chains of sum |f_j - f_{j-1}|^p)^(1/p), by dynamic programming.

    Every chain can be extended to start at the first and end at the last
    point without decreasing the sum, so best[n-1] is the supremum.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size > 1:
        # repeated neighbours never change the supremum
        f = f[np.concatenate([[True], f[1:] != f[:-1]])]
    n = f.size
    if n < 2:
        return 0.0
    best = np.zeros(n)
    for i in range(1, n):
        best[i] = np.max(best[:i] + np.abs(f[i] - f[:i]) ** p)
    return float(best[-1] ** (1 / p))


def alpha_variation(f: Sequence[float], alpha: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return p_variation(f, 1 / alpha)


# -- dyadic partitions -----------------------------------------------------

def _parse_bits(bits: str) -> list[tuple[int, int]]:
    """Leaves (depth, index) of a complete binary tree in preorder bit form."""
    leaves = []
    pos = 0

    def walk(depth, index):
        nonlocal pos
        if pos >= len(bits):
            raise ValueError("truncated tree bitstring")
        b = bits[pos]
        pos += 1
        if b == "0":
            leaves.append((depth, index))
        elif b == "1":
            walk(depth + 1, 2 * index)
            walk(depth + 1, 2 * index + 1)
        else:
            raise ValueError(f"bad tree bit {b!r}")

    walk(0, 0)
    if pos != len(bits):
        raise ValueError("trailing bits after a complete tree")
    return leaves


@dataclass(frozen=True)
class DyadicPartition:
    """Partition of [a, a + L] read off a complete binary tree (preorder: 1 internal, 0 leaf)."""

    bits: str = "0"
    a: float = 0.0
    length: float = 1.0

    def __post_init__(self):
        _parse_bits(self.bits)

    @property
    def leaves(self) -> list[tuple[int, int]]:
        return _parse_bits(self.bits)

    @property
    def leaf_count(self) -> int:
        return self.bits.count("0")

    def __len__(self):
        return self.leaf_count

    @property
    def depth(self) -> int:
        return max(d for d, _ in self.leaves)

    def intervals(self) -> list[tuple[float, float]]:
        out = []
        for d, k in self.leaves:
            h = self.length / 2 ** d
            out.append((self.a + k * h, self.a + (k + 1) * h))
        return out

    def depth_counts(self) -> dict[int, int]:
        """D_k: number of cells of length L 2^-k."""
        out: dict[int, int] = {}
        for d, _ in self.leaves:
            out[d] = out.get(d, 0) + 1
        return out

    def grid_slices(self, ncells: int) -> list[tuple[int, int]]:
        """Leaf cells as [lo, hi) index ranges of a grid of ncells equal cells."""
        out = []
        for d, k in self.leaves:
            if ncells % 2 ** d:
                raise ValueError("tree is deeper than the grid")
            w = ncells // 2 ** d
            out.append((k * w, (k + 1) * w))
        return out

    def piecewise_mean(self, values: Sequence[float]) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        out = np.empty_like(v)
        for lo, hi in self.grid_slices(v.size):
            out[lo:hi] = v[lo:hi].mean()
        return out


def adaptive_alpha_partition(f: Sequence[float], alpha: float, epsilon: float,
                             a: float = 0.0, length: float = 1.0) -> DyadicPartition:
    """Split any cell with E(I) = |I| V_alpha(f; I)^2 > epsilon into halves until none is left."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    f = np.asarray(f, dtype=float).reshape(-1)
    n = f.size
    if n < 1 or n & (n - 1):
        raise ValueError("grid size must be a power of 2")
    p = 1 / alpha
    bits = []

    def visit(lo, hi):
        size = length * (hi - lo) / n
        e = size * p_variation(f[lo:hi], p) ** 2
        if e <= epsilon:
            bits.append("0")
            return
        if hi - lo == 1:
            raise ResolutionExhaustedError(f"cell [{a + lo * length / n}, {a + hi * length / n}] "
                                           f"still has E = {e} > {epsilon}")
        bits.append("1")
        mid = (lo + hi) // 2
        visit(lo, mid)
        visit(mid, hi)

    visit(0, n)
    return DyadicPartition("".join(bits), a, length)


def prop3_constants(alpha: float) -> tuple[float, float]:
    """(c1, c2) for the bounds |m| <= c1 2^j and ||f - fbar||_2 <= c2 L^1/2 V 2^(-j alpha)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    u = 1 - 2 ** -(1 / (2 * alpha) + 1)
    v = 1 - 2 ** -(1 / (2 * alpha))
    c1 = u / v
    c2 = math.sqrt(2 ** (1 + 2 * alpha) * u ** (1 - 2 * alpha) / v)
    return c1, c2


def partition_epsilon(alpha: float, j: int, variation: float, length: float = 1.0) -> float:
    """epsilon = 2L (gamma/2)^(-2 alpha) V^2 with gamma = (1 - 2^-(1/(2a)+1)) 2^(j(1/(2a)+1))."""
    e = 1 / (2 * alpha) + 1
    gamma = (1 - 2 ** -e) * 2 ** (j * e)
    return 2 * length * (gamma / 2) ** (-2 * alpha) * variation ** 2


# -- Catalan trees -----------------------------------------------------------

@lru_cache(maxsize=None)
def _trees(leaves: int) -> tuple[str, ...]:
    if leaves == 1:
        return ("0",)
    out = []
    for k in range(1, leaves):
        for left in _trees(k):
            for right in _trees(leaves - k):
                out.append("1" + left + right)
    return tuple(out)


def catalan_number(j: int) -> int:
    return math.comb(2 * j, j) // (j + 1)


def catalan_tree_family(max_leaves: int, cap: int = DEFAULT_MAX_LEAVES,
                        a: float = 0.0, length: float = 1.0) -> list[tuple[DyadicPartition, float]]:
    """All complete binary tree partitions with at most max_leaves leaves, weight 2|m|."""
    if max_leaves < 1:
        raise ValueError("need at least one leaf")
    if max_leaves > cap:
        raise CapacityError(f"{max_leaves} leaves exceeds the enumeration cap {cap}")
    return [(DyadicPartition(b, a, length), 2.0 * n)
            for n in range(1, max_leaves + 1) for b in _trees(n)]


def catalan_weight_limit() -> float:
    """e^-2 sum_j (2/e)^(2j) / (j+1) = -log(1 - 4/e^2) / 4."""
    return -math.log(1 - 4 / math.e ** 2) / 4


def catalan_weight_partial(terms: int) -> np.ndarray:
    j = np.arange(terms)
    return np.cumsum(4.0 ** j * np.exp(-2 * (j + 1)) / (j + 1))


# -- interval partitions of {1..N} -------------------------------------------

def interval_partition_count(n: int, d: int) -> int:
    if not 1 <= d <= n:
        raise ValueError("need 1 <= D <= N")
    return math.comb(n - 1, d - 1)


def interval_partition_weight(n: int, d: int) -> float:
    """log C(N, D) + 2 log D."""
    return math.log(math.comb(n, d)) + 2 * math.log(d)


def interval_partition_family(n: int, d: int, cap: int = DEFAULT_PARTITION_CAP):
    """Partitions of {0..N-1} into D intervals as tuples of [lo, hi) pairs, plus the weight."""
    count = interval_partition_count(n, d)
    if count > cap:
        raise CapacityError(f"{count} partitions exceeds the cap {cap}")
    w = interval_partition_weight(n, d)
    out = []
    for cuts in itertools.combinations(range(1, n), d - 1):
        edges = (0,) + cuts + (n,)
        out.append(tuple(zip(edges[:-1], edges[1:])))
    return out, w


def mix_families(families: Sequence[Sequence[tuple[object, float]]]):
    """Union of J families with weights shifted by log J; entries are (family index, model, weight)."""
    J = len(families)
    if J == 0:
        return []
    shift = math.log(J)
    return [(fi, m, w + shift) for fi, fam in enumerate(families) for m, w in fam]


def weight_sum(weights: Iterable[float]) -> float:
    return float(sum(math.exp(-w) for w in weights))


# -- weak lq ---------------------------------------------------------------------

def rearrangement(beta: Sequence[float]) -> np.ndarray:
    return np.sort(np.abs(np.asarray(beta, dtype=float)))[::-1]


def weak_lq_weight(beta: Sequence[float], q: float) -> float:
    """|beta|_{q,w} = max_j a_j j^(1/q) for the nonincreasing rearrangement a."""
    if q <= 0:
        raise ValueError("q must be positive")
    a = rearrangement(beta)
    if a.size == 0:
        return 0.0
    return float(np.max(a * np.arange(1, a.size + 1) ** (1 / q)))


def log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def weak_lq_subset(beta: Sequence[float], j: int, k: int) -> tuple[list[int], float]:
    """Zero-based indices of the 2^j largest |beta_i| among the first 2^k, and k + log C(2^k, 2^j)."""
    if j < 0 or k < j:
        raise ValueError("need 0 <= j <= k")
    beta = np.asarray(beta, dtype=float)
    n, size = 2 ** k, 2 ** j
    if beta.size < n:
        raise ValueError("beta needs at least 2^k entries")
    head = np.abs(beta[:n])
    order = np.lexsort((np.arange(n), -head))   # largest first, lower index on ties
    return sorted(order[:size].tolist()), k + log_binom(n, size)


def residual_energy(beta: Sequence[float], subset: Iterable[int]) -> float:
    b = np.asarray(beta, dtype=float).copy()
    b[list(subset)] = 0.0
    return float(np.dot(b, b))


def subset_residual_bound(beta: Sequence[float], q: float, j: int, k: int) -> float:
    """(q/(2-q)) |beta|^2 (2^j + 1/2)^(1-2/q) [j < k] + sum_{i > 2^k} beta_i^2."""
    beta = np.asarray(beta, dtype=float)
    tail = float(np.dot(beta[2 ** k:], beta[2 ** k:]))
    if j == k:
        return tail
    w = weak_lq_weight(beta, q)
    return q / (2 - q) * w ** 2 * (2 ** j + 0.5) ** (1 - 2 / q) + tail


def tail_bounds(beta: Sequence[float], q: float, p: float, n: int) -> dict:
    """Check sum_{j>n} a_j^p <= q/(p-q) |beta|^p (n+1/2)^(-(p-q)/q) and its p = 2 form."""
    if not 0 < q < p:
        raise ValueError("need 0 < q < p")
    a = rearrangement(beta)
    w = weak_lq_weight(beta, q)
    lhs_p = float(np.sum(a[n:] ** p))
    rhs_p = q / (p - q) * w ** p * (n + 0.5) ** (-(p - q) / q)
    out = {"lhs_p": lhs_p, "rhs_p": rhs_p, "holds_p": lhs_p <= rhs_p * (1 + 1e-12)}
    if q < 2:
        lhs2 = float(np.sum(a[n:] ** 2))
        rhs2 = w ** 2 * (n + 0.5) ** (1 - 2 / q) / (2 / q - 1)
        out.update(lhs_2=lhs2, rhs_2=rhs2, holds_2=lhs2 <= rhs2 * (1 + 1e-12))
    return out


# -- the B 2^(-delta x) v x^a minimization --------------------------------------

@dataclass
class TwoTermReport:
    V: float
    regime: str               # "small" when V <= 2
    c1: float | None
    z: float | None
    z_lower: float | None     # 1 - log2 log2 V / log2 V
    c2_natural: float | None
    two_thirds_claim: bool | None


def lemma6_minimize(B: float, delta: float, a: float) -> tuple[float, float, TwoTermReport]:
    """Minimize f(x) = B 2^(-delta x) v x^a on x > 0; the minimum sits where both terms meet."""
    if min(B, delta, a) <= 0:
        raise ValueError("parameters must be positive")

    # solve in u = ln x so tiny roots keep full relative precision
    def g(u):
        return math.log2(B) - delta * math.exp(u) - a * u / math.log(2)

    lo, hi = -1.0, 1.0
    while g(lo) < 0:
        lo *= 2
    while g(hi) > 0:
        hi *= 2
    x = math.exp(brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    f = x ** a
    V = delta * B ** (1 / a) / a
    if V <= 2:
        rep = TwoTermReport(V, "small", 2 ** (-delta * x), None, None, None, None)
    else:
        l2 = math.log2(V)
        z = x * delta / (a * l2)
        c2n = x * delta / (a * math.log(V))
        rep = TwoTermReport(V, "large", None, z, 1 - math.log2(l2) / l2 if l2 > 1 else -math.inf,
                           c2n, 2 / 3 < z < 1)
    return x, f, rep

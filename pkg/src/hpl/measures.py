"""Finite measures on dyadic grids and the Hellinger-type distance between them.

Every intensity is piecewise constant on a grid of cells, so all integrals
reduce to exact finite sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

CONTINUOUS = "continuous"
DISCRETE = "discrete"


class DomainMismatchError(ValueError):
    """Raised when two grid objects do not live on the same grid."""


@dataclass(frozen=True)
class Domain:
    """Either the box [0, L]^k with Lebesgue measure or {1..N}^k with counting measure."""

    kind: str = CONTINUOUS
    dim: int = 1
    length: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, DISCRETE):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == CONTINUOUS and not self.length > 0:
            raise ValueError("side length must be positive")
        if self.kind == DISCRETE and self.n < 1:
            raise ValueError("cell count must be >= 1")

    @classmethod
    def unit(cls, dim: int = 1) -> "Domain":
        return cls(CONTINUOUS, dim, 1.0)

    @classmethod
    def interval(cls, length: float) -> "Domain":
        return cls(CONTINUOUS, 1, float(length))

    @classmethod
    def points(cls, n: int) -> "Domain":
        return cls(DISCRETE, 1, 1.0, int(n))

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE

    def side_cells(self, resolution: int) -> int:
        return self.n if self.is_discrete else 2 ** resolution

    def shape(self, resolution: int) -> tuple[int, ...]:
        return (self.side_cells(resolution),) * self.dim

    def cell_measure(self, resolution: int) -> float:
        if self.is_discrete:
            return 1.0
        return (self.length / 2 ** resolution) ** self.dim

    @property
    def volume(self) -> float:
        return float(self.n ** self.dim) if self.is_discrete else self.length ** self.dim


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real function that is constant on each cell of a grid (signed values allowed)."""

    domain: Domain
    resolution: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = self.domain.shape(self.resolution)
        if vals.size != math.prod(expected):
            raise ValueError(f"expected {math.prod(expected)} values, got {vals.size}")
        vals = vals.reshape(expected)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.domain.is_discrete:
            object.__setattr__(self, "resolution", 0)

    @property
    def cell_measure(self) -> float:
        return self.domain.cell_measure(self.resolution)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def integral(self) -> float:
        return float(self.cell_measure * self.flat.sum())

    def inner(self, other: "GridFunction") -> float:
        check_same_grid(self, other)
        return float(self.cell_measure * np.dot(self.flat, other.flat))

    def refine(self, resolution: int):
        """Return the same function on a finer dyadic grid."""
        if self.domain.is_discrete:
            raise ValueError("discrete domains cannot be refined")
        if resolution < self.resolution:
            raise ValueError("can only refine to a finer grid")
        factor = 2 ** (resolution - self.resolution)
        vals = self.values
        for axis in range(self.domain.dim):
            vals = np.repeat(vals, factor, axis=axis)
        return type(self)(self.domain, resolution, vals)

    def with_values(self, values):
        return type(self)(self.domain, self.resolution, values)

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (self.domain == other.domain and self.resolution == other.resolution
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.domain, self.resolution, self.values.tobytes()))


class GridIntensity(GridFunction):
    """Nonnegative piecewise-constant intensity with respect to the grid's reference measure."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise ValueError("intensity values must be nonnegative")

    @property
    def mass(self) -> float:
        return self.integral()

    def sqrt(self) -> GridFunction:
        return GridFunction(self.domain, self.resolution, np.sqrt(self.values))

    @classmethod
    def constant(cls, c: float, domain: Domain | None = None, resolution: int = 0):
        domain = domain or Domain.unit()
        return cls(domain, resolution, np.full(domain.shape(resolution), float(c)))

    @classmethod
    def from_sqrt(cls, root: GridFunction) -> "GridIntensity":
        """Square a (clipped) square-root function into an intensity."""
        r = np.maximum(root.values, 0.0)
        return cls(root.domain, root.resolution, r * r)

    @classmethod
    def from_function(cls, func: Callable, domain: Domain | None = None,
                      resolution: int | None = None, samples: int = 8):
        """Discretize a closed-form intensity by cell averages on the master grid.

        Defaults: 2^10 cells in 1-D, 2^5 per axis in 2-D. Cell averages use a
        midpoint rule with `samples` points per axis inside each cell.
        """
        domain = domain or Domain.unit()
        if domain.is_discrete:
            idx = np.indices(domain.shape(0)).astype(float)
            return cls(domain, 0, np.maximum(func(*idx), 0.0))
        if resolution is None:
            resolution = 10 if domain.dim == 1 else 5
        m = 2 ** resolution
        h = domain.length / m
        offs = (np.arange(samples) + 0.5) / samples
        axis = ((np.arange(m)[:, None] + offs[None, :]) * h).reshape(-1)
        grids = np.meshgrid(*([axis] * domain.dim), indexing="ij")
        fine = np.asarray(func(*grids), dtype=float)
        fine = np.broadcast_to(fine, grids[0].shape)
        shape = []
        for _ in range(domain.dim):
            shape += [m, samples]
        avg = fine.reshape(shape).mean(axis=tuple(range(1, 2 * domain.dim, 2)))
        return cls(domain, resolution, np.maximum(avg, 0.0))


def check_same_grid(a: GridFunction, b: GridFunction) -> None:
    if a.domain != b.domain or a.resolution != b.resolution:
        raise DomainMismatchError(
            f"grid mismatch: {a.domain}/r={a.resolution} vs {b.domain}/r={b.resolution}")


def common_refinement(a: GridFunction, b: GridFunction):
    """Refine both operands to the finer of their two resolutions."""
    if a.domain != b.domain:
        raise DomainMismatchError(f"domain mismatch: {a.domain} vs {b.domain}")
    if a.domain.is_discrete:
        return a, b
    r = max(a.resolution, b.resolution)
    return a.refine(r), b.refine(r)


def hellinger_sq(a: GridIntensity, b: GridIntensity) -> float:
    """H^2(a, b) = 1/2 * integral of (sqrt(a) - sqrt(b))^2."""
    check_same_grid(a, b)
    d = np.sqrt(a.flat) - np.sqrt(b.flat)
    return 0.5 * a.cell_measure * float(np.dot(d, d))


def hellinger(a: GridIntensity, b: GridIntensity) -> float:
    return math.sqrt(hellinger_sq(a, b))


def affinity(a: GridIntensity, b: GridIntensity) -> float:
    """Hellinger affinity exp(-H^2) between the two Poisson laws."""
    return math.exp(-hellinger_sq(a, b))


def l2_dist_sqrt(a: GridIntensity, b: GridIntensity) -> float:
    """||sqrt(a) - sqrt(b)||_2, so that H = value / sqrt(2)."""
    check_same_grid(a, b)
    d = np.sqrt(a.flat) - np.sqrt(b.flat)
    return math.sqrt(a.cell_measure * float(np.dot(d, d)))


def l2_dist(a: GridFunction, b: GridFunction) -> float:
    check_same_grid(a, b)
    d = a.flat - b.flat
    return math.sqrt(a.cell_measure * float(np.dot(d, d)))


def sup_norm(a: GridFunction) -> float:
    return float(np.max(np.abs(a.values))) if a.values.size else 0.0


def hellinger_sq_matrix(roots: np.ndarray, cell_measure: float) -> np.ndarray:
    """Pairwise H^2 for rows of square-root values on a shared grid."""
    sq = np.einsum("ij,ij->i", roots, roots)
    gram = roots @ roots.T
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return 0.5 * cell_measure * d2


@dataclass(frozen=True)
class MeasureWithAtoms:
    """mu = mu_s + mu_perp: a gridded absolutely continuous part plus point masses.

    Atom locations are treated as Lebesgue-null by construction; no overlap
    check against the grid is made.
    """

    absolutely_continuous: GridIntensity
    atoms: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __post_init__(self):
        atoms = tuple((tuple(np.atleast_1d(loc).astype(float)), float(w)) for loc, w in self.atoms)
        if any(w <= 0 for _, w in atoms):
            raise ValueError("atom weights must be positive")
        locs = [loc for loc, _ in atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        object.__setattr__(self, "atoms", atoms)

    @property
    def singular_mass(self) -> float:
        return float(sum(w for _, w in self.atoms))

    @property
    def mass(self) -> float:
        return self.absolutely_continuous.mass + self.singular_mass


def hellinger_sq_with_atoms(m: MeasureWithAtoms, t: GridIntensity) -> float:
    """H^2(mu, mu_t) = H^2(s, t) + mu_perp(X) / 2."""
    return hellinger_sq(m.absolutely_continuous, t) + 0.5 * m.singular_mass


def rescale_to_unit(t: GridIntensity) -> GridIntensity:
    """Map an intensity on [0, T] to t_T(x) = T t(Tx) on [0, 1]."""
    if t.domain.is_discrete or t.domain.dim != 1:
        raise ValueError("rescaling needs a 1-D continuous domain")
    T = t.domain.length
    return GridIntensity(Domain.unit(), t.resolution, T * t.values)


# -- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 2 ** 53 else repr(float(x))


def dumps_grid(f: GridFunction) -> str:
    """Header `kind k r L` then row-major cell values.

    For discrete domains the `r` slot holds the per-axis cell count N.
    """
    d = f.domain
    third = d.n if d.is_discrete else f.resolution
    header = f"{d.kind} {d.dim} {third} {_fmt(d.length)}"
    return header + "\n" + " ".join(_fmt(v) for v in f.flat) + "\n"


def loads_grid(text: str, cls=GridIntensity):
    lines = text.strip().split("\n", 1)
    kind, k, third, length = lines[0].split()
    k, third = int(k), int(third)
    if kind == DISCRETE:
        domain, r = Domain(DISCRETE, k, 1.0, third), 0
    else:
        domain, r = Domain(CONTINUOUS, k, float(length)), third
    vals = np.array([float(v) for v in lines[1].split()]) if len(lines) > 1 else np.zeros(0)
    return cls(domain, r, vals)


# -- Haar transform --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HaarCoefficients:
    """Orthonormal Haar coefficients of a piecewise-constant function on [0, 1]^dim.

    Keys are (level, index); level -1 holds the scaling coefficient. In 2-D
    the index is (orientation, kx, ky) with orientation in {0, 1, 2}.
    """

    dimension: int
    max_level: int
    coefficients: dict = field(repr=False)

    def level(self, j: int) -> np.ndarray:
        return np.array([v for (lev, _), v in self.coefficients.items() if lev == j])

    def as_array(self) -> np.ndarray:
        return np.array(list(self.coefficients.values()))

    def detail_array(self) -> np.ndarray:
        return np.array([v for (lev, _), v in self.coefficients.items() if lev >= 0])


def _check_pow2(n: int) -> int:
    J = int(round(math.log2(n))) if n > 0 else -1
    if n < 1 or 2 ** J != n:
        raise ValueError(f"grid size {n} is not a power of 2")
    return J


def haar_analyze(f, dimension: int | None = None) -> HaarCoefficients:
    """Orthonormal Haar analysis of a piecewise-constant function on [0,1]^d.

    `f` is an array of cell values (or a GridFunction on a unit box).
    """
    vals = np.asarray(f.values if isinstance(f, GridFunction) else f, dtype=float)
    dimension = dimension or vals.ndim
    if dimension not in (1, 2) or vals.ndim != dimension:
        raise ValueError("Haar analysis supports 1-D and square 2-D grids")
    J = _check_pow2(vals.shape[0])
    if dimension == 2 and vals.shape[1] != vals.shape[0]:
        raise ValueError("2-D Haar analysis needs a square grid")
    coeffs: dict = {}
    if dimension == 1:
        a = vals * 2.0 ** (-J / 2)
        for j in range(J - 1, -1, -1):
            even, odd = a[0::2], a[1::2]
            d = (even - odd) / math.sqrt(2)
            a = (even + odd) / math.sqrt(2)
            for k, v in enumerate(d):
                coeffs[(j, k)] = float(v)
        coeffs[(-1, 0)] = float(a[0])
    else:
        a = vals * 2.0 ** (-J)
        for j in range(J - 1, -1, -1):
            a00, a01 = a[0::2, 0::2], a[0::2, 1::2]
            a10, a11 = a[1::2, 0::2], a[1::2, 1::2]
            details = ((a00 + a01 - a10 - a11) / 2,
                       (a00 - a01 + a10 - a11) / 2,
                       (a00 - a01 - a10 + a11) / 2)
            a = (a00 + a01 + a10 + a11) / 2
            for o, d in enumerate(details):
                for (kx, ky), v in np.ndenumerate(d):
                    coeffs[(j, (o, kx, ky))] = float(v)
        coeffs[(-1, (0, 0, 0))] = float(a[0, 0])
    ordered = dict(sorted(coeffs.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))))
    return HaarCoefficients(dimension, J - 1, ordered)


def haar_synthesize(c: HaarCoefficients) -> np.ndarray:
    """Inverse of haar_analyze: returns cell values."""
    J = c.max_level + 1
    if c.dimension == 1:
        a = np.array([c.coefficients[(-1, 0)]])
        for j in range(J):
            d = np.array([c.coefficients[(j, k)] for k in range(2 ** j)])
            out = np.empty(2 ** (j + 1))
            out[0::2] = (a + d) / math.sqrt(2)
            out[1::2] = (a - d) / math.sqrt(2)
            a = out
        return a * 2.0 ** (J / 2)
    a = np.array([[c.coefficients[(-1, (0, 0, 0))]]])
    for j in range(J):
        n = 2 ** j
        d = [np.array([[c.coefficients[(j, (o, kx, ky))] for ky in range(n)] for kx in range(n)])
             for o in range(3)]
        out = np.empty((2 * n, 2 * n))
        out[0::2, 0::2] = (a + d[0] + d[1] + d[2]) / 2
        out[0::2, 1::2] = (a + d[0] - d[1] - d[2]) / 2
        out[1::2, 0::2] = (a - d[0] + d[1] - d[2]) / 2
        out[1::2, 1::2] = (a - d[0] - d[1] + d[2]) / 2
        a = out
    return a * 2.0 ** J


def haar_function_norm_sq(vals: Sequence[float]) -> float:
    """Squared L2([0,1]^d) norm of a piecewise-constant function given by cell values."""
    v = np.asarray(vals, dtype=float)
    return float(np.sum(v * v) / v.size)

"""Exact simulation of Poisson processes with piecewise-constant intensity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import Domain, GridFunction, GridIntensity, DomainMismatchError, check_same_grid


@dataclass(frozen=True)
class Seed:
    """A 64-bit seed value plus a stream index; (value, stream) fixes every draw."""

    value: int = 0
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.value) < 2 ** 64:
            raise ValueError("seed value must fit in 64 bits")

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(int(self.value), spawn_key=(int(self.stream),))))

    def replication(self, index: int) -> np.random.Generator:
        """Generator for replication `index`; independent of execution order."""
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(int(self.value), spawn_key=(int(self.stream), int(index)))))

    def substream(self, stream: int) -> "Seed":
        return Seed(self.value, self.stream * 1_000_003 + stream + 1)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.rng()
    return Seed(int(seed)).rng()


@dataclass(frozen=True, eq=False)
class PointSample:
    """One realization: points in the domain, in generation order.

    Continuous points are coordinate rows of shape (N, k); discrete points
    are zero-based integer cell indices of shape (N, k).
    """

    domain: Domain
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=int if self.domain.is_discrete else float)
        pts = pts.reshape(-1, self.domain.dim)
        if self.domain.is_discrete:
            if pts.size and (pts.min() < 0 or pts.max() >= self.domain.n):
                raise ValueError("point outside the discrete domain")
        elif pts.size and (pts.min() < 0 or pts.max() > self.domain.length):
            raise ValueError("point outside the domain")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def cell_indices(self, resolution: int) -> np.ndarray:
        """Flat row-major index of the grid cell holding each point."""
        d = self.domain
        if d.is_discrete:
            idx = self.points
        else:
            m = 2 ** resolution
            idx = np.minimum(np.floor(self.points / d.length * m).astype(int), m - 1)
        if idx.size == 0:
            return np.zeros(0, dtype=int)
        return np.ravel_multi_index(tuple(idx.T), d.shape(resolution))

    def counts(self, resolution: int) -> np.ndarray:
        n = int(np.prod(self.domain.shape(resolution)))
        return np.bincount(self.cell_indices(resolution), minlength=n).astype(float)

    def dumps(self) -> str:
        return "".join(" ".join(repr(float(c)) if not self.domain.is_discrete else str(int(c))
                                for c in row) + "\n" for row in self.points)

    @classmethod
    def loads(cls, domain: Domain, text: str) -> "PointSample":
        rows = [line.split() for line in text.splitlines() if line.strip()]
        return cls(domain, np.array(rows, dtype=float).reshape(-1, domain.dim))


def _cell_lower_corners(domain: Domain, resolution: int, flat_idx: np.ndarray) -> np.ndarray:
    multi = np.stack(np.unravel_index(flat_idx, domain.shape(resolution)), axis=1)
    return multi * (domain.length / 2 ** resolution)


def sample_process(s: GridIntensity, seed) -> PointSample:
    """Draw N ~ Poisson(mass), then N i.i.d. points with density s / mass.

    Points are uniform inside their chosen cell. numpy's Poisson sampler
    uses inversion for small means and transformed rejection above.
    """
    rng = as_rng(seed)
    mass = s.mass
    n = int(rng.poisson(mass)) if mass > 0 else 0
    if n == 0:
        return PointSample(s.domain, np.zeros((0, s.domain.dim)))
    p = s.flat / s.flat.sum()
    cells = rng.choice(p.size, size=n, p=p)
    if s.domain.is_discrete:
        pts = np.stack(np.unravel_index(cells, s.domain.shape(0)), axis=1)
        return PointSample(s.domain, pts)
    h = s.domain.length / 2 ** s.resolution
    pts = _cell_lower_corners(s.domain, s.resolution, cells) + h * rng.random((n, s.domain.dim))
    return PointSample(s.domain, pts)


def sample_counts(s: GridIntensity, rng: np.random.Generator) -> np.ndarray:
    """Cell counts of one realization (same law as binning sample_process)."""
    mass = s.mass
    n = int(rng.poisson(mass)) if mass > 0 else 0
    if n == 0:
        return np.zeros(s.flat.size)
    return rng.multinomial(n, s.flat / s.flat.sum()).astype(float)


def sample_counts_many(s: GridIntensity, seed: Seed, reps: int, start: int = 0) -> np.ndarray:
    """Counts for replications start..start+reps-1, shape (reps, cells)."""
    return np.stack([sample_counts(s, seed.replication(start + i)) for i in range(reps)]) \
        if reps else np.zeros((0, s.flat.size))


def poisson_cell_counts(s: GridIntensity, rng: np.random.Generator, reps: int) -> np.ndarray:
    """(reps, cells) independent Poisson cell counts; same law as binning reps realizations."""
    return rng.poisson(s.flat * s.cell_measure, size=(reps, s.flat.size)).astype(float)


def thin(x: PointSample, p: float, seed) -> tuple[PointSample, PointSample]:
    """Keep each point in the first output with probability p, independently."""
    if not 0 < p <= 1:
        raise ValueError("thinning probability must lie in (0, 1]")
    rng = as_rng(seed)
    keep = rng.random(len(x)) < p
    return PointSample(x.domain, x.points[keep]), PointSample(x.domain, x.points[~keep])


def thin_counts(counts: np.ndarray, p: float, rng: np.random.Generator):
    """Binomial thinning of cell counts."""
    if not 0 < p <= 1:
        raise ValueError("thinning probability must lie in (0, 1]")
    first = rng.binomial(counts.astype(np.int64), p).astype(float)
    return first, counts - first


def empirical_functional(x: PointSample, phi: GridFunction) -> float:
    """Sum of phi over the sample points."""
    if x.domain != phi.domain:
        raise DomainMismatchError("sample and weight function live on different domains")
    if len(x) == 0:
        return 0.0
    return float(phi.flat[x.cell_indices(phi.resolution)].sum())


def regression_counts(s: GridIntensity, seed) -> np.ndarray:
    """Independent Poisson counts with means s_i on a discrete domain."""
    if not s.domain.is_discrete:
        raise ValueError("regression counts need a discrete domain")
    rng = as_rng(seed)
    return rng.poisson(s.flat).astype(np.int64)


def log_ratio_cells(num: GridIntensity, den: GridIntensity) -> np.ndarray:
    """Per-cell log(num/den) with 0/0 -> 0, a/0 -> +inf, 0/b -> -inf."""
    a, b = num.flat, den.flat
    out = np.zeros(a.size)
    both = (a > 0) & (b > 0)
    out[both] = np.log(a[both]) - np.log(b[both])
    out[(a > 0) & (b == 0)] = math.inf
    out[(a == 0) & (b > 0)] = -math.inf
    return out


def log_lr_from_counts(counts: np.ndarray, num: GridIntensity, den: GridIntensity) -> float:
    lr = log_ratio_cells(num, den)
    hit = counts > 0
    terms = counts[hit] * lr[hit]
    if np.any(terms == math.inf) and np.any(terms == -math.inf):
        raise ValueError("sample is impossible under both measures")
    return float(den.mass - num.mass + terms.sum())


def log_likelihood_ratio(x: PointSample, num: GridIntensity, den: GridIntensity) -> float:
    """log dQ_num/dQ_den at the sample; may be +/- inf."""
    check_same_grid(num, den)
    if x.domain != num.domain:
        raise DomainMismatchError("sample and intensities live on different domains")
    return log_lr_from_counts(x.counts(num.resolution), num, den)


def merge(a: PointSample, b: PointSample) -> PointSample:
    """Superposition of two samples."""
    if a.domain != b.domain:
        raise DomainMismatchError("cannot merge samples from different domains")
    return PointSample(a.domain, np.concatenate([a.points, b.points]))

"""Discretized candidate nets built from linear spaces of square-root intensities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measures import Domain, GridFunction, GridIntensity, hellinger_sq_matrix
from .process import Seed

LATTICE_CONSTANT = math.sqrt(math.pi * math.e / 2)   # c in the cardinality bound, ~2.07
DEFAULT_CANDIDATE_CAP = 10 ** 7
DEFAULT_X_GRID = (2.0, 2.5, 3.0, 4.0)


class CapacityError(RuntimeError):
    """Raised when an enumeration would exceed its configured size cap."""


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Orthonormal grid functions phi_1..phi_k spanning a model for sqrt(s)."""

    domain: Domain
    resolution: int
    functions: np.ndarray = field(repr=False)   # shape (k, cells)

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.functions, dtype=float))
        ncells = math.prod(self.domain.shape(self.resolution))
        if f.shape[1] != ncells:
            raise ValueError(f"basis functions need {ncells} cell values")
        f.setflags(write=False)
        object.__setattr__(self, "functions", f)
        if self.domain.is_discrete:
            object.__setattr__(self, "resolution", 0)
        gram = self.gram()
        if not np.allclose(gram, np.eye(len(f)), atol=1e-10, rtol=0):
            raise ValueError("basis is not orthonormal")

    @property
    def dim(self) -> int:
        return self.functions.shape[0]

    @property
    def cell_measure(self) -> float:
        return self.domain.cell_measure(self.resolution)

    def gram(self) -> np.ndarray:
        return self.cell_measure * self.functions @ self.functions.T

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) @ self.functions

    @classmethod
    def piecewise_constant(cls, domain: Domain, resolution: int, labels: Sequence[int]):
        """Normalized indicators of the pieces given by a label per cell."""
        labels = np.asarray(labels).reshape(-1)
        cm = domain.cell_measure(resolution)
        funcs = []
        for lab in np.unique(labels):
            ind = (labels == lab).astype(float)
            funcs.append(ind / math.sqrt(cm * ind.sum()))
        return cls(domain, resolution, np.array(funcs))

    @classmethod
    def orthonormalize(cls, domain: Domain, resolution: int, vectors: np.ndarray, rtol: float = 1e-10):
        """Orthonormal basis of the span of the given grid functions (rank-revealing SVD)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        cm = domain.cell_measure(resolution)
        u, sv, vt = np.linalg.svd(v * math.sqrt(cm), full_matrices=False)
        if sv.size == 0 or sv[0] == 0:
            raise ValueError("zero span")
        keep = sv > rtol * sv[0]
        return cls(domain, resolution, vt[keep] / math.sqrt(cm))


@dataclass(frozen=True)
class NetModel:
    model_id: str
    eta: float
    D: float
    delta: float
    members: tuple[int, ...]


@dataclass(eq=False)
class Net:
    """Finite candidate set S = union of S_m, stored as clipped square roots."""

    domain: Domain
    resolution: int
    roots: np.ndarray            # (n, cells), nonnegative
    eta: np.ndarray              # eta(t) = min eta_m over models containing t
    models: list[NetModel]
    bprime: float = 1.0

    def __len__(self):
        return self.roots.shape[0]

    @property
    def cell_measure(self) -> float:
        return self.domain.cell_measure(self.resolution)

    def element(self, i: int) -> GridIntensity:
        r = self.roots[i]
        return GridIntensity(self.domain, self.resolution, (r * r).reshape(self.domain.shape(self.resolution)))

    @property
    def elements(self) -> list[GridIntensity]:
        return [self.element(i) for i in range(len(self))]

    def memberships(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self))]
        for mi, m in enumerate(self.models):
            for i in m.members:
                out[i].append(mi)
        return out

    def hellinger_sq_matrix(self) -> np.ndarray:
        return hellinger_sq_matrix(self.roots, self.cell_measure)


def _key(row: np.ndarray) -> bytes:
    return np.round(row, 10).tobytes()


class NetBuilder:
    """Accumulates models, merging duplicate elements and keeping the smallest eta."""

    def __init__(self, domain: Domain, resolution: int, bprime: float = 1.0):
        self.domain = domain
        self.resolution = 0 if domain.is_discrete else resolution
        self.bprime = bprime
        self._rows: list[np.ndarray] = []
        self._index: dict[bytes, int] = {}
        self._models: list[NetModel] = []

    def add_model(self, model_id: str, roots: np.ndarray, eta: float, D: float, delta: float) -> NetModel:
        members = []
        for row in np.atleast_2d(roots):
            row = np.maximum(row, 0.0)
            k = _key(row)
            if k not in self._index:
                self._index[k] = len(self._rows)
                self._rows.append(row)
            members.append(self._index[k])
        model = NetModel(model_id, float(eta), float(D), float(delta), tuple(sorted(set(members))))
        self._models.append(model)
        return model

    def __len__(self):
        return len(self._rows)

    def build(self) -> Net:
        ncells = math.prod(self.domain.shape(self.resolution))
        roots = np.array(self._rows) if self._rows else np.zeros((0, ncells))
        eta = np.full(len(roots), np.inf)
        for m in self._models:
            idx = np.array(m.members, dtype=int)
            eta[idx] = np.minimum(eta[idx], m.eta)
        return Net(self.domain, self.resolution, roots, eta, list(self._models), self.bprime)


def lattice_ball(k: int, theta: float, radius: float, cap: int = DEFAULT_CANDIDATE_CAP) -> np.ndarray:
    """All integer vectors n with |theta * n|_2 <= radius, by coordinate-wise bounding."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    r2 = (radius / theta) ** 2
    pts = np.zeros((1, 0), dtype=np.int64)
    rem = np.array([r2])
    for _ in range(k):
        bound = np.floor(np.sqrt(np.maximum(rem, 0.0)) + 1e-12).astype(np.int64)
        sizes = 2 * bound + 1
        total = int(sizes.sum())
        if total > cap:
            raise CapacityError(f"lattice enumeration needs {total} > {cap} candidates")
        rep = np.repeat(np.arange(len(pts)), sizes)
        starts = np.repeat(-bound, sizes)
        offs = np.arange(total) - np.repeat(np.cumsum(sizes) - sizes, sizes)
        coord = starts + offs
        pts = np.column_stack([pts[rep], coord])
        rem = rem[rep] - coord.astype(float) ** 2
        keep = rem >= -1e-9
        pts, rem = pts[keep], rem[keep]
    return pts


def lattice_eta(k: int, theta: float) -> float:
    """Covering radius of theta Z^k: eta^2 = k (theta/2)^2."""
    return math.sqrt(k) * theta / 2


def default_eta(n_observed: float, k: int) -> float:
    """eta^2 = 4.2 k log(c (sqrt(N/k) + 1))."""
    return math.sqrt(4.2 * k * math.log(LATTICE_CONSTANT * (math.sqrt(n_observed / k) + 1)))


def theta_for_eta(eta: float, k: int) -> float:
    return 2 * eta / math.sqrt(k)


def cardinality_bound(n_observed: float, eta: float, k: int) -> float:
    """K = [c (sqrt(2N)/eta + 1)]^k."""
    return (LATTICE_CONSTANT * (math.sqrt(2 * n_observed) / eta + 1)) ** k


def lattice_cardinality_bound(n_observed: float, k: int) -> float:
    """K <= [c (sqrt(N/k) + 1)]^k, valid once eta >= 2 sqrt(k)."""
    return (LATTICE_CONSTANT * (math.sqrt(n_observed / k) + 1)) ** k


def lattice_dimension(n_observed: float, eta: float, k: int) -> float:
    """D = log(K)/4 (at least 1/2) so that B' = 1 covers every ball count by K."""
    return max(math.log(cardinality_bound(n_observed, eta, k)) / 4, 0.5)


def build_grid_net(basis: BasisSpec, theta: float | None = None, n_observed: float = 0,
                   use_default_eta: bool = False, model_id: str = "grid", delta: float | None = None,
                   cap: int = DEFAULT_CANDIDATE_CAP, builder: NetBuilder | None = None,
                   eta_model: float | None = None) -> Net | NetModel:
    """Lattice net B(0, sqrt(2N) + eta) cap theta Z^k mapped through the basis, clipped at 0.

    With `use_default_eta` the model radius is the default eta and theta
    defaults to 2 eta / sqrt(k). When `builder` is given the model is added to
    it and the NetModel is returned instead of a finished Net.
    """
    if n_observed < 0:
        raise ValueError("n_observed must be >= 0")
    k = basis.dim
    if theta is None:
        if not use_default_eta:
            raise ValueError("theta is required unless the default eta is requested")
        theta = theta_for_eta(default_eta(n_observed, k), k)
    if theta <= 0:
        raise ValueError("theta must be positive")
    eta = lattice_eta(k, theta)
    pts = lattice_ball(k, theta, math.sqrt(2 * n_observed) + eta, cap)
    roots = np.maximum(basis.combine(theta * pts.astype(float)), 0.0)
    if eta_model is None:
        eta_model = default_eta(n_observed, k) if use_default_eta else eta
    D = lattice_dimension(n_observed, eta, k)
    if delta is None:
        delta = eta_model ** 2 / 84
    own = builder is None
    if own:
        builder = NetBuilder(basis.domain, basis.resolution)
    model = builder.add_model(model_id, roots, eta_model, D, delta)
    return builder.build() if own else model


def singleton_net(candidates: Sequence[GridIntensity], etas: Sequence[float],
                  deltas: Sequence[float] | None = None) -> Net:
    """Each candidate is its own model with D = 1/2 and B' = e^-2."""
    if not candidates:
        raise ValueError("empty candidate list")
    first = candidates[0]
    b = NetBuilder(first.domain, first.resolution, bprime=math.exp(-2))
    for i, (c, e) in enumerate(zip(candidates, etas)):
        d = deltas[i] if deltas is not None else e ** 2 / 84
        b.add_model(f"c{i}", np.sqrt(c.flat)[None, :], e, 0.5, d)
    return b.build()


def eta_of(net: Net, index: int) -> float:
    if not 0 <= index < len(net):
        raise IndexError(f"no element {index}")
    return float(min(net.models[m].eta for m in net.memberships()[index]))


@dataclass
class DModelReport:
    ok: bool
    max_ratio: float
    witness_probe: int
    witness_x: float
    witness_count: int


def default_probes(net: Net, n_random: int = 100, seed: Seed = Seed(0)) -> np.ndarray:
    """Net elements plus seeded random square-root mixtures of pairs of elements."""
    rng = seed.rng()
    n = len(net)
    extra = []
    for _ in range(n_random if n else 0):
        i, j = rng.integers(n, size=2)
        w = rng.random()
        extra.append(w * net.roots[i] + (1 - w) * net.roots[j])
    return np.vstack([net.roots] + ([np.array(extra)] if extra else []))


def dmodel_check(net: Net, eta: float, D: float, bprime: float, probes: np.ndarray | None = None,
                 x_grid: Sequence[float] = DEFAULT_X_GRID, n_random: int = 100,
                 seed: Seed = Seed(0)) -> DModelReport:
    """Check |S cap B(t, x eta)| <= B' exp(D x^2) over probe centers t and x in the grid.

    `probes` are square-root rows on the net's grid; the net elements are
    always included.
    """
    if any(x < 2 for x in x_grid):
        raise ValueError("x values must be >= 2")
    base = default_probes(net, n_random, seed)
    P = base if probes is None else np.vstack([base, np.atleast_2d(probes)])
    if len(net) == 0:
        return DModelReport(True, 0.0, -1, float(x_grid[0]), 0)
    cm = net.cell_measure
    sq_p = np.einsum("ij,ij->i", P, P)
    sq_n = np.einsum("ij,ij->i", net.roots, net.roots)
    h2 = 0.5 * cm * np.maximum(sq_p[:, None] + sq_n[None, :] - 2 * P @ net.roots.T, 0.0)
    h = np.sqrt(h2)
    best = (-1.0, -1, float(x_grid[0]), 0)
    for x in x_grid:
        counts = (h < x * eta).sum(axis=1)
        ratios = counts / (bprime * math.exp(D * x * x))
        i = int(np.argmax(ratios))
        if ratios[i] > best[0]:
            best = (float(ratios[i]), i, float(x), int(counts[i]))
    return DModelReport(best[0] <= 1.0, *best)


def weight_conditions(net: Net) -> dict:
    """Per-model D_m >= 1/2 and eta_m^2 >= 84 D_m / 5, plus both weight sums."""
    per_model = [m.D >= 0.5 and m.eta ** 2 >= 84 * m.D / 5 * (1 - 1e-12) for m in net.models]
    return {
        "per_model": per_model,
        "condition_3_2": all(per_model),
        "sigma_eta": float(sum(math.exp(-m.eta ** 2 / 84) for m in net.models)),
        "sigma_delta": float(sum(math.exp(-m.delta) for m in net.models)),
    }


def condition_eta(delta: float, D: float, eta_lattice: float = 0.0) -> float:
    """Smallest eta_m meeting eta^2 >= 84 D / 5, eta^2 >= 84 Delta and the lattice radius."""
    return math.sqrt(max(84 * D / 5, 84 * delta, eta_lattice ** 2))


# -- serialization ---------------------------------------------------------

def dumps_manifest(net: Net) -> str:
    lines = [f"# net domain={net.domain.kind} dim={net.domain.dim} resolution={net.resolution} "
             f"bprime={net.bprime!r}", "model_id,eta,D,delta,members"]
    for m in net.models:
        lines.append(f"{m.model_id},{m.eta!r},{m.D!r},{m.delta!r},{' '.join(map(str, m.members))}")
    return "\n".join(lines) + "\n"

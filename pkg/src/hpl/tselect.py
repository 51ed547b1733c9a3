"""Selection among net elements by pairwise robust tests (the T-estimator)."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measures import GridIntensity, hellinger
from .nets import Net, singleton_net, weight_conditions
from .process import PointSample, Seed, sample_process

DEFAULT_MAX_ELEMENTS = 2000
XI = 0.25
_CHUNK = 1 << 22        # pair-cells per block, keeps the log-ratio block under ~32 MB
_CACHE_LIMIT = 1 << 24  # pair-cells kept in memory across batches (~128 MB)


class NetTooLargeError(RuntimeError):
    pass


@dataclass
class SelectionTrace:
    pairs: np.ndarray          # (P, 2) with i < j, element i plays t
    statistics: np.ndarray     # (P,)
    winners: np.ndarray        # (P,) index of the accepted element
    dx_values: np.ndarray
    eta: np.ndarray
    selected_index: int
    tie_count: int

    @property
    def decisions(self) -> dict:
        return {(int(i), int(j)): int(w) for (i, j), w in zip(self.pairs, self.winners)}

    def rejection_set(self, t: int) -> list[int]:
        """R_t: elements u that beat t in their test."""
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        w = self.winners
        return sorted(set(j[(i == t) & (w == j)].tolist()) | set(i[(j == t) & (w == i)].tolist()))

    def dumps(self) -> tuple[str, str]:
        a = io.StringIO()
        a.write("i,j,statistic,decision\n")
        for (i, j), s, w in zip(self.pairs, self.statistics, self.winners):
            a.write(f"{i},{j},{s!r},{w}\n")
        b = io.StringIO()
        b.write("i,eta,dx\n")
        for i, (e, d) in enumerate(zip(self.eta, self.dx_values)):
            b.write(f"{i},{e!r},{d!r}\n")
        return a.getvalue(), b.getvalue()


class PairwiseTests:
    """Precomputed pieces of every test psi_{i,j}, i < j, over a fixed net.

    The statistic on counts n is  n . log(pi_m / nu_m) + offset, where the
    mixtures use xi = 1/4 and x = (eta_i^2 - eta_j^2) / 4.
    """

    def __init__(self, net: Net, max_elements: int = DEFAULT_MAX_ELEMENTS):
        n = len(net)
        if n == 0:
            raise ValueError("empty net")
        if n > max_elements:
            raise NetTooLargeError(f"net has {n} elements > cap {max_elements}")
        self.net = net
        iu, ju = np.triu_indices(n, k=1)
        self.i, self.j = iu, ju
        self.h = np.sqrt(net.hellinger_sq_matrix()[iu, ju]) if n > 1 else np.zeros(0)
        self.eta = np.asarray(net.eta, dtype=float)
        self.x = (self.eta[iu] ** 2 - self.eta[ju] ** 2) / 4
        self._chunk = max(1, _CHUNK // max(1, net.roots.shape[1]))
        self._cached = None
        if len(iu) * net.roots.shape[1] <= _CACHE_LIMIT:
            self._cached = self._block(0, len(iu))

    def _block(self, lo: int, hi: int):
        R = self.net.roots
        ri, rj = R[self.i[lo:hi]], R[self.j[lo:hi]]
        pm = XI * rj + (1 - XI) * ri
        nm = XI * ri + (1 - XI) * rj
        pm2, nm2 = pm * pm, nm * nm
        with np.errstate(divide="ignore"):
            lr = np.where((pm2 > 0) & (nm2 > 0), np.log(np.where(pm2 > 0, pm2, 1.0))
                          - np.log(np.where(nm2 > 0, nm2, 1.0)), 0.0)
        lr = np.where((pm2 > 0) & (nm2 == 0), np.inf, lr)
        lr = np.where((pm2 == 0) & (nm2 > 0), -np.inf, lr)
        cm = self.net.cell_measure
        offset = cm * (nm2.sum(axis=1) - pm2.sum(axis=1)) - 2 * self.x[lo:hi]
        return lr, offset

    def statistics(self, counts: np.ndarray) -> np.ndarray:
        """Test statistics for a (reps, cells) count array, shape (reps, P)."""
        counts = np.atleast_2d(counts)
        P = len(self.i)
        out = np.empty((counts.shape[0], P))
        for lo in range(0, P, self._chunk):
            hi = min(P, lo + self._chunk)
            if self._cached is not None:
                lr, offset = self._cached[0][lo:hi], self._cached[1][lo:hi]
            else:
                lr, offset = self._block(lo, hi)
            if np.isfinite(lr).all():
                out[:, lo:hi] = counts @ lr.T + offset
            else:
                with np.errstate(invalid="ignore"):
                    terms = np.where(counts[:, None, :] > 0, counts[:, None, :] * lr[None], 0.0)
                out[:, lo:hi] = terms.sum(axis=2) + offset
        return out

    def reduce(self, stats: np.ndarray):
        """D_X values and the selected index for each row of statistics."""
        stats = np.atleast_2d(stats)
        reps, n = stats.shape[0], len(self.net)
        # stat > 0 accepts t = i, so i joins R_j and H(i, j) feeds D_X(j); ties go to j
        lose_j = self.j * n + self.i
        lose_i = self.i * n + self.j
        order = np.lexsort((np.arange(n), self.eta))   # eta first, then index
        dx = np.zeros((reps, n))
        selected = np.empty(reps, dtype=int)
        ties = np.empty(reps, dtype=int)
        flat = np.zeros(n * n)
        for r in range(reps):
            flat[:] = 0.0
            flat[np.where(stats[r] > 0, lose_j, lose_i)] = self.h
            dx[r] = flat.reshape(n, n).max(axis=1)
            at_min = dx[r] == dx[r].min()
            ties[r] = int(at_min.sum())
            selected[r] = order[np.argmax(at_min[order])]
        return dx, selected, ties


def _warn_weights(net: Net):
    wc = weight_conditions(net)
    if not wc["condition_3_2"]:
        warnings.warn("net models violate D_m >= 1/2 or eta_m^2 >= 84 D_m / 5", RuntimeWarning,
                      stacklevel=3)


def select(net: Net, sample: PointSample, max_elements: int = DEFAULT_MAX_ELEMENTS):
    """Return (selected intensity, trace) for one sample."""
    if len(net) == 0:
        raise ValueError("empty net")
    if sample.domain != net.domain:
        raise ValueError("sample lives on a different domain")
    _warn_weights(net)
    tests = PairwiseTests(net, max_elements)
    stats = tests.statistics(sample.counts(net.resolution))
    dx, sel, ties = tests.reduce(stats)
    winners = np.where(stats[0] > 0, tests.i, tests.j)
    trace = SelectionTrace(np.column_stack([tests.i, tests.j]), stats[0], winners,
                           dx[0], tests.eta, int(sel[0]), int(ties[0]))
    return net.element(int(sel[0])), trace


def select_many(net: Net, counts: np.ndarray, max_elements: int = DEFAULT_MAX_ELEMENTS,
                batch: int | None = None) -> np.ndarray:
    """Selected index for every row of a (reps, cells) count array."""
    tests = PairwiseTests(net, max_elements)
    if batch is None:
        batch = max(1, min(256, (1 << 24) // max(1, len(tests.i))))
    out = []
    for lo in range(0, len(counts), batch):
        _, sel, _ = tests.reduce(tests.statistics(counts[lo:lo + batch]))
        out.append(sel)
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


@dataclass
class RiskReport:
    q: float
    reps: int
    mean: float
    stderr: float
    losses: np.ndarray


def risk_from_losses(losses: np.ndarray, q: float) -> RiskReport:
    losses = np.asarray(losses, dtype=float)
    sd = float(losses.std(ddof=1)) if len(losses) > 1 else 0.0
    return RiskReport(q, len(losses), float(losses.mean()), sd / math.sqrt(len(losses)), losses)


def risk_mc(truth: GridIntensity, procedure: Callable[[PointSample], GridIntensity], q: float,
            reps: int, seed: Seed) -> RiskReport:
    """Monte Carlo estimate of E[H^q(truth, procedure(X))]."""
    if reps < 2:
        raise ValueError("need at least 2 replications")
    if q < 1:
        raise ValueError("q must be >= 1")
    losses = np.empty(reps)
    for r in range(reps):
        est = procedure(sample_process(truth, seed.replication(r)))
        losses[r] = hellinger(truth, est) ** q
    return risk_from_losses(losses, q)


def estimator_select(candidates: Sequence[GridIntensity], deltas: Sequence[float],
                     sample: PointSample) -> int:
    """Pick one candidate by running the selection over singleton models, eta_m^2 = 84 Delta_m."""
    if not candidates:
        raise ValueError("empty candidate list")
    if len(deltas) != len(candidates):
        raise ValueError("one delta per candidate")
    if min(deltas) < 0.1:
        raise ValueError("deltas must be >= 1/10")
    net = singleton_net(candidates, [math.sqrt(84 * d) for d in deltas], deltas)
    _, trace = select(net, sample)
    return candidate_index(net, trace.selected_index)


def candidate_index(net: Net, element: int) -> int:
    """First candidate (model) whose singleton is the given element with the element's eta."""
    for mi, m in enumerate(net.models):
        if m.members == (element,) and m.eta == net.eta[element]:
            return mi
    raise LookupError(element)

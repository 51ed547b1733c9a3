"""Robust tests between Hellinger balls built from square-root mixtures.

The test between centers pi_c and nu_c compares the likelihoods of the two
mixtures sqrt(pi_m) = xi sqrt(nu_c) + (1-xi) sqrt(pi_c) and
sqrt(nu_m) = xi sqrt(pi_c) + (1-xi) sqrt(nu_c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import GridIntensity, check_same_grid, hellinger_sq
from .process import PointSample, log_lr_from_counts

PI_C = "piC"
NU_C = "nuC"
NEAR_PI_C = "near-piC"
NEAR_NU_C = "near-nuC"
UPPER = "upper"   # P[log LR >= 2x], controlled through H(mu, nu_c)
LOWER = "lower"   # P[log LR <= 2x], controlled through H(mu, pi_c)


def mix_sqrt(a: GridIntensity, b: GridIntensity, xi: float) -> GridIntensity:
    """Intensity whose square root is xi*sqrt(b) + (1-xi)*sqrt(a)."""
    r = xi * np.sqrt(b.values) + (1 - xi) * np.sqrt(a.values)
    return GridIntensity(a.domain, a.resolution, r * r)


@dataclass(frozen=True)
class TestSpec:
    pi_c: GridIntensity
    nu_c: GridIntensity
    xi: float
    x: float
    pi_m: GridIntensity
    nu_m: GridIntensity

    __test__ = False  # not a pytest class

    @property
    def h2_centers(self) -> float:
        return hellinger_sq(self.pi_c, self.nu_c)

    def log_ratio(self) -> np.ndarray:
        """Per-cell log(pi_m / nu_m); zero where both mixtures vanish."""
        a, b = self.pi_m.flat, self.nu_m.flat
        out = np.zeros(a.size)
        pos = b > 0
        out[pos] = np.log(a[pos]) - np.log(b[pos])
        return out

    @property
    def offset(self) -> float:
        """Statistic value on the empty sample: nu_m mass - pi_m mass - 2x."""
        return self.nu_m.mass - self.pi_m.mass - 2 * self.x


@dataclass(frozen=True)
class TestOutcome:
    decision: str
    statistic: float

    __test__ = False


def make_test(pi_c: GridIntensity, nu_c: GridIntensity, xi: float, x: float) -> TestSpec:
    if not 0 < xi < 0.5:
        raise ValueError("xi must lie in (0, 1/2)")
    check_same_grid(pi_c, nu_c)
    return TestSpec(pi_c, nu_c, float(xi), float(x),
                    mix_sqrt(pi_c, nu_c, xi), mix_sqrt(nu_c, pi_c, xi))


def decide(statistic: float) -> str:
    # ties go to nu_c
    return PI_C if statistic > 0 else NU_C


def statistic_from_counts(spec: TestSpec, counts: np.ndarray) -> float:
    return log_lr_from_counts(counts, spec.pi_m, spec.nu_m) - 2 * spec.x


def run_test(spec: TestSpec, sample: PointSample) -> TestOutcome:
    if sample.domain != spec.pi_c.domain:
        raise ValueError("sample lives on a different domain")
    stat = statistic_from_counts(spec, sample.counts(spec.pi_c.resolution))
    return TestOutcome(decide(stat), stat)


def statistics_many(spec: TestSpec, counts: np.ndarray) -> np.ndarray:
    """Vectorized statistic for a (reps, cells) array of counts."""
    return counts @ spec.log_ratio() + spec.offset


def error_bounds(spec: TestSpec, case: str) -> float:
    """Error bound of the test when the truth sits in a small ball around a center.

    near-nuC bounds P[decide piC] and needs H(mu, nu_c) <= xi H(pi_c, nu_c);
    near-piC bounds P[decide nuC] and needs H(mu, pi_c) <= xi H(pi_c, nu_c).
    """
    core = (1 - 2 * spec.xi) ** 2 * spec.h2_centers
    if case == NEAR_NU_C:
        return math.exp(-spec.x - core)
    if case == NEAR_PI_C:
        return math.exp(spec.x - core)
    raise ValueError(f"unknown case {case!r}")


def ball_condition(spec: TestSpec, mu: GridIntensity, case: str) -> bool:
    center = spec.nu_c if case == NEAR_NU_C else spec.pi_c
    return math.sqrt(hellinger_sq(mu, center)) <= spec.xi * math.sqrt(spec.h2_centers) + 1e-15


def theorem5_tail_bound(spec: TestSpec, mu: GridIntensity, side: str) -> float:
    """Bound valid for any mu.

    upper: P[log LR >= 2x] <= exp(-x + (1-2xi)((2/xi) H^2(mu, nu_c) - H^2(pi_c, nu_c)))
    lower: P[log LR <= 2x] <= exp( x + (1-2xi)((2/xi) H^2(mu, pi_c) - H^2(pi_c, nu_c)))
    """
    xi, h2 = spec.xi, spec.h2_centers
    if side == UPPER:
        log_b = -spec.x + (1 - 2 * xi) * (2 / xi * hellinger_sq(mu, spec.nu_c) - h2)
    elif side == LOWER:
        log_b = spec.x + (1 - 2 * xi) * (2 / xi * hellinger_sq(mu, spec.pi_c) - h2)
    else:
        raise ValueError(f"unknown side {side!r}")
    return math.exp(min(log_b, 700.0))


def proposition1_test(t: GridIntensity, u: GridIntensity, eta_t: float, eta_u: float) -> TestSpec:
    """The test psi_{t,u}: xi = 1/4, x = (eta_t^2 - eta_u^2) / 4."""
    if t == u:
        raise ValueError("the two centers must differ")
    return make_test(t, u, 0.25, (eta_t ** 2 - eta_u ** 2) / 4)


def pairwise_test_bounds(t: GridIntensity, u: GridIntensity, eta_t: float, eta_u: float,
                        mu: GridIntensity | None = None) -> dict:
    """The three error bounds attached to psi_{t,u}."""
    h2 = hellinger_sq(t, u)
    out = {
        "wrong_when_near_t": math.exp(-(h2 - eta_t ** 2 + eta_u ** 2) / 4),
        "wrong_when_near_u": math.exp(-(h2 - eta_u ** 2 + eta_t ** 2) / 4),
    }
    if mu is not None:
        out["decide_u_any_mu"] = math.exp(min((16 * hellinger_sq(mu, t) + eta_t ** 2 - eta_u ** 2) / 4,
                                              700.0))
    return out


# -- numerical checks of the inequalities behind the test bounds ----------

def weighted_ratio_sides(f: np.ndarray, g: np.ndarray, fp: np.ndarray, K: float, cell_measure: float):
    """Both sides of  int g f^-1 f'^2 <= K ||f - f'||^2 + 2<g, f'> - <g, f>."""
    pos = f > 0
    lhs = cell_measure * float(np.sum(g[pos] / f[pos] * fp[pos] ** 2))
    rhs = cell_measure * float(K * np.sum((f - fp) ** 2) + 2 * np.dot(g, fp) - np.dot(g, f))
    return lhs, rhs


def loglr_tail_bound(mu: GridIntensity, pi: GridIntensity, nu: GridIntensity) -> float:
    """exp(2K H^2(mu, nu) - 2 H^2(pi, mu) + H^2(pi, nu)) with K^2 = sup dpi/dnu."""
    pos = nu.flat > 0
    if np.any(pi.flat[~pos] > 0):
        raise ValueError("pi must be absolutely continuous with respect to nu")
    K = math.sqrt(float(np.max(pi.flat[pos] / nu.flat[pos]))) if pos.any() else 0.0
    return math.exp(2 * K * hellinger_sq(mu, nu) - 2 * hellinger_sq(pi, mu) + hellinger_sq(pi, nu))


def sqrt_likelihood_ratio_many(counts: np.ndarray, pi: GridIntensity, nu: GridIntensity) -> np.ndarray:
    """sqrt(dQ_pi/dQ_nu) evaluated on each row of counts."""
    a, b = pi.flat, nu.flat
    half_log = np.zeros(a.size)
    pos = b > 0
    half_log[pos] = 0.5 * (np.log(np.where(a[pos] > 0, a[pos], 1.0)) - np.log(b[pos]))
    half_log[pos & (a == 0)] = -np.inf
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * half_log, 0.0)
    return np.exp(0.5 * (nu.mass - pi.mass) + terms.sum(axis=1))

"""Closed-form rate predictors for diffusion learning with step size mu/i."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import bernoulli, comb, zeta

CRITICAL_BAND = 1e-12
SERIES_DIRECT_TERMS = 64
SERIES_TAIL_ORDER = 16


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def _direct_product(lm: float, j: int, i: int) -> float:
    out = 1.0
    for t in range(j + 1, i + 1):
        f = 1.0 - lm / t
        out *= f * f
    return out


def _log_domain_product(lm: float, j: int, i: int) -> float:
    # Gamma(i+1-lm)^2 Gamma(j+1)^2 / (Gamma(i+1)^2 Gamma(j+1-lm)^2), requires j+1 > lm
    s = log_gamma(i + 1 - lm) - log_gamma(i + 1) + log_gamma(j + 1) - log_gamma(j + 1 - lm)
    return math.exp(2.0 * s)


def gamma_ratio_product(lm: float, j: int, i: int) -> float:
    """prod_{t=j+1}^{i} (1 - lm/t)^2.

    Uses the Gamma-function identity in log domain once every factor is
    positive (t > lm); leading factors with t <= lm are multiplied directly.
    """
    if j < 0 or i < j:
        raise ValueError("need 0 <= j <= i")
    if i == j:
        return 1.0
    if j + 1 > lm:
        return _log_domain_product(lm, j, i)
    # smallest t with t > lm; everything from there on is Gamma-friendly
    pivot = min(i, math.floor(lm))
    head = _direct_product(lm, j, pivot)
    if pivot == i or head == 0.0:
        return head
    return head * _log_domain_product(lm, pivot, i)


# -- subcritical series constant --------------------------------------------------


@lru_cache(maxsize=None)
def _tail_coefficients(a: float, order: int) -> tuple[float, ...]:
    """d_k with Gamma(x)^2 / Gamma(x+1-a)^2 ~ x^(2a-2) * sum_k d_k x^-k."""
    b = 1.0 - a
    bern = bernoulli(order + 1)

    def bern_poly(n, x):
        return sum(comb(n, k, exact=True) * bern[k] * x ** (n - k) for k in range(n + 1))

    # ln Gamma(x+b) - ln Gamma(x) - b ln x = sum_n c[n] x^-n
    c = np.zeros(order + 1)
    for n in range(1, order + 1):
        c[n] = (-1) ** (n + 1) * (bern_poly(n + 1, b) - bern_poly(n + 1, 0.0)) / (n * (n + 1))
    # exp(-2 * sum c_n u^n) as a power series in u = 1/x
    g = -2.0 * c
    d = np.zeros(order + 1)
    d[0] = 1.0
    for n in range(1, order + 1):
        d[n] = sum(k * g[k] * d[n - k] for k in range(1, n + 1)) / n
    return tuple(d)


def series_terms(a: float, j_max: int) -> np.ndarray:
    """Gamma(j)^2 / Gamma(j+1-a)^2 for j = 1..j_max."""
    return np.array([math.exp(2.0 * (log_gamma(j) - log_gamma(j + 1 - a))) for j in range(1, j_max + 1)])


def series_tail_bracket(a: float, j_last: int) -> tuple[float, float]:
    """Two-sided bound on sum_{j > j_last} of the series terms.

    Uses j^(2a-2) <= term_j <= j^(2a-2) (1 + (1-a)/j)^(2a) together with
    integral comparison of the decreasing power j^(2a-2).
    """
    if not 0 <= a < 0.5 or j_last < 1:
        raise ValueError("need 0 <= a < 0.5 and j_last >= 1")
    e = 1.0 - 2.0 * a
    lo = (j_last + 1) ** (-e) / e
    hi = (1.0 + (1.0 - a) / j_last) ** (2 * a) * j_last ** (-e) / e
    return lo, hi


def series_constant(a: float) -> float:
    """sum_{j>=1} Gamma(j)^2 / Gamma(j+1-a)^2 for 0 <= a < 1/2.

    The first terms are summed directly; the remainder uses the large-j
    expansion of the Gamma ratio, summed termwise with Hurwitz zeta values.
    """
    if not 0 <= a < 0.5:
        raise ValueError(f"series diverges unless 0 <= a < 0.5 (got {a})")
    n = SERIES_DIRECT_TERMS
    head = math.fsum(series_terms(a, n))
    d = _tail_coefficients(float(a), SERIES_TAIL_ORDER)
    s0 = 2.0 - 2.0 * a
    tail = math.fsum(dk * float(zeta(s0 + k, n + 1)) for k, dk in enumerate(d))
    return head + tail


# -- rate regimes ------------------------------------------------------------------


class RateCase(enum.Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    SUBCRITICAL = "subcritical"


def rate_case(lam: float, mu: float) -> RateCase:
    if lam <= 0 or mu <= 0:
        raise ValueError("eigenvalue and mu must be positive")
    return _case_of(2.0 * lam * mu)


def _case_of(two_lm: float) -> RateCase:
    if abs(two_lm - 1.0) <= CRITICAL_BAND:
        return RateCase.CRITICAL
    return RateCase.SUPERCRITICAL if two_lm > 1.0 else RateCase.SUBCRITICAL


def alpha_m(i: int, lam: float, mu: float, case: RateCase | None = None) -> float:
    """Rate constant times decay profile for one Hessian mode.

    ``case`` forces the regime, e.g. to exercise the log(i)/i branch without
    relying on floating-point coincidence.
    """
    if i < 2:
        raise ValueError("alpha_m needs i >= 2")
    if lam < 0 or mu <= 0:
        raise ValueError("need lam >= 0 and mu > 0")
    lm = lam * mu
    case = case or _case_of(2.0 * lm)
    if case is RateCase.SUPERCRITICAL:
        return 1.0 / ((2.0 * lm - 1.0) * i)
    if case is RateCase.CRITICAL:
        return math.log(i) / i
    return series_constant(lm) * i ** (-2.0 * lm)


# -- asymptotic predictor -------------------------------------------------------------


@dataclass(frozen=True)
class RateParams:
    eigenvalues: np.ndarray
    mu: float
    projected_noise: np.ndarray
    perron_norm_sq: float
    n_nodes: int

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        noise = np.asarray(self.projected_noise, dtype=float)
        if lam.shape != noise.shape:
            raise ValueError("eigenvalues and projected_noise must have the same length")
        if (lam <= 0).any():
            raise ValueError("eigenvalues must be positive")
        if (noise < 0).any():
            raise ValueError("projected noise must be non-negative")
        tol = 1e-12
        if not 1.0 / self.n_nodes - tol <= self.perron_norm_sq <= 1.0 + tol:
            raise ValueError(f"perron_norm_sq must lie in [1/N, 1], got {self.perron_norm_sq}")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "projected_noise", noise)


def asymptotic_er_predictor(params: RateParams, i: int) -> float:
    mu = params.mu
    acc = math.fsum(
        lam * alpha_m(i, lam, mu) * q
        for lam, q in zip(params.eigenvalues.tolist(), params.projected_noise.tolist())
    )
    return 0.5 * mu * mu * acc * params.perron_norm_sq


def mlsp_approx(mu: float, trace_rv: float, perron_norm_sq: float, i: int) -> float:
    """Large-step-size approximation mu Tr(R_v) |p|^2 / (4 i)."""
    if i < 1:
        raise ValueError("i must be >= 1")
    return mu * trace_rv * perron_norm_sq / (4.0 * i)


def high_prob_bound(er_prediction: float, nu: float) -> float:
    """Level exceeded with probability at most nu (Markov inequality)."""
    if not 0 < nu < 1:
        raise ValueError("nu must lie in (0, 1)")
    return er_prediction / nu


def cramer_rao_msd(fim_sample, n_nodes: int, i: int) -> float:
    fim = np.atleast_2d(np.asarray(fim_sample, dtype=float))
    if n_nodes < 1 or i < 1:
        raise ValueError("n_nodes and i must be >= 1")
    try:
        np.linalg.cholesky(fim)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Fisher information must be positive-definite") from exc
    return float(np.trace(np.linalg.inv(fim))) / (n_nodes * i)


# -- transient bracket -------------------------------------------------------------------


@dataclass(frozen=True)
class TransientParams:
    initial_mode_energy: np.ndarray
    eigenvalues: np.ndarray
    mu: float

    def __post_init__(self):
        e = np.asarray(self.initial_mode_energy, dtype=float)
        lam = np.asarray(self.eigenvalues, dtype=float)
        if e.shape != lam.shape:
            raise ValueError("one energy per eigen-mode")
        if (e < 0).any():
            raise ValueError("mode energies must be non-negative")
        object.__setattr__(self, "initial_mode_energy", e)
        object.__setattr__(self, "eigenvalues", lam)

    def min_iteration(self) -> int:
        return max(math.ceil(lam * self.mu) for lam in self.eigenvalues.tolist()) + 3


def initial_mode_energy(phi: np.ndarray, w_opt: np.ndarray, perron_norm_sq: float,
                        w0_mean: np.ndarray | None = None, w0_var: float = 0.0) -> np.ndarray:
    """E[(Phi^T sum_k p_k w~_{k,0})_m^2] for i.i.d. initial estimates.

    Node k starts at w0_mean plus independent noise with per-entry variance
    w0_var; the Perron weights sum to one, so only |p|^2 survives.
    """
    w0_mean = np.zeros_like(w_opt) if w0_mean is None else w0_mean
    mean_err = phi.T @ (np.asarray(w_opt) - w0_mean)
    return mean_err**2 + w0_var * perron_norm_sq


def _anchor_log_prefactor(lm: float) -> float:
    """2 sum_{j=1}^{ceil(lm)+1} log|1 - lm/j|, skipping exactly-zero factors."""
    c = math.ceil(lm)
    s = 0.0
    for j in range(1, c + 2):
        f = 1.0 - lm / j
        if f != 0.0:
            s += math.log(abs(f))
    return 2.0 * s


def _mode_bracket(lm: float, i: int) -> tuple[float, float]:
    """Bracket on prod_{j=1}^{i-1} (1 - lm/j)^2, anchored prefactor included."""
    c = math.ceil(lm)
    pref = _anchor_log_prefactor(lm)
    if lm == 0.0:
        return 1.0, 1.0
    log_up = (pref + 2 * i * math.log1p(-lm / i) + 2 * lm * math.log(c - lm + 2)
              - 2 * lm * math.log(i - lm) - 2 * (c + 2) * math.log1p(-lm / (c + 2)))
    k = i - 1
    log_lo = (pref + 2 * k * math.log1p(-lm / k) + 2 * lm * math.log(c - lm + 1)
              - 2 * lm * math.log(k - lm) - 2 * (c + 1) * math.log1p(-lm / (c + 1)))
    return math.exp(log_lo), math.exp(log_up)


def transient_bounds(t: TransientParams, i: int) -> tuple[float, float]:
    """(lower, upper) bracket on the transient excess-risk at iteration i.

    When lam*mu is an integer the product contains an exact zero factor; the
    bracket then bounds the product with that factor left out.
    """
    if i < t.min_iteration():
        raise ValueError(f"transient bounds need i >= {t.min_iteration()}")
    lo = hi = 0.0
    for lam, e in zip(t.eigenvalues.tolist(), t.initial_mode_energy.tolist()):
        if e == 0.0:
            continue
        b_lo, b_hi = _mode_bracket(lam * t.mu, i)
        lo += 0.5 * lam * b_lo * e
        hi += 0.5 * lam * b_hi * e
    return lo, hi


def transient_direct(t: TransientParams, i: int) -> float:
    """0.5 sum_m lam_m prod_{j<i}(1 - lam_m mu/j)^2 E_m, skipping exact zero factors."""
    total = 0.0
    for lam, e in zip(t.eigenvalues.tolist(), t.initial_mode_energy.tolist()):
        lm = lam * t.mu
        prod = 1.0
        for j in range(1, i):
            f = 1.0 - lm / j
            if f != 0.0:
                prod *= f * f
        total += 0.5 * lam * prod * e
    return total


# -- consensus vs diffusion pivot ---------------------------------------------------------


def consensus_mode_bracket(d_kk: float, lam: float, mu: float, i: int) -> tuple[float, float]:
    """Shared pivot i^-2 / log(d^-2) separating diffusion and consensus mode sums."""
    if not 0 < d_kk < 1:
        raise ValueError("d_kk must lie in (0, 1)")
    if not 2 * lam * mu > 1:
        raise ValueError("needs 2 lam mu > 1")
    if i < 1:
        raise ValueError("i must be >= 1")
    pivot = 1.0 / (i * i * math.log(d_kk ** -2))
    return pivot, pivot


def geometric_mode_sum(d: float, lm: float, i: int) -> float:
    """sum_{j=1}^{i-1} d^(2(i-j)) j^(2 lm - 2) / i^(2 lm), summed by brute force."""
    j = np.arange(1, i, dtype=float)
    terms = np.exp(2 * (i - j) * math.log(d) + (2 * lm - 2) * np.log(j) - 2 * lm * math.log(i))
    return math.fsum(terms.tolist())


def slowest_mode(eigenvalues, mu: float, i: int) -> int:
    """Index of the mode whose decay profile delta_m(i) is slowest."""
    def delta(lam):
        case = _case_of(2 * lam * mu)
        if case is RateCase.SUPERCRITICAL:
            return 1.0 / i
        if case is RateCase.CRITICAL:
            return math.log(i) / i
        return i ** (-2 * lam * mu)

    vals = [delta(lam) for lam in np.asarray(eigenvalues, dtype=float).tolist()]
    return int(np.argmax(vals))


def to_db(x):
    return 10.0 * np.log10(x)

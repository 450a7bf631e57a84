"""Independent numerical oracles for the special functions and gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import LogisticModel, QuadraticModel, logistic_loss, quad_gradient, logistic_gradient
from .theory import (
    _log_domain_product,
    gamma_ratio_product,
    log_gamma,
    series_constant,
    series_tail_bracket,
    series_terms,
)

PRODUCT_GRID_LM = (0.3, 0.7, 1.5, 3.0)
PRODUCT_GRID_MAX_I = 1000


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


def check_log_gamma() -> list[Check]:
    out = []
    for x, ref, label in ((0.5, 0.5 * math.log(math.pi), "log_gamma(1/2) = log sqrt(pi)"),
                          (10.0, math.log(362880.0), "log_gamma(10) = log 9!"),
                          (1.0, 0.0, "log_gamma(1) = 0")):
        err = abs(log_gamma(x) - ref)
        out.append(Check(label, err < 1e-10, f"abs err {err:.2e}"))
    return out


def product_grid_max_rel_error(lms=PRODUCT_GRID_LM, i_max=PRODUCT_GRID_MAX_I) -> float:
    """Worst relative gap between the log-Gamma form and running direct products.

    Covers every 0 <= j < i <= i_max with j + 1 > lm.
    """
    worst = 0.0
    for lm in lms:
        factors = [0.0] + [(1.0 - lm / t) ** 2 for t in range(1, i_max + 1)]
        for j in range(i_max):
            if j + 1 <= lm:
                continue
            direct = 1.0
            for i in range(j + 1, i_max + 1):
                direct *= factors[i]
                via_gamma = _log_domain_product(lm, j, i)
                worst = max(worst, abs(via_gamma - direct) / direct)
    return worst


def check_gamma_products() -> list[Check]:
    worst = product_grid_max_rel_error()
    spot = [
        (gamma_ratio_product(1.0, 1, 3), 1.0 / 9.0, "product lm=1, j=1, i=3 = 1/9"),
        (gamma_ratio_product(0.5, 2, 4), 1225.0 / 2304.0, "product lm=0.5, j=2, i=4 = 1225/2304"),
        (gamma_ratio_product(2.5, 0, 7), math.prod((1 - 2.5 / t) ** 2 for t in range(1, 8)),
         "product across sign change, lm=2.5"),
    ]
    out = [Check(f"log-Gamma product vs direct, grid lm={PRODUCT_GRID_LM}, i<={PRODUCT_GRID_MAX_I}",
                 worst < 1e-10, f"max rel err {worst:.2e}")]
    for got, ref, label in spot:
        err = abs(got - ref) / ref
        out.append(Check(label, err < 1e-12, f"rel err {err:.2e}"))
    return out


def check_series() -> list[Check]:
    err0 = abs(series_constant(0.0) - math.pi**2 / 6)
    a, j_last = 0.25, 2000
    partial = math.fsum(series_terms(a, j_last))
    lo, hi = series_tail_bracket(a, j_last)
    val = series_constant(a)
    return [
        Check("series_constant(0) = pi^2/6", err0 < 1e-9, f"abs err {err0:.2e}"),
        Check("series_constant(0.25) inside partial sum + integral tail bracket",
              partial + lo <= val <= partial + hi,
              f"{partial + lo:.12f} <= {val:.12f} <= {partial + hi:.12f}"),
    ]


def _fd_gradient(f, w, step=1e-6):
    g = np.zeros_like(w)
    for m in range(w.size):
        e = np.zeros_like(w)
        e[m] = step
        g[m] = (f(w + e) - f(w - e)) / (2 * step)
    return g


def gradient_rel_errors(n_points: int = 20, seed: int = 0) -> tuple[float, float]:
    """Worst relative error of both analytic gradients vs central differences."""
    rng = np.random.default_rng(seed)
    dim = 3
    quad = QuadraticModel(rng.standard_normal(dim), 1.0)
    rho = 0.7
    dummy = LogisticModel(rho, np.zeros((1, dim)), np.ones(1), np.zeros(dim), 0.0)
    worst_q = worst_l = 0.0
    for _ in range(n_points):
        w = rng.standard_normal(dim)
        h = rng.standard_normal(dim)
        y = float(rng.standard_normal())
        g = quad_gradient(quad, w, (h, y))
        fd = _fd_gradient(lambda u: (y - h @ u) ** 2, w)
        worst_q = max(worst_q, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-300))
        lab = 1.0 if rng.random() < 0.5 else -1.0
        g = logistic_gradient(dummy, w, (h, lab))
        fd = _fd_gradient(lambda u: float(logistic_loss(rho, u, h, lab)), w)
        worst_l = max(worst_l, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-300))
    return worst_q, worst_l


def check_gradients() -> list[Check]:
    q, l = gradient_rel_errors()
    return [
        Check("quadratic gradient vs central difference (20 points)", bool(q < 1e-5), f"max rel err {q:.2e}"),
        Check("logistic gradient vs central difference (20 points)", bool(l < 1e-5), f"max rel err {l:.2e}"),
    ]


def run_selftest() -> list[Check]:
    return check_log_gamma() + check_gamma_products() + check_series() + check_gradients()

"""Risk models: quadratic (delta rule) and regularized logistic regression.

Everything here broadcasts over leading axes: a weight array of shape
``(..., M)`` pairs with features ``(..., M)`` and labels ``(...)``.  Inner
products over the feature axis are accumulated in ascending index order so
that results never depend on how many rows are processed together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, grad_norm: float):
        super().__init__(msg)
        self.grad_norm = grad_norm


def dot_last(a, b):
    """sum_m a[..., m] * b[..., m] in a fixed ascending order."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    acc = a[..., 0] * b[..., 0]
    for m in range(1, a.shape[-1]):
        acc = acc + a[..., m] * b[..., m]
    return acc


def matvec_last(mat: np.ndarray, x):
    """``mat @ x`` over the last axis of x, fixed accumulation order."""
    x = np.asarray(x, dtype=float)
    return np.stack([dot_last(mat[r], x) for r in range(mat.shape[0])], axis=-1)


def quad_form(mat: np.ndarray, x):
    """x^T mat x over the last axis."""
    return dot_last(x, matvec_last(mat, x))


@dataclass(frozen=True)
class NoiseStats:
    r_v: np.ndarray
    trace: float
    projected_diag: np.ndarray


@dataclass(frozen=True)
class HessianSpectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns are the modes

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def hessian(self) -> np.ndarray:
        phi = self.eigenvectors
        return (phi * self.eigenvalues) @ phi.T


def _spectrum_of(hess: np.ndarray) -> HessianSpectrum:
    hess = 0.5 * (hess + hess.T)
    vals, vecs = np.linalg.eigh(hess)
    return HessianSpectrum(vals, vecs)


def _project(r_v: np.ndarray, spectrum: HessianSpectrum) -> NoiseStats:
    r_v = 0.5 * (r_v + r_v.T)
    phi = spectrum.eigenvectors
    diag = np.einsum("im,ij,jm->m", phi, r_v, phi)
    return NoiseStats(r_v=r_v, trace=float(np.trace(r_v)), projected_diag=diag)


# -- quadratic ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticModel:
    """y = h^T w_opt + v, with h ~ N(0, feature_cov) and v ~ N(0, sigma_v_sq).

    ``feature_dist="rademacher"`` swaps the Gaussian feature draw for +-1
    entries (same covariance), which makes h h^T deterministic when M=1.
    """

    w_opt: np.ndarray
    sigma_v_sq: float = 1.0
    feature_cov: np.ndarray | None = None
    feature_dist: str = "gaussian"
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w_opt, dtype=float))
        m = w.size
        cov = np.eye(m) if self.feature_cov is None else np.asarray(self.feature_cov, dtype=float)
        if cov.shape != (m, m):
            raise ValueError(f"feature_cov must be {m}x{m}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("feature_cov must be symmetric")
        if self.sigma_v_sq < 0:
            raise ValueError("sigma_v_sq must be non-negative")
        if self.feature_dist not in ("gaussian", "rademacher"):
            raise ValueError(f"unknown feature_dist {self.feature_dist!r}")
        chol = np.linalg.cholesky(cov)  # raises LinAlgError when not positive-definite
        object.__setattr__(self, "w_opt", w)
        object.__setattr__(self, "feature_cov", cov)
        object.__setattr__(self, "_chol", None if np.array_equal(cov, np.eye(m)) else chol)

    @property
    def dim(self) -> int:
        return self.w_opt.size

    def sample(self, rng: np.random.Generator, shape=()):
        return quad_sample(self, rng, shape)

    def gradient(self, w, h, y):
        return quad_gradient(self, w, (h, y))

    def excess_risk(self, w):
        return quad_form(self.feature_cov, np.asarray(w) - self.w_opt)

    def spectrum(self) -> HessianSpectrum:
        return quad_spectrum(self)

    def noise_stats(self) -> NoiseStats:
        return quad_noise_stats(self)


def quad_sample(m: QuadraticModel, rng: np.random.Generator, shape=()):
    """Draw features ``(*shape, M)`` then noise ``shape``; returns (h, y)."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    if m.feature_dist == "gaussian":
        z = rng.standard_normal(shape + (m.dim,))
    else:
        z = 2.0 * rng.integers(0, 2, size=shape + (m.dim,)) - 1.0
    v = rng.standard_normal(shape)
    h = z if m._chol is None else matvec_last(m._chol, z)
    y = dot_last(h, m.w_opt) + math.sqrt(m.sigma_v_sq) * v
    return h, y


def quad_gradient(m: QuadraticModel, w, sample):
    """Gradient of (y - h^T w)^2, i.e. -2 h (y - h^T w)."""
    h, y = sample
    resid = np.asarray(y) - dot_last(h, w)
    return -2.0 * np.asarray(h) * resid[..., None]


def quad_risk(m: QuadraticModel, w) -> float:
    e = np.asarray(w, dtype=float) - m.w_opt
    return m.sigma_v_sq + quad_form(m.feature_cov, e)


def quad_spectrum(m: QuadraticModel) -> HessianSpectrum:
    return _spectrum_of(2.0 * m.feature_cov)


def quad_noise_stats(m: QuadraticModel) -> NoiseStats:
    # at w_opt the stochastic gradient is -2 h v
    return _project(4.0 * m.sigma_v_sq * m.feature_cov, quad_spectrum(m))


def fim_quadratic(m: QuadraticModel) -> np.ndarray:
    """Per-sample Fisher information of w for the Gaussian linear model."""
    if m.sigma_v_sq <= 0:
        raise ValueError("Fisher information needs sigma_v_sq > 0")
    return m.feature_cov / m.sigma_v_sq


# -- regularized logistic regression -----------------------------------------


def logistic_loss(rho: float, w, h, y):
    """(rho/2)|w|^2 + log(1 + exp(-y h^T w)), stable for large |h^T w|."""
    z = np.asarray(y) * dot_last(h, w)
    return 0.5 * rho * dot_last(w, w) + np.logaddexp(0.0, -z)


@dataclass(frozen=True)
class LogisticModel:
    regularizer: float
    features: np.ndarray  # (n, M)
    labels: np.ndarray  # (n,), entries +1/-1
    w_opt: np.ndarray
    w_opt_risk: float

    @classmethod
    def fit(cls, features, labels, regularizer: float, tol: float = 1e-8, max_iters: int = 100_000):
        features, labels = _validate_dataset(features, labels)
        w, risk = compute_w_opt_logistic((features, labels), regularizer, tol, max_iters)
        return cls(regularizer, features, labels, w, risk)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def sample(self, rng: np.random.Generator, shape=()):
        """Draw with replacement from the stored dataset."""
        idx = rng.integers(0, self.n_samples, size=shape)
        return self.features[idx], self.labels[idx]

    def gradient(self, w, h, y):
        return logistic_gradient(self, w, (h, y))

    def empirical_risk(self, w):
        return logistic_empirical_risk(self, w)

    def excess_risk(self, w):
        return np.maximum(logistic_empirical_risk(self, w) - self.w_opt_risk, 0.0)

    def full_gradient(self, w):
        return _logistic_full_gradient(self.features, self.labels, self.regularizer, w)

    def hessian(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        z = self.labels * (self.features @ w)
        s = expit(z) * expit(-z)
        return self.regularizer * np.eye(self.dim) + (self.features.T * s) @ self.features / self.n_samples

    def spectrum(self) -> HessianSpectrum:
        return _spectrum_of(self.hessian(self.w_opt))


def _validate_dataset(features, labels):
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if features.ndim != 2 or labels.ndim != 1 or features.shape[0] != labels.shape[0]:
        raise ValueError("dataset must be (n, M) features with n labels")
    if features.shape[0] == 0:
        raise ValueError("dataset is empty")
    if not np.isin(labels, (-1.0, 1.0)).all():
        raise ValueError("labels must be +1 or -1")
    return features, labels


def logistic_gradient(m: LogisticModel, w, sample):
    """rho w - y h / (1 + exp(y h^T w))."""
    h, y = sample
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    z = y * dot_last(h, w)
    return m.regularizer * w - (y * expit(-z))[..., None] * h


def _logistic_scores(features: np.ndarray, w) -> np.ndarray:
    """h_n^T w for every sample, shape (..., n); feature axis accumulated in order."""
    w = np.asarray(w, dtype=float)
    acc = w[..., 0, None] * features[:, 0]
    for j in range(1, features.shape[1]):
        acc = acc + w[..., j, None] * features[:, j]
    return acc


def logistic_empirical_risk(m: LogisticModel, w):
    """Mean loss over the dataset, summed in dataset order."""
    if m.n_samples == 0:
        raise ValueError("dataset is empty")
    w = np.asarray(w, dtype=float)
    z = m.labels * _logistic_scores(m.features, w)
    losses = np.logaddexp(0.0, -z)
    total = np.cumsum(losses, axis=-1)[..., -1]
    return 0.5 * m.regularizer * dot_last(w, w) + total / m.n_samples


def _logistic_full_gradient(features, labels, rho, w):
    z = labels * (features @ w)
    return rho * w - features.T @ (labels * expit(-z)) / features.shape[0]


def _logistic_objective(features, labels, rho, w):
    z = labels * (features @ w)
    return 0.5 * rho * (w @ w) + np.logaddexp(0.0, -z).mean()


def compute_w_opt_logistic(dataset, rho: float, tol: float = 1e-8, max_iters: int = 100_000):
    """Minimize the empirical risk by gradient descent with backtracking.

    Returns ``(w_opt, J_emp(w_opt))``.  Raises ConvergenceError carrying the
    last gradient norm if ``max_iters`` is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    features, labels = _validate_dataset(*dataset)
    w = np.zeros(features.shape[1])
    f = _logistic_objective(features, labels, rho, w)
    g = _logistic_full_gradient(features, labels, rho, w)
    # smoothness bound: rho + max eigenvalue of H^T H / (4n)
    step = 1.0 / (rho + np.linalg.norm(features, 2) ** 2 / (4 * features.shape[0]))
    gnorm = float(np.linalg.norm(g))
    for _ in range(max_iters):
        if gnorm < tol:
            return w, float(logistic_empirical_risk_arrays(features, labels, rho, w))
        t = 2.0 * step
        while True:
            w_new = w - t * g
            f_new = _logistic_objective(features, labels, rho, w_new)
            if f_new <= f - 0.5 * t * gnorm**2 or t < 1e-3 * step:
                break
            t *= 0.5
        w, f = w_new, f_new
        g = _logistic_full_gradient(features, labels, rho, w)
        gnorm = float(np.linalg.norm(g))
    if gnorm < tol:
        return w, float(logistic_empirical_risk_arrays(features, labels, rho, w))
    raise ConvergenceError(f"gradient descent did not converge in {max_iters} iterations "
                           f"(gradient norm {gnorm:.3e})", gnorm)


def logistic_empirical_risk_arrays(features, labels, rho, w):
    z = labels * _logistic_scores(features, w)
    return 0.5 * rho * dot_last(w, w) + np.cumsum(np.logaddexp(0.0, -z), axis=-1)[..., -1] / features.shape[0]


def synthetic_logistic_dataset(n: int, dim: int, rng: np.random.Generator,
                               planted_norm: float = 2.0, label_noise: float = 0.5):
    """h ~ N(0, I), y = sign(h^T w* + noise) for a planted direction w*."""
    w_star = rng.standard_normal(dim)
    w_star *= planted_norm / np.linalg.norm(w_star)
    h = rng.standard_normal((n, dim))
    score = h @ w_star + label_noise * rng.standard_normal(n)
    y = np.where(score >= 0, 1.0, -1.0)
    return h, y


# -- empirical gradient-noise covariance ---------------------------------------


def estimate_noise_stats(model, w_opt, spectrum: HessianSpectrum, n_samples: int,
                         rng: np.random.Generator) -> NoiseStats:
    """Sample covariance of stochastic gradients at w_opt."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    h, y = model.sample(rng, (n_samples,))
    g = model.gradient(np.asarray(w_opt, dtype=float), h, y)
    if isinstance(model, LogisticModel):
        g = g - model.full_gradient(w_opt)
    r_v = g.T @ g / n_samples
    return _project(r_v, spectrum)

"""Zero-mean Gaussian process regression with a squared-exponential ARD kernel.

Several target columns share one covariance (a vector-valued GP with common
hyperparameters). Hyperparameters live in log space:
``theta = [log sigma2, log l_1 .. log l_d, log noise]``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from ..errors import DataError, FitError

log = logging.getLogger(__name__)

JITTER_FLOOR = 1e-10
JITTER_STEPS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LENGTH_BOUNDS = (1e-2, 5.0)
_VAR_CHUNK = 64


def se_ard_kernel(X1, X2, sigma2: float, lengths) -> np.ndarray:
    """k(x, x') = sigma2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)."""
    A = np.atleast_2d(np.asarray(X1, dtype=float)) / lengths
    B = np.atleast_2d(np.asarray(X2, dtype=float)) / lengths
    # explicit differences: each entry depends only on its own pair of rows
    diff = A[:, None, :] - B[None, :, :]
    return sigma2 * np.exp(-0.5 * np.einsum("ijk,ijk->ij", diff, diff))


def _cholesky(K: np.ndarray, scale: float) -> np.ndarray:
    n = len(K)
    for jitter in JITTER_STEPS:
        try:
            return sla.cholesky(K + jitter * scale * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise FitError("covariance matrix not positive definite after jitter escalation")


def log_likelihood(theta, X, Y, with_grad: bool = True):
    """Gaussian log marginal likelihood summed over the columns of Y, and its
    gradient with respect to the log hyperparameters."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    m, d = X.shape
    k = Y.shape[1]
    sigma2 = np.exp(theta[0])
    lengths = np.exp(theta[1 : 1 + d])
    noise = np.exp(theta[1 + d])
    Kf = se_ard_kernel(X, X, sigma2, lengths)
    K = Kf + noise * np.eye(m)
    try:
        L = sla.cholesky(K, lower=True)
    except np.linalg.LinAlgError:
        return (-np.inf, np.zeros_like(theta)) if with_grad else -np.inf
    alpha = sla.cho_solve((L, True), Y)
    ll = -0.5 * np.sum(Y * alpha) - k * np.log(np.diag(L)).sum() - 0.5 * k * m * np.log(2 * np.pi)
    if not with_grad:
        return ll
    W = alpha @ alpha.T - k * sla.cho_solve((L, True), np.eye(m))
    grad = np.empty(len(theta))
    grad[0] = 0.5 * np.sum(W * Kf)
    for j in range(d):
        D = (X[:, j, None] - X[None, :, j]) ** 2 / lengths[j] ** 2
        grad[1 + j] = 0.5 * np.sum(W * Kf * D)
    grad[1 + d] = 0.5 * noise * np.trace(W)
    return ll, grad


@dataclass(frozen=True)
class GprModel:
    X: np.ndarray  # (m, d) normalized training inputs
    theta: np.ndarray  # log hyperparameters
    L: np.ndarray  # lower Cholesky factor of K_HH
    alpha: np.ndarray  # K_HH^-1 Y, (m, k)
    log_likelihood: float = float("nan")

    @property
    def sigma2(self) -> float:
        return float(np.exp(self.theta[0]))

    @property
    def lengths(self) -> np.ndarray:
        return np.exp(self.theta[1:-1])

    @property
    def noise(self) -> float:
        return float(np.exp(self.theta[-1]))

    @property
    def n_inputs(self) -> int:
        return self.X.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.alpha.shape[1]

    def kernel(self, A, B) -> np.ndarray:
        return se_ard_kernel(A, B, self.sigma2, self.lengths)

    def _check(self, Xs) -> np.ndarray:
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        if Xs.shape[1] != self.n_inputs:
            raise DataError(f"expected {self.n_inputs} input columns, got {Xs.shape[1]}")
        return Xs

    @cached_property
    def _alpha_t(self) -> np.ndarray:
        return np.ascontiguousarray(self.alpha.T)

    @cached_property
    def _l_inv(self) -> np.ndarray:
        return sla.solve_triangular(self.L, np.eye(len(self.L)), lower=True)

    def predict(self, Xs, return_var: bool = True):
        """Posterior mean (q, k) and latent variance (q,).

        Rows are computed by reductions along the training axis rather than
        BLAS products, so a batch gives exactly the same values as the
        corresponding single-point calls.
        """
        Xs = self._check(Xs)
        Ks = self.kernel(Xs, self.X)
        mean = np.sum(Ks[:, None, :] * self._alpha_t[None], axis=2)
        if not return_var:
            return mean
        quad = np.empty(len(Xs))
        for s in range(0, len(Xs), _VAR_CHUNK):
            kb = Ks[s : s + _VAR_CHUNK]
            v = np.sum(self._l_inv[None] * kb[:, None, :], axis=2)
            quad[s : s + len(kb)] = np.sum(v * v, axis=1)
        var = self.sigma2 - quad
        if np.any(var < -1e-10 * max(self.sigma2, 1.0)):
            warnings.warn("negative posterior variance clamped to zero", RuntimeWarning)
        return mean, np.maximum(var, 0.0)

    def predict_with_grad(self, x):
        """Mean (k,), std, and their gradients with respect to one input x."""
        x = self._check(x)[0]
        ks = self.kernel(x[None], self.X)[0]  # (m,)
        dks = -ks[:, None] * (x[None, :] - self.X) / self.lengths**2  # (m, d)
        mean = ks @ self.alpha
        dmean = dks.T @ self.alpha  # (d, k)
        v = sla.cho_solve((self.L, True), ks)
        var = max(self.sigma2 - ks @ v, 0.0)
        std = np.sqrt(var)
        dvar = -2.0 * dks.T @ v
        dstd = dvar / (2.0 * std) if std > 1e-12 else np.zeros_like(dvar)
        return mean, std, dmean, dstd


def _bounds(d: int, y_scale: float, fixed_noise: float | None):
    lo_l, hi_l = np.log(LENGTH_BOUNDS)
    b = [(np.log(1e-4 * y_scale), np.log(1e2 * y_scale))]
    b += [(lo_l, hi_l)] * d
    if fixed_noise is None:
        b.append((np.log(max(JITTER_FLOOR * y_scale, 1e-300)), np.log(1e-1 * y_scale)))
    return b


def gpr_fit(
    X,
    Y,
    restarts: int = 5,
    seed: int | None = 0,
    fixed_noise: float | None = None,
    theta0=None,
    max_iter: int = 200,
) -> GprModel:
    """Maximize the shared log likelihood over log hyperparameters.

    The first start is ``theta0`` when given, otherwise a data-driven default;
    the remaining ``restarts - 1`` starts are uniform in the log bounds.
    ``fixed_noise`` pins the noise variance (e.g. to the jitter floor).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    m, d = X.shape
    if m < 2:
        raise DataError("GPR needs at least two training points")
    if len(Y) != m:
        raise DataError("X and Y row counts differ")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise DataError("non-finite training data")
    y_scale = float(np.mean(Y**2)) or 1.0
    bounds = _bounds(d, y_scale, fixed_noise)
    rng = np.random.default_rng(seed)

    def unpack(z):
        return z if fixed_noise is None else np.append(z, np.log(fixed_noise))

    def objective(z):
        ll, g = log_likelihood(unpack(z), X, Y)
        if not np.isfinite(ll):
            return 1e300, np.zeros_like(z)
        return -ll, -g[: len(z)]

    default = np.concatenate([[np.log(y_scale)], np.full(d, np.log(0.5))])
    if fixed_noise is None:
        default = np.append(default, np.log(max(1e-6 * y_scale, JITTER_FLOOR * y_scale)))
    starts = [np.asarray(theta0, dtype=float)[: len(default)] if theta0 is not None else default]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    for _ in range(max(restarts, 1) - 1):
        starts.append(rng.uniform(lo, hi))

    best = None
    for z0 in starts:
        z0 = np.clip(z0, lo, hi)
        res = minimize(objective, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": max_iter})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or best.fun >= 1e300:
        raise FitError("likelihood could not be evaluated at any start")
    theta = unpack(best.x)
    return condition(X, Y, theta, log_likelihood=-float(best.fun))


def condition(X, Y, theta, log_likelihood: float = float("nan")) -> GprModel:
    """Build the posterior for fixed hyperparameters."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    theta = np.asarray(theta, dtype=float)
    d = X.shape[1]
    sigma2 = np.exp(theta[0])
    K = se_ard_kernel(X, X, sigma2, np.exp(theta[1 : 1 + d])) + np.exp(theta[1 + d]) * np.eye(len(X))
    L = _cholesky(K, sigma2)
    alpha = sla.cho_solve((L, True), Y)
    return GprModel(X=X.copy(), theta=theta.copy(), L=L, alpha=alpha, log_likelihood=log_likelihood)

"""Classical baselines: autoregression on daily RV and GARCH(1,1) by MLE.

The autoregression is ordinary least squares on lagged realized
volatility. GARCH is fitted with a derivative-free simplex search over an
unconstrained reparameterization (log omega, persistence through a
logistic, and a logistic split of the persistence between the ARCH and
GARCH terms), which keeps omega positive and alpha + beta below one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import expit, logit


@dataclass(frozen=True)
class ARRVModel:
    """Autoregression RV_t = intercept + sum_j coef_j * RV_{t-j}."""

    p: int
    intercept: float
    coefficients: np.ndarray


def arrv_fit(daily_rv, p: int = 1) -> ARRVModel:
    """OLS fit of an order-p autoregression on the RV series.

    A rank-deficient design matrix is an error unless the minimum-norm
    solution reproduces the targets exactly (a constant series is the
    canonical case: any point on the solution line predicts the constant,
    and the pseudo-inverse picks one).
    """
    rv = np.asarray(daily_rv, dtype=np.float64)
    if p < 1:
        raise ValueError("lag order must be at least 1")
    if rv.size <= p + 1:
        raise ValueError(f"series length {rv.size} too short for lag order {p}")
    rows = rv.size - p
    design = np.ones((rows, p + 1))
    for j in range(p):
        design[:, j + 1] = rv[p - 1 - j : rv.size - 1 - j]
    target = rv[p:]
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < p + 1:
        residual = target - design @ coef
        scale = max(float(np.abs(target).max()), 1.0)
        if float(np.abs(residual).max()) > 1e-9 * scale:
            raise ValueError(f"rank-deficient design matrix (rank {rank} < {p + 1})")
        warnings.warn("rank-deficient design with an exact fit; "
                      "using the minimum-norm solution")
    if not np.all(np.isfinite(coef)):
        raise ValueError("non-finite coefficients from the normal equations")
    return ARRVModel(p=p, intercept=float(coef[0]), coefficients=coef[1:].copy())


def arrv_predict(model: ARRVModel, recent_rv) -> float:
    """One-step-ahead prediction from the last p observed RV values,
    most recent first."""
    recent = np.asarray(recent_rv, dtype=np.float64)
    if recent.shape != (model.p,):
        raise ValueError(f"need exactly {model.p} lagged values, got {recent.shape}")
    return float(model.intercept + model.coefficients @ recent)


@dataclass
class GARCHModel:
    """GARCH(1,1): sigma2_t = omega + alpha * r2_{t-1} + beta * sigma2_{t-1}."""

    omega: float
    alpha: float
    beta: float
    conditional_variance: np.ndarray
    log_likelihood: float
    converged: bool
    mean: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be strictly positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha + self.beta >= 1:
            raise ValueError("alpha + beta must stay below 1 (covariance stationarity)")
        if np.any(self.conditional_variance <= 0):
            raise ValueError("conditional variances must be strictly positive")


def _variance_path(r2: np.ndarray, omega: float, alpha: float, beta: float,
                   var0: float) -> np.ndarray:
    """Run the variance recursion; sigma2_0 = var0."""
    driving = omega + alpha * r2[:-1]
    tail, _ = lfilter([1.0], [1.0, -beta], driving, zi=np.array([beta * var0]))
    return np.concatenate([[var0], tail])


def _gaussian_loglik(r2: np.ndarray, sigma2: np.ndarray) -> float:
    return float(-0.5 * np.sum(np.log(sigma2) + r2 / sigma2))


def garch_fit(returns, constant_variance: bool = False,
              max_iterations: int = 2000) -> GARCHModel:
    """Maximize the Gaussian log-likelihood of a GARCH(1,1).

    Returns are demeaned internally; sigma2_0 is the sample variance.
    With ``constant_variance`` the ARCH and GARCH terms are pinned to
    zero and omega takes its closed form, the mean of squared returns.
    Non-convergence is reported through ``converged`` with the best point
    found.
    """
    r = np.asarray(returns, dtype=np.float64)
    if r.size < 50:
        raise ValueError(f"need at least 50 observations, got {r.size}")
    mean = float(r.mean())
    r = r - mean
    r2 = r * r
    var0 = float(r2.mean())
    if var0 <= 0:
        raise ValueError("degenerate (constant) return series")

    if constant_variance:
        sigma2 = np.full_like(r2, var0)
        return GARCHModel(omega=var0, alpha=0.0, beta=0.0,
                          conditional_variance=sigma2,
                          log_likelihood=_gaussian_loglik(r2, sigma2),
                          converged=True, mean=mean)

    def unpack(theta):
        omega = np.exp(np.clip(theta[0], -60.0, 60.0))
        persistence = expit(theta[1])
        split = expit(theta[2])
        alpha = persistence * split
        beta = persistence * (1.0 - split)
        return omega, alpha, beta

    def negloglik(theta):
        omega, alpha, beta = unpack(theta)
        sigma2 = _variance_path(r2, omega, alpha, beta, var0)
        if np.any(sigma2 <= 0) or not np.all(np.isfinite(sigma2)):
            return np.inf
        return -_gaussian_loglik(r2, sigma2)

    def pack(omega_frac, alpha, beta):
        persistence = alpha + beta
        return np.array([np.log(var0 * omega_frac), logit(persistence),
                         logit(alpha / persistence)])

    # multiple starts cover the persistent and the near-constant regimes;
    # on serially independent data the likelihood is near-flat along the
    # (omega, beta) ridge, so among ends whose log-likelihoods differ by
    # less than half a likelihood-ratio unit the least persistent model
    # wins, provided it is still no worse than any start point
    starts = [pack(0.10, 0.05, 0.85), pack(0.70, 0.05, 0.25), pack(0.94, 0.02, 0.02)]
    ends = []
    any_converged = False
    for start in starts:
        result = minimize(negloglik, start, method="Nelder-Mead",
                          options={"maxiter": max_iterations,
                                   "xatol": 1e-8, "fatol": 1e-10})
        any_converged = any_converged or bool(result.success)
        ends.append((negloglik(result.x), result.x))
    start_floor = min(negloglik(start) for start in starts)
    best_fun = min(fun for fun, _ in ends)
    ties = [point for fun, point in ends
            if fun <= best_fun + 0.5 and fun <= start_floor]
    if not ties:
        ties = [point for fun, point in ends if fun == best_fun]
    best = min(ties, key=lambda point: unpack(point)[1] + unpack(point)[2])

    omega, alpha, beta = unpack(best)
    sigma2 = _variance_path(r2, omega, alpha, beta, var0)
    return GARCHModel(omega=float(omega), alpha=float(alpha), beta=float(beta),
                      conditional_variance=sigma2,
                      log_likelihood=_gaussian_loglik(r2, sigma2),
                      converged=any_converged, mean=mean)


def garch_filter(model: GARCHModel, returns) -> tuple[np.ndarray, np.ndarray]:
    """Run the fitted recursion along a (raw) return series.

    Returns the squared demeaned returns and the conditional variance
    path, starting from the variance the model was initialized with, so
    filtering the training series reproduces the fitted path.
    """
    r = np.asarray(returns, dtype=np.float64) - model.mean
    r2 = r * r
    sigma2 = _variance_path(r2, model.omega, model.alpha, model.beta,
                            float(model.conditional_variance[0]))
    return r2, sigma2


def garch_forecast_daily_rv(model: GARCHModel, last_r2: float, last_var: float,
                            steps: int = 96) -> float:
    """Square root of the summed step-ahead conditional variances.

    The first step uses the observed last squared return; later steps
    substitute the expected squared return (the variance itself).
    """
    forecasts = np.empty(steps)
    forecasts[0] = model.omega + model.alpha * last_r2 + model.beta * last_var
    for h in range(1, steps):
        forecasts[h] = model.omega + (model.alpha + model.beta) * forecasts[h - 1]
    return float(np.sqrt(forecasts.sum()))


def garch_residual_orthogonality(model: ARRVModel, daily_rv) -> np.ndarray:
    """Dot products of the OLS residuals with each design column."""
    rv = np.asarray(daily_rv, dtype=np.float64)
    p = model.p
    rows = rv.size - p
    design = np.ones((rows, p + 1))
    for j in range(p):
        design[:, j + 1] = rv[p - 1 - j : rv.size - 1 - j]
    residuals = rv[p:] - design @ np.concatenate([[model.intercept], model.coefficients])
    return design.T @ residuals

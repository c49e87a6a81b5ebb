"""Non-learning baseline allocators: equal weight, tangency and risk budgeting.

All allocators are long-only and fully invested.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    ConvergenceError,
    DegeneratePortfolioError,
    InsufficientDataError,
    InvalidCovarianceError,
    InvalidInputError,
    NoTangencyError,
    SingularMatrixError,
)

CONDITION_CAP = 1e12
RB_MAX_SWEEPS = 10_000
RB_TOL = 1e-10
RB_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    mean_vector: np.ndarray
    covariance: np.ndarray
    window: int


def estimate_moments(returns_table, window=None):
    """Sample mean vector and covariance over the trailing ``window`` rows.

    ``returns_table`` may be a :class:`~marketadaptive.data.ReturnTable` or
    a bare 2-D array. ``window=None`` uses every row.
    """
    r = np.asarray(getattr(returns_table, "returns", returns_table), dtype=float)
    if r.ndim != 2:
        raise InvalidInputError("returns must be a 2-D table")
    if window is None:
        window = r.shape[0]
    if int(window) != window or window < 2:
        raise InsufficientDataError(f"moment window must be >= 2, got {window}")
    if r.shape[0] < window:
        raise InsufficientDataError(
            f"moment window {window} exceeds the {r.shape[0]} available rows")
    r = r[r.shape[0] - window:]
    centered = r - r.mean(axis=0)
    cov = centered.T @ centered / (window - 1)
    cov = 0.5 * (cov + cov.T)
    return MomentEstimate(r.mean(axis=0), cov, int(window))


def equal_weight(n_assets):
    if int(n_assets) != n_assets or n_assets < 1:
        raise InvalidInputError(f"n_assets must be a positive integer, got {n_assets}")
    return np.full(int(n_assets), 1.0 / n_assets)


def _sharpe_of(w, excess, cov):
    return float(w @ excess) / float(np.sqrt(w @ cov @ w))


def tangency(moments, risk_free=0.0):
    """Long-only maximum-Sharpe weights.

    The unconstrained solution ``cov^-1 (mu - rf)`` is used when it is
    already long-only. Otherwise the optimum lies in the relative interior of
    some face of the simplex; every face's critical point (plus the vertices)
    is evaluated and the best Sharpe kept, which is exact for the small asset
    counts used here.

    Raises:
        SingularMatrixError: covariance condition number above the cap.
        NoTangencyError: no asset has a mean above ``risk_free``.
    """
    mu = np.asarray(moments.mean_vector, dtype=float)
    cov = np.asarray(moments.covariance, dtype=float)
    n = mu.size
    if cov.shape != (n, n):
        raise InvalidInputError("covariance shape does not match mean vector")
    if np.linalg.cond(cov) > CONDITION_CAP:
        raise SingularMatrixError("covariance matrix is singular or ill-conditioned")
    excess = mu - risk_free
    if not np.any(excess > 0):
        raise NoTangencyError("no asset has an expected return above the risk-free rate")

    z = np.linalg.solve(cov, excess)
    if np.all(z > 0):
        return z / z.sum()

    best_w, best_s = None, -np.inf
    for k in range(1, n + 1):
        for subset in combinations(range(n), k):
            idx = list(subset)
            if k == 1:
                zs = np.ones(1)
            else:
                zs = np.linalg.solve(cov[np.ix_(idx, idx)], excess[idx])
                if not np.all(zs > 0):
                    continue
            w = np.zeros(n)
            w[idx] = zs / zs.sum()
            s = _sharpe_of(w, excess, cov)
            if s > best_s + 1e-15:
                best_w, best_s = w, s
    return best_w


def risk_contributions(covariance, weights):
    """Per-asset contributions ``w_i (cov w)_i / sigma_p``; they sum to ``sigma_p``."""
    cov = np.asarray(covariance, dtype=float)
    w = np.asarray(weights, dtype=float)
    if cov.shape != (w.size, w.size):
        raise InvalidInputError("covariance and weights dimensions disagree")
    marginal = cov @ w
    var = float(w @ marginal)
    if not var > 0:
        raise DegeneratePortfolioError("portfolio variance is zero")
    return w * marginal / np.sqrt(var)


def risk_budgeting(covariance, budgets=None, max_sweeps=RB_MAX_SWEEPS, tol=RB_TOL):
    """Weights whose fractional risk contributions match ``budgets``.

    Cyclical coordinate descent on ``0.5 y'Sy - sum(b_i log y_i)``: each
    coordinate solves its own quadratic first-order condition in closed form.
    Starts from inverse-volatility weights; ``budgets=None`` means equal
    budgets. Stops once a sweep moves no weight by more than ``tol`` and the
    budget residual is below ``RB_RESIDUAL_TOL``; slow linear contraction can
    satisfy the first test alone while still far from the budgets.
    """
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidInputError("covariance must be square")
    n = cov.shape[0]
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise InvalidCovarianceError("covariance is not symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise InvalidCovarianceError("covariance is not positive definite") from None

    b = np.full(n, 1.0 / n) if budgets is None else np.asarray(budgets, dtype=float)
    if b.shape != (n,) or np.any(~np.isfinite(b)) or np.any(b <= 0):
        raise InvalidInputError("budgets must be strictly positive, one per asset")
    if abs(b.sum() - 1.0) > 1e-10:
        raise InvalidInputError(f"budgets must sum to 1, got {b.sum()}")

    diag = np.diag(cov)
    y = 1.0 / np.sqrt(diag)
    y /= y.sum()
    for _ in range(max_sweeps):
        w_old = y / y.sum()
        for i in range(n):
            c = cov[i] @ y - diag[i] * y[i]
            y[i] = (-c + np.sqrt(c * c + 4.0 * diag[i] * b[i])) / (2.0 * diag[i])
        w = y / y.sum()
        if np.max(np.abs(w - w_old)) < tol and budget_residual(cov, w, b) < RB_RESIDUAL_TOL:
            break
    else:
        raise ConvergenceError(
            f"risk budgeting did not converge in {max_sweeps} sweeps",
            residual=budget_residual(cov, w, b))
    return w


def budget_residual(covariance, weights, budgets):
    """Largest gap between fractional risk contribution and target budget."""
    rc = risk_contributions(covariance, weights)
    return float(np.max(np.abs(rc / rc.sum() - np.asarray(budgets))))

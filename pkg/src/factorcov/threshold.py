"""Adaptive entry-wise thresholding estimators of the idiosyncratic covariance.

Two estimators share the same hard-thresholding core: the correlation-scaled
rule applied to the principal-component residual of a sample covariance, and
the volatility-scaled rule applied to regression residual second moments.
Diagonals are never thresholded.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from ._util import as_matrix, gram_matrix, mirror_upper, symmetrize

DEFAULT_C_GRID = tuple(round(0.1 * i, 10) for i in range(31))  # 0.0 .. 3.0


@dataclass(frozen=True)
class ThresholdConfig:
    """Configuration of the hard-thresholding level ``C * scale_ij * rate``.

    C
        Threshold constant. ``None`` requests automatic selection: the
        smallest grid value whose thresholded matrix has minimum eigenvalue
        at least ``pd_floor``.
    rate
        Dimension/sample-size rate multiplying the threshold. Callers supply
        it (see :func:`threshold_rate`) because the appropriate dimension
        depends on the pipeline stage.
    pd_floor
        Positive-definiteness floor used by automatic selection and by
        weight-matrix factorizations downstream.
    C_grid
        Strictly increasing candidate constants for automatic selection.
    """

    C: float = None
    rate: float = None
    pd_floor: float = 1e-8
    C_grid: tuple = DEFAULT_C_GRID

    def __post_init__(self):
        if self.C is not None and self.C < 0:
            raise ValueError("C must be nonnegative")
        if self.rate is not None and not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.pd_floor <= 0:
            raise ValueError("pd_floor must be positive")
        grid = tuple(float(c) for c in self.C_grid)
        if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("C_grid must be nonempty and strictly increasing")
        object.__setattr__(self, "C_grid", grid)

    def with_rate(self, rate):
        return replace(self, rate=float(rate))

    def require_rate(self):
        if self.rate is None:
            raise ValueError("ThresholdConfig.rate must be set before thresholding")
        return self.rate


def sample_covariance(Y):
    """Sample covariance of a p x T panel with divisor exactly T.

    Returns (1/T) * sum_t (y_t - ybar)(y_t - ybar)' as an exactly symmetric
    p x p matrix, where y_t are the columns of the panel.
    """
    values = as_matrix(Y)
    T = values.shape[1]
    if T < 2:
        raise ValueError("T >= 2 required for a sample covariance")
    centered = values - values.mean(axis=1, keepdims=True)
    centered /= np.sqrt(T)
    return gram_matrix(centered)


def threshold_rate(n, T):
    """Thresholding rate sqrt(log(n)/T) + 1/sqrt(n) for dimension n.

    ``n`` may be any positive real; the estimators use the dimension of
    whichever block of variables produced the matrix being thresholded.
    """
    n = float(n)
    T = float(T)
    if n < 1 or T < 1:
        raise ValueError("n >= 1 and T >= 1 required")
    return np.sqrt(np.log(n) / T) + 1.0 / np.sqrt(n)


def _top_eigpairs(S, k):
    """Top-k eigenpairs of a symmetric matrix, eigenvalues descending."""
    p = S.shape[0]
    vals, vecs = scipy.linalg.eigh(S, subset_by_index=[p - k, p - 1])
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def pca_residual_matrix(S, K):
    """Remove the top-K principal components from a symmetric matrix.

    Returns S - sum_{i<=K} lambda_i v_i v_i' symmetrized, so the result keeps
    the trailing eigenvalues of S and has K zero eigenvalues in their place.
    K = 0 returns S unchanged.
    """
    S = as_matrix(S)
    p = S.shape[0]
    if K >= p:
        raise ValueError(f"K={K} must be smaller than the matrix dimension {p}")
    if K == 0:
        return symmetrize(S)
    vals, vecs = _top_eigpairs(S, K)
    return symmetrize(S - (vecs * vals) @ vecs.T)


def hard_threshold_correlation(R, cfg):
    """Correlation-scaled hard thresholding of a residual covariance matrix.

    Entry (i, j) is kept when |r_ij| exceeds C * sqrt(r_ii * r_jj) * rate and
    set to zero otherwise; the diagonal passes through untouched. Requires a
    strictly positive diagonal.
    """
    R = as_matrix(R)
    rate = cfg.require_rate()
    d = np.diag(R).copy()
    if np.any(d <= 0):
        i = int(np.argmax(d <= 0))
        raise ValueError(f"degenerate variance: diagonal entry {i} is not positive")
    C = choose_threshold_constant(R, cfg, estimator="correlation") if cfg.C is None else cfg.C
    return _apply_correlation_threshold(R, d, C * rate)


def _apply_correlation_threshold(R, d, level, block=1024):
    """Blocked in-place masking; the result is mirrored from its upper half,
    so it is exactly symmetric for (the intended) symmetric input."""
    root = np.sqrt(d)
    out = np.array(R)
    n = out.shape[0]
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        tau = (level * root[i0:i1])[:, None] * root[None, :]
        blk = out[i0:i1]
        blk[np.abs(blk) <= tau] = 0.0
    np.fill_diagonal(out, d)
    return mirror_upper(out)


def residual_covariance_threshold(residuals, cfg):
    """Threshold raw second moments of regression residuals.

    For an s x T residual matrix U, the moment sigma_ij = (1/T) sum_t u_it u_jt
    is kept on the diagonal and hard-thresholded off the diagonal at
    C * sqrt(theta_ij) * rate, where theta_ij = (1/T) sum_t (u_it u_jt -
    sigma_ij)^2 estimates the moment's own variability.
    """
    U = as_matrix(residuals)
    T = U.shape[1]
    if T < 2:
        raise ValueError("T >= 2 required")
    rate = cfg.require_rate()
    sigma, theta = _residual_moments(U)
    C = (
        choose_threshold_constant(U, cfg, estimator="residual")
        if cfg.C is None
        else cfg.C
    )
    return _apply_residual_threshold(sigma, theta, C * rate)


def _residual_moments(U):
    T = U.shape[1]
    sigma = U @ U.T / T
    # theta = mean((u_i u_j)^2) - sigma^2, computed by one extra GEMM
    sq = U * U
    theta = sq @ sq.T / T - sigma * sigma
    # rounding can leave tiny negatives on exactly-constant products
    np.maximum(theta, 0.0, out=theta)
    return symmetrize(sigma), symmetrize(theta)


def _apply_residual_threshold(sigma, theta, level):
    out = np.where(np.abs(sigma) > level * np.sqrt(theta), sigma, 0.0)
    np.fill_diagonal(out, np.diag(sigma))
    return symmetrize(out)


def _is_pd_above(M, floor):
    """True when the minimum eigenvalue of symmetric M is >= floor."""
    try:
        scipy.linalg.cholesky(M - floor * np.eye(M.shape[0]), lower=True)
        return True
    except scipy.linalg.LinAlgError:
        return False


def choose_threshold_constant(data, cfg, estimator="correlation"):
    """Smallest grid constant whose thresholded matrix clears the PD floor.

    ``estimator`` selects which thresholding rule the candidate constants are
    applied through: "correlation" treats ``data`` as a residual covariance
    matrix, "residual" as an s x T residual panel. If no grid value yields a
    matrix with minimum eigenvalue >= pd_floor, the grid maximum is returned
    with a warning.
    """
    if estimator == "correlation":
        R = as_matrix(data)
        d = np.diag(R).copy()
        if np.any(d <= 0):
            raise ValueError("degenerate variance: diagonal must be positive")
        apply_c = lambda C: _apply_correlation_threshold(R, d, C * cfg.require_rate())
    elif estimator == "residual":
        sigma, theta = _residual_moments(as_matrix(data))
        apply_c = lambda C: _apply_residual_threshold(sigma, theta, C * cfg.require_rate())
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    for C in cfg.C_grid:
        if _is_pd_above(apply_c(C), cfg.pd_floor):
            return float(C)
    warnings.warn(
        "no threshold constant on the grid reaches the positive-definiteness "
        "floor; falling back to the grid maximum",
        RuntimeWarning,
        stacklevel=2,
    )
    return float(cfg.C_grid[-1])

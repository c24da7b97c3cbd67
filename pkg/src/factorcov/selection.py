"""Data-driven selection of the number of factors.

Two selectors: an information criterion that penalizes the log mean squared
residual of the k-component fit, and the eigenvalue-ratio rule that picks the
largest consecutive spectral gap.
"""

from dataclasses import dataclass

import numpy as np

from ._util import as_matrix, symmetrize

PENALTIES = ("gp1", "gp2")


@dataclass(frozen=True)
class KSelectionResult:
    k_hat: int
    ks: tuple
    criterion_values: tuple
    penalty: str


def _gram_eigenvalues(values):
    """Descending eigenvalues of Y'Y, computed on the smaller Gram side."""
    p, T = values.shape
    if p < T:
        g = values @ values.T
    else:
        g = values.T @ values
    vals = np.linalg.eigvalsh(symmetrize(g))[::-1]
    vals = np.maximum(vals, 0.0)
    full = np.zeros(min(p, T))
    full[: len(vals)] = vals[: len(full)]
    return full


def penalty_value(p, T, penalty):
    scale = (p + T) / (p * T)
    if penalty == "gp1":
        return scale * np.log(p * T / (p + T))
    if penalty == "gp2":
        return scale * np.log(min(p, T))
    raise ValueError(f"penalty must be one of {PENALTIES}")


def select_k_ic(Y, n_max, penalty="gp1", center=False):
    """Information-criterion choice of the factor count.

    For k = 0..n_max the criterion is log of the mean squared entry of the
    panel after removing its top-k principal components, plus k times the
    penalty. The removal residual is evaluated through the eigenvalue-tail
    identity: the squared Frobenius norm of the k-component residual equals
    the sum of the trailing eigenvalues of Y'Y. Ties pick the smallest k.

    ``center`` subtracts each variable's time mean first; the default applies
    the criterion to the raw panel.
    """
    values = as_matrix(Y)
    if center:
        values = values - values.mean(axis=1, keepdims=True)
    p, T = values.shape
    if not 0 <= n_max < min(p, T):
        raise ValueError(f"n_max={n_max} must satisfy 0 <= n_max < min(p, T)")
    if not np.any(values):
        raise ValueError("degenerate input: panel is identically zero")

    eigs = _gram_eigenvalues(values)
    total = float(np.sum(values * values))
    tail = total - np.concatenate(([0.0], np.cumsum(eigs)))
    tail = np.maximum(tail, 0.0)
    g = penalty_value(p, T, penalty)
    ks = np.arange(n_max + 1)
    with np.errstate(divide="ignore"):
        crit = np.log(tail[: n_max + 1] / (p * T)) + ks * g
    k_hat = int(np.argmin(crit))
    return KSelectionResult(k_hat, tuple(int(k) for k in ks), tuple(map(float, crit)), penalty)


def select_k_eigen_ratio(Y, n_max):
    """Eigenvalue-ratio choice of the factor count.

    Picks the k in 1..n_max maximizing lambda_k / lambda_{k+1} of Y'Y / T.
    A zero denominator with a positive numerator marks the exact rank
    boundary and wins outright; ties pick the smallest k.
    """
    values = as_matrix(Y)
    p, T = values.shape
    if n_max + 1 > min(p, T):
        raise ValueError(f"n_max={n_max} needs min(p, T) >= n_max + 1")
    if n_max < 1:
        raise ValueError("n_max >= 1 required")
    eigs = _gram_eigenvalues(values) / T
    ratios = np.empty(n_max)
    for k in range(1, n_max + 1):
        num, den = eigs[k - 1], eigs[k]
        if den > 0:
            ratios[k - 1] = num / den
        elif num > 0:
            ratios[k - 1] = np.inf
        else:
            ratios[k - 1] = -np.inf  # past the rank boundary; never selected
    k_hat = int(np.argmax(ratios)) + 1
    ks = tuple(range(1, n_max + 1))
    return KSelectionResult(k_hat, ks, tuple(map(float, ratios)), "eigen_ratio")


def residual_frobenius_direct(Y, k):
    """Brute-force residual norm after removing k principal components.

    Forms the projection explicitly; kept as the independent cross-check for
    the eigenvalue-tail identity used by :func:`select_k_ic`.
    """
    from .wpca import pc_factors

    values = as_matrix(Y)
    T = values.shape[1]
    F = pc_factors(values, k)
    resid = values - values @ F @ F.T / T
    return float(np.sum(resid * resid))

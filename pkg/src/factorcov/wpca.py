"""Weighted principal-component factor extraction.

The constrained weighted least-squares problem for factors and loadings is
solved through the T x T eigenproblem of Y' W^{-1} Y, where W is a positive
definite weight matrix (an initial estimate of the idiosyncratic covariance).
Factor columns are sqrt(T) times unit eigenvectors, so (1/T) F'F = I by
construction, and loadings follow as B = Y F / T, which makes B' W^{-1} B
diagonal with the scaled eigenvalues on the diagonal.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._util import as_matrix, fix_column_signs, symmetrize

DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class WpcaResult:
    """Factors (T x k), loadings (n x k), and the top-k eigenvalue diagonal.

    ``eig_diag`` holds the descending eigenvalues of Y' W^{-1} Y / T.
    ``jitter_applied`` records that a pd_floor diagonal jitter was needed to
    factorize the weight; ``degenerate_spectrum`` that the retained
    eigenvalues were not numerically distinct, in which case their order was
    fixed lexicographically by eigenvector.
    """

    factors: np.ndarray
    loadings: np.ndarray
    eig_diag: np.ndarray
    weight_inverse_applied: bool
    jitter_applied: bool = False
    degenerate_spectrum: bool = False
    timings: dict = field(default_factory=dict, repr=False, compare=False)


def _spd_factor(weight, pd_floor):
    """Lower Cholesky factor of a symmetric PD weight, jittering once if needed."""
    try:
        return scipy.linalg.cho_factor(weight, lower=True, check_finite=False), False
    except scipy.linalg.LinAlgError:
        pass
    jittered = weight + pd_floor * np.eye(weight.shape[0])
    try:
        return scipy.linalg.cho_factor(jittered, lower=True, check_finite=False), True
    except scipy.linalg.LinAlgError:
        raise ValueError(
            "weight matrix is not positive definite (Cholesky failed even "
            "after a pd_floor jitter)"
        ) from None


def _solve_spd(weight, rhs, pd_floor):
    """Solve weight @ X = rhs for symmetric PD weight, jittering once if needed."""
    c, jittered = _spd_factor(weight, pd_floor)
    return scipy.linalg.cho_solve(c, rhs, check_finite=False), jittered


def _order_degenerate(vals, vecs, rtol=DEGENERATE_RTOL):
    """Reorder eigenvectors inside numerically tied eigenvalue groups.

    Ties (relative gap below ``rtol``) are sorted lexicographically by their
    sign-fixed eigenvector entries so the output does not depend on LAPACK's
    arbitrary choice of basis ordering. Returns the permuted pair and a flag.
    """
    k = len(vals)
    scale = max(abs(vals[0]), abs(vals[-1]), 1.0)
    degenerate = False
    order = list(range(k))
    start = 0
    while start < k:
        stop = start + 1
        while stop < k and abs(vals[stop - 1] - vals[stop]) <= rtol * scale:
            stop = stop + 1
        if stop - start > 1:
            degenerate = True
            block = sorted(order[start:stop], key=lambda j: tuple(vecs[:, j]))
            order[start:stop] = block
        start = stop
    if degenerate:
        return vals[order], vecs[:, order], True
    return vals, vecs, False


def _top_factor_system(A, k, T):
    """Top-k eigensystem of the symmetric T x T matrix A, factor-scaled."""
    vals, vecs = scipy.linalg.eigh(A, subset_by_index=[T - k, T - 1], check_finite=False)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vecs = fix_column_signs(vecs)
    vals, vecs, degenerate = _order_degenerate(vals, vecs)
    if degenerate:
        warnings.warn(
            "eigenvalue spectrum is numerically degenerate; factor order was "
            "fixed lexicographically",
            RuntimeWarning,
            stacklevel=3,
        )
    return vals, np.sqrt(T) * vecs, degenerate


def weighted_pc(Y, idio_weight, k, pd_floor=1e-8):
    """Weighted principal-component estimate for k factors.

    Parameters
    ----------
    Y : array_like, shape (n, T)
        Data panel for the n variables entering the eigenproblem.
    idio_weight : array_like, shape (n, n)
        Symmetric positive definite weight matrix; its inverse whitens the
        variables before the principal-component step.
    k : int
        Number of factors, k < min(n, T).
    pd_floor : float
        Diagonal jitter added once if the weight fails to factorize.

    Returns
    -------
    WpcaResult
        Sign-fixed factors scaled so (1/T) F'F = I, loadings Y F / T, and
        the descending eigenvalues of Y' W^{-1} Y / T.
    """
    values = as_matrix(Y)
    n, T = values.shape
    if not 0 < k < min(n, T):
        raise ValueError(f"k={k} must satisfy 0 < k < min(n, T) = {min(n, T)}")
    W = as_matrix(idio_weight)
    if W.shape != (n, n):
        raise ValueError(f"weight shape {W.shape} does not match n={n}")

    t0 = time.perf_counter()
    (chol, lower), jittered = _spd_factor(W, pd_floor)
    whitened = scipy.linalg.solve_triangular(
        chol, values, lower=lower, check_finite=False
    )
    t1 = time.perf_counter()
    # Y' W^{-1} Y as the Gram of the whitened panel: symmetric by construction
    # and one triangular solve instead of two
    A = symmetrize(whitened.T @ whitened)
    vals, factors, degenerate = _top_factor_system(A, k, T)
    t2 = time.perf_counter()
    loadings = values @ factors / T

    return WpcaResult(
        factors=factors,
        loadings=loadings,
        eig_diag=vals / T,
        weight_inverse_applied=True,
        jitter_applied=jittered,
        degenerate_spectrum=degenerate,
        timings={"invert_s": t1 - t0, "eigensolve_s": t2 - t1},
    )


def pc_factors(Y, k):
    """Ordinary (unweighted) principal-component factors.

    Returns the T x k matrix whose columns are sqrt(T) times the unit
    eigenvectors of Y'Y for the k largest eigenvalues, sign-fixed. k = 0
    yields an empty T x 0 matrix.
    """
    values = as_matrix(Y)
    n, T = values.shape
    if k < 0 or k > min(n, T):
        raise ValueError(f"k={k} must satisfy 0 <= k <= min(n, T) = {min(n, T)}")
    if k == 0:
        return np.zeros((T, 0))
    A = symmetrize(values.T @ values)
    _, factors, _ = _top_factor_system(A, k, T)
    return factors


def identifiable_rotation(eig_diag, factors_hat, factors_true, loadings_true, idio_weight):
    """K x K rotation aligning true factors with their estimable image.

    Computes V^{-1} (Fhat' F) (B' W^{-1} B) / T, the rotation such that
    ``H f_t`` is the quantity the factor estimate actually identifies. Used
    only for evaluation against simulation ground truth.
    """
    v = np.asarray(eig_diag, dtype=np.float64)
    if np.any(v == 0):
        raise ValueError("eigenvalue diagonal is singular")
    Fh = as_matrix(factors_hat)
    F = as_matrix(factors_true)
    B = as_matrix(loadings_true)
    W = as_matrix(idio_weight)
    T = Fh.shape[0]
    solved, _ = _solve_spd(W, B, pd_floor=1e-12)
    return (Fh.T @ F) @ (B.T @ solved) / (v[:, None] * T)

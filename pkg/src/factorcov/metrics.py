"""Error norms, model-condition diagnostics, and Fisher-information checks."""

import json
from dataclasses import asdict, dataclass

import numpy as np

from ._util import as_matrix, symmetrize


@dataclass(frozen=True)
class ErrorReport:
    """Per-method error metrics against a simulation ground truth."""

    relative_norm: float
    max_norm: float
    inv_op_norm: float
    factor_err: float
    loading_err: float
    component_err: float
    method: str

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class FisherReport:
    """Factor information of the full panel vs a subset, and their gap."""

    info_full: np.ndarray
    info_subset: np.ndarray
    min_eig_diff: float
    block_diagonal: bool


@dataclass(frozen=True)
class ModelConditionReport:
    loading_eig_min: float
    loading_eig_max: float
    pervasive_ok: bool
    q_matrix: np.ndarray
    q_offdiag_max: float
    q_min_diag_gap: float
    distinct_ok: bool
    warnings: tuple


def _inv_sqrt(M):
    vals, vecs = np.linalg.eigh(symmetrize(M))
    if np.any(vals <= 0):
        raise ValueError("matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def relative_norm(est, truth):
    """Frobenius error of est against truth after whitening by truth.

    d^{-1/2} * ||truth^{-1/2} (est - truth) truth^{-1/2}||_F, the error scale
    suited to spiked covariance matrices whose raw operator norm diverges.
    """
    est = as_matrix(est)
    truth = as_matrix(truth)
    d = truth.shape[0]
    w = _inv_sqrt(truth)
    core = w @ (est - truth) @ w
    return float(np.linalg.norm(core, "fro") / np.sqrt(d))


def max_norm_diff(est, truth):
    """Largest absolute entry of est - truth."""
    est, truth = as_matrix(est), as_matrix(truth)
    if est.shape != truth.shape:
        raise ValueError("shape mismatch")
    return float(np.max(np.abs(est - truth)))


def inv_operator_norm_diff(est, truth):
    """Operator norm of est^{-1} - truth^{-1} via exact eigendecomposition."""
    est, truth = as_matrix(est), as_matrix(truth)
    diff = symmetrize(np.linalg.inv(est) - np.linalg.inv(truth))
    return float(np.max(np.abs(np.linalg.eigvalsh(diff))))


def factor_error(factors_hat, factors_true, rotation):
    """max_t of the Euclidean gap between f_hat_t and rotation @ f_t."""
    Fh, F = as_matrix(factors_hat), as_matrix(factors_true)
    if Fh.shape != F.shape:
        raise ValueError("shape mismatch")
    gaps = Fh - F @ np.asarray(rotation).T
    return float(np.max(np.linalg.norm(gaps, axis=1)))


def loading_error(loadings_hat, loadings_true, rotation):
    """max_i of the Euclidean gap between b_hat_i and rotation @ b_i."""
    Bh, B = as_matrix(loadings_hat), as_matrix(loadings_true)
    if Bh.shape != B.shape:
        raise ValueError("shape mismatch")
    gaps = Bh - B @ np.asarray(rotation).T
    return float(np.max(np.linalg.norm(gaps, axis=1)))


def loading_error_operator(loadings_hat, loadings_true, rotation):
    """Largest singular value of the rotation-aligned loading error matrix.

    This is the loading-accuracy measure the comparison tables report; it
    grows like sqrt(s) with the subset size, unlike the per-row maximum.
    """
    Bh, B = as_matrix(loadings_hat), as_matrix(loadings_true)
    if Bh.shape != B.shape:
        raise ValueError("shape mismatch")
    return float(np.linalg.norm(Bh - B @ np.asarray(rotation).T, 2))


def component_error(loadings_hat, factors_hat, loadings_true, factors_true):
    """max over (i, t) of |b_hat_i' f_hat_t - b_i' f_t|; rotation-free."""
    fitted = as_matrix(loadings_hat) @ as_matrix(factors_hat).T
    truth = as_matrix(loadings_true) @ as_matrix(factors_true).T
    if fitted.shape != truth.shape:
        raise ValueError("shape mismatch")
    return float(np.max(np.abs(fitted - truth)))


def sparsity_measure(idio_cov, tol=0.0):
    """Row-wise and total off-diagonal support counts of a covariance matrix.

    Returns (max over rows of the off-diagonal nonzero count, total
    off-diagonal nonzero count), where "nonzero" means magnitude above tol.
    """
    M = as_matrix(idio_cov)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    support = np.abs(M) > tol
    np.fill_diagonal(support, False)
    per_row = support.sum(axis=1)
    return int(per_row.max(initial=0)), int(support.sum())


def check_model_conditions(loadings, idio_cov, gap_tol=1e-6, pervasive_tol=1e-12):
    """Diagnostics for the pervasiveness and information-limit conditions.

    Reports the eigenvalue range of B'B/p, and for Q = B' Sigma_u^{-1} B / p
    the off-diagonal mass and the smallest gap between sorted diagonal
    entries. Emits warnings when the loading Gram is degenerate or the
    diagonal entries of Q are not numerically distinct.
    """
    B = as_matrix(loadings)
    Su = as_matrix(idio_cov)
    p = B.shape[0]
    gram = symmetrize(B.T @ B / p)
    gram_eigs = np.linalg.eigvalsh(gram)
    pervasive_ok = bool(gram_eigs[0] > pervasive_tol)

    q = symmetrize(B.T @ np.linalg.solve(Su, B) / p)
    off = q - np.diag(np.diag(q))
    diag_sorted = np.sort(np.diag(q))
    gaps = np.diff(diag_sorted)
    min_gap = float(gaps.min()) if gaps.size else np.inf
    scale = max(float(diag_sorted[-1]), 1e-300) if diag_sorted.size else 1.0
    distinct_ok = bool(min_gap > gap_tol * scale)

    notes = []
    if not pervasive_ok:
        notes.append("loading Gram matrix is numerically singular; factors are not pervasive")
    if not distinct_ok:
        notes.append("diagonal entries of the information limit are not distinct")
    return ModelConditionReport(
        loading_eig_min=float(gram_eigs[0]),
        loading_eig_max=float(gram_eigs[-1]),
        pervasive_ok=pervasive_ok,
        q_matrix=q,
        q_offdiag_max=float(np.max(np.abs(off))) if off.size else 0.0,
        q_min_diag_gap=min_gap,
        distinct_ok=distinct_ok,
        warnings=tuple(notes),
    )


def _factor_information(B, Su):
    return symmetrize(B.T @ np.linalg.solve(Su, B))


def fisher_dominance(loadings, idio_cov, S, block_tol=1e-12):
    """Compare the factor information of the full panel with a subset's.

    Under Gaussian errors the information about the factors is
    B' Sigma_u^{-1} B; the report carries both matrices, the minimum
    eigenvalue of their difference, and whether Sigma_u is block-diagonal
    across the subset and its complement at ``block_tol``.
    """
    B = as_matrix(loadings)
    Su = as_matrix(idio_cov)
    p = B.shape[0]
    S.validate_against(p)
    idx = list(S.indices)
    rest = [i for i in range(p) if i not in set(idx)]

    info_full = _factor_information(B, Su)
    info_sub = _factor_information(B[idx], Su[np.ix_(idx, idx)])
    diff_eigs = np.linalg.eigvalsh(symmetrize(info_full - info_sub))
    cross = Su[np.ix_(idx, rest)] if rest else np.zeros((len(idx), 0))
    block = bool(cross.size == 0 or np.max(np.abs(cross)) <= block_tol)
    return FisherReport(
        info_full=info_full,
        info_subset=info_sub,
        min_eig_diff=float(diff_eigs[0]),
        block_diagonal=block,
    )


def fisher_dominance_expected(loading_sampler, idio_cov, S, n_draws, seed=0):
    """Average the information comparison over random loading draws.

    ``loading_sampler(rng, p)`` must return a p x K loading matrix with
    independent mean-zero rows. Per-draw generators are spawned
    deterministically from the master seed, so the average is reproducible
    and the draws could be evaluated in any order.
    """
    if n_draws < 1:
        raise ValueError("n_draws >= 1 required")
    Su = as_matrix(idio_cov)
    p = Su.shape[0]
    seeds = np.random.SeedSequence(seed).spawn(n_draws)
    sum_full = None
    sum_sub = None
    idx = list(S.indices)
    Su_sub = Su[np.ix_(idx, idx)]
    for child in seeds:
        B = np.asarray(loading_sampler(np.random.default_rng(child), p), dtype=np.float64)
        info_full = _factor_information(B, Su)
        info_sub = _factor_information(B[idx], Su_sub)
        sum_full = info_full if sum_full is None else sum_full + info_full
        sum_sub = info_sub if sum_sub is None else sum_sub + info_sub
    mean_full = sum_full / n_draws
    mean_sub = sum_sub / n_draws
    diff_eigs = np.linalg.eigvalsh(symmetrize(mean_full - mean_sub))
    rest = [i for i in range(p) if i not in set(idx)]
    cross = Su[np.ix_(idx, rest)] if rest else np.zeros((len(idx), 0))
    block = bool(cross.size == 0 or np.max(np.abs(cross)) <= 1e-12)
    return FisherReport(
        info_full=mean_full,
        info_subset=mean_sub,
        min_eig_diff=float(diff_eigs[0]),
        block_diagonal=block,
    )

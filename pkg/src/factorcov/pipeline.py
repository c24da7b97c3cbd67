"""End-to-end covariance estimators for a target subset of variables.

Three pipelines share the same final step (loadings, residual thresholding,
total covariance) and differ in where the factors come from:

* method1 extracts factors from the target variables only,
* method2 extracts factors from the full panel and restricts the loadings,
* oracle takes the true factors as given (simulation benchmarking only).
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._util import gram_matrix, symmetrize
from .data import FactorModelEstimate, restrict
from .threshold import (
    ThresholdConfig,
    _top_eigpairs,
    choose_threshold_constant,
    hard_threshold_correlation,
    residual_covariance_threshold,
    sample_covariance,
    threshold_rate,
)
from .wpca import weighted_pc

RATE_MODES = ("paper_literal", "theory_aware")


@dataclass(frozen=True)
class PipelineConfig:
    """Number of factors, thresholding settings, and residual-rate policy.

    rate_mode "paper_literal" thresholds residual moments with the rate for
    the subset dimension, sqrt(log(s)/T) + 1/sqrt(s), for every method.
    "theory_aware" swaps the additive term for the method's own loading
    error rate: 1/sqrt(s) (subset factors), 1/sqrt(p) (full-panel factors),
    or nothing (oracle), so full-panel estimation gets the smaller threshold
    its faster convergence justifies.
    """

    K: int
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    rate_mode: str = "paper_literal"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K >= 1 required")
        if self.rate_mode not in RATE_MODES:
            raise ValueError(f"rate_mode must be one of {RATE_MODES}")


def residual_threshold_rate(method, s, p, T, mode):
    """Rate multiplying the residual-moment threshold for a given method."""
    if mode == "paper_literal":
        return threshold_rate(s, T)
    base = np.sqrt(np.log(s) / T)
    loading_rate = {
        "method1": base + 1.0 / np.sqrt(s),
        "method2": base + 1.0 / np.sqrt(p),
        "divide_conquer": base + 1.0 / np.sqrt(p),
        "oracle": base,
    }
    return base + loading_rate[method]


def _low_rank_residual(values, S_y, K, pd_floor):
    """Sample covariance minus its top-K principal components, diagonal floored.

    When the panel is much wider than long, the top eigenpairs of S_y come
    from the T x T Gram matrix of the centered data instead of the p x p
    eigenproblem; the removed component lambda * v v' is identical either way.
    The diagonal is floored at pd_floor so exactly-noiseless panels (zero
    residual variance) stay inside the thresholding domain.
    """
    p, T = values.shape
    if K >= p:
        raise ValueError(f"K={K} must be smaller than the number of variables {p}")
    if p > 2 * T:
        centered = values - values.mean(axis=1, keepdims=True)
        gram = symmetrize(centered.T @ centered / T)
        vals, vecs = np.linalg.eigh(gram)
        vals, vecs = vals[::-1][:K].copy(), vecs[:, ::-1][:, :K]
        vals = np.maximum(vals, 0.0)
        comp = centered @ vecs
        norms = np.linalg.norm(comp, axis=0)
        norms[norms == 0] = 1.0
        comp /= norms
    else:
        vals, comp = _top_eigpairs(S_y, K)
        vals = np.maximum(vals, 0.0)
    # S_y is ours to consume: subtract the (exactly symmetric) component
    # gram in place instead of allocating another p x p temporary
    R = S_y
    R -= gram_matrix(comp * np.sqrt(vals))
    d = np.maximum(np.diag(R), pd_floor)
    np.fill_diagonal(R, d)
    return R


def initial_idio_estimate(values, K, threshold_cfg):
    """Thresholded principal-component-residual estimate of the idiosyncratic
    covariance, used as the weight matrix for factor extraction.

    The rate comes from the dimension of ``values`` itself. Returns the
    estimate together with the threshold constant actually applied.
    """
    n, T = values.shape
    cfg = threshold_cfg.with_rate(threshold_rate(n, T))
    S_y = sample_covariance(values)
    R = _low_rank_residual(values, S_y, K, cfg.pd_floor)
    C = cfg.C if cfg.C is not None else choose_threshold_constant(R, cfg, "correlation")
    return hard_threshold_correlation(R, replace(cfg, C=C)), C


def _finish_estimate(values_S, factors, eig_diag, method, s, p, cfg, info,
                     factor_gram=None):
    """Common tail: loadings, residual thresholding, total covariance.

    Eigenvector factors have gram T * I, so the regression reduces to
    Y_S F / T; the oracle passes its true-factor gram explicitly.
    """
    T = values_S.shape[1]
    if factor_gram is None:
        loadings = values_S @ factors / T
    else:
        loadings = np.linalg.solve(factor_gram, factors.T @ values_S.T).T
    residuals = values_S - loadings @ factors.T
    rate = residual_threshold_rate(method, s, p, T, cfg.rate_mode)
    tcfg = cfg.threshold.with_rate(rate)
    t0 = time.perf_counter()
    C = tcfg.C if tcfg.C is not None else choose_threshold_constant(residuals, tcfg, "residual")
    idio = residual_covariance_threshold(residuals, replace(tcfg, C=C))
    info["residual_threshold_s"] = time.perf_counter() - t0
    info["residual_C"] = C
    info["residual_rate"] = rate
    total = symmetrize(loadings @ loadings.T + idio)
    return FactorModelEstimate(
        factors=factors,
        loadings=loadings,
        idio_cov=idio,
        total_cov=total,
        eig_diag=eig_diag,
        method=method,
        info=info,
    )


def _factor_step(values, K, cfg, keep_weight):
    """Initial weight then weighted principal components on one panel."""
    info = {}
    t0 = time.perf_counter()
    weight, chosen_C = initial_idio_estimate(values, K, cfg.threshold)
    info["initial_threshold_s"] = time.perf_counter() - t0
    info["initial_C"] = chosen_C
    res = weighted_pc(values, weight, K, pd_floor=cfg.threshold.pd_floor)
    info.update(res.timings)
    info["weight_jittered"] = res.jitter_applied
    info["degenerate_spectrum"] = res.degenerate_spectrum
    if keep_weight:
        info["wpc_weight"] = weight
    return res, info


def estimate_method1(Y, S, cfg, keep_weight=False):
    """Estimate the subset covariance using the target variables only.

    Factors and the initial weight come from the s x T restricted panel;
    residual moments are then thresholded and combined with the loadings.
    """
    Y.require_valid()
    Y_S = restrict(Y, S)
    _check_dims(Y_S.p, Y.T, cfg.K)
    res, info = _factor_step(Y_S.values, cfg.K, cfg, keep_weight)
    return _finish_estimate(
        Y_S.values, res.factors, res.eig_diag, "method1", Y_S.p, Y.p, cfg, info
    )


def estimate_method2(Y, S, cfg, keep_weight=False):
    """Estimate the subset covariance using the full panel for the factors.

    The initial weight and the factor extraction use all p variables; the
    loadings, residuals and thresholding are then restricted to the subset.
    """
    Y.require_valid()
    _check_dims(Y.p, Y.T, cfg.K)
    Y_S = restrict(Y, S)
    res, info = _factor_step(Y.values, cfg.K, cfg, keep_weight)
    return _finish_estimate(
        Y_S.values, res.factors, res.eig_diag, "method2", Y_S.p, Y.p, cfg, info
    )


def estimate_oracle(Y, S, factors_true, cfg):
    """Estimate the subset covariance with the true factors supplied.

    Simulation benchmark only: loadings are the least-squares regression of
    the subset panel on the given factors, and residual moments are
    thresholded as in the other methods. Exact regression (rather than the
    plain cross-moment Y_S F / T, which coincides with it when the factor
    sample Gram is the identity) keeps the oracle at least as accurate as the
    feasible methods at every sample size.
    """
    Y.require_valid()
    F = np.asarray(factors_true, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] != Y.T or F.shape[1] != cfg.K:
        raise ValueError(f"true factors have shape {F.shape}, expected ({Y.T}, {cfg.K})")
    Y_S = restrict(Y, S)
    return _finish_estimate(
        Y_S.values, F, None, "oracle", Y_S.p, Y.p, cfg, {}, factor_gram=F.T @ F
    )


def _check_dims(n, T, K):
    if n <= K:
        raise ValueError(f"need more variables than factors: n={n}, K={K}")
    if T <= K:
        raise ValueError(f"need more time points than factors: T={T}, K={K}")

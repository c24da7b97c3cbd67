"""Linear discriminant classification with a factor-model covariance plug-in.

The discriminant uses a covariance estimate from either the subset-only or
the full-panel pipeline, so the only difference between the two rules is how
much auxiliary data informs the covariance. Variables enter through a simple
two-sample t-statistic screener.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._util import as_matrix
from .data import ObservationMatrix, SubsetSelector
from .pipeline import PipelineConfig, estimate_method1, estimate_method2
from .threshold import ThresholdConfig


@dataclass(frozen=True)
class LdaRule:
    """Fitted discriminant: classify as case when
    delta' Sigma^{-1} (x - mu_bar) >= 0."""

    delta_hat: np.ndarray
    mu_bar: np.ndarray
    sigma_inv: np.ndarray
    selected: SubsetSelector


@dataclass(frozen=True)
class LdaSpec:
    """Recipe for fitting one rule inside the split harness."""

    name: str
    cov_method: str = "method2"
    k: int = 3
    s_max: int = 20
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    centering: str = "class"


def _split_classes(labels):
    labels = np.asarray(labels).astype(int).ravel()
    if set(np.unique(labels)) - {0, 1}:
        raise ValueError("labels must be 0/1")
    cases = np.flatnonzero(labels == 1)
    controls = np.flatnonzero(labels == 0)
    if len(cases) == 0 or len(controls) == 0:
        raise ValueError("both classes must be nonempty")
    return cases, controls


def screen_variables(values, labels, s_max):
    """Select the variables with the largest |two-sample t| statistics.

    Welch statistics with (n-1)-divisor variances; zero-variance gaps give an
    infinite statistic. Ties break deterministically toward the lower index,
    and the selected indices are returned in ascending order.
    """
    X = as_matrix(values)
    cases, controls = _split_classes(labels)
    if not 1 <= s_max <= X.shape[0]:
        raise ValueError("1 <= s_max <= p required")
    x1, x0 = X[:, cases], X[:, controls]
    gap = x1.mean(axis=1) - x0.mean(axis=1)
    v1 = x1.var(axis=1, ddof=1) if x1.shape[1] > 1 else np.zeros(X.shape[0])
    v0 = x0.var(axis=1, ddof=1) if x0.shape[1] > 1 else np.zeros(X.shape[0])
    se = np.sqrt(v1 / max(x1.shape[1], 1) + v0 / max(x0.shape[1], 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.abs(gap) / se
    t = np.where(se == 0, np.where(gap == 0, 0.0, np.inf), t)
    order = np.argsort(-t, kind="stable")
    chosen = sorted(int(i) for i in order[:s_max])
    return SubsetSelector(tuple(chosen))


def fit_lda(values, labels, subset, cov_method="method2", k=3,
            threshold=None, centering="class"):
    """Fit a discriminant rule with a factor-model covariance estimate.

    Class means are taken on the selected variables; the covariance pipeline
    runs on the panel with each subject's own class mean removed (``centering
    = "pooled"`` removes the overall mean instead), so the factor structure
    models within-class variation. The chosen pipeline ("method1" restricts
    to the selected variables, "method2" uses the full panel for the factor
    step) supplies Sigma, inverted by a symmetric PD solve.
    """
    X = as_matrix(values)
    p, n = X.shape
    if n < 4:
        raise ValueError("at least 4 training subjects required")
    cases, controls = _split_classes(labels)
    if len(cases) < 2 or len(controls) < 2:
        raise ValueError("each class needs at least 2 training subjects")
    subset.validate_against(p)

    mu1 = X[:, cases].mean(axis=1)
    mu0 = X[:, controls].mean(axis=1)
    if centering == "class":
        centered = X.copy()
        centered[:, cases] -= mu1[:, None]
        centered[:, controls] -= mu0[:, None]
    elif centering == "pooled":
        centered = X - X.mean(axis=1, keepdims=True)
    else:
        raise ValueError("centering must be 'class' or 'pooled'")

    cfg = PipelineConfig(K=k, threshold=threshold or ThresholdConfig())
    Yc = ObservationMatrix(centered)
    if cov_method == "method1":
        est = estimate_method1(Yc, subset, cfg)
    elif cov_method == "method2":
        est = estimate_method2(Yc, subset, cfg)
    else:
        raise ValueError("cov_method must be 'method1' or 'method2'")

    try:
        c = scipy.linalg.cho_factor(est.total_cov, lower=True)
    except scipy.linalg.LinAlgError:
        raise ValueError("estimated covariance is singular") from None
    sigma_inv = scipy.linalg.cho_solve(c, np.eye(subset.size))
    sigma_inv = (sigma_inv + sigma_inv.T) / 2.0

    idx = list(subset.indices)
    return LdaRule(
        delta_hat=mu1[idx] - mu0[idx],
        mu_bar=(mu1[idx] + mu0[idx]) / 2.0,
        sigma_inv=sigma_inv,
        selected=subset,
    )


def discriminant(x, rule):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != rule.mu_bar.shape[0]:
        raise ValueError(f"expected {rule.mu_bar.shape[0]} features, got {x.shape[0]}")
    return float(rule.delta_hat @ rule.sigma_inv @ (x - rule.mu_bar))


def classify(x, rule):
    """1 (case) when the discriminant is >= 0, else 0; the boundary is a case."""
    return int(discriminant(x, rule) >= 0)


def misclassification_rate(values, labels, specs, n_splits=50, test_size=None, seed=0):
    """Mean and sd of test misclassification over repeated random splits.

    Each split holds out ``test_size`` subjects (default: a quarter), fits
    every spec's rule on the remainder, screens variables on the training
    part only, and scores the held-out subjects. Split membership is drawn
    from the master seed, so results are reproducible.
    """
    X = as_matrix(values)
    labels = np.asarray(labels).astype(int).ravel()
    n = X.shape[1]
    if labels.shape[0] != n:
        raise ValueError("labels must align with data columns")
    if test_size is None:
        test_size = max(1, n // 4)
    if not 0 < test_size < n - 3:
        raise ValueError("test_size leaves too few training subjects")

    rates = {spec.name: [] for spec in specs}
    for split in range(n_splits):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(split,)))
        for _ in range(1000):
            order = rng.permutation(n)
            test, train = order[:test_size], order[test_size:]
            y_train = labels[train]
            if 2 <= y_train.sum() <= len(y_train) - 2:
                break
        else:
            raise ValueError("could not draw a split with 2 training subjects per class")
        X_train, X_test = X[:, train], X[:, test]
        for spec in specs:
            subset = screen_variables(X_train, y_train, spec.s_max)
            rule = fit_lda(X_train, y_train, subset, spec.cov_method, spec.k,
                           spec.threshold, spec.centering)
            idx = list(subset.indices)
            wrong = sum(
                classify(X_test[idx, j], rule) != labels[test[j]]
                for j in range(test_size)
            )
            rates[spec.name].append(wrong / test_size)

    out = {}
    for spec in specs:
        vals = np.asarray(rates[spec.name])
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out[spec.name] = (float(np.mean(vals)), sd)
    return out


def rates_to_json(results, n_splits):
    payload = [
        {"rule": name, "mean_rate": mean, "sd_rate": sd, "n_splits": n_splits}
        for name, (mean, sd) in sorted(results.items())
    ]
    return json.dumps(payload, sort_keys=True, indent=2)


def load_labels(path):
    """Read one 0/1 label per line, aligned with panel columns."""
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            if tok not in ("0", "1"):
                raise ValueError(f"{path}: line {lineno}: labels must be 0 or 1")
            labels.append(int(tok))
    if not labels:
        raise ValueError(f"{path}: no labels found")
    return np.asarray(labels, dtype=int)

"""Synthetic data generation and the Monte-Carlo comparison harness.

The default design draws loading rows N(0, 5 I_K), factor rows N(0, I_K) and
idiosyncratic noise N(0, 50 I_p); the heteroscedastic variant replaces the
constant noise variance by per-variable Uniform(25, 75) draws. All randomness
flows through one master seed with replication substreams, so tables are
reproducible regardless of how replications are scheduled.
"""

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import ObservationMatrix, SubsetSelector, TrueModel
from .divide_conquer import dc_estimate, dc_rotation
from .metrics import (
    ErrorReport,
    component_error,
    factor_error,
    inv_operator_norm_diff,
    loading_error_operator,
    max_norm_diff,
    relative_norm,
)
from .pipeline import (
    PipelineConfig,
    estimate_method1,
    estimate_method2,
    estimate_oracle,
)
from .threshold import ThresholdConfig
from .wpca import identifiable_rotation

METRICS = (
    "relative_norm",
    "inv_op_norm",
    "max_norm",
    "factor_err",
    "loading_err",
    "component_err",
)


@dataclass(frozen=True)
class SimConfig:
    """Design of one simulation experiment.

    ``threshold_c`` is the hard-threshold constant handed to the pipelines;
    None requests automatic (smallest positive-definiteness-preserving)
    selection per estimate. ``dc_M`` adds a divide-and-conquer column with
    that group count.
    """

    s: int
    p: int
    T: int
    K: int = 3
    n_reps: int = 50
    seed: int = 0
    loading_var: float = 5.0
    idio_var: float = 50.0
    heteroscedastic: bool = False
    dc_M: int = None
    threshold_c: float = 1.0
    rate_mode: str = "paper_literal"

    def __post_init__(self):
        if not (1 <= self.s <= self.p):
            raise ValueError("1 <= s <= p required")
        if not self.K < min(self.s, self.T):
            raise ValueError("K < min(s, T) required")

    def pipeline_config(self):
        return PipelineConfig(
            K=self.K,
            threshold=ThresholdConfig(C=self.threshold_c),
            rate_mode=self.rate_mode,
        )


def _rep_rng(seed, rep):
    if rep is None:
        return np.random.default_rng(np.random.SeedSequence(seed))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(rep),)))


def _draw(cfg, rep=None):
    """Draw (loadings, factors, idio variances, panel values) for one rep."""
    rng = _rep_rng(cfg.seed, rep)
    B = rng.standard_normal((cfg.p, cfg.K)) * np.sqrt(cfg.loading_var)
    F = rng.standard_normal((cfg.T, cfg.K))
    if cfg.heteroscedastic:
        ivars = rng.uniform(25.0, 75.0, cfg.p)
    else:
        ivars = np.full(cfg.p, float(cfg.idio_var))
    U = rng.standard_normal((cfg.p, cfg.T)) * np.sqrt(ivars)[:, None]
    return B, F, ivars, B @ F.T + U


def generate_model(cfg, rep=None):
    """Materialize one draw as a (TrueModel, ObservationMatrix) pair."""
    B, F, ivars, values = _draw(cfg, rep)
    truth = TrueModel.from_parts(B, F, np.diag(ivars))
    return truth, ObservationMatrix(values)


def _evaluate(est, B, F, ivars, subset):
    """Error report for one estimate against the drawing truth."""
    idx = list(subset.indices)
    B_S = B[idx]
    sigma_S = B_S @ B_S.T + np.diag(ivars[idx])
    K = est.factors.shape[1]
    if est.method == "oracle":
        H = np.eye(K)
    elif est.method == "divide_conquer":
        H = dc_rotation(est, F, B)
    else:
        B_ref = B_S if est.method == "method1" else B
        H = identifiable_rotation(
            est.eig_diag, est.factors, F, B_ref, est.info["wpc_weight"]
        )
    return ErrorReport(
        relative_norm=relative_norm(est.total_cov, sigma_S),
        max_norm=max_norm_diff(est.total_cov, sigma_S),
        inv_op_norm=inv_operator_norm_diff(est.total_cov, sigma_S),
        factor_err=factor_error(est.factors, F, H),
        loading_err=loading_error_operator(est.loadings, B_S, H),
        component_err=component_error(est.loadings, est.factors, B_S, F),
        method=est.method,
    )


def run_replication(cfg, rep, methods=("method1", "method2", "oracle")):
    """One full replication: draw, estimate with each method, evaluate."""
    B, F, ivars, values = _draw(cfg, rep)
    Y = ObservationMatrix(values)
    S = SubsetSelector(tuple(range(cfg.s)))
    pcfg = cfg.pipeline_config()
    reports = {}
    for method in methods:
        if method == "method1":
            est = estimate_method1(Y, S, pcfg, keep_weight=True)
        elif method == "method2":
            est = estimate_method2(Y, S, pcfg, keep_weight=True)
        elif method == "oracle":
            est = estimate_oracle(Y, S, F, pcfg)
        elif method == "divide_conquer":
            est = dc_estimate(Y, S, cfg.K, cfg.dc_M, pcfg, keep_group_info=True)
        else:
            raise ValueError(f"unknown method {method!r}")
        reports[method] = _evaluate(est, B, F, ivars, S)
    return reports


@dataclass(frozen=True)
class SimTable:
    """Mean and standard deviation per (metric, method) cell."""

    methods: tuple
    metrics: tuple
    means: dict
    sds: dict
    n_reps: int
    config: SimConfig = field(repr=False)

    def cell(self, metric, method):
        return self.means[(metric, method)], self.sds[(metric, method)]

    def rows(self):
        for metric in self.metrics:
            for method in self.methods:
                mean, sd = self.cell(metric, method)
                yield {"metric": metric, "method": method, "mean": mean, "sd": sd}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "method", "mean", "sd"])
            for row in self.rows():
                writer.writerow([row["metric"], row["method"],
                                 repr(row["mean"]), repr(row["sd"])])

    def to_json(self):
        payload = {
            "n_reps": self.n_reps,
            "design": {"s": self.config.s, "p": self.config.p,
                       "T": self.config.T, "K": self.config.K},
            "cells": [row for row in self.rows()],
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def format(self):
        """Fixed-width text rendering with mean(sd) cells."""
        lines = ["metric".ljust(16) + "".join(m.ljust(22) for m in self.methods)]
        for metric in self.metrics:
            cells = []
            for method in self.methods:
                mean, sd = self.cell(metric, method)
                cells.append(f"{mean:.3f}({sd:.3f})".ljust(22))
            lines.append(metric.ljust(16) + "".join(cells))
        return "\n".join(lines)


def monte_carlo_table(cfg):
    """Replicate the design ``cfg.n_reps`` times and aggregate error metrics.

    Runs the subset-only, full-panel and oracle pipelines (plus
    divide-and-conquer when ``dc_M`` is set) on every replication; cells are
    the mean and the (n-1 divisor) standard deviation over replications. A
    failing replication aborts the table with its replication index and seed
    in the error message.
    """
    if cfg.n_reps < 2:
        raise ValueError("n_reps >= 2 required")
    methods = ["method1", "method2", "oracle"]
    if cfg.dc_M is not None:
        methods.append("divide_conquer")
    samples = {(metric, method): [] for metric in METRICS for method in methods}
    for rep in range(cfg.n_reps):
        try:
            reports = run_replication(cfg, rep, methods)
        except Exception as exc:
            raise RuntimeError(
                f"replication {rep} failed (master seed {cfg.seed}): {exc}"
            ) from exc
        for method, report in reports.items():
            d = report.to_dict()
            for metric in METRICS:
                samples[(metric, method)].append(d[metric])
    means = {key: float(np.mean(v)) for key, v in samples.items()}
    sds = {key: float(np.std(v, ddof=1)) for key, v in samples.items()}
    return SimTable(tuple(methods), METRICS, means, sds, cfg.n_reps, cfg)


BENCH_NORMS = ("relative_norm", "inv_op_norm", "max_norm")


def benchmark_scales(T):
    """Problem sizes tied to T: s = T^0.6, p = T^1.4, M = T^0.2 (floored)."""
    return int(T ** 0.6), int(T ** 1.4), max(1, int(T ** 0.2))


def benchmark_dc(T_grid, n_reps=3, seed=0, K=3, threshold_c=1.0, n_workers=None):
    """Accuracy-versus-time comparison of all four methods over a T grid.

    For each T the design is s = T^0.6, p = T^1.4, M = T^0.2. Replications
    run serially so the wall times are not distorted by contention. Returns
    a list of row dicts (T, method, metric, mean, sd, wall_ms).
    """
    rows = []
    for T in T_grid:
        if T < 50:
            raise ValueError("T values must be at least 50")
        s, p, M = benchmark_scales(T)
        cfg = SimConfig(s=s, p=p, T=T, K=K, n_reps=max(n_reps, 2), seed=seed,
                        dc_M=M, threshold_c=threshold_c)
        pcfg = cfg.pipeline_config()
        S = SubsetSelector(tuple(range(s)))
        norms = {m: {n: [] for n in BENCH_NORMS} for m in
                 ("method1", "method2", "oracle", "divide_conquer")}
        walls = {m: [] for m in norms}
        for rep in range(n_reps):
            B, F, ivars, values = _draw(cfg, rep)
            Y = ObservationMatrix(values)
            idx = list(S.indices)
            B_S = B[idx]
            sigma_S = B_S @ B_S.T + np.diag(ivars[idx])
            runners = {
                "method1": lambda: estimate_method1(Y, S, pcfg),
                "method2": lambda: estimate_method2(Y, S, pcfg),
                "oracle": lambda: estimate_oracle(Y, S, F, pcfg),
                "divide_conquer": lambda: dc_estimate(
                    Y, S, K, M, pcfg, n_workers=n_workers
                ),
            }
            for method, run in runners.items():
                t0 = time.perf_counter()
                est = run()
                walls[method].append((time.perf_counter() - t0) * 1e3)
                norms[method]["relative_norm"].append(relative_norm(est.total_cov, sigma_S))
                norms[method]["inv_op_norm"].append(inv_operator_norm_diff(est.total_cov, sigma_S))
                norms[method]["max_norm"].append(max_norm_diff(est.total_cov, sigma_S))
        for method in norms:
            wall_ms = float(np.mean(walls[method]))
            for metric in BENCH_NORMS:
                vals = norms[method][metric]
                rows.append({
                    "T": T,
                    "method": method,
                    "metric": metric,
                    "mean": float(np.mean(vals)),
                    "sd": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                    "wall_ms": wall_ms,
                })
    return rows


def benchmark_rows_to_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["T", "method", "metric", "mean", "sd", "wall_ms"])
        for r in rows:
            writer.writerow([r["T"], r["method"], r["metric"],
                             repr(r["mean"]), repr(r["sd"]), repr(r["wall_ms"])])


def asymptotic_normality_check(cfg):
    """Finite-sample check of the factor estimator's limiting covariance.

    Pools sqrt(p) * (f_hat_t - H f_t) over time points and replications from
    full-panel estimation, and compares the pooled second-moment matrix with
    the inverse of the averaged per-variable information
    Q = B' Sigma_u^{-1} B / p computed from each draw's truth. Returns
    (empirical covariance, target, relative Frobenius gap).
    """
    from .pipeline import _factor_step

    pooled = []
    q_sum = np.zeros((cfg.K, cfg.K))
    pcfg = cfg.pipeline_config()
    for rep in range(cfg.n_reps):
        B, F, ivars, values = _draw(cfg, rep)
        res, info = _factor_step(values, cfg.K, pcfg, keep_weight=True)
        H = identifiable_rotation(res.eig_diag, res.factors, F, B, info["wpc_weight"])
        gaps = res.factors - F @ H.T
        pooled.append(np.sqrt(cfg.p) * gaps)
        q_sum += B.T @ (B / ivars[:, None]) / cfg.p
    errors = np.vstack(pooled)
    empirical = errors.T @ errors / errors.shape[0]
    target = np.linalg.inv(q_sum / cfg.n_reps)
    gap = float(np.linalg.norm(empirical - target, "fro") / np.linalg.norm(target, "fro"))
    return empirical, target, gap


def analytic_q_target(cfg):
    """Limit information for the homoscedastic design: E(bb')/idio_var."""
    if cfg.heteroscedastic:
        raise ValueError("analytic target assumes constant idiosyncratic variance")
    q = (cfg.loading_var / cfg.idio_var) * np.eye(cfg.K)
    return np.linalg.inv(q)

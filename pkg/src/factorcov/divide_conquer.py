"""Split the variables into groups, extract factors per group in parallel,
align and average, then finish the subset pipeline on the averaged factors.

Group factors are each identified only up to a rotation, so averaging raw
group estimates can cancel. By default every group is rotated onto the first
group with an orthogonal Procrustes fit before averaging; ``align=False``
reproduces plain unaligned averaging.
"""

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from ._util import as_matrix
from .data import FactorModelEstimate, SubsetSelector, restrict
from .pipeline import _factor_step, _finish_estimate
from .wpca import identifiable_rotation


@dataclass(frozen=True)
class Partition:
    """Disjoint contiguous index groups covering all p variables."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        flat = [i for g in groups for i in g]
        if sorted(flat) != list(range(len(flat))):
            raise ValueError("groups must be disjoint and cover 0..p-1")
        sizes = [len(g) for g in groups]
        if max(sizes) - min(sizes) > 1:
            raise ValueError("group sizes may differ by at most one")

    @property
    def M(self):
        return len(self.groups)


def partition_variables(p, M):
    """Deterministic contiguous partition of 0..p-1 into M near-equal groups.

    The first p mod M groups get the extra element.
    """
    if not 1 <= M <= p:
        raise ValueError(f"M={M} must satisfy 1 <= M <= p={p}")
    base, extra = divmod(p, M)
    groups = []
    start = 0
    for m in range(M):
        size = base + (1 if m < extra else 0)
        groups.append(tuple(range(start, start + size)))
        start += size
    return Partition(tuple(groups))


def random_partition(p, M, seed):
    """Seeded shuffled variant of :func:`partition_variables` for experiments."""
    order = np.random.default_rng(seed).permutation(p)
    base = partition_variables(p, M)
    return Partition(tuple(tuple(int(order[i]) for i in g) for g in base.groups))


def group_factor_estimate(values_m, K, cfg, keep_weight=False):
    """Factors from one variable group: per-group initial weight, then the
    weighted principal-component step on that group's panel alone."""
    res, info = _factor_step(as_matrix(values_m), K, cfg, keep_weight)
    return res, info


def align_factors(reference, candidate):
    """Rotate ``candidate`` onto ``reference`` by orthogonal Procrustes.

    Returns candidate @ Omega with Omega = argmin over orthogonal matrices of
    ||candidate @ Omega - reference||_F, computed from the singular value
    decomposition of candidate' reference. A numerically zero cross-product
    leaves the candidate unrotated with a warning.
    """
    ref = as_matrix(reference)
    cand = as_matrix(candidate)
    if ref.shape != cand.shape:
        raise ValueError(f"shape mismatch: {cand.shape} vs {ref.shape}")
    omega = procrustes_rotation(cand, ref)
    return cand @ omega


def procrustes_rotation(candidate, reference):
    """The orthogonal matrix mapping candidate closest to reference."""
    cross = candidate.T @ reference
    if not np.any(cross):
        warnings.warn(
            "zero cross-product between factor sets; skipping rotation",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.eye(candidate.shape[1])
    u, _, vt = np.linalg.svd(cross)
    return u @ vt


def dc_estimate(Y, S, K, M, cfg, align=True, n_workers=None, keep_group_info=False,
                partition=None):
    """Divide-and-conquer estimate of the subset covariance.

    Variables are split into M contiguous groups (or the supplied
    ``partition``); each group produces its own initial weight and factor
    estimate (in parallel when workers allow), the group factors are aligned
    to group 0 and averaged, and the averaged factors drive the usual
    loading/residual-threshold tail on the subset.

    Results do not depend on the worker count: group tasks are pure and the
    merge consumes them in group order.
    """
    Y.require_valid()
    part = partition_variables(Y.p, M) if partition is None else partition
    if min(len(g) for g in part.groups) <= K:
        raise ValueError(f"every group must have more than K={K} variables")

    if n_workers is None:
        # all groups run concurrently: tasks are single-BLAS-threaded, so
        # oversubscribing workers keeps every core busy despite M not
        # dividing the core count
        n_workers = part.M

    def run_group(g):
        sub = restrict(Y, SubsetSelector(g))
        return group_factor_estimate(sub.values, K, cfg, keep_weight=keep_group_info)

    t0 = time.perf_counter()
    if part.M == 1:
        results = [run_group(part.groups[0])]
    else:
        # one BLAS thread per group task whenever the panel is split, so the
        # numbers are bit-identical for every worker count
        with threadpool_limits(limits=1):
            if n_workers > 1:
                with ThreadPoolExecutor(max_workers=n_workers) as pool:
                    results = list(pool.map(run_group, part.groups))
            else:
                results = [run_group(g) for g in part.groups]
    t1 = time.perf_counter()

    info = {
        "M": part.M,
        "aligned": bool(align),
        "group_s": t1 - t0,
        "initial_threshold_s": sum(gi["initial_threshold_s"] for _, gi in results),
        "invert_s": sum(gi["invert_s"] for _, gi in results),
        "eigensolve_s": sum(gi["eigensolve_s"] for _, gi in results),
    }

    t2 = time.perf_counter()
    T = Y.T
    if part.M == 1:
        fbar = results[0][0].factors
        rotations = [np.eye(K)]
    else:
        reference = results[0][0].factors
        stacked = [reference]
        rotations = [np.eye(K)]
        for res, _ in results[1:]:
            omega = procrustes_rotation(res.factors, reference) if align else np.eye(K)
            rotations.append(omega)
            stacked.append(res.factors @ omega)
        fbar = np.mean(stacked, axis=0)
    info["merge_s"] = time.perf_counter() - t2
    gram_dev = np.max(np.abs(fbar.T @ fbar / T - np.eye(K)))
    info["factor_gram_max_dev"] = float(gram_dev)

    if keep_group_info:
        info["groups"] = [
            {
                "indices": part.groups[m],
                "factors": results[m][0].factors,
                "eig_diag": results[m][0].eig_diag,
                "weight": results[m][1].get("wpc_weight"),
                "rotation": rotations[m],
            }
            for m in range(part.M)
        ]

    Y_S = restrict(Y, S)
    est = _finish_estimate(
        Y_S.values, fbar, results[0][0].eig_diag, "divide_conquer", Y_S.p, Y.p, cfg, info
    )
    return est


def dc_rotation(estimate, factors_true, loadings_true):
    """Averaged identifiable rotation for a divide-and-conquer estimate.

    Requires the estimate to have been produced with ``keep_group_info=True``.
    Group m contributes Omega_m' H_m, where H_m is the group's own rotation
    computed from the true loadings restricted to that group.
    """
    groups = estimate.info.get("groups")
    if not groups:
        raise ValueError("estimate lacks group info; rerun with keep_group_info=True")
    B = as_matrix(loadings_true)
    terms = []
    for g in groups:
        H_m = identifiable_rotation(
            g["eig_diag"], g["factors"], factors_true, B[list(g["indices"])], g["weight"]
        )
        terms.append(g["rotation"].T @ H_m)
    return np.mean(terms, axis=0)

"""Shared domain types: data panels, subset selection, estimate containers, CSV I/O.

Panels store variables in rows and time points in columns, so the panel for
``p`` variables over ``T`` periods is ``p x T``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._util import as_matrix, symmetrize

METHOD_TAGS = ("method1", "method2", "oracle", "divide_conquer")


@dataclass(frozen=True)
class ObservationMatrix:
    """A p x T data panel. Rows are variables, columns are time points.

    The array is coerced to float64 and frozen, so instances can be shared
    across threads without copies.
    """

    values: np.ndarray
    variable_ids: tuple = None

    def __post_init__(self):
        a = np.array(as_matrix(self.values), order="C")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)
        if self.variable_ids is not None:
            object.__setattr__(self, "variable_ids", tuple(str(v) for v in self.variable_ids))

    @property
    def p(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    def ids(self):
        """Variable labels, defaulting to stringified row indices."""
        if self.variable_ids is not None:
            return self.variable_ids
        return tuple(str(i) for i in range(self.p))

    def require_valid(self):
        problems = validate(self)
        if problems:
            raise ValueError("invalid panel: " + "; ".join(problems))


def validate(Y):
    """Check panel invariants and return a list of violation messages.

    An empty list means the panel is usable: all entries finite, at least
    one variable, at least two time points, and unique labels when present.
    """
    problems = []
    v = Y.values
    if v.shape[0] < 1:
        problems.append("p >= 1 required")
    if v.shape[1] < 2:
        problems.append("T >= 2 required")
    bad = np.argwhere(~np.isfinite(v))
    if bad.size:
        i, t = bad[0]
        problems.append(f"non-finite entry at ({i},{t})")
    if Y.variable_ids is not None:
        if len(Y.variable_ids) != v.shape[0]:
            problems.append(f"variable_ids has length {len(Y.variable_ids)}, expected {v.shape[0]}")
        if len(set(Y.variable_ids)) != len(Y.variable_ids):
            problems.append("variable_ids are not unique")
    return problems


@dataclass(frozen=True)
class SubsetSelector:
    """An ordered selection of distinct variable indices."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) < 1:
            raise ValueError("subset must contain at least one index")
        if len(set(idx)) != len(idx):
            raise ValueError("subset contains duplicate indices")
        if any(i < 0 for i in idx):
            raise ValueError("subset indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self):
        return len(self.indices)

    def validate_against(self, p):
        out = [i for i in self.indices if i >= p]
        if out:
            raise ValueError(f"subset index {out[0]} out of range for p={p}")

    def is_full(self, p):
        return self.indices == tuple(range(p))

    @classmethod
    def full(cls, p):
        return cls(tuple(range(p)))

    @classmethod
    def parse(cls, text):
        """Parse "0..49,100,200..205" (ranges inclusive) into a selector."""
        idx = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ValueError(f"empty range '{part}'")
                idx.extend(range(lo, hi + 1))
            else:
                idx.append(int(part))
        return cls(tuple(idx))


def restrict(Y, S):
    """Project a panel onto the rows selected by ``S``, in the selector's order.

    A full identity subset returns the input object unchanged (panels are
    immutable), so downstream results are bit-identical to the unrestricted
    call.
    """
    S.validate_against(Y.p)
    if S.is_full(Y.p):
        return Y
    ids = Y.variable_ids
    sub_ids = None if ids is None else tuple(ids[i] for i in S.indices)
    return ObservationMatrix(Y.values[list(S.indices)], sub_ids)


@dataclass(frozen=True)
class FactorModelEstimate:
    """Output bundle of an estimation pipeline.

    ``factors`` is T x K, ``loadings`` is s x K for the s target variables,
    ``idio_cov`` and ``total_cov`` are the s x s idiosyncratic and total
    covariance estimates. ``eig_diag`` holds the descending eigenvalues of
    the weighted T x T system that produced the factors; it is None for the
    oracle method, which has no eigenproblem. ``info`` carries method
    diagnostics (chosen thresholds, timings, weight matrices on request).
    """

    factors: np.ndarray
    loadings: np.ndarray
    idio_cov: np.ndarray
    total_cov: np.ndarray
    eig_diag: np.ndarray
    method: str
    info: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.method not in METHOD_TAGS:
            raise ValueError(f"unknown method tag {self.method!r}")

    def check_invariants(self, tol=1e-8):
        """Return violation messages for the container-level invariants.

        Factor orthonormality applies to eigenvector-based factors only:
        divide-and-conquer averages and oracle (true) factors are exempt.
        """
        problems = []
        T, K = self.factors.shape
        if self.method in ("method1", "method2"):
            gram = self.factors.T @ self.factors / T
            if np.max(np.abs(gram - np.eye(K))) > tol:
                problems.append("factors are not orthonormal at scale sqrt(T)")
        for name, m in (("idio_cov", self.idio_cov), ("total_cov", self.total_cov)):
            if not np.array_equal(m, m.T):
                problems.append(f"{name} is not exactly symmetric")
        if self.eig_diag is not None:
            d = np.asarray(self.eig_diag)
            if np.any(d <= 0) or np.any(np.diff(d) >= 0):
                problems.append("eig_diag must be positive and strictly decreasing")
        return problems


@dataclass(frozen=True)
class TrueModel:
    """Simulation ground truth: loadings, factors, idiosyncratic covariance."""

    loadings: np.ndarray
    factors: np.ndarray
    idio_cov: np.ndarray
    implied_cov: np.ndarray

    @classmethod
    def from_parts(cls, loadings, factors, idio_cov):
        loadings = np.asarray(loadings, dtype=np.float64)
        idio_cov = np.asarray(idio_cov, dtype=np.float64)
        implied = symmetrize(loadings @ loadings.T + idio_cov)
        return cls(loadings, np.asarray(factors, dtype=np.float64), idio_cov, implied)

    def check_invariants(self, tol=1e-10):
        problems = []
        recon = self.loadings @ self.loadings.T + self.idio_cov
        if np.max(np.abs(recon - self.implied_cov)) > tol:
            problems.append("implied_cov does not reconstruct from parts")
        if np.any(np.linalg.eigvalsh(symmetrize(self.implied_cov)) <= 0):
            problems.append("implied_cov is not positive definite")
        return problems


def _is_number(token):
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_panel_csv(path, strict=True):
    """Read a panel CSV into an ObservationMatrix.

    Layout: optional first row of time labels, optional first column of
    variable ids; the numeric body is parsed as float64. Detection is by
    parseability of the first row/column. In strict mode a missing or
    non-numeric body cell raises with its line and column.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty file")

    has_header = not all(_is_number(tok) for tok in rows[0][0:]) and len(rows) > 1
    body = rows[1:] if has_header else rows
    if not body:
        raise ValueError(f"{path}: no data rows")
    has_ids = not all(_is_number(r[0]) for r in body if r)

    ids = []
    data = []
    width = None
    for lineno, row in enumerate(body, start=2 if has_header else 1):
        cells = row[1:] if has_ids else row
        if has_ids:
            ids.append(row[0])
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ValueError(f"{path}: line {lineno} has {len(cells)} cells, expected {width}")
        parsed = []
        for col, tok in enumerate(cells, start=2 if has_ids else 1):
            tok = tok.strip()
            if tok == "":
                if strict:
                    raise ValueError(f"{path}: missing cell at line {lineno}, column {col}")
                parsed.append(np.nan)
                continue
            try:
                parsed.append(float(tok))
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell {tok!r} at line {lineno}, column {col}"
                ) from None
        data.append(parsed)

    Y = ObservationMatrix(np.asarray(data, dtype=np.float64), tuple(ids) if has_ids else None)
    if strict:
        Y.require_valid()
    return Y


def save_matrix_csv(path, matrix, row_ids=None):
    """Write a matrix as CSV with deterministic shortest-round-trip floats."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(m):
            cells = [repr(float(x)) for x in row]
            if row_ids is not None:
                cells = [str(row_ids[i])] + cells
            writer.writerow(cells)

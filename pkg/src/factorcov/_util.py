"""Small shared numerical helpers."""

import numpy as np

MIRROR_BLOCK = 512


def as_matrix(x):
    """Coerce to a 2-d float64 array, accepting ObservationMatrix-like objects."""
    values = getattr(x, "values", x)
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def symmetrize(a):
    """Average a square matrix with its transpose, removing rounding skew."""
    return (a + a.T) / 2.0


def mirror_upper(a, block=MIRROR_BLOCK):
    """Copy the upper triangle onto the lower, in place, block by block.

    Produces an exactly symmetric matrix with one cache-friendly pass, which
    is substantially cheaper than forming a.T for large matrices.
    """
    n = a.shape[0]
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        a[i1:, i0:i1] = a[i0:i1, i1:].T
        blk = a[i0:i1, i0:i1]
        low = np.tril_indices(i1 - i0, -1)
        blk[low] = blk.T[low]
    return a


def gram_matrix(x):
    """x @ x.T as an exactly symmetric matrix (mirrored from the upper half)."""
    g = x @ x.T
    return mirror_upper(g)


def fix_column_signs(vectors):
    """Flip column signs so the largest-magnitude entry of each is positive.

    Ties go to the lowest row index (argmax picks the first maximum), which
    makes eigenvector output deterministic across runs.
    """
    out = np.array(vectors)
    for j in range(out.shape[1]):
        col = out[:, j]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            out[:, j] = -col
    return out

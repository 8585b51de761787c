"""Dense real-matrix kernels backing the rate analysis.

All routines operate on plain float64 ndarrays. Eigenvalue problems are
delegated to LAPACK (balancing + Hessenberg reduction + shifted QR for the
general case, tridiagonal QR for the symmetric case); the wrappers here pin
down the contracts the rest of the package relies on: symmetry checks,
ascending eigenvalue order, and a common rank tolerance for kernel and
column-space decisions.
"""

import numpy as np

from .errors import NoConvergenceError, NotSymmetricError

# relative asymmetry accepted before an input is rejected as non-symmetric
SYMMETRY_RTOL = 1e-12
# eigenvalues below RANK_RTOL * max|eigenvalue| are treated as zero
RANK_RTOL = 1e-10


def _as_square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def kron(a, b):
    """Kronecker product of two dense matrices."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def sym_eig(a):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvector columns ``v`` such that ``a = v @ diag(w) @ v.T``.

    Raises
    ------
    NotSymmetricError
        If the asymmetry of ``a`` exceeds ``SYMMETRY_RTOL * ||a||``.
    """
    a = _as_square(a)
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise NotSymmetricError(
            f"matrix is not symmetric within {SYMMETRY_RTOL:g} relative tolerance"
        )
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return w, v


def real_eig(a):
    """Full complex spectrum of a general real square matrix.

    Returns a 1-D complex array with algebraic multiplicity, unordered.
    """
    a = _as_square(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def sprad(a):
    """Spectral radius: max |eigenvalue|."""
    return float(np.max(np.abs(real_eig(a))))


def pinv(a):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues with magnitude above ``RANK_RTOL * max|w|`` are inverted,
    the rest are zeroed. Satisfies the four Penrose identities.
    """
    w, v = sym_eig(a)
    cut = RANK_RTOL * np.max(np.abs(w), initial=0.0)
    winv = np.where(np.abs(w) > cut, 1.0, 0.0) / np.where(np.abs(w) > cut, w, 1.0)
    return (v * winv) @ v.T


def colspace_projector(a):
    """Orthogonal projector onto the column space of a symmetric PSD matrix."""
    w, v = sym_eig(a)
    cut = RANK_RTOL * np.max(np.abs(w), initial=0.0)
    cols = v[:, w > cut]
    return cols @ cols.T


def block_diag(blocks):
    """Dense block-diagonal matrix from a sequence of square blocks."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    start = 0
    for b in blocks:
        stop = start + b.shape[0]
        out[start:stop, start:stop] = b
        start = stop
    return out

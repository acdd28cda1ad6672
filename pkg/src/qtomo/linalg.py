"""Dense linear algebra for the small fixed dimensions used in this package.

All matrices here live in dimension 2, 3, 4, 6, or 36, so everything is
plain dense numpy. The wrappers pin down failure behaviour the rest of the
package relies on: pseudoinversion refuses input that is singular to
working precision, and the Hermitian eigensolver refuses non-Hermitian
input instead of silently symmetrizing it.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SINGULAR_RTOL",
    "HERMITIAN_ATOL",
    "SingularMatrixError",
    "NotHermitianError",
    "kron",
    "pinv",
    "eig_hermitian",
]

# Relative singular-value cutoff below which a matrix counts as singular.
SINGULAR_RTOL = 1e-12

# Largest |h - h^dagger| entry tolerated by eig_hermitian.
HERMITIAN_ATOL = 1e-12


class SingularMatrixError(ValueError):
    """Raised when a matrix is singular to working precision."""


class NotHermitianError(ValueError):
    """Raised when a matrix fails the Hermiticity tolerance."""


def kron(a, b) -> np.ndarray:
    """Kronecker product of two dense matrices.

    Block (i, j) of the result is ``a[i, j] * b``, giving an
    ``(m*p) x (n*q)`` matrix for an ``m x n`` input and ``p x q`` input.
    """
    return np.kron(np.asarray(a), np.asarray(b))


def pinv(a) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a real matrix via SVD.

    Parameters
    ----------
    a : array_like
        Real matrix of full row or column rank.

    Returns
    -------
    numpy.ndarray
        The pseudoinverse; for square invertible input this is the inverse.

    Raises
    ------
    SingularMatrixError
        If the smallest singular value is at or below
        ``SINGULAR_RTOL`` times the largest.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= SINGULAR_RTOL * s[0]:
        raise SingularMatrixError(
            f"matrix is singular to working precision "
            f"(singular values span {s[0]:.3e} .. {s[-1]:.3e})"
        )
    return (vt.T * (1.0 / s)) @ u.T


def eig_hermitian(h) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, ascending.

    Raises
    ------
    NotHermitianError
        If any entry of ``h - h^dagger`` exceeds ``HERMITIAN_ATOL``.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    deviation = np.max(np.abs(h - h.conj().T))
    if deviation > HERMITIAN_ATOL:
        raise NotHermitianError(
            f"matrix deviates from Hermiticity by {deviation:.3e}"
        )
    return np.linalg.eigvalsh(h)

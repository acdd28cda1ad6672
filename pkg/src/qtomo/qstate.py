"""Density-matrix parameterizations, Stokes parameters, and basis constants.

States are parameterized through a lower-triangular matrix T with real
parameters t_i, so that rho = T^dag T / Tr(T^dag T) is Hermitian, unit
trace, and positive semidefinite by construction. A single qubit uses four
parameters, a qubit pair sixteen. The element views (A, B, ReC, ImC for one
qubit; A..D and ReE..ImJ for two) are the real scalars the fitting model
tracks, and the joint Stokes parameters come in two numerically equivalent
routes: the Pauli trace formula and linear combinations of the element
views.

The two-qubit element formulas are generated from the direct T^dag T
product rather than transcribed term by term, which removes any chance of a
transcription slip; tests pin both routes against each other.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .linalg import eig_hermitian, kron

__all__ = [
    "DegenerateParametersError",
    "PAULI",
    "KET_H",
    "KET_V",
    "KET_D",
    "KET_A",
    "KET_L",
    "KET_R",
    "BASIS_KETS",
    "ELEMENT_NAMES_1Q",
    "ELEMENT_NAMES_2Q",
    "STOKES_NAMES_1Q",
    "STOKES_NAMES_2Q",
    "t_matrix_1q",
    "t_matrix_2q",
    "rho_from_t_1q",
    "rho_from_t_2q",
    "elements_1q",
    "elements_2q",
    "element_quadratic_tensor",
    "stokes_1q",
    "rho_from_stokes_1q",
    "stokes_joint",
    "stokes_joint_from_elements",
    "stokes_element_matrix",
    "fidelity",
    "validate_density_matrix",
]


class DegenerateParametersError(ValueError):
    """Raised when all t parameters vanish and no state can be formed."""


def _const(a) -> np.ndarray:
    out = np.asarray(a)
    out.flags.writeable = False
    return out


# Pauli matrices sigma_0..sigma_3 in the H/V basis.
PAULI = (
    _const(np.eye(2, dtype=complex)),
    _const(np.array([[0, 1], [1, 0]], dtype=complex)),
    _const(np.array([[0, -1j], [1j, 0]], dtype=complex)),
    _const(np.array([[1, 0], [0, -1]], dtype=complex)),
)

# Polarization basis kets: horizontal/vertical plus the diagonal and
# circular superpositions built from them.
KET_H = _const(np.array([1, 0], dtype=complex))
KET_V = _const(np.array([0, 1], dtype=complex))
KET_D = _const((KET_H + KET_V) / np.sqrt(2))
KET_A = _const((KET_H - KET_V) / np.sqrt(2))
KET_L = _const((KET_H + 1j * KET_V) / np.sqrt(2))
KET_R = _const((KET_H - 1j * KET_V) / np.sqrt(2))

BASIS_KETS = {"H": KET_H, "V": KET_V, "D": KET_D, "A": KET_A, "L": KET_L, "R": KET_R}

ELEMENT_NAMES_1Q = ("A", "B", "ReC", "ImC")
ELEMENT_NAMES_2Q = (
    "A", "B", "C", "D",
    "ReE", "ImE", "ReF", "ImF", "ReG", "ImG",
    "ReH", "ImH", "ReI", "ImI", "ReJ", "ImJ",
)
STOKES_NAMES_1Q = ("S1", "S2", "S3")
STOKES_NAMES_2Q = tuple(f"S{i}{j}" for i in range(4) for j in range(4))

_NORM_EPS = 1e-12


def t_matrix_1q(t) -> np.ndarray:
    """Lower-triangular 2x2 T matrix from parameters (t0, t1, t2, t3)."""
    t = np.asarray(t, dtype=float)
    if t.shape != (4,):
        raise ValueError(f"expected 4 parameters, got shape {t.shape}")
    return np.array([[t[0], 0.0], [t[1] + 1j * t[2], t[3]]])


def t_matrix_2q(t) -> np.ndarray:
    """Lower-triangular 4x4 T matrix from parameters (t0, ..., t15)."""
    t = np.asarray(t, dtype=float)
    if t.shape != (16,):
        raise ValueError(f"expected 16 parameters, got shape {t.shape}")
    return np.array([
        [t[0], 0.0, 0.0, 0.0],
        [t[1] + 1j * t[2], t[3], 0.0, 0.0],
        [t[4] + 1j * t[5], t[6] + 1j * t[7], t[8], 0.0],
        [t[9] + 1j * t[10], t[11] + 1j * t[12], t[13] + 1j * t[14], t[15]],
    ])


def _rho_from_t(tmat: np.ndarray, t: np.ndarray) -> np.ndarray:
    if np.linalg.norm(t) <= _NORM_EPS:
        raise DegenerateParametersError("all t parameters are (numerically) zero")
    m = tmat.conj().T @ tmat
    return m / np.trace(m).real


def rho_from_t_1q(t) -> np.ndarray:
    """Single-qubit density matrix T^dag T / Tr(T^dag T).

    Invariant under rescaling of t by any nonzero constant; the result is
    Hermitian, unit trace, and PSD up to floating-point rounding.
    """
    t = np.asarray(t, dtype=float)
    return _rho_from_t(t_matrix_1q(t), t)


def rho_from_t_2q(t) -> np.ndarray:
    """Two-qubit density matrix T^dag T / Tr(T^dag T)."""
    t = np.asarray(t, dtype=float)
    return _rho_from_t(t_matrix_2q(t), t)


def elements_1q(rho) -> np.ndarray:
    """Element view (A, B, ReC, ImC) of a 2x2 density matrix."""
    rho = np.asarray(rho)
    return np.array([rho[0, 0].real, rho[1, 1].real, rho[1, 0].real, rho[1, 0].imag])


def elements_2q(rho) -> np.ndarray:
    """Element view (A..D, ReE..ImJ) of a 4x4 density matrix.

    Ordering follows ``ELEMENT_NAMES_2Q``: the four diagonal entries, then
    the real/imaginary parts of the lower-triangle entries E=rho[1,0],
    F=rho[2,0], G=rho[3,0], H=rho[2,1], I=rho[3,1], J=rho[3,2].
    """
    rho = np.asarray(rho)
    out = np.empty(16)
    out[0:4] = np.diag(rho).real
    for k, (i, j) in enumerate(((1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2))):
        out[4 + 2 * k] = rho[i, j].real
        out[5 + 2 * k] = rho[i, j].imag
    return out


def _unnormalized_elements(t: np.ndarray, n_qubits: int) -> np.ndarray:
    tmat = t_matrix_1q(t) if n_qubits == 1 else t_matrix_2q(t)
    m = tmat.conj().T @ tmat
    return elements_1q(m) if n_qubits == 1 else elements_2q(m)


@lru_cache(maxsize=None)
def element_quadratic_tensor(n_qubits: int) -> np.ndarray:
    """Quadratic forms Q with u_k = t . Q[k] . t for the unnormalized elements.

    Each unnormalized element of T^dag T is a quadratic form in the real t
    parameters. The tensor is extracted numerically from the direct matrix
    product by polarization, so it is exact for these bilinear maps and
    never hand-transcribed. Shape (K, d, d) with K = d = 4 or 16.
    """
    if n_qubits not in (1, 2):
        raise ValueError("n_qubits must be 1 or 2")
    d = 4 if n_qubits == 1 else 16
    q = np.zeros((d, d, d))
    eye = np.eye(d)
    diag = np.array([_unnormalized_elements(eye[i], n_qubits) for i in range(d)])
    for i in range(d):
        q[:, i, i] = diag[i]
        for j in range(i + 1, d):
            cross = _unnormalized_elements(eye[i] + eye[j], n_qubits) - diag[i] - diag[j]
            q[:, i, j] = cross / 2.0
            q[:, j, i] = cross / 2.0
    q.flags.writeable = False
    return q


def stokes_1q(rho) -> np.ndarray:
    """Stokes vector (S1, S2, S3) of a 2x2 density matrix.

    S1 = 2 Re(rho10), S2 = 2 Im(rho10), S3 = rho00 - rho11; identical to
    Tr(rho sigma_i) for a Hermitian unit-trace input.
    """
    rho = np.asarray(rho)
    return np.array([
        2.0 * rho[1, 0].real,
        2.0 * rho[1, 0].imag,
        (rho[0, 0] - rho[1, 1]).real,
    ])


def rho_from_stokes_1q(s) -> np.ndarray:
    """Reassemble a 2x2 density matrix as (1/2) sum_i S_i sigma_i, S0 = 1."""
    s = np.asarray(s, dtype=float)
    if s.shape != (3,):
        raise ValueError(f"expected 3 Stokes parameters, got shape {s.shape}")
    rho = PAULI[0].copy()
    for si, sigma in zip(s, PAULI[1:]):
        rho = rho + si * sigma
    return rho / 2.0


def stokes_joint(rho) -> np.ndarray:
    """Joint Stokes matrix S[i, j] = Tr(rho . sigma_i x sigma_j) of a 4x4 state."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
    s = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            s[i, j] = np.trace(rho @ kron(PAULI[i], PAULI[j])).real
    return s


@lru_cache(maxsize=None)
def stokes_element_matrix() -> np.ndarray:
    """Matrix mapping the 16 element views onto the flattened joint Stokes matrix.

    Row 4*i+j holds the weights of S_{i,j} as a linear combination of the
    elements in ``ELEMENT_NAMES_2Q`` order.
    """
    idx = {name: k for k, name in enumerate(ELEMENT_NAMES_2Q)}
    combos = {
        "S00": {"A": 1, "B": 1, "C": 1, "D": 1},
        "S01": {"ReE": 2, "ReJ": 2},
        "S02": {"ImE": 2, "ImJ": 2},
        "S03": {"A": 1, "B": -1, "C": 1, "D": -1},
        "S10": {"ReF": 2, "ReI": 2},
        "S11": {"ReG": 2, "ReH": 2},
        "S12": {"ImG": 2, "ImH": -2},
        "S13": {"ReF": 2, "ReI": -2},
        "S20": {"ImF": 2, "ImI": 2},
        "S21": {"ImG": 2, "ImH": 2},
        "S22": {"ReH": 2, "ReG": -2},
        "S23": {"ImF": 2, "ImI": -2},
        "S30": {"A": 1, "B": 1, "C": -1, "D": -1},
        "S31": {"ReE": 2, "ReJ": -2},
        "S32": {"ImE": 2, "ImJ": -2},
        "S33": {"A": 1, "B": -1, "C": -1, "D": 1},
    }
    m = np.zeros((16, 16))
    for row, name in enumerate(STOKES_NAMES_2Q):
        for elem, w in combos[name].items():
            m[row, idx[elem]] = w
    m.flags.writeable = False
    return m


def stokes_joint_from_elements(elements) -> np.ndarray:
    """Joint Stokes matrix from the 16 element views (linear-combination route)."""
    elements = np.asarray(elements, dtype=float)
    if elements.shape != (16,):
        raise ValueError(f"expected 16 elements, got shape {elements.shape}")
    return (stokes_element_matrix() @ elements).reshape(4, 4)


def fidelity(rho, pure) -> float:
    """Overlap Tr(rho . pure) of a state with a rank-1 reference state.

    Raises
    ------
    ValueError
        If ``pure`` is not rank-1 within 1e-10 (all but the largest
        eigenvalue must vanish).
    """
    rho = np.asarray(rho)
    pure = np.asarray(pure)
    eigs = eig_hermitian(pure)
    if np.any(np.abs(eigs[:-1]) > 1e-10):
        raise ValueError("reference state is not rank-1 within 1e-10")
    return np.trace(rho @ pure).real


def validate_density_matrix(rho, dim: int | None = None) -> np.ndarray:
    """Check the density-matrix invariants and return the validated array.

    Hermitian to 1e-12, unit trace to 1e-12, minimum eigenvalue >= -1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if dim is not None and rho.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
    eigs = eig_hermitian(rho)  # raises NotHermitianError beyond 1e-12
    trace = np.trace(rho).real
    if abs(trace - 1.0) > 1e-12:
        raise ValueError(f"trace deviates from 1 by {abs(trace - 1.0):.3e}")
    if eigs[0] < -1e-10:
        raise ValueError(f"minimum eigenvalue {eigs[0]:.3e} below -1e-10")
    return rho

"""Waveplate operators, measurement-settings tables, and projection probabilities.

Every probability here comes in two routes. The direct route builds the
waveplate unitaries explicitly and evaluates

    P = <psi| W rho W^dag |psi>,

i.e. the instrument rotates the state and the polarizing beamsplitter then
projects onto |psi> = [h, v]^T. The closed route evaluates the expanded
trigonometric polynomial in the density-matrix element views, which is what
the fitting model differentiates term by term. The two routes agree to
floating-point precision and the tests pin the closed forms to the direct
ones.

An arbitrary waveplate with retardance eta and fast-axis angle theta is

    AWP(eta, theta) = e^{-i eta/2} [[c^2 + e^{i eta} s^2, (1 - e^{i eta}) c s],
                                    [(1 - e^{i eta}) c s, s^2 + e^{i eta} c^2]]

with c = cos(theta), s = sin(theta); eta = pi gives a half-wave plate and
eta = pi/2 a quarter-wave plate. Two-qubit measurements drop the retardance
degree of freedom and use the quarter/half-wave rotation U = H(theta_H) Q(theta_Q)
on each arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .linalg import kron
from .qstate import ELEMENT_NAMES_2Q

__all__ = [
    "awp",
    "rotation_ops",
    "Settings1Q",
    "Settings2Q",
    "settings_table",
    "prob_1q_direct",
    "probs_1q_direct",
    "prob_1q_closed",
    "probs_1q_closed",
    "prob_2q_direct",
    "probs_2q_direct",
    "prob_2q_closed",
    "probs_2q_closed",
    "TwoQubitTerm",
    "TWO_QUBIT_TERMS",
    "two_qubit_term_arrays",
]


def awp(eta: float, theta: float) -> np.ndarray:
    """Arbitrary-waveplate Jones operator for retardance eta at fast-axis angle theta."""
    c = np.cos(theta)
    s = np.sin(theta)
    e = np.exp(1j * eta)
    return np.exp(-0.5j * eta) * np.array([
        [c * c + e * s * s, (1.0 - e) * c * s],
        [(1.0 - e) * c * s, s * s + e * c * c],
    ])


def rotation_ops(theta_q: float, theta_h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quarter-wave, half-wave, and combined rotation operators.

    Returns (Q(theta_q), H(theta_h), U) with U = H(theta_h) . Q(theta_q);
    each equals the corresponding fixed-retardance arbitrary waveplate.
    """
    q = awp(np.pi / 2.0, theta_q)
    h = awp(np.pi, theta_h)
    return q, h, h @ q


class Row1Q(NamedTuple):
    eta_h: float
    eta_q: float
    theta_h: float
    theta_q: float
    h: float
    v: float


class Row2Q(NamedTuple):
    theta_qa: float
    theta_ha: float
    theta_qb: float
    theta_hb: float
    h_a: float
    v_a: float
    h_b: float
    v_b: float


def _as_flag(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError("occupancy flags must be 0 or 1")
    return a


@dataclass(frozen=True)
class Settings1Q:
    """Single-qubit measurement settings, one row per projection.

    Per row: waveplate retardances ``eta_h``/``eta_q`` and fast-axis angles
    ``theta_h``/``theta_q`` in radians, plus beamsplitter-port occupancy
    flags ``h``/``v`` with h + v = 1.
    """

    eta_h: np.ndarray
    eta_q: np.ndarray
    theta_h: np.ndarray
    theta_q: np.ndarray
    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, name), dtype=float)
                  for name in ("eta_h", "eta_q", "theta_h", "theta_q")]
        n = arrays[0].shape[0]
        if any(a.shape != (n,) for a in arrays):
            raise ValueError("settings columns must share one length")
        h = _as_flag(self.h)
        v = _as_flag(self.v)
        if h.shape != (n,) or v.shape != (n,) or np.any(h + v != 1.0):
            raise ValueError("each row needs exactly one of h, v set")
        for name, a in zip(("eta_h", "eta_q", "theta_h", "theta_q"), arrays):
            object.__setattr__(self, name, a)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return self.eta_h.shape[0]

    def row(self, i: int) -> Row1Q:
        return Row1Q(self.eta_h[i], self.eta_q[i], self.theta_h[i],
                     self.theta_q[i], self.h[i], self.v[i])


@dataclass(frozen=True)
class Settings2Q:
    """Two-qubit measurement settings: four waveplate angles plus flags per arm."""

    theta_qa: np.ndarray
    theta_ha: np.ndarray
    theta_qb: np.ndarray
    theta_hb: np.ndarray
    h_a: np.ndarray
    v_a: np.ndarray
    h_b: np.ndarray
    v_b: np.ndarray

    def __post_init__(self):
        angles = [np.asarray(getattr(self, name), dtype=float)
                  for name in ("theta_qa", "theta_ha", "theta_qb", "theta_hb")]
        n = angles[0].shape[0]
        if any(a.shape != (n,) for a in angles):
            raise ValueError("settings columns must share one length")
        flags = {}
        for arm in ("a", "b"):
            h = _as_flag(getattr(self, f"h_{arm}"))
            v = _as_flag(getattr(self, f"v_{arm}"))
            if h.shape != (n,) or v.shape != (n,) or np.any(h + v != 1.0):
                raise ValueError(f"each row needs exactly one of h_{arm}, v_{arm} set")
            flags[f"h_{arm}"] = h
            flags[f"v_{arm}"] = v
        for name, a in zip(("theta_qa", "theta_ha", "theta_qb", "theta_hb"), angles):
            object.__setattr__(self, name, a)
        for name, a in flags.items():
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.theta_qa.shape[0]

    def row(self, i: int) -> Row2Q:
        return Row2Q(self.theta_qa[i], self.theta_ha[i], self.theta_qb[i],
                     self.theta_hb[i], self.h_a[i], self.v_a[i],
                     self.h_b[i], self.v_b[i])


# Constant tables. Columns: eta_h, eta_q, theta_h, theta_q, h, v; the rows
# target the H, V, D, A, L, R projections in that order.
_PI = np.pi
_LIQUID_CRYSTAL_ROWS = np.array([
    [0.0, 0.0, _PI / 8, _PI / 4, 1, 0],
    [0.0, 0.0, _PI / 8, _PI / 4, 0, 1],
    [_PI, 0.0, _PI / 8, _PI / 4, 1, 0],
    [_PI, 0.0, _PI / 8, _PI / 4, 0, 1],
    [0.0, _PI / 2, _PI / 8, _PI / 4, 1, 0],
    [0.0, _PI / 2, _PI / 8, _PI / 4, 0, 1],
])
_STANDARD_WAVEPLATE_ROWS = np.array([
    [_PI, _PI / 2, 0.0, 0.0, 1, 0],
    [_PI, _PI / 2, 0.0, 0.0, 0, 1],
    [_PI, _PI / 2, _PI / 8, _PI / 4, 1, 0],
    [_PI, _PI / 2, _PI / 8, _PI / 4, 0, 1],
    [_PI, _PI / 2, 0.0, _PI / 4, 1, 0],
    [_PI, _PI / 2, 0.0, _PI / 4, 0, 1],
])
# Per-arm two-qubit table; columns theta_h, theta_q, h, v.
_TWO_QUBIT_ARM_ROWS = np.array([
    [0.0, 0.0, 1, 0],
    [0.0, 0.0, 0, 1],
    [_PI / 8, _PI / 4, 1, 0],
    [_PI / 8, _PI / 4, 0, 1],
    [0.0, _PI / 4, 1, 0],
    [0.0, _PI / 4, 0, 1],
])


def settings_table(kind: str) -> Settings1Q | Settings2Q:
    """Standard non-adaptive settings tables.

    ``liquid_crystal`` and ``standard_waveplate`` return the six-row
    single-qubit tables; ``two_qubit`` expands the per-arm table into 36
    rows where arm-A settings repeat per block of six and arm-B settings
    cycle within each block.
    """
    if kind in ("liquid_crystal", "standard_waveplate"):
        rows = _LIQUID_CRYSTAL_ROWS if kind == "liquid_crystal" else _STANDARD_WAVEPLATE_ROWS
        return Settings1Q(eta_h=rows[:, 0], eta_q=rows[:, 1], theta_h=rows[:, 2],
                          theta_q=rows[:, 3], h=rows[:, 4], v=rows[:, 5])
    if kind == "two_qubit":
        arm_a = np.kron(_TWO_QUBIT_ARM_ROWS, np.ones((6, 1)))
        arm_b = np.kron(np.ones((6, 1)), _TWO_QUBIT_ARM_ROWS)
        return Settings2Q(theta_qa=arm_a[:, 1], theta_ha=arm_a[:, 0],
                          theta_qb=arm_b[:, 1], theta_hb=arm_b[:, 0],
                          h_a=arm_a[:, 2], v_a=arm_a[:, 3],
                          h_b=arm_b[:, 2], v_b=arm_b[:, 3])
    raise ValueError(f"unknown settings table {kind!r}")


# ---------------------------------------------------------------------------
# Single qubit
# ---------------------------------------------------------------------------

def prob_1q_direct(rho, row: Row1Q) -> float:
    """Projection probability by explicit matrix conjugation.

    The waveplate stack W = AWP(eta_h, theta_h) . AWP(eta_q, theta_q) acts on
    the state, so the probability is <psi| W rho W^dag |psi> with
    |psi> = [h, v]^T.
    """
    w = awp(row.eta_h, row.theta_h) @ awp(row.eta_q, row.theta_q)
    psi = np.array([row.h, row.v], dtype=complex)
    phi = w.conj().T @ psi
    return (phi.conj() @ np.asarray(rho) @ phi).real


def probs_1q_direct(rho, settings: Settings1Q) -> np.ndarray:
    """Direct-route probabilities for every settings row."""
    return np.array([prob_1q_direct(rho, settings.row(i)) for i in range(len(settings))])


def prob_1q_closed(a, b, re_c, im_c, row: Row1Q) -> float:
    """Closed-form projection probability in the element views.

    Inputs are the trace-normalized element views (a + b = 1). Identical to
    ``prob_1q_direct`` for all settings, including arbitrary retardances.
    """
    return float(_prob_1q_expansion(
        a, b, re_c, im_c,
        np.asarray(row.eta_h), np.asarray(row.eta_q),
        np.asarray(row.theta_h), np.asarray(row.theta_q),
        np.asarray(row.h), np.asarray(row.v)))


def probs_1q_closed(a, b, re_c, im_c, settings: Settings1Q) -> np.ndarray:
    """Closed-form probabilities for every settings row at once."""
    return _prob_1q_expansion(a, b, re_c, im_c, settings.eta_h, settings.eta_q,
                              settings.theta_h, settings.theta_q,
                              settings.h, settings.v)


def _prob_1q_expansion(a, b, re_c, im_c, eta_h, eta_q, theta_h, theta_q, h, v,
                       cos=np.cos, sin=np.sin):
    # Expanded <psi|W rho W^dag|psi> in the element views. cos/sin are
    # injectable so the fitting model can evaluate the identical expression
    # on autodiff values.
    d = a - b
    hv = h - v
    return (1.0 / 32.0) * (
        4.0 * (5.0 * a * h + 3.0 * b * h + 3.0 * a * v + 5.0 * b * v)
        + 2.0 * d * hv * cos(eta_h - eta_q)
        + hv * (
            2.0 * d * cos(eta_h + eta_q)
            + 4.0 * cos(eta_q) * (d + 8.0 * im_c * sin(eta_h) * sin(2.0 * theta_h))
            + 16.0 * cos(eta_q / 2.0) ** 2 * sin(eta_h / 2.0) ** 2
            * (d * cos(4.0 * theta_h) + 2.0 * re_c * sin(4.0 * theta_h))
            + 32.0 * cos(2.0 * theta_q) * sin(eta_q)
            * (re_c * sin(eta_h) * sin(2.0 * theta_h)
               - im_c * sin(eta_h / 2.0) ** 2 * sin(4.0 * theta_h))
            + 8.0 * cos(4.0 * theta_q) * sin(eta_q / 2.0) ** 2
            * (d + 2.0 * sin(eta_h / 2.0) ** 2
               * (d * cos(4.0 * theta_h) - 2.0 * re_c * sin(4.0 * theta_h)))
            - 8.0 * sin(eta_q) * sin(2.0 * theta_q)
            * (-4.0 * im_c * cos(2.0 * theta_h) ** 2
               + 2.0 * im_c * cos(eta_h) * cos(4.0 * theta_h)
               + 2.0 * d * sin(eta_h) * sin(2.0 * theta_h))
            - 4.0 * sin(eta_q / 2.0) ** 2 * sin(4.0 * theta_q)
            * (-4.0 * re_c - 4.0 * sin(eta_h / 2.0) ** 2
               * (2.0 * re_c * cos(4.0 * theta_h) + d * sin(4.0 * theta_h)))
        )
        + 4.0 * hv * cos(eta_h)
        * (d + 4.0 * im_c * sin(eta_q) * sin(2.0 * theta_q)
           + 2.0 * sin(eta_q / 2.0) ** 2
           * (d * cos(4.0 * theta_q) + 2.0 * re_c * sin(4.0 * theta_q)))
    )


# ---------------------------------------------------------------------------
# Two qubits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoQubitTerm:
    """One trigonometric term of the expanded two-qubit probability.

    The term contributes

        scale * (sum_k w_k e_k) * flag * trig(wha*4?... )

    more precisely: ``scale * combo(elements) * flag_pattern * trig(arg)``
    with ``arg = w_ha * theta_HA + w_hb * theta_HB + w_qa * theta_QA +
    w_qb * theta_QB``. ``flags`` is one of "dd" ((hA-vA)(hB-vB)),
    "ds" ((hA-vA)(hB+vB)) or "sd" ((hA+vA)(hB-vB)).
    """

    scale: float
    elems: tuple[tuple[str, float], ...]
    flags: str
    trig: str
    w_ha: float
    w_hb: float
    w_qa: float
    w_qb: float


def _t(scale, elems, flags, trig, w_ha, w_hb, w_qa, w_qb) -> TwoQubitTerm:
    return TwoQubitTerm(float(scale), tuple(elems), flags, trig,
                        float(w_ha), float(w_hb), float(w_qa), float(w_qb))


# Shorthand element combinations appearing in the expansion.
_DIAG_PP = (("A", 1), ("B", 1), ("C", -1), ("D", -1))          # A+B-C-D
_DIAG_PM = (("A", 1), ("B", -1), ("C", 1), ("D", -1))          # A-B+C-D
_DIAG_GH_P = (("A", 1), ("B", -1), ("C", -1), ("D", 1), ("ReG", 2), ("ReH", 2))
_DIAG_GH_M = (("A", 1), ("B", -1), ("C", -1), ("D", 1), ("ReG", -2), ("ReH", -2))
_IMG_P_IMH = (("ImG", 1), ("ImH", 1))
_IMG_M_IMH = (("ImG", 1), ("ImH", -1))
_REG_M_REH = (("ReG", 1), ("ReH", -1))
_REF_P_REI = (("ReF", 1), ("ReI", 1))
_REE_ALT = (("ReE", 1), ("ReF", -1), ("ReI", 1), ("ReJ", -1))  # ReE-ReF+ReI-ReJ
_REE_P_REJ = (("ReE", 1), ("ReJ", 1))
_REE_SYM = (("ReE", 1), ("ReF", 1), ("ReI", -1), ("ReJ", -1))  # ReE+ReF-ReI-ReJ
_IMF_P_IMI = (("ImF", 1), ("ImI", 1))
_IMF_M_IMI = (("ImF", 1), ("ImI", -1))
_IME_P_IMJ = (("ImE", 1), ("ImJ", 1))
_IME_M_IMJ = (("ImE", 1), ("ImJ", -1))

# Every angle-dependent term of the expanded two-qubit probability; the
# flag-complete base term 8(A+B+C+D)(hA+vA)(hB+vB) is handled separately.
# Trig arguments are in units of the four arm angles (theta_HA, theta_HB,
# theta_QA, theta_QB).
TWO_QUBIT_TERMS: tuple[TwoQubitTerm, ...] = (
    _t(4, _DIAG_PP, "ds", "cos", 4, 0, 0, 0),
    _t(1, _DIAG_GH_P, "dd", "cos", 4, -4, 0, 0),
    _t(4, _DIAG_PM, "sd", "cos", 0, 4, 0, 0),
    _t(1, _DIAG_GH_M, "dd", "cos", 4, 4, 0, 0),
    _t(4, _DIAG_PP, "ds", "cos", 4, 0, -4, 0),
    _t(1, _DIAG_GH_M, "dd", "cos", 4, -4, -4, 0),
    _t(-4, _IMG_P_IMH, "dd", "cos", 4, -4, -2, 0),
    _t(4, _IMG_P_IMH, "dd", "cos", 4, 4, -2, 0),
    _t(1, _DIAG_GH_P, "dd", "cos", 4, 4, -4, 0),
    _t(4, _DIAG_PM, "sd", "cos", 0, 4, 0, -4),
    _t(-4, _IMG_P_IMH, "dd", "cos", 4, 4, -2, -4),
    _t(4, _IMG_M_IMH, "dd", "cos", 4, 4, 0, -2),
    _t(-4, _IMG_M_IMH, "dd", "cos", 4, 4, -4, -2),
    _t(1, _DIAG_GH_P, "dd", "cos", 4, 4, 0, -4),
    _t(1, _DIAG_GH_M, "dd", "cos", 4, 4, -4, -4),
    _t(1, _DIAG_GH_M, "dd", "cos", 4, -4, 0, 4),
    _t(1, _DIAG_GH_P, "dd", "cos", 4, -4, -4, 4),
    _t(-4, _IMG_M_IMH, "dd", "cos", 4, -4, 0, 2),
    _t(4, _IMG_M_IMH, "dd", "cos", 4, -4, -4, 2),
    _t(-8, _REG_M_REH, "dd", "cos", 4, -4, -2, 2),
    _t(4, _IMG_P_IMH, "dd", "cos", 4, -4, -2, 4),
    _t(8, _REG_M_REH, "dd", "cos", 4, 4, -2, -2),
    _t(8, _REF_P_REI, "ds", "sin", 4, 0, 0, 0),
    _t(-2, _REE_ALT, "dd", "sin", 4, -4, 0, 0),
    _t(8, _REE_P_REJ, "sd", "sin", 0, 4, 0, 0),
    _t(2, _REE_SYM, "dd", "sin", 4, 4, 0, 0),
    _t(-8, _REF_P_REI, "ds", "sin", 4, 0, -4, 0),
    _t(-2, _REE_SYM, "dd", "sin", 4, -4, -4, 0),
    _t(-16, _IMF_P_IMI, "ds", "sin", 4, 0, -2, 0),
    _t(-4, _IMF_M_IMI, "dd", "sin", 4, -4, -2, 0),
    _t(-4, _IMF_M_IMI, "dd", "sin", 4, 4, -2, 0),
    _t(2, _REE_ALT, "dd", "sin", 4, 4, -4, 0),
    _t(-8, _REE_P_REJ, "sd", "sin", 0, 4, 0, -4),
    _t(-4, _IMF_M_IMI, "dd", "sin", 4, 4, -2, -4),
    _t(-16, _IME_P_IMJ, "sd", "sin", 0, 4, 0, -2),
    _t(-4, _IME_M_IMJ, "dd", "sin", 4, 4, 0, -2),
    _t(-4, _IME_M_IMJ, "dd", "sin", 4, 4, -4, -2),
    _t(-2, _REE_ALT, "dd", "sin", 4, 4, 0, -4),
    _t(-2, _REE_SYM, "dd", "sin", 4, 4, -4, -4),
    _t(2, _REE_SYM, "dd", "sin", 4, -4, 0, 4),
    _t(2, _REE_ALT, "dd", "sin", 4, -4, -4, 4),
    _t(4, _IME_M_IMJ, "dd", "sin", 4, -4, 0, 2),
    _t(4, _IME_M_IMJ, "dd", "sin", 4, -4, -4, 2),
    _t(-4, _IMF_M_IMI, "dd", "sin", 4, -4, -2, 4),
)


@lru_cache(maxsize=None)
def two_qubit_term_arrays():
    """Vectorized view of ``TWO_QUBIT_TERMS``.

    Returns (elem_matrix, angle_weights, flag_kinds, is_sin) where
    ``elem_matrix`` has shape (n_terms, 16) mapping element views to the
    per-term scalar coefficient (scale included), ``angle_weights`` has
    shape (n_terms, 4) in (theta_HA, theta_HB, theta_QA, theta_QB) order,
    ``flag_kinds`` is an integer array (0="dd", 1="ds", 2="sd"), and
    ``is_sin`` flags sine-type terms.
    """
    idx = {name: k for k, name in enumerate(ELEMENT_NAMES_2Q)}
    n = len(TWO_QUBIT_TERMS)
    elem_matrix = np.zeros((n, 16))
    angle_weights = np.zeros((n, 4))
    flag_kinds = np.zeros(n, dtype=int)
    is_sin = np.zeros(n, dtype=bool)
    kind_code = {"dd": 0, "ds": 1, "sd": 2}
    for k, term in enumerate(TWO_QUBIT_TERMS):
        for name, w in term.elems:
            elem_matrix[k, idx[name]] += term.scale * w
        angle_weights[k] = (term.w_ha, term.w_hb, term.w_qa, term.w_qb)
        flag_kinds[k] = kind_code[term.flags]
        is_sin[k] = term.trig == "sin"
    for a in (elem_matrix, angle_weights, flag_kinds, is_sin):
        a.flags.writeable = False
    return elem_matrix, angle_weights, flag_kinds, is_sin


def prob_2q_direct(rho, row: Row2Q) -> float:
    """Coincidence probability via the joint rotation U_A x U_B.

    Uses the quarter/half-wave formalism (retardances fixed at pi/2 and pi)
    and the same state-then-project convention as the single-qubit route.
    """
    _, _, u_a = rotation_ops(row.theta_qa, row.theta_ha)
    _, _, u_b = rotation_ops(row.theta_qb, row.theta_hb)
    w = kron(u_a, u_b)
    psi = np.kron(np.array([row.h_a, row.v_a]), np.array([row.h_b, row.v_b]))
    phi = w.conj().T @ psi.astype(complex)
    return (phi.conj() @ np.asarray(rho) @ phi).real


def probs_2q_direct(rho, settings: Settings2Q) -> np.ndarray:
    """Direct-route coincidence probabilities for every settings row."""
    return np.array([prob_2q_direct(rho, settings.row(i)) for i in range(len(settings))])


def _flag_patterns(h_a, v_a, h_b, v_b):
    da, db = h_a - v_a, h_b - v_b
    sa, sb = h_a + v_a, h_b + v_b
    return (da * db, da * sb, sa * db), sa * sb


def probs_2q_closed(elements, settings: Settings2Q) -> np.ndarray:
    """Closed-form coincidence probabilities for every settings row.

    ``elements`` are the 16 trace-normalized views in ``ELEMENT_NAMES_2Q``
    order (A + B + C + D = 1). Valid for occupancy flags in {0, 1} with
    h*v = 0 per arm, which is what the term reduction assumed.
    """
    elements = np.asarray(elements, dtype=float)
    elem_matrix, angle_weights, flag_kinds, is_sin = two_qubit_term_arrays()
    coef = elem_matrix @ elements                      # (n_terms,)
    angles = np.stack([settings.theta_ha, settings.theta_hb,
                       settings.theta_qa, settings.theta_qb])  # (4, n_rows)
    args = angle_weights @ angles                      # (n_terms, n_rows)
    trig = np.where(is_sin[:, None], np.sin(args), np.cos(args))
    patterns, sasb = _flag_patterns(settings.h_a, settings.v_a,
                                    settings.h_b, settings.v_b)
    flags = np.stack(patterns)[flag_kinds]             # (n_terms, n_rows)
    base = 8.0 * elements[:4].sum() * sasb
    return (base + (coef[:, None] * flags * trig).sum(axis=0)) / 32.0


def prob_2q_closed(elements, row: Row2Q) -> float:
    """Closed-form coincidence probability for a single settings row."""
    settings = Settings2Q(
        theta_qa=[row.theta_qa], theta_ha=[row.theta_ha],
        theta_qb=[row.theta_qb], theta_hb=[row.theta_hb],
        h_a=[row.h_a], v_a=[row.v_a], h_b=[row.h_b], v_b=[row.v_b])
    return float(probs_2q_closed(elements, settings)[0])

"""Beamsplitter/detector crosstalk matrices and pseudoinverse flux estimation.

A polarizing beamsplitter with transmission/reflection probabilities
T_H, T_V, R_H, R_V and detection-path efficiencies mu (transmitted) and
nu (reflected) maps true projection counts onto detected counts through

    C = [[mu T_H, mu T_V],
         [nu R_H, nu R_V]].

Stacking the three measurement bases gives the 6x6 single-qubit crosstalk
kron(I_3, C); a photon pair sees the Kronecker product of the per-arm 6x6
matrices. Applying the pseudoinverse of the crosstalk to observed counts
and summing each orthogonal group recovers per-basis-pair flux estimates,
which seed the flux priors of the fitting model.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .linalg import kron, pinv

__all__ = [
    "InstrumentParams1Q",
    "InstrumentParams2Q",
    "FluxEstimate",
    "crosstalk_1q",
    "crosstalk_2q",
    "estimate_flux_1q",
    "estimate_flux_2q",
    "expand_flux",
    "FLUX_GROUPS_2Q",
]

# Flat measurement indices contributing to each of the nine two-qubit flux
# groups (HH, HD, HL, DH, DD, DL, LH, LD, LL basis pairs).
FLUX_GROUPS_2Q = (
    (0, 1, 6, 7), (2, 3, 8, 9), (4, 5, 10, 11),
    (12, 13, 18, 19), (14, 15, 20, 21), (16, 17, 22, 23),
    (24, 25, 30, 31), (26, 27, 32, 33), (28, 29, 34, 35),
)

# Group index feeding each measurement row when a flux estimate is expanded
# back onto the settings table.
_EXPAND_1Q = np.array([0, 0, 1, 1, 2, 2])
_EXPAND_2Q = np.array(
    [0, 0, 1, 1, 2, 2] * 2 + [3, 3, 4, 4, 5, 5] * 2 + [6, 6, 7, 7, 8, 8] * 2)


def _check_unit_interval(obj) -> None:
    for f in fields(obj):
        val = getattr(obj, f.name)
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{f.name}={val} outside [0, 1]")


@dataclass(frozen=True)
class InstrumentParams1Q:
    """Detection efficiencies and beamsplitter coefficients for one qubit.

    ``mu``/``nu`` are the transmitted/reflected detection-path efficiencies
    (fiber coupling and detector bias folded in); ``t_h``/``t_v`` and
    ``r_h``/``r_v`` are the beamsplitter transmission and reflection
    probabilities for horizontal and vertical input.
    """

    mu: float
    nu: float
    t_h: float
    t_v: float
    r_h: float
    r_v: float

    def __post_init__(self):
        _check_unit_interval(self)

    def pbs_matrix(self) -> np.ndarray:
        return np.array([[self.mu * self.t_h, self.mu * self.t_v],
                         [self.nu * self.r_h, self.nu * self.r_v]])


@dataclass(frozen=True)
class InstrumentParams2Q:
    """Per-arm instrument parameters for a photon-pair experiment."""

    mu_a: float
    nu_a: float
    t_ha: float
    t_va: float
    r_ha: float
    r_va: float
    mu_b: float
    nu_b: float
    t_hb: float
    t_vb: float
    r_hb: float
    r_vb: float

    def __post_init__(self):
        _check_unit_interval(self)

    def arm(self, which: str) -> InstrumentParams1Q:
        if which not in ("a", "b"):
            raise ValueError(f"unknown arm {which!r}")
        s = which
        return InstrumentParams1Q(
            mu=getattr(self, f"mu_{s}"), nu=getattr(self, f"nu_{s}"),
            t_h=getattr(self, f"t_h{s}"), t_v=getattr(self, f"t_v{s}"),
            r_h=getattr(self, f"r_h{s}"), r_v=getattr(self, f"r_v{s}"))


@dataclass(frozen=True)
class FluxEstimate:
    """Per basis-pair flux estimates.

    ``values`` is what the model consumes (integer-rounded in the two-qubit
    case); ``raw`` keeps the unrounded pseudoinverse output for tests.
    """

    values: np.ndarray
    raw: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def crosstalk_1q(params: InstrumentParams1Q) -> np.ndarray:
    """6x6 crosstalk matrix kron(I_3, C) for the three measurement bases."""
    return kron(np.eye(3), params.pbs_matrix())


def crosstalk_2q(params: InstrumentParams2Q) -> np.ndarray:
    """36x36 joint crosstalk (I_3 x C_A) x (I_3 x C_B)."""
    return kron(crosstalk_1q(params.arm("a")), crosstalk_1q(params.arm("b")))


def estimate_flux_1q(counts, params: InstrumentParams1Q) -> FluxEstimate:
    """Flux per basis pair (HV, DA, LR) from six detected counts.

    Applies the pseudoinverse of the 6x6 crosstalk to the counts and sums
    each orthogonal pair, i.e. [1 1] . C^-1 . [N_psi, N_psi_perp]^T.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (6,):
        raise ValueError(f"expected 6 counts, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    inverted = pinv(crosstalk_1q(params)) @ counts
    raw = inverted[0::2] + inverted[1::2]
    return FluxEstimate(values=raw.copy(), raw=raw)


def estimate_flux_2q(counts, params: InstrumentParams2Q) -> FluxEstimate:
    """Nine basis-pair flux estimates from 36 coincidence counts.

    The pseudoinverse of the full 36x36 crosstalk is applied to the counts
    and the result summed over each four-element orthogonal group, then
    rounded to the nearest integer (the raw sums are kept alongside).
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (36,):
        raise ValueError(f"expected 36 counts, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    inverted = pinv(crosstalk_2q(params)) @ counts
    raw = np.array([inverted[list(group)].sum() for group in FLUX_GROUPS_2Q])
    return FluxEstimate(values=np.round(raw), raw=raw)


def expand_flux(flux: FluxEstimate | np.ndarray) -> np.ndarray:
    """Expand per-group flux onto the measurement rows.

    Three groups expand to the six single-qubit rows as (0,0,1,1,2,2); nine
    groups expand to the 36 two-qubit rows with groups (0,0,1,1,2,2) for
    rows 0-11, (3,3,4,4,5,5) for rows 12-23 and (6,6,7,7,8,8) for rows
    24-35.
    """
    values = flux.values if isinstance(flux, FluxEstimate) else np.asarray(flux, dtype=float)
    if values.shape == (3,):
        return values[_EXPAND_1Q]
    if values.shape == (9,):
        return values[_EXPAND_2Q]
    raise ValueError(f"expected 3 or 9 flux groups, got shape {values.shape}")


def flux_expansion_indices(kind: str) -> np.ndarray:
    """Group index per measurement row ("1q" -> 6 rows, "2q" -> 36 rows)."""
    if kind == "1q":
        return _EXPAND_1Q.copy()
    if kind == "2q":
        return _EXPAND_2Q.copy()
    raise ValueError(f"unknown kind {kind!r}")

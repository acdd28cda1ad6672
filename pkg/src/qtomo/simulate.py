"""Forward simulator: synthetic count data with systematic instrument errors.

One systematic offset is drawn per waveplate degree of freedom and shared
across every measurement row (the instrument is misaligned once, not per
measurement), each efficiency-folded beamsplitter coefficient is perturbed
independently (folded through |.| and capped at 1, since it is a
probability), exact projection probabilities are evaluated through the
direct matrix path with the realized angles, and the detected counts are
independent Poisson draws of the crosstalk-distorted mean counts. The
realized systematic values are returned for test introspection.

The two-qubit pipeline mirrors the published simulation study; the
single-qubit variant is an artifact extension built symmetrically from the
single-qubit forward model so closed-loop tests need no lab data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crosstalk import InstrumentParams1Q, InstrumentParams2Q
from .model import UncertaintySpec1Q, UncertaintySpec2Q
from .optics import (
    Settings1Q,
    Settings2Q,
    probs_1q_direct,
    probs_2q_direct,
)
from .qstate import KET_H, KET_V, validate_density_matrix
from .linalg import kron

__all__ = ["SimSpec", "SimResult", "bell_singlet", "simulate_counts"]


def bell_singlet() -> np.ndarray:
    """Density matrix of the maximally entangled singlet (|HV> - |VH>)/sqrt(2)."""
    ket = (kron(KET_H.reshape(2, 1), KET_V.reshape(2, 1))
           - kron(KET_V.reshape(2, 1), KET_H.reshape(2, 1))) / np.sqrt(2.0)
    return (ket @ ket.conj().T).astype(complex)


@dataclass
class SimSpec:
    """Inputs of one synthetic experiment.

    ``flux`` is the number of photons (or biphotons) entering the apparatus
    per measurement interval; zero is allowed and produces all-zero counts.
    """

    state: np.ndarray
    flux: float
    instrument: InstrumentParams1Q | InstrumentParams2Q
    uncertainty: UncertaintySpec1Q | UncertaintySpec2Q
    seed: int

    def __post_init__(self):
        self.state = validate_density_matrix(self.state)
        if self.flux < 0:
            raise ValueError("flux must be nonnegative")

    @property
    def kind(self) -> str:
        return "1q" if self.state.shape == (2, 2) else "2q"


@dataclass
class SimResult:
    """Synthetic counts plus the realized systematic errors behind them."""

    counts: np.ndarray
    mean_counts: np.ndarray
    realized: dict = field(default_factory=dict)


def _perturbed_pbs(nominal: np.ndarray, sigma: float,
                   rng: np.random.Generator) -> np.ndarray:
    perturbed = np.abs(nominal + rng.normal(0.0, sigma, nominal.shape))
    # Folded coefficients are probabilities; cap at 1.
    return np.minimum(perturbed, 1.0)


def simulate_counts(spec: SimSpec, settings: Settings1Q | Settings2Q) -> SimResult:
    """Generate one synthetic dataset for the given measurement settings."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "1q":
        if not isinstance(settings, Settings1Q):
            raise ValueError("single-qubit state needs Settings1Q")
        return _simulate_1q(spec, settings, rng)
    if not isinstance(settings, Settings2Q):
        raise ValueError("two-qubit state needs Settings2Q")
    return _simulate_2q(spec, settings, rng)


def _simulate_1q(spec: SimSpec, settings: Settings1Q,
                 rng: np.random.Generator) -> SimResult:
    unc: UncertaintySpec1Q = spec.uncertainty
    inst: InstrumentParams1Q = spec.instrument
    if not isinstance(unc, UncertaintySpec1Q) or not isinstance(inst, InstrumentParams1Q):
        raise ValueError("single-qubit simulation needs 1q instrument and uncertainty")
    offsets = {
        "eta_h": rng.normal(0.0, unc.eta_h),
        "eta_q": rng.normal(0.0, unc.eta_q),
        "theta_q": rng.normal(0.0, unc.theta_q),
        "theta_h": rng.normal(0.0, unc.theta_h),
    }
    realized_settings = Settings1Q(
        eta_h=settings.eta_h + offsets["eta_h"],
        eta_q=settings.eta_q + offsets["eta_q"],
        theta_h=settings.theta_h + offsets["theta_h"],
        theta_q=settings.theta_q + offsets["theta_q"],
        h=settings.h, v=settings.v)
    pbs = _perturbed_pbs(inst.pbs_matrix(), unc.combined_pbs, rng)
    prob = probs_1q_direct(spec.state, realized_settings)
    # Exact zeros can round to tiny negatives through the matrix products.
    mean = np.maximum(kron(np.eye(3), pbs) @ (prob * spec.flux), 0.0)
    counts = rng.poisson(mean)
    realized = {"angle_offsets": offsets, "pbs": pbs}
    return SimResult(counts=counts, mean_counts=mean, realized=realized)


def _simulate_2q(spec: SimSpec, settings: Settings2Q,
                 rng: np.random.Generator) -> SimResult:
    unc: UncertaintySpec2Q = spec.uncertainty
    inst: InstrumentParams2Q = spec.instrument
    if not isinstance(unc, UncertaintySpec2Q) or not isinstance(inst, InstrumentParams2Q):
        raise ValueError("two-qubit simulation needs 2q instrument and uncertainty")
    offsets = {
        "theta_qa": rng.normal(0.0, unc.theta_qa),
        "theta_ha": rng.normal(0.0, unc.theta_ha),
        "theta_qb": rng.normal(0.0, unc.theta_qb),
        "theta_hb": rng.normal(0.0, unc.theta_hb),
    }
    realized_settings = Settings2Q(
        theta_qa=settings.theta_qa + offsets["theta_qa"],
        theta_ha=settings.theta_ha + offsets["theta_ha"],
        theta_qb=settings.theta_qb + offsets["theta_qb"],
        theta_hb=settings.theta_hb + offsets["theta_hb"],
        h_a=settings.h_a, v_a=settings.v_a, h_b=settings.h_b, v_b=settings.v_b)
    sigma = unc.combined_pbs
    pbs_a = _perturbed_pbs(inst.arm("a").pbs_matrix(), sigma, rng)
    pbs_b = _perturbed_pbs(inst.arm("b").pbs_matrix(), sigma, rng)
    prob = probs_2q_direct(spec.state, realized_settings)
    crosstalk = kron(kron(np.eye(3), pbs_a), kron(np.eye(3), pbs_b))
    mean = np.maximum(crosstalk @ (prob * spec.flux), 0.0)
    counts = rng.poisson(mean)
    realized = {"angle_offsets": offsets, "pbs_a": pbs_a, "pbs_b": pbs_b}
    return SimResult(counts=counts, mean_counts=mean, realized=realized)

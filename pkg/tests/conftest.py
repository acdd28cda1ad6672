import numpy as np
import pytest

from qtomo.crosstalk import InstrumentParams1Q, InstrumentParams2Q
from qtomo.model import ExperimentConfig, UncertaintySpec1Q, UncertaintySpec2Q
from qtomo.optics import settings_table

DEG = np.pi / 180.0

# Published instrument values for the single-qubit experiments.
PAPER_INSTRUMENT_1Q = dict(mu=0.42, nu=0.75, t_h=0.973, t_v=0.027,
                           r_h=0.013, r_v=0.987)
PAPER_UNCERTAINTY_1Q = dict(theta_q=DEG, theta_h=DEG, eta_q=2 * DEG,
                            eta_h=2 * DEG, mu=0.03, nu=0.03,
                            t_h=0.01, t_v=0.01, r_h=0.01, r_v=0.01)
HIGH_FLUX_COUNTS = (2518, 123, 1335, 2291, 1234, 2314)
LOW_FLUX_COUNTS = (21, 2, 11, 21, 12, 23)

# Simulation-study instrument values for the photon-pair setup.
SIM_INSTRUMENT_2Q = dict(mu_a=0.6, nu_a=0.7, t_ha=0.98, t_va=0.01,
                         r_ha=0.01, r_va=0.97,
                         mu_b=0.7, nu_b=0.8, t_hb=0.96, t_vb=0.01,
                         r_hb=0.01, r_vb=0.97)
SIM_UNCERTAINTY_2Q = dict(theta_qa=2 * DEG, theta_ha=2 * DEG,
                          theta_qb=2 * DEG, theta_hb=2 * DEG,
                          pbs=0.02, mu_nu=0.02)


def make_config_1q(counts=HIGH_FLUX_COUNTS, table="liquid_crystal",
                   sigma_mode="max_counts") -> ExperimentConfig:
    return ExperimentConfig(
        kind="1q",
        settings=settings_table(table),
        instrument=InstrumentParams1Q(**PAPER_INSTRUMENT_1Q),
        uncertainty=UncertaintySpec1Q(**PAPER_UNCERTAINTY_1Q),
        counts=np.asarray(counts),
        likelihood_sigma_mode=sigma_mode,
    )


def make_config_2q(counts, sigma_mode="max_counts") -> ExperimentConfig:
    return ExperimentConfig(
        kind="2q",
        settings=settings_table("two_qubit"),
        instrument=InstrumentParams2Q(**SIM_INSTRUMENT_2Q),
        uncertainty=UncertaintySpec2Q(**SIM_UNCERTAINTY_2Q),
        counts=np.asarray(counts),
        likelihood_sigma_mode=sigma_mode,
    )


@pytest.fixture(scope="session")
def oracle_log():
    """Collects OracleReport entries from tests that pin derived values."""
    reports = []
    yield reports
    failed = [r for r in reports if not np.isfinite(r.abs_err)]
    assert not failed, f"oracle comparisons with non-finite error: {failed}"

"""Bayesian polarization qubit tomography with instrument-uncertainty propagation.

Reconstructs single- and two-qubit density matrices from photon counts by
sampling the joint posterior over the state parameters and the instrument
nuisances (waveplate angles and retardances, beamsplitter crosstalk,
detection efficiencies, photon flux), and summarizes the result as Bayes
mean estimates with highest-density intervals. A forward simulator
generates synthetic experiments for closed-loop studies.
"""

__version__ = "0.1.0"

from .crosstalk import (
    FluxEstimate,
    InstrumentParams1Q,
    InstrumentParams2Q,
    crosstalk_1q,
    crosstalk_2q,
    estimate_flux_1q,
    estimate_flux_2q,
    expand_flux,
)
from .model import (
    ExperimentConfig,
    LatentSite,
    TomographyPosterior,
    UncertaintySpec1Q,
    UncertaintySpec2Q,
    derived_quantities,
    latent_layout,
    log_posterior,
    log_posterior_gradient,
    posterior_for,
)
from .optics import (
    Settings1Q,
    Settings2Q,
    awp,
    prob_1q_closed,
    prob_1q_direct,
    prob_2q_closed,
    prob_2q_direct,
    rotation_ops,
    settings_table,
)
from .posterior import (
    HdiInterval,
    PosteriorSummary,
    PpcResult,
    StateSummary,
    bme,
    hdi,
    hdi_multimodal,
    ppc,
    summarize_state,
)
from .qstate import (
    fidelity,
    rho_from_stokes_1q,
    rho_from_t_1q,
    rho_from_t_2q,
    stokes_1q,
    stokes_joint,
    validate_density_matrix,
)
from .sampler import (
    SamplerConfig,
    SamplerError,
    Trace,
    ess,
    poisson_regression_fixture,
    rhat,
    sample,
)
from .simulate import SimResult, SimSpec, bell_singlet, simulate_counts

__all__ = [name for name in dir() if not name.startswith("_")]

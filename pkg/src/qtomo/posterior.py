"""Posterior summaries: Bayes means, highest-density intervals, and checks.

The Bayes mean estimate of a quantity is the arithmetic mean of its trace.
The default highest-density interval is the shortest contiguous window of
the sorted samples holding the requested mass; a multimodal variant scans a
kernel-density threshold and can return several intervals. State summaries
assemble the Bayes-mean density matrix from the element-view means and
renormalize it to unit trace, and posterior-predictive checks replay
posterior samples through the forward count model to compare replicated
counts against the observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import qstate
from .model import ExperimentConfig, posterior_for
from .sampler import Trace, ess, rhat

__all__ = [
    "HdiInterval",
    "PosteriorSummary",
    "PpcResult",
    "bme",
    "hdi",
    "hdi_multimodal",
    "summarize_state",
    "StateSummary",
    "ppc",
]

_MIN_HDI_SAMPLES = 50


@dataclass(frozen=True)
class HdiInterval:
    """A credible interval [lo, hi] holding probability mass ``prob``."""

    lo: float
    hi: float
    prob: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval bounds out of order")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class PosteriorSummary:
    """Point estimate and interval plus convergence diagnostics for one quantity."""

    bme: float
    hdi: HdiInterval
    rhat: float
    ess: float


def bme(samples) -> float:
    """Bayes mean estimate: the arithmetic mean of the samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("cannot average an empty trace")
    return float(samples.mean())


def hdi(samples, prob: float = 0.95) -> HdiInterval:
    """Shortest contiguous window of sorted samples holding ``prob`` mass.

    Requires at least 50 samples; below that the estimate is unstable.
    Ties resolve to the lowest window, matching the exhaustive scan.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0, 1)")
    if samples.size < _MIN_HDI_SAMPLES:
        raise ValueError(f"need at least {_MIN_HDI_SAMPLES} samples, "
                         f"got {samples.size}")
    ordered = np.sort(samples)
    m = math.ceil(prob * ordered.size)
    widths = ordered[m - 1:] - ordered[:ordered.size - m + 1]
    start = int(np.argmin(widths))
    return HdiInterval(float(ordered[start]), float(ordered[start + m - 1]), prob)


def hdi_multimodal(samples, prob: float = 0.95,
                   grid_size: int = 512) -> tuple[HdiInterval, ...]:
    """Highest-density region as a union of intervals.

    A Gaussian kernel density with Silverman bandwidth is evaluated on a
    grid; the smallest density threshold whose super-level set holds
    ``prob`` of the grid mass defines the region, reported as contiguous
    grid intervals.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0, 1)")
    if samples.size < _MIN_HDI_SAMPLES:
        raise ValueError(f"need at least {_MIN_HDI_SAMPLES} samples, "
                         f"got {samples.size}")
    std = samples.std()
    if std == 0.0:
        point = float(samples[0])
        return (HdiInterval(point, point, prob),)
    bandwidth = 0.9 * min(std, _iqr(samples) / 1.34) * samples.size ** (-0.2)
    bandwidth = max(bandwidth, 1e-12 * std)
    grid = np.linspace(samples.min() - 3 * bandwidth,
                       samples.max() + 3 * bandwidth, grid_size)
    density = np.exp(-0.5 * ((grid[:, None] - samples[None, :]) / bandwidth) ** 2
                     ).sum(axis=1)
    density /= density.sum()
    order = np.argsort(density)[::-1]
    cumulative = np.cumsum(density[order])
    threshold = density[order[np.searchsorted(cumulative, prob)]]
    above = density >= threshold
    intervals = []
    start = None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            intervals.append(HdiInterval(float(grid[start]), float(grid[i - 1]), prob))
            start = None
    if start is not None:
        intervals.append(HdiInterval(float(grid[start]), float(grid[-1]), prob))
    return tuple(intervals)


def _iqr(samples: np.ndarray) -> float:
    q75, q25 = np.percentile(samples, [75, 25])
    return q75 - q25


@dataclass
class StateSummary:
    """Per-quantity summaries plus the Bayes-mean density matrix."""

    quantities: dict[str, PosteriorSummary]
    bme_rho: np.ndarray
    hdi_prob: float


def summarize_state(trace: Trace, config: ExperimentConfig,
                    hdi_prob: float = 0.95) -> StateSummary:
    """Summarize every density-matrix element view and Stokes component.

    The Bayes-mean density matrix is assembled from the element-view means
    and renormalized to unit trace (a guard; the mean of unit-trace samples
    is already unit trace up to rounding).
    """
    post = posterior_for(config)
    missing = [n for n in post.derived_names if n not in trace.derived]
    if missing:
        raise ValueError(f"trace lacks derived quantities {missing}; "
                         "attach them before summarizing")
    multi_chain = trace.chains >= 2
    quantities: dict[str, PosteriorSummary] = {}
    for name in post.derived_names:
        flat = trace.flat(name)
        quantities[name] = PosteriorSummary(
            bme=bme(flat),
            hdi=hdi(flat, hdi_prob),
            rhat=rhat(trace, name) if multi_chain else float("nan"),
            ess=ess(trace, name) if multi_chain else float("nan"),
        )
    element_names = (qstate.ELEMENT_NAMES_1Q if config.kind == "1q"
                     else qstate.ELEMENT_NAMES_2Q)
    means = np.array([quantities[n].bme for n in element_names])
    bme_rho = _rho_from_elements(means, config.kind)
    return StateSummary(quantities=quantities, bme_rho=bme_rho, hdi_prob=hdi_prob)


def _rho_from_elements(e: np.ndarray, kind: str) -> np.ndarray:
    if kind == "1q":
        rho = np.array([
            [e[0], e[2] - 1j * e[3]],
            [e[2] + 1j * e[3], e[1]],
        ])
    else:
        rho = np.zeros((4, 4), dtype=complex)
        rho[np.diag_indices(4)] = e[:4]
        for k, (i, j) in enumerate(((1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2))):
            rho[i, j] = e[4 + 2 * k] + 1j * e[5 + 2 * k]
            rho[j, i] = e[4 + 2 * k] - 1j * e[5 + 2 * k]
    return rho / np.trace(rho).real


@dataclass
class PpcResult:
    """Replicated counts against observations.

    ``replicates`` has shape (n_replicates, n_measurements);
    ``tail_prob[j]`` is the fraction of replicates at or below the observed
    count of measurement j.
    """

    replicates: np.ndarray
    observed: np.ndarray
    tail_prob: np.ndarray
    sample_indices: np.ndarray = field(repr=False, default=None)

    def quantiles(self, qs=(1, 5, 25, 50, 75, 95, 99)) -> np.ndarray:
        """Per-measurement replicate percentiles, shape (len(qs), n_meas)."""
        return np.percentile(self.replicates, qs, axis=0)


def ppc(trace: Trace, config: ExperimentConfig, replicates_per_sample: int = 1,
        seed: int = 0, budget: int = 500) -> PpcResult:
    """Posterior-predictive replicated counts.

    Posterior samples are thinned evenly to ``budget``; each retained
    sample's latent vector (state and nuisances) regenerates the modeled
    mean counts, from which replicated counts are drawn under the
    zero-truncated Gaussian observation law with the configured sigma.
    Each retained sample uses its own counter-derived random stream, so the
    result is reproducible and order-independent.
    """
    if trace.draws * trace.chains == 0:
        raise ValueError("empty trace")
    post = posterior_for(config)
    latents = trace.latent_matrix().reshape(-1, len(trace.names))
    total = latents.shape[0]
    n_keep = min(budget, total)
    keep = np.unique(np.round(np.linspace(0, total - 1, n_keep)).astype(int))
    sigma = post._sigma_full
    observed = config.counts
    reps = []
    for stream_idx, sample_idx in enumerate(keep):
        x = latents[sample_idx]
        mu = post.mean_counts(x)
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=seed, spawn_key=(stream_idx,))))
        u = rng.uniform(size=(replicates_per_sample, mu.size))
        low = ndtr(-mu / sigma)
        reps.append(mu + sigma * ndtri(low + u * (1.0 - low)))
    replicates = np.concatenate(reps, axis=0)
    tail = (replicates <= observed).mean(axis=0)
    return PpcResult(replicates=replicates, observed=observed.copy(),
                     tail_prob=tail, sample_indices=keep)

"""Unnormalized log-posterior for single- and two-qubit tomography fits.

The latent vector gathers the density-matrix parameters t_i (uniform on
[-1, 1]) with z-scored nuisance offsets for everything the instrument is
uncertain about: per-basis-pair flux, waveplate retardances (single qubit
only), waveplate angles, and the efficiency-folded beamsplitter
coefficients. Nuisances enter as nominal + sigma * z with z ~ N(0, 1); the
flux and beamsplitter coefficients additionally pass through |.| so they
stay nonnegative without bound bookkeeping. The likelihood is a
zero-lower-truncated Gaussian per measured count with mean equal to the
modeled count (closed-form probability times expanded flux, pushed through
the perturbed crosstalk matrix) and a standard deviation of
sqrt(max(counts)) by default (a per-measurement sqrt(N_j) variant is
selectable).

Gradients are exact: the forward pass is written once over a small
reverse-mode tape (:mod:`qtomo.autodiff`) and the log-CDF normalization of
the truncated likelihood is differentiated analytically, so the sampler
sees a smooth, total density everywhere except the measure-zero fold
points, where the subgradient 0 is used.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import log_ndtr

from . import autodiff as ad
from . import qstate
from .crosstalk import (
    InstrumentParams1Q,
    InstrumentParams2Q,
    estimate_flux_1q,
    estimate_flux_2q,
    flux_expansion_indices,
)
from .optics import (
    Settings1Q,
    Settings2Q,
    _prob_1q_expansion,
    two_qubit_term_arrays,
)

__all__ = [
    "UncertaintySpec1Q",
    "UncertaintySpec2Q",
    "ExperimentConfig",
    "LatentSite",
    "latent_layout",
    "TomographyPosterior",
    "log_posterior",
    "log_posterior_gradient",
    "derived_quantities",
    "posterior_for",
]

_LOG_2PI = np.log(2.0 * np.pi)
_FLUX_FLOOR = 1.0


def _check_nonnegative(obj) -> None:
    for f in fields(obj):
        if getattr(obj, f.name) < 0.0:
            raise ValueError(f"{f.name} must be a nonnegative standard deviation")


@dataclass(frozen=True)
class UncertaintySpec1Q:
    """Standard deviations of the single-qubit instrument nuisances.

    Angles and retardances are in radians; the six efficiency/crosstalk
    deviations are combined in quadrature into the shared sigma of the four
    folded beamsplitter coefficients.
    """

    theta_q: float
    theta_h: float
    eta_q: float
    eta_h: float
    mu: float
    nu: float
    t_h: float
    t_v: float
    r_h: float
    r_v: float

    def __post_init__(self):
        _check_nonnegative(self)

    @property
    def combined_pbs(self) -> float:
        return float(np.sqrt(self.mu ** 2 + self.nu ** 2 + self.t_h ** 2
                             + self.t_v ** 2 + self.r_h ** 2 + self.r_v ** 2))


@dataclass(frozen=True)
class UncertaintySpec2Q:
    """Standard deviations of the two-qubit instrument nuisances.

    ``pbs`` and ``mu_nu`` are the beamsplitter and efficiency deviations,
    combined in quadrature into the shared sigma of the eight folded
    coefficients.
    """

    theta_qa: float
    theta_ha: float
    theta_qb: float
    theta_hb: float
    pbs: float
    mu_nu: float

    def __post_init__(self):
        _check_nonnegative(self)

    @property
    def combined_pbs(self) -> float:
        return float(np.sqrt(self.pbs ** 2 + self.mu_nu ** 2))


@dataclass
class ExperimentConfig:
    """Everything a tomography fit needs: settings, instrument, sigmas, counts."""

    kind: str
    settings: Settings1Q | Settings2Q
    instrument: InstrumentParams1Q | InstrumentParams2Q
    uncertainty: UncertaintySpec1Q | UncertaintySpec2Q
    counts: np.ndarray
    likelihood_sigma_mode: str = "max_counts"

    def __post_init__(self):
        if self.kind not in ("1q", "2q"):
            raise ValueError(f"kind must be '1q' or '2q', got {self.kind!r}")
        expected = {
            "1q": (Settings1Q, InstrumentParams1Q, UncertaintySpec1Q),
            "2q": (Settings2Q, InstrumentParams2Q, UncertaintySpec2Q),
        }[self.kind]
        for value, cls, what in zip(
                (self.settings, self.instrument, self.uncertainty), expected,
                ("settings", "instrument", "uncertainty")):
            if not isinstance(value, cls):
                raise ValueError(f"{what} must be {cls.__name__} for kind {self.kind}")
        counts = np.asarray(self.counts)
        if np.any(counts < 0) or not np.allclose(counts, np.round(counts)):
            raise ValueError("counts must be nonnegative integers")
        counts = counts.astype(float)
        if counts.shape != (len(self.settings),):
            raise ValueError(
                f"expected {len(self.settings)} counts, got shape {counts.shape}")
        self.counts = counts
        if self.likelihood_sigma_mode not in ("max_counts", "per_measurement"):
            raise ValueError(
                f"unknown likelihood_sigma_mode {self.likelihood_sigma_mode!r}")


@dataclass(frozen=True)
class LatentSite:
    """One latent coordinate: its name and support."""

    name: str
    lower: float | None = None
    upper: float | None = None

    @property
    def bounded(self) -> bool:
        return self.lower is not None


def latent_layout(config: ExperimentConfig) -> tuple[LatentSite, ...]:
    """Deterministic latent ordering for a configuration.

    Single qubit (13 sites): t0..t3 on [-1, 1], three flux z's, two
    retardance z's (HWP then QWP), two angle z's (QWP then HWP), four
    beamsplitter z's (Th, Tv, Rh, Rv). Two qubits (33 sites): t0..t15,
    nine flux z's, four angle z's (QA, HA, QB, HB), eight beamsplitter z's
    (arm A then arm B).
    """
    sites: list[LatentSite] = []
    n_t = 4 if config.kind == "1q" else 16
    for i in range(n_t):
        sites.append(LatentSite(f"t{i}", -1.0, 1.0))
    n_flux = 3 if config.kind == "1q" else 9
    for i in range(n_flux):
        sites.append(LatentSite(f"zFlux{i}"))
    if config.kind == "1q":
        sites.extend(LatentSite(f"zEta{i}") for i in range(2))
        sites.extend(LatentSite(f"zWP{i}") for i in range(2))
        sites.extend(LatentSite(f"zPBS{i}") for i in range(4))
    else:
        sites.extend(LatentSite(f"zWP{i}") for i in range(4))
        sites.extend(LatentSite(f"zPBS{i}") for i in range(8))
    return tuple(sites)


def _truncnorm_value_dmu(mu: np.ndarray, observed: np.ndarray,
                         sigma: np.ndarray) -> tuple[float, np.ndarray]:
    """Zero-lower-truncated normal log density sum and its mean-gradient.

    log p(n | mu, sigma) = -((n - mu)/sigma)^2/2 - log sigma
                           - log(2 pi)/2 - log Phi(mu/sigma),
    with the log-CDF term keeping the density normalized as the modeled
    mean approaches zero. The gradient in mu is
    (n - mu)/sigma^2 - phi(mu/sigma) / (sigma Phi(mu/sigma)).
    """
    resid = (observed - mu) / sigma
    alpha = mu / sigma
    log_cdf = log_ndtr(alpha)
    value = float(np.sum(-0.5 * resid ** 2 - np.log(sigma)
                         - 0.5 * _LOG_2PI - log_cdf))
    log_pdf = -0.5 * alpha ** 2 - 0.5 * _LOG_2PI
    dmu = resid / sigma - np.exp(log_pdf - log_cdf) / sigma
    return value, dmu


def _quadratic_elements(t: ad.Var, q_tensor: np.ndarray) -> ad.Var:
    """Trace-normalized element views from t, with exact pullback.

    The unnormalized elements are quadratic forms u_k = t . Q_k . t whose
    first entries sum to Tr(T^dag T) = sum(t^2); the node value is u / tr.
    """
    t_val = t.value
    k, d = q_tensor.shape[0], q_tensor.shape[1]
    qt = (q_tensor.reshape(k * d, d) @ t_val).reshape(k, d)   # Q_k . t
    u = qt @ t_val
    tr = t_val @ t_val
    e = u / tr

    def pullback(g):
        return (2.0 / tr) * (g @ qt) - (2.0 * (g @ e) / tr) * t_val

    return ad.custom(e, (t, pullback))


def _fold_warn(value: np.ndarray, what: str) -> None:
    if np.any(value == 0.0):
        warnings.warn(
            f"latent evaluation hit a non-differentiable fold point in {what}; "
            "using subgradient 0", RuntimeWarning, stacklevel=3)


class TomographyPosterior:
    """Compiled log-posterior, gradient, and forward model for one config.

    Instances precompute everything that does not depend on the latent
    vector (flux estimates, combined sigmas, the trigonometric structure of
    the two-qubit probability) and are safe to evaluate concurrently.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.layout = latent_layout(config)
        self.dim = len(self.layout)
        self._names = tuple(site.name for site in self.layout)
        counts = config.counts
        if config.likelihood_sigma_mode == "max_counts":
            if counts.max() <= 0:
                raise ValueError("max_counts likelihood sigma needs a positive count")
            self._sigma_full = np.full(len(counts), np.sqrt(counts.max()))
        else:
            if np.any(counts <= 0):
                raise ValueError(
                    "per_measurement likelihood sigma needs strictly positive counts")
            self._sigma_full = np.sqrt(counts)

        est = (estimate_flux_1q(counts, config.instrument) if config.kind == "1q"
               else estimate_flux_2q(counts, config.instrument))
        flux = np.asarray(est.values, dtype=float)
        if np.any(flux < _FLUX_FLOOR):
            warnings.warn(
                "flux estimate below 1 clamped before use as a prior mean",
                RuntimeWarning, stacklevel=2)
            flux = np.maximum(flux, _FLUX_FLOOR)
        self._flux_mean = flux
        self._flux_scale = np.sqrt(flux.max())
        self._flux_idx = flux_expansion_indices(config.kind)

        n_t = 4 if config.kind == "1q" else 16
        self._n_t = n_t
        self._t_slice = slice(0, n_t)
        self._z_slice = slice(n_t, self.dim)
        self._n_z = self.dim - n_t
        # Flat prior on each t contributes log(1/2) inside the support.
        self._prior_const = (-0.5 * self._n_z * _LOG_2PI
                             + n_t * np.log(0.5))
        self._q_tensor = qstate.element_quadratic_tensor(1 if n_t == 4 else 2)

        if config.kind == "1q":
            self._prepare_1q()
        else:
            self._prepare_2q()

    # -- configuration-time structure ------------------------------------

    def _prepare_1q(self):
        s: Settings1Q = self.config.settings
        u: UncertaintySpec1Q = self.config.uncertainty
        inst: InstrumentParams1Q = self.config.instrument
        self._nominal = (s.eta_h, s.eta_q, s.theta_h, s.theta_q)
        # Angle-offset order matches the latent layout: zEta (H, Q) then
        # zWP (Q, H).
        self._angle_sigmas = np.array([u.eta_h, u.eta_q, u.theta_q, u.theta_h])
        self._comb_pbs = u.combined_pbs
        self._pbs_nominal = np.array([
            inst.t_h * inst.mu, inst.t_v * inst.mu,
            inst.r_h * inst.nu, inst.r_v * inst.nu])
        self._even = np.array([0, 2, 4])
        self._odd = np.array([1, 3, 5])
        self._obs_blocks = (self.config.counts[self._even],
                            self.config.counts[self._odd])
        self._sigma_blocks = (self._sigma_full[self._even],
                              self._sigma_full[self._odd])
        # zFlux(3) zEta(2: H, Q) zWP(2: Q, H) zPBS(4)
        base = self._n_t
        self._idx_flux = np.arange(base, base + 3)
        self._idx_angles = np.arange(base + 3, base + 7)
        self._idx_pbs = np.arange(base + 7, base + 11)
        self._build_1q_spectrum()

    def _probe_1q(self, e_rows: np.ndarray, angle_rows: np.ndarray) -> np.ndarray:
        """Batched closed-form probabilities at shared angle offsets.

        ``e_rows`` has shape (m, 4); ``angle_rows`` (m, 4) holds offsets in
        (eta_h, eta_q, theta_q, theta_h) order added on top of the nominal
        settings. Returns (m, n_rows).
        """
        nom_eh, nom_eq, nom_th, nom_tq = self._nominal
        eta_h = nom_eh + angle_rows[:, [0]]
        eta_q = nom_eq + angle_rows[:, [1]]
        theta_q = nom_tq + angle_rows[:, [2]]
        theta_h = nom_th + angle_rows[:, [3]]
        s: Settings1Q = self.config.settings
        return _prob_1q_expansion(
            e_rows[:, [0]], e_rows[:, [1]], e_rows[:, [2]], e_rows[:, [3]],
            eta_h, eta_q, theta_h, theta_q, s.h, s.v)

    # Offset-frequency grid: the expansion is a trigonometric polynomial in
    # the four shared angle offsets with integer frequencies up to 4, so a
    # 9-point DFT per axis recovers its exact spectrum.
    _SPECTRUM_N = 9

    def _build_1q_spectrum(self):
        """Extract P_j(e, offsets) = sum_w e . (A_w cos(w.offs) + B_w sin(w.offs)).

        The coefficients are read off numerically from a multidimensional
        DFT of the closed-form expansion over one period of the offsets (no
        transcription involved), then verified against the expansion at
        random probe points.
        """
        n = self._SPECTRUM_N
        n_rows = len(self.config.settings)
        grid = 2.0 * np.pi * np.arange(n) / n
        mesh = np.stack(np.meshgrid(grid, grid, grid, grid, indexing="ij"),
                        axis=-1).reshape(-1, 4)                    # (n^4, 4)
        values = np.empty((4, mesh.shape[0], n_rows))
        eye = np.eye(4)
        for k in range(4):
            values[k] = self._probe_1q(np.broadcast_to(eye[k], (mesh.shape[0], 4)),
                                       mesh)
        coeffs = np.fft.fftn(values.reshape(4, n, n, n, n, n_rows),
                             axes=(1, 2, 3, 4)) / float(n ** 4)
        amplitude = np.abs(coeffs).max(axis=(0, 5))
        keep = np.argwhere(amplitude > 1e-13 * amplitude.max())
        freq = np.fft.fftfreq(n, d=1.0 / n).astype(int)            # 0..4,-4..-1
        self._spec_w = freq[keep].astype(float)                    # (n_w, 4)
        picked = coeffs[:, keep[:, 0], keep[:, 1], keep[:, 2], keep[:, 3], :]
        # (4, n_w, n_rows) -> (n_w, n_rows, 4); conjugate pairs both kept.
        a = np.transpose(picked.real, (1, 2, 0))
        b = np.transpose(-picked.imag, (1, 2, 0))
        n_w = a.shape[0]
        self._spec_a = np.ascontiguousarray(a)
        self._spec_b = np.ascontiguousarray(b)
        self._spec_a2 = self._spec_a.reshape(n_w * n_rows, 4)
        self._spec_b2 = self._spec_b.reshape(n_w * n_rows, 4)
        self._spec_wsig = self._spec_w * self._angle_sigmas        # (n_w, 4)
        rng = np.random.default_rng(0)
        probe_e = rng.standard_normal((8, 4))
        probe_d = rng.uniform(-0.3, 0.3, (8, 4))
        exact = self._probe_1q(probe_e, probe_d)
        phases = probe_d @ self._spec_w.T                          # (8, n_w)
        fast = (np.einsum("pw,wjk,pk->pj", np.cos(phases), self._spec_a, probe_e)
                + np.einsum("pw,wjk,pk->pj", np.sin(phases), self._spec_b, probe_e))
        if not np.allclose(fast, exact, atol=1e-10):
            raise AssertionError("single-qubit spectral table failed self-check")

    def _spectral_prob(self, e: np.ndarray, z: np.ndarray):
        """Probabilities and trig factors for latent angle z-scores."""
        phases = self._spec_wsig @ z
        cw = np.cos(phases)
        sw = np.sin(phases)
        n_w = self._spec_w.shape[0]
        n_rows = len(self.config.settings)
        ae = (self._spec_a2 @ e).reshape(n_w, n_rows)
        be = (self._spec_b2 @ e).reshape(n_w, n_rows)
        prob = cw @ ae + sw @ be
        return prob, (cw, sw, ae, be)

    def _prepare_2q(self):
        s: Settings2Q = self.config.settings
        u: UncertaintySpec2Q = self.config.uncertainty
        inst: InstrumentParams2Q = self.config.instrument
        elem_matrix, angle_weights, flag_kinds, is_sin = two_qubit_term_arrays()
        self._elem_matrix = elem_matrix
        # Latent zWP order is (QA, HA, QB, HB); angle_weights columns are
        # (HA, HB, QA, QB).
        sigma = np.array([u.theta_qa, u.theta_ha, u.theta_qb, u.theta_hb])
        reorder = np.array([2, 0, 3, 1])  # zWP slot -> angle_weights column
        self._phase_weights = angle_weights[:, reorder] * sigma  # (n_terms, 4)
        nominal_args = (angle_weights @ np.stack(
            [s.theta_ha, s.theta_hb, s.theta_qa, s.theta_qb]))  # (n_terms, 36)
        da = s.h_a - s.v_a
        db = s.h_b - s.v_b
        sa = s.h_a + s.v_a
        sb = s.h_b + s.v_b
        flags = np.stack([da * db, da * sb, sa * db])[flag_kinds]  # (n_terms, 36)
        cos_c = np.cos(nominal_args) * flags
        sin_c = np.sin(nominal_args) * flags
        # cos(c+phi) = cos c cos phi - sin c sin phi;
        # sin(c+phi) = sin c cos phi + cos c sin phi.
        self._cos_mat = np.where(is_sin[:, None], sin_c, cos_c).T   # (36, n_terms)
        self._sin_mat = np.where(is_sin[:, None], cos_c, -sin_c).T  # (36, n_terms)
        self._comb_pbs = u.combined_pbs
        self._pbs_nominal = np.array([
            inst.t_ha * inst.mu_a, inst.t_va * inst.mu_a,
            inst.r_ha * inst.nu_a, inst.r_va * inst.nu_a,
            inst.t_hb * inst.mu_b, inst.t_vb * inst.mu_b,
            inst.r_hb * inst.nu_b, inst.r_vb * inst.nu_b])
        rows = np.arange(36).reshape(6, 6)
        self._rows_even = rows[0::2].ravel()
        self._rows_odd = rows[1::2].ravel()
        cols18 = np.arange(18).reshape(3, 6)
        self._cols_even = cols18[:, 0::2].ravel()
        self._cols_odd = cols18[:, 1::2].ravel()
        self._block_idx = (
            self._rows_even[self._cols_even], self._rows_even[self._cols_odd],
            self._rows_odd[self._cols_even], self._rows_odd[self._cols_odd])
        self._obs_blocks = tuple(self.config.counts[i] for i in self._block_idx)
        self._sigma_blocks = tuple(self._sigma_full[i] for i in self._block_idx)
        base = self._n_t
        self._idx_flux = np.arange(base, base + 9)
        self._idx_wp = np.arange(base + 9, base + 13)
        self._idx_pbs = np.arange(base + 13, base + 21)

    # -- evaluation -------------------------------------------------------

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"latent vector must have shape ({self.dim},), "
                             f"got {x.shape}")
        return x

    def in_support(self, x) -> bool:
        t = np.asarray(x, dtype=float)[self._t_slice]
        return bool(np.all(np.abs(t) <= 1.0))

    def _folded_node(self, x_var: ad.Var, idx: np.ndarray, scale: float,
                     nominal: np.ndarray, gather: np.ndarray | None,
                     label: str) -> ad.Var:
        """Fold |nominal + scale * z| (optionally gathered) as one node."""
        raw = nominal + scale * x_var.value[idx]
        _fold_warn(raw, label)
        sign = np.sign(raw)
        folded = np.abs(raw)
        out = folded if gather is None else folded[gather]
        dim, n = self.dim, len(nominal)

        def pullback(g):
            if gather is None:
                acc = g
            else:
                acc = np.zeros(n)
                np.add.at(acc, gather, g)
            full = np.zeros(dim)
            full[idx] = acc * sign * scale
            return full

        return ad.custom(out, (x_var, pullback))

    def _forward(self, x: np.ndarray):
        """Tape forward pass: (x_var, mean-count blocks, block tape node)."""
        x_var = ad.var(x)
        t = ad.take(x_var, np.arange(self._n_t))
        elements = _quadratic_elements(t, self._q_tensor)
        flux = self._folded_node(x_var, self._idx_flux, self._flux_scale,
                                 self._flux_mean, self._flux_idx, "the flux prior")
        pbs = self._folded_node(x_var, self._idx_pbs, self._comb_pbs,
                                self._pbs_nominal, None,
                                "the beamsplitter coefficients")
        if self.config.kind == "1q":
            prob = self._prob_1q(x_var, elements)
        else:
            prob = self._prob_2q(x_var, elements)
        y = prob * flux
        return x_var, y, pbs

    def _prob_1q(self, x_var: ad.Var, elements: ad.Var) -> ad.Var:
        # Spectral form of the closed-form expansion: exact value plus exact
        # derivatives in the four shared angle offsets and the element
        # views, in a handful of small matrix products.
        z = x_var.value[self._idx_angles]
        e = elements.value
        prob, (cw, sw, ae, be) = self._spectral_prob(e, z)
        idx, dim = self._idx_angles, self.dim

        def pull_x(g):
            d_phase = -sw * (ae @ g) + cw * (be @ g)
            full = np.zeros(dim)
            full[idx] = self._spec_wsig.T @ d_phase
            return full

        def pull_e(g):
            w1 = (cw[:, None] * g[None, :]).ravel()
            w2 = (sw[:, None] * g[None, :]).ravel()
            return w1 @ self._spec_a2 + w2 @ self._spec_b2

        return ad.custom(prob, (x_var, pull_x), (elements, pull_e))

    def _prob_2q(self, x_var: ad.Var, elements: ad.Var) -> ad.Var:
        e = elements.value
        z = x_var.value[self._idx_wp]
        coef = self._elem_matrix @ e
        phase = self._phase_weights @ z
        cw = np.cos(phase)
        sw = np.sin(phase)
        prob = (8.0 * e[:4].sum()
                + self._cos_mat @ (coef * cw)
                + self._sin_mat @ (coef * sw)) / 32.0
        idx, dim = self._idx_wp, self.dim

        def pull_x(g):
            du = self._cos_mat.T @ g
            dv = self._sin_mat.T @ g
            d_phase = coef * (cw * dv - sw * du) / 32.0
            full = np.zeros(dim)
            full[idx] = self._phase_weights.T @ d_phase
            return full

        def pull_e(g):
            du = self._cos_mat.T @ g
            dv = self._sin_mat.T @ g
            d_e = self._elem_matrix.T @ (cw * du + sw * dv) / 32.0
            d_e[:4] += 8.0 * g.sum() / 32.0
            return d_e

        return ad.custom(prob, (x_var, pull_x), (elements, pull_e))

    def _count_blocks(self, y: np.ndarray, pbs: np.ndarray) -> list[np.ndarray]:
        """Mean counts per detector block from pre-crosstalk counts."""
        if self.config.kind == "1q":
            y_e, y_o = y[self._even], y[self._odd]
            return [pbs[0] * y_e + pbs[1] * y_o, pbs[2] * y_e + pbs[3] * y_o]
        y_e, y_o = y[self._rows_even], y[self._rows_odd]
        z_e = pbs[0] * y_e + pbs[1] * y_o
        z_o = pbs[2] * y_e + pbs[3] * y_o
        blocks = []
        for z in (z_e, z_o):
            ce, co = z[self._cols_even], z[self._cols_odd]
            blocks.append(pbs[4] * ce + pbs[5] * co)
            blocks.append(pbs[6] * ce + pbs[7] * co)
        return blocks

    def _likelihood_node(self, y: ad.Var, pbs: ad.Var) -> ad.Var:
        """Crosstalk mixing plus truncated-normal log likelihood, fused."""
        y_val, pbs_val = y.value, pbs.value
        blocks = self._count_blocks(y_val, pbs_val)
        value = 0.0
        dmu = []
        for mu, obs, sigma in zip(blocks, self._obs_blocks, self._sigma_blocks):
            v, d = _truncnorm_value_dmu(mu, obs, sigma)
            value += v
            dmu.append(d)

        if self.config.kind == "1q":
            y_e, y_o = y_val[self._even], y_val[self._odd]

            def pull_y(g):
                out = np.zeros_like(y_val)
                out[self._even] = pbs_val[0] * dmu[0] + pbs_val[2] * dmu[1]
                out[self._odd] = pbs_val[1] * dmu[0] + pbs_val[3] * dmu[1]
                return g * out

            def pull_pbs(g):
                return g * np.array([dmu[0] @ y_e, dmu[0] @ y_o,
                                     dmu[1] @ y_e, dmu[1] @ y_o])
        else:
            y_e, y_o = y_val[self._rows_even], y_val[self._rows_odd]
            z_e = pbs_val[0] * y_e + pbs_val[1] * y_o
            z_o = pbs_val[2] * y_e + pbs_val[3] * y_o

            def _dz(block_a, block_b):
                out = np.zeros(18)
                out[self._cols_even] = pbs_val[4] * block_a + pbs_val[6] * block_b
                out[self._cols_odd] = pbs_val[5] * block_a + pbs_val[7] * block_b
                return out

            def pull_y(g):
                dz_e = _dz(dmu[0], dmu[1])
                dz_o = _dz(dmu[2], dmu[3])
                out = np.zeros_like(y_val)
                out[self._rows_even] = pbs_val[0] * dz_e + pbs_val[2] * dz_o
                out[self._rows_odd] = pbs_val[1] * dz_e + pbs_val[3] * dz_o
                return g * out

            def pull_pbs(g):
                dz_e = _dz(dmu[0], dmu[1])
                dz_o = _dz(dmu[2], dmu[3])
                zee, zeo = z_e[self._cols_even], z_e[self._cols_odd]
                zoe, zoo = z_o[self._cols_even], z_o[self._cols_odd]
                return g * np.array([
                    dz_e @ y_e, dz_e @ y_o, dz_o @ y_e, dz_o @ y_o,
                    dmu[0] @ zee + dmu[2] @ zoe, dmu[0] @ zeo + dmu[2] @ zoo,
                    dmu[1] @ zee + dmu[3] @ zoe, dmu[1] @ zeo + dmu[3] @ zoo,
                ])

        return ad.custom(value, (y, pull_y), (pbs, pull_pbs))

    def log_posterior(self, x) -> float:
        """Unnormalized log density; -inf when any t leaves [-1, 1]."""
        x = self._check_x(x)
        if not self.in_support(x):
            return -np.inf
        value, _ = self._logp_tape(x)
        return value

    def _logp_tape(self, x: np.ndarray):
        x_var, y, pbs = self._forward(x)
        z = x[self._z_slice]
        prior = ad.custom(
            self._prior_const - 0.5 * float(z @ z),
            (x_var, lambda g, z_full=x: g * np.concatenate(
                [np.zeros(self._n_t), -z_full[self._z_slice]])),
        )
        logp = prior + self._likelihood_node(y, pbs)
        return float(logp.value), (logp, x_var)

    def logp_and_grad(self, x) -> tuple[float, np.ndarray]:
        """Log density and its gradient in one pass."""
        x = self._check_x(x)
        if not self.in_support(x):
            raise ValueError("gradient requested outside the uniform support")
        value, (node, x_var) = self._logp_tape(x)
        (grad,) = ad.backward(node, [x_var])
        return value, grad

    def log_posterior_gradient(self, x) -> np.ndarray:
        return self.logp_and_grad(x)[1]

    def mean_counts(self, x) -> np.ndarray:
        """Modeled mean counts in measurement order for a latent vector."""
        x = self._check_x(x)
        _, y, pbs = self._forward(x)
        blocks = self._count_blocks(y.value, pbs.value)
        out = np.empty(len(self.config.counts))
        if self.config.kind == "1q":
            out[self._even] = blocks[0]
            out[self._odd] = blocks[1]
        else:
            for idx, block in zip(self._block_idx, blocks):
                out[idx] = block
        return out

    def derived(self, x) -> dict[str, float]:
        """Deterministic derived quantities recorded alongside each sample."""
        x = self._check_x(x)
        t = x[self._t_slice]
        if self.config.kind == "1q":
            rho = qstate.rho_from_t_1q(t)
            e = qstate.elements_1q(rho)
            out = dict(zip(qstate.ELEMENT_NAMES_1Q, e))
            out.update(zip(qstate.STOKES_NAMES_1Q, qstate.stokes_1q(rho)))
        else:
            rho = qstate.rho_from_t_2q(t)
            e = qstate.elements_2q(rho)
            out = dict(zip(qstate.ELEMENT_NAMES_2Q, e))
            stokes = qstate.stokes_joint_from_elements(e).ravel()
            out.update(zip(qstate.STOKES_NAMES_2Q, stokes))
        return {k: float(v) for k, v in out.items()}

    @property
    def derived_names(self) -> tuple[str, ...]:
        if self.config.kind == "1q":
            return qstate.ELEMENT_NAMES_1Q + qstate.STOKES_NAMES_1Q
        return qstate.ELEMENT_NAMES_2Q + qstate.STOKES_NAMES_2Q


def posterior_for(config: ExperimentConfig) -> TomographyPosterior:
    """Compiled posterior for a config, cached on the config object."""
    cached = getattr(config, "_compiled_posterior", None)
    if cached is None:
        cached = TomographyPosterior(config)
        config._compiled_posterior = cached
    return cached


def log_posterior(config: ExperimentConfig, x) -> float:
    """Unnormalized log-posterior density of a latent vector."""
    return posterior_for(config).log_posterior(x)


def log_posterior_gradient(config: ExperimentConfig, x) -> np.ndarray:
    """Gradient of :func:`log_posterior` with respect to the latent vector."""
    return posterior_for(config).log_posterior_gradient(x)


def derived_quantities(config: ExperimentConfig, x) -> dict[str, float]:
    """Element views and Stokes parameters implied by a latent vector."""
    return posterior_for(config).derived(x)

"""Posterior summaries: means, intervals, state assembly, predictive checks."""

import numpy as np
import pytest

from qtomo.model import posterior_for
from qtomo.posterior import (
    bme,
    hdi,
    hdi_multimodal,
    ppc,
    summarize_state,
)
from qtomo.qstate import validate_density_matrix
from qtomo.sampler import Trace

from conftest import make_config_1q
from oracles import hdi_oracle, report


def trace_from_latents(latents, names, chains=2):
    latents = np.asarray(latents)
    per = latents.shape[0] // chains
    samples = {name: latents[:chains * per, i].reshape(chains, per)
               for i, name in enumerate(names)}
    return Trace(names=tuple(names), samples=samples,
                 accept_stat=np.zeros(chains), step_size=np.zeros(chains),
                 divergences=np.zeros(chains, dtype=int), seed=0,
                 algorithm="nuts")


class TestBme:
    def test_constant(self):
        assert bme(np.full(10, 3.25)) == 3.25

    def test_balanced_binary(self):
        assert bme(np.array([0.0, 1.0] * 50)) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bme(np.array([]))


class TestHdi:
    def test_uniform_width(self):
        rng = np.random.default_rng(0)
        interval = hdi(rng.uniform(0, 1, 100_000), 0.95)
        assert abs(interval.width - 0.95) < 0.01

    def test_point_mass(self):
        interval = hdi(np.full(100, 2.5), 0.9)
        assert interval.lo == interval.hi == 2.5

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            hdi(np.arange(49), 0.9)

    def test_invalid_prob_rejected(self):
        with pytest.raises(ValueError):
            hdi(np.arange(100), 1.0)

    def test_matches_exhaustive_scan(self, oracle_log):
        rng = np.random.default_rng(1)
        for case in range(20):
            samples = rng.standard_normal(rng.integers(60, 400))
            prob = rng.uniform(0.5, 0.99)
            expected = hdi_oracle(samples, prob)
            got = hdi(samples, prob)
            assert (got.lo, got.hi) == expected
            if case < 3:
                oracle_log.append(report(f"hdi-{case}", (len(samples), prob),
                                         expected[0], got.lo))

    def test_width_monotone_in_prob(self):
        rng = np.random.default_rng(2)
        samples = rng.standard_normal(5000)
        widths = [hdi(samples, p).width for p in (0.5, 0.8, 0.9, 0.95, 0.99)]
        assert all(a <= b for a, b in zip(widths, widths[1:]))

    def test_symmetric_for_normal_samples(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal(100_000)
        interval = hdi(samples, 0.95)
        median = np.median(samples)
        se = 2.0 * samples.std() / np.sqrt(samples.size * 0.05)
        assert abs((interval.hi - median) - (median - interval.lo)) < 4 * se + 0.05


class TestHdiMultimodal:
    def test_bimodal_splits(self):
        rng = np.random.default_rng(4)
        samples = np.concatenate([rng.normal(-5, 0.3, 4000),
                                  rng.normal(5, 0.3, 4000)])
        intervals = hdi_multimodal(samples, 0.9)
        assert len(intervals) == 2
        assert intervals[0].hi < 0 < intervals[1].lo

    def test_unimodal_single_interval(self):
        rng = np.random.default_rng(5)
        intervals = hdi_multimodal(rng.standard_normal(5000), 0.9)
        assert len(intervals) == 1
        assert intervals[0].lo < 0 < intervals[0].hi

    def test_point_mass(self):
        intervals = hdi_multimodal(np.full(100, 1.5), 0.9)
        assert intervals == (pytest.approx(intervals[0]),)
        assert intervals[0].lo == intervals[0].hi == 1.5


class TestSummarizeState:
    def _degenerate_trace(self, cfg, x):
        post = posterior_for(cfg)
        latents = np.tile(x, (200, 1))
        trace = trace_from_latents(latents, [s.name for s in post.layout])
        derived_names = post.derived_names
        values = post.derived(x)
        trace.derived = {n: np.full((2, 100), values[n]) for n in derived_names}
        return trace

    def test_degenerate_trace(self):
        cfg = make_config_1q()
        x = np.zeros(15)
        x[:4] = [0.9, 0.1, -0.2, 0.3]
        trace = self._degenerate_trace(cfg, x)
        summary = summarize_state(trace, cfg)
        from qtomo.qstate import rho_from_t_1q
        np.testing.assert_allclose(summary.bme_rho, rho_from_t_1q(x[:4]),
                                   atol=1e-12)
        for q in summary.quantities.values():
            assert q.hdi.width == 0.0

    def test_bme_matrix_is_physical(self):
        cfg = make_config_1q()
        post = posterior_for(cfg)
        rng = np.random.default_rng(6)
        latents = np.concatenate([rng.uniform(-0.9, 0.9, (300, 4)),
                                  rng.standard_normal((300, 11)) * 0.3], axis=1)
        trace = trace_from_latents(latents, [s.name for s in post.layout])
        from qtomo.cli import attach_derived
        attach_derived(trace, cfg)
        summary = summarize_state(trace, cfg)
        validate_density_matrix(summary.bme_rho, dim=2)
        for name, q in summary.quantities.items():
            assert q.hdi.lo <= q.bme <= q.hdi.hi, name

    def test_missing_derived_rejected(self):
        cfg = make_config_1q()
        post = posterior_for(cfg)
        latents = np.zeros((100, 15))
        latents[:, 0] = 0.5
        trace = trace_from_latents(latents, [s.name for s in post.layout])
        with pytest.raises(ValueError):
            summarize_state(trace, cfg)


class TestPpc:
    def test_zero_noise_synthetic_consistency(self):
        # Data generated at the model's own mean counts sit inside the
        # replicate distributions.
        cfg = make_config_1q()
        post = posterior_for(cfg)
        rng = np.random.default_rng(7)
        x = np.concatenate([[0.95, 0.02, -0.03, 0.2], np.zeros(11)])
        mu = post.mean_counts(x)
        counts = np.round(mu)
        cfg2 = make_config_1q(counts=counts)
        post2 = posterior_for(cfg2)
        latents = np.tile(x, (400, 1)) + np.concatenate(
            [rng.uniform(-0.01, 0.01, (400, 4)),
             rng.standard_normal((400, 11)) * 0.05], axis=1)
        trace = trace_from_latents(latents, [s.name for s in post2.layout])
        result = ppc(trace, cfg2, seed=3, budget=300)
        assert np.all(result.tail_prob > 0.01)
        assert np.all(result.tail_prob < 0.99)

    def test_degenerate_trace_spread_is_observation_noise(self):
        cfg = make_config_1q()
        post = posterior_for(cfg)
        x = np.concatenate([[0.9, 0.0, 0.0, 0.3], np.zeros(11)])
        latents = np.tile(x, (100, 1))
        trace = trace_from_latents(latents, [s.name for s in post.layout])
        result = ppc(trace, cfg, replicates_per_sample=20, seed=1, budget=100)
        sigma = np.sqrt(cfg.counts.max())
        mu = post.mean_counts(x)
        # Far from the truncation boundary the replicate spread approaches
        # the observation sigma.
        far = mu > 3 * sigma
        spread = result.replicates.std(axis=0)
        assert np.all(np.abs(spread[far] - sigma) < 0.15 * sigma)

    def test_replicates_shape_and_determinism(self):
        cfg = make_config_1q()
        post = posterior_for(cfg)
        rng = np.random.default_rng(8)
        latents = np.concatenate([rng.uniform(-0.5, 0.5, (120, 4)),
                                  rng.standard_normal((120, 11)) * 0.2], axis=1)
        trace = trace_from_latents(latents, [s.name for s in post.layout])
        a = ppc(trace, cfg, seed=11, budget=50)
        b = ppc(trace, cfg, seed=11, budget=50)
        np.testing.assert_array_equal(a.replicates, b.replicates)
        assert a.replicates.shape[1] == 6

"""Crosstalk matrices and pseudoinverse flux estimation."""

import numpy as np
import pytest

from qtomo.crosstalk import (
    FLUX_GROUPS_2Q,
    InstrumentParams1Q,
    InstrumentParams2Q,
    crosstalk_1q,
    crosstalk_2q,
    estimate_flux_1q,
    estimate_flux_2q,
    expand_flux,
)
from qtomo.linalg import kron
from qtomo.optics import probs_1q_direct, probs_2q_direct, settings_table
from qtomo.qstate import rho_from_t_1q, rho_from_t_2q

from oracles import report

IDEAL_1Q = InstrumentParams1Q(mu=1, nu=1, t_h=1, t_v=0, r_h=0, r_v=1)
IDEAL_2Q = InstrumentParams2Q(mu_a=1, nu_a=1, t_ha=1, t_va=0, r_ha=0, r_va=1,
                              mu_b=1, nu_b=1, t_hb=1, t_vb=0, r_hb=0, r_vb=1)
PAPER_1Q = InstrumentParams1Q(mu=0.42, nu=0.75, t_h=0.973, t_v=0.027,
                              r_h=0.013, r_v=0.987)


def random_params_1q(rng) -> InstrumentParams1Q:
    return InstrumentParams1Q(
        mu=rng.uniform(0.3, 1.0), nu=rng.uniform(0.3, 1.0),
        t_h=rng.uniform(0.9, 1.0), t_v=rng.uniform(0.0, 0.1),
        r_h=rng.uniform(0.0, 0.1), r_v=rng.uniform(0.9, 1.0))


def random_params_2q(rng) -> InstrumentParams2Q:
    a = random_params_1q(rng)
    b = random_params_1q(rng)
    return InstrumentParams2Q(
        mu_a=a.mu, nu_a=a.nu, t_ha=a.t_h, t_va=a.t_v, r_ha=a.r_h, r_va=a.r_v,
        mu_b=b.mu, nu_b=b.nu, t_hb=b.t_h, t_vb=b.t_v, r_hb=b.r_h, r_vb=b.r_v)


class TestCrosstalkMatrices:
    def test_ideal_is_identity(self):
        np.testing.assert_array_equal(crosstalk_1q(IDEAL_1Q), np.eye(6))
        np.testing.assert_array_equal(crosstalk_2q(IDEAL_2Q), np.eye(36))

    def test_paper_values_block(self, oracle_log):
        block = crosstalk_1q(PAPER_1Q)[:2, :2]
        expected = np.array([[0.40866, 0.01134], [0.00975, 0.74025]])
        np.testing.assert_allclose(block, expected, atol=1e-12)
        oracle_log.append(report("crosstalk-paper-block", PAPER_1Q,
                                 expected[0, 0], block[0, 0]))

    def test_structure_is_kron(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            p = random_params_1q(rng)
            np.testing.assert_array_equal(crosstalk_1q(p),
                                          kron(np.eye(3), p.pbs_matrix()))
        p2 = random_params_2q(rng)
        np.testing.assert_array_equal(
            crosstalk_2q(p2),
            kron(kron(np.eye(3), p2.arm("a").pbs_matrix()),
                 kron(np.eye(3), p2.arm("b").pbs_matrix())))

    def test_2q_corner_entry(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            p = random_params_2q(rng)
            assert crosstalk_2q(p)[0, 0] == pytest.approx(
                p.mu_a * p.t_ha * p.mu_b * p.t_hb, abs=1e-15)

    def test_nonnegative_and_row_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = random_params_2q(rng)
            mat = crosstalk_2q(p)
            assert np.all(mat >= 0.0)
            bound = (max(p.mu_a, p.nu_a) * max(p.mu_b, p.nu_b)) * (1 + 1e-12)
            assert np.all(mat.sum(axis=1) <= 2 * bound)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            InstrumentParams1Q(mu=1.2, nu=1, t_h=1, t_v=0, r_h=0, r_v=1)


class TestFluxEstimation1Q:
    def test_identity_crosstalk(self):
        est = estimate_flux_1q(np.full(6, 10.0), IDEAL_1Q)
        np.testing.assert_allclose(est.values, [20.0, 20.0, 20.0], atol=1e-12)

    def test_forward_inverse_roundtrip(self):
        rng = np.random.default_rng(4)
        settings = settings_table("liquid_crystal")
        for _ in range(100):
            p = random_params_1q(rng)
            rho = rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-3)
            flux = rng.uniform(100, 5000, 3)
            probs = probs_1q_direct(rho, settings)
            counts = crosstalk_1q(p) @ (probs * expand_flux(flux))
            est = estimate_flux_1q(counts, p)
            np.testing.assert_allclose(est.values, flux, rtol=1e-9, atol=1e-9)

    def test_paper_counts_positive(self):
        est = estimate_flux_1q(np.array([2518, 123, 1335, 2291, 1234, 2314]),
                               PAPER_1Q)
        assert np.all(est.values > 0)
        assert len(est) == 3

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            estimate_flux_1q(np.array([-1, 0, 0, 0, 0, 0]), IDEAL_1Q)


class TestFluxEstimation2Q:
    def test_identity_crosstalk(self):
        est = estimate_flux_2q(np.full(36, 10.0), IDEAL_2Q)
        np.testing.assert_allclose(est.values, np.full(9, 40.0), atol=1e-9)

    def test_grouping_matches_table(self):
        # A count vector that is 1 on one group and 0 elsewhere must land
        # in exactly that group.
        for g, idx in enumerate(FLUX_GROUPS_2Q):
            counts = np.zeros(36)
            counts[list(idx)] = 1.0
            est = estimate_flux_2q(counts, IDEAL_2Q)
            expected = np.zeros(9)
            expected[g] = 4.0
            np.testing.assert_allclose(est.values, expected, atol=1e-9)

    def test_forward_inverse_roundtrip(self):
        rng = np.random.default_rng(5)
        settings = settings_table("two_qubit")
        for _ in range(30):
            p = random_params_2q(rng)
            rho = rho_from_t_2q(rng.uniform(-1, 1, 16))
            flux = np.round(rng.uniform(100, 5000, 9))
            probs = probs_2q_direct(rho, settings)
            counts = crosstalk_2q(p) @ (probs * expand_flux(flux))
            est = estimate_flux_2q(counts, p)
            np.testing.assert_allclose(est.values, flux, atol=0.5)
            np.testing.assert_allclose(est.raw, flux, atol=1e-6)

    def test_rounding(self):
        counts = np.full(36, 10.1)
        est = estimate_flux_2q(counts, IDEAL_2Q)
        assert np.all(est.values == np.round(est.raw))


class TestExpandFlux:
    def test_1q_expansion(self):
        np.testing.assert_array_equal(expand_flux(np.array([1.0, 2.0, 3.0])),
                                      [1, 1, 2, 2, 3, 3])

    def test_2q_expansion(self):
        out = expand_flux(np.arange(9.0))
        expected = np.array([0, 0, 1, 1, 2, 2] * 2 + [3, 3, 4, 4, 5, 5] * 2
                            + [6, 6, 7, 7, 8, 8] * 2, dtype=float)
        np.testing.assert_array_equal(out, expected)
        assert out[14] == 4.0

    def test_constant_groups(self):
        np.testing.assert_array_equal(expand_flux(np.full(9, 7.0)), np.full(36, 7.0))

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            expand_flux(np.ones(4))

    def test_expansion_consistent_with_groups(self):
        # Each measurement row must use the flux of its own basis-pair group.
        out = expand_flux(np.arange(9.0))
        for g, idx in enumerate(FLUX_GROUPS_2Q):
            assert np.all(out[list(idx)] == g)

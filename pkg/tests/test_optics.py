"""Waveplate operators, settings tables, and the two probability routes."""

import numpy as np
import pytest

from qtomo.optics import (
    Settings2Q,
    awp,
    prob_1q_closed,
    prob_1q_direct,
    prob_2q_closed,
    prob_2q_direct,
    probs_1q_closed,
    probs_1q_direct,
    probs_2q_closed,
    probs_2q_direct,
    rotation_ops,
    settings_table,
)
from qtomo.qstate import (
    KET_D,
    KET_H,
    KET_L,
    elements_1q,
    elements_2q,
    rho_from_t_1q,
    rho_from_t_2q,
)

from oracles import prob_oracle_1q, prob_oracle_2q, report


def overlap_mod(a, b):
    """|<a|b>| for unit vectors; 1 means equal up to global phase."""
    return abs(np.vdot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestAwp:
    def test_zero_retardance_is_identity(self):
        rng = np.random.default_rng(0)
        for theta in rng.uniform(-np.pi, np.pi, 10):
            u = awp(0.0, theta)
            np.testing.assert_allclose(u, np.eye(2), atol=1e-12)

    def test_unitary(self):
        rng = np.random.default_rng(1)
        for eta, theta in rng.uniform(-np.pi, np.pi, (50, 2)):
            u = awp(eta, theta)
            np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)

    def test_half_and_quarter_wave_specializations(self):
        rng = np.random.default_rng(2)
        for theta in rng.uniform(-np.pi, np.pi, 10):
            q, h, _ = rotation_ops(theta, theta)
            np.testing.assert_allclose(awp(np.pi, theta), h, atol=1e-12)
            np.testing.assert_allclose(awp(np.pi / 2, theta), q, atol=1e-12)

    def test_maps_diagonal_to_horizontal(self):
        # H = U(pi/4, pi/8) D with U built from the two waveplates.
        u = awp(np.pi, np.pi / 8) @ awp(np.pi / 2, np.pi / 4)
        assert overlap_mod(u @ KET_D, KET_H) == pytest.approx(1.0, abs=1e-12)


class TestRotationOps:
    def test_zero_angles_fix_horizontal(self):
        _, _, u = rotation_ops(0.0, 0.0)
        assert overlap_mod(u @ KET_H, KET_H) == pytest.approx(1.0, abs=1e-12)

    def test_maps_left_circular_to_horizontal(self):
        _, _, u = rotation_ops(np.pi / 4, 0.0)
        assert overlap_mod(u @ KET_L, KET_H) == pytest.approx(1.0, abs=1e-12)

    def test_matches_explicit_entries(self):
        rng = np.random.default_rng(3)
        for tq, th in rng.uniform(-np.pi, np.pi, (10, 2)):
            _, _, u = rotation_ops(tq, th)
            explicit = (1 / np.sqrt(2)) * np.array([
                [-1j * np.cos(2 * th) - np.cos(2 * (th - tq)),
                 -1j * np.sin(2 * th) + np.sin(2 * (th - tq))],
                [-1j * np.sin(2 * th) - np.sin(2 * (th - tq)),
                 1j * np.cos(2 * th) - np.cos(2 * (th - tq))],
            ])
            np.testing.assert_allclose(u, explicit, atol=1e-12)

    def test_awp_equivalence_up_to_phase(self):
        rng = np.random.default_rng(4)
        for tq, th in rng.uniform(-np.pi, np.pi, (10, 2)):
            _, _, u = rotation_ops(tq, th)
            w = awp(np.pi, th) @ awp(np.pi / 2, tq)
            ratio = w @ np.linalg.inv(u)
            np.testing.assert_allclose(ratio / ratio[0, 0], np.eye(2), atol=1e-12)


class TestSettingsTables:
    def test_liquid_crystal_rows(self):
        s = settings_table("liquid_crystal")
        assert len(s) == 6
        # N_L row: no half-wave retardance, quarter-wave on the QWP slot.
        row = s.row(4)
        assert (row.eta_h, row.eta_q) == (0.0, np.pi / 2)
        assert (row.theta_h, row.theta_q) == (np.pi / 8, np.pi / 4)
        assert (row.h, row.v) == (1.0, 0.0)

    def test_standard_waveplate_rows(self):
        s = settings_table("standard_waveplate")
        row = s.row(2)  # N_D
        assert (row.eta_h, row.eta_q) == (np.pi, np.pi / 2)
        assert (row.theta_h, row.theta_q) == (np.pi / 8, np.pi / 4)
        assert (row.h, row.v) == (1.0, 0.0)

    def test_two_qubit_layout(self):
        s = settings_table("two_qubit")
        assert len(s) == 36
        row0 = s.row(0)
        assert row0 == (0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0)
        # Arm A repeats per block of six, arm B cycles within each block.
        arm = settings_table("liquid_crystal")  # reuse row list length only
        for r in range(36):
            row = s.row(r)
            a_src = s.row((r // 6) * 6)
            b_src = s.row(r % 6)
            assert (row.theta_qa, row.theta_ha, row.h_a, row.v_a) == (
                a_src.theta_qa, a_src.theta_ha, a_src.h_a, a_src.v_a)
            assert (row.theta_qb, row.theta_hb, row.h_b, row.v_b) == (
                b_src.theta_qb, b_src.theta_hb, b_src.h_b, b_src.v_b)
        assert len(arm) == 6

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            settings_table("circular_only")

    def test_flag_validation(self):
        with pytest.raises(ValueError):
            Settings2Q(theta_qa=[0.0], theta_ha=[0.0], theta_qb=[0.0],
                       theta_hb=[0.0], h_a=[1.0], v_a=[1.0], h_b=[1.0],
                       v_b=[0.0])


class TestProb1Q:
    def test_maximally_mixed(self):
        s = settings_table("liquid_crystal")
        probs = probs_1q_direct(np.eye(2) / 2, s)
        np.testing.assert_allclose(probs, 0.5, atol=1e-12)

    def test_aligned_projector(self):
        s = settings_table("liquid_crystal")
        rho = np.diag([1.0, 0.0]).astype(complex)
        probs = probs_1q_direct(rho, s)
        np.testing.assert_allclose(probs[:2], [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(probs[2:], 0.5, atol=1e-12)

    def test_closed_equals_direct_on_tables(self):
        rng = np.random.default_rng(5)
        for table in ("liquid_crystal", "standard_waveplate"):
            s = settings_table(table)
            for _ in range(20):
                rho = rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-3)
                a, b, re_c, im_c = elements_1q(rho)
                np.testing.assert_allclose(
                    probs_1q_closed(a, b, re_c, im_c, s),
                    probs_1q_direct(rho, s), atol=1e-12)

    def test_closed_equals_direct_arbitrary_settings(self):
        from qtomo.optics import Settings1Q
        rng = np.random.default_rng(6)
        for _ in range(300):
            rho = rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-3)
            a, b, re_c, im_c = elements_1q(rho)
            h = float(rng.integers(0, 2))
            s = Settings1Q(eta_h=[rng.uniform(-np.pi, np.pi)],
                           eta_q=[rng.uniform(-np.pi, np.pi)],
                           theta_h=[rng.uniform(-np.pi, np.pi)],
                           theta_q=[rng.uniform(-np.pi, np.pi)],
                           h=[h], v=[1.0 - h])
            row = s.row(0)
            np.testing.assert_allclose(prob_1q_closed(a, b, re_c, im_c, row),
                                       prob_1q_direct(rho, row), atol=1e-12)

    def test_against_trace_oracle(self, oracle_log):
        rng = np.random.default_rng(7)
        s = settings_table("liquid_crystal")
        for case in range(30):
            rho = rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-3)
            i = int(rng.integers(0, 6))
            row = s.row(i)
            expected = prob_oracle_1q(rho, row.eta_h, row.eta_q, row.theta_h,
                                      row.theta_q, row.h, row.v)
            got = prob_1q_direct(rho, row)
            assert got == pytest.approx(expected, abs=1e-12)
            if case < 3:
                oracle_log.append(report(f"prob1q-{case}", (i,), expected, got))

    def test_completeness(self):
        rng = np.random.default_rng(8)
        s = settings_table("standard_waveplate")
        for _ in range(50):
            rho = rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-3)
            probs = probs_1q_direct(rho, s)
            for pair in (probs[:2], probs[2:4], probs[4:]):
                assert pair.sum() == pytest.approx(1.0, abs=1e-12)

    def test_tables_give_equal_projections(self):
        rng = np.random.default_rng(9)
        lc = settings_table("liquid_crystal")
        sw = settings_table("standard_waveplate")
        for _ in range(30):
            rho = rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-3)
            np.testing.assert_allclose(probs_1q_direct(rho, lc),
                                       probs_1q_direct(rho, sw), atol=1e-12)

    def test_probabilities_bounded(self):
        rng = np.random.default_rng(10)
        s = settings_table("liquid_crystal")
        for _ in range(500):
            probs = probs_1q_direct(rho_from_t_1q(rng.uniform(-1, 1, 4) + 1e-4), s)
            assert np.all(probs >= -1e-12) and np.all(probs <= 1 + 1e-12)


def bell_singlet_rho():
    return 0.5 * np.array([
        [0, 0, 0, 0], [0, 1, -1, 0], [0, -1, 1, 0], [0, 0, 0, 0]],
        dtype=complex)


class TestProb2Q:
    def test_maximally_mixed(self):
        s = settings_table("two_qubit")
        np.testing.assert_allclose(probs_2q_direct(np.eye(4) / 4, s), 0.25,
                                   atol=1e-12)

    def test_singlet_anticorrelation(self):
        s = settings_table("two_qubit")
        rho = bell_singlet_rho()
        probs = probs_2q_direct(rho, s)
        assert probs[0] == pytest.approx(0.0, abs=1e-12)   # HH
        assert probs[1] == pytest.approx(0.5, abs=1e-12)   # HV
        # DD row: arm A row 2, arm B row 2 -> flat index 14.
        assert probs[14] == pytest.approx(0.0, abs=1e-12)

    def test_aligned_projector(self):
        s = settings_table("two_qubit")
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0
        e = elements_2q(rho)
        assert prob_2q_closed(e, s.row(0)) == pytest.approx(1.0, abs=1e-12)
        assert prob_2q_closed(e, s.row(6)) == pytest.approx(0.0, abs=1e-12)  # HV...
        assert probs_2q_closed(e, s)[0] == pytest.approx(1.0, abs=1e-12)

    def test_closed_equals_direct_random(self):
        rng = np.random.default_rng(11)
        for _ in range(150):
            rho = rho_from_t_2q(rng.uniform(-1, 1, 16))
            e = elements_2q(rho)
            h_a, h_b = rng.integers(0, 2, 2).astype(float)
            s = Settings2Q(
                theta_qa=[rng.uniform(-np.pi, np.pi)],
                theta_ha=[rng.uniform(-np.pi, np.pi)],
                theta_qb=[rng.uniform(-np.pi, np.pi)],
                theta_hb=[rng.uniform(-np.pi, np.pi)],
                h_a=[h_a], v_a=[1 - h_a], h_b=[h_b], v_b=[1 - h_b])
            np.testing.assert_allclose(probs_2q_closed(e, s),
                                       probs_2q_direct(rho, s), atol=1e-10)

    def test_against_trace_oracle(self, oracle_log):
        rng = np.random.default_rng(12)
        s = settings_table("two_qubit")
        for case in range(20):
            rho = rho_from_t_2q(rng.uniform(-1, 1, 16))
            i = int(rng.integers(0, 36))
            row = s.row(i)
            expected = prob_oracle_2q(rho, row.theta_qa, row.theta_ha,
                                      row.theta_qb, row.theta_hb,
                                      row.h_a, row.v_a, row.h_b, row.v_b)
            got = prob_2q_direct(rho, row)
            assert got == pytest.approx(expected, abs=1e-12)
            if case < 3:
                oracle_log.append(report(f"prob2q-{case}", (i,), expected, got))

    def test_flag_pattern_completeness(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            rho = rho_from_t_2q(rng.uniform(-1, 1, 16))
            angles = rng.uniform(-np.pi, np.pi, 4)
            total = 0.0
            for h_a in (0.0, 1.0):
                for h_b in (0.0, 1.0):
                    s = Settings2Q(theta_qa=[angles[0]], theta_ha=[angles[1]],
                                   theta_qb=[angles[2]], theta_hb=[angles[3]],
                                   h_a=[h_a], v_a=[1 - h_a],
                                   h_b=[h_b], v_b=[1 - h_b])
                    total += prob_2q_direct(rho, s.row(0))
            assert total == pytest.approx(1.0, abs=1e-12)

"""Experiment-harness tests: result serialization, the sweep/grid families,
the measure/reset baseline, metrics, and the two application studies."""
import json

import numpy as np
import pytest

from csmqc import experiments, ops, protocol, sim

RNG = np.random.default_rng(55)


class TestResultsAndCsv:
    def make_result(self):
        rows = (
            experiments.ResultRow("metric_a", (0.5, 2), 0.25, 0.01, 10),
            experiments.ResultRow("metric_b", (None, 3), 1.0, 0.0, 1),
        )
        return experiments.ExperimentResult(("x", "n"), rows, {"x": [0.5], "n": [2, 3]}, seed=7)

    def test_csv_header_and_shape(self):
        text = experiments.result_to_csv(self.make_result())
        lines = text.splitlines()
        assert lines[0] == "metric,x,n,value,two_se,n_samples"
        assert lines[1] == "metric_a,0.5,2,0.25,0.01,10"
        assert lines[2].startswith("metric_b,,3,1,")

    def test_csv_full_precision(self):
        row = experiments.ResultRow("m", (np.pi,), 1 / 3, 0.0, 1)
        res = experiments.ExperimentResult(("x",), (row,), {})
        text = experiments.result_to_csv(res)
        assert format(np.pi, ".17g") in text
        assert format(1 / 3, ".17g") in text

    def test_row_validation(self):
        with pytest.raises(ValueError):
            experiments.ResultRow("m", (), np.nan, 0.0, 1)
        with pytest.raises(ValueError):
            experiments.ResultRow("m", (), 0.5, -0.1, 1)

    def test_coord_mismatch_rejected(self):
        row = experiments.ResultRow("m", (1,), 0.5, 0.0, 1)
        with pytest.raises(ValueError):
            experiments.ExperimentResult(("a", "b"), (row,), {})

    def test_write_result_manifest(self, tmp_path):
        csv_path, man_path = experiments.write_result(self.make_result(), tmp_path, "demo")
        assert csv_path.read_text().startswith("metric,")
        man = json.loads(man_path.read_text())
        assert man["seed"] == 7
        assert man["config_sha256"] == experiments.config_hash({"x": [0.5], "n": [2, 3]})
        assert "version" in man and "wall_time_s" in man

    def test_csv_byte_stable(self, tmp_path):
        cfg = experiments.FpSweepConfig(alphas=(0.01, 0.05), n_spectators=(1, 2), samples=3)
        r1 = experiments.false_positive_sweep(cfg, seed=5)
        r2 = experiments.false_positive_sweep(cfg, seed=5)
        assert experiments.result_to_csv(r1) == experiments.result_to_csv(r2)

    def test_mean_two_se(self):
        vals = [0.0, 1.0, 2.0, 3.0]
        mean, se = experiments.mean_two_se(vals)
        assert mean == pytest.approx(1.5)
        assert se == pytest.approx(2 * np.std(vals, ddof=1) / 2)
        assert experiments.mean_two_se([0.7]) == (pytest.approx(0.7), 0.0)


class TestFalsePositiveSweep:
    def test_zero_noise_zero_rate(self):
        cfg = experiments.FpSweepConfig(alphas=(0.0,), n_spectators=(1, 3), samples=3)
        res = experiments.false_positive_sweep(cfg, seed=1)
        for r in res.rows:
            if r.metric == "false_positive":
                assert r.value == pytest.approx(0.0, abs=1e-10)

    def test_single_spectator_z_axis_closed_form(self):
        """n=1 with a z-aligned plan: ZZ idling is invisible and only
        dephasing flips the flag, so FP = p_D exactly."""
        t_d, tau = 20.0, 1.0
        cfg = experiments.FpSweepConfig(
            alphas=(0.08,), n_spectators=(1,), T2=t_d, tau=tau, axes="z"
        )
        res = experiments.false_positive_sweep(cfg, seed=0)
        p_d = (1 - np.exp(-tau / t_d)) / 2
        fp = [r for r in res.rows if r.metric == "false_positive"][0]
        assert fp.value == pytest.approx(p_d, abs=1e-10)

    def test_monotone_in_alpha(self):
        cfg = experiments.FpSweepConfig(alphas=(0.01, 0.05, 0.2), n_spectators=(3,), samples=40)
        res = experiments.false_positive_sweep(cfg, seed=2)
        vals = {r.coords[0]: r.value for r in res.rows if r.metric == "false_positive"}
        assert vals[0.01] < vals[0.05] < vals[0.2]

    def test_fit_rows_present(self):
        cfg = experiments.FpSweepConfig(alphas=(0.05,), n_spectators=(1, 2, 3, 4), samples=30)
        res = experiments.false_positive_sweep(cfg, seed=3)
        metrics = {r.metric for r in res.rows}
        assert {"fp_fit_slope", "fp_fit_intercept", "fp_fit_r2"} <= metrics
        r2 = [r for r in res.rows if r.metric == "fp_fit_r2"][0]
        slope = [r for r in res.rows if r.metric == "fp_fit_slope"][0]
        assert r2.value > 0.9
        assert slope.value > 0


class TestFalseNegativeSweep:
    def test_noiseless_odd_m_never_missed(self):
        cfg = experiments.FnSweepConfig(theta=np.pi / 4, n_spectators=4, m_values=(1, 3), samples=5)
        res = experiments.false_negative_sweep(cfg, seed=4)
        for r in res.rows:
            assert r.value == pytest.approx(0.0, abs=1e-9)

    def test_even_m_always_missed_noiseless(self):
        cfg = experiments.FnSweepConfig(theta=np.pi / 4, n_spectators=4, m_values=(2, 4), samples=5)
        res = experiments.false_negative_sweep(cfg, seed=4)
        for r in res.rows:
            assert r.value == pytest.approx(1.0, abs=1e-9)

    def test_worst_case_angle_closed_form(self):
        """theta = 2pi/9, n = 4, m = 3: FN = 1/4 independent of axes."""
        cfg = experiments.FnSweepConfig(
            theta=2 * np.pi / 9, n_spectators=4, m_values=(3,), samples=8
        )
        res = experiments.false_negative_sweep(cfg, seed=6)
        assert res.rows[0].value == pytest.approx(0.25, abs=1e-9)
        assert res.rows[0].two_se == pytest.approx(0.0, abs=1e-9)

    def test_sampled_mode_near_exact(self):
        cfg = experiments.FnSweepConfig(
            theta=2 * np.pi / 9, n_spectators=4, m_values=(3,), samples=10
        )
        res = experiments.false_negative_sweep(cfg, seed=6, shots=4000)
        assert res.rows[0].value == pytest.approx(0.25, abs=0.05)
        assert res.rows[0].two_se > 0

    def test_coupling_degrades_detection(self):
        base = experiments.FnSweepConfig(theta=np.pi / 4, n_spectators=2, m_values=(1,), samples=20, window=6)
        clean = experiments.false_negative_sweep(base, seed=8)
        import dataclasses

        noisy_cfg = dataclasses.replace(base, ratio_phi=1.0, ratio_alpha=1.0)
        noisy = experiments.false_negative_sweep(noisy_cfg, seed=8)
        assert noisy.rows[0].value > clean.rows[0].value + 0.05


class TestGrid:
    def test_corner_behaviour(self):
        cfg = experiments.FnSweepConfig(theta=np.pi / 4, n_spectators=4, m_values=(1,), samples=15, window=6)
        res = experiments.grid_false_negative(
            cfg, ratio_alphas=(1e-3, 1.0), ratio_phis=(1e-3, 1.0), m=1, seed=9
        )
        vals = {(r.coords[1], r.coords[2]): r.value for r in res.rows}
        assert vals[(1e-3, 1e-3)] < 0.05
        assert vals[(1.0, 1.0)] > 0.3

    def test_grid_shape_and_config_echo(self):
        cfg = experiments.FnSweepConfig(theta=np.pi / 4, n_spectators=2, m_values=(1,), samples=2, window=4)
        res = experiments.grid_false_negative(cfg, ratio_alphas=(0.0, 0.1), ratio_phis=(0.0,), seed=0)
        assert len(res.rows) == 2
        assert res.config["grid_ratio_alphas"] == [0.0, 0.1]

    def test_default_ratio_grid(self):
        grid = experiments.default_ratio_grid(6)
        assert grid[0] == pytest.approx(1e-4)
        assert grid[-1] == pytest.approx(10.0)
        assert len(grid) == 6


class TestBaseline:
    def test_measurement_points(self):
        assert experiments.measurement_points(7, 2) == (2, 4, 6, 7)
        assert experiments.measurement_points(8, 4) == (4, 8)
        assert experiments.measurement_points(3, 5) == (3,)

    def test_no_flag_probability_hand_computed(self):
        # window 4, period 2, events at layers 0 and 1, delta = pi/2:
        # segment [0,2) has 2 events -> (1+cos(pi))/2 = 0; rest irrelevant
        pat = sim.PerturbationPattern(2, (0, 1))
        p = experiments.baseline_no_flag_probability(pat, 4, 2, np.pi / 2)
        assert p == pytest.approx(0.0, abs=1e-12)

    def test_no_flag_single_event(self):
        pat = sim.PerturbationPattern(1, (0,))
        p = experiments.baseline_no_flag_probability(pat, 4, 4, np.pi / 4)
        assert p == pytest.approx((1 + np.cos(np.pi / 4)) / 2)

    def test_monte_carlo_oracle(self):
        """Simulated single-qubit measure/reset chain agrees with the
        closed-form segment product."""
        window, period, delta = 6, 2, np.pi / 3
        pat = sim.PerturbationPattern(3, (0, 3, 4))
        expect = experiments.baseline_no_flag_probability(pat, window, period, delta)
        # explicit segment walk with rotation about x from |0>
        pts = experiments.measurement_points(window, period)
        prob, prev = 1.0, 0
        for t in pts:
            c = sum(1 for i in pat.layer_indices if prev <= i < t)
            psi = np.array([1.0, 0.0], dtype=complex)
            psi = np.linalg.matrix_power(ops.rotation_operator([1, 0, 0], delta), c) @ psi
            prob *= abs(psi[0]) ** 2
            prev = t
        assert expect == pytest.approx(prob, abs=1e-12)

    def test_optimal_reset_period_window7(self):
        assert experiments.optimal_reset_period(7, np.pi / 4) == 4

    def test_optimal_period_pi_delta(self):
        # delta = pi: every event is fully visible; period 1 catches each one
        assert experiments.optimal_reset_period(4, np.pi) == 1

    def test_constant_period_baseline_rows(self):
        res = experiments.constant_period_baseline(
            experiments.BaselineConfig(window=7), m_values=(0, 1), samples=10, seed=0
        )
        vals = {r.metric: r.value for r in res.rows if r.coords[0] in (None, 0)}
        assert vals["baseline_period"] == 4
        zero = [r for r in res.rows if r.metric == "baseline_detection" and r.coords[0] == 0][0]
        assert zero.value == pytest.approx(0.0, abs=1e-12)

    def test_bad_period_rejected(self):
        with pytest.raises(ValueError):
            experiments.BaselineConfig(window=4, period=9)


class TestMetrics:
    def test_tvd_identical(self):
        assert experiments.tvd({"00": 1.0}, {"00": 1.0}) == 0.0

    def test_tvd_disjoint(self):
        assert experiments.tvd({"00": 1.0}, {"11": 1.0}) == pytest.approx(1.0)

    def test_tvd_hand_value(self):
        a = {"0": 0.7, "1": 0.3}
        b = {"0": 0.5, "1": 0.5}
        assert experiments.tvd(a, b) == pytest.approx(0.2)

    def test_tvd_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            experiments.tvd({"0": 0.4}, {"0": 1.0})

    def test_fidelity_pure_overlap(self):
        psi = ops.random_state(4, RNG)
        phi = ops.random_state(4, RNG)
        rho = np.outer(psi, psi.conj())
        sig = np.outer(phi, phi.conj())
        assert experiments.fidelity(rho, sig) == pytest.approx(abs(np.vdot(psi, phi)) ** 2)

    def test_qst_round_trip(self):
        rho = ops.random_density(4, RNG)
        expect = {
            lb: float(np.real(np.trace(ops.pauli_string_matrix(lb) @ rho)))
            for lb in experiments.pauli_labels(2)
        }
        rec = experiments.qst_reconstruct(expect, 2)
        assert np.max(np.abs(rec - rho)) < 1e-10

    def test_qst_missing_label(self):
        with pytest.raises(ValueError):
            experiments.qst_reconstruct({"II": 1.0}, 1)


@pytest.fixture(scope="module")
def detection_result():
    from csmqc import crosstalk

    rng = np.random.default_rng(12)
    params = [
        crosstalk.synthetic_hsa_parameters(4, 0.03, 0.15, rng, stochastic_coeff=0.0)
        for _ in range(2)
    ]
    return experiments.detection_rate_experiment(
        params, spectators=(0, 1, 2, 3), m_values=(0, 1, 2), samples=2, seed=3
    )


class TestDetectionRate:
    def test_no_events_low_rate(self, detection_result):
        zero = [
            r for r in detection_result.rows if r.metric == "detection_success" and r.coords[1] == 0
        ]
        # m=0 has no owning count class; fall back to the k=1 rate
        if not zero:
            zero = [r for r in detection_result.rows if r.metric == "detection_rate" and r.coords == (1, 0)]
        assert zero[0].value < 0.1

    def test_single_event_high_success(self, detection_result):
        one = [r for r in detection_result.rows if r.metric == "detection_success" and r.coords[1] == 1][0]
        assert one.value > 0.8

    def test_amplification_factor_reported(self, detection_result):
        amp = [r for r in detection_result.rows if r.metric == "amplification_factor"][0]
        assert amp.value > 1.0


class TestBellIdt:
    def test_zero_events_zero_tvd(self):
        cfg = experiments.BellIdtConfig(n_spectators=2, m_values=(0,), trials=3)
        res = experiments.bell_idt_experiment(cfg, seed=0)
        for r in res.rows:
            if r.metric.startswith("tvd"):
                assert r.value == pytest.approx(0.0, abs=1e-10)

    def test_detector_filter_removes_odd_m(self):
        # four spectators at delta = pi/4 -> total angle pi, so odd m is
        # flagged with certainty and the filtered TVD vanishes
        cfg = experiments.BellIdtConfig(n_spectators=4, m_values=(1, 3), trials=4)
        res = experiments.bell_idt_experiment(cfg, seed=1)
        for r in res.rows:
            if r.metric == "tvd_csmqc":
                assert r.value == pytest.approx(0.0, abs=1e-9)

    def test_unfiltered_scales_with_lambda(self):
        cfg1 = experiments.BellIdtConfig(n_spectators=2, m_values=(1,), trials=4, lam=0.5)
        cfg2 = experiments.BellIdtConfig(n_spectators=2, m_values=(1,), trials=4, lam=0.25)
        r1 = experiments.bell_idt_experiment(cfg1, seed=2)
        r2 = experiments.bell_idt_experiment(cfg2, seed=2)
        u1 = [r for r in r1.rows if r.metric == "tvd_unfiltered"][0].value
        u2 = [r for r in r2.rows if r.metric == "tvd_unfiltered"][0].value
        assert u1 == pytest.approx(2 * u2, rel=1e-9)


class TestRandomCircuit:
    def test_zero_events_unit_fidelity(self):
        cfg = experiments.RandomCircuitConfig(n_spectators=2, m_values=(0,), trials=3, window=5)
        res = experiments.random_circuit_experiment(cfg, seed=0)
        for r in res.rows:
            if r.metric.startswith("fidelity"):
                assert r.value == pytest.approx(1.0, abs=1e-9)

    def test_filter_restores_fidelity_odd_m(self):
        cfg = experiments.RandomCircuitConfig(n_spectators=4, m_values=(1,), trials=4, window=5)
        res = experiments.random_circuit_experiment(cfg, seed=1)
        vals = {r.metric: r.value for r in res.rows if r.coords[0] == 1}
        assert vals["fidelity_csmqc"] == pytest.approx(1.0, abs=1e-9)
        assert vals["fidelity_unfiltered"] < 1.0

    def test_filtered_beats_unfiltered(self):
        cfg = experiments.RandomCircuitConfig(
            n_spectators=2, m_values=(1, 3, 5), trials=6, window=6
        )
        res = experiments.random_circuit_experiment(cfg, seed=4)
        for m in (1, 3, 5):
            vals = {r.metric: r.value for r in res.rows if r.coords[0] == m}
            assert vals["fidelity_csmqc"] >= vals["fidelity_unfiltered"] - 1e-12

from dataclasses import replace

import numpy as np
import pytest

from core.config_file import load_document
from core.errors import ConfigError, DomainError, ResonanceMismatchError
from core.gate import (
    INPUT_LABELS,
    CnotConfig,
    ErrorMetric,
    GateRunResult,
    calibrate_bac,
    effective_nuclear_moment,
    electron_ground_population,
    ensure_b_ac,
    gate_error,
    ideal_cnot_target,
    measure_swap_duration,
    rabi_estimate,
    run_all_inputs,
    run_cnot,
    verify_adiabatic_mapping,
    worst_case_error,
)
from core.hamiltonian import nuclear_basis_state
from core.spin_algebra import DOWN, UP, density_diagnostics, projector
from tests.conftest import TOY_DOCUMENT


class TestTargets:
    @pytest.mark.parametrize("label, output", [("00", 0), ("01", 1), ("10", 3), ("11", 2)])
    def test_truth_table(self, label, output):
        target = ideal_cnot_target(label)
        assert target[output, output] == 1.0
        assert np.trace(target) == 1.0

    def test_unknown_label(self):
        with pytest.raises(DomainError):
            ideal_cnot_target("2")


class TestGateError:
    def test_ideal_output_has_zero_error(self):
        rho = projector(nuclear_basis_state("11"))
        for metric in ErrorMetric:
            assert gate_error(rho, "10", metric) == pytest.approx(0.0, abs=1e-15)

    def test_wrong_output(self):
        assert gate_error(projector(nuclear_basis_state("10")), "10") == pytest.approx(1.0)

    def test_excited_electron_only_counts_in_full_metric(self):
        rho = projector(nuclear_basis_state("11", UP, DOWN))
        assert gate_error(rho, "10", ErrorMetric.NUCLEAR) == pytest.approx(0.0, abs=1e-15)
        assert gate_error(rho, "10", ErrorMetric.FULL) == pytest.approx(1.0)
        assert electron_ground_population(rho) == 0.0

    def test_mixed_output(self):
        rho = 0.5 * projector(nuclear_basis_state("11")) + 0.5 * projector(nuclear_basis_state("10"))
        assert gate_error(rho, "10") == pytest.approx(0.5)


class TestCnotConfig:
    def test_defaults(self, default_config):
        assert default_config.b_z == 2.0
        assert default_config.j_max == 810.0
        assert default_config.b_ac is None
        assert default_config.dephasing.is_zero

    @pytest.mark.parametrize("field, value, key", [
        ("profile", "cubic", "device.profile"),
        ("profile", "hold", "device.profile"),
        ("b_ac", -1e-3, "device.b_ac"),
        ("a2", 0.0, "device.a2"),
        ("delta_a1", -0.1, "device.delta_a1"),
    ])
    def test_validation(self, field, value, key):
        with pytest.raises(ConfigError, match=key):
            CnotConfig(**{field: value})

    def test_with_dephasing(self, default_config):
        config = default_config.with_dephasing(500.0, 50000.0)
        assert config.dephasing.tau_e == pytest.approx(500.0)
        assert config.dephasing.tau_n == pytest.approx(50000.0)
        assert default_config.dephasing.is_zero

    def test_result_error_range(self):
        with pytest.raises(DomainError):
            GateRunResult("00", np.eye(16) / 16, 1.5, 1.5, 1.5, 1.0, 1.0, None)


class TestCalibration:
    def test_rabi_estimate(self, default_config):
        assert rabi_estimate(default_config) == pytest.approx(7.298e-4, rel=1e-3)

    def test_hyperfine_admixture_enhances_the_nuclear_moment(self, default_config):
        assert effective_nuclear_moment(default_config) == pytest.approx(1.8568, rel=1e-4)
        assert effective_nuclear_moment(default_config) > default_config.consts.nuclear_moment

    def test_calibrated_swap_time(self, default_config):
        result = calibrate_bac(default_config)
        assert 1e-3 / 3 < result.b_ac < 3e-3
        assert result.peak_population >= 0.999
        assert result.swap_duration == pytest.approx(default_config.durations.swap, rel=1e-6)
        assert result.b_ac == pytest.approx(rabi_estimate(default_config), rel=0.05)
        assert result.omega < 0
        assert set(result.as_dict()) == {"b_ac_t", "swap_duration_us", "peak_population", "omega_rad_per_us"}

    def test_doubling_drive_halves_swap(self, default_config):
        b_ac = rabi_estimate(default_config)
        single, _ = measure_swap_duration(default_config, b_ac)
        double, _ = measure_swap_duration(default_config, 2 * b_ac)
        assert double == pytest.approx(single / 2, rel=0.05)

    def test_weak_drive_never_transfers(self, default_config):
        with pytest.raises(ResonanceMismatchError):
            measure_swap_duration(default_config, 1e-9)

    def test_non_positive_drive(self, default_config):
        with pytest.raises(DomainError):
            measure_swap_duration(default_config, 0.0)

    def test_ensure_b_ac_keeps_a_given_value(self, toy_config):
        assert ensure_b_ac(toy_config) is toy_config


class TestRunCnot:
    def test_single_input(self, toy_config):
        result, trajectory = run_cnot(toy_config, "10", n_samples=11)
        assert result.input_label == "10"
        assert 0.0 <= result.error <= 1.0
        assert result.error == result.nuclear_error
        assert result.full_error >= result.nuclear_error - 1e-12
        assert result.purity == pytest.approx(1.0, abs=1e-6)
        assert 0.0 < result.electron_ground_population <= 1.0 + 1e-9
        assert len(trajectory.times) >= 11
        assert [name for name, _ in result.stage_stats] == ["ramp_j", "ramp_a", "swap", "unramp_a", "unramp_j"]
        document = result.as_dict()
        assert document["input"] == "10"
        assert set(document["stages"]) == {"ramp_j", "ramp_a", "swap", "unramp_a", "unramp_j"}

    def test_full_metric_selects_full_error(self, toy_config):
        result, _ = run_cnot(replace(toy_config, error_metric="full"), "00")
        assert result.error == result.full_error

    def test_unknown_input(self, toy_config):
        with pytest.raises(DomainError):
            run_cnot(toy_config, "12")

    def test_all_inputs_in_order(self, toy_config):
        results = run_all_inputs(toy_config, parallelism=1)
        assert [r.input_label for r in results] == list(INPUT_LABELS)
        assert worst_case_error(toy_config, parallelism=1) == max(r.error for r in results)

    def test_dephasing_lowers_purity(self, toy_config):
        clean, _ = run_cnot(toy_config, "10")
        noisy, _ = run_cnot(toy_config.with_dephasing(0.5, 50.0), "10")
        assert noisy.purity < clean.purity


class TestMapping:
    def test_report_structure(self, toy_config):
        report = verify_adiabatic_mapping(toy_config)
        assert set(report.fidelities) == {"10", "01", "00"}
        for label in report.fidelities:
            assert 0.0 <= report.fidelities[label] <= 1.0 + 1e-9
            assert 0.0 < report.electron_ground[label] <= 1.0 + 1e-9
        assert set(report.as_dict()) == {"fidelities", "electron_ground"}


@pytest.fixture(scope="module")
def toy_results(toy_calibration):
    config = replace(load_document(TOY_DOCUMENT).config, b_ac=toy_calibration.b_ac)
    return run_all_inputs(config, parallelism=1)


def _assert_physical(trajectory, unitary):
    assert len(trajectory.states) >= 100
    for rho in trajectory.states:
        diagnostics = density_diagnostics(rho)
        assert diagnostics.trace_error < 1e-9
        assert diagnostics.hermiticity_error < 1e-9
        assert diagnostics.min_eigenvalue >= -1e-8
        if unitary:
            assert diagnostics.purity == pytest.approx(1.0, abs=1e-8)


class TestToyDevice:
    """The reduced-field device runs a working CNOT in seconds."""

    def test_calibration(self, toy_calibration, toy_loaded):
        assert toy_calibration.peak_population >= 0.99
        assert toy_calibration.swap_duration == pytest.approx(toy_loaded.config.durations.swap, rel=1e-6)
        assert toy_calibration.b_ac == pytest.approx(rabi_estimate(toy_loaded.config), rel=0.1)

    def test_adiabatic_mapping(self, toy_config):
        report = verify_adiabatic_mapping(toy_config)
        assert all(fidelity > 0.99 for fidelity in report.fidelities.values())
        assert all(population > 0.99 for population in report.electron_ground.values())

    def test_every_input_flips_correctly(self, toy_results):
        assert [r.input_label for r in toy_results] == list(INPUT_LABELS)
        assert all(r.error < 1e-2 for r in toy_results)

    def test_electrons_return_to_ground(self, toy_results):
        for result in toy_results:
            assert result.electron_ground_population >= 1.0 - 10.0 * result.error

    @pytest.mark.parametrize("tau_e_us, tau_n_us", [(None, None), (20.0, 2000.0)])
    def test_density_stays_physical(self, toy_config, tau_e_us, tau_n_us):
        config = toy_config if tau_e_us is None else toy_config.with_dephasing(tau_e_us, tau_n_us)
        _, trajectory = run_cnot(config, "10", n_samples=101)
        _assert_physical(trajectory, unitary=tau_e_us is None)


@pytest.mark.slow
class TestFullScaleGate:
    """Full 25.9 us gate at 2 T."""

    @pytest.fixture(scope="class")
    def calibrated(self):
        return ensure_b_ac(CnotConfig())

    def test_adiabatic_mapping(self, calibrated):
        assert verify_adiabatic_mapping(calibrated).passed(1e-3)

    def test_coherent_gate_error(self, calibrated):
        assert worst_case_error(calibrated) <= 1e-3

    @pytest.mark.parametrize("tau_e_us, low, high", [
        (500.0, 3e-4, 3e-3),
        (200.0, 1e-3, 1e-2),
        (2.0, 0.03, 0.3),
    ])
    def test_dephasing_spot_checks(self, calibrated, tau_e_us, low, high):
        worst = worst_case_error(calibrated.with_dephasing(tau_e_us, 100.0 * tau_e_us))
        assert low <= worst <= high

    def test_results_stay_physical(self, calibrated):
        for result in run_all_inputs(calibrated.with_dephasing(2.0, 200.0)):
            assert 0.0 <= result.error <= 1.0
            assert result.purity <= 1.0 + 1e-9

    def test_error_falls_as_dephasing_slows(self, calibrated):
        worst = [worst_case_error(calibrated.with_dephasing(tau, 100.0 * tau)) for tau in (2.0, 20.0, 200.0)]
        assert worst[0] > worst[1] > worst[2]

    @pytest.mark.parametrize("tau_e_us", [None, 200.0])
    def test_density_stays_physical(self, calibrated, tau_e_us):
        config = calibrated if tau_e_us is None else calibrated.with_dephasing(tau_e_us, 100.0 * tau_e_us)
        result, trajectory = run_cnot(config, "10", n_samples=101)
        _assert_physical(trajectory, unitary=tau_e_us is None)
        assert result.stats.accepted < 300_000

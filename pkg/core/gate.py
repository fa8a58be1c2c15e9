import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from core.config import resolve_parallelism
from core.dynamics import DephasingParams, IntegratorConfig, evolve_schedule, frame_generator
from core.errors import ConfigError, DomainError, ResonanceMismatchError
from core.hamiltonian import (
    HamiltonianTerms,
    PhysicalConstants,
    SpecialStates,
    match_level,
    nuclear_basis_state,
    resonance_frequency,
    static_hamiltonian,
)
from core.pulses import (
    ProfileKind,
    ReverseOrder,
    StageDurations,
    build_cnot_schedule,
    mapping_schedule,
    swap_point,
)
from core.spin_algebra import (
    DOWN,
    hermitian_eigensystem,
    partial_trace_electrons,
    project_electrons,
    projector,
)

INPUT_LABELS = ("00", "01", "10", "11")
CNOT_TRUTH_TABLE = {"00": "00", "01": "01", "10": "11", "11": "10"}

SWAP_THRESHOLD = 0.99
SWAP_HORIZON = 10.0
SWAP_SAMPLES = 4000


class ErrorMetric(str, Enum):
    NUCLEAR = "nuclear"
    FULL = "full"


@dataclass(frozen=True)
class CnotConfig:
    consts: PhysicalConstants = field(default_factory=PhysicalConstants)
    b_z: float = 2.0
    a2: float = 1.706
    delta_a1: float = 0.02
    j_max: float = 810.0
    profile: ProfileKind = ProfileKind.LINSIN
    durations: StageDurations = field(default_factory=StageDurations)
    b_ac: float = None
    reverse_order: ReverseOrder = ReverseOrder.MIRRORED
    error_metric: ErrorMetric = ErrorMetric.NUCLEAR
    dephasing: DephasingParams = field(default_factory=DephasingParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        for name in ("profile", "reverse_order", "error_metric"):
            kind = {"profile": ProfileKind, "reverse_order": ReverseOrder, "error_metric": ErrorMetric}[name]
            try:
                object.__setattr__(self, name, kind(getattr(self, name)))
            except ValueError:
                raise ConfigError(f"unknown value {getattr(self, name)!r}", key=f"device.{name}") from None
        if self.profile is ProfileKind.HOLD:
            raise ConfigError("a J ramp cannot be a hold", key="device.profile")
        if not self.b_z > 0:
            raise ConfigError("must be positive", key="device.b_z")
        if not self.a2 > 0:
            raise ConfigError("must be positive", key="device.a2")
        if self.delta_a1 < 0:
            raise ConfigError("must be non-negative", key="device.delta_a1")
        if not self.j_max > 0:
            raise ConfigError("must be positive", key="device.j_max")
        if self.b_ac is not None and not self.b_ac > 0:
            raise ConfigError("must be positive or null", key="device.b_ac")

    def with_dephasing(self, tau_e_us=None, tau_n_us=None):
        return replace(self, dephasing=DephasingParams.from_times(tau_e_us, tau_n_us))


@dataclass(frozen=True)
class GateRunResult:
    input_label: str
    final_rho: np.ndarray
    error: float
    nuclear_error: float
    full_error: float
    electron_ground_population: float
    purity: float
    stats: object
    stage_stats: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise DomainError(f"gate error {self.error} outside [0, 1]")

    def as_dict(self):
        return {
            "input": self.input_label,
            "error": self.error,
            "nuclear_error": self.nuclear_error,
            "full_error": self.full_error,
            "electron_ground_population": self.electron_ground_population,
            "purity": self.purity,
            "stats": self.stats.as_dict(),
            "stages": {name: stats.as_dict() for name, stats in self.stage_stats},
        }


@dataclass(frozen=True)
class CalibrationResult:
    b_ac: float
    swap_duration: float
    peak_population: float
    omega: float

    def as_dict(self):
        return {
            "b_ac_t": self.b_ac,
            "swap_duration_us": self.swap_duration,
            "peak_population": self.peak_population,
            "omega_rad_per_us": self.omega,
        }


@dataclass(frozen=True)
class MappingReport:
    fidelities: dict
    electron_ground: dict

    def passed(self, tolerance=1e-3):
        return all(f >= 1.0 - tolerance for f in self.fidelities.values())

    def as_dict(self):
        return {"fidelities": dict(self.fidelities), "electron_ground": dict(self.electron_ground)}


def _check_label(label):
    if label not in CNOT_TRUTH_TABLE:
        raise DomainError(f"unknown input label {label!r}; expected one of {', '.join(INPUT_LABELS)}")


def ideal_cnot_target(input_label):
    """4x4 projector onto the CNOT output for a basis input (qubit 1 controls)."""
    _check_label(input_label)
    out = np.zeros((4, 4), dtype=complex)
    k = int(CNOT_TRUTH_TABLE[input_label], 2)
    out[k, k] = 1.0
    return out


def electron_ground_population(rho):
    return float(np.real(np.trace(project_electrons(rho, DOWN, DOWN))))


def gate_error(final_rho, input_label, metric=ErrorMetric.NUCLEAR):
    """1 - overlap with the ideal output.

    The nuclear metric traces out the electrons; the full metric also asks
    for both electrons back in their ground state.
    """
    target = ideal_cnot_target(input_label)
    if ErrorMetric(metric) is ErrorMetric.NUCLEAR:
        fidelity = np.real(np.trace(target @ partial_trace_electrons(final_rho)))
    else:
        fidelity = np.real(np.trace(target @ project_electrons(final_rho, DOWN, DOWN)))
    return float(min(1.0, max(0.0, 1.0 - fidelity)))


def _swap_propagation(config, b_ac):
    """Eigensystem of the static swap Hamiltonian in the drive frame, plus dressed |symm> and |11>."""
    consts = config.consts
    point = swap_point(config)
    omega = -resonance_frequency(consts, point)
    terms = HamiltonianTerms(consts, config.b_z)
    evals0, evecs0 = hermitian_eigensystem(static_hamiltonian(consts, point))
    _, symm = match_level(evals0, evecs0, SpecialStates.electron_ground().symm)
    _, eleven = match_level(evals0, evecs0, nuclear_basis_state("11"))
    h_rot = (
        terms.static(point.a1, point.a2, point.j)
        - consts.hbar * omega * np.diag(frame_generator())
        + b_ac * terms.transverse_x
    )
    evals, evecs = hermitian_eigensystem(h_rot)
    return evals, evecs.conj().T @ symm, eleven.conj() @ evecs, omega


def measure_swap_duration(config, b_ac, horizon=None, samples=SWAP_SAMPLES):
    """(time of the first full |symm> -> |11> transfer, its peak population) at fixed B_ac."""
    if not b_ac > 0:
        raise DomainError(f"B_ac must be positive, got {b_ac}")
    evals, start, end, _ = _swap_propagation(config, b_ac)
    hbar = config.consts.hbar
    horizon = horizon or SWAP_HORIZON * config.durations.swap

    def population(t):
        return float(np.abs(np.sum(end * np.exp(-1j * evals * t / hbar) * start)) ** 2)

    times = np.linspace(0.0, horizon, samples)
    amplitudes = np.exp(-1j * np.outer(times, evals) / hbar) @ (end * start)
    populations = np.abs(amplitudes) ** 2
    above = np.nonzero(populations >= SWAP_THRESHOLD)[0]
    if len(above) == 0:
        raise ResonanceMismatchError(
            f"no transfer above {SWAP_THRESHOLD} within {horizon:.6g} us at B_ac={b_ac:.6g} T "
            f"(best {populations.max():.4f})"
        )
    m = int(above[0])
    while m + 1 < samples and populations[m + 1] > populations[m]:
        m += 1
    lo, hi = times[max(m - 1, 0)], times[min(m + 1, samples - 1)]
    result = minimize_scalar(lambda t: -population(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(result.x), float(-result.fun)


def effective_nuclear_moment(config):
    """Nuclear moment seen by the |symm> <-> |11> drive, in u per tesla.

    |symm> carries an admixture -A/(eps_e + eps_n) of |11> with a triplet
    electron pair, which the drive reaches through the much larger electron
    moment; the two contributions add.
    """
    consts = config.consts
    zeeman = consts.electron_zeeman(config.b_z) + consts.nuclear_zeeman(config.b_z)
    return consts.nuclear_moment + consts.bohr_moment * config.a2 / zeeman


def rabi_estimate(config):
    """B_ac for the configured swap time, to first order in A over the Zeeman splitting."""
    moment = effective_nuclear_moment(config)
    return math.pi * config.consts.hbar / (2.0 * math.sqrt(2.0) * moment * config.durations.swap)


def calibrate_bac(config):
    """Bisect B_ac so the |symm> -> |11> swap takes exactly the configured stage-4 time."""
    target = config.durations.swap
    guess = rabi_estimate(config)

    def mismatch(b_ac):
        return measure_swap_duration(config, b_ac)[0] - target

    lo, hi = guess / 4.0, guess * 4.0
    if mismatch(lo) * mismatch(hi) > 0:
        raise ResonanceMismatchError(f"swap time {target} us not reachable for B_ac in [{lo:.3g}, {hi:.3g}] T")
    b_ac = bisect(mismatch, lo, hi, xtol=1e-18, rtol=1e-12)
    duration, peak = measure_swap_duration(config, b_ac)
    omega = _swap_propagation(config, b_ac)[3]
    logging.info(
        "Calibrated B_ac=%.9g T (swap %.6g us, peak transfer %.6f, omega %.9g rad/us)", b_ac, duration, peak, omega
    )
    return CalibrationResult(b_ac=float(b_ac), swap_duration=duration, peak_population=peak, omega=omega)


def ensure_b_ac(config):
    """`config` with B_ac filled in by calibration when it is unset."""
    if config.b_ac is not None:
        return config
    return replace(config, b_ac=calibrate_bac(config).b_ac)


_MAPPING_TARGETS = {"10": "symm", "01": "anti", "00": "00"}


def verify_adiabatic_mapping(config):
    """Carry |10>, |01>, |00> through stages 2-3 and report the overlap with |symm>, |anti>, |00>.

    The nuclear state is conditioned on both electrons being in their ground
    state; that ground-state population is reported alongside.
    """
    schedule = mapping_schedule(config)
    states = SpecialStates.electron_ground()
    references = {
        "symm": states.symm,
        "anti": states.anti,
        "00": nuclear_basis_state("00"),
    }
    fidelities, ground = {}, {}
    for label, target in _MAPPING_TARGETS.items():
        rho0 = projector(nuclear_basis_state(label))
        rho, _ = evolve_schedule(rho0, schedule, DephasingParams(), config.integrator, config.consts)
        block = project_electrons(rho, DOWN, DOWN)
        population = float(np.real(np.trace(block)))
        reference = project_electrons(projector(references[target]), DOWN, DOWN)
        fidelities[label] = float(np.real(np.trace(reference @ block)) / population)
        ground[label] = population
        logging.info("Mapping |%s> -> |%s>: fidelity %.6f, electron ground %.6f", label, target, fidelities[label], population)
    return MappingReport(fidelities, ground)


def run_cnot(config, input_label, schedule=None, n_samples=0):
    """Full CNOT on one basis input; returns the result and the sampled trajectory."""
    _check_label(input_label)
    schedule = schedule or build_cnot_schedule(config)
    # Step 1 (A1 bias on) is instantaneous; the schedule starts from it.
    rho0 = projector(nuclear_basis_state(input_label))
    final, trajectory = evolve_schedule(rho0, schedule, config.dephasing, config.integrator, config.consts, n_samples)
    nuclear = gate_error(final, input_label, ErrorMetric.NUCLEAR)
    full = gate_error(final, input_label, ErrorMetric.FULL)
    result = GateRunResult(
        input_label=input_label,
        final_rho=final,
        error=nuclear if config.error_metric is ErrorMetric.NUCLEAR else full,
        nuclear_error=nuclear,
        full_error=full,
        electron_ground_population=electron_ground_population(final),
        purity=float(np.real(np.trace(final @ final))),
        stats=trajectory.stats,
        stage_stats=trajectory.stage_stats,
    )
    logging.info("CNOT input %s: error %.6g (full-state %.6g)", input_label, nuclear, full)
    return result, trajectory


def _run_one(config, label):
    return run_cnot(config, label)[0]


def run_all_inputs(config, labels=INPUT_LABELS, parallelism=None):
    """run_cnot over several inputs, in input order; processes are used when parallelism > 1."""
    config = ensure_b_ac(config)
    schedule = build_cnot_schedule(config)
    workers = min(resolve_parallelism(parallelism), len(labels))
    if workers <= 1:
        return tuple(run_cnot(config, label, schedule)[0] for label in labels)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return tuple(executor.map(_run_one, [config] * len(labels), labels))


def worst_case_error(config, parallelism=None):
    """Largest error over the four basis inputs."""
    return max(result.error for result in run_all_inputs(config, parallelism=parallelism))

"""Density-matrix master equation: unitary part plus sigma^z dephasing.

    d rho/dt = (1/i hbar)[H(t), rho] - sum_s Gamma_s [sz_s, [sz_s, rho]]

Every dephasing operator is diagonal, so the double commutators reduce to an
elementwise product with the fixed weight matrix D_jk = sum_s Gamma_s (z_sj - z_sk)^2.

Two integrators share the same step-landing and trace bookkeeping. The
exponential one propagates in the eigenbasis of the step-averaged Hamiltonian,
so its step size follows how fast H changes rather than how large H is; the
Dormand-Prince one resolves every phase and serves as the lab-frame oracle.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.errors import ConfigError, StiffnessError
from core.hamiltonian import HamiltonianTerms
from core.result_store import write_csv
from core.spin_algebra import (
    ELECTRON_SITES,
    NUCLEAR_SITES,
    Site,
    double_commutator,
    embed_pauli,
    hermitian_eigensystem,
    propagate_expm,
    z_diagonal,
)

TRACE_RENORMALIZE_THRESHOLD = 1e-10

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# Fifth-order minus embedded fourth-order weights.
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0

# Exponential stepper: local error is fifth order in the step.
_EXP_EXPO = 0.2
_EXP_FAC_MAX = 5.0
# Below this |x| the Filon weights switch to their Taylor series.
_SERIES_BELOW = 0.05


class Frame(str, Enum):
    LAB = "lab"
    ROTATING = "rotating"


class Method(str, Enum):
    EXPONENTIAL = "exponential"
    RK45 = "rk45"


@dataclass(frozen=True)
class DephasingParams:
    """Pure-dephasing rates in 1/us; tau = 1/(4 Gamma)."""

    gamma_e: float = 0.0
    gamma_n: float = 0.0

    def __post_init__(self):
        for name in ("gamma_e", "gamma_n"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError(f"dephasing rate must be finite and >= 0, got {value}", key=f"dephasing.{name}")

    @classmethod
    def from_times(cls, tau_e=None, tau_n=None):
        """Rates from dephasing times in microseconds; None or inf means no dephasing."""
        return cls(gamma_e=_rate(tau_e, "tau_e_us"), gamma_n=_rate(tau_n, "tau_n_us"))

    @property
    def tau_e(self):
        return math.inf if self.gamma_e == 0 else 1.0 / (4.0 * self.gamma_e)

    @property
    def tau_n(self):
        return math.inf if self.gamma_n == 0 else 1.0 / (4.0 * self.gamma_n)

    @property
    def is_zero(self):
        return self.gamma_e == 0 and self.gamma_n == 0

    def weights(self):
        """D_jk such that the dephasing term equals -D * rho elementwise."""
        out = np.zeros((16, 16))
        for sites, gamma in ((ELECTRON_SITES, self.gamma_e), (NUCLEAR_SITES, self.gamma_n)):
            if gamma == 0:
                continue
            for site in sites:
                z = z_diagonal(site)
                out += gamma * (z[:, None] - z[None, :]) ** 2
        return out


def _rate(tau, key):
    if tau is None or tau == math.inf:
        return 0.0
    if not tau > 0:
        raise ConfigError(f"dephasing time must be positive, got {tau}", key=f"dephasing.{key}")
    return 1.0 / (4.0 * tau)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    initial_step: float = 1e-5
    max_step: float = 0.05
    min_step: float = 1e-13
    frame: Frame = Frame.ROTATING
    method: Method = Method.EXPONENTIAL

    def __post_init__(self):
        for name, kind in (("frame", Frame), ("method", Method)):
            try:
                object.__setattr__(self, name, kind(getattr(self, name)))
            except ValueError:
                raise ConfigError(f"unknown value {getattr(self, name)!r}", key=f"integrator.{name}") from None
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("tolerances must be positive", key="integrator.rel_tol")
        if not 0 < self.min_step <= self.max_step:
            raise ConfigError("need 0 < min_step <= max_step", key="integrator.min_step")
        if not self.initial_step > 0:
            raise ConfigError("must be positive", key="integrator.initial_step")

    def as_dict(self):
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "initial_step": self.initial_step,
            "max_step": self.max_step,
            "min_step": self.min_step,
            "frame": self.frame.value,
            "method": self.method.value,
        }


@dataclass(frozen=True)
class IntegrationStats:
    """Step counts per segment; rhs_evals counts right-hand-side (rk45) or Hamiltonian (exponential) evaluations."""

    accepted: int = 0
    rejected: int = 0
    renormalizations: int = 0
    max_trace_drift: float = 0.0
    rhs_evals: int = 0

    def merged(self, other):
        return IntegrationStats(
            accepted=self.accepted + other.accepted,
            rejected=self.rejected + other.rejected,
            renormalizations=self.renormalizations + other.renormalizations,
            max_trace_drift=max(self.max_trace_drift, other.max_trace_drift),
            rhs_evals=self.rhs_evals + other.rhs_evals,
        )

    def as_dict(self):
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "renormalizations": self.renormalizations,
            "max_trace_drift": self.max_trace_drift,
            "rhs_evals": self.rhs_evals,
        }


@dataclass(frozen=True)
class Segment:
    """Time window [t_start, t_end] with H(t) given by `hamiltonian`."""

    hamiltonian: object
    t_start: float
    t_end: float
    hbar: float


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    states: tuple
    stats: IntegrationStats = field(default_factory=IntegrationStats)
    stage_stats: tuple = ()

    @property
    def final(self):
        return self.states[-1]


def rhs_unitary(h, rho, hbar):
    return (-1j / hbar) * (h @ rho - rho @ h)


def rhs_dephasing(rho, params):
    """Sum of the four -Gamma [sz, [sz, rho]] terms."""
    out = np.zeros_like(rho, dtype=complex)
    for sites, gamma in ((ELECTRON_SITES, params.gamma_e), (NUCLEAR_SITES, params.gamma_n)):
        if gamma == 0:
            continue
        for site in sites:
            out -= gamma * double_commutator(embed_pauli("z", site), rho)
    return out


def _error_norm(err, y, y_new, config):
    scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    value = float(np.max(np.abs(err) / scale))
    return value if math.isfinite(value) else math.inf


def rk_adaptive_integrate(rho0, segment, dephasing, config, sample_times=(), renormalize=True):
    """Integrate the master equation over `segment` with a Dormand-Prince 5(4) pair.

    Steps are clipped to land exactly on every requested sample time and on
    t_end. After each accepted step the state is made Hermitian and, when the
    trace has drifted by more than 1e-10, renormalised.
    """
    hbar = segment.hbar
    weights = None if dephasing.is_zero else dephasing.weights()

    def rhs(t, y):
        h = segment.hamiltonian(t)
        out = (-1j / hbar) * (h @ y - y @ h)
        if weights is not None:
            out -= weights * y
        return out

    t, t_end = segment.t_start, segment.t_end
    y = np.array(rho0, dtype=complex)
    times, states = [t], [y.copy()]
    if t_end <= t:
        return Trajectory(tuple(times), tuple(states))

    targets = sorted({float(s) for s in sample_times if t < s < t_end} | {t_end})
    accepted = rejected = renormalizations = 0
    max_drift = abs(np.trace(y) - 1.0) if renormalize else 0.0
    k1 = rhs(t, y)
    evals = 1
    h = min(config.initial_step, config.max_step)
    err_old = 1e-4
    idx = 0
    while idx < len(targets):
        target = targets[idx]
        landing = h >= target - t
        step = target - t if landing else h

        k = [k1]
        for i in range(1, 7):
            dy = sum(a * kj for a, kj in zip(_A[i], k) if a != 0.0)
            k.append(rhs(t + _C[i] * step, y + step * dy))
        evals += 6
        y_new = y + step * sum(b * kj for b, kj in zip(_A[6], k[:6]) if b != 0.0)
        err = _error_norm(step * sum(e * kj for e, kj in zip(_E, k) if e != 0.0), y, y_new, config)

        if err <= 1.0:
            accepted += 1
            t = target if landing else t + step
            y, drift, renormalized = _settle(y_new, t, renormalize)
            max_drift = max(max_drift, drift)
            k1 = k[6]
            if renormalized:
                renormalizations += 1
                k1 = rhs(t, y)
                evals += 1
            factor = _SAFETY * max(err, 1e-10) ** -_EXPO * err_old**_BETA
            factor = min(_FAC_MAX, max(_FAC_MIN, factor))
            err_old = max(err, 1e-4)
            proposed = step * factor
            if landing:
                proposed = max(proposed, h)
                times.append(t)
                states.append(y.copy())
                idx += 1
            h = min(proposed, config.max_step)
        else:
            rejected += 1
            h = step * max(_FAC_MIN, _SAFETY * err**-0.2 if math.isfinite(err) else _FAC_MIN)
            if h < config.min_step:
                raise StiffnessError(t, h, err)

    stats = IntegrationStats(accepted, rejected, renormalizations, float(max_drift), evals)
    return Trajectory(tuple(times), tuple(states), stats)


def _settle(y_new, t, renormalize=True):
    """(Hermitian part of y_new, its trace drift, whether it was renormalised)."""
    y = 0.5 * (y_new + y_new.conj().T)
    if not renormalize:
        return y, 0.0, False
    trace = np.trace(y).real
    drift = abs(trace - 1.0)
    if drift > TRACE_RENORMALIZE_THRESHOLD:
        logging.debug("Renormalised trace at t=%.9g (drift %.3g)", t, drift)
        return y / trace, drift, True
    return y, drift, False


def _filon_weights(x, step):
    """Weights of the slope and curvature terms in the first Magnus term.

    x = (E_a - E_b) step / (2 hbar). The slope weight is imaginary and odd in
    x, the curvature weight real and even, so both weighted matrices stay
    Hermitian.
    """
    small = np.abs(x) < _SERIES_BELOW
    xs = np.where(small, 1.0, x)
    x2 = x * x
    sin, cos = np.sin(xs), np.cos(xs)
    odd = np.where(small, x / 3.0 - x * x2 / 30.0 + x * x2 * x2 / 840.0, (sin - xs * cos) / xs**2)
    even = np.where(
        small,
        -2.0 * x2 / 45.0 + x2 * x2 / 315.0,
        (2.0 / 3.0) * sin / xs + 2.0 * cos / xs**2 - 2.0 * sin / xs**3,
    )
    return 0.5j * step**2 * odd, 0.25 * step**3 * even


def exponential_step(h_start, h_mid, h_end, step, hbar):
    """Propagator over one step from H at its start, midpoint and end.

    H is fitted by a quadratic in the time from the midpoint. Its step average
    is diagonalised and propagated exactly; the remainder enters through the
    first Magnus term in that eigenbasis, integrated in closed form, so fast
    phases cost nothing.
    """
    slope = (h_end - h_start) / step
    curvature = 2.0 * (h_end + h_start - 2.0 * h_mid) / step**2
    evals, evecs = hermitian_eigensystem(h_mid + curvature * (step**2 / 12.0))
    x = 0.5 * step * (evals[:, None] - evals[None, :]) / hbar
    w_slope, w_curve = _filon_weights(x, step)
    dagger = evecs.conj().T
    kick = w_slope * (dagger @ slope @ evecs) + w_curve * (dagger @ curvature @ evecs)
    half = np.exp(-0.5j * step * evals / hbar)
    inner = half[:, None] * propagate_expm(kick, 1.0, hbar) * half[None, :]
    return evecs @ inner @ dagger


def exponential_adaptive_integrate(rho0, segment, dephasing, config, sample_times=(), renormalize=True):
    """Integrate the master equation over `segment` with exponential steps.

    Each attempt takes one full step and two half steps from five Hamiltonian
    samples and keeps the half-step state when the two agree to within
    abs_tol + rel_tol * max|rho|. Dephasing is applied as an exact decay split
    symmetrically around each unitary step. Sample landing and trace handling
    match rk_adaptive_integrate.
    """
    hbar = segment.hbar
    weights = None if dephasing.is_zero else dephasing.weights()

    def advance(y, u, step):
        if weights is None:
            return u @ y @ u.conj().T
        decay = np.exp(-0.5 * step * weights)
        return decay * (u @ (decay * y) @ u.conj().T)

    t, t_end = segment.t_start, segment.t_end
    y = np.array(rho0, dtype=complex)
    times, states = [t], [y.copy()]
    if t_end <= t:
        return Trajectory(tuple(times), tuple(states))

    targets = sorted({float(s) for s in sample_times if t < s < t_end} | {t_end})
    accepted = rejected = renormalizations = 0
    max_drift = abs(np.trace(y) - 1.0) if renormalize else 0.0
    h_now = segment.hamiltonian(t)
    evals = 1
    h = min(config.initial_step, config.max_step)
    idx = 0
    while idx < len(targets):
        target = targets[idx]
        landing = h >= target - t
        step = target - t if landing else h

        quarter, mid, three_quarter, end = (segment.hamiltonian(t + f * step) for f in (0.25, 0.5, 0.75, 1.0))
        evals += 4
        full = advance(y, exponential_step(h_now, mid, end, step, hbar), step)
        first = advance(y, exponential_step(h_now, quarter, mid, 0.5 * step, hbar), 0.5 * step)
        y_new = advance(first, exponential_step(mid, three_quarter, end, 0.5 * step, hbar), 0.5 * step)
        scale = config.abs_tol + config.rel_tol * float(np.max(np.abs(y_new)))
        err = float(np.max(np.abs(full - y_new))) / scale
        if not math.isfinite(err):
            err = math.inf

        if err <= 1.0:
            accepted += 1
            t = target if landing else t + step
            y, drift, renormalized = _settle(y_new, t, renormalize)
            max_drift = max(max_drift, drift)
            renormalizations += renormalized
            h_now = end
            factor = min(_EXP_FAC_MAX, max(_FAC_MIN, _SAFETY * max(err, 1e-10) ** -_EXP_EXPO))
            proposed = step * factor
            if landing:
                proposed = max(proposed, h)
                times.append(t)
                states.append(y.copy())
                idx += 1
            h = min(proposed, config.max_step)
        else:
            rejected += 1
            h = step * max(_FAC_MIN, _SAFETY * err**-_EXP_EXPO if math.isfinite(err) else _FAC_MIN)
            if h < config.min_step:
                raise StiffnessError(t, h, err)

    stats = IntegrationStats(accepted, rejected, renormalizations, float(max_drift), evals)
    return Trajectory(tuple(times), tuple(states), stats)


def integrate_segment(rho0, segment, dephasing, config, sample_times=()):
    """One segment with the configured method."""
    if config.method is Method.RK45:
        return rk_adaptive_integrate(rho0, segment, dephasing, config, sample_times)
    return exponential_adaptive_integrate(rho0, segment, dephasing, config, sample_times)


def frame_generator():
    """Diagonal of G = 1/2 sum over all four sites of sigma^z."""
    return 0.5 * sum(z_diagonal(site) for site in Site)


def _frame_phases(omega_frame, t):
    g = frame_generator()
    return np.exp(1j * omega_frame * t * (g[:, None] - g[None, :]))


def to_rotating_frame(op, omega_frame, t):
    """U op U^dagger with U = exp(i omega t G)."""
    return _frame_phases(omega_frame, t) * op


def from_rotating_frame(op, omega_frame, t):
    return np.conj(_frame_phases(omega_frame, t)) * op


def rotating_hamiltonian(h, omega_frame, t, hbar):
    """H in the rotating frame: U H U^dagger - hbar omega G."""
    return to_rotating_frame(h, omega_frame, t) - hbar * omega_frame * np.diag(frame_generator())


def _stage_hamiltonian(terms, stage, t0, frame, omega_frame, hbar):
    # The frame generator commutes with H_Z + H_int, so only the drive changes.
    shift = hbar * omega_frame * np.diag(frame_generator()) if frame is Frame.ROTATING else 0.0
    static_drive = frame is Frame.ROTATING and stage.drive_on and stage.omega == omega_frame

    def hamiltonian(t):
        h = terms.static(*stage.couplings_at(t - t0))
        if frame is Frame.LAB:
            if stage.drive_on:
                h = h + terms.ac(stage.b_ac, stage.omega, t)
            return h
        h = h - shift
        if static_drive:
            h = h + stage.b_ac * terms.transverse_x
        elif stage.drive_on:
            h = h + to_rotating_frame(terms.ac(stage.b_ac, stage.omega, t), omega_frame, t)
        return h

    return hamiltonian


def evolve_schedule(rho0, schedule, dephasing, config, consts, n_samples=0):
    """Integrate stage by stage, returning (final lab-frame rho, Trajectory).

    In the rotating frame a single frame at the drive frequency spans the whole
    gate, so the stage-4 drive is static there. Sampled states are converted
    back to the lab frame; stage boundaries are always sampled.
    """
    rho0 = np.array(rho0, dtype=complex)
    if not schedule.stages or schedule.total_duration == 0:
        return rho0, Trajectory((0.0,), (rho0,))

    terms = HamiltonianTerms(consts, schedule.b_z)
    omega = schedule.drive_omega if config.frame is Frame.ROTATING else 0.0
    grid = np.linspace(0.0, schedule.total_duration, n_samples) if n_samples >= 2 else ()
    bounds = schedule.boundaries

    rho = to_rotating_frame(rho0, omega, 0.0)
    times, states = [0.0], [rho0]
    stats = IntegrationStats()
    stage_stats = []
    for k, stage in enumerate(schedule.stages):
        t0, t1 = bounds[k], bounds[k + 1]
        segment = Segment(_stage_hamiltonian(terms, stage, t0, config.frame, omega, consts.hbar), t0, t1, consts.hbar)
        part = integrate_segment(rho, segment, dephasing, config, sample_times=[s for s in grid if t0 < s < t1])
        rho = part.final
        for t, state in zip(part.times[1:], part.states[1:]):
            times.append(t)
            states.append(from_rotating_frame(state, omega, t))
        stats = stats.merged(part.stats)
        stage_stats.append((stage.name, part.stats))
        logging.info(
            "Stage %d (%s): %.6g us, %s, %d steps, %d rejected, %d renormalisations, max trace drift %.2e",
            stage.label, stage.name, stage.duration, config.method.value, part.stats.accepted, part.stats.rejected,
            part.stats.renormalizations, part.stats.max_trace_drift,
        )
    final = states[-1]
    return final, Trajectory(tuple(times), tuple(states), stats, tuple(stage_stats))


def write_trajectory_csv(trajectory, path):
    """t_us, the 16 populations, trace, purity and smallest eigenvalue per sample."""
    header = ["t_us"] + [f"p{i:02d}" for i in range(16)] + ["trace", "purity", "min_eig"]
    rows = []
    for t, rho in zip(trajectory.times, trajectory.states):
        herm = 0.5 * (rho + rho.conj().T)
        rows.append(
            [float(t)]
            + [float(p) for p in np.real(np.diag(rho))]
            + [
                float(np.trace(rho).real),
                float(np.real(np.trace(rho @ rho))),
                float(np.linalg.eigvalsh(herm)[0]),
            ]
        )
    write_csv(path, header, rows)
    logging.info("Wrote trajectory (%d samples) to %s", len(rows), path)

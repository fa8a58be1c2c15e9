"""Pulse profiles for A1(t), J(t) and the five simulated stages of the CNOT.

Steps 1 and 7 of the gate (the fast A1 bias switch) are instantaneous
parameter changes: the schedule simply starts and ends with A1 = A2 + dA1
on the J ramps.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from core.errors import ConfigError, DomainError
from core.hamiltonian import HamiltonianParams, find_level_crossing, resonance_frequency

SECH_WIDTH = 5.0
SECH_ALPHA = 1.0 / (1.0 - 1.0 / math.cosh(SECH_WIDTH))
# Breakpoint of the linear-sinusoidal profile as a fraction of the duration.
LINSIN_BREAK = 1.0 / (1.0 + math.pi / 2.0)
_LINSIN_SLOPE = 0.5 * (1.0 + math.pi / 2.0)
_LINSIN_RATE = 0.5 * math.pi * (1.0 + 2.0 / math.pi)

DEFAULT_J_MAX = 810.0


class ProfileKind(str, Enum):
    LINEAR = "linear"
    SECH = "sech"
    LINSIN = "linsin"
    HOLD = "hold"


class Direction(str, Enum):
    RISING = "rising"
    FALLING = "falling"


class ReverseOrder(str, Enum):
    MIRRORED = "mirrored"
    TABLE = "table"


def _fraction(t, duration):
    if not duration > 0:
        raise DomainError(f"profile duration must be positive, got {duration}")
    if t < 0 or t > duration * (1 + 1e-12):
        raise DomainError(f"t={t} outside [0, {duration}]")
    return min(t / duration, 1.0)


def _shape(kind, s):
    if kind is ProfileKind.LINEAR:
        return s
    if kind is ProfileKind.SECH:
        return (1.0 - 1.0 / math.cosh(SECH_WIDTH * s)) / (1.0 - 1.0 / math.cosh(SECH_WIDTH))
    if kind is ProfileKind.LINSIN:
        if s <= LINSIN_BREAK:
            return _LINSIN_SLOPE * s
        return 0.5 + 0.5 * math.sin(_LINSIN_RATE * (s - LINSIN_BREAK))
    return 0.0


def _shape_slope(kind, s):
    if kind is ProfileKind.LINEAR:
        return 1.0
    if kind is ProfileKind.SECH:
        x = SECH_WIDTH * s
        return SECH_ALPHA * SECH_WIDTH * math.tanh(x) / math.cosh(x)
    if kind is ProfileKind.LINSIN:
        if s < LINSIN_BREAK:
            return _LINSIN_SLOPE
        return 0.5 * _LINSIN_RATE * math.cos(_LINSIN_RATE * (s - LINSIN_BREAK))
    return 0.0


def linear_profile(t, T, j_max):
    return j_max * _shape(ProfileKind.LINEAR, _fraction(t, T))


def sech_profile(t, T, j_max=DEFAULT_J_MAX):
    """j_max * alpha * (1 - sech(5 t / T)), alpha = 1 / (1 - sech 5) so the end value is j_max."""
    return j_max * _shape(ProfileKind.SECH, _fraction(t, T))


def linsin_profile(t, T, j_max):
    """Linear up to j_max/2 at T/(1 + pi/2), then a quarter sine up to j_max."""
    return j_max * _shape(ProfileKind.LINSIN, _fraction(t, T))


@dataclass(frozen=True)
class PulseProfile:
    kind: ProfileKind
    start: float
    end: float
    duration: float
    direction: Direction = Direction.RISING

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.duration > 0:
            raise DomainError(f"profile duration must be positive, got {self.duration}")

    def value(self, t):
        s = _fraction(t, self.duration)
        if s >= 1.0:
            return self.end
        if s <= 0.0:
            return self.start
        if self.direction is Direction.RISING:
            return self.start + (self.end - self.start) * _shape(self.kind, s)
        return self.end + (self.start - self.end) * _shape(self.kind, (self.duration - t) / self.duration)

    def derivative(self, t):
        s = _fraction(t, self.duration)
        if self.direction is Direction.RISING:
            return (self.end - self.start) * _shape_slope(self.kind, s) / self.duration
        back = (self.duration - t) / self.duration
        return -(self.start - self.end) * _shape_slope(self.kind, back) / self.duration

    def reversed(self, duration=None):
        """Time-reverse: reversed(t) == self(T - t); `duration` rescales time."""
        direction = Direction.FALLING if self.direction is Direction.RISING else Direction.RISING
        return PulseProfile(self.kind, self.end, self.start, duration or self.duration, direction)


@dataclass(frozen=True)
class Hold:
    """Constant segment."""

    level: float
    duration: float
    kind: ProfileKind = field(default=ProfileKind.HOLD, init=False)

    @property
    def start(self):
        return self.level

    @property
    def end(self):
        return self.level

    def value(self, t):
        _fraction(t, self.duration)
        return self.level

    def derivative(self, t):
        _fraction(t, self.duration)
        return 0.0

    def reversed(self, duration=None):
        return Hold(self.level, duration or self.duration)


def profile_derivative(profile, t):
    """Analytic time derivative (value per microsecond)."""
    return profile.derivative(t)


@dataclass(frozen=True)
class StageDurations:
    """Stage lengths in microseconds; defaults give a 25.9 us gate."""

    ramp_j: float = 9.0
    ramp_a: float = 0.14
    swap: float = 7.5989
    unramp_a: float = 0.14
    unramp_j: float = 9.0

    def __post_init__(self):
        for name in ("ramp_j", "ramp_a", "swap", "unramp_a", "unramp_j"):
            if not getattr(self, name) > 0:
                raise ConfigError("stage duration must be positive", key=f"durations.{name}")

    @property
    def total(self):
        return self.ramp_j + self.ramp_a + self.swap + self.unramp_a + self.unramp_j

    def as_dict(self):
        return {
            "ramp_j": self.ramp_j,
            "ramp_a": self.ramp_a,
            "swap": self.swap,
            "unramp_a": self.unramp_a,
            "unramp_j": self.unramp_j,
        }


@dataclass(frozen=True)
class Stage:
    label: int
    name: str
    duration: float
    a1: object
    a2: object
    j: object
    b_ac: float = 0.0
    omega: float = 0.0

    @property
    def drive_on(self):
        return self.b_ac > 0.0

    def couplings_at(self, t):
        return self.a1.value(t), self.a2.value(t), self.j.value(t)

    def rates_at(self, t):
        return self.a1.derivative(t), self.a2.derivative(t), self.j.derivative(t)


@dataclass(frozen=True)
class GateSchedule:
    b_z: float
    stages: tuple

    @property
    def total_duration(self):
        return float(sum(stage.duration for stage in self.stages))

    @property
    def boundaries(self):
        """Start time of every stage plus the end time."""
        return tuple(np.concatenate([[0.0], np.cumsum([s.duration for s in self.stages])]))

    @property
    def drive_omega(self):
        """Signed drive frequency of the first driven stage (0 if none)."""
        for stage in self.stages:
            if stage.drive_on:
                return stage.omega
        return 0.0

    def stage_at(self, t):
        """(stage, local time) for global time t; boundaries belong to the later stage."""
        if not self.stages:
            raise DomainError("schedule has no stages")
        bounds = self.boundaries
        if t < 0 or t > bounds[-1] * (1 + 1e-12):
            raise DomainError(f"t={t} outside schedule [0, {bounds[-1]}]")
        for k, stage in enumerate(self.stages):
            if t < bounds[k + 1] or k == len(self.stages) - 1:
                return stage, min(t - bounds[k], stage.duration)
        raise DomainError(f"t={t} not covered by the schedule")

    def couplings_at(self, t):
        stage, local = self.stage_at(t)
        return stage.couplings_at(local)

    def drive_at(self, t):
        stage, _ = self.stage_at(t)
        return stage.b_ac, stage.omega

    def subset(self, names):
        return replace(self, stages=tuple(s for s in self.stages if s.name in names))

    def max_boundary_jump(self):
        """Largest jump of A1, A2 or J across a stage boundary."""
        jump = 0.0
        for before, after in zip(self.stages, self.stages[1:]):
            end = before.couplings_at(before.duration)
            start = after.couplings_at(0.0)
            jump = max(jump, max(abs(x - y) for x, y in zip(end, start)))
        return jump


def check_j_max(config):
    crossing = find_level_crossing(config.consts, config.a2, config.b_z)
    if config.j_max >= crossing:
        raise ConfigError(
            f"J_max={config.j_max} must stay below the level crossing at J={crossing:.6g}",
            key="device.j_max",
        )
    return crossing


def swap_point(config):
    """Static parameters held during the swap: A1 = A2, J = J_max, drive off."""
    return HamiltonianParams(config.b_z, config.a2, config.a2, config.j_max)


def j_ramp_stage(config, kind=None):
    """Stage 2: J from 0 to J_max with A1 biased to A2 + dA1."""
    d = config.durations
    j_up = PulseProfile(ProfileKind(kind or config.profile), 0.0, config.j_max, d.ramp_j)
    a1_high = config.a2 + config.delta_a1
    return Stage(2, "ramp_j", d.ramp_j, Hold(a1_high, d.ramp_j), Hold(config.a2, d.ramp_j), j_up)


def a1_ramp_stage(config):
    """Stage 3: A1 back down to A2 along a linear ramp at J = J_max."""
    d = config.durations
    a1_down = PulseProfile(ProfileKind.LINEAR, config.a2 + config.delta_a1, config.a2, d.ramp_a)
    return Stage(3, "ramp_a", d.ramp_a, a1_down, Hold(config.a2, d.ramp_a), Hold(config.j_max, d.ramp_a))


def mapping_schedule(config):
    """Stages 2 and 3 alone, which carry |10> to |symm> and |01> to |anti>."""
    check_j_max(config)
    return GateSchedule(config.b_z, (j_ramp_stage(config), a1_ramp_stage(config)))


def build_cnot_schedule(config, b_ac=None):
    """Stages 2-6 of the adiabatic CNOT for `config`.

    Stage 4 drives at the negative of the |symm> <-> |11> resonance; `b_ac`
    overrides config.b_ac, and one of them must be set.
    """
    consts, d = config.consts, config.durations
    check_j_max(config)
    b_ac = config.b_ac if b_ac is None else b_ac
    if b_ac is None or not b_ac > 0:
        raise ConfigError("B_ac is not set; calibrate it or give a positive value", key="device.b_ac")

    a2, a1_high, j_max = config.a2, config.a2 + config.delta_a1, config.j_max
    omega = -resonance_frequency(consts, swap_point(config))
    kind = ProfileKind(config.profile)

    ramp_j = j_ramp_stage(config)
    j_up = ramp_j.j
    ramp_a = a1_ramp_stage(config)
    a1_down = ramp_a.a1
    swap = Stage(
        4, "swap", d.swap, Hold(a2, d.swap), Hold(a2, d.swap), Hold(j_max, d.swap), b_ac=b_ac, omega=omega
    )
    if ReverseOrder(config.reverse_order) is ReverseOrder.MIRRORED:
        unramp_a = Stage(
            5, "unramp_a", d.unramp_a, a1_down.reversed(d.unramp_a), Hold(a2, d.unramp_a), Hold(j_max, d.unramp_a)
        )
        unramp_j = Stage(
            6, "unramp_j", d.unramp_j, Hold(a1_high, d.unramp_j), Hold(a2, d.unramp_j), j_up.reversed(d.unramp_j)
        )
        tail = (unramp_a, unramp_j)
    else:
        unramp_j = Stage(
            5, "unramp_j", d.unramp_j, Hold(a2, d.unramp_j), Hold(a2, d.unramp_j), j_up.reversed(d.unramp_j)
        )
        unramp_a = Stage(
            6, "unramp_a", d.unramp_a, a1_down.reversed(d.unramp_a), Hold(a2, d.unramp_a), Hold(0.0, d.unramp_a)
        )
        tail = (unramp_j, unramp_a)

    schedule = GateSchedule(config.b_z, (ramp_j, ramp_a, swap) + tail)
    logging.debug(
        "CNOT schedule: %.6g us, profile=%s, order=%s, omega=%.9g rad/us, B_ac=%.6g T",
        schedule.total_duration, kind.value, config.reverse_order, omega, b_ac,
    )
    return schedule


def sample_schedule(schedule, n_samples=1001):
    """Rows (t, A1, A2, J, B_ac) on an even grid over the whole schedule."""
    if n_samples < 2:
        raise DomainError(f"need at least 2 samples, got {n_samples}")
    rows = []
    for t in np.linspace(0.0, schedule.total_duration, n_samples):
        a1, a2, j = schedule.couplings_at(t)
        b_ac, _ = schedule.drive_at(t)
        rows.append((float(t), a1, a2, j, b_ac))
    return rows

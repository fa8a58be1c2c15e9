"""Adiabaticity measure along a pulse stage.

    Theta(t) = max over a != b of hbar |<a| dH/dt |b>| / (E_a - E_b)^2

evaluated in the instantaneous eigenbasis of H(t). By default the maximum runs
over pairs that touch one of the four computational levels, the eigenvectors
with the most weight on both electrons down; transitions among levels the gate
never populates do not limit the ramp.
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.config import resolve_parallelism
from core.errors import DegeneracyError, DomainError
from core.hamiltonian import HamiltonianTerms
from core.pulses import ProfileKind, j_ramp_stage
from core.spin_algebra import DOWN, UP, basis_index, hermitian_eigensystem

DEFAULT_GAP_FLOOR = 1e-6

_ELECTRON_GROUND_ROWS = np.array(
    [basis_index(n1, DOWN, n2, DOWN) for n1, n2 in itertools.product((UP, DOWN), repeat=2)]
)


class LevelSet(str, Enum):
    COMPUTATIONAL = "computational"
    ALL = "all"


@dataclass(frozen=True)
class ThetaPoint:
    theta: float
    pair: tuple
    degenerate_pairs: tuple


@dataclass(frozen=True)
class ThetaSeries:
    times: tuple
    theta: tuple
    pairs: tuple
    labels: tuple

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise DomainError("theta sample times must be strictly increasing")

    @property
    def peak(self):
        return float(max(self.theta))

    @property
    def peak_time(self):
        return float(self.times[int(np.argmax(self.theta))])


def computational_levels(evecs):
    """Indices of the four eigenvectors with the most weight on both electrons down."""
    weight = np.sum(np.abs(evecs[_ELECTRON_GROUND_ROWS, :]) ** 2, axis=0)
    return np.sort(np.argsort(weight)[-4:])


def _theta_from_eigensystem(evals, evecs, dhdt, gap_floor, hbar, levels=None):
    couplings = np.abs(evecs.conj().T @ dhdt @ evecs)
    gaps = evals[:, None] - evals[None, :]
    candidates = ~np.eye(len(evals), dtype=bool)
    if levels is not None:
        touched = np.zeros(len(evals), dtype=bool)
        touched[np.asarray(levels, dtype=int)] = True
        candidates &= touched[:, None] | touched[None, :]
    degenerate = candidates & (np.abs(gaps) < gap_floor)
    usable = candidates & ~degenerate
    if not usable.any():
        raise DegeneracyError(f"every level pair is closer than the gap floor {gap_floor}")
    # -1 keeps the argmax on a usable pair even when every usable ratio is 0
    ratios = np.full_like(couplings, -1.0)
    ratios[usable] = hbar * couplings[usable] / gaps[usable] ** 2
    a, b = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    pairs = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(degenerate))))
    return ThetaPoint(float(ratios[a, b]), (int(min(a, b)), int(max(a, b))), pairs)


def theta_at(h, dhdt, gap_floor=DEFAULT_GAP_FLOOR, hbar=1.0, levels=None):
    """Theta for one instant; pairs closer than `gap_floor` are skipped and listed.

    Level indices refer to ascending eigenvalue order. `levels`, when given,
    keeps only pairs with at least one member in it.
    """
    evals, evecs = hermitian_eigensystem(h)
    return _theta_from_eigensystem(evals, evecs, np.asarray(dhdt), gap_floor, hbar, levels)


def _track_labels(previous, current):
    """Permutation mapping current eigenvector columns onto the previous sample's labels."""
    overlap = np.abs(previous.conj().T @ current) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    labels = np.empty(len(cols), dtype=int)
    labels[cols] = rows
    return labels


def theta_scan(consts, stage, b_z, n_samples=201, gap_floor=DEFAULT_GAP_FLOOR, parallelism=None,
               levels=LevelSet.COMPUTATIONAL):
    """Theta on an even grid over one stage, using the analytic profile derivatives."""
    if n_samples < 2:
        raise DomainError(f"theta_scan needs at least 2 samples, got {n_samples}")
    restrict = LevelSet(levels) is LevelSet.COMPUTATIONAL
    terms = HamiltonianTerms(consts, b_z)
    times = np.linspace(0.0, stage.duration, n_samples)

    def evaluate(t):
        evals, evecs = hermitian_eigensystem(terms.static(*stage.couplings_at(t)))
        point = _theta_from_eigensystem(
            evals, evecs, terms.derivative(*stage.rates_at(t)), gap_floor, consts.hbar,
            computational_levels(evecs) if restrict else None,
        )
        return evecs, point

    with ThreadPoolExecutor(max_workers=resolve_parallelism(parallelism)) as executor:
        results = list(executor.map(evaluate, times))

    labels = np.arange(16)
    tracked = []
    previous = None
    for evecs, point in results:
        if previous is not None:
            labels = labels[_track_labels(previous, evecs)]
        tracked.append(tuple(sorted((int(labels[point.pair[0]]), int(labels[point.pair[1]])))))
        previous = evecs

    series = ThetaSeries(
        times=tuple(float(t) for t in times),
        theta=tuple(point.theta for _, point in results),
        pairs=tuple(point.pair for _, point in results),
        labels=tuple(tracked),
    )
    logging.debug("Theta scan of %s: peak %.4g at t=%.6g us", stage.name, series.peak, series.peak_time)
    return series


def compare_profiles(config, n_samples=401, gap_floor=DEFAULT_GAP_FLOOR, parallelism=None,
                     levels=LevelSet.COMPUTATIONAL):
    """Peak Theta over the J ramp for each profile shape at the configured duration."""
    peaks = {}
    for kind in (ProfileKind.LINEAR, ProfileKind.SECH, ProfileKind.LINSIN):
        stage = j_ramp_stage(config, kind)
        series = theta_scan(config.consts, stage, config.b_z, n_samples, gap_floor, parallelism, levels)
        peaks[kind.value] = series.peak
        logging.info("Profile %s: peak theta %.4g over %.6g us", kind.value, series.peak, stage.duration)
    return peaks

"""Two-donor spin Hamiltonian H = H_Z + H_int(t) + H_ac(t) and its spectral helpers.

Energies are in units u = 7.1e-5 meV, times in microseconds, fields in tesla.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from core.errors import (
    BracketError,
    ConfigError,
    DomainError,
    IdentificationError,
    SingularityError,
)
from core.spin_algebra import (
    DOWN,
    ELECTRON_SITES,
    NUCLEAR_SITES,
    UP,
    Site,
    basis_index,
    dot_coupling,
    embed_nuclear_state,
    embed_pauli,
    hermitian_eigensystem,
    product_state,
    z_diagonal,
)

SINGULARITY_TOLERANCE = 1e-6
IDENTIFICATION_THRESHOLD = 0.5

_SQRT_HALF = np.sqrt(0.5)
NUCLEAR_SYMM = np.array([0, _SQRT_HALF, _SQRT_HALF, 0], dtype=complex)
NUCLEAR_ANTI = np.array([0, _SQRT_HALF, -_SQRT_HALF, 0], dtype=complex)


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants in SI-style units (eV, eV/T, eV*s).

    The simulator works in u = unit_energy_ev (7.1e-5 meV) and microseconds;
    the derived properties give the constants in those units.
    """

    g_n: float = 2.2632
    mu_n_ev: float = 3.15245e-8
    mu_b_ev: float = 5.78838e-5
    hbar_ev_s: float = 6.58212e-16
    unit_energy_ev: float = 7.1e-8

    def __post_init__(self):
        for name in ("g_n", "mu_n_ev", "mu_b_ev", "hbar_ev_s", "unit_energy_ev"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be strictly positive", key=f"constants.{name}")

    @property
    def nuclear_moment(self):
        """g_n * mu_n in u per tesla."""
        return self.g_n * self.mu_n_ev / self.unit_energy_ev

    @property
    def bohr_moment(self):
        """mu_B in u per tesla."""
        return self.mu_b_ev / self.unit_energy_ev

    @property
    def hbar(self):
        """hbar in u * microseconds."""
        return self.hbar_ev_s * 1e6 / self.unit_energy_ev

    def nuclear_zeeman(self, b_z):
        return self.nuclear_moment * b_z

    def electron_zeeman(self, b_z):
        return self.bohr_moment * b_z

    def crossing_estimate(self, b_z):
        """(mu_B B_z + g_n mu_n B_z) / 2, where delta_E is singular."""
        return 0.5 * (self.electron_zeeman(b_z) + self.nuclear_zeeman(b_z))

    def as_dict(self):
        return {
            "g_n": self.g_n,
            "mu_n_ev": self.mu_n_ev,
            "mu_b_ev": self.mu_b_ev,
            "hbar_ev_s": self.hbar_ev_s,
            "unit_energy_ev": self.unit_energy_ev,
        }


@dataclass(frozen=True)
class HamiltonianParams:
    b_z: float
    a1: float
    a2: float
    j: float
    b_ac: float = 0.0
    omega: float = 0.0
    ac_on: bool = False

    def __post_init__(self):
        if not self.b_z > 0:
            raise DomainError(f"B_z must be positive, got {self.b_z}")
        if self.a1 < 0 or self.a2 < 0:
            raise DomainError(f"hyperfine couplings must be non-negative, got A1={self.a1}, A2={self.a2}")
        if self.j < 0:
            raise DomainError(f"exchange coupling must be non-negative, got J={self.j}")
        if self.b_ac < 0:
            raise DomainError(f"B_ac must be non-negative, got {self.b_ac}")


@dataclass(frozen=True)
class SpecialStates:
    """(|10> +/- |01>)/sqrt(2) on the nuclei, electrons in their ground state."""

    symm: np.ndarray
    anti: np.ndarray

    def __post_init__(self):
        for name, vec in (("symm", self.symm), ("anti", self.anti)):
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise DomainError(f"{name} state is not normalised")
        if abs(np.vdot(self.symm, self.anti)) > 1e-12:
            raise DomainError("symm and anti states are not orthogonal")

    @classmethod
    def electron_ground(cls):
        return cls(
            symm=embed_nuclear_state(NUCLEAR_SYMM, DOWN, DOWN),
            anti=embed_nuclear_state(NUCLEAR_ANTI, DOWN, DOWN),
        )


def nuclear_basis_state(label, e1=DOWN, e2=DOWN):
    """|n1 n2> for a label such as "10", tensored with the given electron bits."""
    if label not in ("00", "01", "10", "11"):
        raise DomainError(f"unknown basis label {label!r}")
    return product_state(int(label[0]), e1, int(label[1]), e2)


class HamiltonianTerms:
    """Precomputed operator pieces at a fixed field, combined linearly per call.

    The integrator evaluates H(t) millions of times; building it from cached
    pieces keeps that at a handful of 16x16 additions.
    """

    def __init__(self, consts, b_z):
        if not b_z > 0:
            raise DomainError(f"B_z must be positive, got {b_z}")
        self.consts = consts
        self.b_z = b_z
        eps_n = consts.nuclear_zeeman(b_z)
        eps_e = consts.electron_zeeman(b_z)
        diag = -eps_n * (z_diagonal(Site.N1) + z_diagonal(Site.N2))
        diag = diag + eps_e * (z_diagonal(Site.E1) + z_diagonal(Site.E2))
        self.zeeman_diagonal = diag
        self.zeeman = np.diag(diag).astype(complex)
        self.hyperfine_1 = dot_coupling(Site.N1, Site.E1)
        self.hyperfine_2 = dot_coupling(Site.N2, Site.E2)
        self.exchange = dot_coupling(Site.E1, Site.E2)
        self.transverse_x = _transverse(consts, "x")
        self.transverse_y = _transverse(consts, "y")

    def static(self, a1, a2, j):
        return self.zeeman + a1 * self.hyperfine_1 + a2 * self.hyperfine_2 + j * self.exchange

    def ac(self, b_ac, omega, t):
        if b_ac == 0.0:
            return np.zeros((16, 16), dtype=complex)
        phase = omega * t
        return b_ac * (np.cos(phase) * self.transverse_x + np.sin(phase) * self.transverse_y)

    def derivative(self, da1, da2, dj):
        """dH/dt of the static part given the parameter rates."""
        return da1 * self.hyperfine_1 + da2 * self.hyperfine_2 + dj * self.exchange


def _transverse(consts, axis):
    out = np.zeros((16, 16), dtype=complex)
    for site in NUCLEAR_SITES:
        out = out - consts.nuclear_moment * embed_pauli(axis, site)
    for site in ELECTRON_SITES:
        out = out + consts.bohr_moment * embed_pauli(axis, site)
    return out


def build_zeeman(consts, b_z):
    """-g_n mu_n B_z (sz_n1 + sz_n2) + mu_B B_z (sz_e1 + sz_e2), diagonal."""
    return HamiltonianTerms(consts, b_z).zeeman


def build_interaction(consts, a1, a2, j):
    if a1 < 0 or a2 < 0 or j < 0:
        raise DomainError(f"couplings must be non-negative, got A1={a1}, A2={a2}, J={j}")
    return (
        a1 * dot_coupling(Site.N1, Site.E1)
        + a2 * dot_coupling(Site.N2, Site.E2)
        + j * dot_coupling(Site.E1, Site.E2)
    )


def build_ac(consts, b_ac, omega, t):
    """Circularly polarised transverse drive: cos(wt) on the x terms, sin(wt) on the y terms."""
    if b_ac < 0:
        raise DomainError(f"B_ac must be non-negative, got {b_ac}")
    phase = omega * t
    return b_ac * (np.cos(phase) * _transverse(consts, "x") + np.sin(phase) * _transverse(consts, "y"))


def static_hamiltonian(consts, params):
    return build_zeeman(consts, params.b_z) + build_interaction(consts, params.a1, params.a2, params.j)


def build_total(consts, params, t):
    h = static_hamiltonian(consts, params)
    if params.ac_on:
        h = h + build_ac(consts, params.b_ac, params.omega, t)
    return h


def delta_E(consts, a, j, b_z):
    """Second-order splitting E(anti-like) - E(symm-like) in u.

    2A^2 (1/(mu_B B_z + g_n mu_n B_z) - 1/(mu_B B_z + g_n mu_n B_z - 2J)); negative
    below the level crossing.
    """
    total = consts.electron_zeeman(b_z) + consts.nuclear_zeeman(b_z)
    shifted = total - 2.0 * j
    if abs(shifted) < SINGULARITY_TOLERANCE or abs(total) < SINGULARITY_TOLERANCE:
        raise SingularityError(f"delta_E is singular at J={j} (level crossing at {total / 2:.6g})")
    return 2.0 * a * a * (1.0 / total - 1.0 / shifted)


# Total sigma^z = -2 sector: one spin up, three down. Holds |10>, |01> with
# both electrons down and |11> with one electron flipped.
_CROSSING_SECTOR = np.array(
    [
        basis_index(UP, DOWN, DOWN, DOWN),
        basis_index(DOWN, UP, DOWN, DOWN),
        basis_index(DOWN, DOWN, UP, DOWN),
        basis_index(DOWN, DOWN, DOWN, UP),
    ]
)
_SECTOR_SINGLET = np.array([0, _SQRT_HALF, 0, -_SQRT_HALF], dtype=complex)


def _singlet_gap(terms, a, j):
    h = terms.static(a, a, j)[np.ix_(_CROSSING_SECTOR, _CROSSING_SECTOR)]
    evals, evecs = hermitian_eigensystem(h)
    weights = np.abs(evecs.conj().T @ _SECTOR_SINGLET) ** 2
    k = int(np.argmax(weights))
    others = np.delete(evals, k)
    return float(np.min(np.abs(others - evals[k])))


@lru_cache(maxsize=64)
def find_level_crossing(consts, a, b_z, j_range=None, grid_points=2001):
    """J at which the electron-singlet |11> level meets the |10>/|01> levels.

    The gap between the singlet-like level and its nearest neighbour in the
    total sigma^z = -2 sector is scanned on a grid over `j_range`, then the
    grid minimum is refined by golden-section search.
    """
    if a < 0:
        raise DomainError(f"hyperfine coupling must be non-negative, got {a}")
    terms = HamiltonianTerms(consts, b_z)
    estimate = consts.crossing_estimate(b_z)
    lo, hi = j_range if j_range is not None else (0.5 * estimate, 1.5 * estimate)
    grid = np.linspace(lo, hi, grid_points)
    gaps = np.array([_singlet_gap(terms, a, j) for j in grid])
    i = int(np.argmin(gaps))
    if i == 0 or i == grid_points - 1:
        raise BracketError(f"gap minimum not bracketed by J in [{lo:.6g}, {hi:.6g}]")
    result = minimize_scalar(
        lambda j: _singlet_gap(terms, a, j),
        bracket=(grid[i - 1], grid[i], grid[i + 1]),
        method="golden",
        options={"xtol": 1e-12},
    )
    logging.debug("Level crossing at J=%.9g (gap %.3g, %d evaluations)", result.x, result.fun, result.nfev)
    return float(result.x)


def match_level(evals, evecs, reference, threshold=IDENTIFICATION_THRESHOLD, degeneracy_tol=1e-9):
    """Eigenlevel with maximal overlap with `reference`.

    Overlaps are summed over numerically degenerate clusters; returns the
    cluster energy and the normalised projection of `reference` onto it.
    """
    reference = np.asarray(reference, dtype=complex)
    overlaps = np.abs(evecs.conj().T @ reference) ** 2
    scale = degeneracy_tol * max(1.0, float(np.max(np.abs(evals))))
    clusters = []
    start = 0
    for k in range(1, len(evals) + 1):
        if k == len(evals) or evals[k] - evals[k - 1] > scale:
            clusters.append(np.arange(start, k))
            start = k
    weights = [overlaps[c].sum() for c in clusters]
    best = clusters[int(np.argmax(weights))]
    weight = float(overlaps[best].sum())
    if weight < threshold:
        raise IdentificationError(f"no eigenlevel overlaps the reference state above {threshold} (best {weight:.3g})")
    block = evecs[:, best]
    vector = block @ (block.conj().T @ reference)
    return float(np.mean(evals[best])), vector / np.linalg.norm(vector)


def resonance_frequency(consts, params):
    """Angular frequency (rad/us) of the |symm> <-> |11> transition, always positive."""
    if params.ac_on:
        raise DomainError("resonance_frequency needs the static Hamiltonian (ac_on must be false)")
    evals, evecs = hermitian_eigensystem(static_hamiltonian(consts, params))
    states = SpecialStates.electron_ground()
    e_symm, _ = match_level(evals, evecs, states.symm)
    e_11, _ = match_level(evals, evecs, nuclear_basis_state("11"))
    return abs(e_11 - e_symm) / consts.hbar


def level_energies(consts, schedule, times):
    """Sorted eigenvalues of the static Hamiltonian along a schedule, shape (len(times), 16)."""
    terms = HamiltonianTerms(consts, schedule.b_z)
    out = np.empty((len(times), 16))
    for row, t in enumerate(times):
        a1, a2, j = schedule.couplings_at(t)
        out[row] = hermitian_eigensystem(terms.static(a1, a2, j))[0]
    return out


def spectrum_summary(consts, b_z):
    """Operating-point numbers for the CLI banner and the exporter health check."""
    return {
        "b_z": b_z,
        "nuclear_zeeman_u": consts.nuclear_zeeman(b_z),
        "electron_zeeman_u": consts.electron_zeeman(b_z),
        "crossing_estimate_u": consts.crossing_estimate(b_z),
    }

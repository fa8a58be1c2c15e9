"""Dense linear algebra on the four-spin space |n1 e1 n2 e2>.

Basis index = 8*b(n1) + 4*b(e1) + 2*b(n2) + b(e2), where bit 0 is spin up
(sigma^z = +1) for nuclei and electrons alike. The slot order is fixed for
the whole package.
"""
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np
import scipy.linalg as la

from core.errors import DomainError, HermiticityError

DIM = 16
UP = 0
DOWN = 1

# Asymmetry tolerated (and symmetrized away) by the eigensolver.
HERMITICITY_TOLERANCE = 1e-8

Operator = np.ndarray
DensityMatrix = np.ndarray


class Site(IntEnum):
    N1 = 0
    E1 = 1
    N2 = 2
    E2 = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise DomainError(f"unknown site {value!r}") from None
        return cls(value)


NUCLEAR_SITES = (Site.N1, Site.N2)
ELECTRON_SITES = (Site.E1, Site.E2)

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_I2 = np.eye(2, dtype=complex)


def _frozen(matrix):
    matrix.flags.writeable = False
    return matrix


@lru_cache(maxsize=None)
def _embed(axis, site):
    factors = [_I2] * 4
    factors[site] = PAULI[axis]
    out = factors[0]
    for factor in factors[1:]:
        out = np.kron(out, factor)
    return _frozen(out)


def embed_pauli(axis, site):
    """Pauli matrix for `axis` on `site`, identity on the other three slots."""
    if axis not in PAULI:
        raise DomainError(f"unknown Pauli axis {axis!r}")
    return _embed(axis, int(Site.parse(site)))


@lru_cache(maxsize=None)
def _dot(site_a, site_b):
    out = sum(_embed(axis, site_a) @ _embed(axis, site_b) for axis in "xyz")
    return _frozen(out)


def dot_coupling(site_a, site_b):
    """sigma_a . sigma_b = sum over x, y, z of the two embedded Paulis."""
    a, b = int(Site.parse(site_a)), int(Site.parse(site_b))
    if a == b:
        raise DomainError(f"dot_coupling needs two distinct sites, got {Site(a).name} twice")
    return _dot(min(a, b), max(a, b))


@lru_cache(maxsize=None)
def _z_diagonal(site):
    return _frozen(np.real(np.diag(_embed("z", site))).copy())


def z_diagonal(site):
    """The +/-1 diagonal of sigma^z on `site`, as a real vector of length 16."""
    return _z_diagonal(int(Site.parse(site)))


def total_z():
    return sum(embed_pauli("z", site) for site in Site)


def commutator(a, b):
    return a @ b - b @ a


def double_commutator(site_op, rho):
    """[S, [S, rho]]; the caller applies the -Gamma prefactor."""
    return commutator(site_op, commutator(site_op, rho))


def partial_trace_electrons(rho):
    """Trace out e1 and e2; rows/columns of the result are |n1 n2>."""
    r = np.asarray(rho).reshape([2] * 8)
    return np.einsum("aibjcidj->abcd", r).reshape(4, 4)


def project_electrons(rho, e1=DOWN, e2=DOWN):
    """Nuclear block <n, e1 e2| rho |n', e1 e2> (unnormalised)."""
    r = np.asarray(rho).reshape([2] * 8)
    return r[:, e1, :, e2, :, e1, :, e2].reshape(4, 4)


def basis_index(n1, e1, n2, e2):
    return 8 * n1 + 4 * e1 + 2 * n2 + e2


def product_state(n1, e1, n2, e2):
    psi = np.zeros(DIM, dtype=complex)
    psi[basis_index(n1, e1, n2, e2)] = 1.0
    return psi


def embed_nuclear_state(nuclear, e1=DOWN, e2=DOWN):
    """Tensor a 4-component nuclear vector |n1 n2> with electron bits e1, e2."""
    nuclear = np.asarray(nuclear, dtype=complex)
    psi = np.zeros(DIM, dtype=complex)
    for n1 in (0, 1):
        for n2 in (0, 1):
            psi[basis_index(n1, e1, n2, e2)] = nuclear[2 * n1 + n2]
    return psi


def projector(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def hermitian_eigensystem(h):
    """Ascending eigenvalues and orthonormal eigenvector columns of a Hermitian matrix.

    Inputs whose asymmetry exceeds HERMITICITY_TOLERANCE are rejected; smaller
    asymmetry is removed by symmetrizing.
    """
    h = np.asarray(h)
    asymmetry = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if asymmetry > HERMITICITY_TOLERANCE:
        raise HermiticityError(f"matrix is not Hermitian (max asymmetry {asymmetry:.3g})")
    evals, evecs = la.eigh(0.5 * (h + h.conj().T))
    return evals, evecs


def propagate_expm(h, dt, hbar):
    """exp(-i H dt / hbar) from the eigendecomposition of H."""
    evals, evecs = hermitian_eigensystem(h)
    phases = np.exp(-1j * evals * dt / hbar)
    return np.einsum("ij,j,kj->ik", evecs, phases, evecs.conj())


@dataclass(frozen=True)
class DensityDiagnostics:
    trace_error: float
    hermiticity_error: float
    min_eigenvalue: float
    purity: float

    def ok(self, trace_tol=1e-9, hermiticity_tol=1e-9, eigenvalue_floor=-1e-8):
        return (
            self.trace_error < trace_tol
            and self.hermiticity_error < hermiticity_tol
            and self.min_eigenvalue >= eigenvalue_floor
        )


def density_diagnostics(rho):
    """Trace error, Hermiticity error, smallest eigenvalue and purity of rho."""
    rho = np.asarray(rho)
    herm = 0.5 * (rho + rho.conj().T)
    return DensityDiagnostics(
        trace_error=abs(np.trace(rho) - 1.0),
        hermiticity_error=float(np.max(np.abs(rho - rho.conj().T))),
        min_eigenvalue=float(la.eigvalsh(herm)[0]),
        purity=float(np.real(np.trace(rho @ rho))),
    )

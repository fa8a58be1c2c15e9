import numpy as np
import pytest
import scipy.linalg as la

from core.errors import DomainError, HermiticityError
from core.spin_algebra import (
    DOWN,
    UP,
    Site,
    basis_index,
    commutator,
    density_diagnostics,
    dot_coupling,
    double_commutator,
    embed_nuclear_state,
    embed_pauli,
    hermitian_eigensystem,
    partial_trace_electrons,
    product_state,
    project_electrons,
    projector,
    propagate_expm,
    total_z,
    z_diagonal,
)
from tests.conftest import random_density, random_hermitian


class TestEmbeddings:
    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    @pytest.mark.parametrize("site", list(Site))
    def test_pauli_is_hermitian_involution(self, axis, site):
        op = embed_pauli(axis, site)
        assert np.max(np.abs(op - op.conj().T)) < 1e-12
        np.testing.assert_allclose(op @ op, np.eye(16), atol=1e-14)

    def test_slot_order(self):
        # index 0 is every spin up; n1 is the most significant bit
        assert z_diagonal(Site.N1)[0] == 1.0
        assert z_diagonal(Site.N1)[8] == -1.0
        assert z_diagonal(Site.E2)[1] == -1.0
        assert basis_index(1, 0, 1, 1) == 11

    def test_site_names(self):
        assert Site.parse("n2") is Site.N2
        assert Site.parse(1) is Site.E1
        with pytest.raises(DomainError):
            Site.parse("q1")

    def test_unknown_axis(self):
        with pytest.raises(DomainError):
            embed_pauli("w", Site.N1)

    def test_embeddings_are_read_only(self):
        with pytest.raises(ValueError):
            embed_pauli("x", Site.N1)[0, 0] = 2.0

    def test_same_site_commutator(self):
        x, y, z = (embed_pauli(a, Site.E1) for a in "xyz")
        np.testing.assert_allclose(commutator(x, y), 2j * z, atol=1e-14)

    def test_different_sites_commute(self):
        assert np.max(np.abs(commutator(embed_pauli("x", Site.N1), embed_pauli("y", Site.E2)))) < 1e-14


class TestDotCoupling:
    def test_spectrum_is_triplet_and_singlet(self):
        evals = np.linalg.eigvalsh(dot_coupling(Site.E1, Site.E2))
        np.testing.assert_allclose(evals[:4], -3.0, atol=1e-12)
        np.testing.assert_allclose(evals[4:], 1.0, atol=1e-12)

    def test_symmetric_in_sites(self):
        np.testing.assert_array_equal(dot_coupling("e2", "e1"), dot_coupling(Site.E1, Site.E2))

    def test_identical_sites_rejected(self):
        with pytest.raises(DomainError):
            dot_coupling(Site.N1, "n1")

    def test_conserves_total_z(self):
        for a, b in ((Site.N1, Site.E1), (Site.N2, Site.E2), (Site.E1, Site.E2)):
            assert np.max(np.abs(commutator(total_z(), dot_coupling(a, b)))) < 1e-12


class TestReductions:
    @pytest.mark.parametrize("n1, n2", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_partial_trace_of_product_state(self, n1, n2):
        rho = projector(product_state(n1, UP, n2, DOWN))
        reduced = partial_trace_electrons(rho)
        expected = np.zeros((4, 4))
        expected[2 * n1 + n2, 2 * n1 + n2] = 1.0
        np.testing.assert_allclose(reduced, expected)

    def test_partial_trace_keeps_trace(self, rng):
        rho = random_density(rng)
        assert np.trace(partial_trace_electrons(rho)) == pytest.approx(1.0, abs=1e-12)

    def test_project_electrons_recovers_nuclear_state(self):
        nuclear = np.array([0.6, 0.0, 0.8j, 0.0])
        block = project_electrons(projector(embed_nuclear_state(nuclear, DOWN, DOWN)), DOWN, DOWN)
        np.testing.assert_allclose(block, np.outer(nuclear, nuclear.conj()), atol=1e-15)
        other = project_electrons(projector(embed_nuclear_state(nuclear, DOWN, DOWN)), UP, DOWN)
        assert np.max(np.abs(other)) == 0.0

    def test_double_commutator_scales_coherences(self):
        rho = np.arange(256, dtype=complex).reshape(16, 16)
        z = z_diagonal(Site.E1)
        expected = (z[:, None] - z[None, :]) ** 2 * rho
        np.testing.assert_allclose(double_commutator(embed_pauli("z", Site.E1), rho), expected)


class TestEigensystem:
    def test_reconstructs_matrix(self, rng):
        h = random_hermitian(rng, scale=3.0)
        evals, evecs = hermitian_eigensystem(h)
        assert np.all(np.diff(evals) >= 0)
        np.testing.assert_allclose(evecs @ np.diag(evals) @ evecs.conj().T, h, atol=1e-12)

    def test_rejects_non_hermitian(self):
        h = np.zeros((16, 16), dtype=complex)
        h[0, 1] = 1e-3
        with pytest.raises(HermiticityError):
            hermitian_eigensystem(h)

    def test_tolerates_rounding_asymmetry(self):
        h = np.diag(np.arange(16.0)).astype(complex)
        h[0, 1] = 1e-10
        evals, _ = hermitian_eigensystem(h)
        assert evals[0] == pytest.approx(0.0, abs=1e-9)

    def test_propagator_matches_expm(self, rng):
        h = random_hermitian(rng, scale=2.0)
        u = propagate_expm(h, 0.3, 0.5)
        np.testing.assert_allclose(u, la.expm(-1j * h * 0.3 / 0.5), atol=1e-12)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(16), atol=1e-12)


class TestDiagnostics:
    def test_pure_state(self):
        diag = density_diagnostics(projector(product_state(0, DOWN, 1, DOWN)))
        assert diag.purity == pytest.approx(1.0)
        assert diag.ok()

    def test_flags_negative_eigenvalue(self):
        rho = np.diag([1.1, -0.1] + [0.0] * 14).astype(complex)
        diag = density_diagnostics(rho)
        assert diag.min_eigenvalue == pytest.approx(-0.1)
        assert not diag.ok()


class TestIdentities:
    def test_propagators_compose(self, rng):
        h = random_hermitian(rng, scale=2.0)
        np.testing.assert_allclose(propagate_expm(h, 0.2, 0.5) @ propagate_expm(h, 0.3, 0.5),
                                   propagate_expm(h, 0.5, 0.5), atol=1e-9)

    def test_dephasing_term_is_traceless(self, rng):
        rho = random_density(rng)
        for site in Site:
            assert abs(np.trace(double_commutator(embed_pauli("z", site), rho))) < 1e-12

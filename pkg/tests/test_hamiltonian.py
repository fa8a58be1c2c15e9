from dataclasses import replace

import numpy as np
import pytest

from core.errors import BracketError, ConfigError, DomainError, IdentificationError, SingularityError
from core.hamiltonian import (
    HamiltonianParams,
    HamiltonianTerms,
    PhysicalConstants,
    SpecialStates,
    build_ac,
    build_interaction,
    build_total,
    build_zeeman,
    delta_E,
    find_level_crossing,
    level_energies,
    match_level,
    nuclear_basis_state,
    resonance_frequency,
    spectrum_summary,
    static_hamiltonian,
)
from core.pulses import build_cnot_schedule
from core.spin_algebra import DOWN, UP, basis_index, hermitian_eigensystem

CONSTS = PhysicalConstants()


class TestConstants:
    def test_derived_units(self):
        assert CONSTS.nuclear_moment == pytest.approx(1.00487, rel=1e-4)
        assert CONSTS.bohr_moment == pytest.approx(815.26, rel=1e-4)
        assert CONSTS.hbar == pytest.approx(9.27059e-3, rel=1e-5)

    def test_two_tesla_field(self):
        assert CONSTS.nuclear_zeeman(2.0) == pytest.approx(2.00975, rel=1e-4)
        assert CONSTS.electron_zeeman(2.0) == pytest.approx(1630.53, rel=1e-4)

    def test_rejects_non_positive(self):
        with pytest.raises(ConfigError, match="constants.g_n"):
            PhysicalConstants(g_n=0.0)

    def test_hashable_for_caching(self):
        assert hash(PhysicalConstants()) == hash(CONSTS)


class TestBuilders:
    def test_zeeman_diagonal(self):
        h = build_zeeman(CONSTS, 2.0)
        eps_n, eps_e = CONSTS.nuclear_zeeman(2.0), CONSTS.electron_zeeman(2.0)
        assert h[0, 0].real == pytest.approx(-2 * eps_n + 2 * eps_e)
        # |10> with both electrons in the ground state
        k = basis_index(DOWN, DOWN, UP, DOWN)
        assert h[k, k].real == pytest.approx(-2 * eps_e)
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0

    def test_static_is_hermitian(self):
        h = static_hamiltonian(CONSTS, HamiltonianParams(2.0, 1.8, 1.7, 400.0))
        assert np.max(np.abs(h - h.conj().T)) < 1e-12

    def test_terms_match_builders(self):
        terms = HamiltonianTerms(CONSTS, 2.0)
        expected = build_zeeman(CONSTS, 2.0) + build_interaction(CONSTS, 1.8, 1.7, 400.0)
        np.testing.assert_allclose(terms.static(1.8, 1.7, 400.0), expected, atol=1e-12)
        np.testing.assert_allclose(terms.ac(1e-3, -3.0, 0.7), build_ac(CONSTS, 1e-3, -3.0, 0.7), atol=1e-15)

    def test_derivative_is_linear_in_rates(self):
        terms = HamiltonianTerms(CONSTS, 2.0)
        d = terms.derivative(0.5, 0.0, 90.0)
        np.testing.assert_allclose(d, 0.5 * terms.hyperfine_1 + 90.0 * terms.exchange)

    def test_drive_only_when_on(self):
        off = HamiltonianParams(2.0, 1.7, 1.7, 810.0, b_ac=1e-3, omega=-5.0)
        on = HamiltonianParams(2.0, 1.7, 1.7, 810.0, b_ac=1e-3, omega=-5.0, ac_on=True)
        np.testing.assert_array_equal(build_total(CONSTS, off, 0.3), static_hamiltonian(CONSTS, off))
        assert np.max(np.abs(build_total(CONSTS, on, 0.3) - static_hamiltonian(CONSTS, on))) > 0

    @pytest.mark.parametrize("field, scale", [("a1", 1.0), ("a2", 1.0), ("j", 100.0), ("b_ac", 1e-3)])
    def test_total_is_linear_in_each_coupling(self, rng, field, scale):
        base = HamiltonianParams(2.0, 1.7, 1.6, 300.0, b_ac=5e-4, omega=-5.0, ac_on=True)

        def total(value):
            return build_total(CONSTS, replace(base, **{field: value}), 0.4)

        x, y = scale * rng.uniform(0.1, 2.0, size=2)
        np.testing.assert_allclose(total(x) + total(y) - total(0.0), total(x + y), atol=1e-9)

    def test_negative_couplings_rejected(self):
        with pytest.raises(DomainError):
            build_interaction(CONSTS, -1.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            HamiltonianParams(2.0, 1.0, 1.0, -5.0)
        with pytest.raises(DomainError):
            HamiltonianParams(0.0, 1.0, 1.0, 5.0)


class TestLevelStructure:
    def test_delta_e_sign_and_size(self):
        assert delta_E(CONSTS, 1.706, 810.0, 2.0) == pytest.approx(-0.46, abs=0.01)

    def test_delta_e_matches_diagonalisation(self):
        a, j = 1.706, 400.0
        evals, evecs = hermitian_eigensystem(static_hamiltonian(CONSTS, HamiltonianParams(2.0, a, a, j)))
        states = SpecialStates.electron_ground()
        e_symm, _ = match_level(evals, evecs, states.symm)
        e_anti, _ = match_level(evals, evecs, states.anti)
        assert e_anti - e_symm == pytest.approx(delta_E(CONSTS, a, j, 2.0), rel=0.05)

    def test_delta_e_singular_at_crossing(self):
        j = CONSTS.crossing_estimate(2.0)
        with pytest.raises(SingularityError):
            delta_E(CONSTS, 1.706, j, 2.0)

    def test_level_crossing_position(self):
        crossing = find_level_crossing(CONSTS, 1.706, 2.0)
        assert crossing == pytest.approx(816.65, abs=1.0)
        assert crossing == pytest.approx(CONSTS.crossing_estimate(2.0), abs=0.5)

    def test_weak_hyperfine_crossing_approaches_estimate(self):
        crossing = find_level_crossing(CONSTS, 0.05, 2.0)
        assert crossing == pytest.approx(CONSTS.crossing_estimate(2.0), abs=0.1)

    def test_level_crossing_needs_a_bracket(self):
        with pytest.raises(BracketError):
            find_level_crossing(CONSTS, 1.706, 2.0, j_range=(0.0, 100.0))

    def test_degenerate_levels_are_matched_as_a_cluster(self):
        # J = 0 and A1 = A2: |symm> and |anti> share an energy
        evals, evecs = hermitian_eigensystem(static_hamiltonian(CONSTS, HamiltonianParams(2.0, 1.7, 1.7, 0.0)))
        symm = SpecialStates.electron_ground().symm
        _, vector = match_level(evals, evecs, symm)
        assert abs(np.vdot(symm, vector)) ** 2 > 0.99

    def test_unmatched_reference(self):
        evals = np.array([0.0, 1.0])
        evecs = np.eye(2, dtype=complex)
        with pytest.raises(IdentificationError):
            match_level(evals, evecs, np.array([1.0, 1.0]) / np.sqrt(2), threshold=0.9)

    def test_resonance_frequency(self):
        point = HamiltonianParams(2.0, 1.706, 1.706, 810.0)
        omega = resonance_frequency(CONSTS, point)
        assert omega > 0
        with pytest.raises(DomainError):
            resonance_frequency(CONSTS, HamiltonianParams(2.0, 1.706, 1.706, 810.0, ac_on=True))

    def test_nuclear_basis_state(self):
        psi = nuclear_basis_state("10")
        assert psi[basis_index(DOWN, DOWN, UP, DOWN)] == 1.0
        with pytest.raises(DomainError):
            nuclear_basis_state("2")

    def test_level_energies_along_schedule(self, toy_config):
        schedule = build_cnot_schedule(toy_config)
        times = np.linspace(0.0, schedule.total_duration, 7)
        levels = level_energies(toy_config.consts, schedule, times)
        assert levels.shape == (7, 16)
        assert np.all(np.diff(levels, axis=1) >= 0)

    def test_spectrum_summary(self):
        summary = spectrum_summary(CONSTS, 2.0)
        assert summary["crossing_estimate_u"] == pytest.approx(816.27, abs=0.05)

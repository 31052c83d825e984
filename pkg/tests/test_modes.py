import numpy as np
import pytest

from ionchain import (
    CouplingMatrix,
    TrapConfig,
    eigendecompose,
    ion_displacements,
    mode_frequencies,
    normal_coordinates,
    solve_equilibrium,
)
from ionchain.errors import DegenerateModesError
from ionchain.modes import coupling_entries


def test_coupling_single_ion(system):
    _, _, coupling, _ = system(1)
    assert coupling.entries.shape == (1, 1)
    assert coupling.entries[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_coupling_two_ions_analytic(system):
    # (u2 - u1)^3 = 2 exactly at the analytic equilibrium
    _, _, coupling, _ = system(2)
    assert np.allclose(coupling.entries, [[2.0, -1.0], [-1.0, 2.0]], atol=1e-12)


def test_coupling_three_ions_analytic(system):
    _, _, coupling, _ = system(3)
    expected = np.array(
        [
            [14 / 5, -8 / 5, -1 / 5],
            [-8 / 5, 21 / 5, -8 / 5],
            [-1 / 5, -8 / 5, 14 / 5],
        ]
    )
    assert np.allclose(coupling.entries, expected, atol=1e-12)


@pytest.mark.parametrize("n", range(1, 13))
def test_coupling_row_sums_are_one(system, n):
    _, _, coupling, _ = system(n)
    assert np.allclose(coupling.entries.sum(axis=1), 1.0, atol=1e-9)


def test_coupling_rejects_coincident_positions():
    with pytest.raises(ValueError):
        coupling_entries(np.array([-1.0, 0.0, 0.0]))


def test_coupling_matrix_requires_symmetry():
    with pytest.raises(ValueError):
        CouplingMatrix(entries=np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_eigendecompose_two_ions_analytic(system):
    _, _, _, basis = system(2)
    s = 1 / np.sqrt(2)
    assert np.allclose(basis.eigenvalues, [1.0, 3.0], atol=1e-12)
    assert np.allclose(basis.eigenvectors[:, 0], [s, s], atol=1e-12)
    assert np.allclose(basis.eigenvectors[:, 1], [s, -s], atol=1e-12)


def test_eigendecompose_three_ions_charpoly_oracle(system):
    # characteristic polynomial of the analytic 3x3 matrix, solved by
    # companion roots: an independent route to the eigenvalues
    a = np.array(
        [
            [14 / 5, -8 / 5, -1 / 5],
            [-8 / 5, 21 / 5, -8 / 5],
            [-1 / 5, -8 / 5, 14 / 5],
        ]
    )
    trace = np.trace(a)
    minors = (
        np.linalg.det(a[np.ix_([0, 1], [0, 1])])
        + np.linalg.det(a[np.ix_([0, 2], [0, 2])])
        + np.linalg.det(a[np.ix_([1, 2], [1, 2])])
    )
    det = np.linalg.det(a)
    roots = np.sort(np.roots([1.0, -trace, minors, -det]).real)

    _, _, _, basis = system(3)
    assert np.allclose(basis.eigenvalues, roots, atol=1e-9)
    assert np.allclose(basis.eigenvalues, [1.0, 3.0, 29 / 5], atol=1e-9)


@pytest.mark.parametrize("n", range(1, 13))
def test_mode_basis_invariants(system, n):
    _, _, coupling, basis = system(n)
    vecs = basis.eigenvectors
    eye = np.eye(n)
    assert np.max(np.abs(vecs.T @ vecs - eye)) < 1e-10   # orthonormality
    assert np.max(np.abs(vecs @ vecs.T - eye)) < 1e-10   # completeness
    rebuilt = (vecs * basis.eigenvalues[None, :]) @ vecs.T
    assert np.max(np.abs(rebuilt - coupling.entries)) < 1e-9
    assert basis.eigenvalues[0] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(vecs[:, 0], 1 / np.sqrt(n), atol=1e-9)
    assert np.all(vecs[0, :] > 0)


@pytest.mark.parametrize("n", range(2, 13))
def test_stretch_mode_eigenvalue_is_three(system, n):
    _, _, _, basis = system(n)
    assert basis.eigenvalues[1] == pytest.approx(3.0, abs=1e-9)
    # its eigenvector is the equilibrium configuration itself,
    # up to the positive-first-component sign convention
    u = solve_equilibrium(n)
    expected = u / np.linalg.norm(u)
    expected *= np.sign(expected[0])
    assert np.allclose(basis.eigenvectors[:, 1], expected, atol=1e-9)


def test_eigenvalues_ascending(system):
    for n in (4, 9, 12):
        _, _, _, basis = system(n)
        assert np.all(np.diff(basis.eigenvalues) > 0)


def test_degenerate_matrix_rejected():
    with pytest.raises(DegenerateModesError):
        eigendecompose(CouplingMatrix(entries=np.eye(2)))


def test_mode_frequencies_anchor_and_scaling(system):
    trap, _, _, basis = system(2)
    freqs = mode_frequencies(basis, trap)
    assert freqs[0] == pytest.approx(trap.omega0, rel=1e-9)
    assert freqs[1] == pytest.approx(np.sqrt(3) * trap.omega0, rel=1e-9)
    # quadrupling the mass at fixed stiffness halves every frequency
    heavy = TrapConfig(n_ions=2, ion_mass=4 * trap.ion_mass, kappa=trap.kappa)
    assert np.allclose(mode_frequencies(basis, heavy), freqs / 2, rtol=1e-12)


def test_mode_frequencies_size_mismatch(system):
    trap, _, _, _ = system(3)
    _, _, _, basis2 = system(2)
    with pytest.raises(ValueError):
        mode_frequencies(basis2, trap)


def test_normal_coordinates_zero_and_uniform(system):
    _, _, _, basis = system(4)
    assert np.allclose(normal_coordinates(np.zeros(4), basis), 0.0)
    q = 0.7 * np.ones(4)
    expected = np.zeros(4)
    expected[0] = 0.7 * np.sqrt(4)
    assert np.allclose(normal_coordinates(q, basis), expected, atol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 8])
def test_normal_coordinates_round_trip(system, n):
    _, _, _, basis = system(n)
    rng = np.random.default_rng(2026)
    q = rng.standard_normal(n)
    assert np.max(np.abs(ion_displacements(normal_coordinates(q, basis), basis) - q)) < 1e-12


def test_normal_coordinates_length_mismatch(system):
    _, _, _, basis = system(3)
    with pytest.raises(ValueError):
        normal_coordinates(np.zeros(4), basis)
    with pytest.raises(ValueError):
        ion_displacements(np.zeros(2), basis)

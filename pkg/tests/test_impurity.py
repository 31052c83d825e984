import numpy as np
import pytest
import scipy.linalg

from ionchain import (
    MassDistribution,
    build_scaled_coupling,
    estimate_impurity_mass_exact,
    estimate_impurity_mass_first_order,
    exact_frequency_ratios,
    frequency_ratio,
    perturbation_delta_A,
    perturbation_delta_mu,
    perturbed_modes,
)
from ionchain.errors import NoUsableModesError


def exact_mu(coupling, masses):
    """Sorted eigenvalues of the rescaled coupling matrix."""
    return np.sort(np.linalg.eigvalsh(build_scaled_coupling(coupling, masses)))


def observed_ratios(coupling, masses):
    n = coupling.n_ions
    modes = list(range(2, n + 1))
    return list(zip(modes, exact_frequency_ratios(coupling, masses, modes)))


def test_mass_distribution_statistical_mode():
    masses = MassDistribution(np.array([2.0, 1.0, 1.0, 3.0]))
    assert masses.scale_mass == 1.0
    # ties break toward the smaller value
    tied = MassDistribution(np.array([1.0, 2.0]))
    assert tied.scale_mass == 1.0
    assert np.allclose(tied.delta_masses, [0.0, 1.0])


def test_mass_distribution_validation():
    with pytest.raises(ValueError):
        MassDistribution(np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        MassDistribution.single_impurity(3, 4, 1.0, 1.0)


def test_scaled_coupling_uniform_is_identity_map(system):
    _, _, coupling, _ = system(4)
    masses = MassDistribution(np.full(4, 3.2e-26))
    assert np.array_equal(build_scaled_coupling(coupling, masses), coupling.entries)


def test_scaled_coupling_two_ion_scaling(system):
    _, _, coupling, _ = system(2)
    masses = MassDistribution(np.array([1.0, 4.0]), scale_mass=1.0)
    scaled = build_scaled_coupling(coupling, masses)
    a = coupling.entries
    assert scaled[0, 0] == pytest.approx(a[0, 0])
    assert scaled[1, 1] == pytest.approx(a[1, 1] / 4)
    assert scaled[0, 1] == pytest.approx(a[0, 1] / 2)
    assert scaled[1, 0] == scaled[0, 1]


def test_scaled_eigenvalues_match_generalized_oracle(system):
    # independent route: the generalized problem A x = mu (M/Mbar) x
    _, _, coupling, _ = system(3)
    masses = MassDistribution.single_impurity(3, 3, 1.05, 1.0)
    oracle = np.sort(
        scipy.linalg.eigh(
            coupling.entries, np.diag(masses.masses), eigvals_only=True
        )
    )
    assert np.allclose(exact_mu(coupling, masses), oracle, atol=1e-12)


def test_delta_A_uniform_zero(system):
    _, _, coupling, _ = system(3)
    masses = MassDistribution(np.full(3, 7.0), scale_mass=7.0)
    assert np.all(perturbation_delta_A(coupling, masses) == 0.0)


def test_delta_A_single_impurity_structure(system):
    _, _, coupling, _ = system(4)
    delta = 0.05
    masses = MassDistribution.single_impurity(4, 2, 1 + delta, 1.0)
    dA = perturbation_delta_A(coupling, masses)
    a = coupling.entries
    # only row/column 2 is touched; the diagonal entry carries double weight
    mask = np.zeros((4, 4), dtype=bool)
    mask[1, :] = mask[:, 1] = True
    assert np.all(dA[~mask] == 0.0)
    assert dA[1, 1] == pytest.approx(-delta * a[1, 1], rel=1e-12)
    assert dA[0, 1] == pytest.approx(-delta / 2 * a[0, 1], rel=1e-12)


def test_delta_A_second_order_remainder_scaling(system):
    _, _, coupling, _ = system(3)
    remainders = []
    for delta in (0.04, 0.02, 0.01):
        masses = MassDistribution.single_impurity(3, 1, 1 + delta, 1.0)
        approx = coupling.entries + perturbation_delta_A(coupling, masses)
        remainders.append(
            np.max(np.abs(approx - build_scaled_coupling(coupling, masses)))
        )
    for big, small in zip(remainders, remainders[1:]):
        assert 3.5 < big / small < 4.5


def test_delta_A_perturbative_guard(system):
    _, _, coupling, _ = system(3)
    with pytest.warns(UserWarning):
        perturbation_delta_A(
            coupling, MassDistribution.single_impurity(3, 1, 1.2, 1.0)
        )
    with pytest.raises(ValueError):
        perturbation_delta_A(
            coupling, MassDistribution.single_impurity(3, 1, 1.6, 1.0)
        )


def test_delta_mu_zero_for_uniform(system):
    _, _, _, basis = system(4)
    masses = MassDistribution(np.full(4, 2.0), scale_mass=2.0)
    assert np.all(perturbation_delta_mu(basis, masses) == 0.0)


def test_delta_mu_com_reduces_to_mean_shift(system):
    _, _, _, basis = system(5)
    rng = np.random.default_rng(3)
    masses = MassDistribution(1.0 + 0.02 * rng.random(5), scale_mass=1.0)
    shifts = perturbation_delta_mu(basis, masses)
    assert shifts[0] == pytest.approx(-masses.delta_masses.sum() / 5, rel=1e-9)


def test_delta_mu_uniform_heavier_chain(system):
    # every ion heavier by delta: first-order -delta, exact Mbar/(Mbar+delta)
    _, _, coupling, basis = system(3)
    delta = 0.01
    masses = MassDistribution(np.full(3, 1 + delta), scale_mass=1.0)
    shifts = perturbation_delta_mu(basis, masses)
    assert shifts[0] == pytest.approx(-delta, rel=1e-12)
    exact_shift = 1.0 / (1 + delta) - 1.0
    assert abs(shifts[0] - exact_shift) < 1.1 * delta**2


def test_delta_mu_against_exact_eigensolve(system):
    # frozen from the exact oracle: the second-order remainder constant is
    # about 1.5 per mode for an edge impurity, so 2 delta^2 bounds it
    _, _, coupling, basis = system(3)
    delta = 0.05
    masses = MassDistribution.single_impurity(3, 1, 1 + delta, 1.0)
    first_order = perturbation_delta_mu(basis, masses)
    exact_shift = exact_mu(coupling, masses) - basis.eigenvalues
    assert np.max(np.abs(exact_shift - first_order)) < 2 * delta**2


@pytest.mark.parametrize("n", range(2, 7))
def test_delta_mu_second_order_slope(system, n):
    _, _, coupling, basis = system(n)
    deltas = np.array([0.01, 0.02, 0.04])
    diffs = np.empty((deltas.size, n))
    for k, delta in enumerate(deltas):
        masses = MassDistribution.single_impurity(n, 1, 1 + delta, 1.0)
        diffs[k] = np.abs(
            exact_mu(coupling, masses)
            - basis.eigenvalues
            - perturbation_delta_mu(basis, masses)
        )
    for p in range(n):
        slope = np.polyfit(np.log(deltas), np.log(diffs[:, p]), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.2)


def test_frequency_ratio_uniform_and_two_ion(system):
    _, _, _, basis3 = system(3)
    uniform = MassDistribution(np.full(3, 1.0), scale_mass=1.0)
    assert frequency_ratio(2, uniform, basis3) == pytest.approx(
        np.sqrt(3), rel=1e-12
    )
    _, _, _, basis2 = system(2)
    uniform2 = MassDistribution(np.full(2, 1.0), scale_mass=1.0)
    assert frequency_ratio(2, uniform2, basis2) == pytest.approx(
        np.sqrt(3), rel=1e-12
    )


def test_frequency_shift_identity(system):
    # delta omega / omega = delta mu / (2 mu) at first order
    _, _, _, basis = system(4)
    delta = 1e-4
    masses = MassDistribution.single_impurity(4, 2, 1 + delta, 1.0)
    dmu = perturbation_delta_mu(basis, masses)
    for p in (2, 3, 4):
        ratio = frequency_ratio(p, masses, basis)
        lhs = ratio / np.sqrt(basis.eigenvalues[p - 1]) - 1.0
        rhs = dmu[p - 1] / (2 * basis.eigenvalues[p - 1]) - dmu[0] / 2.0
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_first_order_no_impurity(system):
    _, _, _, basis = system(3)
    ratios = [(p, float(np.sqrt(basis.eigenvalues[p - 1]))) for p in (2, 3)]
    estimate = estimate_impurity_mass_first_order(ratios, 1, basis, 1.0)
    assert estimate.estimated_mass == pytest.approx(1.0, abs=1e-12)


def test_first_order_recovery_five_percent(system):
    _, _, coupling, basis = system(3)
    truth = 1.05
    masses = MassDistribution.single_impurity(3, 1, truth, 1.0)
    estimate = estimate_impurity_mass_first_order(
        observed_ratios(coupling, masses), 1, basis, 1.0
    )
    assert abs(estimate.estimated_mass - truth) / truth < 3e-3
    assert estimate.method == "first-order-inversion"
    assert estimate.used_modes == (2, 3)
    assert estimate.uncertainty > 0


def test_first_order_error_grows_quadratically(system):
    _, _, coupling, basis = system(3)
    per_mode_errors = {}
    combined_errors = {}
    for truth in (1.05, 1.20):
        masses = MassDistribution.single_impurity(3, 1, truth, 1.0)
        estimate = estimate_impurity_mass_first_order(
            observed_ratios(coupling, masses), 1, basis, 1.0
        )
        per_mode_errors[truth] = np.abs(estimate.per_mode_estimates - truth)
        combined_errors[truth] = abs(estimate.estimated_mass - truth)
    # a 4x larger deviation produces roughly 16x the per-mode error
    growth = per_mode_errors[1.20] / per_mode_errors[1.05]
    assert np.all((8 < growth) & (growth < 24))
    assert combined_errors[1.20] / combined_errors[1.05] > 4


def test_first_order_exact_in_small_delta_limit(system):
    _, _, coupling, basis = system(3)
    for delta in (0.001, 0.005, 0.01, 0.05):
        masses = MassDistribution.single_impurity(3, 1, 1 + delta, 1.0)
        estimate = estimate_impurity_mass_first_order(
            observed_ratios(coupling, masses), 1, basis, 1.0
        )
        assert abs(estimate.estimated_mass - (1 + delta)) < 1.0 * delta**2


def test_first_order_two_ion_chain_unusable(system):
    _, _, coupling, basis = system(2)
    masses = MassDistribution.single_impurity(2, 1, 1.05, 1.0)
    with pytest.raises(NoUsableModesError):
        estimate_impurity_mass_first_order(
            observed_ratios(coupling, masses), 1, basis, 1.0
        )


def test_first_order_excludes_uncoupled_mode(system):
    # central impurity in a 3-chain: the antisymmetric mode has a node there
    _, _, coupling, basis = system(3)
    masses = MassDistribution.single_impurity(3, 2, 1.04, 1.0)
    estimate = estimate_impurity_mass_first_order(
        observed_ratios(coupling, masses), 2, basis, 1.0
    )
    assert estimate.used_modes == (3,)
    assert estimate.excluded_modes[0][0] == 2
    assert abs(estimate.estimated_mass - 1.04) < 2 * 0.04**2


def test_inversion_formula_prefactor_reconciliation(system):
    # Two printed forms of the single-mode inversion differ by a factor N
    # on the correction term.  Only the form derived directly from the
    # frequency-ratio expression converges to the truth at second order;
    # the other leaves a first-order error.
    _, _, coupling, basis = system(3)
    p = 2
    root_mu = np.sqrt(basis.eigenvalues[p - 1])
    b_i_sq = basis.eigenvectors[0, p - 1] ** 2
    derived_errors = []
    printed_errors = []
    deltas = (0.02, 0.01, 0.005)
    for delta in deltas:
        masses = MassDistribution.single_impurity(3, 1, 1 + delta, 1.0)
        ratio = exact_frequency_ratios(coupling, masses, [p])[0]
        correction = (ratio - root_mu) / (ratio / 3 - root_mu * b_i_sq)
        derived_errors.append(abs((1 + 2 * correction) - (1 + delta)))
        printed_errors.append(abs((1 + 2 * 3 * correction) - (1 + delta)))
    for delta, derived, printed in zip(deltas, derived_errors, printed_errors):
        assert derived < 3 * delta**2
        assert printed > delta
    # quadratic versus linear decay under delta halving
    assert derived_errors[0] / derived_errors[1] == pytest.approx(4.0, abs=0.5)
    assert printed_errors[0] / printed_errors[1] == pytest.approx(2.0, abs=0.5)


def test_exact_search_round_trip(system):
    _, _, coupling, basis = system(4)
    truth = 1.30
    masses = MassDistribution.single_impurity(4, 2, truth, 1.0)
    estimate = estimate_impurity_mass_exact(
        observed_ratios(coupling, masses), basis, coupling, 1.0,
        candidate_positions=[2],
    )
    assert estimate.impurity_index == 2
    assert estimate.estimated_mass == pytest.approx(truth, rel=1e-8)
    assert estimate.method == "exact-search"
    assert estimate.residual < 1e-10


@pytest.mark.parametrize("n", range(2, 9))
def test_exact_search_consistency_grid(system, n):
    _, _, coupling, basis = system(n)
    for site in range(1, n + 1):
        for truth in (0.5, 0.75, 1.25, 1.5, 2.0):
            masses = MassDistribution.single_impurity(n, site, truth, 1.0)
            estimate = estimate_impurity_mass_exact(
                observed_ratios(coupling, masses), basis, coupling, 1.0,
                candidate_positions=[site],
            )
            recovered = [estimate.estimated_mass] + [
                m for _, m in estimate.tied_candidates
            ]
            assert min(abs(m - truth) / truth for m in recovered) < 1e-8


def test_exact_search_mirror_tie(system):
    _, _, coupling, basis = system(4)
    masses = MassDistribution.single_impurity(4, 1, 1.4, 1.0)
    estimate = estimate_impurity_mass_exact(
        observed_ratios(coupling, masses), basis, coupling, 1.0
    )
    assert estimate.ambiguous
    tied_sites = {i for i, _ in estimate.tied_candidates}
    assert tied_sites == {1, 4}
    for _, mass in estimate.tied_candidates:
        assert mass == pytest.approx(1.4, rel=1e-8)


def test_exact_search_uniform_degenerate(system):
    _, _, coupling, basis = system(4)
    masses = MassDistribution(np.full(4, 1.0), scale_mass=1.0)
    estimate = estimate_impurity_mass_exact(
        observed_ratios(coupling, masses), basis, coupling, 1.0
    )
    assert estimate.degenerate
    assert estimate.ambiguous
    assert estimate.estimated_mass == pytest.approx(1.0, rel=1e-6)


def test_exact_search_beats_first_order(system):
    _, _, coupling, basis = system(3)
    masses = MassDistribution.single_impurity(3, 1, 1.15, 1.0)
    ratios = observed_ratios(coupling, masses)
    first = estimate_impurity_mass_first_order(ratios, 1, basis, 1.0)
    exact = estimate_impurity_mass_exact(
        ratios, basis, coupling, 1.0, candidate_positions=[1]
    )
    assert exact.residual <= first.residual


def test_exact_search_needs_two_ratios_for_position(system):
    _, _, coupling, basis = system(4)
    with pytest.raises(ValueError):
        estimate_impurity_mass_exact([(2, 1.7)], basis, coupling, 1.0)


@pytest.mark.parametrize("n", range(2, 7))
def test_heavier_impurity_lowers_coupled_modes(system, n):
    _, _, coupling, basis = system(n)
    masses = MassDistribution.single_impurity(n, 1, 1.3, 1.0)
    mu_prime = exact_mu(coupling, masses)
    couples = np.abs(basis.eigenvectors[0, :]) > 1e-9
    assert np.all(mu_prime[couples] < basis.eigenvalues[couples])


def test_perturbed_modes_uniform_matches_homogeneous(system):
    trap, _, coupling, basis = system(4)
    masses = MassDistribution(np.full(4, trap.ion_mass))
    modes = perturbed_modes(coupling, masses, trap)
    assert np.allclose(modes.eigenvalues, basis.eigenvalues, atol=1e-10)
    assert np.allclose(modes.frequencies, basis.frequencies, rtol=1e-10)
    vecs = modes.eigenvectors
    assert np.max(np.abs(vecs.T @ vecs - np.eye(4))) < 1e-10


def test_perturbed_modes_inhomogeneous_invariants(system):
    trap, _, coupling, _ = system(5)
    rng = np.random.default_rng(17)
    masses = MassDistribution(
        trap.ion_mass * (1.0 + 0.3 * rng.random(5)), scale_mass=trap.ion_mass
    )
    scaled = build_scaled_coupling(coupling, masses)
    assert np.max(np.abs(scaled - scaled.T)) < 1e-15
    modes = perturbed_modes(coupling, masses, trap)
    eye = np.eye(5)
    vecs = modes.eigenvectors
    assert np.max(np.abs(vecs.T @ vecs - eye)) < 1e-10
    assert np.max(np.abs(vecs @ vecs.T - eye)) < 1e-10
    assert np.all(np.diff(modes.eigenvalues) > 0)
    assert np.allclose(
        modes.frequencies,
        np.sqrt(trap.kappa * modes.eigenvalues / masses.scale_mass),
        rtol=1e-12,
    )

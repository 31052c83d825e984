"""Mode analysis of a chain with unequal masses and dark-ion mass estimation.

With mass-weighted coordinates, the inhomogeneous chain keeps a symmetric
eigenproblem: the coupling matrix is rescaled entrywise by the ion masses
and diagonalized exactly.  A first-order perturbation series in the mass
deviations gives closed-form frequency shifts, and inverting the shifted
frequency ratios estimates the mass of a single impurity.  The exact
rescaled eigenproblem doubles as the forward model for a brute-force
search, which stays valid when the impurity is far from the majority mass.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NoUsableModesError
from .modes import _apply_mode_conventions

# Mass-ratio bracket for the exact search.
_RATIO_BRACKET = (0.2, 5.0)

# Candidates within 5% of the best search residual count as tied.
_TIE_RATIO = 0.05


@dataclass(frozen=True)
class MassDistribution:
    """Per-ion masses plus the scale mass used to nondimensionalize.

    When ``scale_mass`` is omitted it defaults to the statistical mode of
    the masses (ties broken toward the smaller value).
    """

    masses: np.ndarray
    scale_mass: float = None

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size < 1:
            raise ValueError("masses must be a non-empty 1-D array")
        if np.any(m <= 0):
            raise ValueError("all masses must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        if self.scale_mass is None:
            values, counts = np.unique(m, return_counts=True)
            object.__setattr__(
                self, "scale_mass", float(values[counts == counts.max()][0])
            )
        if not self.scale_mass > 0:
            raise ValueError("scale_mass must be positive")

    @classmethod
    def single_impurity(cls, n_ions, index, impurity_mass, majority_mass):
        """Chain of ``majority_mass`` ions with one substitution (1-based index)."""
        if not 1 <= index <= n_ions:
            raise ValueError(f"impurity index {index} outside 1..{n_ions}")
        m = np.full(n_ions, float(majority_mass))
        m[index - 1] = impurity_mass
        return cls(masses=m, scale_mass=float(majority_mass))

    @property
    def n_ions(self):
        return self.masses.size

    @property
    def delta_masses(self):
        """Deviations from the scale mass."""
        return self.masses - self.scale_mass


@dataclass(frozen=True)
class PerturbedModes:
    """Eigenstructure of the mass-rescaled coupling matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    frequencies: np.ndarray  # rad/s, sqrt(kappa * mu' / scale_mass)

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "frequencies"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_ions(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class MassEstimate:
    """Impurity mass estimate with per-mode detail and ambiguity flags."""

    impurity_index: int
    estimated_mass: float            # kg
    method: str                      # "first-order-inversion" | "exact-search"
    per_mode_estimates: np.ndarray   # kg, one per usable mode
    used_modes: tuple                # 1-based mode indices behind the estimates
    residual: float                  # RMS frequency-ratio misfit at the estimate
    uncertainty: float               # scatter of the per-mode estimates, kg
    excluded_modes: tuple = ()       # (mode, reason) pairs
    ambiguous: bool = False
    degenerate: bool = False
    tied_candidates: tuple = ()      # (index, mass kg) pairs within tolerance

    def __post_init__(self):
        est = np.asarray(self.per_mode_estimates, dtype=float)
        est.setflags(write=False)
        object.__setattr__(self, "per_mode_estimates", est)
        if est.size and not np.all(np.isfinite(est)):
            raise ValueError("per-mode estimates must be finite")


def build_scaled_coupling(coupling, masses):
    """Mass-rescaled coupling matrix A'_mn = scale_mass * A_mn / sqrt(M_n M_m).

    Equals the homogeneous matrix exactly when every mass is the scale mass.
    """
    a = coupling.entries
    if masses.n_ions != a.shape[0]:
        raise ValueError("mass distribution and coupling matrix sizes differ")
    root_m = np.sqrt(masses.masses / masses.scale_mass)
    return a / np.outer(root_m, root_m)


def perturbation_delta_A(coupling, masses):
    """First-order change of the coupling matrix for small mass deviations.

    Delta A_mn = -(dM_m + dM_n) A_mn / (2 scale_mass); the omitted remainder
    is second order in dM/scale_mass.
    """
    rel = np.max(np.abs(masses.delta_masses)) / masses.scale_mass
    if rel >= 0.5:
        raise ValueError(
            f"mass deviations of {rel:.2f} relative are outside the "
            "perturbative regime (limit 0.5)"
        )
    if rel > 0.1:
        warnings.warn(
            f"mass deviations of {rel:.2f} relative strain the first-order "
            "expansion",
            stacklevel=2,
        )
    d = masses.delta_masses
    return -(d[:, None] + d[None, :]) * coupling.entries / (2 * masses.scale_mass)


def perturbation_delta_mu(basis, masses):
    """First-order eigenvalue shifts: -(mu_p / scale_mass) sum_m (b^(p)_m)^2 dM_m.

    For the center-of-mass mode this reduces to the mean mass deviation,
    -(1/(N scale_mass)) sum_m dM_m, since its eigenvector is uniform.
    """
    if masses.n_ions != basis.n_ions:
        raise ValueError("mass distribution and basis sizes differ")
    weights = basis.eigenvectors**2  # column p holds (b^(p)_m)^2
    return -basis.eigenvalues / masses.scale_mass * (masses.delta_masses @ weights)


def perturbed_modes(coupling, masses, config):
    """Exact eigenstructure of the rescaled coupling matrix.

    Frequencies are omega'_p = sqrt(kappa * mu'_p / scale_mass); with
    uniform masses they coincide with the homogeneous chain's.
    """
    scaled = build_scaled_coupling(coupling, masses)
    eigenvalues, eigenvectors = np.linalg.eigh(scaled)
    mu, vecs = _apply_mode_conventions(eigenvalues, eigenvectors.copy(), symmetrize=False)
    freqs = np.sqrt(config.kappa * mu / masses.scale_mass)
    return PerturbedModes(eigenvalues=mu, eigenvectors=vecs, frequencies=freqs)


def frequency_ratio(p, masses, basis):
    """First-order ratio of mode-p frequency to the center-of-mass frequency.

    ratio = sqrt(mu_p) * (2 scale_mass - sum_m dM_m (b^(p)_m)^2)
                       / (2 scale_mass - sum_m dM_m / N)

    Reduces to sqrt(mu_p) for uniform masses.
    """
    n = basis.n_ions
    if not 2 <= p <= n:
        raise ValueError(f"mode index p={p} outside 2..{n}")
    d = masses.delta_masses
    mbar = masses.scale_mass
    b_sq = basis.eigenvectors[:, p - 1] ** 2
    return float(
        np.sqrt(basis.eigenvalues[p - 1])
        * (2 * mbar - d @ b_sq)
        / (2 * mbar - d.sum() / n)
    )


def exact_frequency_ratios(coupling, masses, mode_indices):
    """Frequency ratios omega'_p / omega'_1 from the exact eigenproblem."""
    n = coupling.n_ions
    for p in mode_indices:
        if not 1 <= p <= n:
            raise ValueError(f"mode index p={p} outside 1..{n}")
    mu = np.sort(np.linalg.eigvalsh(build_scaled_coupling(coupling, masses)))
    return np.array([np.sqrt(mu[p - 1] / mu[0]) for p in mode_indices])


def _first_order_ratio(p, delta, index, basis):
    """Single-impurity :func:`frequency_ratio` with deviation in scale-mass units."""
    n = basis.n_ions
    b_sq = basis.eigenvectors[index - 1, p - 1] ** 2
    return np.sqrt(basis.eigenvalues[p - 1]) * (2 - delta * b_sq) / (2 - delta / n)


def estimate_impurity_mass_first_order(observed_ratios, impurity_index, basis, ref_mass):
    """Invert observed frequency ratios for a single impurity's mass.

    ``observed_ratios`` is a sequence of (p, ratio) pairs with 1-based mode
    index p >= 2.  Inverting the first-order ratio expression for a single
    deviating mass at the known site i gives, per mode,

        dM = 2 ref_mass (r_p - sqrt(mu_p))
             / (r_p / N - sqrt(mu_p) (b^(p)_i)^2),

    and the per-mode estimates are combined by inverse-residual weighting.
    Modes that do not couple to the impurity, or whose inversion
    denominator vanishes (for N = 2 every mode does), are excluded and
    reported.

    Raises
    ------
    NoUsableModesError
        If no observed mode survives the exclusions.
    """
    n = basis.n_ions
    if not 1 <= impurity_index <= n:
        raise ValueError(f"impurity index {impurity_index} outside 1..{n}")

    mu = basis.eigenvalues
    b_i = basis.eigenvectors[impurity_index - 1, :]

    used, deltas, excluded = [], [], []
    for p, ratio in observed_ratios:
        p = int(p)
        if not 2 <= p <= n:
            raise ValueError(f"mode index p={p} outside 2..{n}")
        root_mu = np.sqrt(mu[p - 1])
        if abs(b_i[p - 1]) < 1e-9:
            excluded.append((p, "mode does not couple to the impurity site"))
            continue
        # The first-order sensitivity of the ratio is proportional to
        # 1/N - (b^(p)_i)^2; when that vanishes (every mode of N = 2 does)
        # the ratio carries no mass information at this order.
        if abs(1.0 / n - b_i[p - 1] ** 2) < 1e-9:
            excluded.append((p, "ratio is first-order insensitive to this site"))
            continue
        denom = ratio / n - root_mu * b_i[p - 1] ** 2
        if abs(denom) < 1e-9 * root_mu:
            excluded.append((p, "inversion denominator vanishes"))
            continue
        used.append(p)
        deltas.append(2.0 * (ratio - root_mu) / denom)  # in units of ref_mass
    if not used:
        raise NoUsableModesError(
            "no usable mode: every observed mode is excluded "
            f"({'; '.join(f'p={p}: {why}' for p, why in excluded) or 'none observed'})"
        )

    deltas = np.array(deltas)
    ratio_by_mode = dict((int(p), r) for p, r in observed_ratios)

    def rms_misfit(delta):
        errs = [ratio_by_mode[p] - _first_order_ratio(p, delta, impurity_index, basis)
                for p in used]
        return float(np.sqrt(np.mean(np.square(errs))))

    # Weight each mode by how consistently its estimate predicts the others.
    floor = 1e-12 * float(np.max(np.sqrt(mu)))
    weights = np.array([1.0 / (rms_misfit(d) + floor) ** 2 for d in deltas])
    weights /= weights.sum()
    delta_hat = float(weights @ deltas)
    scatter = float(np.sqrt(weights @ (deltas - delta_hat) ** 2))

    return MassEstimate(
        impurity_index=impurity_index,
        estimated_mass=ref_mass * (1.0 + delta_hat),
        method="first-order-inversion",
        per_mode_estimates=ref_mass * (1.0 + deltas),
        used_modes=tuple(used),
        residual=rms_misfit(delta_hat),
        uncertainty=ref_mass * scatter,
        excluded_modes=tuple(excluded),
    )


def _search_objective(coupling, index, mode_indices, observed):
    n = coupling.n_ions

    def objective(ratio):
        masses = MassDistribution.single_impurity(n, index, ratio, 1.0)
        model = exact_frequency_ratios(coupling, masses, mode_indices)
        return float(np.sum((observed - model) ** 2))

    return objective


def _polish_minimum(objective, x0, bracket):
    """Two rounds of three-point parabolic refinement around ``x0``.

    Brent stops at the function-noise floor; a parabola through points a
    controlled distance apart gets the vertex well below it.
    """
    x = x0
    for h in (1e-5, 1e-7):
        lo, hi = x - h, x + h
        if lo <= bracket[0] or hi >= bracket[1]:
            continue
        f_lo, f_mid, f_hi = objective(lo), objective(x), objective(hi)
        denom = f_lo - 2 * f_mid + f_hi
        if denom > 0:
            shift = 0.5 * h * (f_lo - f_hi) / denom
            x = x + np.clip(shift, -h, h)
    return x


_SCAN_POINTS = 81


def _candidate_minima(objective):
    """All local minima of the objective over the mass-ratio bracket.

    The misfit is not unimodal in general (mirror and mass-rescaling
    symmetries can give several exact fits), so a coarse logarithmic scan
    brackets every basin before Brent refines it.
    """
    grid = np.geomspace(*_RATIO_BRACKET, _SCAN_POINTS)
    values = np.array([objective(x) for x in grid])
    idx = [
        k for k in range(grid.size)
        if (k == 0 or values[k] <= values[k - 1])
        and (k == grid.size - 1 or values[k] <= values[k + 1])
    ]
    minima = []
    for k in idx:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, grid.size - 1)]
        if lo == hi:
            continue
        opt = minimize_scalar(
            objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
        )
        x = _polish_minimum(objective, float(opt.x), _RATIO_BRACKET)
        minima.append((x, objective(x)))
    # Collapse refinements that converged into the same basin.
    minima.sort()
    kept = []
    for x, f in minima:
        if kept and abs(x - kept[-1][0]) < 1e-6 * x:
            if f < kept[-1][1]:
                kept[-1] = (x, f)
        else:
            kept.append((x, f))
    return kept


def estimate_impurity_mass_exact(
    observed_ratios, basis, coupling, ref_mass, candidate_positions=None
):
    """Search-based impurity mass estimate using the exact forward model.

    For each candidate position the squared misfit between observed and
    exactly computed frequency ratios is minimized over the impurity mass
    in [0.2, 5] times the majority mass.  The best candidate wins; mirror
    positions produce identical spectra and are reported as a tie, and a
    uniform chain (every candidate fitting equally well with the majority
    mass) is flagged degenerate.
    """
    n = basis.n_ions
    if candidate_positions is None:
        candidate_positions = range(1, n + 1)
    candidates = sorted(set(int(i) for i in candidate_positions))
    if not candidates:
        raise ValueError("candidate_positions is empty")
    for i in candidates:
        if not 1 <= i <= n:
            raise ValueError(f"candidate position {i} outside 1..{n}")
    pairs = sorted((int(p), float(r)) for p, r in observed_ratios)
    if len(pairs) == 0:
        raise ValueError("at least one observed ratio is required")
    if len(pairs) < 2 and len(candidates) > 1:
        raise ValueError(
            "position disambiguation needs at least two observed ratios"
        )
    mode_indices = [p for p, _ in pairs]
    observed = np.array([r for _, r in pairs])

    results = []  # (index, ratio, misfit) for every local minimum found
    for i in candidates:
        objective = _search_objective(coupling, i, mode_indices, observed)
        for ratio, res in _candidate_minima(objective):
            results.append((i, ratio, res))

    best_i, best_ratio, best_res = min(results, key=lambda t: (t[2], t[0], t[1]))
    floor = 1e-20 * float(np.sum(observed**2)) + 1e-300
    tied = [
        (i, ratio * ref_mass)
        for i, ratio, res in results
        if res <= best_res * (1 + _TIE_RATIO) + floor
    ]
    tied_positions = {i for i, _ in tied}
    degenerate = tied_positions == set(candidates) and len(candidates) > 1

    # Per-mode detail at the winning position: of each single-ratio
    # objective's minima, keep the one nearest the joint estimate.
    per_mode = []
    for p, r in pairs:
        objective = _search_objective(coupling, best_i, [p], np.array([r]))
        minima = _candidate_minima(objective)
        per_mode.append(min(minima, key=lambda t: abs(t[0] - best_ratio))[0])
    per_mode = np.array(per_mode)

    return MassEstimate(
        impurity_index=best_i,
        estimated_mass=best_ratio * ref_mass,
        method="exact-search",
        per_mode_estimates=per_mode * ref_mass,
        used_modes=tuple(mode_indices),
        residual=float(np.sqrt(best_res / len(pairs))),
        uncertainty=float(np.std(per_mode)) * ref_mass,
        ambiguous=len(tied) > 1,
        degenerate=bool(degenerate),
        tied_candidates=tuple(tied),
    )

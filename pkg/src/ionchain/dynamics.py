"""Chain motion after an impulsive kick on a single ion.

Two routes to the same trajectory are kept deliberately separate: a
closed-form superposition of normal modes (valid in the small-oscillation
regime) and a symplectic integration of the full nonlinear equations of
motion, used as an independent check of the first.
"""

from dataclasses import dataclass

import numpy as np

from .equilibrium import equilibrium_chain, potential_dimensionless
from .errors import (
    ConvergenceError,
    HarmonicRegimeError,
    IonCrossingError,
    NyquistError,
)
from .modes import coupling_entries

# Fraction of the nearest-neighbor gap beyond which the harmonic expansion
# is no longer trusted.
_REGIME_FRACTION = 0.1

_DRIFT_TOL = 1e-8
_MAX_REFINEMENTS = 6


@dataclass(frozen=True)
class ImpulseEvent:
    """A collision modeled as an instant velocity kick on one ion.

    ``ion_index`` is 1-based, counting from the leftmost ion.  ``velocity``
    is the imparted axial velocity in m/s (signed).
    """

    ion_index: int
    velocity: float

    def validate(self, n_ions):
        if not 1 <= self.ion_index <= n_ions:
            raise ValueError(
                f"ion_index {self.ion_index} outside 1..{n_ions}"
            )


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled per-ion displacements from equilibrium, in SI."""

    times: np.ndarray          # shape (T,), seconds
    displacements: np.ndarray  # shape (T, N), meters
    sample_rate: float         # Hz

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        q = np.asarray(self.displacements, dtype=float)
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "displacements", q)
        if t.ndim != 1 or q.ndim != 2 or q.shape[0] != t.size:
            raise ValueError("times and displacements have mismatched shapes")
        if t.size >= 2:
            dt = np.diff(t)
            if np.any(dt <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(dt - dt[0])) > 1e-12 * dt[0]:
                raise ValueError("times must be uniformly spaced")

    @property
    def n_ions(self):
        return self.displacements.shape[1]

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])

    def ion(self, m):
        """Displacement record of ion m (1-based)."""
        return self.displacements[:, m - 1]


def collision_mode_amplitudes(event, basis, config):
    """Normal-mode amplitudes excited by the impulse: b^(p)_n * v0 / omega_p.

    Mode p then evolves as Q_p(t) = amplitude_p * sin(omega_p * t).
    """
    event.validate(basis.n_ions)
    b_n = basis.eigenvectors[event.ion_index - 1, :]
    omega = config.omega0 * np.sqrt(basis.eigenvalues)
    return b_n * event.velocity / omega


def beta_amplitudes(event, observe_ion, basis, config):
    """Per-mode signed displacement amplitudes seen at one ion.

    The displacement of the observed ion m is
    q_m(t) = sum_p beta_p * sin(omega_p * t) with
    beta_p = v0 * sqrt(M / (kappa * mu_p)) * b^(p)_n * b^(p)_m,
    n being the struck ion.
    """
    event.validate(basis.n_ions)
    if not 1 <= observe_ion <= basis.n_ions:
        raise ValueError(f"observe_ion {observe_ion} outside 1..{basis.n_ions}")
    b_n = basis.eigenvectors[event.ion_index - 1, :]
    b_m = basis.eigenvectors[observe_ion - 1, :]
    return event.velocity / config.omega0 * b_n * b_m / np.sqrt(basis.eigenvalues)


def _beta_matrix(event, basis, config):
    """beta[m, p] for all ions at once."""
    b_n = basis.eigenvectors[event.ion_index - 1, :]
    scale = event.velocity / (config.omega0 * np.sqrt(basis.eigenvalues))
    return basis.eigenvectors * (b_n * scale)[None, :]


def _sample_times(sample_rate, duration):
    n_samples = int(round(duration * sample_rate)) + 1
    return np.arange(n_samples) / sample_rate


def _check_nyquist(omega_max, sample_rate):
    if sample_rate <= omega_max / np.pi:
        raise NyquistError(
            f"sample rate {sample_rate:.4g} Hz cannot resolve the fastest "
            f"mode at {omega_max / (2 * np.pi):.4g} Hz"
        )


def _check_regime(displacements, chain):
    limit = _REGIME_FRACTION * chain.min_spacing * chain.length_scale
    peak = float(np.max(np.abs(displacements)))
    if peak >= limit:
        raise HarmonicRegimeError(
            f"peak displacement {peak:.3e} m exceeds {_REGIME_FRACTION:g} of "
            f"the minimum ion spacing ({limit:.3e} m); reduce the impulse velocity"
        )


def synthesize_trajectory(event, basis, config, sample_rate, duration):
    """Closed-form impulse response sampled on a uniform grid.

    All modes start from rest at equilibrium, so every ion's motion is a
    pure sine superposition, q_m(t) = sum_p beta_p_m sin(omega_p t).

    Raises
    ------
    NyquistError
        If ``sample_rate`` is at or below twice the fastest mode frequency.
    HarmonicRegimeError
        If the resulting peak displacement invalidates the expansion.
    """
    event.validate(basis.n_ions)
    if duration <= 0:
        raise ValueError("duration must be positive")
    omega = config.omega0 * np.sqrt(basis.eigenvalues)
    _check_nyquist(float(omega[-1]), sample_rate)

    times = _sample_times(sample_rate, duration)
    beta = _beta_matrix(event, basis, config)
    q = np.sin(times[:, None] * omega[None, :]) @ beta.T

    chain = equilibrium_chain(config)
    if event.velocity != 0.0:
        _check_regime(q, chain)
    return Trajectory(times=times, displacements=q, sample_rate=sample_rate)


def _accel(xi):
    """Dimensionless acceleration: trap restoring force plus Coulomb repulsion."""
    d = xi[:, None] - xi[None, :]
    np.fill_diagonal(d, np.inf)
    return -xi + np.sum(np.sign(d) / d**2, axis=1)


def _energy(xi, eta):
    return 0.5 * float(eta @ eta) + potential_dimensionless(xi)


def integrate_full_dynamics(
    event, chain, config, sample_rate, duration, steps_per_period=200
):
    """Velocity-Verlet integration of the exact trap + Coulomb dynamics.

    Works in dimensionless coordinates (length in units of the chain's
    length scale, time in units of 1/omega0).  The internal step is the
    fastest mode period divided by ``steps_per_period``, snapped so that
    samples land exactly on the output grid; it is halved and the run
    repeated if the relative energy drift exceeds 1e-8.

    Raises
    ------
    IonCrossingError
        If the ion ordering is violated mid-run (impulse too strong).
    ConvergenceError
        If the drift tolerance cannot be met within the refinement budget.
    """
    event.validate(chain.n_ions)
    if duration <= 0:
        raise ValueError("duration must be positive")

    mu_max = float(np.max(np.linalg.eigvalsh(coupling_entries(chain.positions))))
    _check_nyquist(config.omega0 * np.sqrt(mu_max), sample_rate)

    u = chain.positions
    eta0 = np.zeros(chain.n_ions)
    eta0[event.ion_index - 1] = event.velocity / (chain.length_scale * config.omega0)

    times = _sample_times(sample_rate, duration)
    tau_sample = config.omega0 / sample_rate
    tau_step_target = 2 * np.pi / np.sqrt(mu_max) / steps_per_period
    n_sub = max(1, int(np.ceil(tau_sample / tau_step_target)))
    # Coulomb repulsion makes actual crossings impossible, so "ordering
    # violated" manifests as a close encounter: once gaps shrink to a few
    # percent of their rest value the kick has left the crystal regime.
    gap_floor = 0.05 * chain.min_spacing if chain.n_ions > 1 else -np.inf

    for _ in range(_MAX_REFINEMENTS + 1):
        xi, drift = _verlet_run(
            u, eta0, times.size, tau_sample / n_sub, n_sub, gap_floor
        )
        if drift < _DRIFT_TOL:
            break
        n_sub *= 2
    else:
        raise ConvergenceError(
            f"energy drift {drift:.3e} still above {_DRIFT_TOL:g} after "
            f"{_MAX_REFINEMENTS} step refinements",
            residual_norm=drift,
        )

    q = (xi - u[None, :]) * chain.length_scale
    if event.velocity != 0.0:
        _check_regime(q, chain)
    return Trajectory(times=times, displacements=q, sample_rate=sample_rate)


def _verlet_run(u, eta0, n_samples, dtau, n_sub, gap_floor):
    xi = u.copy()
    eta = eta0.copy()
    out = np.empty((n_samples, u.size))
    out[0] = xi
    e0 = _energy(xi, eta)
    e_scale = max(abs(e0), 1e-300)
    drift = 0.0

    acc = _accel(xi)
    for k in range(1, n_samples):
        for _ in range(n_sub):
            eta_half = eta + 0.5 * dtau * acc
            xi = xi + dtau * eta_half
            if u.size > 1 and np.min(np.diff(xi)) <= gap_floor:
                raise IonCrossingError(
                    "ion ordering about to be violated during integration; "
                    "the impulse is too strong for the crystal"
                )
            acc = _accel(xi)
            eta = eta_half + 0.5 * dtau * acc
        out[k] = xi
        drift = max(drift, abs(_energy(xi, eta) - e0) / e_scale)
    return out, drift

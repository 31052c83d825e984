"""Equilibrium structure of a linear ion chain in a harmonic axial well.

Positions are handled in dimensionless form: the physical position of ion m
is x_m = length_scale * u_m, where the length scale balances the Coulomb
repulsion of two unit charges against the axial restoring force.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.constants as const

from .errors import ConvergenceError

# Solver budget: Newton converges quadratically here, so these are generous.
_STEP_TOL = 1e-12
_RESIDUAL_TOL = 1e-10
_MAX_ITER = 200


@dataclass(frozen=True)
class TrapConfig:
    """Static description of the axial trap and the ion species it holds.

    Parameters
    ----------
    n_ions : int
        Number of ions in the chain (N >= 1).
    ion_mass : float
        Mass of the majority ion species in kg.
    kappa : float, optional
        Axial restoring-force constant in N/m.  Exactly one of ``kappa``
        and ``omega0`` must be given; if both are given they must agree.
    omega0 : float, optional
        Single-ion axial angular frequency in rad/s,
        omega0 = sqrt(kappa / ion_mass).

    All ions are taken to be singly charged.
    """

    n_ions: int
    ion_mass: float
    kappa: float = None
    omega0: float = None

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ValueError(f"n_ions must be a positive integer, got {self.n_ions}")
        if not self.ion_mass > 0:
            raise ValueError(f"ion_mass must be positive, got {self.ion_mass}")
        if self.kappa is None and self.omega0 is None:
            raise ValueError("one of kappa or omega0 is required")
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.ion_mass * self.omega0**2)
        if self.omega0 is None:
            object.__setattr__(self, "omega0", np.sqrt(self.kappa / self.ion_mass))
        if not self.kappa > 0 or not self.omega0 > 0:
            raise ValueError("kappa and omega0 must be positive")
        consistent = np.sqrt(self.kappa / self.ion_mass)
        if abs(self.omega0 - consistent) > 1e-12 * consistent:
            raise ValueError(
                f"omega0={self.omega0} inconsistent with sqrt(kappa/ion_mass)={consistent}"
            )


@dataclass(frozen=True)
class EquilibriumChain:
    """Dimensionless equilibrium positions plus the physical length scale."""

    positions: np.ndarray  # shape (N,), ascending, antisymmetric
    length_scale: float    # meters

    def __post_init__(self):
        u = np.asarray(self.positions, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "positions", u)
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if u.size > 1 and np.any(np.diff(u) <= 0):
            raise ValueError("positions must be strictly increasing")
        if abs(u.sum()) > 1e-10:
            raise ValueError("positions must sum to zero (trap symmetry)")
        if np.max(np.abs(u + u[::-1])) > 1e-10:
            raise ValueError("positions must be antisymmetric about the trap center")
        if np.max(np.abs(force_balance_residual(u))) > 1e-10:
            raise ValueError("positions do not satisfy force balance")

    @property
    def n_ions(self):
        return self.positions.size

    @property
    def positions_si(self):
        """Equilibrium positions in meters."""
        return self.length_scale * self.positions

    @property
    def min_spacing(self):
        """Smallest nearest-neighbor gap, dimensionless."""
        if self.n_ions < 2:
            return np.inf
        return float(np.min(np.diff(self.positions)))


def characteristic_length(config):
    """Length scale at which Coulomb repulsion balances the axial force.

    Returns (e^2 / (4 pi eps0 kappa))**(1/3) in meters.
    """
    return float((const.e**2 / (4 * np.pi * const.epsilon_0 * config.kappa)) ** (1 / 3))


def potential_dimensionless(u):
    """Axial trap + Coulomb potential in units of kappa * length_scale**2."""
    u = np.asarray(u, dtype=float)
    v = 0.5 * np.sum(u**2)
    if u.size > 1:
        gaps = u[:, None] - u[None, :]
        iu = np.triu_indices(u.size, k=1)
        v += np.sum(1.0 / np.abs(gaps[iu]))
    return float(v)


def force_balance_residual(u):
    """Gradient of the dimensionless potential; zero at equilibrium."""
    u = np.asarray(u, dtype=float)
    if u.size == 1:
        return u.copy()
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d**2, axis=1)


def _force_jacobian(u):
    """Jacobian of the force-balance system (the dimensionless Hessian)."""
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    off = -2.0 / np.abs(d) ** 3
    jac = off.copy()
    np.fill_diagonal(jac, 1.0 - off.sum(axis=1))
    return jac


@lru_cache(maxsize=None)
def _solve_equilibrium_cached(n_ions):
    if n_ions == 1:
        return np.zeros(1)

    # Uniform spacing at the two-ion scale is close enough for Newton
    # to converge in a handful of steps for the chain lengths we use.
    spacing = 2.0 * 0.25 ** (1 / 3)
    u = (np.arange(1, n_ions + 1) - (n_ions + 1) / 2) * spacing

    residual = force_balance_residual(u)
    for _ in range(_MAX_ITER):
        step = np.linalg.solve(_force_jacobian(u), -residual)
        # Keep the ordering intact; a full Newton step never needs this
        # from the uniform guess, but it makes the solver unconditionally safe.
        scale = 1.0
        while scale > 1e-6 and np.any(np.diff(u + scale * step) <= 0):
            scale *= 0.5
        u = u + scale * step
        residual = force_balance_residual(u)
        if np.max(np.abs(scale * step)) < _STEP_TOL:
            break
    resnorm = float(np.max(np.abs(residual)))
    if resnorm >= _RESIDUAL_TOL:
        raise ConvergenceError(
            f"equilibrium solve for N={n_ions} stalled at residual {resnorm:.3e}",
            residual_norm=resnorm,
        )
    # The exact solution is antisymmetric; project out floating-point skew
    # so mirror-symmetry properties hold exactly downstream.
    u = 0.5 * (u - u[::-1])
    u.setflags(write=False)
    return u


def solve_equilibrium(n_ions):
    """Dimensionless equilibrium positions of ``n_ions`` ions, ascending.

    Solves the force-balance system
    u_m - sum_{k<m} 1/(u_m-u_k)^2 + sum_{k>m} 1/(u_k-u_m)^2 = 0
    by Newton iteration with the analytic Jacobian.

    Raises
    ------
    ConvergenceError
        If the residual does not drop below 1e-10 within the budget.
    """
    if int(n_ions) != n_ions or n_ions < 1:
        raise ValueError(f"n_ions must be a positive integer, got {n_ions}")
    return _solve_equilibrium_cached(int(n_ions)).copy()


def equilibrium_chain(config):
    """Solve the chain for ``config`` and attach its physical length scale."""
    return EquilibriumChain(
        positions=solve_equilibrium(config.n_ions),
        length_scale=characteristic_length(config),
    )

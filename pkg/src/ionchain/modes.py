"""Normal-mode structure of the homogeneous chain.

The small-oscillation Hessian, taken in units of the trap stiffness and
evaluated at the dimensionless equilibrium positions, is a symmetric
positive-definite matrix whose eigenpairs define the axial normal modes.
The lowest mode is the center-of-mass mode: every ion moves identically,
its eigenvalue is exactly 1, and its frequency is the single-ion trap
frequency.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateModesError

_DEGENERACY_GAP = 1e-10


@dataclass(frozen=True)
class CouplingMatrix:
    """Dimensionless N x N ion coupling matrix (trap + Coulomb curvature)."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {a.shape}")
        if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
            raise ValueError("coupling matrix must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n_ions(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class ModeBasis:
    """Eigenvalues, orthonormal eigenvectors, and (optionally) frequencies.

    ``eigenvectors[:, p]`` is the mode-p eigenvector; modes are sorted by
    ascending eigenvalue and each eigenvector has a positive first
    component.  ``frequencies`` is None until filled in from a trap
    configuration (see :func:`mode_frequencies`).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    frequencies: np.ndarray = None

    def __post_init__(self):
        mu = np.asarray(self.eigenvalues, dtype=float)
        vecs = np.asarray(self.eigenvectors, dtype=float)
        mu.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", mu)
        object.__setattr__(self, "eigenvectors", vecs)
        if self.frequencies is not None:
            w = np.asarray(self.frequencies, dtype=float)
            w.setflags(write=False)
            object.__setattr__(self, "frequencies", w)

    @property
    def n_ions(self):
        return self.eigenvalues.size

    def eigenvector(self, p):
        """Mode-p eigenvector, p counted from 1 (center of mass)."""
        return self.eigenvectors[:, p - 1]


def coupling_entries(positions):
    """Coupling-matrix entries for dimensionless positions (ndarray in/out)."""
    u = np.asarray(positions, dtype=float)
    n = u.size
    if n == 1:
        return np.ones((1, 1))
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    if np.min(np.abs(d[~np.eye(n, dtype=bool)])) == 0.0:
        raise ValueError("coincident ion positions")
    off = -2.0 / np.abs(d) ** 3
    a = off.copy()
    np.fill_diagonal(a, 1.0 - off.sum(axis=1))
    return a


def build_coupling_matrix(chain):
    """Coupling matrix of an equilibrium chain.

    Diagonal entries are 1 + sum_{k != m} 2/|u_m - u_k|^3 and off-diagonal
    entries are -2/|u_m - u_n|^3.  Row sums are 1 by pairwise cancellation,
    so the uniform vector is always an eigenvector with eigenvalue 1.
    """
    return CouplingMatrix(entries=coupling_entries(chain.positions))


def _apply_mode_conventions(eigenvalues, eigenvectors, symmetrize):
    """Order, parity-clean, and sign-fix an eigh output."""
    order = np.argsort(eigenvalues)
    mu = eigenvalues[order]
    vecs = eigenvectors[:, order]

    gaps = np.diff(mu)
    if gaps.size and np.min(gaps) < _DEGENERACY_GAP:
        p = int(np.argmin(gaps))
        raise DegenerateModesError(
            f"eigenvalues {p + 1} and {p + 2} are degenerate "
            f"(gap {gaps[p]:.3e}); mode-resolved diagnostics need distinct modes"
        )

    if symmetrize:
        # The homogeneous chain is reflection symmetric, so every eigenvector
        # has definite parity.  Projecting onto that parity removes
        # floating-point skew: antisymmetric modes get an exact zero at the
        # center ion and mirror components match exactly.
        for p in range(vecs.shape[1]):
            v = vecs[:, p]
            parity = 1.0 if float(v @ v[::-1]) >= 0.0 else -1.0
            v = v + parity * v[::-1]
            vecs[:, p] = v / np.linalg.norm(v)

    first = vecs[0, :]
    if np.any(np.abs(first) < 1e-12):
        p = int(np.argmin(np.abs(first)))
        raise DegenerateModesError(
            f"mode {p + 1} has a vanishing first component; "
            "cannot apply the sign convention"
        )
    vecs = vecs * np.sign(first)[None, :]
    return mu, vecs


def eigendecompose(coupling):
    """Eigenstructure of the coupling matrix, frequencies left unfilled.

    Eigenvalues come out ascending; eigenvectors are orthonormal with the
    first component of each made positive.  Degenerate eigenvalues (gap
    below 1e-10) are rejected rather than silently assigned a basis.
    """
    a = coupling.entries if isinstance(coupling, CouplingMatrix) else np.asarray(coupling)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise DegenerateModesError(f"symmetric eigensolve failed: {exc}") from exc
    mu, vecs = _apply_mode_conventions(eigenvalues, eigenvectors.copy(), symmetrize=True)
    return ModeBasis(eigenvalues=mu, eigenvectors=vecs)


def mode_frequencies(basis, config):
    """Mode angular frequencies omega_p = omega0 * sqrt(mu_p) in rad/s."""
    if basis.n_ions != config.n_ions:
        raise ValueError("basis and config disagree on the ion count")
    return config.omega0 * np.sqrt(basis.eigenvalues)


def with_frequencies(basis, config):
    """Copy of ``basis`` with the frequency vector filled in."""
    return replace(basis, frequencies=mode_frequencies(basis, config))


def chain_modes(chain, config):
    """Coupling matrix and fully populated mode basis for a chain."""
    coupling = build_coupling_matrix(chain)
    basis = with_frequencies(eigendecompose(coupling), config)
    return coupling, basis


def normal_coordinates(displacements, basis):
    """Project per-ion displacements onto the mode basis: Q_p = sum_m q_m b^(p)_m."""
    q = np.asarray(displacements, dtype=float)
    if q.shape[-1] != basis.n_ions:
        raise ValueError(
            f"expected {basis.n_ions} displacements, got {q.shape[-1]}"
        )
    return q @ basis.eigenvectors


def ion_displacements(normal_coords, basis):
    """Inverse of :func:`normal_coordinates`: q_m = sum_p b^(p)_m Q_p."""
    qn = np.asarray(normal_coords, dtype=float)
    if qn.shape[-1] != basis.n_ions:
        raise ValueError(f"expected {basis.n_ions} mode coordinates, got {qn.shape[-1]}")
    return qn @ basis.eigenvectors.T

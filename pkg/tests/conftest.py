import numpy as np
import pytest
import scipy.constants as const

from ionchain import TrapConfig, chain_modes, equilibrium_chain

AMU = const.atomic_mass


def ca_trap(n_ions, mass_amu=40.0, omega0_hz=1.0e6):
    """Calcium-like reference trap used throughout the tests."""
    return TrapConfig(
        n_ions=n_ions, ion_mass=mass_amu * AMU, omega0=2 * np.pi * omega0_hz
    )


@pytest.fixture(scope="session")
def system():
    """Memoized (trap, chain, coupling, basis) per ion count."""
    cache = {}

    def get(n_ions):
        if n_ions not in cache:
            trap = ca_trap(n_ions)
            chain = equilibrium_chain(trap)
            coupling, basis = chain_modes(chain, trap)
            cache[n_ions] = (trap, chain, coupling, basis)
        return cache[n_ions]

    return get

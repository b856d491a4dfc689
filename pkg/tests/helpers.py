"""Shared test helpers: seeded random coins and states."""

import numpy as np

from qwscatter.lattice import CoinSpec, StateVector, build_coin


def random_coin(rng, a_lo=0.0, a_hi=1.0) -> CoinSpec:
    return build_coin(
        rng.uniform(a_lo, a_hi),
        rng.uniform(0.0, 2.0 * np.pi),
        rng.uniform(0.0, 2.0 * np.pi),
        rng.uniform(0.0, 2.0 * np.pi),
    )


def random_state(rng, n_sites=9, x_min=None, normalized=True) -> StateVector:
    if x_min is None:
        x_min = int(rng.integers(-20, 20))
    amps = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
    if normalized:
        amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    return StateVector(int(x_min), amps.astype(np.complex128))

"""Shared fixtures: cached thermal-state builds and dense references.

The thermal builds are the expensive shared inputs, so they are built once
per session and reused by the unit and acceptance tests alike.
"""
import numpy as np
import pytest

import mpotrace as mt
from mpotrace import mpo as mp


@pytest.fixture(scope="session")
def thermal_cache():
    """Memoized (L, beta, dbond, dtau) -> (Mpo, report) builder."""
    cache = {}

    def build(L, beta, dbond=20, dtau=0.001):
        key = (L, beta, dbond, dtau)
        if key not in cache:
            p = mt.IsingParams(L=L, J=1.0, g=1.0, h=0.0, beta=beta)
            cache[key] = mt.thermal_half_state_report(p, dbond=dbond, dtau=dtau)
        return cache[key]

    return build


@pytest.fixture(scope="session")
def thermal_l6(thermal_cache):
    return thermal_cache(6, 0.1)[0]


@pytest.fixture(scope="session")
def thermal_l10(thermal_cache):
    return thermal_cache(10, 0.1)[0]


@pytest.fixture(scope="session")
def thermal_l10_beta1(thermal_cache):
    return thermal_cache(10, 1.0)[0]


def random_mpo(L, dbond, seed, d=2):
    """Generic (non-Hermitian) random MPO with O(1) norm per site."""
    rng = np.random.default_rng(seed)
    sites = []
    dl = 1
    for i in range(L):
        dr = dbond if i < L - 1 else 1
        shape = (d, d, dl, dr)
        t = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        sites.append(t / np.sqrt(d * dl))
        dl = dr
    return mp.Mpo(tuple(sites))

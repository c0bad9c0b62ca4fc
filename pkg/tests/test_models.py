"""Hamiltonian construction, thermal-state builder, random inputs."""
import math

import numpy as np
import pytest

import mpotrace as mt
from mpotrace import mpo as mp


X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.array([[1.0, 0.0], [0.0, -1.0]])


def dense_ising(p):
    """Kronecker-sum reference Hamiltonian, built term by term."""
    dim = 2**p.L
    H = np.zeros((dim, dim))

    def embed(op, i):
        mats = [np.eye(2)] * p.L
        mats[i] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    def embed2(a, b, i):
        mats = [np.eye(2)] * p.L
        mats[i] = a
        mats[i + 1] = b
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    for i in range(p.L - 1):
        H += p.J * embed2(X, X, i)
    for i in range(p.L):
        H += p.g * embed(Z, i) + p.h * embed(X, i)
    return H


def test_params_validation():
    with pytest.raises(ValueError):
        mt.IsingParams(L=1)
    with pytest.raises(ValueError):
        mt.IsingParams(L=4, beta=0.0)
    with pytest.raises(ValueError):
        mt.IsingParams(L=4, beta=-1.0)
    with pytest.raises(ValueError):
        mt.IsingParams(L=4, J=math.inf)


def test_ising_mpo_two_site_pure_coupling():
    p = mt.IsingParams(L=2, J=1.0, g=0.0, h=0.0)
    assert np.allclose(mp.dense(mt.ising_mpo(p)), np.kron(X, X), atol=1e-14)


def test_ising_mpo_two_site_pure_field():
    p = mt.IsingParams(L=2, J=0.0, g=1.0, h=0.0)
    ref = np.kron(Z, np.eye(2)) + np.kron(np.eye(2), Z)
    assert np.allclose(mp.dense(mt.ising_mpo(p)), ref, atol=1e-14)


def test_ising_mpo_matches_kronecker_sum():
    p = mt.IsingParams(L=8, J=1.0, g=1.0, h=0.3)
    assert np.max(np.abs(mp.dense(mt.ising_mpo(p)) - dense_ising(p))) < 1e-12


def test_ising_mpo_parameter_grid():
    for L in (2, 3, 5):
        for (J, g, h) in ((1.0, 0.5, 0.0), (0.3, 1.2, 0.7), (-1.0, 1.0, 0.1)):
            p = mt.IsingParams(L=L, J=J, g=g, h=h)
            m = mt.ising_mpo(p)
            assert m.max_bond() <= 3
            assert np.max(np.abs(mp.dense(m) - dense_ising(p))) < 1e-12, (L, J, g, h)


def test_thermal_state_unit_norm_and_bonds():
    p = mt.IsingParams(L=8, beta=0.5)
    m, meta = mt.thermal_half_state_report(p, dbond=10, dtau=0.01)
    assert m.max_bond() <= 10
    # all magnitude lives in log_scale, the tensor network has unit norm
    assert abs(mp.log_norm(mp.Mpo(m.sites))) < 1e-10
    assert meta["steps"] >= 1
    assert meta["layers"]
    assert meta["max_discarded"] >= 0.0


def test_thermal_state_is_hermitian():
    p = mt.IsingParams(L=6, beta=0.3)
    m = mt.thermal_half_state(p, dbond=None, dtau=0.01)
    d = mp.dense(m)
    assert np.max(np.abs(d - d.conj().T)) < 1e-12 * np.max(np.abs(d))


def test_thermal_state_infinite_temperature_limit():
    p = mt.IsingParams(L=6, beta=1e-6)
    m = mt.thermal_half_state(p, dbond=None, dtau=1e-6)
    S, _ = mt.entropy_from_half_state(m, kmax=10, dmax=None)
    assert abs(S - 6 * math.log(2.0)) < 1e-4


def test_thermal_state_matches_expm(thermal_cache):
    p = mt.IsingParams(L=6, beta=0.2)
    m, _ = mt.thermal_half_state_report(p, dbond=None, dtau=0.01)
    rho = mp.dense(m)
    rho = rho @ rho.conj().T
    rho /= np.trace(rho).real
    w, v = np.linalg.eigh(dense_ising(p))
    ref = (v * np.exp(-p.beta * w)) @ v.conj().T
    ref /= np.trace(ref).real
    assert np.max(np.abs(rho - ref)) < 1e-6


def test_thermal_state_trotter_order_two():
    # halving dtau must shrink the defect by about 4x
    p = mt.IsingParams(L=4, beta=0.4)
    w, v = np.linalg.eigh(dense_ising(p))
    exact = (v * np.exp(-p.beta / 2.0 * w)) @ v.conj().T

    def defect(dtau):
        m = mt.thermal_half_state(p, dbond=None, dtau=dtau)
        return np.linalg.norm(mp.dense(m) - exact)

    d1, d2, d3 = defect(0.02), defect(0.01), defect(0.005)
    assert 2.83 < d1 / d2 < 5.66, (d1, d2)
    assert 2.83 < d2 / d3 < 5.66, (d2, d3)


def test_thermal_builder_validation():
    p = mt.IsingParams(L=4, beta=0.5)
    with pytest.raises(ValueError):
        mt.thermal_half_state(p, dtau=0.0)
    with pytest.raises(ValueError):
        mt.thermal_half_state(p, dbond=0)


def test_random_hermitian_deterministic():
    a = mt.random_hermitian_mpo(5, dbond=4, seed=9)
    b = mt.random_hermitian_mpo(5, dbond=4, seed=9)
    assert a.log_scale == b.log_scale
    for sa, sb in zip(a.sites, b.sites):
        assert np.array_equal(sa, sb)
    c = mt.random_hermitian_mpo(5, dbond=4, seed=10)
    assert any(not np.array_equal(sa, sc) for sa, sc in zip(a.sites, c.sites))


def test_random_hermitian_is_hermitian():
    for seed in range(4):
        m = mt.random_hermitian_mpo(4, dbond=4, seed=seed)
        d = mp.dense(m)
        assert np.max(np.abs(d - d.conj().T)) < 1e-14 * max(np.max(np.abs(d)), 1.0)


def test_random_hermitian_bond_cap():
    for dbond in (1, 2, 4, 8):
        m = mt.random_hermitian_mpo(6, dbond=dbond, seed=1)
        assert m.max_bond() <= dbond, dbond
    with pytest.raises(ValueError):
        mt.random_hermitian_mpo(0)
    with pytest.raises(ValueError):
        mt.random_hermitian_mpo(4, dbond=0)

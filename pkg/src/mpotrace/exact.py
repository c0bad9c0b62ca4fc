"""Independent reference solutions: dense exact diagonalization at small
L, a free-fermion solution of the transverse-field chain for large L, a
dense mirror of the global Lanczos recurrence, and a dense thermal
half-state builder.  These are the oracles the tensor-network pipeline is
checked against, so they deliberately share no code with it."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .errors import CapacityError, HermiticityError
from .lanczos import TridiagonalMatrix
from .models import IsingParams
from . import mpo as mp

_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])

DENSE_L_MAX = 14
LANCZOS_DIM_MAX = 4096


def ising_dense(p: IsingParams) -> np.ndarray:
    """Dense 2^L x 2^L matrix of the open Ising chain, assembled from
    sparse Kronecker products term by term."""
    if p.L > DENSE_L_MAX:
        raise CapacityError(f"dense construction capped at L={DENSE_L_MAX}, got {p.L}")
    n = 2 ** p.L
    field = p.g * _SZ + p.h * _SX
    ham = sp.csr_matrix((n, n))
    xx = p.J * np.kron(_SX, _SX)
    for i in range(p.L - 1):
        ham = ham + sp.kron(
            sp.kron(sp.identity(2 ** i), xx), sp.identity(2 ** (p.L - 2 - i)),
            format="csr",
        )
    for i in range(p.L):
        ham = ham + sp.kron(
            sp.kron(sp.identity(2 ** i), field), sp.identity(2 ** (p.L - 1 - i)),
            format="csr",
        )
    return ham.toarray()


def entropy_from_spectrum(energies, beta: float) -> float:
    """Gibbs entropy -sum p ln p for p_i = e^(-beta E_i)/Z, evaluated in
    log space: S = beta <E> + ln Z."""
    e = np.asarray(energies, dtype=float)
    ln_z = float(logsumexp(-beta * e))
    p = np.exp(-beta * e - ln_z)
    return float(beta * (p @ e) + ln_z)


def exact_entropy_dense(p: IsingParams) -> float:
    """Thermal entropy by full diagonalization (L <= 14)."""
    energies = np.linalg.eigvalsh(ising_dense(p))
    return entropy_from_spectrum(energies, p.beta)


def exact_entropy_free_fermion(p: IsingParams) -> float:
    """Thermal entropy of the transverse-field chain (h = 0) from the
    single-particle modes of the open-boundary quadratic form.

    The Jordan-Wigner image of the chain is quadratic in fermions; the
    2L x 2L particle-hole matrix [[A, B], [-B, -A]] with A the symmetric
    hopping block and B the antisymmetric pairing block has eigenvalues in
    +-pairs, and each nonnegative mode energy eps contributes the entropy
    of one free fermionic level at inverse temperature beta.
    """
    if p.h != 0:
        raise ValueError("free-fermion solution requires h = 0")
    L, J, g = p.L, p.J, p.g
    a = np.diag([-2.0 * g] * L)
    for i in range(L - 1):
        a[i, i + 1] = a[i + 1, i] = J
    b = np.zeros((L, L))
    for i in range(L - 1):
        b[i, i + 1] = J
        b[i + 1, i] = -J
    bdg = np.block([[a, b], [-b, -a]])
    # spectrum is symmetric around zero; every other abs-sorted value
    # picks one representative of each +-eps pair
    eps = np.sort(np.abs(np.linalg.eigvalsh(bdg)))[::2]
    x = p.beta * eps
    per_mode = np.log1p(np.exp(-x)) + x / (np.exp(x) + 1.0)
    return float(np.sum(per_mode))


def dense_global_lanczos(a: np.ndarray, kmax: int):
    """Reference recurrence with explicitly stored matrices, no
    truncation: returns (beta1, TridiagonalMatrix).

    Starts from the identity, orthogonalizes under the Frobenius inner
    product, and stops early on breakdown (new block norm at relative
    machine floor).
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > LANCZOS_DIM_MAX:
        raise CapacityError(f"dense recurrence capped at dim {LANCZOS_DIM_MAX}, got {n}")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    scale = np.linalg.norm(a, "fro")
    if np.linalg.norm(a - a.conj().T, "fro") > 1e-8 * max(scale, 1e-300):
        raise HermiticityError("dense recurrence needs a Hermitian matrix")
    u_prev = np.zeros_like(a)
    v = np.eye(n, dtype=a.dtype)
    alphas, betas = [], []
    beta1 = math.nan
    v_scale = 0.0
    for i in range(1, kmax + 1):
        b = float(np.linalg.norm(v, "fro"))
        if i == 1:
            beta1 = b
        else:
            if b <= 1e-13 * v_scale:
                break
            betas.append(b)
        u = v / b
        w = a @ u
        w_norm = float(np.linalg.norm(w, "fro"))
        v = w - (b * u_prev if i > 1 else 0.0)
        al = float(np.vdot(u, v).real)
        alphas.append(al)
        v = v - al * u
        u_prev = u
        v_scale = max(w_norm, abs(al), b)
    return beta1, TridiagonalMatrix(tuple(alphas), tuple(betas))


def dense_half_state_mpo(p: IsingParams, dbond: int | None = None):
    """exp(-(beta/2) H) computed densely and refactored into an MPO,
    optionally truncated to bond dbond.  Small-L testing helper."""
    if p.L > 12:
        raise CapacityError(f"dense half-state capped at L=12, got {p.L}")
    w, u = np.linalg.eigh(ising_dense(p))
    m = (u * np.exp(-0.5 * p.beta * w)) @ u.conj().T
    out = mp.mpo_from_dense(m, p.L, d=2)
    if dbond is not None:
        out, _ = mp.truncate_svd(out, dmax=dbond)
    return out

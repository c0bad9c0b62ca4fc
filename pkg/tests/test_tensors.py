"""Dense primitive checks: contraction, SVD, QR/LQ, tridiagonal eig."""
import numpy as np
import pytest

from mpotrace import tensors
from mpotrace.errors import DimensionError, NumericError


def test_contract_identity_passthrough():
    rng = np.random.default_rng(0)
    for k in (1, 3, 7):
        b = rng.standard_normal((2, k))
        out = tensors.contract_pair(np.eye(2), b, [1], [0])
        assert np.allclose(out, b)


def test_contract_hand_computed():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[1.0], [1.0]])
    out = tensors.contract_pair(a, b, [1], [0])
    assert np.allclose(out, [[3.0], [7.0]])


def test_contract_matches_loop_reference():
    rng = np.random.default_rng(42)
    a = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    b = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
    out = tensors.contract_pair(a, b, [2, 1], [0, 1])
    ref = np.zeros(3, dtype=complex)
    for i in range(3):
        for j in range(4):
            for k in range(5):
                ref[i] += a[i, j, k] * b[k, j]
    assert np.allclose(out, ref, atol=1e-12)


def test_contract_axis_mismatch():
    with pytest.raises(DimensionError):
        tensors.contract_pair(np.eye(2), np.eye(3), [1], [0])
    with pytest.raises(DimensionError):
        tensors.contract_pair(np.eye(2), np.eye(2), [0, 1], [0])


def test_svd_identity():
    u, s, vh = tensors.svd(np.eye(3))
    assert np.allclose(s, [1.0, 1.0, 1.0])


def test_svd_rank_one():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(6)
    v = rng.standard_normal(4)
    _, s, _ = tensors.svd(np.outer(u, v))
    assert int(np.sum(s > 1e-12)) == 1


def test_svd_reconstruction_and_isometry():
    rng = np.random.default_rng(2)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        u, s, vh = tensors.svd(a)
        assert np.linalg.norm(u @ np.diag(s) @ vh - a) < 1e-12
        assert np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])) < 1e-12


def test_svd_with_axis_bipartition():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((2, 3, 4))
    u, s, vh = tensors.svd(a, left_axes=[0, 2])
    mat = a.transpose(0, 2, 1).reshape(8, 3)
    assert np.linalg.norm(u @ np.diag(s) @ vh - mat) < 1e-12


def test_svd_rejects_non_finite():
    bad = np.array([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(NumericError):
        tensors.svd(bad)


def test_qr_identity():
    q, r = tensors.qr(np.eye(4))
    assert np.allclose(np.abs(q), np.eye(4))
    assert np.allclose(np.abs(r), np.eye(4))


def test_qr_orthogonality():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        q, r = tensors.qr(a)
        assert np.linalg.norm(q.conj().T @ q - np.eye(3)) < 1e-12
        assert np.linalg.norm(q @ r - a) < 1e-12


def test_qr_scaled_diagonal():
    _, r = tensors.qr(np.diag([2.0, 3.0]))
    assert np.allclose(np.abs(np.diag(r)), [2.0, 3.0])


def test_lq_orthonormal_rows():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        low, q = tensors.lq(a)
        assert np.linalg.norm(q @ q.conj().T - np.eye(3)) < 1e-12
        assert np.linalg.norm(low @ q - a) < 1e-12


def test_tridiag_eig_single_entry():
    w, v = tensors.symmetric_tridiag_eig([5.0], [])
    assert np.allclose(w, [5.0])
    assert np.allclose(np.abs(v), [[1.0]])


def test_tridiag_eig_two_by_two():
    w, v = tensors.symmetric_tridiag_eig([0.0, 0.0], [1.0])
    assert np.allclose(w, [-1.0, 1.0])
    assert np.allclose(np.abs(v[0, :]), [1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_tridiag_eig_matches_dense():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        alphas = rng.standard_normal(8)
        betas = rng.standard_normal(7)
        w, v = tensors.symmetric_tridiag_eig(alphas, betas)
        t = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        w_ref = np.linalg.eigvalsh(t)
        assert np.allclose(w, w_ref, atol=1e-10)
        assert np.linalg.norm(t @ v - v * w) < 1e-10


def test_tridiag_eig_validation():
    with pytest.raises(ValueError):
        tensors.symmetric_tridiag_eig([], [])
    with pytest.raises(DimensionError):
        tensors.symmetric_tridiag_eig([1.0, 2.0], [1.0, 2.0])

"""Matrix product operators and states on an open chain.

Site tensors follow a fixed index order:

    Mps site:  (phys, left bond, right bond)
    Mpo site:  (phys out, phys in, left bond, right bond)

Boundary bonds have extent 1.  Every network carries a real `log_scale`:
the value represented is exp(log_scale) times the contraction of the site
tensors.  Keeping the prefactor in log form lets norms like 2**(L/2) and
thermal partition functions stay representable while the site data remain
O(1).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, NumericError
from . import tensors

DENSE_MAX_DIM = 2 ** 14


def _as_site(arr, rank: int, pos: int):
    a = np.ascontiguousarray(arr, dtype=complex)
    if a.ndim != rank:
        raise DimensionError(f"site {pos}: expected rank-{rank} tensor, got rank {a.ndim}")
    return a


def _check_chain(sites, rank: int) -> None:
    if not sites:
        raise DimensionError("a chain needs at least one site")
    d0 = sites[0].shape[0]
    for i, s in enumerate(sites):
        if s.shape[0] != d0 or (rank == 4 and s.shape[1] != d0):
            raise DimensionError(f"site {i}: physical extent differs from site 0")
    if sites[0].shape[rank - 2] != 1 or sites[-1].shape[rank - 1] != 1:
        raise DimensionError("boundary bonds must have extent 1")
    for i in range(len(sites) - 1):
        if sites[i].shape[rank - 1] != sites[i + 1].shape[rank - 2]:
            raise DimensionError(f"bond mismatch between sites {i} and {i + 1}")


@dataclass(frozen=True)
class Mps:
    """Matrix product state; treated as immutable."""

    sites: tuple
    log_scale: float = 0.0

    def __post_init__(self):
        sites = tuple(_as_site(s, 3, i) for i, s in enumerate(self.sites))
        _check_chain(sites, 3)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "log_scale", float(self.log_scale))

    @property
    def L(self) -> int:
        return len(self.sites)

    @property
    def d(self) -> int:
        return self.sites[0].shape[0]

    def bond_dims(self) -> list[int]:
        """Interior bond extents, left to right (length L-1)."""
        return [s.shape[2] for s in self.sites[:-1]]


@dataclass(frozen=True)
class Mpo:
    """Matrix product operator; treated as immutable."""

    sites: tuple
    log_scale: float = 0.0

    def __post_init__(self):
        sites = tuple(_as_site(s, 4, i) for i, s in enumerate(self.sites))
        _check_chain(sites, 4)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "log_scale", float(self.log_scale))

    @property
    def L(self) -> int:
        return len(self.sites)

    @property
    def d(self) -> int:
        return self.sites[0].shape[0]

    def bond_dims(self) -> list[int]:
        return [s.shape[3] for s in self.sites[:-1]]

    def max_bond(self) -> int:
        return max(self.bond_dims(), default=1)


def identity_mpo(L: int, d: int = 2) -> Mpo:
    """Identity operator on L sites of local dimension d, all bonds 1."""
    if L < 1 or d < 1:
        raise DimensionError("need L >= 1 and d >= 1")
    site = np.eye(d, dtype=complex).reshape(d, d, 1, 1)
    return Mpo(tuple(site.copy() for _ in range(L)))


def zero_mpo(L: int, d: int = 2) -> Mpo:
    site = np.zeros((d, d, 1, 1), dtype=complex)
    return Mpo(tuple(site.copy() for _ in range(L)))


def _seed_log_norm(a, ln: float):
    """Record a known ln||a|| on the (immutable) network so log_norm can
    skip the transfer contraction.  Callers must only seed exact values."""
    object.__setattr__(a, "_ln_memo", ln)
    return a


def shift_log_scale(a, delta: float):
    """Multiply by exp(delta) without touching site data."""
    cls = type(a)
    out = cls(a.sites, a.log_scale + float(delta))
    ln = getattr(a, "_ln_memo", None)
    if ln is not None:
        _seed_log_norm(out, ln if ln == -math.inf else ln + float(delta))
    return out


def scalar_multiply(c: complex, a: Mpo) -> Mpo:
    """c * a.  Positive real factors go into log_scale only; otherwise the
    magnitude goes into log_scale and the phase into site 1."""
    if c == 0:
        sites = (np.zeros_like(a.sites[0]),) + a.sites[1:]
        return Mpo(sites, a.log_scale)
    mag = abs(c)
    phase = c / mag
    if phase == 1.0:
        return Mpo(a.sites, a.log_scale + math.log(mag))
    sites = (a.sites[0] * phase,) + a.sites[1:]
    return Mpo(sites, a.log_scale + math.log(mag))


def adjoint(a: Mpo) -> Mpo:
    """Hermitian conjugate: swap the physical legs and conjugate."""
    return Mpo(tuple(s.conj().transpose(1, 0, 2, 3) for s in a.sites), a.log_scale)


def _check_compatible(a, b) -> None:
    if a.L != b.L:
        raise DimensionError(f"chain lengths differ: {a.L} vs {b.L}")
    if a.d != b.d:
        raise DimensionError(f"physical dimensions differ: {a.d} vs {b.d}")


def exact_add(a: Mpo, b: Mpo, coeff: complex = 1.0) -> Mpo:
    """a + coeff*b by block embedding; interior bonds add exactly."""
    _check_compatible(a, b)
    L, d = a.L, a.d
    # rebase both prefactors onto a common log_scale so neither block
    # over- or underflows when the scales are far apart
    lb = b.log_scale + math.log(abs(coeff)) if coeff != 0 else -math.inf
    ls = max(a.log_scale, lb)
    fa = math.exp(a.log_scale - ls)
    fb = coeff * math.exp(b.log_scale - ls) if coeff != 0 else 0.0
    if L == 1:
        return Mpo((fa * a.sites[0] + fb * b.sites[0],), ls)
    sites = []
    for i in range(L):
        sa, sb = a.sites[i], b.sites[i]
        if i == 0:
            blk = np.concatenate([fa * sa, fb * sb], axis=3)
        elif i == L - 1:
            blk = np.concatenate([sa, sb], axis=2)
        else:
            dla, dra = sa.shape[2], sa.shape[3]
            dlb, drb = sb.shape[2], sb.shape[3]
            blk = np.zeros((d, d, dla + dlb, dra + drb), dtype=complex)
            blk[:, :, :dla, :dra] = sa
            blk[:, :, dla:, dra:] = sb
        sites.append(blk)
    return Mpo(tuple(sites), ls)


def exact_multiply(a: Mpo, b: Mpo) -> Mpo:
    """Operator product a @ b; interior bonds multiply exactly."""
    _check_compatible(a, b)
    sites = []
    for sa, sb in zip(a.sites, b.sites):
        # o c la ra / c i lb rb -> o i la lb ra rb
        t = np.einsum("ocxy,cizw->oixzyw", sa, sb)
        d = sa.shape[0]
        sites.append(t.reshape(d, d, sa.shape[2] * sb.shape[2], sa.shape[3] * sb.shape[3]))
    return Mpo(tuple(sites), a.log_scale + b.log_scale)


def vectorize(m: Mpo) -> Mps:
    """Reinterpret an operator as a state by fusing (out, in) row-major
    into a single physical leg of extent d*d."""
    sites = tuple(s.reshape(s.shape[0] * s.shape[1], s.shape[2], s.shape[3]) for s in m.sites)
    return Mps(sites, m.log_scale)


def _transfer_scaled(a, b) -> tuple[complex, float]:
    """Left-to-right transfer contraction of <a, b>, with running
    magnitude extraction.  Returns (mantissa, log) so the inner product is
    mantissa * exp(log)."""
    env = np.ones((1, 1), dtype=complex)
    logacc = a.log_scale + b.log_scale
    for sa, sb in zip(a.sites, b.sites):
        if sa.ndim == 4:
            ca = sa.conj().reshape(sa.shape[0] * sa.shape[1], sa.shape[2], sa.shape[3])
            cb = sb.reshape(sb.shape[0] * sb.shape[1], sb.shape[2], sb.shape[3])
        else:
            ca, cb = sa.conj(), sb
        p, lb, rb = cb.shape
        la, ra = ca.shape[1], ca.shape[2]
        # env: (la, lb); cb as (lb, p*rb) -> (la, p, rb), matmul form
        tmp = (env @ cb.transpose(1, 0, 2).reshape(lb, p * rb)).reshape(la, p, rb)
        # ca as (p*la, ra) against tmp as (p*la, rb) -> env': (ra, rb)
        env = ca.reshape(p * la, ra).T @ tmp.transpose(1, 0, 2).reshape(p * la, rb)
        mag = np.max(np.abs(env)) if env.size else 0.0
        if mag == 0.0:
            return 0.0 + 0.0j, 0.0
        env = env / mag
        logacc += math.log(mag)
    return complex(env[0, 0]), logacc


def inner_product(a, b) -> complex:
    """Frobenius inner product <a, b> = tr(a^H b), or the vector inner
    product for states.  Contracted as a transfer matrix, never densified.
    """
    if type(a) is not type(b):
        raise DimensionError("operands must both be Mpo or both Mps")
    _check_compatible(a, b)
    mant, logv = _transfer_scaled(a, b)
    return mant * math.exp(logv) if mant != 0 else 0.0 + 0.0j


def inner_product_scaled(a, b) -> tuple[complex, float]:
    """Inner product as (mantissa, log): value = mantissa * exp(log)."""
    if type(a) is not type(b):
        raise DimensionError("operands must both be Mpo or both Mps")
    _check_compatible(a, b)
    return _transfer_scaled(a, b)


def log_norm(a) -> float:
    """ln of the Frobenius norm; -inf for the zero operator."""
    memo = getattr(a, "_ln_memo", None)
    if memo is not None:
        return memo
    mant, logv = _transfer_scaled(a, a)
    # mant.real can round to <= 0 only when the norm is lost in roundoff
    ln = 0.5 * (math.log(mant.real) + logv) if mant.real > 0 else -math.inf
    _seed_log_norm(a, ln)
    return ln


def frobenius_norm(a) -> float:
    ln = log_norm(a)
    return 0.0 if ln == -math.inf else math.exp(ln)


def normalized(a):
    """Rescale to unit Frobenius norm (log_scale becomes exactly what is
    needed to cancel the norm)."""
    ln = log_norm(a)
    if ln == -math.inf:
        raise NumericError("cannot normalize the zero operator")
    return shift_log_scale(a, -ln)


def mpo_trace(a: Mpo) -> complex:
    """Exact trace: contract the physical legs pairwise, multiply the bond
    matrices left to right."""
    env = np.ones((1, 1), dtype=complex)
    logacc = a.log_scale
    for s in a.sites:
        t = np.trace(s, axis1=0, axis2=1)  # (Dl, Dr)
        env = env @ t
        mag = np.max(np.abs(env)) if env.size else 0.0
        if mag == 0.0:
            return 0.0 + 0.0j
        env = env / mag
        logacc += math.log(mag)
    return complex(env[0, 0]) * math.exp(logacc)


def dense(a) -> np.ndarray:
    """Full matrix (Mpo) or vector (Mps).  Guarded: refuses when the dense
    physical dimension exceeds 2**14."""
    if isinstance(a, Mpo):
        dim = a.d ** a.L
        if dim > DENSE_MAX_DIM:
            raise CapacityError(f"dense matrix would be {dim}x{dim}; limit is {DENSE_MAX_DIM}")
        acc = np.ones((1,), dtype=complex)  # trailing index: right bond
        for s in a.sites:
            acc = np.tensordot(acc, s, axes=([acc.ndim - 1], [2]))
        acc = acc.reshape(acc.shape[:-1])  # drop the trailing unit boundary
        # axes are (o1, i1, o2, i2, ...); bring all outs before all ins
        L = a.L
        perm = list(range(0, 2 * L, 2)) + list(range(1, 2 * L, 2))
        mat = acc.transpose(perm).reshape(dim, dim)
        return mat * math.exp(a.log_scale)
    if isinstance(a, Mps):
        dim = a.d ** a.L
        if dim > DENSE_MAX_DIM:
            raise CapacityError(f"dense vector would have {dim} entries; limit is {DENSE_MAX_DIM}")
        acc = np.ones((1,), dtype=complex)
        for s in a.sites:
            acc = np.tensordot(acc, s, axes=([acc.ndim - 1], [1]))
        return acc.reshape(dim) * math.exp(a.log_scale)
    raise TypeError(f"expected Mpo or Mps, got {type(a).__name__}")


def _split_left(site: np.ndarray):
    """QR split of an Mpo site, orthonormal over (out, in, left)."""
    d1, d2, dl, dr = site.shape
    q, r = tensors.qr(site.reshape(d1 * d2 * dl, dr))
    return q.reshape(d1, d2, dl, -1), r


def _split_right(site: np.ndarray):
    """LQ split of an Mpo site, orthonormal over (out, in, right)."""
    d1, d2, dl, dr = site.shape
    mat = site.transpose(2, 0, 1, 3).reshape(dl, d1 * d2 * dr)
    l, q = tensors.lq(mat)
    return l, q.reshape(-1, d1, d2, dr).transpose(1, 2, 0, 3)


def canonicalize(a: Mpo, center: int = 0) -> Mpo:
    """Bring to mixed-canonical form with the orthogonality center at
    `center` (0-based).  Sites left of the center become left-isometries,
    sites right of it right-isometries, and the center is rescaled to unit
    norm with the norm moved into log_scale.  The dense value is unchanged.
    """
    L = a.L
    if not 0 <= center < L:
        raise DimensionError(f"center {center} out of range for L={L}")
    sites = [s.copy() for s in a.sites]
    for i in range(center):
        q, r = _split_left(sites[i])
        sites[i] = q
        s1 = sites[i + 1]
        o, j, dl, dr = s1.shape
        # r: (dl', dl) absorbed into the left bond of the neighbor
        s1 = (r @ s1.transpose(2, 0, 1, 3).reshape(dl, o * j * dr)).reshape(-1, o, j, dr)
        sites[i + 1] = s1.transpose(1, 2, 0, 3)
    for i in range(L - 1, center, -1):
        l, q = _split_right(sites[i])
        sites[i] = q
        s0 = sites[i - 1]
        # l: (dr, dr') absorbed into the right bond of the neighbor
        sites[i - 1] = (s0.reshape(-1, s0.shape[3]) @ l).reshape(s0.shape[:3] + (l.shape[1],))
    nrm = np.linalg.norm(sites[center])
    ls = a.log_scale
    if nrm > 0:
        sites[center] = sites[center] / nrm
        ls += math.log(nrm)
        # unit center surrounded by isometries: the norm is exp(ls) exactly
        return _seed_log_norm(Mpo(tuple(sites), ls), ls)
    return _seed_log_norm(Mpo(tuple(sites), ls), -math.inf)


def truncate_svd(a: Mpo, dmax: int | None = None, eps: float = 1e-14) -> tuple[Mpo, float]:
    """Compress every interior bond to at most dmax, discarding relative
    singular-value weight up to eps per bond.

    Returns the truncated operator and the accumulated root-sum-square of
    the discarded singular values relative to the norm of a.  A single
    sweep from a right-canonical form; the discarded pieces at different
    bonds are mutually orthogonal, so the reported error equals the true
    relative distance (up to roundoff).
    """
    if dmax is not None and dmax < 1:
        raise DimensionError("dmax must be >= 1")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    w = canonicalize(a, center=0)
    sites = [s.copy() for s in w.sites]
    L = w.L
    disc2 = 0.0
    for i in range(L - 1):
        d1, d2, dl, dr = sites[i].shape
        u, s, vh = tensors.svd(sites[i].reshape(d1 * d2 * dl, dr))
        tot2 = float(s @ s)
        if tot2 == 0.0:
            keep = 1
        else:
            tail2 = np.concatenate([np.cumsum((s * s)[::-1])[::-1], [0.0]])  # tail2[k] = sum of s[k:]**2
            budget = (eps * eps) * tot2
            keep = int(np.searchsorted(-tail2, -budget))  # smallest k with tail2[k] <= budget
            keep = max(keep, 1)
        if dmax is not None:
            keep = min(keep, dmax)
        disc2 += float(tail2[keep]) if tot2 > 0.0 else 0.0
        sites[i] = u[:, :keep].reshape(d1, d2, dl, keep)
        carry = s[:keep, None] * vh[:keep]
        s1 = sites[i + 1]
        o, j, dl1, dr1 = s1.shape
        # carry: (keep, dl1) absorbed into the left bond of the neighbor
        s1 = (carry @ s1.transpose(2, 0, 1, 3).reshape(dl1, o * j * dr1)).reshape(keep, o, j, dr1)
        sites[i + 1] = s1.transpose(1, 2, 0, 3)
    out = Mpo(tuple(sites), w.log_scale)
    # left-isometries everywhere except the last site, which carries the
    # remaining weight: the norm reduces to that site's Frobenius norm
    tail = float(np.linalg.norm(sites[L - 1]))
    _seed_log_norm(out, w.log_scale + math.log(tail) if tail > 0 else -math.inf)
    return out, math.sqrt(max(disc2, 0.0))


def hermitian_part(a: Mpo) -> Mpo:
    """(a + a^H)/2; bonds at most double."""
    return scalar_multiply(0.5, exact_add(a, adjoint(a)))


def mpo_from_dense(mat: np.ndarray, L: int, d: int = 2) -> Mpo:
    """Exact MPO of a dense matrix by successive SVD splitting.  Keeps all
    singular values above 1e-14 relative, so dense() round-trips to within
    numerical precision."""
    mat = np.asarray(mat, dtype=complex)
    dim = d ** L
    if mat.shape != (dim, dim):
        raise DimensionError(f"expected a {dim}x{dim} matrix for L={L}, d={d}")
    if dim > DENSE_MAX_DIM:
        raise CapacityError(f"matrix dimension {dim} exceeds {DENSE_MAX_DIM}")
    ten = mat.reshape((d,) * (2 * L))
    perm = [ax for i in range(L) for ax in (i, L + i)]  # interleave (o_k, i_k)
    ten = ten.transpose(perm).reshape(1, -1)
    sites = []
    dl = 1
    for i in range(L - 1):
        m = ten.reshape(dl * d * d, -1)
        u, s, vh = tensors.svd(m)
        keep = max(1, int(np.sum(s > 1e-14 * (s[0] if s.size else 0.0))))
        sites.append(u[:, :keep].reshape(dl, d, d, keep).transpose(1, 2, 0, 3))
        ten = s[:keep, None] * vh[:keep]
        dl = keep
    sites.append(ten.reshape(dl, d, d, 1).transpose(1, 2, 0, 3))
    return Mpo(tuple(sites))


def save_json(a, path: str, metadata: dict | None = None) -> None:
    """Write an Mpo or Mps to a JSON file.  Complex entries are stored as
    innermost [re, im] pairs.  An optional metadata dict is stored next to
    the tensors and ignored on load."""
    if isinstance(a, Mpo):
        kind = "mpo"
    elif isinstance(a, Mps):
        kind = "mps"
    else:
        raise TypeError(f"expected Mpo or Mps, got {type(a).__name__}")
    doc = {
        "kind": kind,
        "L": a.L,
        "d": a.d,
        "log_scale": a.log_scale,
        "sites": [np.stack([s.real, s.imag], axis=-1).tolist() for s in a.sites],
    }
    if metadata is not None:
        doc["metadata"] = metadata
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_json(path: str):
    """Read an Mpo or Mps written by save_json."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NumericError(f"{path}: not valid JSON ({exc})") from exc
    try:
        kind = doc["kind"]
        L = int(doc["L"])
        d = int(doc["d"])
        ls = float(doc["log_scale"])
        raw = doc["sites"]
    except (KeyError, TypeError, ValueError) as exc:
        raise NumericError(f"{path}: missing or malformed field ({exc})") from exc
    if kind not in ("mpo", "mps"):
        raise NumericError(f"{path}: unknown kind {kind!r}")
    if len(raw) != L:
        raise NumericError(f"{path}: L={L} but {len(raw)} site tensors")
    sites = []
    for i, entry in enumerate(raw):
        arr = np.asarray(entry, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != 2:
            raise NumericError(f"{path}: site {i} entries must be [re, im] pairs")
        data = arr[..., 0] + 1j * arr[..., 1]
        if not np.all(np.isfinite(data)):
            raise NumericError(f"{path}: site {i} contains non-finite entries")
        sites.append(data)
    if not math.isfinite(ls):
        raise NumericError(f"{path}: log_scale is not finite")
    try:
        obj = Mpo(tuple(sites), ls) if kind == "mpo" else Mps(tuple(sites), ls)
    except DimensionError as exc:
        raise NumericError(f"{path}: inconsistent site shapes ({exc})") from exc
    if obj.d != d:
        raise NumericError(f"{path}: header d={d} but site tensors have d={obj.d}")
    return obj

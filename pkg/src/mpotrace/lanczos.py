"""Global Lanczos iteration in MPO arithmetic with Gauss-quadrature
evaluation of trace functionals.

The driver builds the three-term recurrence under the Frobenius inner
product <U, V> = tr(U^H V), starting from the identity.  After k steps the
symmetric tridiagonal matrix T_k (diagonal alpha_1..alpha_k, off-diagonal
beta_2..beta_k) defines a k-node Gauss rule: with T_k = V diag(theta) V^T,

    G_k f = beta_1^2 * sum_j |V[0, j]|^2 f(theta_j)

approximates tr f(A) and is exact for polynomials of degree <= 2k-1.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, HermiticityError, NumericError
from . import mpo as mp
from . import tensors
from .sweeping import SweepOptions, multiply_and_optimize, sum_and_optimize

logger = logging.getLogger("mpotrace.lanczos")

# relative floor under which a new block norm counts as exact breakdown
BREAKDOWN_RTOL = 1e-13

STOP_CONVERGED = "converged"
STOP_BREAKDOWN = "breakdown"
STOP_RITZ = "ritz-violation"
STOP_BOUND = "bound-monotonicity-violation"
STOP_SIGMA = "sigma-outlier"
STOP_KMAX = "kmax"


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Recurrence coefficients: diagonal alphas, off-diagonal betas.

    The initial norm beta_1 is not part of the matrix; it scales the
    quadrature and travels separately.
    """

    alphas: tuple
    betas: tuple

    def __post_init__(self):
        al = tuple(float(a) for a in self.alphas)
        be = tuple(float(b) for b in self.betas)
        if len(al) < 1:
            raise ValueError("need at least one diagonal entry")
        if len(be) != len(al) - 1:
            raise ValueError(f"need len(betas) == len(alphas)-1, got {len(be)} vs {len(al)}")
        if not all(math.isfinite(a) for a in al) or not all(math.isfinite(b) for b in be):
            raise NumericError("tridiagonal entries must be finite")
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "betas", be)

    @property
    def k(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class SpectralFunction:
    """Scalar map f with a name and the sign of its order-2K derivatives
    on the spectral interval (+1 makes the quadrature a lower bound of
    tr f, -1 an upper bound, 0 unknown/mixed)."""

    name: str
    fn: Callable[[float], float]
    derivative_sign: int = 0

    def bound_direction(self) -> str:
        return {1: "lower", -1: "upper"}.get(self.derivative_sign, "none")


def identity_function() -> SpectralFunction:
    return SpectralFunction("identity", lambda lam: lam, 0)


def polynomial_function(coeffs) -> SpectralFunction:
    """f(lam) = sum_p coeffs[p] * lam**p."""
    cs = [float(c) for c in coeffs]
    if not cs:
        raise ValueError("need at least one coefficient")

    def fn(lam, _cs=tuple(cs)):
        acc = 0.0
        for c in reversed(_cs):
            acc = acc * lam + c
        return acc

    return SpectralFunction("poly:" + ",".join(repr(c) for c in cs), fn, 0)


def _xx_log_xx(lam: float) -> float:
    """lam^2 ln lam^2, continuously extended by 0 at lam = 0."""
    a = abs(lam)
    if a < 1e-300:
        return 0.0
    return 2.0 * a * a * math.log(a)


def entropy_integrand() -> SpectralFunction:
    """f(lam) = lam^2 ln lam^2.  Even derivatives of -f are positive on
    lam > 0, so the quadrature of f approaches tr f(A) from above."""

    def fn(lam):
        if lam < 0:
            logger.warning("entropy integrand evaluated at negative node %g", lam)
        return _xx_log_xx(lam)

    return SpectralFunction("xx-log-xx", fn, -1)


def entropy_derivative_sign(K: int) -> int:
    """Sign of the order-2K derivative of -lam^2 ln lam^2 on lam > 0,
    which is 4*(2K-3)!/lam^(2K-2) > 0 for every K > 1.  The positive sign
    makes the entropy estimates a nondecreasing sequence of lower bounds.
    """
    if K <= 1:
        raise ValueError("derivative sign classification needs K > 1")
    return 1


@dataclass(frozen=True)
class StoppingConfig:
    eps_conv: float = 1e-10
    window: int = 3
    sigma_mult: float = 3.0
    spectrum_floor: float | None = None
    spectrum_ceiling: float | None = None
    bound_direction: str = "none"  # lower | upper | none

    def __post_init__(self):
        if self.eps_conv <= 0:
            raise ValueError("eps_conv must be > 0")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.bound_direction not in ("lower", "upper", "none"):
            raise ValueError(f"unknown bound_direction {self.bound_direction!r}")


@dataclass
class IterationRecord:
    k: int
    alpha: float
    beta: float
    ritz_min: float
    ritz_max: float
    estimate: float
    wall_ms: float
    mult_residual: float = 0.0
    add_residual: float = 0.0


@dataclass
class QuadratureRun:
    records: list = field(default_factory=list)
    estimate: float = math.nan
    stop_reason: str | None = None
    beta1: float = math.nan
    tridiag: TridiagonalMatrix | None = None
    basis: list | None = None

    def estimates(self) -> list[float]:
        return [r.estimate for r in self.records]


def gauss_quadrature(t: TridiagonalMatrix, beta1: float, f: SpectralFunction):
    """Evaluate the Gauss rule induced by t, scaled by beta1^2.

    Returns (estimate, ritz values ascending, weights).  The weights are
    the squared first components of the normalized eigenvectors of t and
    sum to one.
    """
    if not beta1 > 0:
        raise ValueError("beta1 must be positive")
    theta, vecs = tensors.symmetric_tridiag_eig(t.alphas, t.betas)
    weights = np.abs(vecs[0, :]) ** 2
    vals = np.empty_like(theta)
    for j, node in enumerate(theta):
        v = f.fn(float(node))
        if not math.isfinite(v):
            raise EvaluationError(f"{f.name} is not finite at Ritz node theta_{j}={node!r}")
        vals[j] = v
    estimate = beta1 * beta1 * float(weights @ vals)
    return estimate, [float(x) for x in theta], [float(w) for w in weights]


def check_stop(run: QuadratureRun, stop: StoppingConfig):
    """First satisfied criterion wins, in the fixed order: convergence of
    successive estimates, Ritz values escaping the declared spectral
    interval, violated bound monotonicity, 3-sigma outlier against the
    trailing window."""
    ests = run.estimates()
    if not ests:
        return False, None
    cur = ests[-1]
    if len(ests) >= 2 and abs(cur - ests[-2]) < stop.eps_conv:
        return True, STOP_CONVERGED
    rec = run.records[-1]
    if stop.spectrum_floor is not None and rec.ritz_min < stop.spectrum_floor:
        return True, STOP_RITZ
    if stop.spectrum_ceiling is not None and rec.ritz_max > stop.spectrum_ceiling:
        return True, STOP_RITZ
    if len(ests) >= 2:
        if stop.bound_direction == "lower" and cur < ests[-2]:
            return True, STOP_BOUND
        if stop.bound_direction == "upper" and cur > ests[-2]:
            return True, STOP_BOUND
    w = stop.window
    if len(ests) >= w + 1:
        prev = np.asarray(ests[-1 - w:-1])
        mu = float(prev.mean())
        sd = float(prev.std(ddof=1))
        if sd > 0 and abs(cur - mu) > stop.sigma_mult * sd:
            return True, STOP_SIGMA
    return False, None


def _cap(dmax: int | None, want: int) -> int:
    return want if dmax is None else min(dmax, want)


def global_lanczos(
    a: mp.Mpo,
    u0: mp.Mpo | None = None,
    kmax: int = 50,
    dmax: int | None = None,
    f: SpectralFunction | None = None,
    stop: StoppingConfig | None = None,
    sweep: SweepOptions | None = None,
    estimate_map: Callable | None = None,
    keep_basis: bool = False,
    progress: Callable | None = None,
) -> QuadratureRun:
    """Run the global Lanczos iteration on the Hermitian operator a.

    Each step normalizes the previous residual block, applies a with a
    capped-bond variational multiply, orthogonalizes against the two
    preceding blocks with capped-bond variational sums, and evaluates the
    Gauss rule on the accumulated tridiagonal matrix.  The bond cap grows
    as min(dmax, D*D_a) on the multiply and min(dmax, D + D_block) on each
    subtraction, exactly following the recurrence's cost schedule.

    estimate_map, when given, converts the raw quadrature value into the
    recorded estimate; it is called as estimate_map(gf, beta1, ritz,
    weights).  Stopping criteria act on the recorded estimates.
    """
    if u0 is None:
        u0 = mp.identity_mpo(a.L, a.d)
    mp._check_compatible(a, u0)
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if dmax is not None and dmax < u0.max_bond():
        raise ValueError(f"dmax={dmax} is below the start operator bond {u0.max_bond()}")
    f = f or identity_function()
    stop = stop or StoppingConfig()
    sweep = sweep or SweepOptions()

    d_a = a.max_bond()
    run = QuadratureRun(basis=[] if keep_basis else None)
    alphas: list[float] = []
    betas: list[float] = []
    beta1 = math.nan
    u_prev: mp.Mpo | None = None
    v = u0
    d_ledger = u0.max_bond()
    v_scale = 0.0  # magnitude of the pre-normalization block, for breakdown detection

    for k in range(1, kmax + 1):
        t0 = time.perf_counter()
        ln_v = mp.log_norm(v)
        beta = math.exp(ln_v) if ln_v != -math.inf else 0.0
        if k == 1:
            if beta <= 0:
                raise NumericError("start operator has zero Frobenius norm")
            beta1 = beta
        else:
            if beta <= BREAKDOWN_RTOL * v_scale:
                # Krylov space exhausted: T_{k-1} reproduces the operator
                # exactly on the subspace and the last estimate is final
                run.stop_reason = STOP_BREAKDOWN
                break
            betas.append(beta)
        u = mp.shift_log_scale(v, -math.log(beta))
        if keep_basis:
            run.basis.append(u)

        d_ledger = _cap(dmax, d_ledger * d_a)
        w_fit = multiply_and_optimize(a, u, d_ledger, sweep)
        v = w_fit.mpo
        mult_residual = w_fit.residual
        w_norm = mp.frobenius_norm(v)

        add_residual = 0.0
        if u_prev is not None:
            d_ledger = _cap(dmax, d_ledger + u_prev.max_bond())
            s_fit = sum_and_optimize(v, [(-beta, u_prev)], d_ledger, sweep)
            v = s_fit.mpo
            add_residual += s_fit.residual

        alpha_c = mp.inner_product(u, v)
        herm_scale = max(abs(alpha_c), w_norm, 1e-300)
        if abs(alpha_c.imag) > 1e-8 * herm_scale:
            raise HermiticityError(
                f"step {k}: <U, V> = {alpha_c!r} has a relative imaginary part "
                f"above 1e-8; the operator is not Hermitian to tolerance"
            )
        alpha = float(alpha_c.real)
        alphas.append(alpha)

        d_ledger = _cap(dmax, d_ledger + u.max_bond())
        s_fit = sum_and_optimize(v, [(-alpha, u)], d_ledger, sweep)
        v = s_fit.mpo
        add_residual += s_fit.residual

        tri = TridiagonalMatrix(tuple(alphas), tuple(betas))
        gf, ritz, weights = gauss_quadrature(tri, beta1, f)
        est = estimate_map(gf, beta1, ritz, weights) if estimate_map else gf
        rec = IterationRecord(
            k=k,
            alpha=alpha,
            beta=beta,
            ritz_min=ritz[0],
            ritz_max=ritz[-1],
            estimate=est,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            mult_residual=mult_residual,
            add_residual=add_residual,
        )
        run.records.append(rec)
        run.tridiag = tri
        run.beta1 = beta1
        if progress is not None:
            progress(rec)
        u_prev = u
        # scale of the terms that formed the new residual: A U_k, alpha U_k,
        # and (from step 2 on) beta U_{k-1}; beta_1 is the start norm and
        # never enters the subtraction
        v_scale = max(w_norm, abs(alpha), beta if k > 1 else 0.0)
        halt, reason = check_stop(run, stop)
        if halt:
            run.stop_reason = reason
            break
    if run.stop_reason is None:
        run.stop_reason = STOP_KMAX
    if run.records:
        run.estimate = run.records[-1].estimate
    return run


def trace_of_positive(m: mp.Mpo, sweep: SweepOptions | None = None) -> float:
    """tr m from a single Lanczos step: beta_1^2 * alpha_1.

    The one-step Gauss rule integrates linear functions exactly, so with
    an uncapped multiply this is the exact trace of a Hermitian m; for a
    positive m it equals the trace norm.
    """
    run = global_lanczos(
        m,
        kmax=1,
        dmax=None,
        f=identity_function(),
        stop=StoppingConfig(),
        sweep=sweep,
    )
    return float(run.estimate)


def entropy_from_half_state(
    m: mp.Mpo,
    kmax: int = 50,
    dmax: int | None = 100,
    stop: StoppingConfig | None = None,
    sweep: SweepOptions | None = None,
    keep_basis: bool = False,
    progress: Callable | None = None,
):
    """Von Neumann entropy of rho = m^H m / tr(m^H m) for Hermitian psd m.

    Runs the Lanczos quadrature for f(lam) = lam^2 ln lam^2 on m rescaled
    to unit Frobenius norm, which folds the normalization S = ln Z2 -
    G f / Z2 (Z2 = tr(m^2) = <m, m>) into a plain sign flip: the rescaled
    squared eigenvalues sum to one, so -sum lam^2 ln lam^2 over them IS
    the entropy.  The per-iteration estimates are entropy values: a
    nondecreasing sequence of lower bounds while the iteration stays
    clean and the normalized spectrum sits in the small-eigenvalue
    regime.

    Returns (S, run).
    """
    mant, logv = mp.inner_product_scaled(m, m)
    if mant.real <= 0:
        raise NumericError("tr(m^H m) must be positive")
    ln_z2 = math.log(mant.real) + logv
    m_unit = mp.shift_log_scale(m, -0.5 * ln_z2)
    if stop is None:
        stop = StoppingConfig(spectrum_floor=0.0, bound_direction="lower")

    def to_entropy(gf, beta1, ritz, weights):
        return -gf

    run = global_lanczos(
        m_unit,
        kmax=kmax,
        dmax=dmax,
        f=entropy_integrand(),
        stop=stop,
        sweep=sweep,
        estimate_map=to_entropy,
        keep_basis=keep_basis,
        progress=progress,
    )
    return float(run.estimate), run

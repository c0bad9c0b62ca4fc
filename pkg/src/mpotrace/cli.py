"""Command-line front end.

Subcommands:
  build-thermal   build a thermal half-state (or full Gibbs state) MPO file
  estimate        run the Lanczos quadrature on a stored MPO
  exact           evaluate the reference oracles
  sweep           run a manifest of (L, beta, dmax, kmax) pipeline cells

Exit codes: 0 success, 1 numeric/runtime failure, 2 usage error.  The
environment variable MPOTRACE_LOG selects the log level (debug/info/...).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from .errors import MpoTraceError
from . import exact as ex
from . import lanczos as lz
from . import models
from . import mpo as mp
from .sweeping import SweepOptions, multiply_and_optimize

logger = logging.getLogger("mpotrace.cli")

CSV_COLUMNS = ("k", "alpha", "beta", "ritz_min", "ritz_max", "estimate", "wall_ms")


def _configure_logging() -> None:
    level_name = os.environ.get("MPOTRACE_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpotrace",
        description="Trace functionals of large Hermitian operators in MPO "
                    "form via global Lanczos quadrature.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-thermal", help="build exp(-beta/2 H) for the Ising chain")
    b.add_argument("--L", type=int, required=True, help="number of sites (>= 2)")
    b.add_argument("--J", type=float, default=1.0, help="XX coupling")
    b.add_argument("--g", type=float, default=1.0, help="transverse field")
    b.add_argument("--h", type=float, default=0.0, help="longitudinal field")
    b.add_argument("--beta", type=float, required=True, help="inverse temperature (> 0)")
    b.add_argument("--bond-dim", type=int, default=20, dest="bond_dim",
                   help="bond cap during the evolution (default 20)")
    b.add_argument("--dtau", type=float, default=0.01, help="Trotter step (default 0.01)")
    b.add_argument("--seed", type=int, default=0, help="recorded in metadata")
    b.add_argument("--state", choices=("half", "full"), default="half",
                   help="half: exp(-beta/2 H); full: trace-normalized Gibbs state")
    b.add_argument("--trunc-warn", type=float, default=1e-6, dest="trunc_warn",
                   help="warn when a layer discards more relative weight than this")
    b.add_argument("--out", required=True, help="output JSON path")

    e = sub.add_parser("estimate", help="estimate tr f(A) for a stored MPO")
    e.add_argument("--input", required=True, help="MPO JSON path")
    e.add_argument("--function", required=True,
                   help="entropy | trace | poly:<c0,c1,...>")
    e.add_argument("--kmax", type=int, default=50)
    e.add_argument("--dmax", type=int, default=100,
                   help="bond cap inside the iteration; <= 0 means unlimited")
    e.add_argument("--eps", type=float, default=1e-10, help="convergence threshold")
    e.add_argument("--window", type=int, default=3, help="outlier detection window")
    e.add_argument("--spectrum-floor", type=float, default=None, dest="spectrum_floor")
    e.add_argument("--seed", type=int, default=7, help="seed for randomized sweep inits")
    e.add_argument("--out", default=None, help="result JSON path (default: stdout)")
    e.add_argument("--iterations-csv", default=None, dest="iterations_csv",
                   help="write the per-iteration table to this CSV path")

    x = sub.add_parser("exact", help="reference oracle entropies")
    x.add_argument("--L", type=int, required=True)
    x.add_argument("--J", type=float, default=1.0)
    x.add_argument("--g", type=float, default=1.0)
    x.add_argument("--h", type=float, default=0.0)
    x.add_argument("--beta", type=float, required=True)
    x.add_argument("--method", choices=("dense", "free-fermion", "auto"), default="auto")

    s = sub.add_parser("sweep", help="run a manifest of pipeline cells")
    s.add_argument("--manifest", required=True, help="JSON manifest path")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--jobs", type=int, default=1, help="concurrent cells (default 1)")
    s.add_argument("--dbond", type=int, default=20, help="input-build bond cap")
    s.add_argument("--dtau", type=float, default=0.01, help="input-build Trotter step")
    return parser


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def cmd_build_thermal(args) -> int:
    try:
        params = models.IsingParams(L=args.L, J=args.J, g=args.g, h=args.h, beta=args.beta)
        if args.bond_dim < 1:
            raise ValueError("--bond-dim must be >= 1")
        if args.dtau <= 0:
            raise ValueError("--dtau must be > 0")
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    m, meta = models.thermal_half_state_report(params, dbond=args.bond_dim, dtau=args.dtau)
    alarmed = [l for l in meta["layers"] if l["discarded"] > args.trunc_warn]
    for l in alarmed:
        logger.warning(
            "step %d layer %s discarded relative weight %.3e (above %.1e)",
            l["step"], l["layer"], l["discarded"], args.trunc_warn,
        )
    if args.state == "full":
        fit = multiply_and_optimize(m, mp.adjoint(m), args.bond_dim,
                                    SweepOptions(seed=args.seed))
        rho = fit.mpo
        tr = mp.mpo_trace(rho)
        if not tr.real > 0:
            print(f"error: Gibbs state trace is not positive ({tr!r})", file=sys.stderr)
            return 1
        m = mp.scalar_multiply(1.0 / tr.real, rho)
        meta["squaring_residual"] = float(fit.residual)
    meta.update(
        state=args.state,
        params={"L": params.L, "J": params.J, "g": params.g, "h": params.h,
                "beta": params.beta},
        seed=args.seed,
        alarm_threshold=args.trunc_warn,
        alarmed_layers=len(alarmed),
        wall_s=time.perf_counter() - t0,
    )
    mp.save_json(m, args.out, metadata=meta)
    logger.info("wrote %s (max bond %d, %d layers)", args.out, m.max_bond(),
                len(meta["layers"]))
    return 0


def _parse_function(text: str):
    """Map the --function value to (SpectralFunction or 'entropy'/'trace')."""
    if text in ("entropy", "trace"):
        return text
    if text.startswith("poly:"):
        parts = text[len("poly:"):].split(",")
        try:
            coeffs = [float(c) for c in parts]
        except ValueError:
            raise ValueError(f"bad polynomial coefficients in {text!r}")
        return lz.polynomial_function(coeffs)
    raise ValueError(f"unknown function {text!r} (want entropy, trace, or poly:<c0,c1,...>)")


def _record_dict(rec: lz.IterationRecord) -> dict:
    return {
        "k": rec.k, "alpha": rec.alpha, "beta": rec.beta,
        "ritz_min": rec.ritz_min, "ritz_max": rec.ritz_max,
        "estimate": rec.estimate, "wall_ms": rec.wall_ms,
        "mult_residual": rec.mult_residual, "add_residual": rec.add_residual,
    }


def _write_iterations_csv(records, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([rec.k] + [f"{getattr(rec, c):.17g}" for c in CSV_COLUMNS[1:]])


def cmd_estimate(args) -> int:
    try:
        fspec = _parse_function(args.function)
        if args.kmax < 1:
            raise ValueError("--kmax must be >= 1")
        if args.window < 2:
            raise ValueError("--window must be >= 2")
        if args.eps <= 0:
            raise ValueError("--eps must be > 0")
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    m = mp.load_json(args.input)
    if not isinstance(m, mp.Mpo):
        print(f"error: {args.input} does not hold an operator", file=sys.stderr)
        return 1
    dmax = args.dmax if args.dmax > 0 else None
    sweep = SweepOptions(seed=args.seed)
    t0 = time.perf_counter()

    def progress(rec):
        logger.info("k=%d estimate=%.12g beta=%.6g", rec.k, rec.estimate, rec.beta)

    ln_z2 = None
    if fspec == "entropy":
        stop = lz.StoppingConfig(
            eps_conv=args.eps, window=args.window,
            spectrum_floor=0.0 if args.spectrum_floor is None else args.spectrum_floor,
            bound_direction="lower",
        )
        mant, logv = mp.inner_product_scaled(m, m)
        ln_z2 = math.log(mant.real) + logv if mant.real > 0 else None
        estimate, run = lz.entropy_from_half_state(
            m, kmax=args.kmax, dmax=dmax, stop=stop, sweep=sweep, progress=progress,
        )
    elif fspec == "trace":
        run = lz.global_lanczos(
            m, kmax=1, dmax=None, f=lz.identity_function(),
            sweep=sweep, progress=progress,
        )
        estimate = run.estimate
    else:
        stop = lz.StoppingConfig(
            eps_conv=args.eps, window=args.window,
            spectrum_floor=args.spectrum_floor,
        )
        run = lz.global_lanczos(
            m, kmax=args.kmax, dmax=dmax, f=fspec,
            stop=stop, sweep=sweep, progress=progress,
        )
        estimate = run.estimate

    payload = {
        "function": args.function,
        "input": args.input,
        "settings": {
            "kmax": args.kmax if fspec != "trace" else 1,
            "dmax": dmax, "eps": args.eps, "window": args.window,
            "spectrum_floor": args.spectrum_floor, "seed": args.seed,
        },
        "estimate": estimate,
        "stop_reason": run.stop_reason,
        "beta1": run.beta1,
        "ln_z2": ln_z2,
        "iterations": len(run.records),
        "alphas": list(run.tridiag.alphas) if run.tridiag else [],
        "betas": list(run.tridiag.betas) if run.tridiag else [],
        "wall_s": time.perf_counter() - t0,
        "records": [_record_dict(r) for r in run.records],
    }
    _write_json(payload, args.out)
    if args.iterations_csv:
        _write_iterations_csv(run.records, args.iterations_csv)
    return 0


def _oracle_entropy(params: models.IsingParams, method: str) -> tuple[float, str]:
    if method == "auto":
        method = "dense" if params.L <= 12 else "free-fermion"
    if method == "dense":
        return ex.exact_entropy_dense(params), "dense"
    return ex.exact_entropy_free_fermion(params), "free-fermion"


def cmd_exact(args) -> int:
    try:
        params = models.IsingParams(L=args.L, J=args.J, g=args.g, h=args.h, beta=args.beta)
        if args.method == "free-fermion" and args.h != 0:
            raise ValueError("free-fermion oracle requires h = 0")
        if args.method == "auto" and args.L > 12 and args.h != 0:
            raise ValueError("L > 12 with h != 0 has no available oracle")
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    value, method = _oracle_entropy(params, args.method)
    _write_json(
        {"entropy": value, "method": method,
         "params": {"L": params.L, "J": params.J, "g": params.g,
                    "h": params.h, "beta": params.beta}},
        None,
    )
    return 0


SWEEP_COLUMNS = (
    "L", "beta", "J", "g", "h", "dbond", "dtau", "dmax", "kmax",
    "estimate", "oracle", "rel_error", "stop_reason", "iterations",
    "wall_s", "error",
)


def _as_list(value, name: str) -> list:
    if isinstance(value, list):
        return value
    if isinstance(value, (int, float)):
        return [value]
    raise ValueError(f"manifest key {name!r} must be a number or list of numbers")


def _run_cell(cell, builds, build_lock, args):
    """One pipeline cell: build (cached), estimate, compare to oracle."""
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(L=cell["L"], beta=cell["beta"], J=cell["J"], g=cell["g"], h=cell["h"],
               dbond=args.dbond, dtau=args.dtau, dmax=cell["dmax"], kmax=cell["kmax"])
    t0 = time.perf_counter()
    try:
        params = models.IsingParams(L=cell["L"], J=cell["J"], g=cell["g"],
                                    h=cell["h"], beta=cell["beta"])
        key = (params.L, params.J, params.g, params.h, params.beta)
        with build_lock:
            if key not in builds:
                builds[key] = models.thermal_half_state(
                    params, dbond=args.dbond, dtau=args.dtau
                )
            m = builds[key]
        dmax = cell["dmax"] if cell["dmax"] > 0 else None
        estimate, run = lz.entropy_from_half_state(m, kmax=cell["kmax"], dmax=dmax)
        oracle, _ = _oracle_entropy(params, "auto")
        row.update(
            estimate=f"{estimate:.17g}", oracle=f"{oracle:.17g}",
            rel_error=f"{abs(estimate - oracle) / max(abs(oracle), 1e-300):.6e}",
            stop_reason=run.stop_reason, iterations=len(run.records),
        )
    except Exception as err:  # per-row isolation: failures become a column
        row["error"] = f"{type(err).__name__}: {err}"
        logger.warning("cell %r failed: %s", cell, row["error"])
    row["wall_s"] = f"{time.perf_counter() - t0:.3f}"
    return row


def cmd_sweep(args) -> int:
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        if not isinstance(manifest, dict):
            raise ValueError("manifest must be a JSON object")
        ls = [int(v) for v in _as_list(manifest.get("L", []), "L")]
        betas = [float(v) for v in _as_list(manifest.get("beta", []), "beta")]
        dmaxes = [int(v) for v in _as_list(manifest.get("dmax", [100]), "dmax")]
        kmaxes = [int(v) for v in _as_list(manifest.get("kmax", [50]), "kmax")]
        jj = float(manifest.get("J", 1.0))
        gg = float(manifest.get("g", 1.0))
        hh = float(manifest.get("h", 0.0))
        cells = [
            {"L": L, "beta": beta, "dmax": dmax, "kmax": kmax, "J": jj, "g": gg, "h": hh}
            for L in ls for beta in betas for dmax in dmaxes for kmax in kmaxes
        ]
        if not cells:
            raise ValueError("manifest produced no cells (need nonempty L and beta)")
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2

    builds: dict = {}
    build_lock = threading.Lock()
    if args.jobs == 1:
        rows = [_run_cell(cell, builds, build_lock, args) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(lambda c: _run_cell(c, builds, build_lock, args), cells))

    # soft monotonicity check: at fixed (L, beta, kmax) the error should
    # not grow with dmax; log, never fail
    by_group: dict = {}
    for cell, row in zip(cells, rows):
        if row["error"]:
            continue
        by_group.setdefault((cell["L"], cell["beta"], cell["kmax"]), []).append(
            (cell["dmax"], float(row["rel_error"]))
        )
    for group, pairs in sorted(by_group.items()):
        pairs.sort()
        for (d1, e1), (d2, e2) in zip(pairs, pairs[1:]):
            if e2 > e1 * 1.5 and e2 > 1e-12:
                logger.warning(
                    "group L=%s beta=%s kmax=%s: error rose from %.3e (dmax=%d) "
                    "to %.3e (dmax=%d)", *group, e1, d1, e2, d2,
                )

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    succeeded = sum(1 for row in rows if not row["error"])
    logger.info("sweep: %d/%d cells succeeded -> %s", succeeded, len(rows), args.out)
    return 0 if succeeded > 0 else 1


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "build-thermal": cmd_build_thermal,
        "estimate": cmd_estimate,
        "exact": cmd_exact,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except MpoTraceError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

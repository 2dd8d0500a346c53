"""Command-line front end.  All output is CSV or plain text on stdout."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import barrier_engine as be
from . import param_select as ps
from .levy_models import (ModelConfig, model_from_config, reference_model_I, reference_model_II,
                          with_martingale_drift)
from .proj_coefficients import CoeffRequest, compute_beta, project_density

_BUILTIN = {"test-I": reference_model_I, "test-II": reference_model_II}
_KIND_ALIASES = {"call": "EuropeanCall", "put": "EuropeanPut", "dko-call": "DoubleKOCall",
                 "dko-put": "DoubleKOPut"}


class CliError(Exception):
    pass


def _positive(text: str) -> float:
    v = float(Fraction(text))
    if not v > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t]


def _float_list(text: str) -> list[float]:
    return [float(Fraction(t)) for t in text.split(",") if t]


def _load_model(args) -> ModelConfig:
    """Model from a JSON config or one of the built-in parameter sets; --r/--q override."""
    if args.model in _BUILTIN:
        r = 0.02 if args.r is None else args.r
        q = 0.0 if args.q is None else args.q
        return ModelConfig(with_martingale_drift(_BUILTIN[args.model](), r, q), r, q)
    cfg = model_from_config(args.model)
    if args.r is None and args.q is None:
        return cfg
    import json
    from pathlib import Path
    raw = json.loads(Path(args.model).read_text())
    raw["r"] = cfg.r if args.r is None else args.r
    raw["q"] = cfg.q if args.q is None else args.q
    return model_from_config(raw)


def _spec(args, mc: ModelConfig, kind: Optional[str] = None) -> be.BarrierSpec:
    kind = kind or _KIND_ALIASES.get(args.kind, args.kind)
    return be.BarrierSpec(kind, args.S0, args.K, args.T, getattr(args, "M", 1),
                          getattr(args, "L", None), getattr(args, "U", None), mc.r, mc.q)


def _numerics(args, method: Optional[str] = None, Ny: Optional[int] = None) -> be.Numerics:
    return be.Numerics(Ny=Ny or args.Ny, L1=args.L1, method=method or args.method, eps=args.eps,
                       aa_factor=args.aa_factor, auto=getattr(args, "auto", False),
                       readout=getattr(args, "readout", "exact"))


def _writer(args):
    return csv.writer(sys.stdout, lineterminator="\n")


# ---------------------------------------------------------------------------
# commands


def cmd_price_european(args) -> int:
    mc = _load_model(args)
    spec = _spec(args, mc)
    if not spec.kind.startswith("European"):
        raise CliError("price-european needs --kind call or put")
    if args.engine == "fourier":
        price = be.price_european_sinh(spec, mc.model, args.eps)
    else:
        price = be.price_european_proj(spec, mc.model, _numerics(args))
    print(f"{price:.8f}")
    print(f"# engine={args.engine} kind={spec.kind}")
    return 0


def cmd_price_barrier(args) -> int:
    mc = _load_model(args)
    spec = _spec(args, mc)
    if spec.kind.startswith("European"):
        raise CliError("use price-european for European contracts")
    res = be.price_barrier_full(spec, mc.model, _numerics(args))
    print(f"{res.price:.8f}")
    d = res.diagnostics
    print(f"# Ny={d['Ny']} Delta={d['Delta']:.10g} method={d['method']} readout={d['readout']}")
    print(f"# martingale_residual={d['residual']:.3e}" + (f" max_terms={d['max_terms']}" if "max_terms" in d else ""))
    for h in d.get("auto", []):
        print("# auto " + " ".join(f"{k}={v}" for k, v in h.items()))
    return 0


def cmd_coeffs(args) -> int:
    mc = _load_model(args)
    x1 = args.x1 if args.x1 is not None else -(args.Nx // 2) * args.Delta
    req = CoeffRequest(mc.model, x1, args.Delta, args.Nx, args.Delta_bar, p=args.p, eps=args.eps)
    co = compute_beta(req, args.method, args.aa_factor)
    w = _writer(args)
    w.writerow(["x", "beta"])
    for x, b in zip(co.x, co.beta):
        w.writerow([f"{x:.10f}", f"{b:.16e}"])
    return 0


def _log_density(model, Db: float, alpha: float, N: int, method: str, x: np.ndarray) -> np.ndarray:
    Delta = 2.0 * alpha / (N - 1)
    co = compute_beta(CoeffRequest(model, -alpha, Delta, N, Db), method)
    # floored so that roundoff-negative tails stay finite in the CSV
    return np.log(np.maximum(project_density(co, x), 1e-300))


def cmd_density(args) -> int:
    mc = _load_model(args)
    x = np.linspace(-args.alpha, args.alpha, args.points)
    cols = [_log_density(mc.model, Db, args.alpha, args.N, args.method, x) for Db in args.Delta_bars]
    w = _writer(args)
    w.writerow(["x"] + [f"logdens_Dbar={Db:.6g}" for Db in args.Delta_bars])
    for i, xv in enumerate(x):
        w.writerow([f"{xv:.8f}"] + [f"{c[i]:.10f}" for c in cols])
    return 0


def cmd_aliasing_demo(args) -> int:
    mc = _load_model(args)
    w = _writer(args)
    w.writerow(["support", "x", "logdens_sinh", "logdens_fft"])
    for half in args.supports:
        x = np.linspace(-half, half, args.points)
        s = _log_density(mc.model, args.Delta_bar, half, args.N, "sinh", x)
        f = _log_density(mc.model, args.Delta_bar, half, args.N, "fft", x)
        for i, xv in enumerate(x):
            w.writerow([f"{half:g}", f"{xv:.8f}", f"{s[i]:.10f}", f"{f[i]:.10f}"])
    return 0


def convergence_rows(spec: be.BarrierSpec, model, numerics: be.Numerics, log2ny: Sequence[int],
                     reference: Optional[float] = None, with_fft: bool = True) -> list[dict]:
    """Prices and errors per grid size; the reference defaults to the finest sinh price."""
    out = []
    for lg in log2ny:
        row = {"log2Ny": lg,
               "price_sinh": be.price_barrier(spec, model, _replace(numerics, Ny=2 ** lg, method="sinh"))}
        if with_fft:
            row["price_fft"] = be.price_barrier(spec, model, _replace(numerics, Ny=2 ** lg, method="fft"))
        out.append(row)
    ref = out[-1]["price_sinh"] if reference is None else reference
    prev = None
    for i, row in enumerate(out):
        row["err_sinh"] = abs(row["price_sinh"] - ref)
        if with_fft:
            row["err_fft"] = abs(row["price_fft"] - ref)
        # the finest row is its own reference when none is given
        last_self = reference is None and i == len(out) - 1
        if prev is not None and row["err_sinh"] > 0 and prev > 0 and not last_self:
            row["rate"] = -math.log2(row["err_sinh"] / prev)
        else:
            row["rate"] = None
        prev = row["err_sinh"]
    return out


def _replace(n: be.Numerics, **kw) -> be.Numerics:
    from dataclasses import replace
    return replace(n, **kw)


def cmd_convergence_table(args) -> int:
    mc = _load_model(args)
    spec = _spec(args, mc)
    rows = convergence_rows(spec, mc.model, _numerics(args), args.log2ny, args.reference)
    w = _writer(args)
    w.writerow(["log2Ny", "price_sinh", "err_sinh", "rate", "price_fft", "err_fft"])
    for r in rows:
        w.writerow([r["log2Ny"], f"{r['price_sinh']:.8f}", f"{r['err_sinh']:.2e}",
                    "" if r["rate"] is None else f"{r['rate']:.2f}",
                    f"{r['price_fft']:.8f}", f"{r['err_fft']:.2e}"])
    return 0


def cmd_auto_params(args) -> int:
    mc = _load_model(args)
    spec = _spec(args, mc)
    ap = ps.auto_params(spec, mc.model, eps1=args.eps1, eps2=args.eps2, tau=args.tau, L1=args.L1)
    w = _writer(args)
    w.writerow(["alpha", "N", "Ny", "Delta", "n0", "residual"])
    w.writerow([f"{ap.alpha:.10g}", ap.N, ap.Ny, f"{ap.Delta:.10g}", ap.n0, f"{ap.residual:.3e}"])
    for h in ap.history:
        print("# " + " ".join(f"{k}={v}" for k, v in h.items()))
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True,
                   help="JSON model config, or a built-in set: " + ", ".join(_BUILTIN))
    p.add_argument("--r", type=float, default=None, help="override the interest rate")
    p.add_argument("--q", type=float, default=None, help="override the dividend yield")
    p.add_argument("--eps", type=_positive, default=1e-13, help="coefficient tolerance")
    p.add_argument("--aa-factor", dest="aa_factor", type=int, default=6)
    p.add_argument("-v", "--verbose", action="store_true")


def _contract(p: argparse.ArgumentParser, barrier: bool) -> None:
    p.add_argument("--kind", required=True)
    p.add_argument("--S0", type=_positive, required=True)
    p.add_argument("--K", type=_positive, required=True)
    p.add_argument("--T", type=_positive, required=True)
    if barrier:
        p.add_argument("--M", type=int, required=True)
        p.add_argument("--L", type=_positive, default=None)
        p.add_argument("--U", type=_positive, default=None)
    p.add_argument("--Ny", type=int, default=2 ** 10)
    p.add_argument("--L1", type=_positive, default=8.0)
    p.add_argument("--method", choices=("sinh", "fft", "fft-aa"), default="sinh")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinhproj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price-european", help="European call or put")
    _common(p)
    _contract(p, barrier=False)
    p.add_argument("--engine", choices=("fourier", "proj"), default="fourier")
    p.set_defaults(func=cmd_price_european)

    p = sub.add_parser("price-barrier", help="discretely monitored barrier option")
    _common(p)
    _contract(p, barrier=True)
    p.add_argument("--auto", action="store_true", help="choose grid parameters automatically")
    p.add_argument("--readout", choices=("exact", "quadratic"), default="exact")
    p.set_defaults(func=cmd_price_barrier)

    p = sub.add_parser("coeffs", help="projection coefficients as CSV")
    _common(p)
    p.add_argument("--Delta-bar", dest="Delta_bar", type=_positive, required=True)
    p.add_argument("--Delta", type=_positive, required=True)
    p.add_argument("--Nx", type=int, required=True)
    p.add_argument("--x1", type=float, default=None)
    p.add_argument("--p", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--method", choices=("sinh", "fft", "fft-aa"), default="sinh")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("density", help="log-density samples for several time steps")
    _common(p)
    p.add_argument("--Delta-bars", dest="Delta_bars", type=_float_list, default=[1 / 12, 0.25, 1.0, 2.0])
    p.add_argument("--alpha", type=_positive, default=4.0)
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--method", choices=("sinh", "fft", "fft-aa"), default="sinh")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("aliasing-demo", help="sinh vs FFT log-densities on two supports")
    _common(p)
    p.add_argument("--Delta-bar", dest="Delta_bar", type=_positive, default=1.0)
    p.add_argument("--supports", type=_float_list, default=[4.0, 7.0])
    p.add_argument("--N", type=int, default=512)
    p.add_argument("--points", type=int, default=161)
    p.set_defaults(func=cmd_aliasing_demo)

    p = sub.add_parser("convergence-table", help="price and error per grid size as CSV")
    _common(p)
    _contract(p, barrier=True)
    p.add_argument("--log2ny", type=_int_list, default=list(range(5, 11)),
                   help="comma list or range lo..hi")
    p.add_argument("--reference", type=float, default=None)
    p.set_defaults(func=cmd_convergence_table)

    p = sub.add_parser("auto-params", help="automatic truncation width and grid size")
    _common(p)
    _contract(p, barrier=True)
    p.add_argument("--eps1", type=_positive, default=5e-8)
    p.add_argument("--eps2", type=_positive, default=1e-5)
    p.add_argument("--tau", type=_positive, default=1.1)
    p.set_defaults(func=cmd_auto_params, L1=10.0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s %(message)s", stream=sys.stderr)
    if hasattr(args, "kind"):
        args.kind = _KIND_ALIASES.get(args.kind, args.kind)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, KeyError, CliError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"sinhproj: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

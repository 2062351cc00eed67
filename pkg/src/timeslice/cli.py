"""Command-line front end: ``timeslice {curve,dos,series,check}``.

Exit codes: 0 success, 1 validation failure (``check``), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import sho, spin_dimer, spin_single
from .core import ModelSpec, ThermoCurve, ThermoSample, as_rational, exppoly_taylor, rational_str
from .fieldint import monte_carlo_u, monte_carlo_z, quadrature_u, quadrature_z

logger = logging.getLogger("timeslice")

CURVE_COLUMNS = ["beta", "T", "L", "Z", "U", "Utilde", "C"]
MC_SIGMAS = 3.0
QUADRATURE_TOL = 1e-6


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.12g}"


def parse_l_list(text: str) -> list[int]:
    """``"1,3,5"``, ``"1..10"`` or mixtures such as ``"1,4..6"``."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                a, b = part.split("..", 1)
                lo, hi = int(a), int(b)
                if hi < lo:
                    raise UsageError(f"empty L range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad L list entry {part!r}") from None
    if not out or any(L < 1 for L in out):
        raise UsageError(f"L entries must be >= 1, got {text!r}")
    return out


def _rational_arg(text: str) -> Fraction:
    try:
        return as_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from None


def _model(args, L: int) -> ModelSpec:
    try:
        return ModelSpec(args.model, L, s=args.s, J=args.j, Jprime=args.jprime)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def beta_grid(args) -> np.ndarray:
    if not args.beta_min > 0:
        raise UsageError("--beta-min must be positive")
    if args.beta_max <= args.beta_min:
        raise UsageError("--beta-max must exceed --beta-min")
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    if args.spacing == "log":
        return np.geomspace(args.beta_min, args.beta_max, args.steps)
    return np.linspace(args.beta_min, args.beta_max, args.steps)


# -- curves ---------------------------------------------------------------------


def _curve_sample(model: ModelSpec, beta: float) -> ThermoSample:
    L = model.L
    if model.kind == "sho":
        return ThermoSample(beta, 1 / beta, sho.sho_z(L, beta), sho.sho_u(L, beta), None,
                            sho.sho_heat_capacity(L, beta))
    if model.kind == "spin":
        z = spin_single.spin_zl_exppoly(model.s, model.J, L)
        return ThermoSample(beta, 1 / beta, z(beta), spin_single.spin_ul(model.s, model.J, L, beta),
                            float(spin_single.spin_utilde(model.s, model.J)),
                            spin_single.spin_heat_capacity(model.s, model.J, L, beta))
    J, Jp = model.J, model.Jprime
    return ThermoSample(beta, 1 / beta, spin_dimer.dimer_zl_exppoly(J, Jp, L)(beta),
                        spin_dimer.dimer_ul(J, Jp, L, beta), spin_dimer.dimer_utilde(J, Jp, L, beta),
                        spin_dimer.dimer_heat_capacity(J, Jp, L, beta))


def _exact_sample(model: ModelSpec, beta: float) -> ThermoSample:
    if model.kind == "sho":
        u = sho.sho_exact_u(beta)
        return ThermoSample(beta, 1 / beta, sho.sho_exact_z(beta), u, u, sho.sho_exact_heat_capacity(beta))
    if model.kind == "spin":
        ex = spin_single.spin_exact(model.s, model.J, beta)
        return ThermoSample(beta, 1 / beta, ex.Z, float(ex.U), float(ex.U), 0.0)
    et, es = (float(x) for x in spin_dimer.dimer_eigenvalues(model.J, model.Jprime))
    u = spin_dimer.dimer_exact_u(model.J, model.Jprime, beta)
    e0 = min(et, es)
    wt, ws = 3 * math.exp(-beta * (et - e0)), math.exp(-beta * (es - e0))
    var = (wt * et**2 + ws * es**2) / (wt + ws) - u**2
    return ThermoSample(beta, 1 / beta, spin_dimer.dimer_exact_z(model.J, model.Jprime, beta), u, u,
                        beta**2 * var)


def build_curves(args) -> tuple[list[ThermoCurve], dict]:
    betas = beta_grid(args)
    curves = []
    limits: dict = {}
    for L in parse_l_list(args.l_list):
        model = _model(args, L)
        curves.append(ThermoCurve(model, L, [_curve_sample(model, float(b)) for b in betas]))
        limits[str(L)] = _limits(model)
    base = _model(args, 1)
    curves.append(ThermoCurve(base, None, [_exact_sample(base, float(b)) for b in betas]))
    limits["exact"] = _exact_limits(base)
    return curves, limits


def _limits(model: ModelSpec) -> dict:
    """Zero- and infinite-temperature values from exact leading terms."""
    if model.kind == "sho":
        return {"U_T0": "0", "C_T0": str(model.L)}
    if model.kind == "spin":
        low, high = spin_single.spin_ul_limits(model.s, model.J, model.L)
        ut = spin_single.spin_utilde(model.s, model.J)
        return {"U_T0": rational_str(low), "U_Tinf": rational_str(high), "Utilde_T0": rational_str(ut)}
    low, high = spin_dimer.dimer_ul_limits(model.J, model.Jprime, model.L)
    ut = spin_dimer.dimer_utilde_limit(model.J, model.Jprime, model.L)
    return {"U_T0": rational_str(low), "U_Tinf": rational_str(high), "Utilde_T0": rational_str(ut)}


def _exact_limits(model: ModelSpec) -> dict:
    if model.kind == "sho":
        return {"U_T0": "1/2", "C_T0": "0"}
    if model.kind == "spin":
        return {"U_T0": rational_str(spin_single.spin_utilde(model.s, model.J))}
    et, es = spin_dimer.dimer_eigenvalues(model.J, model.Jprime)
    return {"U_T0": rational_str(min(et, es))}


def curve_csv(curve: ThermoCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    label = "inf" if curve.L is None else str(curve.L)
    for s in curve.samples:
        w.writerow([fmt(s.beta), fmt(s.T), label, fmt(s.Z), fmt(s.U), fmt(s.Utilde), fmt(s.C)])
    return buf.getvalue()


def _curve_json(curve: ThermoCurve) -> dict:
    return {
        "L": None if curve.L is None else curve.L,
        "columns": CURVE_COLUMNS,
        "rows": [[fmt(s.beta), fmt(s.T), "inf" if curve.L is None else str(curve.L),
                  fmt(s.Z), fmt(s.U), fmt(s.Utilde), fmt(s.C)] for s in curve.samples],
    }


def _model_json(args) -> dict:
    out = {"kind": args.model}
    if args.model != "sho":
        out["J"] = rational_str(args.j)
    if args.model == "spin":
        out["s"] = rational_str(args.s)
    if args.model == "dimer":
        out["Jprime"] = rational_str(args.jprime)
    return out


def cmd_curve(args) -> int:
    curves, limits = build_curves(args)
    if args.format == "json":
        doc = {"model": _model_json(args), "curves": [_curve_json(c) for c in curves], "limits": limits}
        _emit(args.out, json.dumps(doc, indent=2) + "\n")
        return 0
    if args.out in (None, "-"):
        for c in curves:
            sys.stdout.write(curve_csv(c))
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for c in curves:
        name = f"{args.model}_{'exact' if c.L is None else f'L{c.L}'}.csv"
        (out / name).write_text(curve_csv(c))
    (out / f"{args.model}_limits.json").write_text(json.dumps(limits, indent=2) + "\n")
    return 0


# -- density of states ----------------------------------------------------------


def cmd_dos(args) -> int:
    L = args.l
    model = _model(args, L)
    if model.kind == "sho":
        if args.e_max <= args.e_min:
            raise UsageError("--e-max must exceed --e-min")
        if args.steps < 2:
            raise UsageError("--steps must be at least 2")
        grid = np.linspace(args.e_min, args.e_max, args.steps)
        g = sho.sho_dos(L, grid)
        lines = ["E,g"] + [f"{fmt(e)},{fmt(v)}" for e, v in zip(grid, g)]
        _emit(args.out, "\n".join(lines) + "\n")
        return 0
    if model.kind == "spin":
        comb = spin_single.spin_dos(model.s, model.J, L)
    else:
        comb = spin_dimer.dimer_dos(model.J, model.Jprime, L)
    doc = {"model": _model_json(args), "L": L, **comb.to_json()}
    _emit(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


# -- series ---------------------------------------------------------------------


def cmd_series(args) -> int:
    if not 0 <= args.order <= 8:
        raise UsageError("--order must be between 0 and 8")
    rows = []
    for L in parse_l_list(args.l_list):
        model = _model(args, L)
        if model.kind == "spin":
            coeffs = exppoly_taylor(spin_single.spin_zl_exppoly(model.s, model.J, L), args.order)
        elif model.kind == "dimer":
            coeffs = spin_dimer.dimer_series(model.J, model.Jprime, L, args.order)
        else:
            raise UsageError("series is available for the spin models only")
        rows.append({"L": L, "coefficients": [rational_str(c) for c in coeffs]})
    if args.format == "json":
        _emit(args.out, json.dumps({"model": _model_json(args), "order": args.order, "rows": rows},
                                   indent=2) + "\n")
    else:
        header = "L," + ",".join(f"b{k}" for k in range(args.order + 1))
        lines = [header] + [f"{r['L']}," + ",".join(r["coefficients"]) for r in rows]
        _emit(args.out, "\n".join(lines) + "\n")
    return 0


# -- cross-validation -----------------------------------------------------------


def _closed_form(model: ModelSpec, beta: float, quantity: str) -> float:
    if model.kind == "spin":
        if quantity == "z":
            return spin_single.spin_zl_exppoly(model.s, model.J, model.L)(beta)
        return spin_single.spin_ul(model.s, model.J, model.L, beta)
    if quantity == "z":
        return spin_dimer.dimer_zl_exppoly(model.J, model.Jprime, model.L)(beta)
    return spin_dimer.dimer_ul(model.J, model.Jprime, model.L, beta)


def check_report(model: ModelSpec, beta: float, method: str, quantity: str = "z", *,
                 samples: int = 10**6, seed: int = 0, channel: str = "real",
                 nodes: int | None = None, workers: int = 1) -> dict:
    exact = _closed_form(model, beta, quantity)
    if method == "quadrature":
        est = (quadrature_z if quantity == "z" else quadrature_u)(model, beta, nodes)
        err = abs(est.real - exact)
        passed = err <= QUADRATURE_TOL * max(1.0, abs(exact))
        sigma = None
        criterion = f"abs error <= {QUADRATURE_TOL:g} (relative above 1)"
    else:
        fn = monte_carlo_z if quantity == "z" else monte_carlo_u
        est = fn(model, beta, samples, seed, channel=channel, workers=workers)
        err = abs(est.real - exact)
        sigma = est.sigma_distance(exact)
        passed = sigma <= MC_SIGMAS
        criterion = f"within {MC_SIGMAS:g} standard errors"
    report = {
        "model": {"kind": model.kind, "L": model.L, "s": rational_str(model.s),
                  "J": rational_str(model.J), "Jprime": rational_str(model.Jprime)},
        "beta": fmt(beta),
        "quantity": quantity,
        "method": est.method,
        "closed_form": fmt(exact),
        "estimate": fmt(est.real),
        "std_error": fmt(est.std_error),
        "error": fmt(err),
        "sigma_distance": None if sigma is None else fmt(sigma),
        "avg_sign": None if est.avg_sign is None else fmt(est.avg_sign),
        "n_samples": est.n_samples,
        "criterion": criterion,
        "pass": bool(passed),
    }
    if isinstance(est.value, complex):
        report["imag"] = fmt(est.value.imag)
        report["imag_std_error"] = fmt(est.imag_std_error)
    if method == "mc":
        report["seed"] = seed
        report["channel"] = channel
    return report


def cmd_check(args) -> int:
    if args.model == "sho":
        raise UsageError("check drives the auxiliary-field integrals of the spin models")
    if not args.beta > 0:
        raise UsageError("--beta must be positive")
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    model = _model(args, args.l)
    try:
        report = check_report(model, args.beta, args.method, args.quantity, samples=args.samples,
                              seed=args.seed, channel=args.channel, nodes=args.nodes,
                              workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(args.out, json.dumps(report, indent=2) + "\n")
    return 0 if report["pass"] else 1


# -- plumbing -------------------------------------------------------------------


def _emit(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; keys are flag names without dashes."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = (t.strip() for t in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["sho", "spin", "dimer"], default=None)
    p.add_argument("--s", type=_rational_arg, default=Fraction(1, 2), help="spin magnitude (spin model)")
    p.add_argument("--j", type=_rational_arg, default=Fraction(1), help="coupling J")
    p.add_argument("--jprime", type=_rational_arg, default=Fraction(0), help="self-interaction J' (dimer)")
    p.add_argument("--out", default=None, help="output path; '-' or absent for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timeslice", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file; command-line flags take precedence")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", help="thermodynamic curves per L plus the exact curve")
    _model_args(p)
    p.add_argument("--l-list", default="1")
    p.add_argument("--beta-min", type=float, default=0.1)
    p.add_argument("--beta-max", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--spacing", choices=["linear", "log"], default="linear")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("dos", help="exact delta comb (spins) or sampled smooth DOS (oscillator)")
    _model_args(p)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--e-min", type=float, default=0.0)
    p.add_argument("--e-max", type=float, default=3.0)
    p.add_argument("--steps", type=int, default=300)
    p.set_defaults(func=cmd_dos)

    p = sub.add_parser("series", help="exact high-temperature coefficients of Z_L")
    _model_args(p)
    p.add_argument("--l-list", default="1")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("check", help="cross-validate closed forms against the field integral")
    _model_args(p)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--method", choices=["quadrature", "mc"], default="quadrature")
    p.add_argument("--quantity", choices=["z", "u"], default="z")
    p.add_argument("--channel", choices=["real", "mixed"], default="real")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=None, help="Gauss-Hermite nodes per dimension")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            values = read_config(known.config)
            for action in parser._subparsers._group_actions:
                for subparser in action.choices.values():
                    dests = {a.dest for a in subparser._actions}
                    subparser.set_defaults(**{k: v for k, v in values.items() if k in dests})
        args = parser.parse_args(argv)
        if args.model is None:
            raise UsageError("--model is required (flag or config file)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"timeslice: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"timeslice: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

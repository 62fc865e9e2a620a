"""Command-line front end: ``polaron-series <subcommand> [options]``.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .dyson import (ContourSpec, contour_term, expansion_residual, geometric_tail, norm_bound_check,
                    random_instance, simplex_term)
from .errors import ConfigError, PolaronSeriesError
from .fock_oracle import fock_truncation, grid_modes, oracle_series_match, single_mode
from .model import check_assumption1, essential_spectrum, lieb_yamazaki_constants
from .pairings import (Pairing, crossing_table, enumerate_pairings, is_interlacing, pairing_to_dyck)
from .quadform import assemble_quadratic_form, gaussian_integral, momentum_integral
from .series import (concavity_check, energy_curve, heat_curve, monotonicity_check, renewal_residual)
from .simplex import stream


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialisation


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def dump_table(cfg: RunConfig, header, rows, extra=None):
    if cfg.output.format == "json":
        body = dict(columns=list(header), rows=[list(r) for r in rows])
        body.update(extra or {})
        body["provenance"] = provenance(cfg)
        return dump_json(body), "json"
    return dump_csv(header, rows), "csv"


def provenance(cfg: RunConfig) -> dict:
    return dict(seed=cfg.compute.seed, config_hash=cfg.hash(), version=f"polaron_series {__version__}",
                threads=cfg.compute.threads)


def verdict(cfg, check, passed, measured, budget, **details):
    return dict(check=check, passed=bool(passed), measured=measured, budget=budget, details=details,
                provenance=provenance(cfg))


def emit(cfg: RunConfig, artifacts):
    """artifacts: list of (basename, text). The first one goes to stdout in '-' mode."""
    if cfg.output.path == "-":
        sys.stdout.write(artifacts[0][1])
        return
    os.makedirs(cfg.output.path, exist_ok=True)
    for name, text in artifacts:
        with open(os.path.join(cfg.output.path, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# argument helpers


def parse_grid(text, what="grid"):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{what} must look like a:b:n, got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"{what} must look like a:b:n, got {text!r}") from None
    if n < 1 or (n > 1 and not b > a):
        raise UsageError(f"{what} needs n >= 1 and b > a")
    return np.linspace(a, b, n)


def parse_floats(text, what):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None


def parse_pairing(text):
    try:
        pairs = [tuple(int(v) for v in item.split("-")) for item in text.split(",")]
        return Pairing.from_pairs(pairs)
    except ValueError as exc:
        raise UsageError(f"bad pairing {text!r}: {exc}") from None


def _nmax(args, cfg):
    return args.nmax if getattr(args, "nmax", None) is not None else cfg.compute.nmax


# ---------------------------------------------------------------------------
# subcommands


def cmd_enumerate(args, cfg):
    ps = enumerate_pairings(args.n, cap=cfg.compute.pairing_cap)
    if args.interlacing_only:
        ps = [p for p in ps if is_interlacing(p)]
    rows = []
    for i, p in enumerate(ps):
        tab = crossing_table(p)
        sets = "|".join("{" + ",".join(str(x) for x in sorted(s)) + "}" for s in tab.sets)
        rows.append((i, str(p), " ".join(f"{s:+d}" for s in pairing_to_dyck(p).steps),
                     int(is_interlacing(p)), sets, " ".join(map(str, tab.toggles))))
    header = ("index", "pairs", "dyck", "interlacing", "crossing_sets", "toggles")
    fmt = args.format or cfg.output.format
    cfg = RunConfig(cfg.model, cfg.compute, type(cfg.output)(fmt, cfg.output.path))
    text, ext = dump_table(cfg, header, rows)
    emit(cfg, [(f"enumerate_n{args.n}.{ext}", text)])
    return 0


def cmd_model_check(args, cfg):
    m = cfg.require_model()
    rep = check_assumption1(m, args.radius)
    out = dict(assumption1=dict(radius=rep.radius, I1=rep.I1, I2=rep.I2, feasible=rep.feasible,
                                divergent=list(rep.divergent)))
    if rep.feasible:
        fb = lieb_yamazaki_constants(m, args.radius, args.epsilon)
        out["form_bound"] = dict(split_radius=fb.split_radius, epsilon=fb.epsilon, lambda_rel=fb.lambda_rel,
                                 shift=fb.shift, lambda_piece=fb.lambda_piece, I1=fb.I1, J=fb.J)
    out["provenance"] = provenance(cfg)
    out["passed"] = rep.feasible
    emit(cfg, [("model_check.json", dump_json(out))])
    return 0 if rep.feasible else 1


def cmd_quadform_dump(args, cfg):
    p = parse_pairing(args.pairing)
    tab = crossing_table(p)
    times = parse_floats(args.times, "--times")
    if len(times) != 2 * p.n + 1:
        raise UsageError(f"--times needs {2 * p.n + 1} entries for n={p.n}")
    q = assemble_quadratic_form(tab, times)
    out = dict(pairing=str(p), times=times, Q=q.entries, s=q.omega_weights)
    try:
        red = gaussian_integral(q, cfg.model.d if cfg.model else 3)
        out["reduced_gaussian"] = dict(amplitude=red.amplitude, exponent=red.exponent)
    except PolaronSeriesError as exc:
        out["reduced_gaussian"] = dict(error=str(exc))
    if cfg.model is not None:
        mix = momentum_integral(tab, times, cfg.model,
                                (cfg.compute.coupling_order, cfg.compute.dispersion_order))
        out["mixture"] = dict(weights=mix.weights, rates=mix.rates, exact=mix.exact, nodes=len(mix))
    out["provenance"] = provenance(cfg)
    emit(cfg, [("quadform.json", dump_json(out))])
    return 0


def cmd_heat(args, cfg):
    m = cfg.require_model()
    u = parse_grid(args.u_grid, "--u-grid")
    curve = heat_curve(m, u, args.t, _nmax(args, cfg), settings=cfg.compute.settings())
    rows = list(zip(curve.u, curve.F, curve.std_error))
    text, ext = dump_table(cfg, ("u", "F", "stderr"), rows, dict(t=args.t))
    emit(cfg, [(f"heat.{ext}", text)])
    return 0


def cmd_energy(args, cfg):
    m = cfg.require_model()
    u = parse_grid(args.u_grid, "--u-grid")
    tw = parse_grid(args.t_window, "--t-window")
    curve = energy_curve(m, u, (tw[0], tw[-1], tw.size), _nmax(args, cfg), settings=cfg.compute.settings())
    rows = list(zip(curve.u, curve.E0, curve.fit_residual))
    text, ext = dump_table(cfg, ("u", "E0", "fit_residual"), rows)
    checks = []
    if curve.u.size >= 3:
        cc = concavity_check(curve)
        checks.append(verdict(cfg, "concavity", cc.passed, cc.worst_excess, 0.0,
                              worst_index=cc.worst_index, second_differences=cc.second_differences,
                              tolerance=cc.tolerance))
    if m.g != 0:
        gap = curve.E0 - curve.u
        checks.append(verdict(cfg, "E0_below_u", bool(np.all(gap < 0)), float(gap.max()), 0.0))
    if curve.u[0] == 0.0:
        ess = essential_spectrum(curve, m)
        checks.append(verdict(cfg, "essential_spectrum", True, float(ess(0.0)), None,
                              E_ess=[float(ess(math.sqrt(x))) for x in curve.u]))
    report = dict(checks=checks, std_error=curve.std_error, passed=all(c["passed"] for c in checks),
                  provenance=provenance(cfg))
    emit(cfg, [(f"energy.{ext}", text), ("energy_report.json", dump_json(report))])
    return 0 if report["passed"] else 1


def cmd_renewal_check(args, cfg):
    m = cfg.require_model()
    rep = renewal_residual(m, args.u, args.t, args.grid_count, _nmax(args, cfg),
                           settings=cfg.compute.settings())
    out = verdict(cfg, "renewal", rep.passed, rep.residual, rep.budget, full_residual=rep.full_residual,
                  truncation_terms=rep.truncation_terms, mc_error=rep.mc_error,
                  quadrature_error=rep.quadrature_error, richardson_residual=rep.richardson_residual,
                  grid_count=args.grid_count, u=args.u, t=args.t)
    emit(cfg, [("renewal.json", dump_json(out))])
    return 0 if rep.passed else 1


def cmd_monotonicity_check(args, cfg):
    m = cfg.require_model()
    u = parse_grid(args.u_grid, "--u-grid")
    rep = monotonicity_check(m, args.t, u, args.max_order, _nmax(args, cfg), settings=cfg.compute.settings())
    out = verdict(cfg, "complete_monotonicity", rep.passed,
                  min(r["min_signed_difference"] for r in rep.orders), None,
                  orders=rep.orders, mixture_exact=rep.mixture_exact, t=args.t)
    emit(cfg, [("monotonicity.json", dump_json(out))])
    return 0 if rep.passed else 1


def cmd_dyson_check(args, cfg):
    seed = cfg.compute.seed if args.seed is None else args.seed
    spec = ContourSpec(gamma=args.gamma)
    worst_rel, worst_bound, worst_weighted, bound_ok, resid_ok = 0.0, 0.0, 0.0, True, True
    for trial in range(args.trials):
        rng = stream(seed, 1, trial)
        model = random_instance(rng, args.dim, args.cnorm)
        for n in range(1, args.nmax + 1):
            D, err = contour_term(model, n, args.t, spec)
            if n <= 4:
                S = simplex_term(model, n, args.t)
                nrm = np.linalg.norm(S)
                if nrm > 0:
                    worst_rel = max(worst_rel, float(np.linalg.norm(D - S) / nrm))
            nb = norm_bound_check(model, args.t, n, spec)
            bound_ok &= nb.passed
            if nb.rhs > 0:
                worst_bound = max(worst_bound, nb.lhs / nb.rhs)
                worst_weighted = max(worst_weighted, nb.weighted_lhs / nb.weighted_rhs)
        ex = expansion_residual(model, args.t, args.nmax, spec)
        resid_ok &= ex.passed
    rel_ok = worst_rel <= args.tolerance
    passed = rel_ok and bound_ok and resid_ok
    out = verdict(cfg, "dyson", passed, worst_rel, args.tolerance, worst_norm_ratio=worst_bound,
                  worst_weighted_ratio=worst_weighted, norm_bounds_passed=bound_ok,
                  expansion_residual_passed=resid_ok, tail_bound=geometric_tail(args.nmax, args.cnorm),
                  dim=args.dim, cnorm=args.cnorm, t=args.t, nmax=args.nmax, trials=args.trials, seed=seed)
    emit(cfg, [("dyson.json", dump_json(out))])
    return 0 if passed else 1


def cmd_oracle_check(args, cfg):
    nmax = _nmax(args, cfg)
    if args.modes == "single":
        def modes_for(g):
            return single_mode(args.kappa, args.omega, g, d=1)
    else:
        m = cfg.require_model()

        def modes_for(g):
            return grid_modes(m.with_coupling(g), args.grid_k, args.grid_h)
    ts = parse_floats(args.t, "--t")
    us = parse_floats(args.u, "--u")
    settings = cfg.compute.settings()
    rows, slopes, passed = [], [], True
    for t in ts:
        for u in us:
            modes = modes_for(args.g)
            trunc = fock_truncation(modes.count, args.fock_nmax, cap=cfg.compute.basis_cap)
            r = oracle_series_match(modes, trunc, u, t, nmax, settings)
            half = oracle_series_match(modes_for(args.g / 2), trunc, u, t, nmax, settings)
            slope = None
            if r.difference > 1e-13 and half.difference > 1e-13:
                slope = math.log(r.difference / half.difference) / math.log(2.0)
                slopes.append(slope)
            passed &= r.passed
            rows.append(dict(t=t, u=u, series=r.series, oracle=r.oracle, difference=r.difference,
                             budget=r.budget, truncation_estimate=r.truncation_estimate,
                             fock_estimate=r.fock_estimate, passed=r.passed, slope=slope))
    target = 2 * (nmax + 1)
    slope_ok = all(abs(s - target) <= 1.0 for s in slopes)
    out = verdict(cfg, "fock_oracle", passed and slope_ok, max(x["difference"] for x in rows), None,
                  matches=rows, slope_target=target, slope_ok=slope_ok, modes=args.modes, g=args.g,
                  fock_nmax=args.fock_nmax, nmax=nmax)
    emit(cfg, [("oracle.json", dump_json(out))])
    return 0 if out["passed"] else 1


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="polaron-series", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI config file with [model], [compute], [output] sections")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.add_argument("--out", help="output directory ('-' for stdout); overrides output.path")
    p.add_argument("--version", action="version", version=f"polaron_series {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("enumerate", help="list Wick pairings with Dyck paths and crossing sets")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--interlacing-only", action="store_true")
    s.add_argument("--format", choices=("csv", "json"))
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("model-check", help="integrability report and form-bound constants")
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.set_defaults(func=cmd_model_check)

    s = sub.add_parser("quadform-dump", help="quadratic form and momentum mixture of one diagram")
    s.add_argument("--pairing", required=True, help="e.g. 1-3,2-4")
    s.add_argument("--times", required=True, help="t_0,...,t_2n")
    s.set_defaults(func=cmd_quadform_dump)

    s = sub.add_parser("heat", help="F_t(u) on a u-grid")
    s.add_argument("--u-grid", required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--nmax", type=int)
    s.set_defaults(func=cmd_heat)

    s = sub.add_parser("energy", help="E0(u) from the long-time slope, with concavity verdict")
    s.add_argument("--u-grid", required=True)
    s.add_argument("--t-window", default="2:6:5")
    s.add_argument("--nmax", type=int)
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("renewal-check", help="renewal equation residual against its error budget")
    s.add_argument("--u", type=float, default=0.5)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--grid-count", type=int, default=64)
    s.add_argument("--nmax", type=int)
    s.set_defaults(func=cmd_renewal_check)

    s = sub.add_parser("monotonicity-check", help="alternating forward differences of F in u")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--u-grid", default="0:2:9")
    s.add_argument("--max-order", type=int, default=4)
    s.add_argument("--nmax", type=int)
    s.set_defaults(func=cmd_monotonicity_check)

    s = sub.add_parser("dyson-check", help="finite-dimensional Dyson expansion checks")
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--cnorm", type=float, default=0.5)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--nmax", type=int, default=6)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--gamma", type=float, default=0.2)
    s.add_argument("--tolerance", type=float, default=1e-6)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_dyson_check)

    s = sub.add_parser("oracle-check", help="series against truncated-Fock diagonalisation")
    s.add_argument("--modes", choices=("single", "grid"), default="single")
    s.add_argument("--nmax", type=int)
    s.add_argument("--g", type=float, default=0.3)
    s.add_argument("--t", default="0.5,1,2")
    s.add_argument("--u", default="0,0.25,1")
    s.add_argument("--fock-nmax", type=int, default=6)
    s.add_argument("--kappa", type=float, default=1.0)
    s.add_argument("--omega", type=float, default=1.0)
    s.add_argument("--grid-k", type=int, default=2)
    s.add_argument("--grid-h", type=float, default=0.5)
    s.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = list(args.set)
        if args.out is not None:
            overrides.append(f"output.path={args.out}")
        cfg = load_config(args.config, overrides=overrides)
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        key = getattr(exc, "key", None)
        print(f"error: {exc}" + (f" [key: {key}]" if key else ""), file=sys.stderr)
        return 2
    except PolaronSeriesError as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

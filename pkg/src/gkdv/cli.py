"""Command-line front end.

Subcommands: ``soliton``, ``scale``, ``collide``, ``analyze``, ``converge``.
Every command writes into an output directory that receives exactly one
``manifest.json``. Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import analyze_run, refinement_compare
from .eigen import (
    DiscreteEigenProblem,
    SolverConfig,
    newton_solve,
    scale_profile,
)
from .errors import (
    BlowupError,
    ConvergenceError,
    EigenvalueSignError,
    GKdVError,
    InapplicableModelError,
    MismatchedRunError,
    OverlapError,
    StepError,
)
from .evolve import EvolveConfig, default_dt, embed, make_field, run
from .io import load_profile, read_run, save_profile, write_json, write_run
from .model import ModelSpec

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

PRESETS = {
    "k22": dict(alpha=1, m=2, beta=0, gamma=1, n=2),
    "k33": dict(alpha=1, m=3, beta=0, gamma=1, n=3),
    "kdv": dict(alpha=1, m=2, beta=1, gamma=0, n=1),
    "kdv-k22": dict(alpha=2, m=2, beta=1, gamma=1, n=2),
    "mkdv-k33": dict(alpha=2, m=3, beta=1, gamma=1, n=3),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=sorted(PRESETS), help="named preset")
    g.add_argument("--alpha", type=float)
    g.add_argument("--m", type=int)
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--n", type=int)


def _common(p):
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.add_argument("--force", action="store_true", help="allow a non-empty output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gkdv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("soliton", help="solve the travelling-wave eigenproblem")
    _add_model_flags(p)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.25)
    p.add_argument("--b", type=float)
    p.add_argument("--mode", choices=["dirichlet", "robin"])
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--filter", choices=["auto", "always", "on_increase", "never"], default="auto")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("scale", help="rescale a pure K(m,n) profile to a new amplitude")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--amplitude", type=float, required=True)
    p.add_argument("--out", required=True)
    _common(p)

    for name, helptext in (
        ("collide", "embed profiles and evolve them"),
        ("converge", "run collide at h and h/2 and compare"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_model_flags(p)
        p.add_argument("--profile", action="append", default=[], metavar="FILE@CENTER[@SIGN]")
        p.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"), default=None)
        p.add_argument("--h", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--t-end", type=float, default=0.0)
        p.add_argument("--snap", type=float, default=1.0, help="time between snapshots")
        p.add_argument("--newton-tol", type=float, default=1e-12)
        p.add_argument("--out", required=True)
        _common(p)

    p = sub.add_parser("analyze", help="tracks, speeds and ripple of a run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    p.add_argument("--compare", help="finer run of the same experiment")
    _common(p)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        known = vars(args)
        defaults = {}
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest in ("in",):
                dest = "input"
            if dest not in known:
                raise UsageError(f"unknown config key {key!r}")
            defaults[dest] = val
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _model_from_args(args, fallback: ModelSpec | None = None) -> ModelSpec | None:
    base = dict(PRESETS[args.model]) if args.model else {}
    for k in ("alpha", "m", "beta", "gamma", "n"):
        v = getattr(args, k)
        if v is not None:
            base[k] = v
    if not base:
        return fallback
    missing = [k for k in ("alpha", "m", "beta", "gamma", "n") if k not in base]
    if missing:
        raise UsageError(f"missing model flags: {', '.join('--' + k for k in missing)}")
    return ModelSpec(**base)


def _prepare_out(path, force) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise UsageError(f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise UsageError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, inputs, outputs, started):
    params = {k: v for k, v in vars(args).items() if k not in ("force",)}
    manifest = {
        "command": args.command,
        "parameters": params,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "started": started[1],
        "wall_clock_seconds": time.perf_counter() - started[0],
    }
    write_json(manifest, out / "manifest.json")


def _parse_profile_arg(spec: str):
    parts = spec.split("@")
    if len(parts) not in (2, 3):
        raise UsageError(f"--profile expects FILE@CENTER[@SIGN], got {spec!r}")
    try:
        center = float(parts[1])
        sign = int(parts[2]) if len(parts) == 3 else 1
    except ValueError:
        raise UsageError(f"bad center/sign in {spec!r}") from None
    if sign not in (1, -1):
        raise UsageError(f"sign must be 1 or -1 in {spec!r}")
    path = Path(parts[0])
    if path.is_dir():
        path = path / "profile.csv"
    if not path.exists():
        raise UsageError(f"profile file {path} not found")
    return path, center, sign


def cmd_soliton(args, started):
    model = _model_from_args(args)
    if model is None:
        raise UsageError("model flags are required")
    problem = DiscreteEigenProblem.from_spacing(model, args.amplitude, args.h, b=args.b, mode=args.mode)
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter, filter_policy=args.filter)
    out = _prepare_out(args.out, args.force)
    profile = newton_solve(problem, cfg)
    csv = save_profile(profile, out / "profile.csv")
    print(f"lambda = {profile.lam:.12g}")
    print(f"residual = {profile.residual_norm:.3e} after {profile.iterations} iterations")
    _write_manifest(out, args, [], [csv, csv.with_suffix(".json")], started)


def cmd_scale(args, started):
    profile = load_profile(args.input)
    scaled = scale_profile(profile, args.amplitude)
    out = _prepare_out(args.out, args.force)
    csv = save_profile(scaled, out / "profile.csv")
    print(f"lambda = {scaled.lam:.12g}")
    _write_manifest(out, args, [args.input], [csv, csv.with_suffix(".json")], started)


def _load_embedding(args):
    if not args.profile:
        raise UsageError("nothing to evolve: give at least one --profile")
    items = []
    for spec in args.profile:
        path, center, sign = _parse_profile_arg(spec)
        items.append((path, load_profile(path), center, sign))
    model = _model_from_args(args, fallback=items[0][1].model)
    for path, prof, _, _ in items:
        if prof.model != model:
            raise UsageError(f"{path} was solved for {prof.model}, not {model}")
    return model, items


def _collide_once(model, items, domain, h, dt, t_end, snap, newton_tol, outdir):
    grid = make_field(domain[0], domain[1], h)
    emb = [(prof, c, s) for _, prof, c, s in items]
    field0 = embed(emb, grid)
    stride = max(1, int(round(snap / dt)))
    cfg = EvolveConfig(dt=dt, t_end=t_end, snapshot_stride=stride, newton_tol=newton_tol)
    result = run(field0, model, cfg, embedded=emb)
    write_run(result, outdir)
    return result


def _grid_args(args, items):
    domain = args.domain or [-80.0, 80.0]
    if not domain[1] > domain[0]:
        raise UsageError("--domain needs A < B")
    h = args.h or min(prof.h for _, prof, _, _ in items)
    dt = args.dt or default_dt(h, [prof.lam for _, prof, _, _ in items])
    return domain, h, dt


def cmd_collide(args, started):
    model, items = _load_embedding(args)
    domain, h, dt = _grid_args(args, items)
    out = _prepare_out(args.out, args.force)
    result = _collide_once(model, items, domain, h, dt, args.t_end, args.snap, args.newton_tol, out)
    print(f"{result.steps} steps, {len(result.snapshots)} snapshots, mass drift {result.mass_drift():.2e}")
    _write_manifest(out, args, [p for p, _, _, _ in items], [out / "run.json"], started)


def _resolve_at(prof, h):
    """Re-solve a profile's eigenproblem on a finer grid."""
    b = math.ceil(prof.b / h - 1e-9) * h
    problem = DiscreteEigenProblem.from_spacing(prof.model, prof.amplitude, h, b=b, mode=prof.mode)
    return newton_solve(problem, SolverConfig())


def cmd_converge(args, started):
    model, items = _load_embedding(args)
    domain, h, dt = _grid_args(args, items)
    out = _prepare_out(args.out, args.force)
    coarse = _collide_once(
        model, items, domain, h, dt, args.t_end, args.snap, args.newton_tol, out / "coarse"
    )
    fine_items = [(p, _resolve_at(prof, h / 2), c, s) for p, prof, c, s in items]
    fine = _collide_once(
        model, fine_items, domain, h / 2, dt / 2, args.t_end, args.snap, args.newton_tol, out / "fine"
    )
    report = {
        "coarse": analyze_run(coarse),
        "fine": analyze_run(fine),
        "refinement_ratio": refinement_compare(coarse, fine, "ripple_amplitude"),
    }
    write_json(report, out / "report.json")
    print(f"ripple ratio (fine/coarse) = {report['refinement_ratio']:.4g}")
    _write_manifest(out, args, [p for p, _, _, _ in items], [out / "coarse", out / "fine", out / "report.json"], started)


PLOT_TEMPLATE = """# gnuplot script: snapshot waterfall and ripple zoom
set datafile separator ','
set datafile commentschars '#'
set key off
set multiplot layout 2,1
set title 'waterfall (offset {offset} per snapshot)'
plot for [k=0:{last}] sprintf('{run}/snap_%d.csv', k) every ::1 using 1:($2 + {offset}*k) with lines lc rgb 'black'
set title 'ripple zoom'
set yrange [-{zoom}:{zoom}]
plot sprintf('{run}/snap_%d.csv', {last}) every ::1 using 1:2 with lines
unset multiplot
"""


def cmd_analyze(args, started):
    try:
        result = read_run(args.run)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = analyze_run(result)
    inputs = [args.run]
    if args.compare:
        try:
            fine = read_run(args.compare)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        report["compare"] = {
            "run": str(args.compare),
            "ripple_ratio": refinement_compare(result, fine, "ripple_amplitude"),
            "trailing_oscillation_ratio": refinement_compare(result, fine, "trailing_oscillation_amplitude"),
        }
        inputs.append(args.compare)
    out = _prepare_out(args.out, args.force)
    outputs = [write_json(report, out / "report.json")]
    if args.plot:
        amp = report["reference_amplitude"]
        script = PLOT_TEMPLATE.format(
            run=Path(args.run).resolve().as_posix(),
            last=len(result.snapshots) - 1,
            offset=0.5 * amp,
            zoom=0.1 * amp,
        )
        plot = out / "plot.gp"
        plot.write_text(script)
        outputs.append(plot)
    rel = report["relative_ripple"]
    print(f"snapshots = {report['n_snapshots']}")
    print("relative ripple = " + ("n/a" if rel is None else f"{rel:.4g}"))
    if args.compare:
        print(f"ripple ratio (compare/run) = {report['compare']['ripple_ratio']:.4g}")
    _write_manifest(out, args, inputs, outputs, started)


COMMANDS = {
    "soliton": cmd_soliton,
    "scale": cmd_scale,
    "collide": cmd_collide,
    "converge": cmd_converge,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    started = (time.perf_counter(), datetime.now(timezone.utc).isoformat(timespec="seconds"))
    try:
        args = _apply_config(parser, argv)
        COMMANDS[args.command](args, started)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConvergenceError, BlowupError, EigenvalueSignError) as exc:
        detail = ""
        if isinstance(exc, ConvergenceError):
            detail = f" (iterations={exc.iterations}, last residual={exc.residual:.3e})"
        print(f"error: Newton failure: {exc}{detail}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StepError as exc:
        print(f"error: time stepping failed at t={exc.t:.6g}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, InapplicableModelError, OverlapError, MismatchedRunError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GKdVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""On-disk formats: profile CSV + JSON sidecar, run directories, reports.

All floating-point data is written with 17 significant digits so that a
write/read cycle reproduces the in-memory values exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .eigen import BoundaryMode, SolitonProfile
from .evolve import EvolveConfig, PeriodicField, RunResult
from .model import ModelSpec

PROFILE_HEADER = "# gkdv-profile v1"
FMT = "%.17g"


def _write_csv(path: Path, header_lines, columns, names):
    data = np.column_stack(columns)
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, data, fmt=FMT, delimiter=",")


def _read_csv(path: Path):
    comments = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        comments.append(lines[k])
        k += 1
    if k >= len(lines):
        raise ValueError(f"{path}: missing column header")
    names = lines[k].split(",")
    rows = [list(map(float, ln.split(","))) for ln in lines[k + 1 :] if ln.strip()]
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    return comments, names, data


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_profile(profile: SolitonProfile, csv_path) -> Path:
    """Write ``xi,f`` columns plus the JSON sidecar next to ``csv_path``."""
    csv_path = Path(csv_path)
    _write_csv(csv_path, [PROFILE_HEADER], [profile.xi, profile.values], ["xi", "f"])
    meta = {
        "format": "gkdv-profile v1",
        "model": profile.model.to_dict(),
        "amplitude": profile.amplitude,
        "lambda": profile.lam,
        "h": profile.h,
        "b": profile.b,
        "mode": BoundaryMode(profile.mode).value,
        "residual_norm": profile.residual_norm,
        "iterations": profile.iterations,
    }
    with open(sidecar_path(csv_path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return csv_path


def load_profile(csv_path) -> SolitonProfile:
    csv_path = Path(csv_path)
    comments, names, data = _read_csv(csv_path)
    if not comments or comments[0].strip() != PROFILE_HEADER:
        raise ValueError(f"{csv_path}: not a gkdv profile (missing '{PROFILE_HEADER}')")
    if names != ["xi", "f"]:
        raise ValueError(f"{csv_path}: expected columns xi,f")
    with open(sidecar_path(csv_path)) as fh:
        meta = json.load(fh)
    return SolitonProfile(
        model=ModelSpec.from_dict(meta["model"]),
        xi=data[:, 0].copy(),
        values=data[:, 1].copy(),
        lam=float(meta["lambda"]),
        amplitude=float(meta["amplitude"]),
        mode=BoundaryMode(meta["mode"]),
        residual_norm=float(meta.get("residual_norm", float("nan"))),
        iterations=int(meta.get("iterations", 0)),
    )


def write_run(run: RunResult, directory) -> Path:
    """Write ``run.json``, ``snap_<k>.csv``, ``diagnostics.csv`` and the
    embedded profiles (``profile_<k>.csv`` + sidecar) into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    first = run.snapshots[0]
    profiles = []
    for k, (prof, center, sign) in enumerate(run.embedded):
        name = f"profile_{k}.csv"
        save_profile(prof, d / name)
        profiles.append(
            {"file": name, "center": center, "sign": int(sign), "amplitude": prof.amplitude, "lambda": prof.lam}
        )
    cfg = run.config
    meta = {
        "version": __version__,
        "model": run.model.to_dict(),
        "grid": {"x_left": first.x_left, "x_right": first.x_right, "M": first.M, "h": first.h},
        "config": {
            "dt": cfg.dt,
            "t_end": cfg.t_end,
            "snapshot_stride": cfg.snapshot_stride,
            "newton_tol": cfg.newton_tol,
            "newton_max": cfg.newton_max,
            "linearized": cfg.linearized,
        },
        "steps": run.steps,
        "profiles": profiles,
        "snapshots": [f"snap_{k}.csv" for k in range(len(run.snapshots))],
    }
    with open(d / "run.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    for k, snap in enumerate(run.snapshots):
        _write_csv(d / f"snap_{k}.csv", [f"# t={snap.t!r}"], [snap.x, snap.u], ["x", "u"])
    _write_csv(
        d / "diagnostics.csv",
        [],
        [np.asarray(run.times), np.asarray(run.mass), np.asarray(run.momentum)],
        ["t", "mass", "momentum"],
    )
    return d


def read_run(directory) -> RunResult:
    d = Path(directory)
    try:
        with open(d / "run.json") as fh:
            meta = json.load(fh)
        model = ModelSpec.from_dict(meta["model"])
        grid = meta["grid"]
        cfg = EvolveConfig(**meta["config"])
        out = RunResult(model=model, config=cfg, steps=int(meta.get("steps", 0)))
        for p in meta.get("profiles", []):
            out.embedded.append((load_profile(d / p["file"]), float(p["center"]), int(p["sign"])))
        for name in meta["snapshots"]:
            comments, names, data = _read_csv(d / name)
            if names != ["x", "u"] or not comments or not comments[0].startswith("# t="):
                raise ValueError(f"{name}: malformed snapshot")
            t = float(comments[0][4:])
            out.snapshots.append(PeriodicField(grid["x_left"], grid["x_right"], data[:, 1].copy(), t))
        _, names, diag = _read_csv(d / "diagnostics.csv")
        if names != ["t", "mass", "momentum"]:
            raise ValueError("diagnostics.csv: unexpected columns")
        out.times = diag[:, 0].tolist()
        out.mass = diag[:, 1].tolist()
        out.momentum = diag[:, 2].tolist()
    except (OSError, KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed run directory {d}: {exc}") from exc
    if len(out.times) != len(out.snapshots):
        raise ValueError(f"malformed run directory {d}: diagnostics/snapshot count mismatch")
    return out


def write_json(obj, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")

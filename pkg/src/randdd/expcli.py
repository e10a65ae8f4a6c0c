"""Command-line front end and experiment harness.

Subcommands: validate | run | threshold | sweep | curves | oracle-check.
Every experiment writes schema-stable CSV files (12 significant digits,
LF newlines, locale independent), a JSON run manifest with per-file
checksums, and a generic plotting script. Re-running with the same
configuration reproduces the CSV files byte for byte; --threads changes
wall time only, never values.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 numerical error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, errors
from .errors import NumericalError, ValidationError
from .fidelity import (
    EnsembleFactors,
    bootstrap_threshold_ci,
    ensemble_functionals,
    fidelity_avg,
    fidelity_pure,
    mean_crossing_time,
    threshold_time,
)
from .model import (
    InitialState,
    PulseParams,
    SimConfig,
    SystemParams,
    ValidatedBundle,
    validate,
)
from .oracle import run_oracle_check
from .pulsegen import RandomStream, empty_schedule, generate_random, generate_regular, load_schedule, save_schedule
from .riccati import integrate_with

EXPERIMENT_NAMES = (
    "baseline-nocontrol",
    "sweep-phi",
    "sweep-tau",
    "sweep-delta",
    "curves-delta",
    "curves-deltatau",
    "curves-mu",
    "oracle-check",
    # ad-hoc single runs, beyond the fixed experiment set
    "run-curve",
    "threshold-control",
)

CONFIG_KEYS = {
    "system.omega": float,
    "system.Gamma": float,
    "system.gamma": float,
    "pulses.tau": float,
    "pulses.delta": float,
    "pulses.phi": float,
    "pulses.d_tau": float,
    "pulses.d_delta": float,
    "pulses.d_phi": float,
    "sim.t_max": float,
    "sim.step": float,
    "sim.grid_dt": float,
    "sim.ensemble_n": int,
    "sim.master_seed": int,
    "sim.threshold": float,
    "sim.integrator": str,
}

N_BOOT = 200


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    overrides: dict = field(default_factory=dict)
    output_dir: Path = Path("results")
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise ValidationError(errors.UNKNOWN_KEY, f"unknown experiment {self.name!r}")
        for key in self.overrides:
            if key not in CONFIG_KEYS:
                raise ValidationError(errors.UNKNOWN_KEY, key)


def fmt(x) -> str:
    """Fixed 12-significant-digit decimal rendering for CSV cells."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.12g}"


def parse_config_file(path) -> dict:
    """Flat key = value file; '#' starts a comment."""
    out = {}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(errors.BAD_VALUE, f"{path}:{ln}: expected key = value")
            out[key.strip()] = value.strip()
    return out


def resolve_overrides(raw: dict) -> dict:
    """Type-check raw string overrides against the documented key list."""
    out = {}
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ValidationError(errors.UNKNOWN_KEY, key)
        caster = CONFIG_KEYS[key]
        try:
            out[key] = caster(value) if not isinstance(value, caster) else value
        except (TypeError, ValueError) as exc:
            raise ValidationError(errors.BAD_VALUE, f"{key} = {value!r}") from exc
    return out


def build_bundle(overrides: dict, *, allow_overlap: bool = False) -> ValidatedBundle:
    """Defaults (omega = Gamma = 1, area 0.2, quasi-period 0.02, width 0.008)
    plus overrides, validated."""
    ov = resolve_overrides(overrides)

    def group(prefix, cls, **defaults):
        vals = dict(defaults)
        for key, value in ov.items():
            g, _, f = key.partition(".")
            if g == prefix:
                vals[f] = value
        return cls(**vals)

    system = group("system", SystemParams, omega=1.0, Gamma=1.0, gamma=0.2)
    pulses = group("pulses", PulseParams, tau=0.02, delta=0.008, phi=0.2)
    sim = group("sim", SimConfig)
    return validate(system, pulses, sim, allow_overlap=allow_overlap)


# ---------------------------------------------------------------------------
# output helpers

def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(fmt(cell) if not isinstance(cell, str) else cell for cell in row) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, spec: ExperimentSpec, bundle_snapshot: dict,
                    files: list[Path], wall: float) -> Path:
    manifest = {
        "experiment": spec.name,
        "version": __version__,
        "master_seed": bundle_snapshot.get("sim.master_seed"),
        "params": {k: bundle_snapshot[k] for k in sorted(bundle_snapshot)},
        "settings": {k: spec.options[k] for k in sorted(spec.options)},
        "files": {p.name: _sha256(p) for p in sorted(files)},
        "wall_clock_s": wall,
    }
    path = out_dir / "manifest.json"
    with open(path, "w", newline="\n") as f:
        json.dump(manifest, f, indent=1, sort_keys=True, default=str)
        f.write("\n")
    return path


def _snapshot(bundle: ValidatedBundle) -> dict:
    snap = {}
    for prefix, obj in (("system", bundle.system), ("pulses", bundle.pulses), ("sim", bundle.sim)):
        for f_name in obj.__dataclass_fields__:
            snap[f"{prefix}.{f_name}"] = getattr(obj, f_name)
    return snap


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Generic plotter for the CSV files in this directory (needs matplotlib).\"\"\"
import csv, glob, os, sys

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib not installed; CSV files are plot-ready as-is")

here = os.path.dirname(os.path.abspath(__file__))
curve_files = [p for p in glob.glob(os.path.join(here, "*.csv"))
               if open(p).readline().startswith("t,")]
sweep_files = [p for p in glob.glob(os.path.join(here, "*.csv"))
               if open(p).readline().startswith("label,")]

if curve_files:
    fig, ax = plt.subplots()
    for p in sorted(curve_files):
        rows = list(csv.DictReader(open(p)))
        ax.plot([float(r["t"]) for r in rows], [float(r["fidelity"]) for r in rows],
                label=os.path.basename(p)[:-4], lw=0.8)
    ax.set_xlabel("t (omega t)"); ax.set_ylabel("fidelity"); ax.legend(fontsize=6)
    fig.savefig(os.path.join(here, "curves.png"), dpi=160)
    print("wrote curves.png")

if sweep_files:
    fig, ax = plt.subplots()
    for p in sorted(sweep_files):
        rows = list(csv.DictReader(open(p)))
        gammas = sorted({r["gamma"] for r in rows})
        for g in gammas:
            sel = [r for r in rows if r["gamma"] == g]
            ax.plot([float(r["d_over_x"]) for r in sel], [float(r["T"]) for r in sel],
                    marker="o", ms=2, label=f"{os.path.basename(p)[:-4]} gamma={g}")
    ax.set_xlabel("D_X / X"); ax.set_ylabel("T(threshold)"); ax.legend(fontsize=6)
    fig.savefig(os.path.join(here, "sweeps.png"), dpi=160)
    print("wrote sweeps.png")
"""


def _write_plot_script(out_dir: Path) -> Path:
    path = out_dir / "plot.py"
    with open(path, "w", newline="\n") as f:
        f.write(_PLOT_SCRIPT)
    return path


# ---------------------------------------------------------------------------
# experiment implementations

SWEEP_GRIDS = {
    "sweep-phi": ("d_phi", "phi", np.round(np.arange(0.0, 1.0 + 1e-9, 0.1), 10)),
    "sweep-tau": ("d_tau", "tau", np.round(np.arange(0.0, 0.55 + 1e-9, 0.05), 10)),
    "sweep-delta": ("d_delta", "delta", np.round(np.arange(0.0, 0.9 + 1e-9, 0.1), 10)),
}
SWEEP_GAMMAS = (0.2, 0.5, 0.9)


def _sweep_tmax(gamma: float) -> float:
    # covers the regular-control survival time (about 10/gamma) with headroom
    return round(18.0 / gamma, 6)


def _ensemble(bundle: ValidatedBundle, executor) -> EnsembleFactors:
    return ensemble_functionals(bundle.system, bundle.pulses, bundle.sim, executor=executor)


def _run_sweep(spec: ExperimentSpec, out_dir: Path, executor) -> tuple[list[Path], dict]:
    d_field, mean_field, default_grid = SWEEP_GRIDS[spec.name]
    gammas = spec.options.get("gammas") or list(SWEEP_GAMMAS)
    ratios = spec.options.get("grid")
    ratios = default_grid if ratios is None else np.asarray(ratios, dtype=float)
    rows = []
    base = build_bundle(spec.overrides)
    for gi, gamma in enumerate(gammas):
        ov = dict(spec.overrides)
        ov["system.gamma"] = gamma
        if "sim.t_max" not in ov:
            ov["sim.t_max"] = _sweep_tmax(gamma)
        if "sim.grid_dt" not in ov:
            ov["sim.grid_dt"] = 0.02
        for ri, ratio in enumerate(ratios):
            ov_point = dict(ov)
            mean_val = getattr(base.pulses, mean_field)
            ov_point[f"pulses.{d_field}"] = float(ratio) * abs(mean_val)
            bundle = build_bundle(ov_point)
            factors = _ensemble(bundle, executor)
            curve = factors.mean_curve()
            res = threshold_time(curve, bundle.sim.threshold)
            if bundle.pulses.d_tau or bundle.pulses.d_delta or bundle.pulses.d_phi:
                stream = RandomStream.for_bootstrap(bundle.sim.master_seed, gi * 10_000 + ri)
                lo, hi = bootstrap_threshold_ci(factors, bundle.sim.threshold, stream, N_BOOT)
            else:
                lo = hi = res.time
            rows.append((spec.name, gamma, float(ratio), res.time, res.crossed, lo, hi))
    path = out_dir / f"{spec.name.replace('-', '_')}.csv"
    _write_csv(path, "label,gamma,d_over_x,T,crossed,ci_low,ci_high", rows)
    return [path], {"gammas": list(gammas), "grid": [float(r) for r in ratios]}


def _threshold_rows(spec: ExperimentSpec, out_dir: Path, executor, control: str) -> tuple[list[Path], dict]:
    gammas = spec.options.get("gammas") or list(SWEEP_GAMMAS)
    label = "nocontrol" if control == "none" else control
    rows = []
    for gi, gamma in enumerate(gammas):
        ov = dict(spec.overrides)
        ov["system.gamma"] = gamma
        if "sim.t_max" not in ov:
            ov["sim.t_max"] = 3.0 if control == "none" else _sweep_tmax(gamma)
        if "sim.grid_dt" not in ov and control == "none":
            ov["sim.grid_dt"] = 0.002
        bundle = build_bundle(ov)
        if control == "none":
            traj = integrate_with(empty_schedule(bundle.sim.t_max), bundle.system, bundle.sim)
            curve = fidelity_avg(traj)
            res = threshold_time(curve, bundle.sim.threshold)
            rows.append((label, gamma, 0.0, res.time, res.crossed, None, None))
        elif control == "regular":
            schedule = generate_regular(bundle.pulses, bundle.sim.t_max)
            traj = integrate_with(schedule, bundle.system, bundle.sim)
            res = threshold_time(fidelity_avg(traj), bundle.sim.threshold)
            rows.append((label, gamma, 0.0, res.time, res.crossed, None, None))
        else:  # random ensemble with the configured deviations
            factors = _ensemble(bundle, executor)
            if spec.options.get("t_mode") == "mean-crossings":
                t_val = mean_crossing_time(factors, bundle.sim.threshold)
                crossed = t_val < bundle.sim.t_max
            else:
                res = threshold_time(factors.mean_curve(), bundle.sim.threshold)
                t_val, crossed = res.time, res.crossed
            stream = RandomStream.for_bootstrap(bundle.sim.master_seed, gi)
            lo, hi = bootstrap_threshold_ci(factors, bundle.sim.threshold, stream, N_BOOT)
            rows.append((label, gamma, 0.0, t_val, crossed, lo, hi))
    name = "baseline_nocontrol" if control == "none" else f"threshold_{control}"
    path = out_dir / f"{name}.csv"
    _write_csv(path, "label,gamma,d_over_x,T,crossed,ci_low,ci_high", rows)
    return [path], {"gammas": list(gammas), "control": control}


def _run_curves(spec: ExperimentSpec, out_dir: Path, executor) -> tuple[list[Path], dict]:
    files = []
    ov = dict(spec.overrides)
    ov.setdefault("system.gamma", 0.3)
    tau = float(ov.get("pulses.tau", 0.02))
    settings: dict = {}

    if spec.name == "curves-delta":
        ratios = (0.3, 0.4, 0.5, 0.75)
        settings["delta_over_tau"] = list(ratios)
        for ratio in ratios:
            ov_r = dict(ov)
            ov_r["pulses.delta"] = ratio * tau
            reg = build_bundle(ov_r)
            schedule = generate_regular(reg.pulses, reg.sim.t_max)
            traj = integrate_with(schedule, reg.system, reg.sim)
            curve = fidelity_avg(traj)
            p = out_dir / f"curves_delta_r{ratio}_regular.csv"
            curve.save(p)
            files.append(p)

            ov_rr = dict(ov_r)
            ov_rr["pulses.d_delta"] = 0.2 * tau
            ov_rr["pulses.d_tau"] = 0.2 * tau
            rnd = build_bundle(ov_rr, allow_overlap=True)
            factors = ensemble_functionals(rnd.system, rnd.pulses, rnd.sim, executor=executor)
            p = out_dir / f"curves_delta_r{ratio}_random.csv"
            factors.mean_curve().save(p)
            files.append(p)

    elif spec.name == "curves-deltatau":
        combos = ((0.2, 0.0), (0.0, 0.2), (0.2, 0.2))
        settings["dd_dt_over_tau"] = [list(c) for c in combos]
        reg = build_bundle(ov)
        schedule = generate_regular(reg.pulses, reg.sim.t_max)
        p = out_dir / "curves_deltatau_regular.csv"
        fidelity_avg(integrate_with(schedule, reg.system, reg.sim)).save(p)
        files.append(p)
        for dd, dt in combos:
            ov_c = dict(ov)
            ov_c["pulses.d_delta"] = dd * tau
            ov_c["pulses.d_tau"] = dt * tau
            bundle = build_bundle(ov_c)
            factors = _ensemble(bundle, executor)
            p = out_dir / f"curves_deltatau_dd{dd}_dt{dt}.csv"
            factors.mean_curve().save(p)
            files.append(p)

    else:  # curves-mu
        mu2s = tuple(np.round(np.arange(0.1, 0.9 + 1e-9, 0.1), 10))
        settings["mu2"] = [float(m) for m in mu2s]
        ov_c = dict(ov)
        ov_c.setdefault("pulses.d_delta", 0.2 * tau)
        ov_c.setdefault("pulses.d_tau", 0.2 * tau)
        bundle = build_bundle(ov_c)
        factors = _ensemble(bundle, executor)
        for m2 in mu2s:
            p = out_dir / f"curves_mu_{float(m2)}.csv"
            factors.mean_curve(mu2=float(m2)).save(p)
            files.append(p)
    return files, settings


def _run_single_curve(spec: ExperimentSpec, out_dir: Path, executor) -> tuple[list[Path], dict]:
    control = spec.options.get("control", "random")
    mu2 = spec.options.get("mu2")
    bundle = build_bundle(spec.overrides)
    files: list[Path] = []
    settings = {"control": control}
    if mu2 is not None:
        settings["mu2"] = mu2

    if control in ("none", "regular", "replay"):
        if control == "none":
            schedule = empty_schedule(bundle.sim.t_max)
        elif control == "regular":
            schedule = generate_regular(bundle.pulses, bundle.sim.t_max)
        else:
            schedule = load_schedule(spec.options["replay"], horizon=bundle.sim.t_max)
            settings["replay"] = str(spec.options["replay"])
        traj = integrate_with(schedule, bundle.system, bundle.sim)
        curve = fidelity_avg(traj) if mu2 is None else fidelity_pure(traj, InitialState.from_population(mu2))
        if spec.options.get("dump_traj"):
            p = out_dir / "trajectory.csv"
            traj.save(p)
            files.append(p)
        if spec.options.get("save_schedule"):
            p = out_dir / "schedule.csv"
            save_schedule(schedule, p)
            files.append(p)
    else:
        factors = _ensemble(bundle, executor)
        curve = factors.mean_curve(mu2=mu2)
        if spec.options.get("save_schedule"):
            p = out_dir / "schedule.csv"
            save_schedule(
                generate_random(bundle.pulses, bundle.sim.t_max,
                                RandomStream.for_schedule(bundle.sim.master_seed, 0)), p)
            files.append(p)
    p = out_dir / "curve.csv"
    curve.save(p)
    files.append(p)
    return files, settings


def run_experiment(spec: ExperimentSpec, *, workers: int = 1) -> list[Path]:
    """Execute one experiment; returns the written files (manifest last)."""
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    executor = None
    try:
        if workers > 1:
            executor = ProcessPoolExecutor(max_workers=workers)
        if spec.name in SWEEP_GRIDS:
            files, settings = _run_sweep(spec, out_dir, executor)
        elif spec.name == "baseline-nocontrol":
            files, settings = _threshold_rows(spec, out_dir, executor, "none")
        elif spec.name == "threshold-control":
            files, settings = _threshold_rows(spec, out_dir, executor, spec.options.get("control", "regular"))
        elif spec.name.startswith("curves-"):
            files, settings = _run_curves(spec, out_dir, executor)
        elif spec.name == "run-curve":
            files, settings = _run_single_curve(spec, out_dir, executor)
        elif spec.name == "oracle-check":
            seed = int(spec.overrides.get("sim.master_seed", 12345))
            step = float(spec.overrides.get("sim.step", 1e-4))
            report = run_oracle_check(step=step, seed=seed)
            path = out_dir / "oracle_report.json"
            with open(path, "w", newline="\n") as f:
                json.dump(report, f, indent=1, sort_keys=True)
                f.write("\n")
            files, settings = [path], {}
        else:  # pragma: no cover - ExperimentSpec already validates the name
            raise ValidationError(errors.UNKNOWN_KEY, spec.name)
    finally:
        if executor is not None:
            executor.shutdown()

    files.append(_write_plot_script(out_dir))
    snapshot = _snapshot(build_bundle(spec.overrides)) if spec.name != "oracle-check" else {
        "sim.master_seed": int(spec.overrides.get("sim.master_seed", 12345))
    }
    spec = ExperimentSpec(spec.name, spec.overrides, spec.output_dir,
                          {**spec.options, "workers": workers})
    manifest = _write_manifest(out_dir, spec, snapshot, files, time.perf_counter() - t0)
    return files + [manifest]


# ---------------------------------------------------------------------------
# argument parsing

def _positive_float(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return x


def _count(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1")
    return n


def _seed_value(text: str) -> int:
    s = int(text)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError(f"{text!r} not a 64-bit unsigned seed")
    return s


def _threads_value(text: str):
    if text == "auto":
        return text
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1 or 'auto'")
    return n


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    p.add_argument("--seed", type=_seed_value, help="master seed (64-bit unsigned)")
    p.add_argument("--ensemble", type=_count, help="random-schedule samples per point")
    p.add_argument("--step", type=_positive_float, help="maximum integrator step")
    p.add_argument("--grid-dt", type=_positive_float, help="output sampling interval")
    p.add_argument("--tmax", type=_positive_float, help="simulation horizon")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--threads", type=_threads_value, default=1,
                   help="worker processes (integer or 'auto')")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any documented config key (repeatable)")


def _gamma_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad gamma list {text!r}") from exc


def _grid_spec(text: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected start:stop:step") from exc
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    return [float(x) for x in np.round(np.arange(start, stop + 1e-9, step), 10)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randdd",
        description="Randomized dynamical-decoupling simulator for a dissipative qubit",
    )
    parser.add_argument("--version", action="version", version=f"randdd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate the resolved configuration")
    _add_common(p)

    p = sub.add_parser("run", help="one fidelity curve (random ensemble by default)")
    _add_common(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--no-control", action="store_true", help="no pulses")
    mode.add_argument("--regular", action="store_true", help="deviation-free pulse train")
    mode.add_argument("--replay", type=Path, help="integrate a saved schedule CSV")
    p.add_argument("--mu2", type=float, help="pure-state curve for this excited population")
    p.add_argument("--dump-traj", action="store_true", help="also write trajectory.csv")
    p.add_argument("--save-schedule", action="store_true", help="also write schedule.csv")

    p = sub.add_parser("threshold", help="survival times T(threshold) per gamma")
    _add_common(p)
    p.add_argument("--gammas", type=_gamma_list, help="comma-separated gamma values")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--no-control", action="store_true", help="uncontrolled baseline (default)")
    mode.add_argument("--regular", action="store_true")
    mode.add_argument("--random", action="store_true")
    p.add_argument("--t-mode", choices=("mean-curve", "mean-crossings"), default="mean-curve",
                   help="cross the ensemble-mean curve (default) or average per-sample crossings")

    p = sub.add_parser("sweep", help="T vs fluctuation-scale sweeps")
    _add_common(p)
    p.add_argument("--param", choices=("phi", "tau", "delta"), required=True)
    p.add_argument("--gammas", type=_gamma_list)
    p.add_argument("--grid", type=_grid_spec, help="ratio grid start:stop:step")

    p = sub.add_parser("curves", help="fidelity-curve families")
    _add_common(p)
    p.add_argument("--family", choices=("delta", "deltatau", "mu"), required=True)

    p = sub.add_parser("oracle-check", help="cross-method closure report")
    _add_common(p)
    return parser


def _collect_overrides(args) -> dict:
    raw: dict = {}
    if args.config:
        raw.update(parse_config_file(args.config))
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(errors.BAD_VALUE, f"--set expects KEY=VALUE, got {item!r}")
        raw[key.strip()] = value.strip()
    if args.seed is not None:
        raw["sim.master_seed"] = args.seed
    if args.ensemble is not None:
        raw["sim.ensemble_n"] = args.ensemble
    if args.step is not None:
        raw["sim.step"] = args.step
    if args.grid_dt is not None:
        raw["sim.grid_dt"] = args.grid_dt
    if args.tmax is not None:
        raw["sim.t_max"] = args.tmax
    return resolve_overrides(raw)


def parse_cli(argv) -> tuple[ExperimentSpec, int]:
    """Turn an argv list into an ExperimentSpec plus a worker count."""
    args = build_parser().parse_args(argv)
    overrides = _collect_overrides(args)
    if args.threads == "auto":
        import os

        workers = os.cpu_count() or 1
    else:
        workers = args.threads

    options: dict = {}
    if args.command == "validate":
        return ExperimentSpec("run-curve", overrides, args.out, {"validate_only": True}), workers
    if args.command == "run":
        if args.no_control:
            options["control"] = "none"
        elif args.regular:
            options["control"] = "regular"
        elif args.replay:
            options["control"] = "replay"
            options["replay"] = str(args.replay)
        else:
            options["control"] = "random"
        if args.mu2 is not None:
            options["mu2"] = args.mu2
        if args.dump_traj:
            options["dump_traj"] = True
        if args.save_schedule:
            options["save_schedule"] = True
        return ExperimentSpec("run-curve", overrides, args.out, options), workers
    if args.command == "threshold":
        if args.gammas:
            options["gammas"] = args.gammas
        if args.t_mode != "mean-curve":
            options["t_mode"] = args.t_mode
        if args.regular:
            options["control"] = "regular"
            return ExperimentSpec("threshold-control", overrides, args.out, options), workers
        if args.random:
            options["control"] = "random"
            return ExperimentSpec("threshold-control", overrides, args.out, options), workers
        return ExperimentSpec("baseline-nocontrol", overrides, args.out, options), workers
    if args.command == "sweep":
        if args.gammas:
            options["gammas"] = args.gammas
        if args.grid:
            options["grid"] = args.grid
        return ExperimentSpec(f"sweep-{args.param}", overrides, args.out, options), workers
    if args.command == "curves":
        return ExperimentSpec(f"curves-{args.family}", overrides, args.out, options), workers
    return ExperimentSpec("oracle-check", overrides, args.out, options), workers


def main(argv=None) -> int:
    try:
        spec, workers = parse_cli(argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:  # argparse usage errors and --help/--version
        code = exc.code if exc.code is not None else 0
        return code if isinstance(code, int) else 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if spec.options.get("validate_only"):
            bundle = build_bundle(spec.overrides)
            print("configuration valid")
            for key, value in sorted(_snapshot(bundle).items()):
                print(f"  {key} = {value}")
            return 0
        files = run_experiment(spec, workers=workers)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    for path in files:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

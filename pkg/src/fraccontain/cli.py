"""Command-line front end: ``simulate``, ``sweep`` and ``preset``.

Exit codes: 0 success, 1 sweep with failed runs or unexpected error,
2 usage, 3 invalid scenario, 4 barrier breach, 5 divergence, 6 step size.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import ScenarioConfig, max_convex_step, run_fractional, run_integer_discrete
from .errors import (
    BarrierBreach,
    DivergenceError,
    SimulationAborted,
    StepSizeError,
    ValidationError,
)
from .geometry import build_report
from .potential import ControllerParams
from .scenario import PRESETS, config_hash, config_to_dict, load_scenario
from .social_graph import NetworkTopology

log = logging.getLogger("fraccontain")

EXIT_OK = 0
EXIT_FAILED_RUNS = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_BREACH = 4
EXIT_DIVERGENCE = 5
EXIT_STEP_SIZE = 6

STATUS = {
    EXIT_OK: "ok",
    EXIT_VALIDATION: "invalid",
    EXIT_BREACH: "barrier_breach",
    EXIT_DIVERGENCE: "divergence",
    EXIT_STEP_SIZE: "step_size",
}


@dataclass
class RunManifest:
    scenario_id: str
    config_hash: str
    outputs: dict
    exit_status: int
    status: str
    duration_s: float
    message: str = ""
    extra: dict = field(default_factory=dict)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# config assembly


def _base_config(args, seed=None, alpha=None) -> ScenarioConfig:
    if args.preset and args.config:
        raise UsageError("give either --preset or --config, not both")
    if args.config:
        return load_scenario(args.config)
    name = args.preset or "karate"
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return PRESETS[name](0 if seed is None else seed)


def _override(config: ScenarioConfig, **changes) -> ScenarioConfig:
    """Apply command-line overrides; ``None`` values are left alone."""
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return config
    delta = changes.pop("delta", None)
    k = changes.pop("k", None)
    gain = changes.pop("gain", None)
    if delta is not None:
        topo = config.topology
        changes["topology"] = NetworkTopology(topo.roles, topo.access_edges, delta)
    if k is not None or gain is not None:
        p = config.params
        changes["params"] = ControllerParams(k=p.k if k is None else k, gains=p.gains if gain is None else gain)
    return dataclasses.replace(config, **changes)


def _config_for(args, alpha=None, k=None, gain=None, seed=None) -> ScenarioConfig:
    base = _base_config(args, seed=seed)
    memory_window = getattr(args, "memory_window", None)
    return _override(
        base,
        alpha=alpha,
        k=k,
        gain=gain,
        delta=args.delta,
        step=args.step,
        horizon=args.horizon,
        seed=seed if args.config else None,
        record_every=args.record_every,
        memory_window=memory_window,
        edge_addition=True if getattr(args, "edge_addition", False) else None,
    )


# --------------------------------------------------------------------------
# file emission


def _finite_or_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_finite_or_none(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_trajectory_csv(path: Path, trajectory) -> None:
    """One row per recorded step: ``t``, agent coordinates, then edge margins.

    Agent columns are ``q<id>_<role>_x<c>`` and margin columns ``b_<reader>_<source>``
    with 1-based ids.
    """
    topo = trajectory.config.topology
    n, d = trajectory.states.shape[1:]
    header = ["t"]
    header += [f"q{i + 1}_{topo.roles[i].value}_x{c + 1}" for i in range(n) for c in range(d)]
    header += [f"b_{i + 1}_{j + 1}" for i, j in trajectory.edges]
    rows = np.hstack([trajectory.times[:, None], trajectory.states.reshape(len(trajectory.times), -1), trajectory.margins])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows.tolist():
            out.writerow([repr(x) for x in row])


def write_series(directory: Path, report) -> dict:
    """Two-column ``t,value`` files for generic plotting tools."""
    directory.mkdir(parents=True, exist_ok=True)
    t = report.times
    series = {"hull_volume": report.hull_volume_series, "follower_hull_distance": report.follower_hull_distance_series}
    spreads = np.asarray(report.spread_series)
    for c in range(spreads.shape[1] if spreads.ndim == 2 else 0):
        series[f"spread_x{c + 1}"] = spreads[:, c].tolist()
    paths = {}
    for name, values in series.items():
        path = directory / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["t", name])
            out.writerows([repr(a), repr(b)] for a, b in zip(t, values))
        paths[name] = str(path)
    return paths


def execute_run(config: ScenarioConfig, scheme: str, out: Path, *, trajectory=True, series=True,
                containment_tol=1e-3):
    """Run one scenario and write its files into ``out``.

    Returns ``(exit_code, report_or_None, manifest)``. Aborted runs still get
    their partial trajectory and a report with ``complete = false``.
    """
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    digest = config_hash(config)
    outputs = {}
    code, message, record = EXIT_OK, "", None
    _write_json(out / "config.json", config_to_dict(config))
    outputs["config"] = str(out / "config.json")
    try:
        limit = max_convex_step(config)
        if config.step > limit:
            raise StepSizeError(
                f"step {config.step:g} exceeds the convex-combination limit {limit:.4g} at the initial state"
            )
        runner = run_integer_discrete if scheme == "discrete" else run_fractional
        record = runner(config)
    except BarrierBreach as exc:
        code, message, record = EXIT_BREACH, str(exc), exc.trajectory
    except DivergenceError as exc:
        code, message, record = EXIT_DIVERGENCE, str(exc), exc.trajectory
    except StepSizeError as exc:
        code, message, record = EXIT_STEP_SIZE, str(exc), exc.trajectory
    except SimulationAborted as exc:  # pragma: no cover - every subclass handled above
        code, message, record = EXIT_FAILED_RUNS, str(exc), exc.trajectory

    report = None
    if record is not None and len(record.times):
        report = build_report(record, containment_tol=containment_tol)
        _write_json(out / "report.json", report.to_dict())
        outputs["report"] = str(out / "report.json")
        if trajectory:
            write_trajectory_csv(out / "trajectory.csv", record)
            outputs["trajectory"] = str(out / "trajectory.csv")
        if series:
            outputs["series"] = write_series(out / "series", report)
    manifest = RunManifest(
        scenario_id=config.scenario_id,
        config_hash=digest,
        outputs=outputs,
        exit_status=code,
        status=STATUS.get(code, "error"),
        duration_s=round(time.perf_counter() - started, 3),
        message=message,
    )
    _write_json(out / "manifest.json", dataclasses.asdict(manifest))
    return code, report, manifest


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    config = _config_for(args, alpha=args.alpha, k=args.k, gain=args.gain, seed=args.seed)
    out = Path(args.out)
    code, report, manifest = execute_run(
        config, args.scheme, out, trajectory=not args.no_trajectory, containment_tol=args.tol
    )
    if code != EXIT_OK:
        print(f"error: {manifest.message}", file=sys.stderr)
    elif report is not None:
        worst = max(report.final_hull_distances.values())
        print(
            f"{config.scenario_id} alpha={config.alpha.alpha:g} seed={config.seed}: "
            f"connectivity_preserved={report.connectivity_preserved} min_margin={report.min_margin_over_run:.6g} "
            f"contained={report.contained} max_hull_distance={worst:.3g} -> {out}"
        )
    return code


def _seed_list(tokens):
    seeds = []
    for tok in tokens:
        if ":" in tok:
            lo, hi = tok.split(":", 1)
            seeds.extend(range(int(lo), int(hi)))
        else:
            seeds.append(int(tok))
    return seeds


SWEEP_COLUMNS = [
    "run_id", "alpha", "k", "gain", "seed", "status", "exit_status", "complete",
    "connectivity_preserved", "min_margin", "contained", "max_final_hull_distance",
    "max_hull_volume_increase", "max_spread_increase", "config_hash",
]


def _sweep_task(task):
    args, alpha, k, gain, seed, run_id, out = task
    row = {"run_id": run_id, "alpha": alpha, "k": k, "gain": gain, "seed": seed}
    try:
        config = _config_for(args, alpha=alpha, k=k, gain=gain, seed=seed)
    except ValidationError as exc:
        row.update(status="invalid", exit_status=EXIT_VALIDATION, config_hash="")
        log.warning("%s: %s", run_id, exc)
        return row
    code, report, manifest = execute_run(
        config, args.scheme, out, trajectory=args.trajectories, series=False, containment_tol=args.tol
    )
    row.update(status=manifest.status, exit_status=code, config_hash=manifest.config_hash)
    if report is not None:
        row.update(
            complete=report.complete,
            connectivity_preserved=report.connectivity_preserved,
            min_margin=report.min_margin_over_run,
            contained=report.contained,
            max_final_hull_distance=max(report.final_hull_distances.values()),
            max_hull_volume_increase=report.max_hull_volume_increase,
            max_spread_increase=report.max_spread_increase,
        )
    return row


def cmd_sweep(args) -> int:
    alphas = args.alpha or [1.0]
    ks = args.k or [None]
    gains = args.gain or [None]
    seeds = _seed_list(args.seed) if args.seed is not None else [0]
    grid = list(itertools.product(alphas, ks, gains, seeds))
    if not grid:
        raise UsageError("empty sweep grid")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for alpha, k, gain, seed in grid:
        run_id = f"a{alpha:g}_k{'-' if k is None else f'{k:g}'}_g{'-' if gain is None else f'{gain:g}'}_s{seed}"
        tasks.append((args, alpha, k, gain, seed, run_id, out / "runs" / run_id))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]

    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _cell(row.get(c, "")) for c in SWEEP_COLUMNS})
    failed = [r for r in rows if r["exit_status"] != EXIT_OK]
    print(f"{len(rows)} runs, {len(failed)} failed -> {out / 'sweep.csv'}")
    for r in failed:
        print(f"failed: {r['run_id']} ({r['status']})", file=sys.stderr)
    return EXIT_FAILED_RUNS if failed else EXIT_OK


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def cmd_preset(args) -> int:
    config = _config_for(args, alpha=args.alpha, k=args.k, gain=args.gain, seed=args.seed)
    text = json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_scenario_flags(p, grid=False):
    src = p.add_argument_group("scenario")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario (default: karate)")
    src.add_argument("--config", metavar="PATH", help="scenario JSON file")
    nargs = "+" if grid else None
    src.add_argument("--alpha", type=float, nargs=nargs, help="fractional order in (0, 1]")
    src.add_argument("--k", type=float, nargs=nargs, help="tuning exponent of the potential")
    src.add_argument("--gain", type=float, nargs=nargs, help="uniform follower gain K")
    src.add_argument("--delta", type=float, help="social-difference threshold")
    src.add_argument("--step", type=float, help="sampling period T")
    src.add_argument("--horizon", type=float, help="simulated time")
    if grid:
        src.add_argument("--seed", nargs="+", help="seeds; 'A:B' expands to A..B-1")
    else:
        src.add_argument("--seed", type=int, help="random seed for preset initial states")
    src.add_argument("--record-every", type=_positive_int, help="record every N-th step")
    src.add_argument("--memory-window", type=_positive_int, help="truncate the fractional memory to N steps")
    src.add_argument("--edge-addition", action="store_true", help="let new bonds form during the run")
    src.add_argument("--scheme", choices=("fractional", "discrete"), default="fractional")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraccontain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write trajectory, report and series")
    _add_scenario_flags(p)
    p.add_argument("--out", default="run", metavar="DIR")
    p.add_argument("--tol", type=float, default=1e-3, help="containment tolerance")
    p.add_argument("--no-trajectory", action="store_true", help="skip trajectory.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid over alpha, k, gain and seed")
    _add_scenario_flags(p, grid=True)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", default="sweep", metavar="DIR")
    p.add_argument("--tol", type=float, default=1e-3, help="containment tolerance")
    p.add_argument("--trajectories", action="store_true", help="also write trajectory.csv per run")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("preset", help="write a preset scenario as JSON")
    _add_scenario_flags(p)
    p.add_argument("--out", metavar="PATH", help="file to write (default: stdout)")
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fraccontain: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print("invalid scenario:", file=sys.stderr)
        for path, msg in exc.errors:
            print(f"  {path or '<root>'}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"fraccontain: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

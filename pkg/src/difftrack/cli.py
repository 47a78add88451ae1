"""Command-line front end: run scenarios, compare controllers, sweep parameters.

Exit codes are a stable contract: 0 success, 2 configuration error,
3 runtime divergence.  All output files are written atomically (temp file +
rename) so an interrupted run never leaves a truncated artifact.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import (
    ScenarioConfig,
    apply_override,
    config_hash,
    load_raw,
    paths_match,
    resolve_config_path,
    scenario_from_dict,
)
from .core import ConfigError, DivergenceError, ValidationError
from .harness import (
    METRIC_NAMES,
    RunLog,
    comparison_csv,
    comparison_table,
    compare,
    run,
    steady_state_rmse,
)

RUN_ARTIFACTS = ("log.csv", "report.csv", "plot.gp")


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _prepare_out_dir(out: str, force: bool, artifacts) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not force:
        existing = [name for name in artifacts if (out_dir / name).exists()]
        if existing:
            raise ConfigError(
                f"output files already exist in {out_dir}: {', '.join(existing)} "
                f"(pass --force to overwrite)"
            )
    return out_dir


def _load_config(spec: str, args) -> tuple[dict, ScenarioConfig]:
    raw = load_raw(resolve_config_path(spec))
    if getattr(args, "seed", None) is not None:
        apply_override(raw, "sim.seed", args.seed)
    if getattr(args, "feedback", None) is not None:
        apply_override(raw, "sim.feedback", args.feedback)
    if getattr(args, "plant_input", None) is not None:
        apply_override(raw, "sim.plant_input", args.plant_input)
    return raw, scenario_from_dict(raw)


def _plot_script(log: RunLog) -> str:
    """Gnuplot script over log.csv: XY track vs reference, velocity errors vs time."""
    col = {name: i + 1 for i, name in enumerate(log.columns)}  # gnuplot is 1-based
    return f"""# gnuplot script generated by difftrack; run from the output directory
set datafile separator ','
set terminal pngcairo size 1200,500
set output 'tracking.png'
set multiplot layout 1,2
set key top right
set title 'XY track vs reference'
set xlabel 'x [m]'
set ylabel 'y [m]'
set size ratio -1
plot 'log.csv' using {col['ref.x']}:{col['ref.y']} with lines lw 2 title 'reference', \\
     'log.csv' using {col['truth.x']}:{col['truth.y']} with lines lw 2 title 'robot'
set size noratio
set title 'velocity errors vs time'
set xlabel 't [s]'
set ylabel 'error'
plot 'log.csv' using {col['t']}:(${col['ctl.v_c_x']}-${col['truth.v_x']}) with lines title 'v_x error [m/s]', \\
     'log.csv' using {col['t']}:(${col['ctl.v_c_omega']}-${col['truth.omega']}) with lines title 'omega error [rad/s]'
unset multiplot
"""


def _write_run_artifacts(out_dir: Path, config: ScenarioConfig, log: RunLog):
    report = steady_state_rmse(log, config.default_transient, config.velocity_error_source)
    _atomic_write(out_dir / "log.csv", log.to_csv_text())
    _atomic_write(out_dir / "report.csv", report.csv_text())
    _atomic_write(out_dir / "plot.gp", _plot_script(log))
    if config.dump_sensors:
        _atomic_write(out_dir / "sensors.csv", log.measurements_csv_text())
    return report


def _cmd_run(args) -> int:
    _, config = _load_config(args.config, args)
    out_dir = _prepare_out_dir(args.out, args.force, RUN_ARTIFACTS)
    log = run(config)
    report = _write_run_artifacts(out_dir, config, log)
    if args.format == "table":
        width = max(len(n) for n in METRIC_NAMES)
        for name in METRIC_NAMES:
            print(f"{name:<{width}}  {getattr(report, name):.6f}")
    else:
        print(f"wrote {', '.join(RUN_ARTIFACTS)} to {out_dir}")
    return 0


def _cmd_compare(args) -> int:
    _, base_cfg = _load_config(args.baseline, args)
    _, cand_cfg = _load_config(args.candidate, args)
    if not paths_match(base_cfg, cand_cfg):
        raise ConfigError(
            "compare requires both configs to share the same [path] definition"
        )
    out_dir = _prepare_out_dir(
        args.out, args.force,
        ("baseline_log.csv", "candidate_log.csv", "comparison.csv", "comparison.txt"),
    )
    base_log = run(base_cfg)
    cand_log = run(cand_cfg)
    base_report = steady_state_rmse(base_log, base_cfg.default_transient, base_cfg.velocity_error_source)
    cand_report = steady_state_rmse(cand_log, cand_cfg.default_transient, cand_cfg.velocity_error_source)
    table = comparison_table(base_report, cand_report, labels=("baseline", "candidate"))
    _atomic_write(out_dir / "baseline_log.csv", base_log.to_csv_text())
    _atomic_write(out_dir / "candidate_log.csv", cand_log.to_csv_text())
    _atomic_write(out_dir / "comparison.csv", comparison_csv(base_report, cand_report))
    _atomic_write(out_dir / "comparison.txt", table)
    if args.format == "table":
        print(table, end="")
    else:
        print(f"wrote comparison artifacts to {out_dir}")
    return 0


def _parse_set_value(text: str):
    lowered = text.strip()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(lowered)
    except ValueError:
        pass
    try:
        return float(lowered)
    except ValueError:
        return lowered


def _parse_grid(set_args) -> list[tuple[str, list]]:
    grid = []
    for item in set_args or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=v1,v2,... got {item!r}")
        key, _, values = item.partition("=")
        parsed = [_parse_set_value(v) for v in values.split(",") if v.strip() != ""]
        if not parsed:
            raise ConfigError(f"--set {key}: no values given")
        grid.append((key.strip(), parsed))
    return grid


def _sweep_cell(payload):
    """Worker for one sweep cell; module-level so process pools can pickle it."""
    raw, assignments = payload
    for key, value in assignments:
        apply_override(raw, key, value)
    config = scenario_from_dict(raw)
    log = run(config)
    report = steady_state_rmse(log, config.default_transient, config.velocity_error_source)
    return config_hash(raw), report.as_dict()


def _cmd_sweep(args) -> int:
    raw, _ = _load_config(args.config, args)
    grid = _parse_grid(args.set)
    if not grid:
        raise ConfigError("sweep requires at least one --set key=v1,v2,... axis")
    keys = [key for key, _ in grid]
    cells = list(itertools.product(*[values for _, values in grid]))
    out_dir = _prepare_out_dir(args.out, args.force, ("summary.csv",))

    import copy

    payloads = [
        (copy.deepcopy(raw), list(zip(keys, cell)))
        for cell in cells
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]

    header = ["config_hash", *keys, *METRIC_NAMES]
    lines = [",".join(header)]
    for cell, (digest, metrics) in zip(cells, results):
        values = [digest, *[repr(v) if isinstance(v, float) else str(v) for v in cell]]
        values += [repr(metrics[name]) for name in METRIC_NAMES]
        lines.append(",".join(values))
    _atomic_write(out_dir / "summary.csv", "\n".join(lines) + "\n")
    print(f"wrote {len(cells)} sweep rows to {out_dir / 'summary.csv'}")
    return 0


def _cmd_validate(args) -> int:
    path = resolve_config_path(args.config)
    scenario_from_dict(load_raw(path))
    print(f"OK: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difftrack",
        description="Differential-drive trajectory-tracking workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_out=True):
        p.add_argument("--seed", type=int, default=None, help="override sim.seed")
        p.add_argument("--feedback", choices=("truth", "ekf"), default=None,
                       help="override sim.feedback")
        p.add_argument("--plant-input", dest="plant_input", choices=("torque", "twist"),
                       default=None, help="override sim.plant_input")
        if with_out:
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--force", action="store_true",
                           help="overwrite existing output files")
            p.add_argument("--format", choices=("csv", "table"), default="csv",
                           help="print reports as an aligned table instead of a path note")

    p_run = sub.add_parser("run", help="run one scenario and write log/report/plot artifacts")
    p_run.add_argument("--config", required=True, help="scenario file or packaged scenario name")
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run two scenarios sharing a path and tabulate changes")
    p_cmp.add_argument("baseline", help="baseline scenario (file or packaged name)")
    p_cmp.add_argument("candidate", help="candidate scenario (file or packaged name)")
    add_common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="grid-run a scenario over numeric config keys")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--set", action="append", metavar="KEY=V1,V2,...",
                         help="sweep axis over a dotted config key (repeatable)")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="check a scenario file and report diagnostics")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"runtime divergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())

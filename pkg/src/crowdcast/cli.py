"""Batch entry point: run, sweep, and analyze experiments.

Configuration comes from a flat manifest file (one ``key = value`` per
line, lists comma-separated) with command-line flags of the same names
taking precedence.  All outputs are CSV files written atomically; the
first line is a metadata comment carrying the only nondeterministic field
(a timestamp), so reruns with the same seed are otherwise byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from crowdcast import analysis, datasets
from crowdcast.allocation import Policy
from crowdcast.core import PriorSpec
from crowdcast.forecast import ForecastConfig, GrowthRule
from crowdcast.simulation import SimConfig, WorkerMode, run_replications

MANIFEST_KEYS = (
    "name", "mode", "budget", "seed_tasks", "delta", "n_max", "rule", "policy",
    "replications", "seed", "checkpoint_stride", "s", "dataset", "out_dir",
    "sweep_delta", "sweep_nmax", "sweep_n0", "sweep_s",
    "include_proposal_cost", "proposal_cost", "response_cost",
)

DEFAULTS = {
    "name": "experiment",
    "mode": "synthetic",
    "budget": "3000",
    "seed_tasks": "100",
    "delta": "0.9",
    "n_max": "10",
    "rule": "gr1",
    "policy": "optkg",
    "replications": "1",
    "seed": "0",
    "checkpoint_stride": "10",
    "s": "0.0",
    "include_proposal_cost": "false",
    "proposal_cost": "1.0",
    "response_cost": "1.0",
}


class CliError(Exception):
    pass


def parse_manifest(path) -> dict:
    """Read a flat key = value manifest; '#' starts a comment line."""
    settings: dict = {}
    path = Path(path)
    if not path.exists():
        raise CliError(f"manifest not found: {path}")
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise CliError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in MANIFEST_KEYS:
            raise CliError(f"{path}:{line_no}: unknown key {key!r}")
        settings[key] = value.strip()
    return settings


def _merge(manifest: dict, args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    settings.update(manifest)
    for key in MANIFEST_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _bool(raw: str) -> bool:
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise CliError(f"expected a boolean, got {raw!r}")


def _floats(raw: str) -> list:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"expected comma-separated numbers, got {raw!r}") from exc


def _load_dataset(settings: dict):
    ref = settings.get("dataset")
    if not ref:
        raise CliError("replay mode needs a 'dataset' manifest reference")
    path, _, name = ref.partition("#")
    try:
        return datasets.load_canonical(path, name or None)
    except datasets.DatasetError as exc:
        raise CliError(str(exc)) from exc


def _worker_mode(settings: dict) -> WorkerMode:
    mode = settings["mode"]
    if mode == "synthetic":
        return WorkerMode.synthetic()
    if mode == "increasing_cost":
        return WorkerMode.increasing_cost(float(settings["s"]))
    if mode == "replay":
        return WorkerMode.replay(_load_dataset(settings))
    raise CliError(f"unknown mode {mode!r}")


def _rules_and_deltas(settings: dict):
    rules = [r.strip() for r in settings["rule"].split(",") if r.strip()]
    deltas = _floats(settings["delta"])
    if len(deltas) == 1:
        deltas = deltas * len(rules)
    if len(deltas) != len(rules):
        raise CliError("need one delta per rule (or a single delta for all)")
    try:
        return [(GrowthRule(r), d) for r, d in zip(rules, deltas)]
    except ValueError as exc:
        raise CliError(f"rule must be gr1 or gr2: {exc}") from exc


def _sim_config(settings: dict, rule: GrowthRule, delta: float, **overrides) -> SimConfig:
    forecast = ForecastConfig(
        delta=overrides.pop("delta", delta),
        n_max=overrides.pop("n_max", float(settings["n_max"])),
        rule=rule,
        proposal_cost=float(settings["proposal_cost"]),
        response_cost=float(settings["response_cost"]),
        include_proposal_cost=_bool(settings["include_proposal_cost"]),
    )
    kwargs = {
        "total_budget": int(settings["budget"]),
        "seed_tasks": int(settings["seed_tasks"]),
        "forecast": forecast,
        "policy": Policy(settings["policy"]),
        "mode": _worker_mode(settings),
        "rng_seed": int(settings["seed"]),
        "replications": int(settings["replications"]),
        "checkpoint_stride": int(settings["checkpoint_stride"]),
    }
    kwargs.update(overrides)
    return SimConfig(**kwargs)


def _out_dir(settings: dict) -> Path:
    out = settings.get("out_dir")
    if not out:
        raise CliError("out_dir is required")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_outputs(out_dir: Path, command: str, files: dict) -> None:
    """Write every output atomically (temp then rename), all or nothing."""
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    for filename, (fieldnames, rows) in files.items():
        final = out_dir / filename
        tmp = out_dir / (filename + ".tmp")
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# crowdcast {command} generated={stamp}\n")
            writer = csv.writer(fh)
            writer.writerow(fieldnames)
            writer.writerows(rows)
        os.replace(tmp, final)


def _acc(x: float) -> str:
    return format(x, ".6f")


def cmd_run(settings: dict) -> int:
    out_dir = _out_dir(settings)
    curves, growth_rows, summary = [], [], []
    for rule, delta in _rules_and_deltas(settings):
        config = _sim_config(settings, rule, delta)
        traces, baselines = run_replications(config, with_baselines=True)
        for rep, (trace, base) in enumerate(zip(traces, baselines)):
            for variant, tr in (("forecast", trace), ("baseline", base)):
                for t, n_tasks, acc in tr.checkpoints:
                    curves.append([variant, rule.value, rep, t, n_tasks, _acc(acc)])
            for t in trace.growth_times:
                growth_rows.append([rule.value, rep, t])
            summary.append(
                [
                    rule.value,
                    rep,
                    trace.n_final,
                    len(trace.growth_times),
                    _acc(analysis.growth_rate(trace)),
                    _acc(trace.final_accuracy),
                    base.meta["budget"],
                    _acc(base.final_accuracy),
                ]
            )
    _write_outputs(
        out_dir,
        "run",
        {
            "curves.csv": (
                ["variant", "rule", "replication", "t", "n_tasks", "accuracy"],
                curves,
            ),
            "growth_events.csv": (["rule", "replication", "t"], growth_rows),
            "summary.csv": (
                [
                    "rule", "replication", "n_final", "growth_events", "growth_rate",
                    "final_accuracy", "baseline_budget", "baseline_final_accuracy",
                ],
                summary,
            ),
        },
    )
    return 0


_SWEEP_AXES = {
    "sweep_delta": "delta",
    "sweep_nmax": "n_max",
    "sweep_n0": "seed_tasks",
    "sweep_s": "s",
}


def cmd_sweep(settings: dict) -> int:
    axes = {
        axis: _floats(settings[key])
        for key, axis in _SWEEP_AXES.items()
        if settings.get(key)
    }
    if not axes:
        raise CliError("sweep needs at least one sweep axis (sweep_delta, "
                       "sweep_nmax, sweep_n0, sweep_s)")
    out_dir = _out_dir(settings)
    rate_rows, improvement_rows = [], []
    for axis, values in axes.items():
        for value in values:
            for rule, delta in _rules_and_deltas(settings):
                overrides = {}
                cell = dict(settings)
                if axis == "delta":
                    overrides["delta"] = value
                elif axis == "n_max":
                    overrides["n_max"] = value
                elif axis == "seed_tasks":
                    overrides["seed_tasks"] = int(value)
                elif axis == "s":
                    cell["mode"] = "increasing_cost"
                    cell["s"] = str(value)
                config = _sim_config(cell, rule, delta, **overrides)
                traces, baselines = run_replications(config, with_baselines=True)
                rates = [analysis.growth_rate(t) for t in traces]
                mean = sum(rates) / len(rates)
                std = (sum((r - mean) ** 2 for r in rates) / len(rates)) ** 0.5
                rate_rows.append(
                    [axis, value, rule.value, _acc(mean), _acc(std)]
                )
                for row in analysis.aggregate_runs(traces, baselines):
                    improvement_rows.append(
                        [
                            axis, value, rule.value, row["t"],
                            _acc(row["mean_forecast_accuracy"]),
                            _acc(row["mean_baseline_accuracy"]),
                            _acc(row["mean_improvement"]),
                        ]
                    )
    _write_outputs(
        out_dir,
        "sweep",
        {
            "rates.csv": (
                ["axis_name", "axis_value", "rule", "mean_rate", "std_rate"],
                rate_rows,
            ),
            "improvement.csv": (
                [
                    "axis_name", "axis_value", "rule", "t",
                    "mean_forecast_accuracy", "mean_baseline_accuracy",
                    "mean_improvement",
                ],
                improvement_rows,
            ),
        },
    )
    return 0


def _read_growth_events(paths) -> dict:
    """Growth times grouped per (rule, replication) across input files."""
    grouped: dict = {}
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise CliError(f"trace file not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows or rows[0] != ["rule", "replication", "t"]:
            raise CliError(f"{path}: expected header rule,replication,t")
        for row in rows[1:]:
            try:
                rule, rep, t = row[0], int(row[1]), int(row[2])
            except (ValueError, IndexError) as exc:
                raise CliError(f"{path}: malformed row {row!r}") from exc
            grouped.setdefault((rule, rep), []).append(t)
    return grouped


def cmd_analyze(settings: dict, inputs) -> int:
    out_dir = _out_dir(settings)
    grouped = _read_growth_events(inputs)
    by_rule: dict = {}
    for (rule, _rep), ts in sorted(grouped.items()):
        gaps = analysis.interevent_times(sorted(ts))
        by_rule.setdefault(rule, []).extend(gaps.values)

    interevent_rows, fit_rows = [], []
    for rule in sorted(by_rule):
        values = by_rule[rule]
        interevent_rows.extend([rule, dt] for dt in values)
        if len(values) < 2:
            print(
                f"warning: rule {rule} has {len(values)} interevent value(s); "
                "skipping fits",
                file=sys.stderr,
            )
            continue
        sample = analysis.IntereventSample(tuple(values))
        pl = analysis.fit_powerlaw(sample, x_min=1)
        geom = analysis.fit_geometric(sample)
        expo = analysis.fit_exponential(sample, x_min=1)
        lr = analysis.likelihood_ratio(sample, pl, expo)
        fit_rows.append(
            [
                rule, len(values), _acc(pl.pl_alpha), pl.x_min, _acc(geom.p),
                _acc(expo.lam), _acc(lr.r_statistic), format(lr.p_value, ".6e"),
            ]
        )
    _write_outputs(
        out_dir,
        "analyze",
        {
            "interevent.csv": (["rule", "dt"], interevent_rows),
            "tailfits.csv": (
                [
                    "rule", "n_samples", "pl_alpha", "x_min", "geom_p",
                    "exp_lambda", "lr_r", "lr_p",
                ],
                fit_rows,
            ),
        },
    )
    return 0


def cmd_synth_data(settings: dict) -> int:
    out_dir = _out_dir(settings)
    manifest = datasets.write_demo_datasets(out_dir, seed=int(settings["seed"]))
    print(manifest)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdcast",
        description="budget-constrained crowdsourcing simulator with cost forecasting",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("run", "run forecasting + matched baseline replications"),
        ("sweep", "sweep parameter axes and tabulate growth rates"),
        ("analyze", "fit interevent distributions from growth-event files"),
        ("synth-data", "write shape-matched stand-in replay datasets"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--manifest", help="flat key = value manifest file")
        for key in MANIFEST_KEYS:
            p.add_argument(f"--{key}", dest=key)
        if name == "analyze":
            p.add_argument("inputs", nargs="*", help="growth_events.csv files")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        manifest = parse_manifest(args.manifest) if args.manifest else {}
        settings = _merge(manifest, args)
        if args.command == "run":
            return cmd_run(settings)
        if args.command == "sweep":
            return cmd_sweep(settings)
        if args.command == "analyze":
            if not args.inputs:
                raise CliError("analyze needs at least one growth_events.csv input")
            return cmd_analyze(settings, args.inputs)
        if args.command == "synth-data":
            return cmd_synth_data(settings)
        raise CliError(f"unknown command {args.command!r}")
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Batch command line front end.

``trajmb run`` executes a Monte-Carlo experiment from a TOML config (every
key overridable by a flag) and writes:

* ``curves.csv``    per-step RMS cost curves, one row per filter/L-scan/step,
* ``summary.csv``   the five cost components collapsed over time, one column
                    per filter/L-scan pair,
* ``timing.csv``    mean per-step and per-run wall-clock (not byte-stable),
* ``runs/<i>.json`` one record per run with truth, measurements, estimates.

``trajmb eval`` re-scores stored trajectory files against truth and writes a
per-step metric CSV.  Exit codes: 0 success, 1 runtime failure, 2 bad
config/schema.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .filter import FilterConfig
from .metrics import (
    MetricConfig,
    evaluate,
    load_trajectories,
    rms_over_runs,
    rms_over_time,
    truncate_to,
    write_metric_csv,
)
from .sim import (
    FilterSpec,
    Scenario,
    TargetSpec,
    default_scenario,
    run_monte_carlo,
    run_record_to_dict,
)

FILTER_VARIANTS = {
    "tiemb-iplf": ("iplf", True),
    "tiemb-ukf": ("ukf", True),
    "timb-iplf": ("iplf", False),
    "timb-ukf": ("ukf", False),
}

SUMMARY_ROWS = ["Total", "Localisation", "Missed", "False", "Switch"]


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def _check_keys(table: dict, allowed: set, where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def scenario_from_config(table: dict) -> Scenario:
    """Build a scenario from the [scenario] table; omitted keys keep the
    reference defaults (including the four scripted targets)."""
    base = default_scenario()
    if not table:
        return base
    allowed = {
        "duration",
        "area",
        "cell_width",
        "noise_sigma",
        "peak",
        "psf_sigma",
        "time_step",
        "accel_sigma",
        "survival_prob",
        "birth_prob",
        "birth_mean",
        "birth_cov",
        "targets",
    }
    _check_keys(table, allowed, "scenario")
    kwargs = dict(table)
    targets = kwargs.pop("targets", None)
    if targets is not None:
        parsed = []
        for i, entry in enumerate(targets):
            _check_keys(entry, {"birth", "death", "state"}, f"scenario.targets[{i}]")
            try:
                parsed.append(
                    TargetSpec(
                        birth=int(entry["birth"]),
                        death=int(entry["death"]),
                        state=entry.get("state"),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"scenario.targets[{i}] missing key {exc}")
        kwargs["targets"] = parsed
    else:
        kwargs["targets"] = base.targets
    if "birth_cov" in kwargs:
        cov = np.asarray(kwargs["birth_cov"], dtype=float)
        kwargs["birth_cov"] = np.diag(cov) if cov.ndim == 1 else cov
    for key in ("area", "psf_sigma"):
        if key in kwargs:
            kwargs[key] = tuple(float(v) for v in kwargs[key])
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[scenario]: {exc}")


def build_filter_specs(
    names: list[str], lscans: list[int], filter_table: dict
) -> list[FilterSpec]:
    allowed = {
        "prune_threshold",
        "termination_threshold",
        "iplf_max_iters",
        "iplf_kld_threshold",
        "sigma_central_weight",
    }
    _check_keys(filter_table, allowed, "filter")
    specs = []
    for name in names:
        if name not in FILTER_VARIANTS:
            raise ConfigError(
                f"unknown filter '{name}' (choose from {', '.join(sorted(FILTER_VARIANTS))})"
            )
        variant, exchange = FILTER_VARIANTS[name]
        for lscan in lscans:
            if lscan < 1:
                raise ConfigError("lscan entries must be >= 1")
            try:
                cfg = FilterConfig(
                    variant=variant, exchange=exchange, l_scan=int(lscan), **filter_table
                )
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[filter]: {exc}")
            specs.append(FilterSpec(name=name, config=cfg))
    if len({s.key for s in specs}) != len(specs):
        raise ConfigError("duplicate filter/L-scan combinations")
    return specs


def metric_from_config(table: dict) -> MetricConfig:
    _check_keys(table, {"cutoff", "order", "switch_penalty"}, "metric")
    try:
        return MetricConfig(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[metric]: {exc}")


def _parse_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_toml(args.config) if args.config else {}
    _check_keys(config, {"run", "scenario", "filter", "metric"}, "config root")
    run_table = dict(config.get("run", {}))
    _check_keys(
        run_table,
        {"runs", "seed", "out", "mode", "filters", "lscan", "workers"},
        "run",
    )

    runs = args.runs if args.runs is not None else int(run_table.get("runs", 10))
    seed = args.seed if args.seed is not None else int(run_table.get("seed", 0))
    out_dir = Path(args.out or run_table.get("out", "results"))
    mode = args.mode or run_table.get("mode", "all")
    names = (
        _parse_list(args.filters)
        if args.filters
        else list(run_table.get("filters", sorted(FILTER_VARIANTS)))
    )
    lscans = (
        [int(v) for v in _parse_list(args.lscan)]
        if args.lscan
        else [int(v) for v in run_table.get("lscan", [1])]
    )
    workers = (
        args.workers if args.workers is not None else int(run_table.get("workers", 0))
    )
    if workers <= 0:
        workers = os.cpu_count() or 1

    if runs < 1:
        raise ConfigError("runs must be >= 1")
    if mode not in ("alive", "all"):
        raise ConfigError("mode must be 'alive' or 'all'")
    if not names:
        raise ConfigError("at least one filter is required")

    scenario = scenario_from_config(config.get("scenario", {}))
    specs = build_filter_specs(names, lscans, dict(config.get("filter", {})))
    metric_cfg = metric_from_config(dict(config.get("metric", {})))

    records = run_monte_carlo(
        scenario,
        specs,
        n_mc=runs,
        base_seed=seed,
        metric_cfg=metric_cfg,
        mode=mode,
        workers=workers,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(exist_ok=True)
    for i, record in enumerate(records):
        with open(runs_dir / f"{i}.json", "w", encoding="utf-8") as fh:
            json.dump(run_record_to_dict(record), fh)

    curves = {}
    timing = {}
    for spec in specs:
        key = spec.key
        good = [r for r in records if key in r.raw_totals]
        for i, record in enumerate(records):
            if key in record.failures:
                print(
                    f"warning: run {i} failed for {key[0]} L{key[1]}: "
                    f"{record.failures[key]}",
                    file=sys.stderr,
                )
        if not good:
            raise RuntimeError(f"every run failed for {key[0]} L{key[1]}")
        totals = np.stack([r.raw_totals[key] for r in good])
        parts = np.stack([r.raw_parts[key] for r in good])
        curves[key] = np.column_stack(
            [rms_over_runs(totals)]
            + [rms_over_runs(np.sqrt(parts[:, :, j])) for j in range(4)]
        )
        seconds = np.stack([r.step_seconds[key] for r in good])
        timing[key] = (float(seconds.sum(axis=1).mean()), float(seconds.mean()))

    with open(out_dir / "curves.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("filter,lscan,k,total,loc,missed,false,switch\n")
        for spec in specs:
            name, lscan = spec.key
            table = curves[spec.key]
            for k in range(1, table.shape[0] + 1):
                row = ",".join(_fmt(v) for v in table[k - 1])
                fh.write(f"{name},{lscan},{k},{row}\n")

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        headers = [f"{name} L{lscan}" for name, lscan in (s.key for s in specs)]
        fh.write(",".join(["cost"] + headers) + "\n")
        for row_idx, label in enumerate(SUMMARY_ROWS):
            values = [rms_over_time(curves[s.key][:, row_idx]) for s in specs]
            fh.write(",".join([label] + [_fmt(v) for v in values]) + "\n")

    with open(out_dir / "timing.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("filter,lscan,mean_run_seconds,mean_step_ms\n")
        for spec in specs:
            name, lscan = spec.key
            run_s, step_s = timing[spec.key]
            fh.write(f"{name},{lscan},{_fmt(run_s)},{_fmt(step_s * 1e3)}\n")

    for spec in specs:
        name, lscan = spec.key
        total = rms_over_time(curves[spec.key][:, 0])
        print(
            f"{name} L{lscan}: total cost {total:.4f}, "
            f"{timing[spec.key][0]:.2f} s/run over {runs} run(s)"
        )
    print(f"results written to {out_dir}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        estimates = load_trajectories(args.estimates)
        truth = load_trajectories(args.truth)
    except FileNotFoundError as exc:
        raise ConfigError(f"missing file: {exc.filename}")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad trajectory file: {exc}")
    try:
        cfg = MetricConfig(
            order=args.order, cutoff=args.cutoff, switch_penalty=args.switch_penalty
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    horizon = max(truth.max_end_time, estimates.max_end_time)
    if horizon < 1:
        raise ConfigError("both trajectory sets are empty")
    results = [
        evaluate(truncate_to(estimates, k), truth, k, cfg)
        for k in range(1, horizon + 1)
    ]
    write_metric_csv(results, args.out)
    final = results[-1]
    print(
        f"step {horizon}: total {final.total:.4f} "
        f"(loc {final.localisation:.4f}, missed {final.missed:.4f}, "
        f"false {final.false_cost:.4f}, switch {final.switch:.4f})"
    )
    print(f"metric written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajmb",
        description="Track-before-detect multi-target filtering experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte-Carlo experiment")
    run_p.add_argument("--config", help="TOML config file")
    run_p.add_argument("--out", help="output directory (default results)")
    run_p.add_argument("--seed", type=int, help="base RNG seed")
    run_p.add_argument("--runs", type=int, help="number of Monte-Carlo runs")
    run_p.add_argument("--mode", choices=["alive", "all"], help="trajectory mode")
    run_p.add_argument(
        "--filters",
        help="comma-separated subset of: " + ", ".join(sorted(FILTER_VARIANTS)),
    )
    run_p.add_argument("--lscan", help="comma-separated L-scan window lengths")
    run_p.add_argument(
        "--workers", type=int, help="parallel run workers (0 = all cores)"
    )
    run_p.set_defaults(func=cmd_run)

    eval_p = sub.add_parser("eval", help="score stored trajectories against truth")
    eval_p.add_argument("--estimates", required=True, help="estimate JSON file")
    eval_p.add_argument("--truth", required=True, help="truth JSON file")
    eval_p.add_argument("--out", default="metric.csv", help="output CSV path")
    eval_p.add_argument("--cutoff", type=float, default=10.0)
    eval_p.add_argument("--order", type=float, default=2.0)
    eval_p.add_argument("--switch-penalty", type=float, default=1.0)
    eval_p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Render result figures from the batch CSV outputs.

Reads curves.csv (per-step RMS cost curves, one row per filter/L-scan/step)
and summary.csv (cost components collapsed over time) and writes two
figures: the total cost over time, and a 2x2 decomposition into the
localisation, missed, false, and switch components.  Input files are never
modified.  Exit codes: 0 all figures written, 1 runtime failure, 2 bad
schema or unreadable input.

Rendering is pinned for byte-stable output (see renderer.lock): fixed
backend, no embedded dates, fixed SVG id salt.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be set first

CURVE_COLUMNS = ["filter", "lscan", "k", "total", "loc", "missed", "false", "switch"]
SUMMARY_ROWS = ["Total", "Localisation", "Missed", "False", "Switch"]
PANELS = [
    ("loc", "Localisation"),
    ("missed", "Missed"),
    ("false", "False"),
    ("switch", "Switch"),
]

plt.rcParams["svg.hashsalt"] = "plots"


class SchemaError(Exception):
    """Input file violates the documented CSV schema; maps to exit 2."""


def read_curves(path: str) -> dict[tuple[str, int], dict[str, list[float]]]:
    """Parse curves.csv into {(filter, lscan): column -> values} groups.

    Groups keep file order; steps must be contiguous from 1 within each
    group.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CURVE_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        groups: dict[tuple[str, int], dict[str, list[float]]] = {}
        for line, row in enumerate(reader, start=2):
            try:
                key = (row["filter"], int(row["lscan"]))
                k = int(row["k"])
                values = {c: float(row[c]) for c in CURVE_COLUMNS[3:]}
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{line}: {exc}")
            group = groups.setdefault(key, {c: [] for c in CURVE_COLUMNS[2:]})
            if k != len(group["k"]) + 1:
                raise SchemaError(
                    f"{path}:{line}: steps of {key[0]} L{key[1]} are not "
                    f"contiguous from 1 (got k={k})"
                )
            group["k"].append(float(k))
            for c, v in values.items():
                group[c].append(v)
    if not groups:
        raise SchemaError(f"{path}: no curve rows")
    return groups


def read_summary(path: str) -> dict[str, list[float]]:
    """Parse summary.csv into {column label: five cost values}."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}")
    with fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["cost"] or len(rows[0]) < 2:
        raise SchemaError(f"{path}: expected header 'cost,<filter columns>'")
    labels = [row[0] for row in rows[1:]]
    if labels != SUMMARY_ROWS:
        raise SchemaError(
            f"{path}: expected rows {SUMMARY_ROWS}, got {labels}"
        )
    table = {}
    for col, name in enumerate(rows[0][1:], start=1):
        try:
            table[name] = [float(row[col]) for row in rows[1:]]
        except (IndexError, ValueError) as exc:
            raise SchemaError(f"{path}: column '{name}': {exc}")
    return table


def _label(key: tuple[str, int]) -> str:
    return f"{key[0]} L{key[1]}"


def check_consistency(groups, summary) -> None:
    """Warn about filters present in one file but not the other."""
    curve_labels = {_label(k) for k in groups}
    for name in summary:
        if name not in curve_labels:
            print(f"warning: skipping {name}: no curve rows", file=sys.stderr)
    for name in sorted(curve_labels - set(summary)):
        print(f"warning: {name} has curves but no summary column", file=sys.stderr)


def build_total_figure(groups) -> plt.Figure:
    """Total RMS cost over time, one line per filter/L-scan pair."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for key, data in groups.items():
        ax.plot(data["k"], data["total"], label=_label(key), linewidth=1.5)
    ax.set_xlabel("time step")
    ax.set_ylabel("RMS cost")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def build_decomposition_figure(groups) -> plt.Figure:
    """2x2 panels of the four cost components over time."""
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 7.0), sharex=True)
    for (column, title), ax in zip(PANELS, axes.ravel()):
        for key, data in groups.items():
            ax.plot(data["k"], data[column], label=_label(key), linewidth=1.2)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("time step")
    for ax in axes[:, 0]:
        ax.set_ylabel("RMS cost")
    handles, labels = axes[0, 0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncol=min(len(labels), 4))
    fig.tight_layout(rect=(0.0, 0.06, 1.0, 1.0))
    return fig


def _save(fig: plt.Figure, path: Path, image_format: str) -> None:
    # Date=None keeps SVG output byte-stable; PNG embeds no timestamp
    metadata = {"Date": None} if image_format == "svg" else None
    fig.savefig(path, format=image_format, metadata=metadata)
    plt.close(fig)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots.py", description="Render tracking result figures from CSVs."
    )
    parser.add_argument("--curves", required=True, help="curves.csv path")
    parser.add_argument("--summary", required=True, help="summary.csv path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--format", choices=["png", "svg"], default="png")
    args = parser.parse_args(argv)

    try:
        groups = read_curves(args.curves)
        summary = read_summary(args.summary)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2

    try:
        check_consistency(groups, summary)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        total_path = out_dir / f"total.{args.format}"
        decomp_path = out_dir / f"decomposition.{args.format}"
        _save(build_total_figure(groups), total_path, args.format)
        _save(build_decomposition_figure(groups), decomp_path, args.format)
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    for path in (total_path, decomp_path):
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

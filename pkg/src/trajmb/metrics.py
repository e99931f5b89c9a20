"""Trajectory-set error metric with a four-way cost decomposition.

The metric scores a set of estimated trajectories against the truth by
solving, at every time step, a minimum-cost partial assignment between the
alive estimated and true positions (cutoff c, base cost the squared
Euclidean distance capped at c^2) and accumulating four squared cost parts:

* localisation: capped squared distances of the assigned pairs,
* missed / false: c^2/2 per unassigned truth / estimate,
* switch: penalty per truth whose assigned estimate label changes between
  consecutive steps, half-weighted when the assignment appears or vanishes.

This is the standard per-step optimal-assignment approximation of a full
trajectory metric: assignments are chosen per step, not jointly over the
whole window, which keeps the evaluation exact-per-step and cheap.  The
evaluation at step k is normalised by k (online convention), so a single
persistent miss costs c/sqrt(2) regardless of horizon.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class MetricConfig:
    """Metric parameters.

    Args:
        order: exponent p of the base cost (2 gives the squared form the
            decomposition identity assumes).
        cutoff: assignment cutoff c; also sets the missed/false unit cost.
        switch_penalty: per-change track-switch penalty.
    """

    order: float = 2.0
    cutoff: float = 10.0
    switch_penalty: float = 1.0

    def __post_init__(self):
        if self.order < 1.0:
            raise ValueError("order must be >= 1")
        if self.cutoff <= 0.0:
            raise ValueError("cutoff must be positive")
        if self.switch_penalty < 0.0:
            raise ValueError("switch penalty must be nonnegative")


@dataclass
class LabeledTrajectory:
    """One labelled trajectory: alive over consecutive steps from t_start.

    ``states`` rows may be full states [px, vx, py, vy] or bare positions
    [px, py]; positions are extracted accordingly.
    """

    label: object
    t_start: int
    states: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[1] not in (2, 4):
            raise ValueError("states must have 2 (position) or 4 (full) columns")

    @property
    def end_time(self) -> int:
        return self.t_start + self.states.shape[0] - 1

    def position_at(self, step: int) -> np.ndarray | None:
        """Planar position at a step, or None when not alive there."""
        if not self.t_start <= step <= self.end_time:
            return None
        row = self.states[step - self.t_start]
        return row[[0, 2]] if row.shape[0] == 4 else row[:2]


@dataclass
class LabeledTrajectorySet:
    """A set of labelled trajectories with unique labels."""

    trajectories: list[LabeledTrajectory]

    def __post_init__(self):
        labels = [t.label for t in self.trajectories]
        if len(set(labels)) != len(labels):
            raise ValueError("trajectory labels must be unique")

    def alive_at(self, step: int) -> tuple[list, np.ndarray]:
        """Labels and positions of the trajectories alive at a step."""
        labels, positions = [], []
        for t in self.trajectories:
            pos = t.position_at(step)
            if pos is not None:
                labels.append(t.label)
                positions.append(pos)
        if not positions:
            return [], np.zeros((0, 2))
        return labels, np.vstack(positions)

    @property
    def max_end_time(self) -> int:
        return max((t.end_time for t in self.trajectories), default=0)


@dataclass
class MetricResult:
    """Decomposed metric at one evaluation time; total^2 is the sum of the
    squared components."""

    total: float
    localisation: float
    missed: float
    false_cost: float
    switch: float


def assign_step(
    est_points: np.ndarray, truth_points: np.ndarray, cfg: MetricConfig
) -> tuple[list[tuple[int, int]], list[float]]:
    """Minimum-cost partial assignment between point sets at one step.

    Args:
        est_points: estimated positions, shape (E, 2).
        truth_points: true positions, shape (T, 2).
        cfg: metric configuration.

    Returns:
        (pairs, costs): pairs of (truth_index, est_index) whose distance is
        strictly below the cutoff, and their base costs min(d, c)^p.
    """
    est_points = np.asarray(est_points, dtype=float).reshape(-1, 2)
    truth_points = np.asarray(truth_points, dtype=float).reshape(-1, 2)
    if est_points.shape[0] == 0 or truth_points.shape[0] == 0:
        return [], []
    dists = np.linalg.norm(truth_points[:, None, :] - est_points[None, :, :], axis=2)
    costs = np.minimum(dists, cfg.cutoff) ** cfg.order
    rows, cols = linear_sum_assignment(costs)
    pairs, pair_costs = [], []
    for ti, ei in zip(rows, cols):
        if dists[ti, ei] < cfg.cutoff:
            pairs.append((int(ti), int(ei)))
            pair_costs.append(float(costs[ti, ei]))
    return pairs, pair_costs


def step_cost_breakdown(
    est: LabeledTrajectorySet, truth: LabeledTrajectorySet, k: int, cfg: MetricConfig
) -> np.ndarray:
    """Per-step cost parts [localisation, missed, false, switch] up to k.

    Returns the raw (unnormalised) additive costs, shape (k, 4); rows sum
    over steps to the squared online metric.
    """
    if k < 1:
        raise ValueError("evaluation time must be at least 1")
    if est.max_end_time > k:
        raise ValueError(
            f"estimate extends to step {est.max_end_time}, beyond evaluation time {k}"
        )
    unit = cfg.cutoff**cfg.order
    switch_unit = cfg.switch_penalty**cfg.order
    breakdown = np.zeros((k, 4))
    prev_assign: dict = {}
    prev_labels: set = set()
    for s in range(1, k + 1):
        t_labels, t_pos = truth.alive_at(s)
        e_labels, e_pos = est.alive_at(s)
        pairs, pair_costs = assign_step(e_pos, t_pos, cfg)
        assign = {t_labels[ti]: e_labels[ei] for ti, ei in pairs}
        breakdown[s - 1, 0] = sum(pair_costs)
        breakdown[s - 1, 1] = 0.5 * unit * (len(t_labels) - len(pairs))
        breakdown[s - 1, 2] = 0.5 * unit * (len(e_labels) - len(pairs))
        changes = 0.0
        for label in set(t_labels) & prev_labels:
            before = prev_assign.get(label)
            now = assign.get(label)
            if before is not None and now is not None and before != now:
                changes += 1.0
            elif (before is None) != (now is None):
                changes += 0.5
        breakdown[s - 1, 3] = switch_unit * changes
        prev_assign = assign
        prev_labels = set(t_labels)
    return breakdown


def evaluate(
    est: LabeledTrajectorySet, truth: LabeledTrajectorySet, k: int, cfg: MetricConfig
) -> MetricResult:
    """Online metric at time k, normalised by k.

    The components satisfy total^p = localisation^p + missed^p + false^p +
    switch^p; identical sets score zero everywhere.
    """
    parts = step_cost_breakdown(est, truth, k, cfg).sum(axis=0) / k
    components = parts ** (1.0 / cfg.order)
    return MetricResult(
        total=float(parts.sum() ** (1.0 / cfg.order)),
        localisation=float(components[0]),
        missed=float(components[1]),
        false_cost=float(components[2]),
        switch=float(components[3]),
    )


def truncate_to(tset: LabeledTrajectorySet, k: int) -> LabeledTrajectorySet:
    """Restrict a trajectory set to steps <= k.

    Offline re-scoring view: a stored full-length estimate becomes the
    snapshot an online tracker would have reported at step k.
    """
    kept = []
    for t in tset.trajectories:
        if t.t_start > k:
            continue
        n = min(t.states.shape[0], k - t.t_start + 1)
        kept.append(LabeledTrajectory(t.label, t.t_start, t.states[:n]))
    return LabeledTrajectorySet(kept)


def rms_over_runs(totals: np.ndarray) -> np.ndarray:
    """Per-step RMS cost over Monte-Carlo runs.

    Args:
        totals: raw (unnormalised) per-run online totals, shape (N, T);
            entry [i, k-1] is the metric between truth and the estimate of
            run i at step k before the online 1/k normalisation.

    Returns:
        Curve of length T: sqrt(sum_i totals[i,k]^2 / (N * k)); for a single
        run this reproduces the normalised per-step evaluation.
    """
    totals = np.atleast_2d(np.asarray(totals, dtype=float))
    if totals.size == 0:
        raise ValueError("no run results supplied")
    n_runs, n_steps = totals.shape
    steps = np.arange(1, n_steps + 1)
    return np.sqrt(np.sum(totals**2, axis=0) / (n_runs * steps))


def rms_over_time(curve: np.ndarray) -> float:
    """Collapse a per-step cost curve to a scalar: sqrt(mean of squares)."""
    curve = np.asarray(curve, dtype=float)
    if curve.size == 0:
        raise ValueError("empty cost curve")
    return float(np.sqrt(np.mean(curve**2)))


# --------------------------------------------------------------------------
# trajectory-set and metric file formats
# --------------------------------------------------------------------------


def trajectories_to_records(tset: LabeledTrajectorySet) -> list[dict]:
    """JSON-ready records [{label, t_start, states}, ...]."""
    return [
        {"label": t.label, "t_start": int(t.t_start), "states": t.states.tolist()}
        for t in tset.trajectories
    ]


def trajectories_from_records(records: list[dict]) -> LabeledTrajectorySet:
    return LabeledTrajectorySet(
        [
            LabeledTrajectory(r["label"], int(r["t_start"]), np.asarray(r["states"]))
            for r in records
        ]
    )


def load_trajectories(path) -> LabeledTrajectorySet:
    """Read a trajectory set from a JSON file of {label, t_start, states}."""
    with open(path, "r", encoding="utf-8") as fh:
        return trajectories_from_records(json.load(fh))


def save_trajectories(tset: LabeledTrajectorySet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trajectories_to_records(tset), fh)


def write_metric_csv(results: list[MetricResult], path) -> None:
    """Per-step metric CSV with columns k,total,localisation,missed,false,switch."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "total", "localisation", "missed", "false", "switch"])
        for k, res in enumerate(results, start=1):
            writer.writerow(
                [k]
                + [
                    format(v, ".12g")
                    for v in (res.total, res.localisation, res.missed, res.false_cost, res.switch)
                ]
            )

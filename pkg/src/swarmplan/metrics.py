"""Evaluation metrics, parameter sweeps, and trend fitting.

A sweep varies one parameter (UAV count, area surface, or GPS error),
generates ``runs_per_point`` scenarios per value with seeds derived
deterministically from (base seed, value index, run index), executes the
configured mode, and aggregates per-run metrics. Failed runs are kept as
incomplete rows, excluded from means, and counted.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Scenario, extra_distance
from .generate import GenerationExhaustedError, GenSpec, generate_scenario
from .planner import ScenarioInfeasibleError, SeparationMode
from .sim import ChStrategy, MissionLog, count_overlap_events, run_baseline, run_mission

WORKERS_ENV_VAR = "SWARMPLAN_WORKERS"

AGGREGATED_FIELDS = (
    "pair_slot_collisions",
    "distinct_pair_collisions",
    "mean_extra_distance",
    "total_extra_distance",
    "total_planning_time",
)


class MismatchedLogError(ValueError):
    """Log does not belong to the given scenario."""


class InsufficientPointsError(ValueError):
    """Not enough points for the requested trend model."""


class SweptParam(Enum):
    NUM_UAVS = "uavs"
    AREA_SURFACE = "area"
    GPS_ERROR = "gps-error"


class TrendModel(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass
class RunMetrics:
    pair_slot_collisions: int
    distinct_pair_collisions: int
    mean_extra_distance: float
    total_extra_distance: float
    total_planning_time: float
    completed: bool


@dataclass
class SweepSpec:
    """One swept parameter over fixed defaults; mode None means baseline."""

    swept_param: SweptParam
    values: list[float]
    runs_per_point: int = 30
    mode: SeparationMode | None = None
    base_seed: int = 0
    num_uavs: int = 10
    area_surface: float = 10_000.0
    gps_error: float = 5.0
    dt: float = 1.0
    num_slots: int = 20
    v_max: float = 15.0
    endpoint_separation: bool = True
    strategy: ChStrategy = ChStrategy.MAX_ENERGY

    def __post_init__(self):
        if not self.values:
            raise ValueError("values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"values must be strictly increasing, got {self.values}")
        if self.runs_per_point < 1:
            raise ValueError("runs_per_point must be >= 1")

    def gen_spec(self, value: float, seed: int) -> GenSpec:
        num_uavs, area, gps = self.num_uavs, self.area_surface, self.gps_error
        if self.swept_param is SweptParam.NUM_UAVS:
            num_uavs = int(value)
        elif self.swept_param is SweptParam.AREA_SURFACE:
            area = value
        else:
            gps = value
        return GenSpec(
            num_uavs=num_uavs,
            area_surface=area,
            gps_error=gps,
            v_max=self.v_max,
            dt=self.dt,
            num_slots=self.num_slots,
            seed=seed,
            separate_endpoints=self.endpoint_separation,
        )


@dataclass
class RunRow:
    value_index: int
    value: float
    run_index: int
    metrics: RunMetrics | None = None
    error: str | None = None


@dataclass
class ValueAggregate:
    value: float
    runs: int
    completed_runs: int
    failed_runs: int
    means: dict[str, float]
    stds: dict[str, float]


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[RunRow]
    aggregates: list[ValueAggregate] = field(default_factory=list)


def measure(log: MissionLog, scenario: Scenario) -> RunMetrics:
    """Collision counts, extra distance, and planning time for one run."""
    if not log.states or len(log.states[0]) != scenario.num_uavs:
        raise MismatchedLogError("log swarm size does not match the scenario")
    if log.num_slots_logged > scenario.num_slots:
        raise MismatchedLogError("log has more slots than the scenario")
    pair_slot, distinct = count_overlap_events(log)
    if log.completed:
        extras = [
            extra_distance(traj, scenario.uavs[traj.uav_id])
            for traj in log.trajectories(scenario.dt)
        ]
        mean_extra = float(np.mean(extras))
        total_extra = float(np.sum(extras))
    else:
        mean_extra = math.nan
        total_extra = math.nan
    return RunMetrics(
        pair_slot_collisions=pair_slot,
        distinct_pair_collisions=distinct,
        mean_extra_distance=mean_extra,
        total_extra_distance=total_extra,
        total_planning_time=float(sum(log.planning_times)),
        completed=log.completed,
    )


def _run_seed(base_seed: int, value_index: int, run_index: int) -> int:
    return int(np.random.SeedSequence([base_seed, value_index, run_index]).generate_state(1)[0])


def _execute_run(spec: SweepSpec, value_index: int, value: float, run_index: int) -> RunRow:
    seed = _run_seed(spec.base_seed, value_index, run_index)
    try:
        scenario = generate_scenario(spec.gen_spec(value, seed))
    except GenerationExhaustedError as exc:
        return RunRow(value_index, value, run_index, error=f"generation_exhausted: {exc}")
    rng = np.random.default_rng([seed, 1])
    try:
        if spec.mode is None:
            log = run_baseline(scenario, rng)
        else:
            log = run_mission(scenario, spec.mode, spec.strategy, rng)
    except ScenarioInfeasibleError as exc:
        return RunRow(value_index, value, run_index, error=f"scenario_infeasible: {exc}")
    return RunRow(value_index, value, run_index, metrics=measure(log, scenario))


def _metric_value(metrics: RunMetrics, name: str) -> float:
    return float(getattr(metrics, name))


def aggregate_rows(rows: list[RunRow]) -> list[ValueAggregate]:
    """Per-value means / sample stds over the completed rows."""
    by_value: dict[int, list[RunRow]] = {}
    for row in rows:
        by_value.setdefault(row.value_index, []).append(row)
    aggregates = []
    for value_index in sorted(by_value):
        # Summation order is pinned so aggregates are independent of the
        # order the runs executed in.
        group = sorted(by_value[value_index], key=lambda r: r.run_index)
        done = [r.metrics for r in group if r.metrics is not None and r.metrics.completed]
        means, stds = {}, {}
        for name in AGGREGATED_FIELDS:
            if done:
                samples = np.array([_metric_value(m, name) for m in done])
                means[name] = float(samples.mean())
                stds[name] = float(samples.std(ddof=1)) if len(samples) > 1 else 0.0
            else:
                means[name] = math.nan
                stds[name] = math.nan
        aggregates.append(
            ValueAggregate(
                value=group[0].value,
                runs=len(group),
                completed_runs=len(done),
                failed_runs=len(group) - len(done),
                means=means,
                stds=stds,
            )
        )
    return aggregates


def sweep(spec: SweepSpec) -> SweepResult:
    """Run the full grid; parallelism is controlled by SWARMPLAN_WORKERS."""
    tasks = [
        (vi, value, ri)
        for vi, value in enumerate(spec.values)
        for ri in range(spec.runs_per_point)
    ]
    workers = max(1, int(os.environ.get(WORKERS_ENV_VAR, "1")))
    if workers == 1:
        rows = [_execute_run(spec, vi, value, ri) for vi, value, ri in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: _execute_run(spec, *t), tasks))
    rows.sort(key=lambda r: (r.value_index, r.run_index))
    return SweepResult(spec=spec, rows=rows, aggregates=aggregate_rows(rows))


def fit_trend(xs, ys, model: TrendModel) -> tuple[tuple[float, ...], float]:
    """Least-squares polynomial fit; returns (leading-first coefficients, R^2)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise InsufficientPointsError("xs and ys must have the same length")
    degree = 1 if model is TrendModel.LINEAR else 2
    needed = degree + 2
    if len(xs) < needed:
        raise InsufficientPointsError(f"{model.value} fit needs >= {needed} points, got {len(xs)}")
    coeffs = np.polyfit(xs, ys, degree)
    residuals = ys - np.polyval(coeffs, xs)
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return tuple(float(c) for c in coeffs), r_squared

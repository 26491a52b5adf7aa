"""Scenario files and CSV serialization.

Scenario files are versioned JSON; floats are emitted with repr so the
round trip is lossless. All writers go through a temp-then-rename so
partially written files never appear under the final name.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .core import Scenario, Trajectory, UavSpec, Vec2
from .metrics import SweepResult
from .planner import ScenarioInfeasibleError

SCENARIO_FORMAT_VERSION = "1"

PLAN_CSV_HEADER = ["run_id", "uav_id", "slot", "x", "y", "vx", "vy"]
METRICS_CSV_HEADER = [
    "run_id",
    "swept_param",
    "value",
    "pair_slot_collisions",
    "distinct_pair_collisions",
    "mean_extra_distance",
    "total_planning_time_s",
    "completed",
]


class ScenarioFormatError(ValueError):
    """Scenario file is structurally invalid."""


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def scenario_to_json(scenario: Scenario) -> str:
    doc = {
        "version": SCENARIO_FORMAT_VERSION,
        "area_width": scenario.area_width,
        "area_height": scenario.area_height,
        "dt": scenario.dt,
        "num_slots": scenario.num_slots,
        "seed": scenario.seed,
        "uavs": [
            {
                "id": u.id,
                "start": [u.start.x, u.start.y],
                "goal": [u.goal.x, u.goal.y],
                "gps_error_radius": u.gps_error_radius,
                "v_max": u.v_max,
                "energy": u.energy,
                "compute_capacity": u.compute_capacity,
            }
            for u in scenario.uavs
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def write_scenario(scenario: Scenario, path: str | Path) -> None:
    atomic_write_text(path, scenario_to_json(scenario))


def scenario_from_json(text: str, require_separation: bool = True) -> Scenario:
    """Parse and check a scenario document.

    Structural problems raise ScenarioFormatError; violated geometric
    invariants raise ScenarioInfeasibleError. Separation checks can be
    waived for baseline-replication scenarios generated without endpoint
    separation.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")
    if doc.get("version") != SCENARIO_FORMAT_VERSION:
        raise ScenarioFormatError(
            f"unsupported scenario version {doc.get('version')!r}, expected {SCENARIO_FORMAT_VERSION!r}"
        )
    try:
        uavs = [
            UavSpec(
                id=int(u["id"]),
                start=Vec2(*u["start"]),
                goal=Vec2(*u["goal"]),
                gps_error_radius=float(u["gps_error_radius"]),
                v_max=float(u["v_max"]),
                energy=float(u["energy"]),
                compute_capacity=float(u["compute_capacity"]),
            )
            for u in doc["uavs"]
        ]
        scenario = Scenario(
            area_width=float(doc["area_width"]),
            area_height=float(doc["area_height"]),
            dt=float(doc["dt"]),
            num_slots=int(doc["num_slots"]),
            uavs=uavs,
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"malformed scenario: {exc}") from exc
    violations = scenario.validate(require_separation=require_separation)
    if violations:
        raise ScenarioInfeasibleError("; ".join(violations))
    return scenario


def load_scenario(path: str | Path, require_separation: bool = True) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read {path}: {exc}") from exc
    return scenario_from_json(text, require_separation=require_separation)


def trajectories_to_csv(trajectories: list[Trajectory], run_id: int = 0) -> str:
    """Fixed 6-decimal trajectory rows; slot-0 velocity is written as zero."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PLAN_CSV_HEADER)
    for traj in trajectories:
        for slot, pos in enumerate(traj.positions):
            vel = traj.velocities[slot - 1] if slot > 0 else Vec2(0.0, 0.0)
            writer.writerow(
                [run_id, traj.uav_id, slot]
                + [f"{value:.6f}" for value in (pos.x, pos.y, vel.x, vel.y)]
            )
    return buf.getvalue()


def write_plan_csv(trajectories: list[Trajectory], path: str | Path, run_id: int = 0) -> None:
    atomic_write_text(path, trajectories_to_csv(trajectories, run_id))


@dataclass
class PlanRow:
    run_id: int
    uav_id: int
    slot: int
    x: float
    y: float
    vx: float
    vy: float


def read_plan_csv(path: str | Path) -> list[PlanRow]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != PLAN_CSV_HEADER:
            raise ScenarioFormatError(f"unexpected plan CSV header {header}")
        return [
            PlanRow(int(r[0]), int(r[1]), int(r[2]), float(r[3]), float(r[4]), float(r[5]), float(r[6]))
            for r in reader
        ]


def _fmt(value: float) -> str:
    return repr(float(value))


def sweep_to_csv(result: SweepResult) -> str:
    """Raw per-run rows followed by one mean row per swept value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_CSV_HEADER)
    param = result.spec.swept_param.value
    for run_id, row in enumerate(result.rows):
        if row.metrics is None:
            cells = ["nan", "nan", "nan", "nan", "false"]
        else:
            m = row.metrics
            cells = [
                str(m.pair_slot_collisions),
                str(m.distinct_pair_collisions),
                _fmt(m.mean_extra_distance),
                _fmt(m.total_planning_time),
                "true" if m.completed else "false",
            ]
        writer.writerow([str(run_id), param, _fmt(row.value)] + cells)
    for agg in result.aggregates:
        writer.writerow(
            [
                "mean",
                param,
                _fmt(agg.value),
                _fmt(agg.means["pair_slot_collisions"]),
                _fmt(agg.means["distinct_pair_collisions"]),
                _fmt(agg.means["mean_extra_distance"]),
                _fmt(agg.means["total_planning_time"]),
                str(agg.completed_runs),
            ]
        )
    return buf.getvalue()


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    atomic_write_text(path, sweep_to_csv(result))


@dataclass
class MetricsRow:
    run_id: int
    swept_param: str
    value: float
    pair_slot_collisions: float
    distinct_pair_collisions: float
    mean_extra_distance: float
    total_planning_time_s: float
    completed: bool


@dataclass
class MetricsAggregateRow:
    swept_param: str
    value: float
    pair_slot_collisions: float
    distinct_pair_collisions: float
    mean_extra_distance: float
    total_planning_time_s: float
    completed_runs: int


def read_sweep_csv(path: str | Path) -> tuple[list[MetricsRow], list[MetricsAggregateRow]]:
    raw: list[MetricsRow] = []
    aggregates: list[MetricsAggregateRow] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != METRICS_CSV_HEADER:
            raise ScenarioFormatError(f"unexpected metrics CSV header {header}")
        for r in reader:
            if r[0] == "mean":
                aggregates.append(
                    MetricsAggregateRow(
                        swept_param=r[1],
                        value=float(r[2]),
                        pair_slot_collisions=float(r[3]),
                        distinct_pair_collisions=float(r[4]),
                        mean_extra_distance=float(r[5]),
                        total_planning_time_s=float(r[6]),
                        completed_runs=int(r[7]),
                    )
                )
            else:
                raw.append(
                    MetricsRow(
                        run_id=int(r[0]),
                        swept_param=r[1],
                        value=float(r[2]),
                        pair_slot_collisions=float(r[3]),
                        distinct_pair_collisions=float(r[4]),
                        mean_extra_distance=float(r[5]),
                        total_planning_time_s=float(r[6]),
                        completed=r[7] == "true",
                    )
                )
    return raw, aggregates

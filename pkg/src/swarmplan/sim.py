"""Time-slotted mission execution with cluster-head replanning.

Each slot, the elected cluster head replans the swarm from the current
GPS-reported positions and commands every UAV its next position. The
commanded/reported path is deterministic given the scenario; the true
position is an independent uniform draw inside the GPS error disc around
the reported position each slot, and is logged for diagnostics only.
Overlap events are detected on the reported discs with the full GPS radii.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import qp
from .core import Scenario, SwarmPlan, Trajectory, UavSpec, Vec2, sample_true_position
from .planner import (
    PlanRequest,
    ScenarioInfeasibleError,
    ScpSettings,
    SeparationMode,
    SolverFailureError,
    plan,
    straight_line_reference,
)


class ChStrategy(Enum):
    MAX_ENERGY = "max-energy"
    MIN_RESPONSE_TIME = "min-response"


class EmptySwarmError(ValueError):
    """Cluster-head election over an empty UAV list."""


@dataclass
class UavState:
    reported_pos: Vec2
    true_pos: Vec2
    velocity: Vec2
    slot: int


@dataclass
class MissionLog:
    """Everything recorded during one mission run.

    ``states[t]`` holds one UavState per UAV at slot t. ``plans`` keeps the
    per-slot planner outputs so their verification can be re-checked after
    the fact; wall times exclude everything but model build + solve.
    """

    states: list[list[UavState]] = field(default_factory=list)
    planning_times: list[float] = field(default_factory=list)
    overlap_events: list[tuple[int, tuple[int, int]]] = field(default_factory=list)
    cluster_head: int = 0
    completed: bool = False
    plans: list[SwarmPlan] = field(default_factory=list)
    failure: str | None = None

    @property
    def num_slots_logged(self) -> int:
        return len(self.states) - 1

    def trajectories(self, dt: float) -> list[Trajectory]:
        """Executed (reported-frame) trajectory of each UAV."""
        num_uavs = len(self.states[0])
        result = []
        for k in range(num_uavs):
            positions = [snapshot[k].reported_pos for snapshot in self.states]
            velocities = [
                (positions[i] - positions[i - 1]).scaled(1.0 / dt)
                for i in range(1, len(positions))
            ]
            result.append(Trajectory(uav_id=k, positions=positions, velocities=velocities))
        return result


def elect_cluster_head(uavs: list[UavSpec], strategy: ChStrategy) -> int:
    """Max energy or max compute capacity; ties broken by lowest id."""
    if not uavs:
        raise EmptySwarmError("cannot elect a cluster head from an empty swarm")
    if strategy is ChStrategy.MAX_ENERGY:
        key = lambda u: u.energy
    else:
        key = lambda u: u.compute_capacity
    best = uavs[0]
    for u in uavs[1:]:
        if key(u) > key(best):
            best = u
    return best.id


def _record_slot(
    log: MissionLog,
    slot: int,
    reported: list[Vec2],
    velocities: list[Vec2],
    scenario: Scenario,
    rng: np.random.Generator,
) -> None:
    states = []
    for k, u in enumerate(scenario.uavs):
        true_pos = sample_true_position(reported[k], u.gps_error_radius, rng)
        states.append(UavState(reported_pos=reported[k], true_pos=true_pos, velocity=velocities[k], slot=slot))
    log.states.append(states)
    for k in range(scenario.num_uavs):
        for l in range(k + 1, scenario.num_uavs):
            safety = scenario.uavs[k].gps_error_radius + scenario.uavs[l].gps_error_radius
            if reported[k].dist(reported[l]) < safety:
                log.overlap_events.append((slot, (k, l)))


def run_mission(
    scenario: Scenario,
    mode: SeparationMode,
    strategy: ChStrategy,
    rng: np.random.Generator,
    receding_window: int | None = None,
    safety_margin: float = 1e-3,
    scp: ScpSettings | None = None,
    qp_settings: qp.QpSettings | None = None,
    eps_goal: float = 0.5,
) -> MissionLog:
    """Replan every slot from the reported state until the final slot.

    Collision avoidance is only guaranteed for the signed-L1 and SCP
    encodings; literal-mode missions run the same loop without it. A
    planner failure mid-mission returns the partial log with
    ``completed`` False instead of raising.
    """
    violations = scenario.validate(require_separation=True)
    if violations:
        raise ScenarioInfeasibleError("; ".join(violations))

    log = MissionLog(cluster_head=elect_cluster_head(scenario.uavs, strategy))
    zero = Vec2(0.0, 0.0)
    reported = [u.start for u in scenario.uavs]
    _record_slot(log, 0, reported, [zero] * scenario.num_uavs, scenario, rng)

    carried_reference: SwarmPlan | None = None
    for t in range(scenario.num_slots):
        request = PlanRequest(
            scenario=scenario,
            mode=mode,
            start_slot=t,
            current_positions=reported,
            receding_window=receding_window,
            safety_margin=safety_margin,
        )
        t_plan = time.perf_counter()
        try:
            step_plan = plan(request, scp, qp_settings, initial_reference=carried_reference)
        except ScenarioInfeasibleError as exc:
            log.failure = f"scenario_infeasible at slot {t}: {exc}"
            return log
        except SolverFailureError as exc:
            log.failure = f"solver_failure at slot {t}: {exc}"
            return log
        log.planning_times.append(time.perf_counter() - t_plan)
        log.plans.append(step_plan)

        commanded = [traj.positions[1] for traj in step_plan.trajectories]
        velocities = [
            (commanded[k] - reported[k]).scaled(1.0 / scenario.dt)
            for k in range(scenario.num_uavs)
        ]
        reported = commanded
        _record_slot(log, t + 1, reported, velocities, scenario, rng)
        if mode is SeparationMode.SCP and receding_window is None and t + 1 < scenario.num_slots:
            # The shifted tail of this plan seeds the next slot's SCP
            # iteration: it is already separated, so it converges fast.
            carried_reference = SwarmPlan(
                trajectories=[
                    Trajectory(
                        uav_id=traj.uav_id,
                        positions=traj.positions[1:],
                        velocities=traj.velocities[1:],
                    )
                    for traj in step_plan.trajectories
                ]
            )

    log.completed = all(
        reported[k].dist(u.goal) <= eps_goal for k, u in enumerate(scenario.uavs)
    )
    return log


def run_baseline(scenario: Scenario, rng: np.random.Generator) -> MissionLog:
    """Straight-line mission with avoidance disabled; no planner involved."""
    log = MissionLog(cluster_head=elect_cluster_head(scenario.uavs, ChStrategy.MAX_ENERGY))
    reference = straight_line_reference(scenario)
    zero = Vec2(0.0, 0.0)
    for t in range(scenario.num_slots + 1):
        reported = [traj.positions[t] for traj in reference.trajectories]
        velocities = (
            [zero] * scenario.num_uavs
            if t == 0
            else [traj.velocities[t - 1] for traj in reference.trajectories]
        )
        _record_slot(log, t, reported, velocities, scenario, rng)
        log.planning_times.append(0.0)
    log.completed = True
    return log


def count_overlap_events(log: MissionLog) -> tuple[int, int]:
    """(pair-slot events, distinct overlapping pairs) from the log."""
    return len(log.overlap_events), len({pair for _, pair in log.overlap_events})

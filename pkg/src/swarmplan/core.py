"""Planar geometry, kinematics, and the shared swarm domain types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class CoincidentPointsError(ValueError):
    """Bearing requested from a point to itself."""


class EndpointMismatchError(ValueError):
    """Trajectory does not start/terminate at the UAV's start/goal."""


@dataclass(frozen=True)
class Vec2:
    """Planar point or vector, components in meters."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, c: float) -> Vec2:
        return Vec2(self.x * c, self.y * c)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, other: Vec2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class UavSpec:
    """Static description of one UAV: endpoints, GPS error disc, limits."""

    id: int
    start: Vec2
    goal: Vec2
    gps_error_radius: float
    v_max: float
    energy: float = 0.0
    compute_capacity: float = 1.0

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"uav id must be non-negative, got {self.id}")
        if not self.gps_error_radius > 0:
            raise ValueError(f"gps_error_radius must be > 0, got {self.gps_error_radius}")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be > 0, got {self.v_max}")
        if self.energy < 0:
            raise ValueError(f"energy must be >= 0, got {self.energy}")
        if not self.compute_capacity > 0:
            raise ValueError(f"compute_capacity must be > 0, got {self.compute_capacity}")


@dataclass(frozen=True)
class SafetyDisc:
    """Disc of possible true locations around a reported position."""

    center: Vec2
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")


@dataclass
class Scenario:
    """Mission description: flight area, time slotting, and the swarm.

    Field-level invariants are enforced at construction; the geometric
    invariants (endpoints in-area, pairwise endpoint separation,
    reachability) are checked by :meth:`validate` so that deliberately
    infeasible scenarios can still be represented and surfaced by the
    consumers that require feasibility.
    """

    area_width: float
    area_height: float
    dt: float
    num_slots: int
    uavs: list[UavSpec]
    seed: int = 0

    def __post_init__(self):
        if not self.area_width > 0 or not self.area_height > 0:
            raise ValueError("area dimensions must be positive")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.num_slots < 1:
            raise ValueError(f"num_slots must be >= 1, got {self.num_slots}")
        if not self.uavs:
            raise ValueError("scenario needs at least one UAV")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        ids = [u.id for u in self.uavs]
        if ids != list(range(len(self.uavs))):
            raise ValueError(f"uav ids must be 0..K-1 in order, got {ids}")

    @property
    def num_uavs(self) -> int:
        return len(self.uavs)

    def validate(self, require_separation: bool = True) -> list[str]:
        """Return geometric invariant violations (empty list = valid)."""
        problems = []
        for u in self.uavs:
            for label, p in (("start", u.start), ("goal", u.goal)):
                if not (0 <= p.x <= self.area_width and 0 <= p.y <= self.area_height):
                    problems.append(f"uav {u.id} {label} ({p.x}, {p.y}) outside area")
            reach = u.v_max * self.num_slots * self.dt
            if u.start.dist(u.goal) > reach + 1e-9:
                problems.append(
                    f"uav {u.id} goal unreachable: needs {u.start.dist(u.goal):.3f} m, "
                    f"limit {reach:.3f} m"
                )
        if require_separation:
            for i in range(len(self.uavs)):
                for j in range(i + 1, len(self.uavs)):
                    a, b = self.uavs[i], self.uavs[j]
                    safety = a.gps_error_radius + b.gps_error_radius
                    if a.start.dist(b.start) <= safety:
                        problems.append(
                            f"uavs {a.id},{b.id} start separation "
                            f"{a.start.dist(b.start):.3f} <= safety {safety:.3f}"
                        )
                    if a.goal.dist(b.goal) <= safety:
                        problems.append(
                            f"uavs {a.id},{b.id} goal separation "
                            f"{a.goal.dist(b.goal):.3f} <= safety {safety:.3f}"
                        )
        return problems


@dataclass
class Trajectory:
    """Per-UAV position/velocity sequence over slots 0..F.

    positions[t] is the location at slot t; velocities[t-1] is the velocity
    applied during slot t, i.e. positions[t] = positions[t-1] + velocities[t-1]*dt.
    """

    uav_id: int
    positions: list[Vec2]
    velocities: list[Vec2]

    def __post_init__(self):
        if len(self.positions) != len(self.velocities) + 1:
            raise ValueError(
                f"need len(positions) == len(velocities) + 1, got "
                f"{len(self.positions)} and {len(self.velocities)}"
            )

    @property
    def num_slots(self) -> int:
        return len(self.velocities)

    def kinematics_residual(self, dt: float) -> float:
        """Worst |positions[t] - positions[t-1] - velocities[t-1]*dt| over slots."""
        worst = 0.0
        for t in range(1, len(self.positions)):
            p, prev, v = self.positions[t], self.positions[t - 1], self.velocities[t - 1]
            worst = max(worst, abs(p.x - prev.x - v.x * dt), abs(p.y - prev.y - v.y * dt))
        return worst


@dataclass
class SolverStats:
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    wall_time: float = 0.0
    outer_iterations: int = 1


@dataclass
class SwarmPlan:
    """Joint plan for the whole swarm plus solve diagnostics."""

    trajectories: list[Trajectory]
    objective_value: float = 0.0
    solver_stats: SolverStats = field(default_factory=SolverStats)

    @property
    def num_uavs(self) -> int:
        return len(self.trajectories)

    @property
    def num_slots(self) -> int:
        return self.trajectories[0].num_slots if self.trajectories else 0


def disc_overlap(a: SafetyDisc, b: SafetyDisc) -> bool:
    """True iff the two discs overlap; tangency counts as non-overlap."""
    return a.center.dist(b.center) < a.radius + b.radius


def heading_angle(v: Vec2) -> float:
    """Angle between the x-axis and v, in (-pi, pi]; 0 for the zero vector."""
    return math.atan2(v.y, v.x)


def bearing_to_goal(pos: Vec2, goal: Vec2) -> float:
    """Quadrant-aware angle of the vector pointing from pos to goal."""
    if pos.x == goal.x and pos.y == goal.y:
        raise CoincidentPointsError(f"position equals goal ({pos.x}, {pos.y})")
    return math.atan2(goal.y - pos.y, goal.x - pos.x)


def recover_polar(v: Vec2) -> tuple[float, float]:
    """Speed and heading of a velocity vector (zero vector maps to (0, 0))."""
    return (math.hypot(v.x, v.y), heading_angle(v))


def wrap_angle(delta: float) -> float:
    """Wrap an angle difference into [-pi, pi]."""
    return math.remainder(delta, math.tau)


def deviation_objective(traj: Trajectory, goal: Vec2) -> float:
    """Summed absolute deviation between per-slot heading and goal bearing.

    Differences are wrapped to [0, pi]; zero-velocity slots contribute 0.
    """
    total = 0.0
    for t in range(1, len(traj.positions)):
        v = traj.velocities[t - 1]
        if v.x == 0.0 and v.y == 0.0:
            continue
        bearing = bearing_to_goal(traj.positions[t - 1], goal)
        total += abs(wrap_angle(heading_angle(v) - bearing))
    return total


def sample_true_position(reported: Vec2, radius: float, rng: np.random.Generator) -> Vec2:
    """Uniform draw from the closed disc of given radius around reported."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, math.tau)
    return Vec2(reported.x + r * math.cos(theta), reported.y + r * math.sin(theta))


def traveled_distance(traj: Trajectory) -> float:
    """Total path length of the trajectory."""
    return sum(
        traj.positions[t].dist(traj.positions[t - 1]) for t in range(1, len(traj.positions))
    )


def extra_distance(traj: Trajectory, spec: UavSpec, eps: float = 1e-4) -> float:
    """Path length in excess of the straight start-to-goal distance."""
    if traj.positions[0].dist(spec.start) > eps:
        raise EndpointMismatchError(
            f"uav {spec.id} trajectory starts {traj.positions[0].dist(spec.start):.6f} m "
            f"from its start (tolerance {eps})"
        )
    if traj.positions[-1].dist(spec.goal) > eps:
        raise EndpointMismatchError(
            f"uav {spec.id} trajectory ends {traj.positions[-1].dist(spec.goal):.6f} m "
            f"from its goal (tolerance {eps})"
        )
    return traveled_distance(traj) - spec.start.dist(spec.goal)

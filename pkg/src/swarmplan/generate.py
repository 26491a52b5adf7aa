"""Random scenario generation by rejection sampling.

Endpoints are drawn from a normal distribution centered on the area
center (sigma = side/4 by default) and clipped to the area. Candidates
are rejected until pairwise start and goal separations exceed the summed
GPS radii and every goal is reachable within the mission; generation
fails loudly once the rejection budget is spent, which signals an
over-packed specification rather than looping forever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Scenario, UavSpec, Vec2

_REJECTION_BUDGET = 10_000

_ENERGY_RANGE = (1.0e3, 1.0e4)  # joules
_COMPUTE_RANGE = (1.0e8, 1.0e9)  # operations/second


class GenerationExhaustedError(RuntimeError):
    """Rejection budget spent: the spec is too dense for the area."""


@dataclass
class GenSpec:
    """Generator inputs; the area is square with side sqrt(area_surface)."""

    num_uavs: int
    area_surface: float
    gps_error: float
    v_max: float = 15.0
    dt: float = 1.0
    num_slots: int = 20
    seed: int = 0
    sigma_factor: float = 0.25
    separate_endpoints: bool = True

    def __post_init__(self):
        if self.num_uavs < 1:
            raise ValueError("num_uavs must be >= 1")
        for name in ("area_surface", "gps_error", "v_max", "dt", "sigma_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")

    @property
    def side(self) -> float:
        return math.sqrt(self.area_surface)


def _draw_point(rng: np.random.Generator, side: float, sigma: float) -> Vec2:
    x, y = np.clip(rng.normal(side / 2.0, sigma, size=2), 0.0, side)
    return Vec2(float(x), float(y))


def generate_scenario(spec: GenSpec) -> Scenario:
    """Deterministic for a fixed spec; raises GenerationExhaustedError when packing fails."""
    rng = np.random.default_rng(spec.seed)
    side = spec.side
    sigma = side * spec.sigma_factor
    reach = spec.v_max * spec.num_slots * spec.dt
    min_gap = 2.0 * spec.gps_error

    starts: list[Vec2] = []
    goals: list[Vec2] = []
    rejections = 0
    for _ in range(spec.num_uavs):
        while True:
            start = _draw_point(rng, side, sigma)
            if spec.separate_endpoints and any(start.dist(p) <= min_gap for p in starts):
                rejections += 1
                if rejections > _REJECTION_BUDGET:
                    raise GenerationExhaustedError(
                        f"{spec.num_uavs} UAVs with gps_error {spec.gps_error} m do not fit "
                        f"a {side:.0f} m square after {_REJECTION_BUDGET} rejections"
                    )
                continue
            break
        while True:
            goal = _draw_point(rng, side, sigma)
            bad_sep = spec.separate_endpoints and any(goal.dist(p) <= min_gap for p in goals)
            if bad_sep or start.dist(goal) > reach:
                rejections += 1
                if rejections > _REJECTION_BUDGET:
                    raise GenerationExhaustedError(
                        f"{spec.num_uavs} UAVs with gps_error {spec.gps_error} m do not fit "
                        f"a {side:.0f} m square after {_REJECTION_BUDGET} rejections"
                    )
                continue
            break
        starts.append(start)
        goals.append(goal)

    uavs = [
        UavSpec(
            id=k,
            start=starts[k],
            goal=goals[k],
            gps_error_radius=spec.gps_error,
            v_max=spec.v_max,
            energy=float(rng.uniform(*_ENERGY_RANGE)),
            compute_capacity=float(rng.uniform(*_COMPUTE_RANGE)),
        )
        for k in range(spec.num_uavs)
    ]
    return Scenario(
        area_width=side,
        area_height=side,
        dt=spec.dt,
        num_slots=spec.num_slots,
        uavs=uavs,
        seed=spec.seed,
    )

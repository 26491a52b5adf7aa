"""Swarm trajectory optimization: convex model construction and planning.

The decision variables are, per UAV k and planned step t in 1..T, the
positions X_k(t), Y_k(t) and the velocities V_kx(t), V_ky(t); the step-0
positions are data, folded into the linear cost and the first kinematics
rows. The objective is the summed squared inter-slot displacement. The
speed cap is a disc, inner-approximated by a regular polygon so the model
stays a QP with linear rows (a 16-gon keeps the approximation within
about 1.9 percent of the true limit, always on the conservative side).

Pairwise separation is encoded one of three ways:

* ``LITERAL``: auxiliary pair variables bounded above by +/- the
  coordinate differences plus fixed threshold rows. These rows never
  exclude any position assignment; ``literal_feasibility_probe`` makes
  that property testable.
* ``SIGNED_L1``: sx*(Xk-Xl) + sy*(Yk-Yl) >= sqrt(2)*(rk+rl+margin) with
  signs fixed from a reference plan. Since the signed sum is at most the
  L1 distance and L2 >= L1/sqrt(2), any feasible point keeps the centers
  at least rk+rl+margin apart.
* ``SCP``: supporting-halfspace linearization n'*(pk-pl) >= rk+rl+margin
  with n the unit reference displacement, iterated to a fixed point.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse

from . import qp
from .core import Scenario, SolverStats, SwarmPlan, Trajectory, Vec2

_ZERO_TOL = 1e-9
_VERIFY_EPS = 1e-4


class SeparationMode(Enum):
    LITERAL = "literal"
    SIGNED_L1 = "signed-l1"
    SCP = "scp"


class MissingReferenceError(ValueError):
    """Mode needs a reference plan and none was given."""


class DegenerateReferencePairError(ValueError):
    """Reference pair coincides and the fallback direction rule is disabled."""


class ScenarioInfeasibleError(RuntimeError):
    """No verified plan exists (or the scenario violates its invariants)."""


class SolverFailureError(RuntimeError):
    """The QP solver stopped without a usable answer (max iterations)."""


class DimensionMismatchError(ValueError):
    """Plan shape does not match the scenario."""


@dataclass(frozen=True)
class VariableLayout:
    """Flat index map for the QP variables.

    Steps are 1-based; step t corresponds to absolute slot start_slot + t.
    Each UAV owns a contiguous block of 4*steps variables (x, y, vx, vy
    sub-blocks); literal-mode auxiliary pair variables follow at the end.
    """

    num_uavs: int
    steps: int
    start_slot: int = 0
    aux_pairs: int = 0

    @property
    def nvars(self) -> int:
        return 4 * self.num_uavs * self.steps + 2 * self.aux_pairs * self.steps

    def px(self, k: int, step: int) -> int:
        return k * 4 * self.steps + (step - 1)

    def py(self, k: int, step: int) -> int:
        return k * 4 * self.steps + self.steps + (step - 1)

    def vx(self, k: int, step: int) -> int:
        return k * 4 * self.steps + 2 * self.steps + (step - 1)

    def vy(self, k: int, step: int) -> int:
        return k * 4 * self.steps + 3 * self.steps + (step - 1)

    def aux_x(self, rank: int, step: int) -> int:
        return 4 * self.num_uavs * self.steps + rank * 2 * self.steps + (step - 1)

    def aux_y(self, rank: int, step: int) -> int:
        return 4 * self.num_uavs * self.steps + rank * 2 * self.steps + self.steps + (step - 1)


@dataclass
class PlanRequest:
    """What to plan: scenario, separation encoding, horizon, and state."""

    scenario: Scenario
    mode: SeparationMode
    start_slot: int = 0
    current_positions: list[Vec2] | None = None
    receding_window: int | None = None
    safety_margin: float = 1e-3
    speed_polygon: int = 16

    def __post_init__(self):
        F = self.scenario.num_slots
        if not 0 <= self.start_slot < F:
            raise ValueError(f"start_slot {self.start_slot} not in [0, {F})")
        if self.current_positions is not None and len(self.current_positions) != self.scenario.num_uavs:
            raise ValueError("current_positions length must equal the number of UAVs")
        if self.receding_window is not None and self.receding_window < 1:
            raise ValueError("receding window must be >= 1")
        if self.speed_polygon < 3:
            raise ValueError("speed polygon needs at least 3 sides")

    @property
    def steps(self) -> int:
        remaining = self.scenario.num_slots - self.start_slot
        if self.receding_window is None:
            return remaining
        return min(self.receding_window, remaining)

    def start_positions(self) -> list[Vec2]:
        if self.current_positions is not None:
            return list(self.current_positions)
        if self.start_slot != 0:
            raise ValueError("current_positions required when start_slot > 0")
        return [u.start for u in self.scenario.uavs]


@dataclass
class ScpSettings:
    max_outer: int = 20
    convergence_tol: float = 1e-3
    degenerate_direction_rule: bool = True

    def __post_init__(self):
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")


@dataclass
class PlanVerification:
    """Four feasibility checks plus their worst-case slack values."""

    separation_ok: bool
    endpoints_ok: bool
    velocity_ok: bool
    kinematics_ok: bool
    min_separation_slack: float
    max_endpoint_error: float
    max_velocity_excess: float
    max_kinematics_residual: float

    @property
    def all_ok(self) -> bool:
        return self.separation_ok and self.endpoints_ok and self.velocity_ok and self.kinematics_ok


def straight_line_reference(scenario: Scenario) -> SwarmPlan:
    """Equal-step straight segments from every start to its goal."""
    return _straight_reference(scenario, 0, [u.start for u in scenario.uavs])


def _straight_reference(scenario: Scenario, start_slot: int, current: list[Vec2]) -> SwarmPlan:
    steps = scenario.num_slots - start_slot
    dt = scenario.dt
    trajectories = []
    objective = 0.0
    for k, u in enumerate(scenario.uavs):
        p0, goal = current[k], u.goal
        positions = [
            Vec2(p0.x + (goal.x - p0.x) * i / steps, p0.y + (goal.y - p0.y) * i / steps)
            for i in range(steps + 1)
        ]
        velocities = [
            (positions[i] - positions[i - 1]).scaled(1.0 / dt) for i in range(1, steps + 1)
        ]
        trajectories.append(Trajectory(uav_id=u.id, positions=positions, velocities=velocities))
        objective += sum(
            positions[i].dist(positions[i - 1]) ** 2 for i in range(1, steps + 1)
        )
    return SwarmPlan(trajectories=trajectories, objective_value=objective)


def _pairs(num_uavs: int) -> list[tuple[int, int]]:
    return [(k, l) for k in range(num_uavs) for l in range(k + 1, num_uavs)]


def _sign_chain(*candidates: float) -> float:
    """First clearly non-zero candidate decides the sign; defaults to +1."""
    for c in candidates:
        if abs(c) > _ZERO_TOL:
            return 1.0 if c > 0 else -1.0
    return 1.0


def build_model(
    request: PlanRequest,
    reference: SwarmPlan | None = None,
    degenerate_rule: bool = True,
) -> tuple[qp.QpProblem, VariableLayout]:
    """Assemble the QP for the requested horizon and separation mode.

    ``reference`` supplies, for the signed-L1 and SCP encodings, the pair
    displacement at every planned step (its positions[i] must correspond
    to absolute slot start_slot + i).
    """
    sc = request.scenario
    K, F, dt = sc.num_uavs, sc.num_slots, sc.dt
    T = request.steps
    current = request.start_positions()
    pairs = _pairs(K)
    mode = request.mode
    margin = request.safety_margin

    if mode in (SeparationMode.SIGNED_L1, SeparationMode.SCP) and pairs and reference is None:
        raise MissingReferenceError(f"{mode.value} mode requires a reference plan")

    aux_pairs = len(pairs) if mode is SeparationMode.LITERAL else 0
    layout = VariableLayout(num_uavs=K, steps=T, start_slot=request.start_slot, aux_pairs=aux_pairs)
    n = layout.nvars

    # Objective: sum over UAVs and steps of squared displacement. Step-0
    # positions are constants, hence the linear term on step 1.
    p_rows, p_cols, p_vals = [], [], []
    q_vec = np.zeros(n)
    for k in range(K):
        for idx_fn, c0 in ((layout.px, current[k].x), (layout.py, current[k].y)):
            for t in range(1, T + 1):
                i = idx_fn(k, t)
                p_rows.append(i)
                p_cols.append(i)
                p_vals.append(4.0 if t < T else 2.0)
                if t < T:
                    j = idx_fn(k, t + 1)
                    p_rows.extend([i, j])
                    p_cols.extend([j, i])
                    p_vals.extend([-2.0, -2.0])
            q_vec[idx_fn(k, 1)] = -2.0 * c0
    P = sparse.coo_matrix((p_vals, (p_rows, p_cols)), shape=(n, n)).tocsc()

    rows: list[tuple[list[int], list[float], float, float]] = []

    # Kinematics: position update equals previous position plus velocity*dt.
    for k in range(K):
        for t in range(1, T + 1):
            for idx_fn, vidx_fn, c0 in (
                (layout.px, layout.vx, current[k].x),
                (layout.py, layout.vy, current[k].y),
            ):
                if t == 1:
                    rows.append(([idx_fn(k, 1), vidx_fn(k, 1)], [1.0, -dt], c0, c0))
                else:
                    rows.append(
                        ([idx_fn(k, t), idx_fn(k, t - 1), vidx_fn(k, t)], [1.0, -1.0, -dt], 0.0, 0.0)
                    )

    # Terminal condition: the goal when the window reaches the final slot,
    # otherwise a waypoint on the straight segment toward the goal.
    remaining = F - request.start_slot
    for k, u in enumerate(sc.uavs):
        if T == remaining:
            target = u.goal
        else:
            frac = T / remaining
            target = Vec2(
                current[k].x + (u.goal.x - current[k].x) * frac,
                current[k].y + (u.goal.y - current[k].y) * frac,
            )
        rows.append(([layout.px(k, T)], [1.0], target.x, target.x))
        rows.append(([layout.py(k, T)], [1.0], target.y, target.y))

    # Speed cap: regular polygon inscribed in the disc of radius v_max.
    ngon = request.speed_polygon
    cap_scale = math.cos(math.pi / ngon)
    directions = [(math.cos(2 * math.pi * j / ngon), math.sin(2 * math.pi * j / ngon)) for j in range(ngon)]
    for k, u in enumerate(sc.uavs):
        cap = u.v_max * cap_scale
        for t in range(1, T + 1):
            for cx, cy in directions:
                rows.append(([layout.vx(k, t), layout.vy(k, t)], [cx, cy], -math.inf, cap))

    # Separation rows.
    num_pairs = len(pairs)
    for rank, (k, l) in enumerate(pairs):
        rk_rl = sc.uavs[k].gps_error_radius + sc.uavs[l].gps_error_radius
        if mode is SeparationMode.LITERAL:
            for t in range(1, T + 1):
                ax, ay = layout.aux_x(rank, t), layout.aux_y(rank, t)
                xk, xl = layout.px(k, t), layout.px(l, t)
                yk, yl = layout.py(k, t), layout.py(l, t)
                rows.append(([ax, xk, xl], [1.0, -1.0, 1.0], -math.inf, 0.0))
                rows.append(([ax, xk, xl], [1.0, 1.0, -1.0], -math.inf, 0.0))
                rows.append(([ay, yk, yl], [1.0, -1.0, 1.0], -math.inf, 0.0))
                rows.append(([ay, yk, yl], [1.0, 1.0, -1.0], -math.inf, 0.0))
                rows.append(([ax, ay], [-1.0, -1.0], rk_rl**2, math.inf))
                rows.append(([ax], [-1.0], 1.0, math.inf))
                rows.append(([ay], [-1.0], 1.0, math.inf))
            continue

        ref_k = reference.trajectories[k].positions
        ref_l = reference.trajectories[l].positions
        if len(ref_k) < T + 1 or len(ref_l) < T + 1:
            raise MissingReferenceError("reference does not cover the planned window")
        w0 = ref_k[0] - ref_l[0]
        for t in range(1, T + 1):
            w = ref_k[t] - ref_l[t]
            cols = [layout.px(k, t), layout.px(l, t), layout.py(k, t), layout.py(l, t)]
            if mode is SeparationMode.SIGNED_L1:
                sx = _sign_chain(w.x, w0.x, w0.y)
                sy = _sign_chain(w.y, w0.y, w0.x)
                bound = math.sqrt(2.0) * (rk_rl + margin)
                rows.append((cols, [sx, -sx, sy, -sy], bound, math.inf))
            else:  # SCP supporting halfspace
                norm = w.norm()
                if norm > _ZERO_TOL:
                    nx, ny = w.x / norm, w.y / norm
                else:
                    if not degenerate_rule:
                        raise DegenerateReferencePairError(
                            f"pair ({k},{l}) coincides at step {t} in the reference"
                        )
                    theta = 2 * math.pi * rank / num_pairs
                    nx, ny = math.cos(theta), math.sin(theta)
                rows.append((cols, [nx, -nx, ny, -ny], rk_rl + margin, math.inf))

    a_rows, a_cols, a_vals, lower, upper = [], [], [], [], []
    for r, (cols, vals, lo, hi) in enumerate(rows):
        a_rows.extend([r] * len(cols))
        a_cols.extend(cols)
        a_vals.extend(vals)
        lower.append(lo)
        upper.append(hi)
    A = sparse.coo_matrix((a_vals, (a_rows, a_cols)), shape=(len(rows), n)).tocsc()
    problem = qp.QpProblem(P, q_vec, A, np.array(lower), np.array(upper))
    return problem, layout


def _extract_plan(
    x: np.ndarray, layout: VariableLayout, request: PlanRequest, stats: SolverStats
) -> SwarmPlan:
    """Build the SwarmPlan from a solution vector.

    Velocities are re-derived from the extracted positions so the returned
    trajectories are kinematically consistent to machine precision.
    """
    sc = request.scenario
    dt = sc.dt
    current = request.start_positions()
    trajectories = []
    objective = 0.0
    for k, u in enumerate(sc.uavs):
        positions = [current[k]]
        for t in range(1, layout.steps + 1):
            positions.append(Vec2(float(x[layout.px(k, t)]), float(x[layout.py(k, t)])))
        velocities = [
            (positions[i] - positions[i - 1]).scaled(1.0 / dt)
            for i in range(1, len(positions))
        ]
        trajectories.append(Trajectory(uav_id=u.id, positions=positions, velocities=velocities))
        objective += sum(
            positions[i].dist(positions[i - 1]) ** 2 for i in range(1, len(positions))
        )
    return SwarmPlan(trajectories=trajectories, objective_value=objective, solver_stats=stats)


def _warm_start(reference: SwarmPlan, layout: VariableLayout) -> np.ndarray:
    x0 = np.zeros(layout.nvars)
    for k, traj in enumerate(reference.trajectories):
        for t in range(1, layout.steps + 1):
            x0[layout.px(k, t)] = traj.positions[t].x
            x0[layout.py(k, t)] = traj.positions[t].y
            x0[layout.vx(k, t)] = traj.velocities[t - 1].x
            x0[layout.vy(k, t)] = traj.velocities[t - 1].y
    return x0


def _solve_or_raise(problem: qp.QpProblem, settings: qp.QpSettings | None, x0: np.ndarray | None):
    solution = qp.solve(problem, settings, x0=x0)
    if solution.status is qp.QpStatus.PRIMAL_INFEASIBLE:
        raise ScenarioInfeasibleError("separation constraints are infeasible for this scenario")
    if solution.status is qp.QpStatus.MAX_ITERATIONS:
        raise SolverFailureError(
            f"solver hit the iteration limit (primal {solution.primal_residual:.2e}, "
            f"dual {solution.dual_residual:.2e})"
        )
    return solution


def plan(
    request: PlanRequest,
    scp: ScpSettings | None = None,
    qp_settings: qp.QpSettings | None = None,
    initial_reference: SwarmPlan | None = None,
) -> SwarmPlan:
    """Produce a verified swarm plan for the request.

    Signed-L1 plans come from a single solve against the straight-line
    reference; SCP re-linearizes around its own iterates until the largest
    position change drops below the convergence tolerance. Literal-mode
    plans are returned as solved, with no separation guarantee.

    ``initial_reference`` optionally seeds the SCP iteration in place of
    the straight-line plan (the replanning loop hands over the previous
    slot's plan, which typically converges in one or two outer rounds);
    it is ignored by the other modes.
    """
    sc = request.scenario
    violations = sc.validate(require_separation=True)
    if violations:
        raise ScenarioInfeasibleError("; ".join(violations))
    scp = scp or ScpSettings()
    current = request.start_positions()
    t0 = time.perf_counter()
    reference = _straight_reference(sc, request.start_slot, current)

    if request.mode is SeparationMode.SCP:
        swarm = _plan_scp(request, initial_reference or reference, scp, qp_settings, t0)
    else:
        problem, layout = build_model(request, reference, scp.degenerate_direction_rule)
        solution = _solve_or_raise(problem, qp_settings, _warm_start(reference, layout))
        stats = SolverStats(
            iterations=solution.iterations,
            primal_residual=solution.primal_residual,
            dual_residual=solution.dual_residual,
            wall_time=time.perf_counter() - t0,
        )
        swarm = _extract_plan(solution.x, layout, request, stats)

    if request.mode is not SeparationMode.LITERAL:
        windowed = request.steps < sc.num_slots - request.start_slot
        report = verify_plan(swarm, sc, _VERIFY_EPS, start_positions=current, partial=windowed)
        if not report.all_ok:
            raise ScenarioInfeasibleError(
                f"plan failed verification (separation slack {report.min_separation_slack:.3e}, "
                f"endpoint error {report.max_endpoint_error:.3e})"
            )
    return swarm


def _plan_scp(request, reference, scp, qp_settings, t0) -> SwarmPlan:
    total_iters = 0
    swarm = reference
    last = None
    for outer in range(1, scp.max_outer + 1):
        problem, layout = build_model(request, swarm, scp.degenerate_direction_rule)
        solution = _solve_or_raise(problem, qp_settings, _warm_start(swarm, layout))
        total_iters += solution.iterations
        last = solution
        candidate = _extract_plan(solution.x, layout, request, SolverStats())
        change = 0.0
        for k in range(request.scenario.num_uavs):
            for t in range(1, layout.steps + 1):
                change = max(
                    change,
                    candidate.trajectories[k].positions[t].dist(swarm.trajectories[k].positions[t]),
                )
        swarm = candidate
        if change < scp.convergence_tol:
            break
    swarm.solver_stats = SolverStats(
        iterations=total_iters,
        primal_residual=last.primal_residual,
        dual_residual=last.dual_residual,
        wall_time=time.perf_counter() - t0,
        outer_iterations=outer,
    )
    return swarm


def verify_plan(
    plan_: SwarmPlan,
    scenario: Scenario,
    eps: float,
    start_positions: list[Vec2] | None = None,
    partial: bool = False,
) -> PlanVerification:
    """Check separation, endpoints, speed caps, and kinematic consistency.

    ``start_positions`` overrides the scenario starts for plans produced
    mid-mission; ``partial`` skips the goal-side endpoint check for plans
    that stop at a receding-horizon waypoint.
    """
    K = scenario.num_uavs
    if len(plan_.trajectories) != K:
        raise DimensionMismatchError(
            f"plan has {len(plan_.trajectories)} trajectories, scenario has {K} UAVs"
        )
    steps = plan_.trajectories[0].num_slots
    if any(traj.num_slots != steps for traj in plan_.trajectories):
        raise DimensionMismatchError("trajectories disagree on slot count")

    starts = start_positions or [u.start for u in scenario.uavs]

    min_sep_slack = math.inf
    for k, l in _pairs(K):
        safety = scenario.uavs[k].gps_error_radius + scenario.uavs[l].gps_error_radius
        pk, pl = plan_.trajectories[k].positions, plan_.trajectories[l].positions
        for t in range(steps + 1):
            min_sep_slack = min(min_sep_slack, pk[t].dist(pl[t]) - safety)

    endpoint_error = 0.0
    for k, traj in enumerate(plan_.trajectories):
        endpoint_error = max(endpoint_error, traj.positions[0].dist(starts[k]))
        if not partial:
            endpoint_error = max(endpoint_error, traj.positions[-1].dist(scenario.uavs[k].goal))

    velocity_excess = -math.inf
    for k, traj in enumerate(plan_.trajectories):
        worst = max(v.norm() for v in traj.velocities) if traj.velocities else 0.0
        velocity_excess = max(velocity_excess, worst - scenario.uavs[k].v_max)

    kin_residual = max(traj.kinematics_residual(scenario.dt) for traj in plan_.trajectories)

    return PlanVerification(
        separation_ok=bool(min_sep_slack > 0) if K > 1 else True,
        endpoints_ok=endpoint_error <= eps,
        velocity_ok=velocity_excess <= eps,
        kinematics_ok=kin_residual <= eps,
        min_separation_slack=min_sep_slack,
        max_endpoint_error=endpoint_error,
        max_velocity_excess=velocity_excess,
        max_kinematics_residual=kin_residual,
    )


def literal_feasibility_probe(
    positions: list[Vec2], radii: list[float], qp_settings: qp.QpSettings | None = None
) -> bool:
    """Do auxiliary values exist satisfying the literal rows at fixed positions?

    Solved as a small feasibility QP over the pair auxiliaries alone. This
    returns True for every configuration, including overlapping ones: the
    auxiliaries are only bounded above, so pushing them down satisfies every
    row regardless of the positions.
    """
    if len(positions) != len(radii):
        raise DimensionMismatchError("positions and radii must have equal length")
    pairs = _pairs(len(positions))
    if not pairs:
        return True
    n = 2 * len(pairs)
    rows_i, cols, vals, lower, upper = [], [], [], [], []

    def add_row(col_idx, coeffs, lo, hi):
        r = len(lower)
        rows_i.extend([r] * len(col_idx))
        cols.extend(col_idx)
        vals.extend(coeffs)
        lower.append(lo)
        upper.append(hi)

    x0 = np.zeros(n)
    for rank, (k, l) in enumerate(pairs):
        ax, ay = 2 * rank, 2 * rank + 1
        dx = positions[k].x - positions[l].x
        dy = positions[k].y - positions[l].y
        threshold = (radii[k] + radii[l]) ** 2
        add_row([ax], [1.0], -math.inf, dx)
        add_row([ax], [1.0], -math.inf, -dx)
        add_row([ay], [1.0], -math.inf, dy)
        add_row([ay], [1.0], -math.inf, -dy)
        add_row([ax, ay], [-1.0, -1.0], threshold, math.inf)
        add_row([ax], [-1.0], 1.0, math.inf)
        add_row([ay], [-1.0], 1.0, math.inf)
        # Pushing both auxiliaries this far down satisfies every row; it
        # warm starts the solve at a feasible point.
        x0[ax] = x0[ay] = -max(abs(dx), abs(dy), 1.0, threshold)

    A = sparse.coo_matrix((vals, (rows_i, cols)), shape=(len(lower), n)).tocsc()
    problem = qp.QpProblem(sparse.eye(n), np.zeros(n), A, np.array(lower), np.array(upper))
    # Unit quadratic cost with O(100) bounds converges fastest near rho = 1.
    settings = qp_settings or qp.QpSettings(rho=1.0)
    solution = qp.solve(problem, settings, x0=x0)
    return solution.status is qp.QpStatus.SOLVED

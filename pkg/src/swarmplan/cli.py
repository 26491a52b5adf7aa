"""Command-line front end: gen / plan / simulate / sweep / report.

Exit codes: 0 success, 1 malformed input, 2 infeasible scenario,
3 generation exhausted, 4 solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .generate import GenerationExhaustedError, GenSpec, generate_scenario
from .metrics import SweepSpec, SweptParam, measure, sweep
from .planner import (
    PlanRequest,
    ScenarioInfeasibleError,
    SeparationMode,
    SolverFailureError,
    plan,
    verify_plan,
)
from .scenario_io import (
    ScenarioFormatError,
    load_scenario,
    read_sweep_csv,
    write_plan_csv,
    write_scenario,
    write_sweep_csv,
)
from .sim import ChStrategy, run_baseline, run_mission

EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_INFEASIBLE = 2
EXIT_EXHAUSTED = 3
EXIT_SOLVER = 4

_MODES = {m.value: m for m in SeparationMode}
_STRATEGIES = {s.value: s for s in ChStrategy}
_PARAMS = {p.value: p for p in SweptParam}


class _CliError(Exception):
    """Bad command line or input file; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _parse_horizon(text: str) -> int | None:
    if text == "full":
        return None
    if text.startswith("receding:"):
        try:
            window = int(text.split(":", 1)[1])
        except ValueError:
            raise _CliError(f"bad horizon {text!r}, expected full or receding:H")
        if window < 1:
            raise _CliError("receding window must be >= 1")
        return window
    raise _CliError(f"bad horizon {text!r}, expected full or receding:H")


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise _CliError(f"bad values list {text!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="swarmplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random scenario file")
    gen.add_argument("--uavs", type=int, required=True)
    gen.add_argument("--area", type=float, required=True, help="area surface in m^2 (square)")
    gen.add_argument("--gps-error", type=float, required=True)
    gen.add_argument("--v-max", type=float, default=15.0)
    gen.add_argument("--dt", type=float, default=1.0)
    gen.add_argument("--slots", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--sigma-factor", type=float, default=0.25)
    gen.add_argument(
        "--no-endpoint-separation",
        action="store_true",
        help="skip pairwise endpoint separation (baseline replication only)",
    )
    gen.add_argument("--out", "-o", required=True)

    pln = sub.add_parser("plan", help="plan trajectories for a scenario")
    pln.add_argument("scenario")
    pln.add_argument("--mode", choices=sorted(_MODES), required=True)
    pln.add_argument("--horizon", default="full", help="full or receding:H")
    pln.add_argument("--margin", type=float, default=1e-3)
    pln.add_argument("--run-id", type=int, default=0)
    pln.add_argument("--out", "-o", required=True)

    sim = sub.add_parser("simulate", help="run one time-slotted mission")
    sim.add_argument("scenario")
    sim.add_argument("--mode", choices=["baseline"] + sorted(_MODES), required=True)
    sim.add_argument("--strategy", choices=sorted(_STRATEGIES), default="max-energy")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--horizon", default="full")
    sim.add_argument("--margin", type=float, default=1e-3)
    sim.add_argument("--out", "-o", required=True)

    swp = sub.add_parser("sweep", help="run a parameter sweep")
    swp.add_argument("--param", choices=sorted(_PARAMS), required=True)
    swp.add_argument("--values", required=True, help="comma-separated swept values")
    swp.add_argument("--runs", type=int, default=30)
    swp.add_argument("--mode", choices=["baseline"] + sorted(_MODES), default="baseline")
    swp.add_argument("--seed", type=int, default=0)
    swp.add_argument("--uavs", type=int, default=10)
    swp.add_argument("--area", type=float, default=10_000.0)
    swp.add_argument("--gps-error", type=float, default=5.0)
    swp.add_argument("--v-max", type=float, default=15.0)
    swp.add_argument("--dt", type=float, default=1.0)
    swp.add_argument("--slots", type=int, default=20)
    swp.add_argument("--strategy", choices=sorted(_STRATEGIES), default="max-energy")
    swp.add_argument("--no-endpoint-separation", action="store_true")
    swp.add_argument("--out", "-o", required=True)
    swp.add_argument("--chart", help="optional SVG chart of mean pair-slot collisions")

    rpt = sub.add_parser("report", help="render charts and trend fits from a sweep CSV")
    rpt.add_argument("sweep_csv")
    rpt.add_argument("--outdir", "-o", required=True)

    return parser


def _cmd_gen(args) -> int:
    spec = GenSpec(
        num_uavs=args.uavs,
        area_surface=args.area,
        gps_error=args.gps_error,
        v_max=args.v_max,
        dt=args.dt,
        num_slots=args.slots,
        seed=args.seed,
        sigma_factor=args.sigma_factor,
        separate_endpoints=not args.no_endpoint_separation,
    )
    scenario = generate_scenario(spec)
    write_scenario(scenario, args.out)
    print(f"wrote {args.out}: {scenario.num_uavs} UAVs in {scenario.area_width:.1f} x "
          f"{scenario.area_height:.1f} m, {scenario.num_slots} slots")
    return EXIT_OK


def _cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    request = PlanRequest(
        scenario=scenario,
        mode=_MODES[args.mode],
        receding_window=_parse_horizon(args.horizon),
        safety_margin=args.margin,
    )
    swarm = plan(request)
    write_plan_csv(swarm.trajectories, args.out, run_id=args.run_id)
    partial = request.steps < scenario.num_slots
    report = verify_plan(swarm, scenario, 1e-4, partial=partial)
    print(f"objective: {swarm.objective_value:.6f} m^2")
    print(f"solver: {swarm.solver_stats.iterations} iterations, "
          f"{swarm.solver_stats.wall_time:.3f} s")
    print(f"separation_ok: {report.separation_ok} (slack {report.min_separation_slack:.6f} m)")
    print(f"endpoints_ok:  {report.endpoints_ok} (error {report.max_endpoint_error:.2e} m)")
    print(f"velocity_ok:   {report.velocity_ok} (excess {report.max_velocity_excess:.2e} m/s)")
    print(f"kinematics_ok: {report.kinematics_ok} (residual {report.max_kinematics_residual:.2e} m)")
    if request.mode is SeparationMode.LITERAL:
        # The literal rows do not exclude overlap; separation is reported only.
        passed = report.endpoints_ok and report.velocity_ok and report.kinematics_ok
    else:
        passed = report.all_ok
    print(f"wrote {args.out}")
    return EXIT_OK if passed else EXIT_INFEASIBLE


def _cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.mode == "baseline":
        scenario = load_scenario(args.scenario, require_separation=False)
        log = run_baseline(scenario, rng)
    else:
        scenario = load_scenario(args.scenario)
        log = run_mission(
            scenario,
            _MODES[args.mode],
            _STRATEGIES[args.strategy],
            rng,
            receding_window=_parse_horizon(args.horizon),
            safety_margin=args.margin,
        )
    write_plan_csv(log.trajectories(scenario.dt), args.out)
    m = measure(log, scenario)
    print(f"cluster_head: {log.cluster_head}")
    print(f"completed: {str(m.completed).lower()}")
    print(f"pair_slot_collisions: {m.pair_slot_collisions}")
    print(f"distinct_pair_collisions: {m.distinct_pair_collisions}")
    print(f"mean_extra_distance: {m.mean_extra_distance:.6f}")
    print(f"total_planning_time_s: {m.total_planning_time:.6f}")
    print(f"wrote {args.out}")
    if m.completed:
        return EXIT_OK
    if log.failure and log.failure.startswith("solver_failure"):
        return EXIT_SOLVER
    return EXIT_INFEASIBLE


def _cmd_sweep(args) -> int:
    mode = None if args.mode == "baseline" else _MODES[args.mode]
    spec = SweepSpec(
        swept_param=_PARAMS[args.param],
        values=_parse_values(args.values),
        runs_per_point=args.runs,
        mode=mode,
        base_seed=args.seed,
        num_uavs=args.uavs,
        area_surface=args.area,
        gps_error=args.gps_error,
        dt=args.dt,
        num_slots=args.slots,
        v_max=args.v_max,
        endpoint_separation=not args.no_endpoint_separation,
        strategy=_STRATEGIES[args.strategy],
    )
    result = sweep(spec)
    write_sweep_csv(result, args.out)
    failed = sum(1 for row in result.rows if row.metrics is None or not row.metrics.completed)
    print(f"wrote {args.out}: {len(result.rows)} runs, {failed} incomplete")
    if args.chart:
        from .charts import render_metric_chart

        raw, _ = read_sweep_csv(args.out)
        render_metric_chart(raw, "pair_slot_collisions", args.chart)
        print(f"wrote {args.chart}")
    return EXIT_OK


def _cmd_report(args) -> int:
    raw, _ = read_sweep_csv(args.sweep_csv)
    if not raw:
        raise _CliError(f"{args.sweep_csv} contains no runs")
    from .charts import render_report, trend_summary

    written = render_report(raw, args.outdir)
    print(trend_summary(raw), end="")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "plan": _cmd_plan,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (ScenarioFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except ScenarioInfeasibleError as exc:
        print(f"error: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except GenerationExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except SolverFailureError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

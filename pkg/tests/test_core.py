import math

import numpy as np
import pytest

from swarmplan.core import (
    CoincidentPointsError,
    EndpointMismatchError,
    SafetyDisc,
    Scenario,
    Trajectory,
    UavSpec,
    Vec2,
    bearing_to_goal,
    deviation_objective,
    disc_overlap,
    extra_distance,
    heading_angle,
    recover_polar,
    sample_true_position,
    traveled_distance,
    wrap_angle,
)


def make_traj(points, dt=1.0, uav_id=0):
    positions = [Vec2(*p) for p in points]
    velocities = [
        (positions[i] - positions[i - 1]).scaled(1.0 / dt) for i in range(1, len(positions))
    ]
    return Trajectory(uav_id=uav_id, positions=positions, velocities=velocities)


class TestVec2:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Vec2(math.nan, 0.0)
        with pytest.raises(ValueError):
            Vec2(0.0, math.inf)

    def test_arithmetic(self):
        assert (Vec2(1, 2) + Vec2(3, 4)).as_tuple() == (4.0, 6.0)
        assert (Vec2(1, 2) - Vec2(3, 4)).as_tuple() == (-2.0, -2.0)
        assert Vec2(3, 4).norm() == 5.0
        assert Vec2(1, 1).dist(Vec2(4, 5)) == 5.0


class TestDiscOverlap:
    def test_overlapping(self):
        assert disc_overlap(SafetyDisc(Vec2(0, 0), 5.0), SafetyDisc(Vec2(9, 0), 5.0))

    def test_separated(self):
        assert not disc_overlap(SafetyDisc(Vec2(0, 0), 5.0), SafetyDisc(Vec2(10.5, 0), 5.0))

    def test_tangency_is_non_overlap(self):
        assert not disc_overlap(SafetyDisc(Vec2(0, 0), 5.0), SafetyDisc(Vec2(6, 8), 5.0))

    def test_symmetry_translation_scaling(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            a = SafetyDisc(Vec2(*rng.uniform(-50, 50, 2)), float(rng.uniform(0, 10)))
            b = SafetyDisc(Vec2(*rng.uniform(-50, 50, 2)), float(rng.uniform(0, 10)))
            result = disc_overlap(a, b)
            assert disc_overlap(b, a) == result
            shift = Vec2(*rng.uniform(-100, 100, 2))
            assert disc_overlap(
                SafetyDisc(a.center + shift, a.radius), SafetyDisc(b.center + shift, b.radius)
            ) == result
            c = float(rng.uniform(0.1, 10))
            assert disc_overlap(
                SafetyDisc(a.center.scaled(c), a.radius * c),
                SafetyDisc(b.center.scaled(c), b.radius * c),
            ) == result


class TestAngles:
    def test_heading(self):
        assert heading_angle(Vec2(1, 0)) == 0.0
        assert heading_angle(Vec2(0, 2)) == pytest.approx(math.pi / 2)
        assert heading_angle(Vec2(-1, 0)) == pytest.approx(math.pi)
        assert heading_angle(Vec2(0, 0)) == 0.0

    def test_bearing(self):
        assert bearing_to_goal(Vec2(0, 0), Vec2(1, 1)) == pytest.approx(math.pi / 4)
        assert bearing_to_goal(Vec2(0, 0), Vec2(-1, 0)) == pytest.approx(math.pi)
        with pytest.raises(CoincidentPointsError):
            bearing_to_goal(Vec2(2, 3), Vec2(2, 3))

    def test_recover_polar(self):
        speed, angle = recover_polar(Vec2(3, 4))
        assert speed == pytest.approx(5.0)
        assert angle == pytest.approx(0.9272952180016122)
        assert 3.0 / math.cos(angle) == pytest.approx(5.0)
        assert recover_polar(Vec2(0, 0)) == (0.0, 0.0)

    def test_recover_polar_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            v = Vec2(*rng.uniform(-100, 100, 2))
            speed, angle = recover_polar(v)
            assert speed * math.cos(angle) == pytest.approx(v.x, rel=1e-12, abs=1e-12)
            assert speed * math.sin(angle) == pytest.approx(v.y, rel=1e-12, abs=1e-12)


class TestDeviationObjective:
    def test_straight_line_is_zero(self):
        traj = make_traj([(0, 0), (1, 1), (2, 2), (3, 3)])
        assert deviation_objective(traj, Vec2(10, 10)) == pytest.approx(0.0)

    def test_perpendicular_slot(self):
        traj = make_traj([(0, 0), (0, 1)])
        assert deviation_objective(traj, Vec2(1, 0)) == pytest.approx(math.pi / 2)

    def test_zero_velocity_contributes_nothing(self):
        traj = make_traj([(0, 0), (0, 0), (1, 0)])
        assert deviation_objective(traj, Vec2(2, 0)) == pytest.approx(0.0)

    def test_matches_per_slot_summation_oracle(self):
        rng = np.random.default_rng(11)
        goal = Vec2(50, 50)
        points = [(0.0, 0.0)]
        for _ in range(5):
            points.append(tuple(np.array(points[-1]) + rng.uniform(-10, 10, 2)))
        traj = make_traj(points)
        expected = 0.0
        for t in range(1, 6):
            vx, vy = traj.velocities[t - 1].x, traj.velocities[t - 1].y
            px, py = traj.positions[t - 1].x, traj.positions[t - 1].y
            diff = math.atan2(vy, vx) - math.atan2(goal.y - py, goal.x - px)
            while diff > math.pi:
                diff -= 2 * math.pi
            while diff < -math.pi:
                diff += 2 * math.pi
            expected += abs(diff)
        assert deviation_objective(traj, goal) == pytest.approx(expected, rel=1e-12)

    def test_wrap_angle_range(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            w = wrap_angle(float(rng.uniform(-20, 20)))
            assert -math.pi <= w <= math.pi


class TestSampleTruePosition:
    def test_zero_radius(self):
        rng = np.random.default_rng(0)
        p = sample_true_position(Vec2(3, 4), 0.0, rng)
        assert p.as_tuple() == (3.0, 4.0)

    def test_never_leaves_disc(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            center = Vec2(10, -7)
            for _ in range(2000):
                p = sample_true_position(center, 5.0, rng)
                assert p.dist(center) <= 5.0 + 1e-12

    def test_uniform_disc_moments(self):
        rng = np.random.default_rng(2024)
        center = Vec2(0, 0)
        samples = [sample_true_position(center, 5.0, rng) for _ in range(100_000)]
        xs = np.array([p.x for p in samples])
        ys = np.array([p.y for p in samples])
        assert abs(xs.mean()) < 0.1 and abs(ys.mean()) < 0.1
        msd = float(np.mean(xs**2 + ys**2))
        assert msd == pytest.approx(12.5, rel=0.02)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            sample_true_position(Vec2(0, 0), -1.0, np.random.default_rng(0))


class TestDistances:
    def test_traveled_simple(self):
        assert traveled_distance(make_traj([(0, 0), (3, 4)])) == pytest.approx(5.0)
        assert traveled_distance(make_traj([(0, 0), (1, 0), (1, 1)])) == pytest.approx(2.0)

    def test_traveled_matches_pairwise_oracle(self):
        rng = np.random.default_rng(5)
        points = [tuple(rng.uniform(-100, 100, 2)) for _ in range(11)]
        traj = make_traj(points)
        expected = sum(
            math.hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1])
            for i in range(1, 11)
        )
        assert traveled_distance(traj) == pytest.approx(expected, rel=1e-12)

    def test_extra_distance_straight(self):
        spec = UavSpec(0, Vec2(0, 0), Vec2(1, 1), 1.0, 5.0)
        assert extra_distance(make_traj([(0, 0), (1, 1)]), spec) == pytest.approx(0.0)

    def test_extra_distance_detour(self):
        spec = UavSpec(0, Vec2(0, 0), Vec2(1, 1), 1.0, 5.0)
        extra = extra_distance(make_traj([(0, 0), (1, 0), (1, 1)]), spec)
        assert extra == pytest.approx(2.0 - math.sqrt(2.0))

    def test_extra_distance_endpoint_mismatch(self):
        spec = UavSpec(0, Vec2(0, 0), Vec2(1, 1), 1.0, 5.0)
        with pytest.raises(EndpointMismatchError):
            extra_distance(make_traj([(0, 0), (2, 2)]), spec)
        with pytest.raises(EndpointMismatchError):
            extra_distance(make_traj([(0.5, 0), (1, 1)]), spec)

    def test_extra_distance_nonnegative(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            goal = tuple(rng.uniform(-50, 50, 2))
            points = [(0.0, 0.0)]
            for _ in range(4):
                points.append(tuple(rng.uniform(-50, 50, 2)))
            points.append(goal)
            spec = UavSpec(0, Vec2(0, 0), Vec2(*goal), 1.0, 5.0)
            assert extra_distance(make_traj(points), spec) >= -1e-6


class TestTrajectory:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Trajectory(0, [Vec2(0, 0), Vec2(1, 0)], [])

    def test_kinematics_residual(self):
        traj = make_traj([(0, 0), (1, 0), (3, 1)], dt=0.5)
        assert traj.kinematics_residual(0.5) == pytest.approx(0.0, abs=1e-12)
        bad = Trajectory(0, [Vec2(0, 0), Vec2(1, 0)], [Vec2(0.9, 0)])
        assert bad.kinematics_residual(1.0) == pytest.approx(0.1)


class TestScenario:
    def _uav(self, k, start, goal, r=5.0, v=15.0):
        return UavSpec(k, Vec2(*start), Vec2(*goal), r, v)

    def test_valid_scenario(self):
        sc = Scenario(100, 100, 1.0, 20, [self._uav(0, (10, 10), (90, 90))])
        assert sc.validate() == []

    def test_field_invariants(self):
        with pytest.raises(ValueError):
            Scenario(100, 100, 0.0, 20, [self._uav(0, (0, 0), (1, 1))])
        with pytest.raises(ValueError):
            Scenario(100, 100, 1.0, 0, [self._uav(0, (0, 0), (1, 1))])
        with pytest.raises(ValueError):
            Scenario(100, 100, 1.0, 20, [])
        with pytest.raises(ValueError):
            Scenario(100, 100, 1.0, 20, [self._uav(1, (0, 0), (1, 1))])

    def test_geometric_violations_reported(self):
        sc = Scenario(
            100,
            100,
            1.0,
            20,
            [self._uav(0, (10, 10), (90, 90)), self._uav(1, (12, 10), (90, 80))],
        )
        problems = sc.validate()
        assert any("start separation" in p for p in problems)
        assert sc.validate(require_separation=False) == []

    def test_out_of_area_and_reachability(self):
        sc = Scenario(100, 100, 1.0, 2, [self._uav(0, (10, 10), (150, 90), v=5.0)])
        problems = sc.validate()
        assert any("outside area" in p for p in problems)
        assert any("unreachable" in p for p in problems)

    def test_uav_spec_invariants(self):
        with pytest.raises(ValueError):
            UavSpec(0, Vec2(0, 0), Vec2(1, 1), 0.0, 5.0)
        with pytest.raises(ValueError):
            UavSpec(0, Vec2(0, 0), Vec2(1, 1), 1.0, 0.0)
        with pytest.raises(ValueError):
            UavSpec(0, Vec2(0, 0), Vec2(1, 1), 1.0, 5.0, energy=-1.0)

import math
import threading

import pytest

from parapush.core import (
    Box,
    Control,
    Disc,
    DiscRegion,
    InvalidArgumentError,
    SceneSpec,
    SimulationUnstableError,
    State,
    TableBounds,
    make_controls,
    validate_scene,
)
from parapush.fine_model import PhysicsParams, fine_rollout, fine_step
from parapush.geometry import penetration


def make_scene(shape=None, pusher=(-45.0, 0.0), mass=0.2, vmax=100.0):
    return validate_scene(
        SceneSpec(
            slider_shape=shape or Box((25.0, 15.0)),
            slider_mass=mass,
            pusher_radius=10.0,
            support_friction_mu=0.35,
            contact_friction_mu=0.3,
            table_bounds=TableBounds(-1000.0, -1000.0, 1000.0, 1000.0),
            obstacle=DiscRegion((0.0, -900.0), 40.0),
            goal=DiscRegion((900.0, 0.0), 30.0),
            start_state=State(pusher_pos=pusher, slider_pose=(0.0, 0.0, 0.0)),
            max_push_speed=vmax,
        )
    )


def params_for(scene, **kw):
    return PhysicsParams.for_scene(scene, **kw)


def state_tuple(s):
    return (*s.pusher_pos, *s.slider_pose, *s.pusher_vel, *s.slider_vel)


class TestPhysicsParams:
    def test_defaults(self):
        p = PhysicsParams()
        assert p.substep == 0.001
        assert p.contact_stiffness == 10.0
        assert p.gravity == 9810.0

    def test_invariants(self):
        with pytest.raises(InvalidArgumentError):
            PhysicsParams(substep=0.0)
        with pytest.raises(InvalidArgumentError):
            PhysicsParams(contact_stiffness=-1.0)
        with pytest.raises(InvalidArgumentError):
            PhysicsParams(contact_friction_mu=-0.1)

    def test_scene_frictions_flow_in(self):
        sc = make_scene()
        p = PhysicsParams.for_scene(sc)
        assert p.contact_friction_mu == sc.contact_friction_mu
        assert p.support_friction_mu == sc.support_friction_mu

    def test_round_trip(self):
        p = PhysicsParams(support_torque_length=16.0)
        assert PhysicsParams.from_dict(p.to_dict()) == p


class TestFineStep:
    def test_no_contact_slider_fixed_pusher_exact(self):
        sc = make_scene(pusher=(-500.0, 0.0))
        p = params_for(sc)
        out = fine_step(sc.start_state, Control((25.0, 0.0), 4.0), p, sc)
        assert out.slider_pose == sc.start_state.slider_pose
        assert out.slider_vel == (0.0, 0.0, 0.0)
        # exact kinematic translation
        assert out.pusher_pos == (-500.0 + 25.0 * 4.0, 0.0)
        assert out.pusher_vel == (25.0, 0.0)

    def test_free_sliding_decays_without_reversal(self):
        sc = make_scene(pusher=(-500.0, 0.0))
        p = params_for(sc)
        s = State(pusher_pos=(-500.0, 0.0), slider_pose=(0.0, 0.0, 0.0), slider_vel=(50.0, 0.0, 0.0))
        speeds = [50.0]
        for _ in range(100):
            s = fine_step(s, Control((0.0, 0.0), p.substep), p, sc)
            v = s.slider_vel[0]
            assert v >= 0.0  # never reverses
            assert s.slider_vel[1] == 0.0
            speeds.append(v)
        # strictly decreasing until stopped
        moving = [v for v in speeds if v > 0.0]
        assert all(b < a for a, b in zip(moving, moving[1:]))
        assert speeds[-1] < 0.01

    def test_head_on_center_push_displacement(self):
        sc = make_scene(pusher=(-45.0, 0.0))
        p = params_for(sc)
        s = sc.start_state
        for _ in range(4):
            s = fine_step(s, Control((25.0, 0.0), 1.0), p, sc)
        assert 85.0 <= s.slider_pose[0] <= 100.0
        assert abs(s.slider_pose[1]) < 1.0
        assert abs(s.slider_pose[2]) < 0.02

    def test_symmetric_push_no_lateral_motion(self):
        sc = make_scene(pusher=(-45.0, 0.0))
        p = params_for(sc)
        out = fine_step(sc.start_state, Control((25.0, 0.0), 4.0), p, sc)
        assert abs(out.slider_vel[1]) <= 1e-6
        assert out.slider_pose[1] == 0.0
        assert out.slider_vel[2] == 0.0

    def test_rest_is_fixed_point(self):
        sc = make_scene(pusher=(-200.0, 50.0))
        p = params_for(sc)
        out = fine_step(sc.start_state, Control((0.0, -10.0), 2.0), p, sc)
        assert out.slider_pose == (0.0, 0.0, 0.0)
        assert out.slider_vel == (0.0, 0.0, 0.0)

    def test_passivity_stationary_pusher(self):
        sc = make_scene(pusher=(-500.0, 0.0))
        p = params_for(sc)
        s = State(
            pusher_pos=(-500.0, 0.0),
            slider_pose=(0.0, 0.0, 0.3),
            slider_vel=(30.0, -20.0, 1.5),
        )
        inertia = sc.slider_inertia
        ke = 0.5 * sc.slider_mass * (30.0**2 + 20.0**2) + 0.5 * inertia * 1.5**2
        for _ in range(200):
            s = fine_step(s, Control((0.0, 0.0), p.substep), p, sc)
            vx, vy, om = s.slider_vel
            ke_new = 0.5 * sc.slider_mass * (vx * vx + vy * vy) + 0.5 * inertia * om * om
            assert ke_new <= ke + 1e-12
            ke = ke_new

    def test_penetration_bounded_during_push(self):
        # steady pushing at the speed cap keeps penetration << 1 mm
        sc = make_scene(pusher=(-45.0, 0.0))
        p = params_for(sc)
        s = sc.start_state
        worst = 0.0
        for _ in range(40):
            s = fine_step(s, Control((100.0, 0.0), 0.1), p, sc)
            d = penetration(s.pusher_pos, sc.pusher_radius, sc.slider_shape, s.slider_pose)
            worst = max(worst, d.penetration_depth)
        assert worst < 1.0

    def test_duration_must_be_multiple_of_substep(self):
        sc = make_scene()
        p = params_for(sc)
        with pytest.raises(InvalidArgumentError):
            fine_step(sc.start_state, Control((25.0, 0.0), 0.0015), p, sc)

    def test_nonfinite_evolution_names_substep(self):
        sc = make_scene()
        p = params_for(sc)
        s = State(
            pusher_pos=(-500.0, 0.0),
            slider_pose=(0.0, 0.0, 0.0),
            slider_vel=(1e308, 1e308, 0.0),
        )
        with pytest.raises(SimulationUnstableError) as exc_info:
            fine_step(s, Control((0.0, 0.0), 1.0), p, sc)
        assert exc_info.value.substep == 1


class TestFineRollout:
    def test_zero_controls_rejected(self):
        sc = make_scene()
        with pytest.raises(InvalidArgumentError):
            fine_rollout(sc.start_state, (), params_for(sc), sc)

    def test_single_step_equals_fine_step(self):
        sc = make_scene()
        p = params_for(sc)
        ctrl = make_controls([(25.0, 0.0)], 1.0)
        traj = fine_rollout(sc.start_state, ctrl, p, sc)
        assert len(traj.states) == 2
        assert traj.states[0] is sc.start_state
        direct = fine_step(sc.start_state, ctrl[0], p, sc)
        assert state_tuple(traj.states[1]) == state_tuple(direct)

    def test_pusher_positions_arithmetic_progression(self):
        sc = make_scene(pusher=(-500.0, -300.0))
        p = params_for(sc)
        ctrl = make_controls([(10.0, 5.0)] * 4, 1.0)
        traj = fine_rollout(sc.start_state, ctrl, p, sc)
        xs = [s.pusher_pos[0] for s in traj.states]
        ys = [s.pusher_pos[1] for s in traj.states]
        for i in range(1, 4):
            assert xs[i + 1] - xs[i] == pytest.approx(xs[1] - xs[0], abs=1e-9)
            assert ys[i + 1] - ys[i] == pytest.approx(ys[1] - ys[0], abs=1e-9)

    def test_overspeed_control_rejected(self):
        sc = make_scene(vmax=50.0)
        with pytest.raises(InvalidArgumentError):
            fine_rollout(
                sc.start_state, make_controls([(60.0, 0.0)], 1.0), params_for(sc), sc
            )

    def test_bitwise_determinism_across_runs_and_threads(self):
        sc = make_scene(pusher=(-85.0, 20.0))
        p = params_for(sc)
        ctrl = make_controls([(25.0, 0.0)] * 4, 1.0)
        a = fine_rollout(sc.start_state, ctrl, p, sc)
        b = fine_rollout(sc.start_state, ctrl, p, sc)
        results = {}

        def worker(key):
            results[key] = fine_rollout(sc.start_state, ctrl, p, sc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for other in [b, *results.values()]:
            for sa, sb in zip(a.states, other.states):
                assert state_tuple(sa) == state_tuple(sb)

    def test_model_tag(self):
        sc = make_scene()
        traj = fine_rollout(sc.start_state, make_controls([(25.0, 0.0)], 1.0), params_for(sc), sc)
        assert traj.model_tag == "fine"


class TestGoldenRegression:
    """Canonical side box push, pinned from this implementation."""

    def test_side_box_push_golden(self, golden_side_box):
        from parapush import scenes

        sc = scenes.canonical_scene("side_box")
        p = scenes.fixture_physics(sc)
        traj = fine_rollout(sc.start_state, scenes.canonical_controls(), p, sc)
        got = [state_tuple(s) for s in traj.states]
        assert len(got) == len(golden_side_box)
        for row_got, row_want in zip(got, golden_side_box):
            for a, b in zip(row_got, row_want):
                assert a == b  # bitwise

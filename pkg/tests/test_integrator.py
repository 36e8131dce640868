import numpy as np
import pytest

from palign import (
    IntegratorConfig,
    ModelParams,
    ParticleState,
    StepStallError,
    run,
    step_adaptive,
)
from palign.diagnostics import max_speed
from palign.integrator import AdaptiveStepper
from palign.oracle import integrate_reduced, two_particle_state

from conftest import random_state


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntegratorConfig(rel_tol=-1.0)
        with pytest.raises(ValueError):
            IntegratorConfig(dt_init=1.0, dt_max=0.1)
        with pytest.raises(ValueError):
            IntegratorConfig(kappa=0.0)
        with pytest.raises(ValueError):
            IntegratorConfig(collision_eps=0.0)


class TestStepper:
    def test_translation_exact(self, loose_config):
        # equal velocities: dv = 0 and dx linear, reproduced exactly
        params = ModelParams(alpha=1.0, p=2.0, d=2, n_particles=2)
        s = ParticleState(
            0.0, np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0.3, -0.2]] * 2)
        )
        new, dt, err = step_adaptive(s, params, loose_config)
        np.testing.assert_allclose(new.x, s.x + dt * s.v, rtol=0, atol=1e-15)
        np.testing.assert_allclose(new.v, s.v)
        assert err <= 1e-12

    def test_harmonic_stub(self):
        # force module stubbed with -x: validates the embedded pair on
        # a problem with a closed-form solution; the two oscillators
        # are phase-shifted so their separation stays bounded away
        # from zero and no event machinery triggers
        params = ModelParams(alpha=1.0, p=2.0, d=2, n_particles=2)
        cfg = IntegratorConfig(
            rel_tol=1e-8, abs_tol=1e-8, dt_init=1e-3, dt_max=0.2, dt_min=1e-14, kappa=1.0
        )
        s0 = ParticleState(
            0.0,
            np.array([[1.0, 0.0], [0.0, 1.0]]),
            np.array([[0.0, 0.0], [1.0, 0.0]]),
        )
        traj = run(
            s0, params, cfg, t_end=2.0 * np.pi,
            force=lambda state, _: -state.x, with_diagnostics=False,
        )
        assert not traj.events
        end = traj.final_state
        np.testing.assert_allclose(end.x, s0.x, rtol=10 * cfg.rel_tol, atol=1e-7)
        np.testing.assert_allclose(end.v, s0.v, atol=2e-7)

    def test_stall_raises(self):
        params = ModelParams(alpha=2.0, p=3.0, d=1, n_particles=2)
        cfg = IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-10, dt_init=1e-3, dt_max=0.1, dt_min=1e-3,
            kappa=1e-6,
        )
        s = two_particle_state(1e-3, -1.0)
        with pytest.raises(StepStallError):
            step_adaptive(s, params, cfg)

    def test_proximity_clamp_bounds_step(self, loose_config):
        params = ModelParams(alpha=2.0, p=3.0, d=1, n_particles=2)
        s = two_particle_state(0.01, -1.0)
        stepper = AdaptiveStepper(params, loose_config)
        limit = stepper.proximity_limit(s)
        _, dt, _ = stepper.step(s)
        assert dt <= limit + 1e-15
        assert limit == pytest.approx(loose_config.kappa * 0.01 / (2.0 * 1.0), rel=1e-12)


class TestRun:
    def test_t_end_zero(self, params23, loose_config, rng):
        s = random_state(rng, n=8, d=2)
        traj = run(s, params23, loose_config, t_end=0.0)
        assert len(traj.steps) == 1
        assert traj.steps[0].state.t == 0.0
        assert not traj.events

    def test_reaches_t_end_exactly(self, params23, loose_config, rng):
        s = random_state(rng, n=8, d=2, vscale=0.3)
        traj = run(s, params23, loose_config, t_end=1.0)
        assert traj.final_state.t == pytest.approx(1.0, abs=1e-12)
        assert not traj.events

    def test_observer_stride(self, params23, loose_config, rng):
        s = random_state(rng, n=8, d=2, vscale=0.3)
        t1 = run(s, params23, loose_config, t_end=0.5, observer_stride=1)
        t5 = run(s, params23, loose_config, t_end=0.5, observer_stride=5)
        assert len(t5.steps) < len(t1.steps)
        # both start at the initial state and end at t_end
        assert t5.steps[0].state.t == 0.0
        assert t5.final_state.t == pytest.approx(0.5, abs=1e-12)

    def test_collision_event_two_particle(self):
        # p > alpha + 2 matched data must stop on a Collision event
        from palign.oracle import collision_time, matched_initial_velocity

        params = ModelParams(alpha=2.0, p=5.0, d=1, n_particles=2)
        rd0 = matched_initial_velocity(1.0, params)
        cfg = IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-10, dt_init=1e-4, dt_max=0.05, dt_min=1e-14,
            kappa=0.5,
        )
        traj = run(two_particle_state(1.0, rd0), params, cfg, t_end=10.0)
        assert traj.event_kinds() == ["Collision"]
        tc = collision_time(1.0, params)
        assert abs(traj.events[0].t - tc) <= 0.01 * tc

    def test_max_speed_monotone(self, params23, tight_config, rng):
        s = random_state(rng, n=8, d=2)
        traj = run(s, params23, tight_config, t_end=1.0)
        speeds = [max_speed(q.state) for q in traj.steps]
        tol = 10 * (tight_config.abs_tol + tight_config.rel_tol * speeds[0])
        assert all(b <= a + tol for a, b in zip(speeds, speeds[1:]))

    def test_order_check(self, rng):
        # order check on a smooth segment: halving the step cap cuts
        # the end-state error by far more than 4x (5th-order method);
        # halving tolerances alone shrinks the error by ~2^(4/5),
        # which is asserted as monotone improvement
        params = ModelParams(alpha=2.0, p=3.0, d=2, n_particles=6)
        s = random_state(rng, n=6, d=2, vscale=0.5)

        def end_x(rtol, dtmax):
            cfg = IntegratorConfig(
                rel_tol=rtol, abs_tol=rtol, dt_init=1e-4, dt_max=dtmax, dt_min=1e-14,
                kappa=1.0,
            )
            return run(s, params, cfg, t_end=1.0, with_diagnostics=False).final_state.x

        ref = end_x(1e-13, 0.05)
        e_coarse = np.max(np.abs(end_x(1e-3, 0.08) - ref))
        e_fine = np.max(np.abs(end_x(1e-3, 0.04) - ref))
        assert e_fine <= e_coarse / 4.0
        e1 = np.max(np.abs(end_x(2e-6, 0.5) - ref))
        e2 = np.max(np.abs(end_x(1e-6, 0.5) - ref))
        assert e2 <= e1 / 1.5

    def test_two_particle_matches_reduced_oracle(self):
        # alpha=2, p=3 approach: distances stay positive, end state
        # agrees with the independent reduced integration at 1e-12 tol
        params = ModelParams(alpha=2.0, p=3.0, d=1, n_particles=2)
        cfg = IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-10, dt_init=1e-4, dt_max=0.05, dt_min=1e-14,
            kappa=0.5,
        )
        traj = run(two_particle_state(1.0, -1.0), params, cfg, t_end=5.0)
        assert not traj.events
        dmin_run = min(q.diagnostics.min_pair_dist for q in traj.steps)
        assert dmin_run > 0.0
        end = traj.final_state
        r_sim = end.x[1, 0] - end.x[0, 0]
        ref, _ = integrate_reduced(1.0, -1.0, params, t_end=5.0, tol=1e-12)
        assert r_sim == pytest.approx(ref.r, abs=1e-8)
        # every accepted step honors the proximity clamp of its
        # pre-step state (observer stride 1 keeps all pre-states)
        stepper = AdaptiveStepper(params, cfg)
        for before, after in zip(traj.steps, traj.steps[1:]):
            limit = stepper.proximity_limit(before.state)
            assert after.accepted_dt <= min(cfg.dt_max, limit) + 1e-12

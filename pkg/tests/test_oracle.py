import numpy as np
import pytest

from palign import DomainError, ModelParams
from palign.oracle import (
    ReducedState,
    collision_bound_alpha1,
    collision_time,
    collision_time_partial,
    integrate_reduced,
    matched_initial_velocity,
    matched_initial_velocity_alpha1,
    reduced_rhs,
)


def P(alpha, p):
    return ModelParams(alpha=alpha, p=p, d=1, n_particles=2)


class TestReducedRhs:
    def test_rest_state(self):
        dr, dd = reduced_rhs(ReducedState(0.0, 1.0, 0.0), P(2.0, 5.0))
        assert dr == 0.0 and dd == 0.0

    def test_example_value(self):
        # r=1, rdot=-1, p=5, alpha=2: drdot = -(-1)(1)(1) = +1
        dr, dd = reduced_rhs(ReducedState(0.0, 1.0, -1.0), P(2.0, 5.0))
        assert dr == -1.0
        assert dd == pytest.approx(1.0)

    def test_friction_opposes_motion(self, rng):
        for _ in range(20):
            r = float(rng.uniform(0.1, 2.0))
            rd = float(rng.uniform(-2.0, 2.0))
            _, dd = reduced_rhs(ReducedState(0.0, r, rd), P(1.5, 3.5))
            assert dd * rd <= 0.0


class TestMatchedData:
    def test_known_values(self):
        assert matched_initial_velocity(1.0, P(2.0, 5.0)) == pytest.approx(
            -1.0 / np.sqrt(2.0)
        )
        assert matched_initial_velocity(1.0, P(3.0, 6.0)) == pytest.approx(
            -((3.0 / 2.0) ** (-1.0 / 3.0))
        )

    def test_consistency_relation(self, rng):
        # plugging rdot0 back into the first integral gives c = 0
        for _ in range(20):
            alpha = float(rng.uniform(1.1, 3.0))
            p = float(rng.uniform(alpha + 2.1, alpha + 5.0))
            r0 = float(rng.uniform(0.2, 3.0))
            rd0 = matched_initial_velocity(r0, P(alpha, p))
            lhs = (1.0 / (p - 3.0)) * (-rd0) ** (3.0 - p)
            rhs = (1.0 / (alpha - 1.0)) * r0 ** (1.0 - alpha)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            matched_initial_velocity(1.0, P(2.0, 3.5))  # p <= alpha + 2
        with pytest.raises(DomainError):
            matched_initial_velocity(-1.0, P(2.0, 5.0))
        with pytest.raises(DomainError):
            collision_time(1.0, P(1.0, 5.0))  # alpha = 1 has no closed form


class TestCollisionTime:
    def test_reference_value(self):
        assert collision_time(1.0, P(2.0, 5.0)) == pytest.approx(2.0 * np.sqrt(2.0))

    def test_r0_scaling(self):
        # t_c scales like r0^(1 - beta); for (2, 5), beta = 1/2
        tc1 = collision_time(1.0, P(2.0, 5.0))
        tc2 = collision_time(2.0, P(2.0, 5.0))
        assert tc2 / tc1 == pytest.approx(np.sqrt(2.0), rel=1e-12)

    @pytest.mark.parametrize(
        "alpha,p", [(1.5, 4.0), (2.0, 4.5), (2.0, 5.0), (3.0, 5.5), (3.0, 6.0)]
    )
    def test_cross_validated_by_integration(self, alpha, p):
        # closed partial time vs independent RK4 descent over 12 decades
        params = P(alpha, p)
        r0 = 1.0
        rd0 = matched_initial_velocity(r0, params)
        st, hit = integrate_reduced(
            r0, rd0, params, stop_r=1e-12, t_end=100.0, tol=1e-12, atol=1e-300
        )
        assert hit
        t_closed = collision_time_partial(r0, st.r, params)
        assert abs(st.t - t_closed) / collision_time(r0, params) < 1e-6

    def test_unmatched_rest_start_no_closed_form(self):
        # rdot0 = 0 gives no force at all: r stays put
        st, hit = integrate_reduced(1.0, 0.0, P(2.0, 5.0), t_end=1.0, tol=1e-12)
        assert not hit or st.r > 0
        assert st.r == pytest.approx(1.0)


class TestAlpha1Branch:
    def test_matched_velocity(self):
        r0 = float(np.exp(-1.0))
        assert matched_initial_velocity_alpha1(r0, 5.0) == pytest.approx(
            -1.0 / np.sqrt(2.0)
        )

    def test_bound_value_and_domain(self):
        r0 = float(np.exp(-1.0))
        t_star = collision_bound_alpha1(r0, P(1.0, 5.0))
        assert t_star == pytest.approx(2.0 * np.sqrt(2.0) / np.e)
        with pytest.raises(DomainError):
            collision_bound_alpha1(float(np.exp(-0.3)), P(1.0, 5.0))  # r0 too big
        with pytest.raises(DomainError):
            collision_bound_alpha1(0.1, P(2.0, 5.0))  # alpha != 1

    def test_integration_beats_bound(self):
        r0 = float(np.exp(-1.0))
        params = P(1.0, 5.0)
        rd0 = matched_initial_velocity_alpha1(r0, 5.0)
        t_star = collision_bound_alpha1(r0, params)
        st, hit = integrate_reduced(r0, rd0, params, stop_r=1e-6, t_end=10.0, tol=1e-12)
        assert hit and st.t <= t_star

    def test_left_right_symmetry(self):
        # r is a relative coordinate: flipping the particle labels
        # only flips the sign convention, times are unchanged
        params = P(1.0, 5.0)
        r0 = float(np.exp(-1.0))
        rd0 = matched_initial_velocity_alpha1(r0, 5.0)
        a, _ = integrate_reduced(r0, rd0, params, stop_r=1e-4, t_end=10.0, tol=1e-10)
        b, _ = integrate_reduced(r0, rd0, params, stop_r=1e-4, t_end=10.0, tol=1e-10)
        assert a.t == b.t


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_avoidance_regime_keeps_r_positive(alpha):
    # reduced-system echo of global existence: p <= alpha + 2 keeps the
    # separation positive out to T = 100 for head-on data (r may decay
    # exponentially toward 0 but never reaches it)
    for p in (alpha, alpha + 1.0, alpha + 2.0):
        st, _ = integrate_reduced(
            1.0, -1.0, ModelParams(alpha=alpha, p=p, d=1, n_particles=2),
            t_end=100.0, tol=1e-10, freeze_rdot_below=1e-13,
        )
        assert st.t == pytest.approx(100.0)
        assert st.r > 0.0

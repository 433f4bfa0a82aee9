import math

import numpy as np
import pytest

from pacreach.errors import IntegrationError
from pacreach.systems import (DynamicalSystem, ReachProblem, duffing,
                              duffing_problem, interval_hull,
                              monotone_interval_hull, quadrotor,
                              quadrotor_problem, reach_sampler, rk4_integrate,
                              traffic, traffic_problem)

# Axis-aligned bound on the final-state cloud of the chaotic oscillator
# benchmark, frozen from a 1e5-sample pilot run (stable under step halving).
DUFFING_PILOT_BOX = np.array([[-2.6, 1.8], [-2.8, 3.3]])


def _autonomous(f, n):
    return DynamicalSystem(n, 0, f, tuple(f"x{i}" for i in range(n)))


class TestRk4:
    def test_zero_field_is_identity(self):
        sys_ = _autonomous(lambda t, x, d: np.zeros_like(x), 2)
        x = rk4_integrate(sys_, [1.5, -2.5], None, 0.0, 10.0, 7)
        np.testing.assert_array_equal(x, [1.5, -2.5])

    def test_exponential_growth(self):
        sys_ = _autonomous(lambda t, x, d: x, 1)
        x = rk4_integrate(sys_, [1.0], None, 0.0, 1.0, 100)
        assert x[0] == pytest.approx(math.e, rel=1e-7)

    def test_logistic_decay_closed_form(self):
        # dx/dt = -x^2 from 1 has the solution 1 / (1 + t)
        sys_ = _autonomous(lambda t, x, d: -x * x, 1)
        x = rk4_integrate(sys_, [1.0], None, 0.0, 1.0, 100)
        assert x[0] == pytest.approx(0.5, abs=1e-6)

    def test_fourth_order_convergence(self):
        sys_ = _autonomous(lambda t, x, d: x, 1)
        errs = []
        for steps in (10, 20, 40):
            x = rk4_integrate(sys_, [1.0], None, 0.0, 1.0, steps)
            errs.append(abs(x[0] - math.e))
        assert errs[0] / errs[1] == pytest.approx(16, rel=0.2)
        assert errs[1] / errs[2] == pytest.approx(16, rel=0.2)

    def test_blowup_reports_step_index(self):
        # dx/dt = x^2 from 1 blows up at t = 1
        sys_ = _autonomous(lambda t, x, d: x * x, 1)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(IntegrationError) as err:
                rk4_integrate(sys_, [1.0], None, 0.0, 2.0, 64)
        assert 0 <= err.value.step < 64

    def test_batch_matches_loop(self):
        sys_ = duffing()
        x0 = np.array([[1.0, 0.0], [0.9, 0.1], [1.1, -0.1]])
        batch = rk4_integrate(sys_, x0, None, 0.0, 3.0, 60)
        for i in range(3):
            single = rk4_integrate(sys_, x0[i], None, 0.0, 3.0, 60)
            np.testing.assert_array_equal(batch[i], single)


class TestDuffing:
    def test_vector_field_values(self):
        f = duffing().vector_field
        d = np.zeros((1, 0))
        np.testing.assert_allclose(
            f(0.0, np.array([[1.0, 0.0]]), d), [[0.0, 0.4]], atol=1e-15)
        np.testing.assert_allclose(
            f(math.pi / (2 * 1.3), np.array([[0.0, 0.0]]), d), [[0.0, 0.0]],
            atol=1e-15)
        np.testing.assert_allclose(
            f(0.0, np.array([[0.0, 1.0]]), d), [[1.0, 0.35]], atol=1e-15)

    def test_benchmark_problem_shape(self):
        p = duffing_problem()
        assert p.system.state_dim == 2 and p.system.disturbance_dim == 0
        assert p.t1 == 100.0 and p.sample_dim == 2


class TestDuffingCloud:
    def test_samples_within_pilot_box(self):
        src = reach_sampler(duffing_problem())
        pts = src.draw(1000, np.random.default_rng(42))
        assert np.all(np.isfinite(pts))
        assert np.all(pts >= DUFFING_PILOT_BOX[:, 0])
        assert np.all(pts <= DUFFING_PILOT_BOX[:, 1])

    def test_cloud_hull_stable_under_step_halving(self):
        # the oscillator is chaotic, so individual trajectories at the final
        # time decorrelate under step refinement; the sampled cloud's hull is
        # the quantity that must be stable
        rng = np.random.default_rng(3)
        x0 = np.column_stack([rng.uniform(0.95, 1.05, 400),
                              rng.uniform(-0.05, 0.05, 400)])
        sys_ = duffing()
        h1 = interval_hull(rk4_integrate(sys_, x0, None, 0.0, 100.0, 2000))
        h2 = interval_hull(rk4_integrate(sys_, x0, None, 0.0, 100.0, 4000))
        np.testing.assert_allclose(h1, h2, atol=0.25)

    def test_short_horizon_pointwise_convergence(self):
        # before chaos amplifies round-off, halving the step changes the
        # final state negligibly
        rng = np.random.default_rng(4)
        x0 = np.column_stack([rng.uniform(0.95, 1.05, 50),
                              rng.uniform(-0.05, 0.05, 50)])
        sys_ = duffing()
        a = rk4_integrate(sys_, x0, None, 0.0, 10.0, 200)
        b = rk4_integrate(sys_, x0, None, 0.0, 10.0, 400)
        assert np.max(np.abs(a - b)) < 1e-5


class TestQuadrotor:
    def test_hover_condition(self):
        sys_ = quadrotor()
        x = np.zeros((1, 6))
        d = np.array([[9.81 / 0.64, 0.0]])
        dx = sys_.vector_field(0.0, x, d)
        assert dx[0, 3] == pytest.approx(0.0, abs=1e-12)  # altitude accel
        assert dx[0, 1] == pytest.approx(0.0, abs=1e-12)  # lateral accel

    def test_tilt_acceleration(self):
        sys_ = quadrotor()
        x = np.zeros((1, 6))
        d = np.array([[0.0, math.pi / 4]])
        dx = sys_.vector_field(0.0, x, d)
        assert dx[0, 5] == pytest.approx(55 * math.pi / 4, rel=1e-12)
        assert dx[0, 5] == pytest.approx(43.197, abs=1e-3)

    def test_benchmark_projection(self):
        src = reach_sampler(quadrotor_problem())
        pts = src.draw(10, np.random.default_rng(0))
        assert pts.shape == (10, 2)

    def test_pointwise_step_convergence(self):
        p = quadrotor_problem()
        rng = np.random.default_rng(5)
        init = np.asarray(p.initial_box)
        dist = np.asarray(p.disturbance_box)
        x0 = rng.uniform(init[:, 0], init[:, 1], size=(50, 6))
        d = rng.uniform(dist[:, 0], dist[:, 1], size=(50, 2))
        a = rk4_integrate(p.system, x0, d, 0.0, 5.0, 500)
        b = rk4_integrate(p.system, x0, d, 0.0, 5.0, 1000)
        assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-5


class TestTraffic:
    def test_congested_no_inflow(self):
        sys_ = traffic()
        x = np.full((1, 6), 320.0)
        d = np.array([[0.0]])
        dx = sys_.vector_field(0.0, x, d)
        assert dx[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_equilibrium_flows_cancel(self):
        # equal densities below both capacity and congestion thresholds, with
        # the inflow matching the uniform flow: interior derivatives vanish
        sys_ = traffic()
        x = np.full((1, 6), 60.0)  # v*x = 30 < c, supply = (320-60)/6 = 43.3
        d = np.array([[30.0]])
        dx = sys_.vector_field(0.0, x, d)
        np.testing.assert_allclose(dx[0, :5], 0.0, atol=1e-12)

    def test_default_capacity_value(self):
        # fundamental-diagram crossing: 0.5 * (1/6) * 320 / (0.5 + 1/6) = 40
        sys_a = traffic()
        sys_b = traffic(max_flow=40.0)
        x = np.random.default_rng(0).uniform(100, 300, size=(5, 6))
        d = np.array([[1.5]] * 5)
        np.testing.assert_array_equal(sys_a.vector_field(0.0, x, d),
                                      sys_b.vector_field(0.0, x, d))

    def test_monotone_flow(self):
        # componentwise-larger initial state yields componentwise-larger
        # final state under the same inflow
        p = traffic_problem()
        rng = np.random.default_rng(6)
        lo = rng.uniform(100, 180, size=(30, 6))
        hi = lo + rng.uniform(0.0, 20.0, size=(30, 6))
        d = rng.uniform(40 / 30.0, 60 / 30.0, size=(30, 1))
        a = rk4_integrate(p.system, lo, d, 0.0, 120.0, 1200)
        b = rk4_integrate(p.system, hi, d, 0.0, 120.0, 1200)
        assert np.all(b >= a - 1e-6)

    def test_monotone_hull_contains_empirical(self):
        p = traffic_problem()
        hull = monotone_interval_hull(p)
        pts = reach_sampler(p).draw(10000, np.random.default_rng(7))
        emp = interval_hull(pts)
        assert np.all(hull[:, 0] <= emp[:, 0] + 1e-9)
        assert np.all(emp[:, 1] <= hull[:, 1] + 1e-9)


class TestReachSampler:
    def test_degenerate_boxes_constant_samples(self):
        p = ReachProblem(
            system=duffing(),
            initial_box=((1.0, 1.0), (0.0, 0.0)),
            disturbance_box=(),
            t0=0.0, t1=1.0, integrator_steps=10,
        )
        pts = reach_sampler(p).draw(5, np.random.default_rng(0))
        assert np.all(pts == pts[0])

    def test_seed_determinism(self):
        src = reach_sampler(duffing_problem(steps=1000))
        a = src.draw(20, np.random.default_rng(123))
        b = src.draw(20, np.random.default_rng(123))
        np.testing.assert_array_equal(a, b)

    def test_projection_commutes_with_sampling(self):
        full = quadrotor_problem()
        unprojected = ReachProblem(
            system=full.system, initial_box=full.initial_box,
            disturbance_box=full.disturbance_box, t0=full.t0, t1=full.t1,
            integrator_steps=full.integrator_steps, projection=None,
        )
        a = reach_sampler(full).draw(15, np.random.default_rng(9))
        b = reach_sampler(unprojected).draw(15, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b[:, [0, 2]])

    def test_invalid_problem_rejected(self):
        with pytest.raises(ValueError):
            ReachProblem(system=duffing(), initial_box=((1.0, 0.0), (0.0, 0.0)),
                         disturbance_box=(), t0=0.0, t1=1.0, integrator_steps=10)
        with pytest.raises(ValueError):
            ReachProblem(system=duffing(), initial_box=((0.0, 1.0), (0.0, 0.0)),
                         disturbance_box=(), t0=1.0, t1=1.0, integrator_steps=10)
        with pytest.raises(ValueError):
            ReachProblem(system=duffing(), initial_box=((0.0, 1.0), (0.0, 0.0)),
                         disturbance_box=(), t0=0.0, t1=1.0, integrator_steps=10,
                         projection=(0, 0))


class TestIntervalHull:
    def test_single_point_degenerate(self):
        h = interval_hull([[3.0, -1.0]])
        np.testing.assert_array_equal(h, [[3.0, 3.0], [-1.0, -1.0]])

    def test_two_points(self):
        h = interval_hull([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(h, [[0.0, 1.0], [0.0, 1.0]])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            interval_hull(np.empty((0, 2)))

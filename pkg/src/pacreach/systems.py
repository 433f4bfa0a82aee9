"""Benchmark dynamical systems, a fixed-step integrator, and reach sampling.

A :class:`ReachProblem` bundles a vector field with an initial box, a
disturbance box (constant-in-time disturbances), a time range and an optional
coordinate projection; :func:`reach_sampler` turns it into an iid source of
final states, the raw material of every support estimate in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationError

# Vector fields are batched: f(t, x, d) takes x of shape (..., n) and d of
# shape (..., w) and returns the state derivative with the shape of x.
VectorField = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DynamicalSystem:
    state_dim: int
    disturbance_dim: int
    vector_field: VectorField
    state_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.state_names) != self.state_dim:
            raise ValueError("state_names must have one entry per state")


@dataclass(frozen=True)
class ReachProblem:
    """A forward reachability problem acting as an iid sample source.

    Initial states and (constant) disturbances are drawn uniformly from the
    given boxes; trajectories run from t0 to t1 under fixed-step integration
    and the optional projection keeps only the listed state coordinates.
    """

    system: DynamicalSystem
    initial_box: tuple[tuple[float, float], ...]
    disturbance_box: tuple[tuple[float, float], ...]
    t0: float
    t1: float
    integrator_steps: int
    projection: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.initial_box) != self.system.state_dim:
            raise ValueError("initial_box must have one (lo, hi) pair per state")
        if len(self.disturbance_box) != self.system.disturbance_dim:
            raise ValueError("disturbance_box must match the disturbance dimension")
        for lo, hi in (*self.initial_box, *self.disturbance_box):
            if hi < lo:
                raise ValueError(f"box interval has lo > hi: ({lo}, {hi})")
        if not self.t1 > self.t0:
            raise ValueError("time range must have t1 > t0")
        if self.integrator_steps < 1:
            raise ValueError("integrator_steps must be >= 1")
        if self.projection is not None:
            proj = tuple(self.projection)
            if len(set(proj)) != len(proj):
                raise ValueError("projection indices must be distinct")
            if any(not 0 <= i < self.system.state_dim for i in proj):
                raise ValueError("projection indices out of range")

    @property
    def sample_dim(self) -> int:
        return len(self.projection) if self.projection else self.system.state_dim

    @property
    def sample_names(self) -> tuple[str, ...]:
        names = self.system.state_names
        if self.projection:
            return tuple(names[i] for i in self.projection)
        return names


def rk4_integrate(system: DynamicalSystem, x0, d, t0: float, t1: float,
                  steps: int) -> np.ndarray:
    """Classical fixed-step fourth-order Runge-Kutta.

    ``x0`` may be a single state (n,) or a batch (B, n); ``d`` is the
    constant disturbance with matching leading shape, or None when the
    system has no disturbances.  A non-finite intermediate state raises
    :class:`IntegrationError` carrying the step (and sample) index.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.array(x0, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if d is None:
        d = np.zeros((x.shape[0], system.disturbance_dim))
    d = np.atleast_2d(np.asarray(d, dtype=np.float64))
    f = system.vector_field
    h = (t1 - t0) / steps
    for step in range(steps):
        t = t0 + step * h
        k1 = f(t, x, d)
        k2 = f(t + 0.5 * h, x + (0.5 * h) * k1, d)
        k3 = f(t + 0.5 * h, x + (0.5 * h) * k2, d)
        k4 = f(t + h, x + h * k3, d)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
            raise IntegrationError(
                f"state became non-finite at step {step} (sample {bad})",
                step=step, sample=bad,
            )
    return x[0] if single else x


# --------------------------------------------------------------------------
# Benchmark systems
# --------------------------------------------------------------------------

def duffing(alpha: float = 0.05, gamma: float = 0.4,
            omega: float = 1.3) -> DynamicalSystem:
    """Periodically forced Duffing oscillator (chaotic at the defaults).

    dz/dt = y,  dy/dt = -alpha*y + z - z^3 + gamma*cos(omega*t).
    """
    def f(t, x, d):
        z, y = x[..., 0], x[..., 1]
        return np.stack(
            [y, -alpha * y + z - z**3 + gamma * math.cos(omega * t)], axis=-1
        )

    return DynamicalSystem(2, 0, f, ("z", "y"))


def duffing_problem(alpha: float = 0.05, gamma: float = 0.4, omega: float = 1.3,
                    steps: int = 2000) -> ReachProblem:
    """Benchmark reach problem: z(0) in [0.95, 1.05], y(0) in [-0.05, 0.05],
    time range [0, 100]."""
    return ReachProblem(
        system=duffing(alpha, gamma, omega),
        initial_box=((0.95, 1.05), (-0.05, 0.05)),
        disturbance_box=(),
        t0=0.0, t1=100.0,
        integrator_steps=steps,
    )


def quadrotor(gravity: float = 9.81, thrust_gain: float = 0.64,
              lateral_gain: float | None = None, tilt_stiffness: float = 70.0,
              tilt_damping: float = 17.0,
              tilt_input_gain: float = 55.0) -> DynamicalSystem:
    """Planar quadrotor: horizontal position, altitude and tilt dynamics.

    States (px, vx, ph, vh, theta, omega); constant inputs (u1, u2) act as
    disturbances.  ``lateral_gain`` (the thrust coefficient in the horizontal
    equation) defaults to ``thrust_gain``.

    d2 px = u1 * lateral_gain * sin(theta)
    d2 ph = -gravity + u1 * thrust_gain * cos(theta)
    d2 theta = -tilt_stiffness*theta - tilt_damping*dtheta + tilt_input_gain*u2
    """
    k_lat = thrust_gain if lateral_gain is None else lateral_gain

    def f(t, x, d):
        u1, u2 = d[..., 0], d[..., 1]
        theta, omega = x[..., 4], x[..., 5]
        return np.stack(
            [
                x[..., 1],
                u1 * k_lat * np.sin(theta),
                x[..., 3],
                -gravity + u1 * thrust_gain * np.cos(theta),
                omega,
                -tilt_stiffness * theta - tilt_damping * omega + tilt_input_gain * u2,
            ],
            axis=-1,
        )

    return DynamicalSystem(6, 2, f, ("px", "vx", "ph", "vh", "theta", "omega"))


def quadrotor_problem(steps: int = 500, **params) -> ReachProblem:
    """Benchmark reach problem over [0, 5] s, projected to (px, ph).

    Thrust u1 varies within +-1.5 of the hover value g/L; the commanded tilt
    u2 within +-pi/4.
    """
    system = quadrotor(**params)
    gravity = params.get("gravity", 9.81)
    thrust_gain = params.get("thrust_gain", 0.64)
    hover = gravity / thrust_gain
    return ReachProblem(
        system=system,
        initial_box=(
            (-1.7, 1.7), (-0.8, 0.8), (0.3, 2.0),
            (-1.0, 1.0), (-math.pi / 12, math.pi / 12),
            (-math.pi / 2, math.pi / 2),
        ),
        disturbance_box=((hover - 1.5, hover + 1.5), (-math.pi / 4, math.pi / 4)),
        t0=0.0, t1=5.0,
        integrator_steps=steps,
        projection=(0, 2),
    )


def traffic(n_segments: int = 6, period: float = 30.0,
            free_flow_speed: float = 0.5, wave_speed: float = 1.0 / 6.0,
            max_occupancy: float = 320.0, max_flow: float | None = None,
            outflow_ratio: float = 1.0) -> DynamicalSystem:
    """Cell-transmission road traffic model on a chain of equal segments.

    Each state is the vehicle density of one segment; flow between segments
    is the minimum of capacity, free-flow demand and congestion supply.  The
    dynamics are monotone (order-preserving).  ``max_flow`` defaults to the
    fundamental-diagram crossing v*w*xbar / (v + w); ``outflow_ratio``
    rescales the congestion supply of the final segment.
    """
    if n_segments < 2:
        raise ValueError("n_segments must be >= 2")
    v, w, xbar = free_flow_speed, wave_speed, max_occupancy
    c = v * w * xbar / (v + w) if max_flow is None else max_flow

    def f(t, x, d):
        inflow = d[..., 0]
        out = np.empty_like(x)
        # flow[i] = flow out of segment i into segment i+1
        flow_prev = np.minimum(c, np.minimum(v * x[..., 0],
                                             w * (xbar - x[..., 1])))
        out[..., 0] = (inflow - flow_prev) / period
        for i in range(1, n_segments - 1):
            flow_i = np.minimum(c, np.minimum(v * x[..., i],
                                              w * (xbar - x[..., i + 1])))
            out[..., i] = (flow_prev - flow_i) / period
            flow_prev = flow_i
        supply_last = w * (xbar - x[..., n_segments - 1]) / outflow_ratio
        flow_in_last = np.minimum(c, np.minimum(v * x[..., n_segments - 2],
                                                supply_last))
        flow_out_last = np.minimum(c, v * x[..., n_segments - 1])
        out[..., n_segments - 1] = (flow_in_last - flow_out_last) / period
        return out

    names = tuple(f"x{i + 1}" for i in range(n_segments))
    return DynamicalSystem(n_segments, 1, f, names)


def traffic_problem(steps: int = 1200, **params) -> ReachProblem:
    """Benchmark reach problem: densities start in [100, 200], constant
    inflow in [40/T, 60/T], time range [0, 4T], projected to the last two
    segments."""
    system = traffic(**params)
    n = system.state_dim
    period = params.get("period", 30.0)
    return ReachProblem(
        system=system,
        initial_box=tuple((100.0, 200.0) for _ in range(n)),
        disturbance_box=((40.0 / period, 60.0 / period),),
        t0=0.0, t1=4.0 * period,
        integrator_steps=steps,
        projection=(n - 2, n - 1),
    )


# --------------------------------------------------------------------------
# Sampling and interval hulls
# --------------------------------------------------------------------------

class ReachSampler:
    """IID sample source for a reach problem.

    ``draw(count, rng)`` samples initial states and constant disturbances
    uniformly from their boxes, integrates every trajectory, and returns the
    (optionally projected) final states as a ``(count, dim)`` array.  Output
    is fully determined by the generator state and ordered by sample index.
    """

    def __init__(self, problem: ReachProblem):
        self.problem = problem

    @property
    def dim(self) -> int:
        return self.problem.sample_dim

    def draw(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        p = self.problem
        init = np.asarray(p.initial_box, dtype=np.float64)
        x0 = rng.uniform(init[:, 0], init[:, 1], size=(count, p.system.state_dim))
        if p.system.disturbance_dim:
            dist = np.asarray(p.disturbance_box, dtype=np.float64)
            d = rng.uniform(dist[:, 0], dist[:, 1],
                            size=(count, p.system.disturbance_dim))
        else:
            d = np.zeros((count, 0))
        xf = rk4_integrate(p.system, x0, d, p.t0, p.t1, p.integrator_steps)
        if p.projection:
            xf = xf[:, list(p.projection)]
        return xf


def reach_sampler(problem: ReachProblem) -> ReachSampler:
    return ReachSampler(problem)


def interval_hull(points: np.ndarray) -> np.ndarray:
    """Componentwise (lo, hi) hull of a non-empty sample cloud, shape (n, 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise ValueError("points must be non-empty")
    return np.stack([pts.min(axis=0), pts.max(axis=0)], axis=1)


def monotone_interval_hull(problem: ReachProblem) -> np.ndarray:
    """Tight interval hull of the reachable set of a monotone system.

    Integrates the two extreme corners (all-low and all-high initial state
    and disturbance); for order-preserving dynamics the results bound every
    trajectory componentwise.  Returned with the problem projection applied,
    shape (dim, 2).
    """
    p = problem
    init = np.asarray(p.initial_box, dtype=np.float64)
    dist = np.asarray(p.disturbance_box, dtype=np.float64).reshape(-1, 2)
    x0 = np.stack([init[:, 0], init[:, 1]])
    d = np.stack([dist[:, 0], dist[:, 1]]) if dist.size else np.zeros((2, 0))
    corners = rk4_integrate(p.system, x0, d, p.t0, p.t1, p.integrator_steps)
    if p.projection:
        corners = corners[:, list(p.projection)]
    return np.stack([corners[0], corners[1]], axis=1)

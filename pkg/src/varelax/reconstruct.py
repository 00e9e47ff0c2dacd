"""Turn a relaxed minimizer into a trajectory of the original problem.

Each interval's velocity is split across the hull-edge support points
that realize the relaxed cost; the two resulting sub-intervals are then
ordered to favor the cheaper state cost.  Contiguous sub-intervals are a
valid bang-bang realization as the step vanishes, and the ordering is the
only degree of freedom that affects cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import CaratheodoryDecomposition, caratheodory_decompose
from .discretize import f_envelope, velocity_grid_for
from .problem import DPConfig, Problem, Trajectory

ORDER_TIE_TOL = 1e-12


@dataclass(eq=False)
class VelocityDecompositionTrack:
    """Per-interval velocity splittings of a relaxed trajectory."""

    decompositions: tuple[CaratheodoryDecomposition, ...]
    support_radius: float
    selection_note: str = (
        "discrete time grid: the selection behind the splittings is "
        "piecewise constant, one decomposition per interval"
    )

    @property
    def split_count(self) -> int:
        return sum(1 for d in self.decompositions if not d.trivial)


def decompose_velocities(
    problem: Problem, trajectory: Trajectory, cfg: DPConfig
) -> VelocityDecompositionTrack:
    """Split every interval velocity over its hull-edge support points.

    The support points stay inside one velocity ball whose radius is
    reported; it is a property of the problem, not of the grid.
    """
    grid = velocity_grid_for(problem, cfg, extra=trajectory.velocities)
    decs = []
    for t, xi in zip(trajectory.times[:-1], trajectory.velocities):
        samples, env = f_envelope(problem, grid, float(t))
        decs.append(caratheodory_decompose(samples, env, float(xi)))
    radius = max(float(np.max(np.abs(d.points))) for d in decs)
    return VelocityDecompositionTrack(tuple(decs), radius)


@dataclass(eq=False)
class ReconstructedTrajectory:
    """Bang-bang realization on a refined grid; velocities take support values."""

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    piece: np.ndarray  # support-point label per sub-interval
    f_cost: float
    g_cost: float

    @property
    def total(self) -> float:
        return self.f_cost + self.g_cost

    @property
    def step_bound(self) -> float:
        return float(np.max(np.abs(self.velocities)))


def rearrange(
    problem: Problem, trajectory: Trajectory, track: VelocityDecompositionTrack
) -> ReconstructedTrajectory:
    """Realize each splitting by two contiguous sub-intervals.

    Sub-interval lengths are the decomposition weights times the step, so
    interval-endpoint states are unchanged.  The two orderings are scored
    by midpoint quadrature of the state cost and the cheaper one wins;
    ties keep the decomposition's first support point first.
    """
    step = trajectory.step
    times = [float(trajectory.times[0])]
    states = [float(trajectory.states[0])]
    velocities: list[float] = []
    labels: list[int] = []
    f_cost = 0.0
    g_cost = 0.0
    for i, dec in enumerate(track.decompositions):
        t0 = float(trajectory.times[i])
        x0 = float(trajectory.states[i])
        x1 = float(trajectory.states[i + 1])
        if dec.trivial:
            q = float(dec.points[0])
            f_cost += step * float(dec.point_values[0])
            g_cost += step * float(problem.g.value(t0, x0))
            times.append(float(trajectory.times[i + 1]))
            states.append(x1)
            velocities.append(q)
            labels.append(0)
            continue
        order = _pick_order(problem, dec, t0, x0, step)
        durations = [step * float(dec.weights[j]) for j in order]
        t_cursor, x_cursor = t0, x0
        for pos, j in enumerate(order):
            q = float(dec.points[j])
            dt = durations[pos]
            f_cost += dt * float(dec.point_values[j])
            g_cost += dt * float(problem.g.value(t_cursor, x_cursor))
            t_cursor += dt
            x_cursor += q * dt
            last = pos == len(order) - 1
            times.append(float(trajectory.times[i + 1]) if last else t_cursor)
            states.append(x1 if last else x_cursor)
            velocities.append(q)
            labels.append(int(j))
    return ReconstructedTrajectory(
        times=np.array(times),
        states=np.array(states),
        velocities=np.array(velocities),
        piece=np.array(labels, dtype=np.int64),
        f_cost=f_cost,
        g_cost=g_cost,
    )


def _pick_order(
    problem: Problem, dec: CaratheodoryDecomposition, t0: float, x0: float, step: float
) -> tuple[int, int]:
    def midpoint_cost(order: tuple[int, int]) -> float:
        cost = 0.0
        t_cursor, x_cursor = t0, x0
        for j in order:
            dt = step * float(dec.weights[j])
            q = float(dec.points[j])
            cost += dt * float(problem.g.value(t_cursor + dt / 2.0, x_cursor + q * dt / 2.0))
            t_cursor += dt
            x_cursor += q * dt
        return cost

    forward = midpoint_cost((0, 1))
    swapped = midpoint_cost((1, 0))
    if swapped < forward - ORDER_TIE_TOL:
        return (1, 0)
    return (0, 1)


@dataclass(eq=False)
class CostComparison:
    """Relaxed versus reconstructed costs with the acceptance verdict."""

    f_relaxed: float
    g_relaxed: float
    total_relaxed: float
    f_reconstructed: float
    g_reconstructed: float
    total_reconstructed: float
    f_gap: float
    g_gap: float
    total_gap: float
    f_tolerance: float
    tolerance: float
    passed: bool


def compare_costs(
    problem: Problem,
    relaxed: Trajectory,
    reconstructed: ReconstructedTrajectory,
    state_lipschitz: float | None = None,
) -> CostComparison:
    """PASS when the reconstruction reproduces the relaxed velocity cost
    and does not exceed the relaxed total beyond the step-sized slack
    state_lipschitz * max-speed * step * horizon."""
    if state_lipschitz is None:
        state_lipschitz = _state_lipschitz(problem)
    step = relaxed.step
    n = relaxed.velocities.size
    f_tol = n * 1e-9 * (1.0 + abs(relaxed.f_cost))
    tol = state_lipschitz * reconstructed.step_bound * step * problem.horizon
    f_gap = reconstructed.f_cost - relaxed.f_cost
    g_gap = reconstructed.g_cost - relaxed.g_cost
    total_gap = reconstructed.total - relaxed.value
    passed = abs(f_gap) <= f_tol and reconstructed.total <= relaxed.value + tol + f_tol
    return CostComparison(
        f_relaxed=relaxed.f_cost,
        g_relaxed=relaxed.g_cost,
        total_relaxed=relaxed.value,
        f_reconstructed=reconstructed.f_cost,
        g_reconstructed=reconstructed.g_cost,
        total_reconstructed=reconstructed.total,
        f_gap=float(f_gap),
        g_gap=float(g_gap),
        total_gap=float(total_gap),
        f_tolerance=float(f_tol),
        tolerance=float(tol),
        passed=bool(passed),
    )


def _state_lipschitz(problem: Problem, n_t: int = 9, n_x: int = 129) -> float:
    lo, hi = problem.state_box
    xs = np.linspace(lo, hi, n_x)
    worst = 0.0
    for t in np.linspace(0.0, problem.horizon, n_t):
        vals = problem.g.value(float(t), xs)
        worst = max(worst, float(np.max(np.abs(np.diff(vals) / np.diff(xs)))))
    return worst

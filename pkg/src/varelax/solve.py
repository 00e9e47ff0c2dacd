"""Dynamic-programming solver for the relaxed problem, speed-budget
sweeps, penalized variants, and the a-priori coercivity check.

The DP is exact on its grid: transitions run between state-grid nodes
with per-interval constant velocities, time-dependent costs are sampled
at the left endpoint of each interval, and ties are broken toward the
smallest predecessor index so results are schedule-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import HypothesisReport
from .convex import Grid1D, evaluate_envelope, evaluate_envelope_many
from .discretize import exact_index, f_envelope, state_grid, transition_table
from .errors import CertificateError, InfeasibleError
from .problem import DPConfig, Problem, SweepReport, Trajectory

SETTLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class _Tables:
    xs: np.ndarray
    times: np.ndarray
    step: float
    vgrid: Grid1D
    qindex: np.ndarray
    i_start: int
    i_end: int


def _tables(problem: Problem, cfg: DPConfig) -> _Tables:
    xs = state_grid(problem, cfg.n_x)
    step = problem.horizon / cfg.n_t
    times = np.linspace(0.0, problem.horizon, cfg.n_t + 1)
    values, qindex = transition_table(xs, step, problem.velocity_cap)
    return _Tables(
        xs=xs,
        times=times,
        step=step,
        vgrid=Grid1D(values),
        qindex=qindex,
        i_start=exact_index(xs, problem.start, "start"),
        i_end=exact_index(xs, problem.end, "end"),
    )


def _quotient_costs(problem: Problem, cfg: DPConfig, tab: _Tables, t: float) -> np.ndarray:
    _, env = f_envelope(problem, tab.vgrid, t)
    costs = evaluate_envelope_many(env, tab.vgrid.points)
    if cfg.penalty > 0.0 and cfg.theta is not None:
        costs = costs + cfg.penalty * cfg.theta(tab.vgrid.points)
    return costs


def _backtrack(tab: _Tables, back: np.ndarray) -> np.ndarray:
    n_t = back.shape[0]
    idx = np.empty(n_t + 1, dtype=np.int64)
    idx[-1] = tab.i_end
    for i in range(n_t - 1, -1, -1):
        idx[i] = back[i, idx[i + 1]]
    return idx


def _assemble(
    problem: Problem, cfg: DPConfig, tab: _Tables, idx: np.ndarray
) -> tuple[Trajectory, float]:
    xs, step = tab.xs, tab.step
    states = xs[idx]
    q = tab.vgrid.points[tab.qindex[idx[:-1], idx[1:]]]
    f_cost = 0.0
    g_cost = 0.0
    for i in range(q.size):
        t = tab.times[i]
        _, env = f_envelope(problem, tab.vgrid, t)
        f_cost += step * evaluate_envelope(env, q[i])
        g_cost += step * float(problem.g.value(t, states[i]))
    penalty_cost = 0.0
    theta_value = None
    if cfg.theta is not None:
        theta_value = float(step * np.sum(cfg.theta(q)))
        penalty_cost = cfg.penalty * theta_value
    warnings = []
    interior = states[1:-1]
    if interior.size and (np.any(interior == xs[0]) or np.any(interior == xs[-1])):
        warnings.append("boundary-contact")
    if np.any(np.abs(q) >= problem.velocity_cap * (1.0 - 1e-12)):
        warnings.append("cap-saturation")
    return Trajectory(
        times=tab.times,
        states=states,
        velocities=q,
        value=f_cost + g_cost,
        f_cost=f_cost,
        g_cost=g_cost,
        theta_value=theta_value,
        warnings=tuple(warnings),
    ), penalty_cost


def _plain_dp(problem: Problem, cfg: DPConfig) -> Trajectory:
    tab = _tables(problem, cfg)
    n_x = tab.xs.size
    qindex = tab.qindex
    admissible = qindex >= 0
    safe_q = np.where(admissible, qindex, 0)
    value = np.full(n_x, np.inf)
    value[tab.i_start] = 0.0
    back = np.empty((cfg.n_t, n_x), dtype=np.int64)
    for i in range(cfg.n_t):
        t = tab.times[i]
        fq = _quotient_costs(problem, cfg, tab, t)
        gx = problem.g.value(t, tab.xs)
        move = np.where(admissible, fq[safe_q], np.inf)
        candidates = value[:, None] + tab.step * (gx[:, None] + move)
        back[i] = np.argmin(candidates, axis=0)
        value = np.min(candidates, axis=0)
    if not np.isfinite(value[tab.i_end]):
        raise InfeasibleError("no admissible grid path connects the endpoints")
    idx = _backtrack(tab, back)
    traj, penalty_cost = _assemble(problem, cfg, tab, idx)
    total = traj.value + penalty_cost
    if abs(total - value[tab.i_end]) > 1e-9 * (1.0 + abs(total)):
        raise CertificateError("trajectory cost does not reproduce the DP value")
    return traj


def solve_relaxed(problem: Problem, cfg: DPConfig) -> Trajectory:
    """Exact minimizer of the discrete relaxed problem on the given grids.

    Costs use the lower convex hull of the velocity slice at each time
    node, so non-convex integrands are solved in relaxed form.  With a
    ``theta_budget`` configured the search is restricted to paths whose
    quantized speed budget stays within the bound.  The ``penalty`` field
    is ignored here; ``nagumo_penalized_solve`` owns it.
    """
    base = cfg if cfg.penalty == 0.0 else _without_penalty(cfg)
    if cfg.theta_budget is not None:
        value, idx = _budget_dp(problem, base, cfg.theta_budget, want_path=True)
        tab = _tables(problem, base)
        traj, _ = _assemble(problem, base, tab, idx)
        if abs(traj.value - value) > 1e-9 * (1.0 + abs(value)):
            raise CertificateError("trajectory cost does not reproduce the DP value")
        return traj
    return _plain_dp(problem, base)


def _without_penalty(cfg: DPConfig) -> DPConfig:
    return DPConfig(
        n_t=cfg.n_t,
        n_x=cfg.n_x,
        theta=cfg.theta,
        penalty=0.0,
        theta_budget=cfg.theta_budget,
        budget_levels=cfg.budget_levels,
    )


def nagumo_penalized_solve(problem: Problem, cfg: DPConfig) -> Trajectory:
    """DP on the penalized cost f** + g + penalty * theta(|x'|).

    With ``penalty == 0`` this is bit-identical to ``solve_relaxed``.  The
    reported ``value`` stays the unpenalized running cost; the penalized
    objective is ``value + penalty * theta_value``.
    """
    if cfg.theta is None:
        raise CertificateError("penalized solve requires a Nagumo entry")
    return _plain_dp(problem, cfg)


def _quotient_groups(qindex: np.ndarray, n_q: int):
    flat = qindex.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_vals = flat[order]
    groups = []
    n = qindex.shape[0]
    for q in range(n_q):
        lo = np.searchsorted(sorted_vals, q, side="left")
        hi = np.searchsorted(sorted_vals, q, side="right")
        pos = order[lo:hi]
        groups.append((pos // n, pos % n))
    return groups


def _budget_dp(
    problem: Problem,
    cfg: DPConfig,
    budget: float,
    want_path: bool = False,
    precomputed: dict | None = None,
):
    """DP over (used-budget, state) with conservative integer budget units.

    Per-step speed budgets are rounded up to the quantum budget/levels, so
    any accepted path satisfies the true budget, and rounding up means
    feasibility can only grow along an increasing budget schedule.
    """
    if cfg.theta is None:
        raise CertificateError("budget-constrained solve requires a Nagumo entry")
    tab = precomputed["tab"] if precomputed else _tables(problem, cfg)
    n_x = tab.xs.size
    n_q = tab.vgrid.points.size
    groups = precomputed["groups"] if precomputed else _quotient_groups(tab.qindex, n_q)
    theta_q = cfg.theta(tab.vgrid.points)
    quantum = budget / cfg.budget_levels
    units = np.ceil(tab.step * theta_q / quantum).astype(np.int64)
    units = np.maximum(units, 0)
    capacity = cfg.budget_levels
    value = np.full((capacity + 1, n_x), np.inf)
    value[0, tab.i_start] = 0.0
    back = (
        np.full((cfg.n_t, capacity + 1, n_x), -1, dtype=np.int64) if want_path else None
    )
    for i in range(cfg.n_t):
        t = tab.times[i]
        if precomputed and "fq" in precomputed:
            fq = precomputed["fq"][i]
            gx = precomputed["gx"][i]
        else:
            fq = _quotient_costs(problem, cfg, tab, t)
            gx = problem.g.value(t, tab.xs)
        nxt = np.full_like(value, np.inf)
        bck = back[i] if want_path else None
        for q in range(n_q):
            u = int(units[q])
            if u > capacity:
                continue
            jq, kq = groups[q]
            if jq.size == 0:
                continue
            cand = value[: capacity + 1 - u, jq] + tab.step * (gx[jq] + fq[q])[None, :]
            block = nxt[u:, kq]
            better = cand < block
            if better.any():
                nxt[u:, kq] = np.where(better, cand, block)
                if want_path:
                    prev = bck[u:, kq]
                    bck[u:, kq] = np.where(better, jq[None, :], prev)
        value = nxt
    column = value[:, tab.i_end]
    if not np.any(np.isfinite(column)):
        if want_path:
            raise InfeasibleError("speed budget excludes every admissible path")
        return None, None
    best = float(np.min(column))
    if not want_path:
        return best, None
    b = int(np.argmin(column))
    idx = np.empty(cfg.n_t + 1, dtype=np.int64)
    idx[-1] = tab.i_end
    for i in range(cfg.n_t - 1, -1, -1):
        j = int(back[i, b, idx[i + 1]])
        q = tab.qindex[j, idx[i + 1]]
        b -= int(units[q])
        idx[i] = j
    return best, idx


def value_sweep(
    problem: Problem, cfg: DPConfig, budget_schedule: np.ndarray
) -> SweepReport:
    """Constrained value along an increasing speed-budget schedule.

    Rounding the per-step budget up to each entry's quantum makes larger
    budgets admit every path a smaller one does, so the feasible values
    are nonincreasing by construction.  The settle index is reported when
    the last quarter of the schedule agrees within tolerance.
    """
    if cfg.theta is None:
        raise CertificateError("value sweep requires a Nagumo entry")
    budgets = np.asarray(budget_schedule, dtype=float)
    if budgets.size < 2 or not np.all(np.diff(budgets) > 0):
        raise CertificateError("budget schedule must be increasing with >= 2 entries")
    if budgets[0] <= 0.0:
        raise CertificateError("budget schedule entries must be positive")
    tab = _tables(problem, cfg)
    n_q = tab.vgrid.points.size
    pre = {
        "tab": tab,
        "groups": _quotient_groups(tab.qindex, n_q),
    }
    if cfg.n_t * n_q <= 20_000_000:  # cache envelope costs across the sweep
        pre["fq"] = [_quotient_costs(problem, cfg, tab, t) for t in tab.times[:-1]]
        pre["gx"] = [problem.g.value(t, tab.xs) for t in tab.times[:-1]]
    values: list[float | None] = []
    for budget in budgets:
        v, _ = _budget_dp(problem, cfg, float(budget), want_path=False, precomputed=pre)
        values.append(v)
    feasible = [(i, v) for i, v in enumerate(values) if v is not None]
    for (_, v1), (_, v2) in zip(feasible, feasible[1:]):
        if v2 > v1 + SETTLE_TOL * (1.0 + abs(v1)):
            raise CertificateError("constrained values increased along the schedule")
    settle = settle_index(budgets, values)
    return SweepReport(budgets=budgets, values=values, settle_index=settle)


def lagrangian_sweep(
    problem: Problem,
    cfg: DPConfig,
    budget_schedule: np.ndarray,
    multiplier_schedule: np.ndarray | None = None,
) -> SweepReport:
    """Fast dual lower bound on the budget-constrained values.

    One penalized solve per multiplier covers the whole budget schedule:
    each multiplier contributes the affine bound (penalized minimum)
    - multiplier * budget, and the pointwise maximum over multipliers
    bounds the constrained value from below.  This is an approximation;
    the authoritative sweep is ``value_sweep``.
    """
    if cfg.theta is None:
        raise CertificateError("Lagrangian sweep requires a Nagumo entry")
    budgets = np.asarray(budget_schedule, dtype=float)
    if budgets.size < 2 or not np.all(np.diff(budgets) > 0):
        raise CertificateError("budget schedule must be increasing with >= 2 entries")
    if multiplier_schedule is None:
        multiplier_schedule = np.concatenate([[0.0], 2.0 ** np.arange(-6.0, 7.0)])
    multipliers = np.asarray(multiplier_schedule, dtype=float)
    if np.any(multipliers < 0.0):
        raise CertificateError("multipliers must be nonnegative")
    penalized_minima = []
    for rate in multipliers:
        traj = _plain_dp(problem, _with_penalty(cfg, float(rate)))
        penalized_minima.append(traj.value + float(rate) * traj.theta_value)
    duals = np.array(penalized_minima)[:, None] - multipliers[:, None] * budgets[None, :]
    values = [float(v) for v in duals.max(axis=0)]
    return SweepReport(
        budgets=budgets, values=values, settle_index=settle_index(budgets, values)
    )


def _with_penalty(cfg: DPConfig, rate: float) -> DPConfig:
    return DPConfig(
        n_t=cfg.n_t,
        n_x=cfg.n_x,
        theta=cfg.theta,
        penalty=rate,
        theta_budget=None,
        budget_levels=cfg.budget_levels,
    )


def settle_index(
    budgets: np.ndarray, values: list[float | None], tol: float = SETTLE_TOL
) -> int | None:
    """First index after which the values stay constant within tolerance,
    provided the last quarter of the schedule already agrees."""
    window = -(-budgets.size // 4)  # ceil(K/4)
    tail = values[-window:]
    if any(v is None for v in tail):
        return None
    last = tail[-1]
    if max(abs(v - last) for v in tail) > tol:
        return None
    settle = budgets.size - 1
    while settle > 0:
        v = values[settle - 1]
        if v is None or abs(v - last) > tol:
            break
        settle -= 1
    return settle


@dataclass(frozen=True, eq=False)
class CoercivityReport:
    """Discrete version of the reference-path chain bounding the L1 speed."""

    reference_value: float
    trajectory_value: float
    linear_lower_bound: float
    velocity_l1: float
    state_l1: float
    velocity_l1_bound: float | None
    reference_ok: bool
    lower_bound_ok: bool
    velocity_bound_ok: bool | None

    @property
    def consistent(self) -> bool:
        checks = [self.reference_ok, self.lower_bound_ok]
        if self.velocity_bound_ok is not None:
            checks.append(self.velocity_bound_ok)
        return all(checks)


def coercivity_bound_check(
    problem: Problem,
    trajectory: Trajectory,
    hypotheses: HypothesisReport,
    cfg: DPConfig,
) -> CoercivityReport:
    """Verify the cost chain reference >= trajectory >= linear lower bound
    and the implied a-priori bound on the discrete L1 speed norm.

    A violated inequality flags inconsistent hypothesis constants rather
    than raising: the report is a diagnostic on fitted constants.
    """
    tab = _tables(problem, cfg)
    mean_speed = (problem.end - problem.start) / problem.horizon
    raw = problem.start + mean_speed * tab.times
    snapped = tab.xs[np.argmin(np.abs(tab.xs[:, None] - raw[None, :]), axis=0)]
    snapped[0] = problem.start
    snapped[-1] = problem.end
    ref_value = _path_cost(problem, tab, snapped)

    a_const = hypotheses.f_bound_offset
    alpha = hypotheses.g_bound_offset
    b_slope = hypotheses.f_bound_slope
    beta = hypotheses.g_bound_slope
    horizon = problem.horizon
    vel_l1 = trajectory.velocity_l1()
    state_l1 = trajectory.state_l1()
    lower = (-a_const - alpha) * horizon + b_slope * vel_l1 - beta * state_l1

    tol = 1e-9
    reference_ok = ref_value >= trajectory.value - tol * (1.0 + abs(ref_value))
    lower_ok = trajectory.value >= lower - tol * (1.0 + abs(lower))
    denom = b_slope - beta * horizon
    if denom > 0:
        tilde_a = (-a_const - alpha) * horizon - beta * horizon * abs(problem.start)
        bound = (ref_value - tilde_a) / denom
        vel_ok = vel_l1 <= bound + tol * (1.0 + abs(bound))
    else:
        bound = None
        vel_ok = None
    return CoercivityReport(
        reference_value=ref_value,
        trajectory_value=trajectory.value,
        linear_lower_bound=lower,
        velocity_l1=vel_l1,
        state_l1=state_l1,
        velocity_l1_bound=bound,
        reference_ok=bool(reference_ok),
        lower_bound_ok=bool(lower_ok),
        velocity_bound_ok=None if vel_ok is None else bool(vel_ok),
    )


def _path_cost(problem: Problem, tab: _Tables, states: np.ndarray) -> float:
    q = np.diff(states) / tab.step
    if np.any(np.abs(q) > problem.velocity_cap * (1.0 + 1e-12)):
        raise InfeasibleError("reference path violates the velocity cap")
    total = 0.0
    for i in range(q.size):
        t = tab.times[i]
        _, env = f_envelope(problem, tab.vgrid, t)
        total += tab.step * (
            evaluate_envelope(env, q[i]) + float(problem.g.value(t, states[i]))
        )
    return total

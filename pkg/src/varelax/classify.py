"""Numerical certificates for the structural hypotheses behind the solver.

Every limit statement is probed over a declared radius schedule with a
declared threshold, and every reported constant is fitted on a declared
probe box.  Verdicts are certificates over the probed range, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .convex import (
    ConvexEnvelope,
    Grid1D,
    SampledFunction,
    caratheodory_decompose,
    evaluate_envelope,
    evaluate_envelope_many,
    lower_convex_hull,
    subdifferential,
)
from .errors import CertificateError
from .families import IntegrandFamily

DEFAULT_DIVERGENCE_THRESHOLD = 1e3
STABILIZE_TOL = 1e-6


def default_radius_schedule() -> np.ndarray:
    """Dyadic radii 16 .. 2^23.

    The top end is far enough out that the linear-growth family's slow
    divergence crosses the default threshold, while the stabilization
    test resolves bounded tails below 1e-6.
    """
    return 2.0 ** np.arange(4, 24)


def _slope_bounds(env: ConvexEnvelope, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized subdifferential endpoints at in-domain points."""
    bp, slopes = env.breakpoints, env.edge_slopes
    pts = np.asarray(pts, dtype=float)
    idx = np.searchsorted(bp, pts)
    idx = np.clip(idx, 0, bp.size - 1)
    exact = bp[idx] == pts
    edge = np.clip(idx - 1, 0, slopes.size - 1)
    lo = slopes[edge].copy()
    hi = slopes[edge].copy()
    ebi = idx[exact]
    lo[exact] = slopes[np.clip(ebi - 1, 0, slopes.size - 1)]
    hi[exact] = slopes[np.clip(ebi, 0, slopes.size - 1)]
    return lo, hi


def _erdmann_sup_on_grid(env: ConvexEnvelope, pts: np.ndarray) -> np.ndarray:
    """max over subgradient selections of envelope(xi) - p*xi, per point."""
    vals = evaluate_envelope_many(env, pts)
    lo, hi = _slope_bounds(env, pts)
    return vals - np.minimum(lo * pts, hi * pts)


def erdmann_value(
    family: IntegrandFamily, t: float, xi: float, env: ConvexEnvelope
) -> float:
    """Envelope value minus the midpoint-subgradient linearization at xi."""
    p = subdifferential(env, xi).midpoint
    return evaluate_envelope(env, xi) - p * xi


@dataclass(frozen=True, eq=False)
class ClassECertificate:
    radii: np.ndarray
    chi_values: np.ndarray
    verdict: str  # "diverges" | "bounded" | "inconclusive"
    divergence_slope: float
    threshold: float

    @property
    def diverges(self) -> bool:
        return self.verdict == "diverges"


def class_e_certificate(
    family: IntegrandFamily,
    t_grid: np.ndarray,
    radius_schedule: np.ndarray | None = None,
    threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
    grid_points: int = 257,
    box_margin: float = 2.0,
) -> ClassECertificate:
    """Probe whether the worst-case linearization defect diverges.

    For each radius R the probe rebuilds the envelope on the expanding box
    [-margin*R, margin*R] and takes chi(R) = sup over sampled times and
    grid points beyond R of the envelope value minus its steepest
    supporting linearization.  chi must come out nonincreasing; a rise
    beyond tolerance signals an envelope bug rather than a property of the
    integrand.
    """
    radii = np.asarray(
        default_radius_schedule() if radius_schedule is None else radius_schedule,
        dtype=float,
    )
    if radii.size < 4 or not np.all(np.diff(radii) > 0):
        raise CertificateError("radius schedule must be increasing with at least 4 entries")
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    chi = np.empty(radii.size)
    for k, radius in enumerate(radii):
        box = box_margin * radius
        grid = Grid1D(np.linspace(-box, box, grid_points))
        beyond = np.abs(grid.points) > radius
        best = -np.inf
        for t in t_grid:
            env = lower_convex_hull(family.sample(t, grid))
            values = _erdmann_sup_on_grid(env, grid.points[beyond])
            best = max(best, float(values.max()))
        chi[k] = best
    diffs = np.diff(chi)
    tol = 1e-9 * np.maximum(1.0, np.abs(chi[:-1]))
    if np.any(diffs > tol):
        raise CertificateError("chi sequence increased along the radius schedule")
    if radii.size >= 2:
        half = radii.size // 2
        fit = np.polyfit(radii[half:], chi[half:], 1)
        slope = float(fit[0])
    else:
        slope = 0.0
    if np.all(diffs < 0) and chi[-1] < -threshold:
        verdict = "diverges"
    elif abs(chi[-1] - chi[-2]) <= STABILIZE_TOL and chi[-1] >= -threshold:
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    return ClassECertificate(radii, chi, verdict, slope, threshold)


@dataclass(frozen=True, eq=False)
class SciProbe:
    direction: float
    inner_slope: float
    outer_slope: float
    increase: float
    passed: bool


@dataclass(frozen=True, eq=False)
class SciCertificate:
    probes: tuple[SciProbe, ...]
    passed: bool


def sci_certificate(
    family: IntegrandFamily,
    t: float,
    radius_schedule: np.ndarray | None = None,
    directions: tuple[float, ...] = (1.0, -1.0),
    grid_points: int = 257,
) -> SciCertificate:
    """Check that the envelope's directional slope keeps increasing.

    A direction fails when the slope shows no strict increase across the
    last two radius shells: a terminal flat run is the discrete signature
    of a ray in the graph.
    """
    radii = np.asarray(
        default_radius_schedule() if radius_schedule is None else radius_schedule,
        dtype=float,
    )
    if radii.size < 4 or not np.all(np.diff(radii) > 0):
        raise CertificateError("radius schedule must be increasing with at least 4 entries")
    box = float(radii[-1])
    inner = float(radii[-3])
    grid = Grid1D(np.linspace(-box, box, grid_points))
    env = lower_convex_hull(family.sample(t, grid))
    probes = []
    for direction in directions:
        p_in = direction * inner
        p_out = direction * box
        sub_in = subdifferential(env, p_in)
        sub_out = subdifferential(env, p_out)
        if direction > 0:
            inner_slope, outer_slope = sub_in.hi, sub_out.lo
            increase = outer_slope - inner_slope
        else:
            inner_slope, outer_slope = sub_in.lo, sub_out.hi
            increase = -(outer_slope - inner_slope)
        tol = 1e-9 * max(1.0, abs(inner_slope), abs(outer_slope))
        probes.append(
            SciProbe(direction, inner_slope, outer_slope, increase, increase > tol)
        )
    return SciCertificate(tuple(probes), all(p.passed for p in probes))


@dataclass(frozen=True, eq=False)
class GrowthConstants:
    """Linear minorant of the recentred envelope: phi(xi) >= c*|xi - center|."""

    c: float
    rho: float
    shift_slope: float
    shift_intercept: float
    center: float


def _envelope_has_terminal_flat(env: ConvexEnvelope, center: float) -> bool:
    slopes = env.edge_slopes
    bp = env.breakpoints
    e_center = int(np.clip(np.searchsorted(bp, center) - 1, 0, slopes.size - 1))
    right = slopes[e_center:]
    left = slopes[: e_center + 1]
    tol_r = 1e-9 * max(1.0, float(np.max(np.abs(right))) if right.size else 1.0)
    tol_l = 1e-9 * max(1.0, float(np.max(np.abs(left))) if left.size else 1.0)
    if right.size == 1 or (right.size >= 2 and right[-1] - right[-2] <= tol_r):
        return True
    if left.size == 1 or (left.size >= 2 and left[1] - left[0] <= tol_l):
        return True
    return False


def growth_constants(samples: SampledFunction) -> GrowthConstants:
    """Largest verified linear-growth constant of the recentred envelope.

    The envelope is recentred by subtracting the supporting line at the
    midpoint of its argmin set; the recentred function is then nonnegative
    and vanishes at the center, and the certificate returns the largest c
    with phi >= c*dist verified on all grid points beyond rho.
    """
    env = lower_convex_hull(samples)
    hv = env.hull_values
    vmin = float(hv.min())
    flat = np.flatnonzero(hv <= vmin + 1e-12 * (1.0 + abs(vmin)))
    center = 0.5 * (env.breakpoints[flat[0]] + env.breakpoints[flat[-1]])
    if _envelope_has_terminal_flat(env, center):
        raise CertificateError(
            "envelope has a terminal flat run; no linear growth constant exists"
        )
    shift_slope = subdifferential(env, center).midpoint
    value_at_center = evaluate_envelope(env, center)
    grid = samples.grid.points
    phi = evaluate_envelope_many(env, grid) - (
        value_at_center + shift_slope * (grid - center)
    )
    phi = np.maximum(phi, 0.0)
    dist = np.abs(grid - center)
    zero_tol = 1e-12 * (1.0 + float(phi.max()))
    zero_dists = dist[phi <= zero_tol]
    rho_inner = float(zero_dists.max()) if zero_dists.size else 0.0
    beyond_inner = dist[dist > rho_inner]
    if beyond_inner.size == 0:
        raise CertificateError("no grid points beyond the flat region")
    rho = 0.5 * (rho_inner + float(beyond_inner.min()))
    mask = dist > rho
    c = float(np.min(phi[mask] / dist[mask]))
    if c <= 0.0:
        raise CertificateError("recentred envelope admits no positive growth constant")
    return GrowthConstants(
        c=c,
        rho=rho,
        shift_slope=float(shift_slope),
        shift_intercept=float(value_at_center - shift_slope * center),
        center=float(center),
    )


# ---------------------------------------------------------------------------
# Hypothesis constants on a probe box.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProbeBox:
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        for name in ("times", "states", "velocities"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 2 or not np.all(np.isfinite(arr)):
                raise CertificateError(f"probe {name} must be a finite 1-d grid")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class HypothesisReport:
    f_bound_offset: float  # f >= -offset + slope*|xi| on the probe box
    f_bound_slope: float
    g_bound_offset: float  # g >= -offset - slope*|x| on the probe box
    g_bound_slope: float
    slope_margin: float  # f_bound_slope / horizon - g_bound_slope
    time_lipschitz: float
    drift_cost_coeff: float  # |d phi/dt| <= c0*|phi| + c1*|x| + c2
    drift_state_coeff: float
    drift_const: float
    drift_slack: float
    g_concave_per_t: np.ndarray
    f_convex_per_t: np.ndarray
    h1_pass: bool
    h2_pass: bool

    @property
    def g_concave(self) -> bool:
        return bool(np.all(self.g_concave_per_t))

    @property
    def f_convex(self) -> bool:
        return bool(np.all(self.f_convex_per_t))


def _fit_bound_line(r, vmin, vmax, candidate_slopes, tie_key):
    """Deterministic line fit below pooled minima, minimizing maximum slack."""
    best = None
    for s in candidate_slopes:
        b = float(np.min(vmin - s * r))
        slack = float(np.max(vmax - s * r - b))
        key = (slack,) + tie_key(s, b)
        if best is None or key < best[0]:
            best = (key, s, b, slack)
    return best[1], best[2], best[3]


def _pooled_radial_profile(radii, values):
    """Per unique radius: pooled min and max of the value cloud."""
    r = np.abs(np.asarray(radii, dtype=float))
    order = np.argsort(r, kind="stable")
    r_sorted = r[order]
    v_sorted = values[..., order] if values.ndim > 1 else values[order]
    uniq, start = np.unique(r_sorted, return_index=True)
    vmins, vmaxs = [], []
    edges = list(start) + [r_sorted.size]
    flat = v_sorted.reshape(-1, r_sorted.size) if values.ndim > 1 else v_sorted[None, :]
    for i in range(uniq.size):
        block = flat[:, edges[i] : edges[i + 1]]
        vmins.append(float(block.min()))
        vmaxs.append(float(block.max()))
    return uniq, np.array(vmins), np.array(vmaxs)


def _hull_edge_slopes(r, vmin):
    if r.size < 2:
        return np.array([0.0])
    env = lower_convex_hull(SampledFunction(Grid1D(r), vmin))
    return env.edge_slopes


def hypothesis_check(problem, probe: ProbeBox | None = None) -> HypothesisReport:
    """Fit the structural constants on a probe box and report pass/fail.

    Constants minimize the maximum slack of their inequality over the probe
    grid, with ties broken toward smaller constants, so reports are
    deterministic and reproducible.  Failures are reported, never raised.
    """
    if probe is None:
        probe = default_probe(problem)
    ts, xs, xis = probe.times, probe.states, probe.velocities
    f_vals = np.stack([problem.f.value(t, xis) for t in ts])  # (nt, nxi)
    g_vals = np.stack([problem.g.value(t, xs) for t in ts])  # (nt, nx)

    # f lower bound: -A + B|xi|
    r_u, fmin_u, fmax_u = _pooled_radial_profile(xis, f_vals)
    slopes_f = _hull_edge_slopes(r_u, fmin_u)
    b_slope, b_intercept, _ = _fit_bound_line(
        r_u, fmin_u, fmax_u, slopes_f, tie_key=lambda s, b: (s, -b)
    )
    f_offset, f_slope = -b_intercept, b_slope

    # g lower bound: -alpha - beta|x|, beta >= 0
    rg_u, gmin_u, gmax_u = _pooled_radial_profile(xs, g_vals)
    slopes_g = [s for s in _hull_edge_slopes(rg_u, gmin_u) if s <= 0.0] + [0.0]
    gb_slope, gb_intercept, _ = _fit_bound_line(
        rg_u, gmin_u, gmax_u, slopes_g, tie_key=lambda s, b: (-s, -b)
    )
    g_offset, g_slope = -gb_intercept, -gb_slope

    # time Lipschitz constant of f on the probe box
    df = np.abs(np.diff(f_vals, axis=0))
    dt = np.diff(ts)[:, None]
    time_lip = float(np.max(df / dt)) if ts.size > 1 else 0.0

    # drift bound |d(g + f**)/dt| <= c0|phi| + c1|x| + c2
    c0, c1, c2, slack = _fit_drift_bound(problem, ts, xs, xis)

    # concavity / convexity probes per sampled time
    g_concave = np.array([_midpoint_concave(problem.g, t, xs) for t in ts])
    f_convex = np.array([_samples_convex(problem.f, t, xis) for t in ts])

    margin = f_slope / problem.horizon - g_slope
    return HypothesisReport(
        f_bound_offset=float(f_offset),
        f_bound_slope=float(f_slope),
        g_bound_offset=float(g_offset),
        g_bound_slope=float(g_slope),
        slope_margin=float(margin),
        time_lipschitz=time_lip,
        drift_cost_coeff=c0,
        drift_state_coeff=c1,
        drift_const=c2,
        drift_slack=slack,
        g_concave_per_t=g_concave,
        f_convex_per_t=f_convex,
        h1_pass=bool(f_slope > 0.0),
        h2_pass=bool(g_slope >= 0.0 and margin > 0.0),
    )


def default_probe(problem, n_t: int = 9, n_x: int = 33, n_xi: int = 65) -> ProbeBox:
    lo, hi = problem.state_box
    return ProbeBox(
        times=np.linspace(0.0, problem.horizon, n_t),
        states=np.linspace(lo, hi, n_x),
        velocities=np.linspace(-problem.velocity_cap, problem.velocity_cap, n_xi),
    )


def _midpoint_concave(family: IntegrandFamily, t: float, xs: np.ndarray) -> bool:
    vals = family.value(t, xs)
    xi, xj = np.meshgrid(xs, xs)
    vi, vj = np.meshgrid(vals, vals)
    mids = family.value(t, (xi + xj) / 2.0)
    return bool(np.all(mids >= (vi + vj) / 2.0 - 1e-9))


def _samples_convex(family: IntegrandFamily, t: float, xis: np.ndarray) -> bool:
    samples = family.sample(t, Grid1D(xis))
    env = lower_convex_hull(samples)
    gap = samples.values - evaluate_envelope_many(env, xis)
    return bool(np.max(gap) <= 1e-9 * (1.0 + float(np.max(np.abs(samples.values)))))


def _fit_drift_bound(problem, ts, xs, xis):
    grid = Grid1D(xis)
    span = float(ts[-1] - ts[0])
    step = span / (4.0 * max(ts.size - 1, 1)) if span > 0 else 0.0

    def fstar(t):
        env = lower_convex_hull(problem.f.sample(t, grid))
        return evaluate_envelope_many(env, xis)

    phis, vels = [], []
    for t in ts:
        phi_t = problem.g.value(t, xs)[:, None] + fstar(t)[None, :]
        if step == 0.0:
            v_t = np.zeros_like(phi_t)
        else:
            t_lo = max(t - step, float(ts[0]))
            t_hi = min(t + step, float(ts[-1]))
            phi_lo = problem.g.value(t_lo, xs)[:, None] + fstar(t_lo)[None, :]
            phi_hi = problem.g.value(t_hi, xs)[:, None] + fstar(t_hi)[None, :]
            v_t = (phi_hi - phi_lo) / (t_hi - t_lo)
        phis.append(phi_t)
        vels.append(v_t)
    abs_phi = np.abs(np.stack(phis)).ravel()
    abs_v = np.abs(np.stack(vels)).ravel()
    abs_x = np.abs(np.broadcast_to(xs[None, :, None], (ts.size, xs.size, xis.size))).ravel()

    # Two-phase LP: minimize the maximum slack, then shrink the constants.
    n = abs_phi.size
    a_low = np.column_stack([-abs_phi, -abs_x, -np.ones(n), np.zeros(n)])
    a_high = np.column_stack([abs_phi, abs_x, np.ones(n), -np.ones(n)])
    a_ub = np.vstack([a_low, a_high])
    b_ub = np.concatenate([-abs_v, abs_v])
    res1 = linprog(
        c=[0.0, 0.0, 0.0, 1.0],
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(0, None)] * 4,
        method="highs",
    )
    if not res1.success:
        raise CertificateError(f"drift-bound fit failed: {res1.message}")
    slack_cap = float(res1.x[3]) * (1.0 + 1e-9) + 1e-12
    a_ub2 = np.vstack([a_low[:, :3], a_high[:, :3]])
    b_ub2 = np.concatenate([-abs_v, abs_v + slack_cap])
    res2 = linprog(
        c=[1.0, 1.0, 1.0],
        A_ub=a_ub2,
        b_ub=b_ub2,
        bounds=[(0, None)] * 3,
        method="highs",
    )
    if not res2.success:
        raise CertificateError(f"drift-bound refinement failed: {res2.message}")
    c0, c1, c2 = (float(v) for v in res2.x)
    slack = float(np.max(c0 * abs_phi + c1 * abs_x + c2 - abs_v))
    return c0, c1, c2, slack


# ---------------------------------------------------------------------------
# Time regularity of the envelope.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeLipschitzEntry:
    velocity: float
    support_radius: float
    envelope_rate: float
    integrand_rate: float
    conclusive: bool
    passed: bool


@dataclass(frozen=True, eq=False)
class TimeLipschitzReport:
    entries: tuple[TimeLipschitzEntry, ...]
    passed: bool
    conclusive: bool


def fstar_lipschitz_check(
    family: IntegrandFamily,
    xi_probe: np.ndarray,
    t_grid: np.ndarray,
    probe_radius: float | None = None,
    grid_points: int = 513,
) -> TimeLipschitzReport:
    """Compare the envelope's time rate against the integrand's on the
    ball spanned by the observed decomposition support points.

    An entry is inconclusive when a support point escapes toward the probe
    boundary, since the controlling ball is then unknown.
    """
    xi_probe = np.atleast_1d(np.asarray(xi_probe, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2:
        raise CertificateError("need at least two probe times")
    if probe_radius is None:
        probe_radius = 4.0 * (1.0 + float(np.max(np.abs(xi_probe))))
    grid = Grid1D(np.linspace(-probe_radius, probe_radius, grid_points))
    pitch = 2.0 * probe_radius / (grid_points - 1)
    sampled = [family.sample(t, grid) for t in t_grid]
    envs = [lower_convex_hull(s) for s in sampled]
    values = np.stack([s.values for s in sampled])  # (nt, nxi_grid)
    dt = np.diff(t_grid)

    entries = []
    for xi in xi_probe:
        supports = []
        for samples, env in zip(sampled, envs):
            dec = caratheodory_decompose(samples, env, xi)
            supports.extend(np.abs(dec.points).tolist())
        radius = max(supports)
        conclusive = radius < probe_radius - pitch
        env_at = np.array([evaluate_envelope(env, xi) for env in envs])
        envelope_rate = float(np.max(np.abs(np.diff(env_at)) / dt))
        mask = np.abs(grid.points) <= radius * (1.0 + 1e-12)
        ball_diffs = np.abs(np.diff(values[:, mask], axis=0)) / dt[:, None]
        integrand_rate = float(ball_diffs.max()) if mask.any() else 0.0
        passed = envelope_rate <= (1.0 + 1e-6) * integrand_rate + 1e-15
        entries.append(
            TimeLipschitzEntry(
                velocity=float(xi),
                support_radius=float(radius),
                envelope_rate=envelope_rate,
                integrand_rate=integrand_rate,
                conclusive=bool(conclusive),
                passed=bool(passed),
            )
        )
    conclusive = all(e.conclusive for e in entries)
    passed = all(e.passed for e in entries if e.conclusive)
    return TimeLipschitzReport(tuple(entries), passed and conclusive, conclusive)

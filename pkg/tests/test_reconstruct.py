"""Velocity splitting and bang-bang reassembly.

The double well is the workhorse: its envelope is flat on [-1, 1] with
support points exactly at the wells, so splittings, costs, and orderings
all have closed forms.
"""

import numpy as np

from varelax.catalog import state_function, velocity_function
from varelax.families import IntegrandFamily
from varelax.problem import DPConfig, Problem, Trajectory
from varelax.reconstruct import compare_costs, decompose_velocities, rearrange
from varelax.solve import solve_relaxed


def make_problem(f_name, f_params=None, g_name="zero", g_params=None, **kw):
    defaults = dict(horizon=1.0, start=0.0, end=0.0, state_box=(-0.5, 0.5), velocity_cap=2.0)
    defaults.update(kw)
    return Problem(
        f=IntegrandFamily(base=velocity_function(f_name, f_params)),
        g=IntegrandFamily(base=state_function(g_name, g_params)),
        **defaults,
    )


DOUBLE_WELL = make_problem("double_well")
CLIPPED_CONCAVE = make_problem(
    "double_well",
    g_name="concave_quadratic",
    g_params={"kappa": 0.25},
    state_box=(-0.25, 0.25),
)
QUADRATIC = make_problem(
    "power_p", {"p": 2.0}, start=0.0, end=1.0, state_box=(0.0, 1.0)
)


def resting_trajectory(n):
    """The zero-velocity relaxed minimizer of the double well."""
    times = np.linspace(0.0, 1.0, n + 1)
    return Trajectory(
        times=times,
        states=np.zeros(n + 1),
        velocities=np.zeros(n),
        value=0.0,
        f_cost=0.0,
        g_cost=0.0,
    )


class TestDecomposeVelocities:
    def test_flat_edge_splits_half_half(self):
        cfg = DPConfig(n_t=16, n_x=17)
        track = decompose_velocities(DOUBLE_WELL, resting_trajectory(16), cfg)
        assert track.split_count == 16
        for dec in track.decompositions:
            np.testing.assert_array_equal(dec.weights, [0.5, 0.5])
            np.testing.assert_array_equal(dec.points, [-1.0, 1.0])
        assert track.support_radius == 1.0

    def test_strictly_convex_all_trivial(self):
        cfg = DPConfig(n_t=16, n_x=16)
        traj = solve_relaxed(QUADRATIC, cfg)
        track = decompose_velocities(QUADRATIC, traj, cfg)
        assert track.split_count == 0

    def test_mixed_track(self):
        cfg = DPConfig(n_t=64, n_x=33)
        traj = solve_relaxed(CLIPPED_CONCAVE, cfg)
        track = decompose_velocities(CLIPPED_CONCAVE, traj, cfg)
        trivial = sum(1 for d in track.decompositions if d.trivial)
        assert 0 < trivial < len(track.decompositions)
        assert 0 < track.split_count < len(track.decompositions)

    def test_support_radius_grid_independent(self):
        radii = []
        for n_t, n_x in ((64, 33), (128, 65)):
            cfg = DPConfig(n_t=n_t, n_x=n_x)
            traj = solve_relaxed(CLIPPED_CONCAVE, cfg)
            radii.append(decompose_velocities(CLIPPED_CONCAVE, traj, cfg).support_radius)
        assert radii[0] == radii[1] == 1.0


class TestRearrange:
    def test_double_well_sawtooth(self):
        cfg = DPConfig(n_t=16, n_x=17)
        traj = resting_trajectory(16)
        track = decompose_velocities(DOUBLE_WELL, traj, cfg)
        rec = rearrange(DOUBLE_WELL, traj, track)
        assert set(np.unique(rec.velocities)) == {-1.0, 1.0}
        assert rec.states[0] == 0.0 and rec.states[-1] == 0.0
        assert rec.f_cost == 0.0
        # original nodes are preserved exactly
        node_states = rec.states[np.isin(rec.times, traj.times)]
        np.testing.assert_array_equal(node_states, 0.0)

    def test_trivial_track_is_identity(self):
        cfg = DPConfig(n_t=16, n_x=16)
        traj = solve_relaxed(QUADRATIC, cfg)
        track = decompose_velocities(QUADRATIC, traj, cfg)
        rec = rearrange(QUADRATIC, traj, track)
        np.testing.assert_array_equal(rec.times, traj.times)
        np.testing.assert_array_equal(rec.states, traj.states)
        np.testing.assert_array_equal(rec.velocities, traj.velocities)
        assert rec.f_cost == traj.f_cost
        assert rec.g_cost == traj.g_cost

    def test_mean_preservation_at_nodes(self):
        cfg = DPConfig(n_t=64, n_x=33)
        traj = solve_relaxed(CLIPPED_CONCAVE, cfg)
        track = decompose_velocities(CLIPPED_CONCAVE, traj, cfg)
        rec = rearrange(CLIPPED_CONCAVE, traj, track)
        for t, x in zip(traj.times, traj.states):
            hits = np.flatnonzero(rec.times == t)
            assert hits.size >= 1
            assert rec.states[hits[0]] == x

    def test_f_cost_identity(self):
        cfg = DPConfig(n_t=64, n_x=33)
        traj = solve_relaxed(CLIPPED_CONCAVE, cfg)
        track = decompose_velocities(CLIPPED_CONCAVE, traj, cfg)
        rec = rearrange(CLIPPED_CONCAVE, traj, track)
        assert abs(rec.f_cost - traj.f_cost) <= 64 * 1e-9

    def test_ordering_prefers_larger_excursion(self):
        # on the plateau the concave state cost rewards the outward branch
        cfg = DPConfig(n_t=64, n_x=33)
        traj = solve_relaxed(CLIPPED_CONCAVE, cfg)
        track = decompose_velocities(CLIPPED_CONCAVE, traj, cfg)
        rec = rearrange(CLIPPED_CONCAVE, traj, track)
        assert rec.g_cost <= traj.g_cost
        starts = {}
        cursor = 0
        for i, dec in enumerate(track.decompositions):
            n_pieces = 1 if dec.trivial else 2
            if not dec.trivial:
                x_here = traj.states[i]
                first_q = rec.velocities[cursor]
                # moving away from zero first grows |x| on both plateaus
                assert np.sign(first_q) == np.sign(x_here) or x_here == 0.0
            cursor += n_pieces
        assert cursor == rec.velocities.size


class TestCompareCosts:
    def test_zero_state_cost_gaps_vanish(self):
        cfg = DPConfig(n_t=16, n_x=17)
        traj = resting_trajectory(16)
        track = decompose_velocities(DOUBLE_WELL, traj, cfg)
        rec = rearrange(DOUBLE_WELL, traj, track)
        cmp = compare_costs(DOUBLE_WELL, traj, rec)
        assert cmp.g_gap == 0.0
        assert abs(cmp.total_gap) <= cmp.f_tolerance
        assert cmp.passed

    def test_identity_reconstruction_all_zero(self):
        cfg = DPConfig(n_t=16, n_x=16)
        traj = solve_relaxed(QUADRATIC, cfg)
        rec = rearrange(QUADRATIC, traj, decompose_velocities(QUADRATIC, traj, cfg))
        cmp = compare_costs(QUADRATIC, traj, rec)
        assert cmp.f_gap == 0.0
        assert cmp.g_gap == 0.0
        assert cmp.total_gap == 0.0
        assert cmp.passed

    def test_concave_gap_shrinks_with_step(self):
        gaps = []
        for n_t, n_x in ((128, 65), (256, 129)):
            cfg = DPConfig(n_t=n_t, n_x=n_x)
            traj = solve_relaxed(CLIPPED_CONCAVE, cfg)
            track = decompose_velocities(CLIPPED_CONCAVE, traj, cfg)
            rec = rearrange(CLIPPED_CONCAVE, traj, track)
            cmp = compare_costs(CLIPPED_CONCAVE, traj, rec)
            assert cmp.passed
            assert cmp.total_gap <= 0.0
            gaps.append(abs(cmp.total_gap))
        assert gaps[1] <= 0.7 * gaps[0]
        assert gaps[1] > 0.0

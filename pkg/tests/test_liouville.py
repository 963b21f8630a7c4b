"""Phase-space transport: exact affine flows, densities, pullbacks.

The oracle is a fixed-step RK4 integration of Hamilton's equations
q' = p, p' = -u0 q - u, written below with no reference to the closed-form
flow it validates.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from sl2heis import exp as group_exp
from sl2heis.algebra import AlgebraElement
from sl2heis.liouville import (
    AffineSymplecticMap,
    GaussianDensity,
    GridDensity,
    LiouvilleTargetParams,
    PhaseGrid,
    RingDensity,
    SupportEscapeError,
    build_target,
    correspondence_check,
    identity_map,
    lambda0,
    lambda0_inverse,
    lp_distance,
    pullback,
    reach_experiment,
    schedule_map,
    segment_map,
    partial_segment_map,
    target_map,
)
from sl2heis.schedule import ControlSchedule, ControlSegment
from sl2heis.simulate import simulate


def rk4_flow(seg: ControlSegment, x0, steps: int = 20000) -> np.ndarray:
    """Integrate q' = p, p' = -u0 q - u over the segment (d=1)."""
    x = np.array(x0, dtype=float)
    h = seg.dt / steps

    def f(s):
        return np.array([s[1], -seg.u0 * s[0] - seg.u[0]])

    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + h / 2 * k1)
        k3 = f(x + h / 2 * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def seg1(dt, u0=0.0, u=0.0, r=0.0):
    return ControlSegment(dt, u0, np.array([float(u)]), r)


J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


# -- segment flows ----------------------------------------------------------

def test_quarter_turn_map():
    phi = segment_map(seg1(math.pi / 2, u0=1.0), 1)
    assert np.max(np.abs(phi.M - np.array([[0.0, 1.0], [-1.0, 0.0]]))) <= 1e-15
    assert np.max(np.abs(phi.b)) == 0.0


def test_free_shear_map():
    t = 0.8
    phi = segment_map(seg1(t), 1)
    assert np.array_equal(phi.M, np.array([[1.0, t], [0.0, 1.0]]))
    q, p = 0.3, -1.1
    out = phi.apply(np.array([q, p]))
    assert out[0] == q + t * p and out[1] == p


def test_full_turn_is_identity():
    phi = segment_map(seg1(2 * math.pi, u0=1.0), 1)
    assert phi.deviation(identity_map(1)) <= 1e-12


def test_all_branches_match_rk4():
    rng = np.random.default_rng(7)
    for u0 in (2.7, 0.0, -1.3):
        seg = seg1(0.8, u0=u0, u=0.6)
        phi = segment_map(seg, 1)
        for _ in range(3):
            x0 = rng.normal(size=2)
            assert np.max(np.abs(phi.apply(x0) - rk4_flow(seg, x0))) <= 1e-10


def test_segment_maps_are_symplectic():
    rng = np.random.default_rng(11)
    for _ in range(25):
        seg = seg1(
            float(rng.uniform(0.01, 2.0)), u0=float(3 * rng.normal()), u=float(rng.normal())
        )
        phi = segment_map(seg, 1)
        assert np.max(np.abs(phi.M.T @ J2 @ phi.M - J2)) <= 1e-10


def test_partial_segment_map():
    seg = seg1(1.0, u0=0.5, u=0.3)
    assert partial_segment_map(seg, 0.0).deviation(identity_map(1)) == 0.0
    assert partial_segment_map(seg, 1.0).deviation(segment_map(seg, 1)) == 0.0
    mid = partial_segment_map(seg, 0.4)
    assert mid.deviation(segment_map(seg1(0.4, u0=0.5, u=0.3), 1)) == 0.0
    with pytest.raises(ValueError):
        partial_segment_map(seg, 1.5)
    with pytest.raises(ValueError):
        partial_segment_map(seg, -0.1)


def test_segment_map_dimension_check():
    with pytest.raises(ValueError):
        segment_map(seg1(0.5), 2)


# -- composite maps ---------------------------------------------------------

def test_schedule_map_empty_and_single():
    assert schedule_map(ControlSchedule(1, ())).deviation(identity_map(1)) == 0.0
    seg = seg1(0.6, u0=-0.4, u=0.2)
    sched = ControlSchedule(1, (seg,))
    assert schedule_map(sched).deviation(segment_map(seg, 1)) == 0.0


def test_schedule_map_composition_order():
    # earlier segments are outer factors, matching the pullback law
    # (rho o Phi1) o Phi2 for s1 followed by s2
    rng = np.random.default_rng(42)
    for _ in range(20):
        def rand_sched():
            return ControlSchedule(
                1,
                tuple(
                    seg1(
                        float(rng.uniform(0.05, 0.5)),
                        u0=float(rng.normal()),
                        u=float(rng.normal()),
                    )
                    for _ in range(int(rng.integers(1, 4)))
                ),
            )

        s1, s2 = rand_sched(), rand_sched()
        whole = schedule_map(s1 + s2)
        split = schedule_map(s1).compose(schedule_map(s2))
        assert whole.deviation(split) <= 1e-10


def test_four_quarter_turns():
    sched = ControlSchedule(1, tuple(seg1(math.pi / 2, u0=1.0) for _ in range(4)))
    assert schedule_map(sched).deviation(identity_map(1)) <= 1e-12


def test_affine_map_algebra():
    phi = segment_map(seg1(0.7, u0=1.3, u=-0.4), 1)
    rt = phi.compose(phi.inverse())
    assert rt.deviation(identity_map(1)) <= 1e-13
    assert phi.allclose(phi)
    pts = np.array([[0.1, -0.5], [2.0, 0.3]])
    out = phi.apply(pts)
    assert out.shape == (2, 2)
    assert np.max(np.abs(out[:, 0] - phi.apply(pts[:, 0]))) <= 1e-15


def test_affine_map_validation():
    with pytest.raises(ValueError):
        AffineSymplecticMap(1, 2.0 * np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        AffineSymplecticMap(1, np.eye(2), np.zeros(3))
    with pytest.raises(ValueError):
        AffineSymplecticMap(1, np.full((2, 2), np.nan), np.zeros(2))


# -- group dictionary -------------------------------------------------------

def test_lambda0_generator_images():
    t = 0.7
    shear = lambda0(group_exp(AlgebraElement(1, a=t)))
    assert np.max(np.abs(shear.M - np.array([[1.0, t], [0.0, 1.0]]))) <= 1e-15

    w = 0.4
    kick = lambda0(group_exp(AlgebraElement(1, b=-w)))
    assert np.max(np.abs(kick.M - np.array([[1.0, 0.0], [-w, 1.0]]))) <= 1e-15

    # an X kick lands crosswise: group xi shifts the momentum row
    push = lambda0(group_exp(AlgebraElement(1, xi=np.array([-0.25]))))
    assert np.max(np.abs(push.M - np.eye(2))) <= 1e-15
    assert np.allclose(push.b, [0.0, -0.25])


def test_lambda0_is_a_homomorphism():
    rng = np.random.default_rng(17)
    for _ in range(20):
        g = group_exp(
            AlgebraElement(
                1,
                a=rng.normal(0, 0.5),
                b=rng.normal(0, 0.5),
                c=rng.normal(0, 0.5),
                xi=rng.normal(0, 0.5, 1),
                eta=rng.normal(0, 0.5, 1),
                zeta=rng.normal(),
            )
        )
        h = group_exp(
            AlgebraElement(1, a=rng.normal(0, 0.5), c=rng.normal(0, 0.5), xi=rng.normal(0, 0.5, 1))
        )
        from sl2heis import multiply

        lhs = lambda0(multiply(g, h))
        rhs = lambda0(g).compose(lambda0(h))
        assert lhs.deviation(rhs) <= 1e-12


def test_lambda0_inverse_roundtrip():
    g = group_exp(
        AlgebraElement(
            2,
            a=0.3,
            b=-0.2,
            c=0.1,
            xi=np.array([0.4, -0.1]),
            eta=np.array([0.2, 0.5]),
            zeta=0.7,
        )
    )
    back = lambda0_inverse(lambda0(g))
    assert np.max(np.abs(back.S - g.S)) <= 1e-14
    assert np.max(np.abs(back.v - g.v)) <= 1e-14
    # the center coordinate is classically invisible and comes back as zero
    assert back.z == 0.0 and back.winding == 0


def test_lambda0_inverse_rejects_non_uniform_maps():
    m = np.eye(4)
    m[0, 2] = 0.3  # shears the first axis only
    with pytest.raises(ValueError):
        lambda0_inverse(AffineSymplecticMap(2, m, np.zeros(4)))


def test_correspondence_check_random_schedule():
    rng = np.random.default_rng(99)
    segs = tuple(
        ControlSegment(
            float(rng.uniform(0.05, 0.3)),
            float(rng.normal()),
            rng.normal(size=1),
            float(rng.normal()),
        )
        for _ in range(3)
    )
    rep = correspondence_check(ControlSchedule(1, segs))
    assert rep["ok"]
    assert rep["deviation"] <= 1e-8
    assert rep["generator_pins"]["drift"] <= 1e-12
    assert rep["generator_pins"]["u0_pulse"] <= 1e-3


def test_dictionary_matches_schedule_map_through_the_involution():
    from sl2heis.schedule import negated_controls

    sched = ControlSchedule(1, (seg1(0.4, u0=0.8, u=0.3, r=0.2), seg1(0.2, u0=-1.1, u=-0.6)))
    lhs = lambda0(simulate(negated_controls(sched)))
    rhs = schedule_map(sched)
    assert lhs.deviation(rhs) <= 1e-12


# -- densities and pullback -------------------------------------------------

def test_pullback_identity_is_exact_on_nodes():
    grid = PhaseGrid.default(1, half_width=8.0, N=128)
    rho = GaussianDensity(1)
    sampled = pullback(rho, identity_map(1), grid)
    assert np.array_equal(sampled.values, rho(grid.points()).reshape(128, 128))
    assert abs(sampled.mass() - 1.0) <= 1e-9


def test_quarter_turn_swaps_variances():
    cov = np.diag([4.0, 0.25])
    rho = GaussianDensity(1, cov=cov)
    grid = PhaseGrid.default(1, half_width=14.0, N=256)
    turned = pullback(rho, segment_map(seg1(math.pi / 2, u0=1.0), 1), grid)
    q, p = grid.axes()
    vol = grid.cell_volume()
    mass = turned.mass()
    var_q = float(np.sum(turned.values * (q[:, None] ** 2)) * vol) / mass
    var_p = float(np.sum(turned.values * (p[None, :] ** 2)) * vol) / mass
    assert abs(var_q - 0.25) <= 1e-6
    assert abs(var_p - 4.0) <= 1e-6


def test_pullback_preserves_mass():
    grid = PhaseGrid.default(1, half_width=8.0, N=256)
    rho = GaussianDensity(1, mean=[0.5, -0.3])
    sched = ControlSchedule(1, (seg1(0.5, u0=1.0, u=0.4), seg1(0.3, u0=-0.2, u=-0.1)))
    moved = pullback(rho, schedule_map(sched), grid)
    assert abs(moved.mass() - 1.0) <= 1e-6


def test_pullback_support_escape():
    small = PhaseGrid.default(1, half_width=2.0, N=128)
    sampled = GridDensity(pullback(GaussianDensity(1), identity_map(1), small))
    shift = AffineSymplecticMap(1, np.eye(2), np.array([1.0, 0.0]))
    with pytest.raises(SupportEscapeError):
        pullback(sampled, shift, small)
    # negligible boundary density passes even when points leave the box
    wide = PhaseGrid.default(1, half_width=8.0, N=128)
    safe = GridDensity(pullback(GaussianDensity(1), identity_map(1), wide))
    out = pullback(safe, AffineSymplecticMap(1, np.eye(2), np.array([0.5, 0.0])), wide)
    assert abs(out.mass() - 1.0) <= 1e-3


def test_ring_density_is_normalized():
    grid = PhaseGrid.default(1, half_width=8.0, N=512)
    ring = pullback(RingDensity(2.0, 0.5), identity_map(1), grid)
    assert abs(ring.mass() - 1.0) <= 1e-6
    with pytest.raises(ValueError):
        RingDensity(-1.0, 0.5)


def test_grid_density_requires_d1():
    grid = PhaseGrid(2, ((-4, 4),) * 4, 16)
    with pytest.raises(ValueError):
        GridDensity(grid)


# -- target family ----------------------------------------------------------

def test_target_map_det_is_one():
    rng = np.random.default_rng(5)
    for _ in range(50):
        params = LiouvilleTargetParams(
            alpha=float(rng.uniform(0.2, 3.0)),
            t=float(rng.normal()),
            r=float(rng.normal()),
            s=rng.normal(size=1),
            w=rng.normal(size=1),
        )
        m = target_map(params).M
        assert abs(np.linalg.det(m) - 1.0) <= 1e-12


def test_build_target_identity_params():
    grid = PhaseGrid.default(1, half_width=8.0, N=128)
    rho = GaussianDensity(1)
    out = build_target(rho, LiouvilleTargetParams(1.0, 0.0, 0.0, [0.0], [0.0]), grid)
    base = pullback(rho, identity_map(1), grid)
    assert np.array_equal(out.values, base.values)


def test_build_target_pure_dilation_variances():
    grid = PhaseGrid.default(1, half_width=14.0, N=256)
    out = build_target(
        GaussianDensity(1), LiouvilleTargetParams(2.0, 0.0, 0.0, [0.0], [0.0]), grid
    )
    q, p = grid.axes()
    vol = grid.cell_volume()
    mass = out.mass()
    var_q = float(np.sum(out.values * (q[:, None] ** 2)) * vol) / mass
    var_p = float(np.sum(out.values * (p[None, :] ** 2)) * vol) / mass
    assert abs(var_q - 0.25) <= 1e-6
    assert abs(var_p - 4.0) <= 1e-6


def test_build_target_free_shear_case():
    grid = PhaseGrid.default(1, half_width=8.0, N=128)
    rho = GaussianDensity(1, mean=[0.4, -0.2])
    t = 0.6
    out = build_target(rho, LiouvilleTargetParams(1.0, t, 0.0, [0.0], [0.0]), grid)
    sheared = pullback(rho, segment_map(seg1(t), 1), grid)
    assert np.max(np.abs(out.values - sheared.values)) <= 1e-12


def test_target_params_validation():
    with pytest.raises(ValueError):
        LiouvilleTargetParams(0.0, 0.0, 0.0, [0.0], [0.0])
    with pytest.raises(ValueError):
        LiouvilleTargetParams(1.0, 0.0, 0.0, [0.0, 1.0], [0.0])


# -- distances and io -------------------------------------------------------

def test_lp_distance_basics():
    grid = PhaseGrid.default(1, half_width=8.0, N=256, p_norm=1.0)
    rho = pullback(GaussianDensity(1), identity_map(1), grid)
    assert lp_distance(rho, rho) == 0.0

    bump_a = pullback(
        GaussianDensity(1, mean=[-4.0, 0.0], cov=0.09 * np.eye(2)), identity_map(1), grid
    )
    bump_b = pullback(
        GaussianDensity(1, mean=[4.0, 0.0], cov=0.09 * np.eye(2)), identity_map(1), grid
    )
    assert abs(lp_distance(bump_a, bump_b) - 2.0) <= 1e-9

    zero = grid.with_values(np.zeros_like(rho.values))
    assert abs(lp_distance(rho.with_values(3.0 * rho.values), zero) - 3.0 * lp_distance(rho, zero)) <= 1e-12

    other_p = PhaseGrid.default(1, half_width=8.0, N=256, p_norm=2.0)
    with pytest.raises(ValueError):
        lp_distance(rho, pullback(GaussianDensity(1), identity_map(1), other_p))


def test_phase_grid_validation():
    with pytest.raises(ValueError):
        PhaseGrid(1, ((1.0, -1.0), (-1.0, 1.0)), 16)
    with pytest.raises(ValueError):
        PhaseGrid(1, ((-1.0, 1.0),) * 2, 16, p_norm=0.5)
    with pytest.raises(ValueError):
        PhaseGrid(1, ((-1.0, 1.0),) * 2, 16, values=-np.ones((16, 16)))
    with pytest.raises(ValueError):
        PhaseGrid(1, ((-1.0, 1.0),) * 2, 16, values=np.ones(16))


def test_phase_grid_bytes_roundtrip(tmp_path):
    grid = PhaseGrid.default(1, half_width=7.0, N=64, p_norm=1.0)
    rho = pullback(GaussianDensity(1, mean=[0.3, 0.1]), identity_map(1), grid)
    back = PhaseGrid.from_bytes(rho.to_bytes())
    assert back.same_geometry(rho) and back.p_norm == 1.0
    assert np.array_equal(back.values, rho.values)

    path = tmp_path / "density.pg"
    rho.save(path)
    loaded = PhaseGrid.load(path)
    assert np.array_equal(loaded.values, rho.values)

    with pytest.raises(ValueError):
        PhaseGrid.from_bytes(rho.to_bytes()[:-8])


# -- end to end -------------------------------------------------------------

def test_reach_experiment_identity_params():
    res = reach_experiment(
        GaussianDensity(1),
        LiouvilleTargetParams(1.0, 0.0, 0.0, [0.0], [0.0]),
        1e-2,
        grid=PhaseGrid.default(1, half_width=8.0, N=128),
    )
    assert res["ok"] and res["planner_ok"]
    assert res["errors"]["1"] == 0.0 and res["errors"]["2"] == 0.0
    assert res["total_time"] == 0.0
    assert abs(res["mass_drift"]) <= 1e-12

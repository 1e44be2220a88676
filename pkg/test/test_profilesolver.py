import math

import numpy as np
import pytest

from fovtopp.constraints.fovcone import thrust_ball_constraint
from fovtopp.constraints.soc import Soc2Constraint
from fovtopp.output.trajout import reconstruct_time
from fovtopp.path.pathspec import discretize
from fovtopp.solver.attsmooth import RotationSchedule
from fovtopp.solver.profilesolver import (Direction, NodeConstraintSet, backward_forward,
                                          build_speed_bounds, constraint_cache, propagate,
                                          reduce_interval, solve)
from fovtopp.utils.errors import Infeasible, InfeasibleBounds, StepInfeasible

from .fixture_setup import (G, bang_bang_time, behind_document, build_instance, fov_ahead_document,
                            random_cubic_document, spiral_document, straight_line_document)

G_VEC = np.array([0.0, 0.0, -G])
EX = np.array([1.0, 0.0, 0.0])
A_MAX = math.sqrt(3.0) * G
BIG_BOX = (0.0, 1e6)


def _ball_step(ds=0.5):
    return NodeConstraintSet(0, [thrust_ball_constraint(EX, np.zeros(3), G_VEC, 2 * G)], BIG_BOX, ds)


def _box_step(lo, hi, ds=0.5):
    rows = [Soc2Constraint.linear((1.0, 0.0), -lo, label="h_min"),
            Soc2Constraint.linear((-1.0, 0.0), hi, label="h_max")]
    return NodeConstraintSet(0, rows, (lo, hi), ds)


def _profile_time(instance, stage=1):
    grid = discretize(instance)
    profile = backward_forward(instance, grid, stage=stage)
    return profile, reconstruct_time(grid, profile)[1]


def test_reduce_ball_forward_from_rest():
    found = reduce_interval(_ball_step(), which=0, value=0.0, box=BIG_BOX)
    assert found.lo == pytest.approx(0.0, abs=1e-9)
    assert found.hi == pytest.approx(A_MAX, rel=1e-8)


def test_reduce_ball_backward_to_rest():
    found = reduce_interval(_ball_step(), which=1, value=0.0, box=BIG_BOX)
    assert found.hi == pytest.approx(A_MAX, rel=1e-8)


def test_reduce_box_only():
    found = reduce_interval(_box_step(2.0, 9.0), which=1, value=4.0, box=(0.0, 100.0))
    assert (found.lo, found.hi) == pytest.approx((2.0, 9.0), abs=1e-8)


def test_reduce_contradictory_rows_is_empty():
    rows = [Soc2Constraint.linear((1.0, 0.0), -5.0), Soc2Constraint.linear((-1.0, 0.0), 3.0)]
    step = NodeConstraintSet(0, rows, BIG_BOX, 0.5)
    assert reduce_interval(step, which=1, value=1.0, box=BIG_BOX).empty


def test_propagate_box_only():
    h_lo, h_hi = propagate(Direction.FORWARD, _box_step(0.0, 9.0), (0.0, 9.0), (0.0, 16.0), 1e-6)
    assert (h_lo, h_hi) == pytest.approx((0.0, 16.0))
    h_lo, h_hi = propagate(Direction.BACKWARD, _box_step(0.0, 9.0), (0.0, 20.0), (0.0, 16.0), 1e-6)
    assert h_hi == pytest.approx(9.0, abs=1e-6)


def test_propagate_ball_from_rest():
    h_lo, h_hi = propagate(Direction.FORWARD, _ball_step(), (0.0, 0.0), (0.0, 100.0), 1e-6)
    assert h_lo == pytest.approx(0.0, abs=1e-9)
    assert h_hi == pytest.approx(A_MAX, rel=1e-6)


def test_propagate_backward_bisection_matches_closed_form():
    # from any h_i the ball allows braking to h_{i+1} = 0 iff h_i <= A_MAX (ds = 0.5)
    h_lo, h_hi = propagate(Direction.BACKWARD, _ball_step(), BIG_BOX, (0.0, 1e-3), 1e-6)
    assert h_lo == pytest.approx(0.0, abs=1e-6)
    assert h_hi == pytest.approx(A_MAX + 1e-3, abs=1e-5)


@pytest.mark.parametrize("interval_i", [(0.0, 0.0), (0.0, 0.5)])
def test_propagate_infeasible_step(interval_i):
    ds = 0.5
    # h_{i+1} = h + ds h' <= 1
    cap = Soc2Constraint.linear((-1.0, -ds), 1.0)
    step = NodeConstraintSet(3, [cap], BIG_BOX, ds)
    with pytest.raises(StepInfeasible):
        propagate(Direction.FORWARD, step, interval_i, (5.0, 6.0), 1e-6)


def test_speed_bounds_from_v_max():
    instance = build_instance(straight_line_document(grid_n=10, v_max=5.0))
    B_l, B_u = build_speed_bounds(instance, discretize(instance))
    np.testing.assert_allclose(B_u[1:-1], 25.0)
    assert B_u[0] == B_u[-1] == 0.0
    np.testing.assert_allclose(B_l, 0.0)


def test_speed_bounds_default_cap():
    instance = build_instance(straight_line_document(grid_n=10))
    _, B_u = build_speed_bounds(instance, discretize(instance))
    np.testing.assert_allclose(B_u[1:-1], 1e6)


def test_speed_bounds_crossed_floor():
    instance = build_instance(straight_line_document(grid_n=10, v_max=5.0, speed_floor=[((2.0, 8.0), 30.0)]))
    with pytest.raises(InfeasibleBounds) as e:
        build_speed_bounds(instance, discretize(instance))
    assert e.value.index == 2


def test_speed_bounds_pinned_start_above_cap():
    instance = build_instance(straight_line_document(grid_n=10, v_max=5.0, h_start=30.0))
    with pytest.raises(InfeasibleBounds) as e:
        build_speed_bounds(instance, discretize(instance))
    assert e.value.index == 0


def test_constraint_cache_stage1_contents():
    instance = build_instance(fov_ahead_document(grid_n=20))
    grid = discretize(instance)
    cache = constraint_cache(instance, grid, stage=1)
    assert len(cache) == grid.n
    assert [c.label for c in cache[0]] == ["fov:1", "thrust", "h_min", "h_max"]
    bare = build_instance(straight_line_document(grid_n=20))
    assert all(len(step) == 3 for step in constraint_cache(bare, discretize(bare), stage=1))


def test_constraint_cache_stage2_motor_rows():
    instance = build_instance(straight_line_document(grid_n=20))
    grid = discretize(instance)
    N = grid.n + 1
    level = RotationSchedule(R=np.tile(np.eye(3), (N, 1, 1)), dR=np.zeros((N, 3, 3)), ddR=np.zeros((N, 3, 3)),
                             gamma=np.zeros((N, 3)), dgamma=np.zeros((N, 3)), sigma=0.5,
                             z_b=np.tile([0.0, 0.0, 1.0], (N, 1)))
    cache = constraint_cache(instance, grid, stage=2, schedule=level)
    step = cache[5]
    assert len(step) == 12
    motor = [c for c in step if c.label.startswith("motor")]
    assert len(motor) == 8
    # hovering: every motor carries g/4 with c_max = g/2
    for row in motor:
        assert row.residual([0.0, 0.0]) == pytest.approx(-G / 4)
    with pytest.raises(ValueError):
        constraint_cache(instance, grid, stage=2)


def test_bang_bang_time():
    _, T = _profile_time(build_instance(straight_line_document(grid_n=1000)))
    assert T == pytest.approx(bang_bang_time(10.0, 2 * G), rel=0.02)
    assert T == pytest.approx(1.5343, rel=0.02)


def test_grid_refinement_does_not_degrade():
    exact = bang_bang_time(10.0, 2 * G)
    errors = [abs(_profile_time(build_instance(straight_line_document(grid_n=n)))[1] - exact) / exact
              for n in (250, 500, 1000)]
    assert max(errors) < 0.02
    assert errors[2] <= errors[0] + 1e-5


def test_tiny_path_takes_no_time():
    _, T = _profile_time(build_instance(straight_line_document(length=1e-6, grid_n=2)))
    assert 0.0 < T < 1e-3


def test_profile_respects_every_cached_constraint():
    instance = build_instance(fov_ahead_document())
    grid = discretize(instance)
    profile = backward_forward(instance, grid, stage=1)
    cache = constraint_cache(instance, grid, stage=1)
    for i, step in enumerate(cache):
        assert step.step_residual((profile.h[i], profile.h[i + 1])) <= 10 * instance.eps_h
    assert np.all(profile.l <= profile.h + 1e-12)
    assert profile.h[0] == 0.0 and profile.h[-1] == 0.0


def test_visibility_costs_time():
    _, free = _profile_time(build_instance(fov_ahead_document(with_landmark=False)))
    _, wide = _profile_time(build_instance(fov_ahead_document(alpha_deg=30.0)))
    assert wide > free


def test_narrower_cone_is_never_faster():
    wide_profile, wide = _profile_time(build_instance(fov_ahead_document(alpha_deg=30.0)))
    narrow_profile, narrow = _profile_time(build_instance(fov_ahead_document(alpha_deg=24.0)))
    assert np.all(narrow_profile.h <= wide_profile.h + 1e-5)
    assert narrow >= wide


def test_sweeps_are_deterministic():
    instance = build_instance(fov_ahead_document(grid_n=100))
    grid = discretize(instance)
    first = backward_forward(instance, grid, stage=1)
    second = backward_forward(instance, grid, stage=1)
    assert np.array_equal(first.h, second.h)
    assert np.array_equal(first.l, second.l)


def test_landmark_behind_is_infeasible_in_stage1():
    instance = build_instance(behind_document(grid_n=50))
    with pytest.raises(Infeasible) as e:
        solve(instance)
    assert e.value.stage == 1
    assert e.value.phase == "backward"
    assert e.value.index == 49


def test_stage2_is_never_faster_than_stage1():
    instance = build_instance(straight_line_document(grid_n=200, c_total_max=3 * G, eta=6.0))
    solution = solve(instance)
    grid = solution.profile.grid
    _, t1 = reconstruct_time(grid, solution.stage1_profile)
    _, t2 = reconstruct_time(grid, solution.profile)
    assert t1 == pytest.approx(bang_bang_time(10.0, 3 * G), rel=0.02)
    assert t2 >= t1 - 1e-9
    assert solution.profile.stage == 2


@pytest.mark.parametrize("seed", range(5))
def test_random_cubic_with_landmark_sweeps_to_rest(seed):
    instance = build_instance(random_cubic_document(seed, with_landmark=True))
    grid = discretize(instance)
    profile = backward_forward(instance, grid, stage=1)
    for i, step in enumerate(constraint_cache(instance, grid, stage=1)):
        assert step.accepts((profile.h[i], profile.h[i + 1]))
    assert profile.h[-1] == 0.0


def test_pinned_end_accepts_rounding_at_cone_root():
    ds = 0.5
    # h_{i+1} = h + ds h' <= 1, and the pinned end misses the root by 1e-9
    cap = Soc2Constraint.linear((-1.0, -ds), 1.0)
    step = NodeConstraintSet(0, [cap], BIG_BOX, ds)
    h_lo, h_hi = propagate(Direction.FORWARD, step, (0.0, 0.0), (1.0 + 1e-9, 1.0 + 1e-9), 1e-6)
    assert h_lo == h_hi == 1.0 + 1e-9


def test_backward_ends_pass_the_forward_reduction():
    instance = build_instance(random_cubic_document(0, with_landmark=True))
    grid = discretize(instance)
    last = constraint_cache(instance, grid, stage=1)[-1]
    bounds = build_speed_bounds(instance, grid)
    h_lo, h_hi = propagate(Direction.BACKWARD, last, (bounds[0][-2], bounds[1][-2]), (0.0, 0.0), instance.eps_h)
    for h in (h_lo, h_hi):
        assert not reduce_interval(last, which=0, value=h, box=(0.0, 0.0)).empty


def test_grid_convergence():
    _, coarse = _profile_time(build_instance(straight_line_document(grid_n=2000)))
    _, fine = _profile_time(build_instance(straight_line_document(grid_n=4000)))
    assert abs(coarse - fine) / fine < 0.005


def _without_landmarks(doc):
    return {**doc, "landmarks": [], "visibility": []}


def _narrower(doc):
    return {**doc, "camera": {**doc["camera"], "alpha": 0.8 * doc["camera"]["alpha"]}}


MONOTONICITY_SUITE = [
    pytest.param(lambda: fov_ahead_document(grid_n=200), id="fov_ahead"),
    pytest.param(lambda: random_cubic_document(0, with_landmark=True), id="cubic0"),
    pytest.param(lambda: random_cubic_document(1, with_landmark=True), id="cubic1"),
    pytest.param(lambda: random_cubic_document(2, with_landmark=True), id="cubic2"),
    pytest.param(lambda: spiral_document(grid_n=200), id="spiral"),
]


@pytest.mark.parametrize("tighten", [pytest.param(None, id="landmark"), pytest.param(_narrower, id="alpha")])
@pytest.mark.parametrize("make_doc", MONOTONICITY_SUITE)
def test_tighter_visibility_never_speeds_up(make_doc, tighten):
    doc = make_doc()
    loose, tight = (_without_landmarks(doc), doc) if tighten is None else (doc, tighten(doc))
    loose_profile, loose_time = _profile_time(build_instance(loose))
    instance = build_instance(tight)
    tight_profile, tight_time = _profile_time(instance)
    assert np.all(tight_profile.h <= loose_profile.h + 2 * instance.eps_h)
    assert tight_time >= loose_time - 1e-9

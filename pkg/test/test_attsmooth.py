import math

import numpy as np
import pytest
from scipy.special import erf

from fovtopp.dynamics.rotations import orthonormality_error, skew, skew_part
from fovtopp.path.pathspec import discretize
from fovtopp.solver.attsmooth import gaussian_convolve, gaussian_weights, smoothen, zb_from_profile
from fovtopp.solver.profilesolver import SquareSpeedProfile, backward_forward
from fovtopp.utils.errors import DegenerateThrust, SmoothingDegenerate

from .fixture_setup import G, build_instance, circle_document, straight_line_document

G_VEC = np.array([0.0, 0.0, -G])


def _grid(grid_n=1000, length=10.0, direction=(1.0, 0.0, 0.0)):
    return discretize(build_instance(straight_line_document(length=length, grid_n=grid_n, direction=direction)))


def test_kernel_support_and_mass():
    ds, sigma = 0.0625, 0.25
    weights = gaussian_weights(ds, sigma)
    assert len(weights) == 2 * 16 + 1
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)
    x = (np.arange(33) - 16) * ds
    slope = gaussian_weights(ds, sigma, 1)
    curvature = gaussian_weights(ds, sigma, 2)
    assert slope.sum() == pytest.approx(0.0, abs=1e-12)
    assert -(slope @ x) == pytest.approx(1.0, rel=1e-12)
    assert curvature.sum() == pytest.approx(0.0, abs=1e-10)
    assert 0.5 * (curvature @ x**2) == pytest.approx(1.0, rel=1e-12)


def test_constant_field_is_preserved():
    field = np.tile([0.3, -0.2, 0.9], (200, 1))
    np.testing.assert_allclose(gaussian_convolve(field, 0.05, 0.4), field, atol=1e-14)
    np.testing.assert_allclose(gaussian_convolve(field, 0.05, 0.4, 1), 0.0, atol=1e-12)
    np.testing.assert_allclose(gaussian_convolve(field, 0.05, 0.4, 2), 0.0, atol=1e-10)


def test_step_becomes_error_function():
    ds, sigma = 0.01, 0.3
    s = (np.arange(1000) + 0.5) * ds
    step = np.where(s < 5.0, -1.0, 1.0)
    smoothed = gaussian_convolve(step, ds, sigma)
    inner = (s > 5.0 - 3 * sigma) & (s < 5.0 + 3 * sigma)
    expected = erf((s[inner] - 5.0) / (math.sqrt(2.0) * sigma))
    np.testing.assert_allclose(smoothed[inner], expected, atol=1e-3)


def test_derivative_kernel_matches_gradient():
    ds, sigma = 1.0 / 2000, 0.1
    s = np.arange(2001) * ds
    field = np.sin(3.0 * s) + 2.0 * s
    smooth = gaussian_convolve(field, ds, sigma)
    slope = gaussian_convolve(field, ds, sigma, 1)
    interior = (s > 4.5 * sigma) & (s < 1.0 - 4.5 * sigma)
    reference = np.gradient(smooth, ds)[interior]
    np.testing.assert_allclose(slope[interior], reference, rtol=1e-3, atol=1e-6)


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_sigma_must_be_positive(sigma):
    with pytest.raises(ValueError):
        gaussian_convolve(np.zeros((10, 3)), 0.1, sigma)


def test_smoothen_level_flight():
    grid = _grid(grid_n=100)
    z = np.tile([0.0, 0.0, 1.0], (101, 1))
    schedule = smoothen(grid, z, grid.psi, 0.5)
    np.testing.assert_allclose(schedule.R, np.tile(np.eye(3), (101, 1, 1)), atol=1e-14)
    np.testing.assert_allclose(schedule.gamma, 0.0, atol=1e-12)
    np.testing.assert_allclose(schedule.dgamma, 0.0, atol=1e-12)


def test_smoothen_steady_pitch_rate():
    grid = _grid()
    k = 0.5
    z = np.column_stack([np.sin(k * grid.s), np.zeros_like(grid.s), np.cos(k * grid.s)])
    sigma = 0.2
    schedule = smoothen(grid, z, grid.psi, sigma)
    interior = (grid.s > 5 * sigma) & (grid.s < grid.s[-1] - 5 * sigma)
    np.testing.assert_allclose(schedule.z_b[interior], z[interior], atol=1e-9)
    np.testing.assert_allclose(schedule.gamma[interior], np.tile([0.0, k, 0.0], (interior.sum(), 1)), atol=1e-4)


def test_smoothen_outputs_are_consistent():
    grid = _grid()
    rng = np.random.default_rng(2)
    z = np.tile([0.0, 0.0, 1.0], (grid.n + 1, 1)) + 0.3 * rng.normal(size=(grid.n + 1, 3))
    schedule = smoothen(grid, z, grid.psi, 0.5)
    for R, dR, gamma in zip(schedule.R, schedule.dR, schedule.gamma):
        assert orthonormality_error(R) < 1e-12
        assert np.max(np.abs(skew(gamma) - skew_part(R.T @ dR))) < 1e-10
    np.testing.assert_allclose(np.linalg.norm(schedule.z_b, axis=1), 1.0, atol=1e-12)


def test_smoothen_cancelling_field():
    grid = _grid(grid_n=1000)
    signs = np.where(np.arange(grid.n + 1) % 2 == 0, 1.0, -1.0)
    z = signs[:, None] * np.array([0.0, 0.0, 1.0])
    with pytest.raises(SmoothingDegenerate):
        smoothen(grid, z, grid.psi, 100 * grid.ds)


def _profile(grid, h):
    return SquareSpeedProfile(grid=grid, h=np.asarray(h, dtype=float), l=np.zeros(grid.n + 1), stage=1)


def test_zb_hover():
    grid = _grid(grid_n=10)
    z = zb_from_profile(grid, _profile(grid, np.zeros(11)), G_VEC)
    np.testing.assert_allclose(z, np.tile([0.0, 0.0, 1.0], (11, 1)))


def test_zb_constant_acceleration():
    grid = _grid(grid_n=10)
    a = 3.0
    z = zb_from_profile(grid, _profile(grid, 2 * a * grid.s), G_VEC)
    expected = np.array([a, 0.0, G]) / math.hypot(a, G)
    np.testing.assert_allclose(z, np.tile(expected, (11, 1)), atol=1e-12)


def test_zb_constant_speed_circle():
    instance = build_instance(circle_document(grid_n=20))
    grid = discretize(instance)
    h = 4.0
    z = zb_from_profile(grid, _profile(grid, np.full(21, h)), G_VEC)
    tilt = np.arccos(z[:, 2])
    np.testing.assert_allclose(np.tan(tilt), h / G, rtol=1e-9)


def test_zb_free_fall_is_degenerate():
    # straight down the z axis with the path acceleration equal to g
    grid = _grid(grid_n=10, direction=(0.0, 0.0, -1.0))
    h = 2 * G * grid.s
    with pytest.raises(DegenerateThrust) as e:
        zb_from_profile(grid, _profile(grid, h), G_VEC)
    assert e.value.index == 0


def test_wider_kernel_gives_smoother_attitude():
    instance = build_instance(straight_line_document(grid_n=400))
    grid = discretize(instance)
    z = zb_from_profile(grid, backward_forward(instance, grid, stage=1), G_VEC)
    roughness = []
    for fraction in (0.01, 0.05, 0.1):
        schedule = smoothen(grid, z, grid.psi, fraction * grid.s[-1])
        roughness.append(np.max(np.linalg.norm(np.diff(schedule.z_b, n=2, axis=0), axis=1)))
    assert roughness[0] > roughness[1] > roughness[2]

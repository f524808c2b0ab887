import math

import numpy as np
import pytest
from helpers import random_rotation

from almostlocal.errors import AlmostLocalError, ConfigError, DegenerateFrame, SharedCombinatoricsMismatch
from almostlocal.mesh import ShapePath, make_icosphere
from almostlocal.metric import ConformalPower, G0, GAPower
from almostlocal.optimizer import (
    SolverConfig,
    Termination,
    initialize_path,
    lbfgs,
    mean_radius,
    radius_profile,
    solve_geodesic,
)
from almostlocal.path_energy import objective
from almostlocal.sphere_analytics import closed_form_radius


def rosenbrock(x):
    f = 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    g = np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200 * (x[1] - x[0] ** 2)])
    return f, g


def test_lbfgs_rosenbrock():
    res = lbfgs(rosenbrock, np.array([-1.2, 1.0]), grad_tolerance=1e-8, rel_energy_tolerance=0.0)
    assert res.termination == Termination.CONVERGED
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_lbfgs_quadratic_is_exact_in_few_steps():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(6, 6))
    h = m @ m.T + 6 * np.eye(6)
    b = rng.normal(size=6)
    res = lbfgs(lambda x: (0.5 * x @ h @ x - b @ x, h @ x - b), np.zeros(6), grad_tolerance=1e-10, memory=10)
    np.testing.assert_allclose(res.x, np.linalg.solve(h, b), atol=1e-8)
    assert res.iterations <= 20


def test_lbfgs_backs_off_infeasible_points():
    # minimum of the smooth part lies outside the admissible set x < 1
    def fun(x):
        if x[0] >= 1.0:
            raise DegenerateFrame("outside")
        return (x[0] - 2.0) ** 2 - math.log(1.0 - x[0]), np.array([2 * (x[0] - 2.0) + 1.0 / (1.0 - x[0])])

    res = lbfgs(fun, np.array([0.0]), grad_tolerance=1e-10, initial_step=5.0)
    assert res.x[0] < 1.0
    # stationary point of (x-2)^2 - log(1-x) on x < 1
    assert res.x[0] == pytest.approx((3 - math.sqrt(3)) / 2, abs=1e-7)


def test_lbfgs_energy_stop_needs_a_stall_window():
    # a slowly decreasing sequence: each step is below tolerance, so the run
    # stops after exactly ``stall_window`` iterations
    def fun(x):
        return float(np.exp(-x[0]) + 1e6), np.array([-np.exp(-x[0])])

    for window in (1, 4):
        res = lbfgs(fun, np.array([30.0]), grad_tolerance=0.0, rel_energy_tolerance=1e-6, stall_window=window)
        assert res.termination == Termination.ENERGY_TOLERANCE
        assert res.iterations == window


def test_lbfgs_rejects_invalid_start():
    def fun(x):
        raise AlmostLocalError("nope")

    with pytest.raises(DegenerateFrame):
        lbfgs(fun, np.zeros(2))


def test_identical_endpoints_without_penalty_are_a_constant_path():
    mesh = make_icosphere(1)
    path, report = solve_geodesic(mesh, mesh, 20, G0(), penalty_factor=0.0)
    assert report.iterations <= 1
    assert report.breakdown.energy == 0.0
    assert report.converged
    assert np.array_equal(path.frames, np.repeat(mesh.positions[None], 21, axis=0))


def test_identical_endpoints_with_penalty_relax_tangentially():
    # the penalty alone is not minimized by the constant path: vertices slide
    # tangentially to even out angles, which costs a little energy
    mesh = make_icosphere(1)
    path, report = solve_geodesic(mesh, mesh, 4, G0(), penalty_factor=1.0, config=SolverConfig(max_iterations=50))
    start = objective(ShapePath(mesh.topology, np.repeat(mesh.positions[None], 5, axis=0)), G0(), 1.0)
    assert report.breakdown.objective < start.objective
    assert np.array_equal(path.frames[0], mesh.positions) and np.array_equal(path.frames[-1], mesh.positions)


def test_initialize_linear_midpoint():
    a = make_icosphere(1)
    b = a.with_positions(a.positions + [2.0, 0.0, 0.0])
    path = initialize_path(a, b, 2)
    np.testing.assert_allclose(path.frames[1], 0.5 * (a.positions + b.positions), atol=1e-15)
    assert np.array_equal(path.frames[0], a.positions) and np.array_equal(path.frames[2], b.positions)


def test_initialize_linear_concentric_spheres_stay_spheres():
    a = make_icosphere(1, radius=0.4)
    b = make_icosphere(1, radius=0.8)
    path = initialize_path(a, b, 5)
    for t, frame in enumerate(path.frames):
        np.testing.assert_allclose(np.linalg.norm(frame, axis=1), 0.4 + 0.4 * t / 5, rtol=1e-12)


def test_initialize_provided_validation():
    a = make_icosphere(1, radius=0.4)
    b = make_icosphere(1, radius=0.8)
    good = initialize_path(a, b, 4)
    assert np.array_equal(initialize_path(a, b, 4, "provided", good).frames, good.frames)
    with pytest.raises(ValueError):
        initialize_path(a, b, 5, "provided", good)
    with pytest.raises(ValueError):
        initialize_path(a, b, 4, "provided", good.frames[::-1])
    with pytest.raises(ConfigError):
        initialize_path(a, b, 4, "provided")
    with pytest.raises(ConfigError):
        initialize_path(a, b, 4, "spline")
    with pytest.raises(ValueError):
        initialize_path(a, b, 1)


def test_initialize_degenerate_interpolation():
    # antipodal endpoints pass through a collapsed frame
    a = make_icosphere(1)
    b = a.with_positions(-a.positions)
    with pytest.raises(DegenerateFrame):
        initialize_path(a, b, 2)


def test_mismatched_combinatorics():
    with pytest.raises(SharedCombinatoricsMismatch):
        solve_geodesic(make_icosphere(1), make_icosphere(2), 4, G0())


@pytest.mark.parametrize(
    "kwargs",
    [{"c1": 0.9, "c2": 0.5}, {"c1": 0.0}, {"c2": 1.0}, {"memory": 0}, {"stall_window": 0}, {"max_iterations": -1}, {"initialization": "x"}],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)


def test_config_from_dict():
    cfg = SolverConfig.from_dict({"maxIterations": 7, "relEnergyTolerance": 0.0, "lineSearch": {"c1": 0.01, "c2": 0.5}})
    assert (cfg.max_iterations, cfg.rel_energy_tolerance, cfg.c1, cfg.c2) == (7, 0.0, 0.01, 0.5)
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"tolerance": 1})


@pytest.fixture(scope="module")
def concentric_solve():
    a = make_icosphere(1, radius=0.4)
    b = make_icosphere(1, radius=0.8)
    w = ConformalPower(1.0)
    cfg = SolverConfig(max_iterations=400)
    return a, b, w, cfg, solve_geodesic(a, b, 8, w, config=cfg)


def test_concentric_spheres_follow_closed_form(concentric_solve):
    a, b, w, cfg, (path, report) = concentric_solve
    assert report.converged
    r = radius_profile(path, center=np.zeros(3))
    exact = closed_form_radius(w, mean_radius(a.positions, np.zeros(3)), mean_radius(b.positions, np.zeros(3)))
    expected = exact.r(np.linspace(0.0, 1.0, 9))
    rms = np.sqrt(np.mean(((r - expected) / expected) ** 2))
    assert rms < 0.05


def test_monotone_history_and_improvement(concentric_solve):
    a, b, w, cfg, (path, report) = concentric_solve
    h = report.history
    assert all(y <= x for x, y in zip(h, h[1:]))
    initial = objective(initialize_path(a, b, 8), w, 1.0).objective
    assert report.breakdown.objective <= initial
    assert report.to_dict()["termination"] == report.termination.value


def test_deterministic(concentric_solve):
    a, b, w, cfg, (path, report) = concentric_solve
    path2, report2 = solve_geodesic(a, b, 8, w, config=cfg)
    assert np.array_equal(path.frames, path2.frames)
    assert report.history == report2.history


def test_frame_indifference():
    a = make_icosphere(1, radius=0.5)
    b = a.with_positions(0.8 * a.positions + [0.3, 0.0, 0.0])
    rot = random_rotation(np.random.default_rng(8))
    w = GAPower(0.1, 1)
    cfg = SolverConfig(max_iterations=500, rel_energy_tolerance=1e-13)
    path, rep = solve_geodesic(a, b, 4, w, config=cfg)
    path_r, rep_r = solve_geodesic(
        a.with_positions(a.positions @ rot.T), b.with_positions(b.positions @ rot.T), 4, w, config=cfg
    )
    assert rep_r.breakdown.objective == pytest.approx(rep.breakdown.objective, rel=1e-8)
    np.testing.assert_allclose(path_r.frames, path.frames @ rot.T, atol=1e-4)


def test_mean_radius():
    m = make_icosphere(2, radius=0.7, center=(1.0, 2.0, 3.0))
    assert mean_radius(m.positions) == pytest.approx(0.7, rel=1e-12)
    assert mean_radius(m.positions, (1.0, 2.0, 3.0)) == pytest.approx(0.7, rel=1e-12)

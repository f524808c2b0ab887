import math

import numpy as np
import pytest
from helpers import random_closed_mesh, random_path, random_rotation

from almostlocal.errors import ZeroLengthEdge
from almostlocal.mesh import ShapePath, make_icosphere
from almostlocal.metric import G0, ConformalExp, ConformalPower, GAPower, ScaleInvariant
from almostlocal.path_energy import (
    energy_gradient,
    gradient,
    objective,
    objective_and_gradient,
    path_energy,
    penalty,
    penalty_gradient,
    timestep_energies,
)
from almostlocal.sphere_analytics import closed_form_radius

WEIGHTS = [G0(), GAPower(1.0, 1), ConformalPower(1.0), ConformalExp(), ScaleInvariant(0.5)]


@pytest.fixture(scope="module")
def small_path():
    mesh = random_closed_mesh(24, seed=11)
    return mesh, ShapePath(mesh.topology, random_path(mesh, n_timesteps=3, seed=2, amount=0.05))


def _translation_path(mesh, shift, n):
    s = np.linspace(0.0, 1.0, n + 1)[:, None, None]
    return ShapePath(mesh.topology, mesh.positions[None] + s * np.asarray(shift)[None, None])


def test_constant_path_has_zero_energy_and_gradient():
    mesh = make_icosphere(1)
    path = ShapePath(mesh.topology, np.repeat(mesh.positions[None], 4, axis=0))
    for w in WEIGHTS:
        assert path_energy(path, w) == 0.0
        assert not np.any(energy_gradient(path, w))
        assert not np.any(gradient(path, w, penalty_factor=0.0))


@pytest.mark.parametrize("w", WEIGHTS, ids=repr)
def test_time_reversal(small_path, w):
    mesh, path = small_path
    rev = ShapePath(path.topology, path.frames[::-1])
    e, e_rev = path_energy(path, w), path_energy(rev, w)
    assert abs(e - e_rev) <= 1e-14 * e
    np.testing.assert_allclose(timestep_energies(rev, w), timestep_energies(path, w)[::-1], rtol=1e-13)


def test_icosahedron_penalty():
    mesh = make_icosphere(0)
    path = ShapePath(mesh.topology, np.stack([mesh.positions, 1.5 * mesh.positions]))
    one_frame = 60 * (math.cos(math.pi / 3) - math.cos(2 * math.pi / 5)) ** 2
    assert penalty(path) == pytest.approx(2 * one_frame, rel=1e-12)
    assert penalty(path, 1) == pytest.approx(2 * 60 * (0.5 - math.cos(2 * math.pi / 5)), rel=1e-12)


def test_penalty_factor_is_linear(small_path):
    _, path = small_path
    w = GAPower(1.0, 1)
    b1 = objective(path, w, penalty_factor=1.0)
    b2 = objective(path, w, penalty_factor=2.0)
    assert b2.objective - b2.energy == 2 * (b1.objective - b1.energy)
    assert b1.objective == b1.energy + b1.penalty
    assert b1.energy >= 0 and b1.penalty >= 0
    assert b1.per_timestep_energy.sum() == pytest.approx(b1.energy, rel=1e-14)
    d = b1.to_dict()
    assert d["objective"] == b1.objective and len(d["perTimestepEnergy"]) == 3


def _fd_gradient(fun, frames, h=1e-6):
    g = np.zeros_like(frames[1:-1])
    for idx in np.ndindex(*g.shape):
        plus, minus = frames.copy(), frames.copy()
        t = (idx[0] + 1,) + idx[1:]
        plus[t] += h
        minus[t] -= h
        g[idx] = (fun(plus) - fun(minus)) / (2 * h)
    return g


def _max_rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


@pytest.mark.parametrize("w", [GAPower(1.0, 1), ConformalPower(2.0), ScaleInvariant(1.0), G0()], ids=repr)
def test_energy_gradient_matches_finite_differences(small_path, w):
    mesh, path = small_path

    def energy(frames):
        return path_energy(ShapePath(mesh.topology, frames), w)

    fd = _fd_gradient(energy, path.frames)
    assert _max_rel(energy_gradient(path, w), fd) < 1e-5


@pytest.mark.parametrize("exponent", [2, 3])
def test_penalty_gradient_matches_finite_differences(small_path, exponent):
    mesh, path = small_path
    fd = _fd_gradient(lambda f: penalty(ShapePath(mesh.topology, f), exponent), path.frames)
    assert _max_rel(penalty_gradient(path, exponent), fd) < 1e-5


def test_objective_gradient_is_sum_of_parts(small_path):
    _, path = small_path
    w = GAPower(1.0, 1)
    g = gradient(path, w, penalty_factor=0.7)
    parts = energy_gradient(path, w) + 0.7 * penalty_gradient(path)
    np.testing.assert_allclose(g, parts, rtol=1e-12, atol=1e-14)
    breakdown, full = objective_and_gradient(path.frames, path.topology, w, 0.7)
    assert full.shape == path.frames.shape
    assert breakdown.objective == pytest.approx(objective(path, w, 0.7).objective, rel=1e-14)


@pytest.mark.parametrize("w", WEIGHTS, ids=repr)
def test_translation_invariance(small_path, w):
    mesh, path = small_path
    shifted = ShapePath(path.topology, path.frames + np.array([0.3, -1.2, 2.0]))
    e = path_energy(path, w)
    assert abs(path_energy(shifted, w) - e) <= 1e-12 * e
    # translating every frame at once is a symmetry, so the full gradient
    # (boundary frames included) exerts no net force
    _, g = objective_and_gradient(path.frames, path.topology, w, 0.0)
    assert np.abs(g.sum(axis=(0, 1))).max() <= 1e-12 * np.abs(g).sum()


def test_rotation_invariance(small_path):
    mesh, path = small_path
    rot = random_rotation(np.random.default_rng(3))
    rotated = ShapePath(path.topology, path.frames @ rot.T)
    for w in WEIGHTS:
        e = path_energy(path, w)
        assert path_energy(rotated, w) == pytest.approx(e, rel=1e-12)
    assert penalty(rotated) == pytest.approx(penalty(path), rel=1e-10)


def test_scale_invariant_objective_under_scaling(small_path):
    _, path = small_path
    w = ScaleInvariant(1.0)
    e = path_energy(path, w)
    for lam in (0.25, 3.0):
        scaled = ShapePath(path.topology, lam * path.frames)
        assert abs(objective(scaled, w, 0.0).objective - e) <= 1e-10 * e


def test_translation_energy_near_continuum():
    mesh = make_icosphere(2)
    path = _translation_path(mesh, [1.0, 0.0, 0.0], 20)
    e = path_energy(path, ConformalPower(1.0))
    exact = 16 * math.pi**2 / 3
    assert abs(e - exact) / exact < 0.05


def test_time_refinement_error_shrinks():
    # sample the exact concentric-sphere geodesic at increasing N
    w = ConformalPower(1.0)
    sol = closed_form_radius(w, 0.4, 0.8)
    mesh = make_icosphere(1)
    energies = []
    for n in (4, 8, 16, 32):
        r = sol.r(np.linspace(0.0, 1.0, n + 1))
        energies.append(path_energy(ShapePath(mesh.topology, r[:, None, None] * mesh.positions[None]), w))
    gaps = np.abs(np.diff(energies))
    assert gaps[0] > gaps[1] > gaps[2]
    # second order: halving the step cuts the gap by about four
    assert 3.0 < gaps[1] / gaps[2] < 5.0


def test_zero_length_edge():
    mesh = make_icosphere(0)
    p = mesh.positions.copy()
    a, b = mesh.edges[0]
    p[b] = p[a]
    path = ShapePath(mesh.topology, np.stack([mesh.positions, p]))
    with pytest.raises(ZeroLengthEdge):
        penalty(path)

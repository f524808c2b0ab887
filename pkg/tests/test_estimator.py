import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from almostlocal.estimator import ShapeGeodesic
from almostlocal.mesh import make_icosphere
from almostlocal.metric import ConformalPower
from almostlocal.optimizer import SolverConfig, solve_geodesic


@pytest.fixture(scope="module")
def spheres():
    return make_icosphere(1, 0.4), make_icosphere(1, 0.8)


def test_fit_matches_solver(spheres):
    a, b = spheres
    est = ShapeGeodesic(metric={"type": "ConformalPower", "k": 1}, n_timesteps=6, max_iterations=200).fit(a, b)
    path, report = solve_geodesic(a, b, 6, ConformalPower(1.0), config=SolverConfig(max_iterations=200))
    assert np.array_equal(est.path_.frames, path.frames)
    assert est.energy_ == report.breakdown.energy
    assert est.score() == -est.energy_
    assert est.metric_ == ConformalPower(1.0)


def test_transform_interpolates_frames(spheres):
    a, b = spheres
    est = ShapeGeodesic(metric="G0", n_timesteps=4, max_iterations=50).fit(a, b)
    frames = est.path_.frames
    out = est.transform([0.0, 0.25, 0.125, 1.0])
    assert out.shape == (4, a.n_vertices, 3)
    assert np.array_equal(out[0], frames[0]) and np.array_equal(out[3], frames[4])
    np.testing.assert_allclose(out[1], frames[1], atol=1e-15)
    np.testing.assert_allclose(out[2], 0.5 * (frames[0] + frames[1]), atol=1e-15)
    with pytest.raises(ValueError):
        est.transform([1.5])


def test_fit_on_arrays_needs_faces(spheres):
    a, b = spheres
    with pytest.raises(ValueError):
        ShapeGeodesic(n_timesteps=2).fit(a.positions, b.positions)
    est = ShapeGeodesic(n_timesteps=2, faces=a.faces, max_iterations=5).fit(a.positions, b.positions)
    assert est.path_.n_timesteps == 2


def test_not_fitted():
    est = ShapeGeodesic()
    with pytest.raises(NotFittedError):
        est.transform([0.5])
    with pytest.raises(NotFittedError):
        est.score()


def test_params_round_trip():
    est = ShapeGeodesic(metric={"type": "GAPower", "A": 0.0625, "k": 2}, n_timesteps=12, penalty_factor=0.5)
    params = est.get_params()
    assert params["n_timesteps"] == 12 and params["penalty_factor"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(n_timesteps=3)
    assert twin.n_timesteps == 3 and est.n_timesteps == 12


def test_invalid_timesteps(spheres):
    a, b = spheres
    with pytest.raises(ValueError):
        ShapeGeodesic(n_timesteps=1).fit(a, b)

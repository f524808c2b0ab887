"""Discrete horizontal path energy, mesh-regularity penalty and gradients.

For timesteps ``t = 0..N-1`` with increments ``inc_t = N (X_{t+1} - X_t)``
the energy is::

    E = 1 / (12 N) * sum_t sum_v [ Phi_t(v)     sum_{F in star v} (inc_t(v) . c_t(F))^2     / |c_t(F)|
                                 + Phi_{t+1}(v) sum_{F in star v} (inc_t(v) . c_{t+1}(F))^2 / |c_{t+1}(F)| ]

where ``c_s(F)`` is the face cross product of frame ``s`` and
``Phi_s(v) = Phi(Vol_s, TrL^2_s(v))``.  Each step is weighted with both of
its end frames, which keeps the functional symmetric under time reversal.

The penalty sums ``|cos(angle) - cos(2 pi / deg v)|^p`` over every corner
angle of every frame, boundary frames included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroLengthEdge
from .geometry import batch_geometry, batch_geometry_backward
from .mesh import ShapePath, Topology
from .metric import MetricWeight


@dataclass
class EnergyBreakdown:
    energy: float
    penalty: float
    penalty_factor: float
    per_timestep_energy: np.ndarray = field(repr=False)

    @property
    def objective(self) -> float:
        return self.energy + self.penalty_factor * self.penalty

    def to_dict(self) -> dict:
        return {
            "energy": float(self.energy),
            "penalty": float(self.penalty),
            "penaltyFactor": float(self.penalty_factor),
            "objective": float(self.objective),
            "perTimestepEnergy": [float(x) for x in self.per_timestep_energy],
        }


def _frames(path: ShapePath | np.ndarray) -> np.ndarray:
    return path.frames if isinstance(path, ShapePath) else np.asarray(path, dtype=float)


def _energy(frames: np.ndarray, topo: Topology, w: MetricWeight, want_grad: bool):
    n_steps = len(frames) - 1
    faces = topo.faces
    geo = batch_geometry(frames, topo, curvature=w.needs_curvature)
    if w.needs_curvature:
        trl2 = geo.trl2
    else:
        trl2 = np.zeros(geo.vertex_area.shape)
    vol = geo.vol[:, None]
    phi = w.value(vol, trl2)  # (T, V)

    inc = n_steps * (frames[1:] - frames[:-1])  # (N, V, 3)
    inc_c = inc[:, faces]  # (N, F, 3, 3)
    scale = 1.0 / (12.0 * n_steps)

    terms = []
    for side in (slice(0, n_steps), slice(1, n_steps + 1)):
        c = geo.cross[side][:, :, None, :]  # (N, F, 1, 3)
        nrm = geo.norm[side][:, :, None]  # (N, F, 1)
        d = np.einsum("tfjk,tfk->tfj", inc_c, geo.cross[side])  # (N, F, 3)
        q = d * d / nrm
        phi_c = phi[side][:, faces]  # (N, F, 3)
        terms.append((side, c, nrm, d, q, phi_c))

    per_step = scale * sum(np.einsum("tfj,tfj->t", phi_c, q) for _, _, _, _, q, phi_c in terms)
    energy = float(per_step.sum())
    if not want_grad:
        return energy, per_step, None

    g_phi = np.zeros_like(phi)
    g_cross = np.zeros_like(geo.cross)
    g_inc_c = np.zeros_like(inc_c)
    for side, c, nrm, d, q, phi_c in terms:
        g_phi[side] += scale * topo.scatter(q, batch_dims=1)
        coef = scale * phi_c * 2.0 * d / nrm  # (N, F, 3)
        g_inc_c += coef[..., None] * c
        nu = geo.normal[side]
        g_cross[side] += np.einsum("tfj,tfjk->tfk", coef, inc_c) - np.einsum(
            "tfj,tfk->tfk", scale * phi_c * q / nrm, nu
        )

    g_vol = (g_phi * w.d_vol(vol, trl2)).sum(axis=1)
    g_trl2 = g_phi * w.d_trl2(vol, trl2) if w.needs_curvature else None
    grad = batch_geometry_backward(geo, topo, g_cross=g_cross, g_vol=g_vol, g_trl2=g_trl2)
    g_inc = topo.scatter(g_inc_c, batch_dims=1)
    grad[1:] += n_steps * g_inc
    grad[:-1] -= n_steps * g_inc
    return energy, per_step, grad


def _corner_vectors(frames: np.ndarray, topo: Topology):
    corners = frames[:, topo.faces]  # (T, F, 3, 3)
    u1 = np.roll(corners, -1, axis=2) - corners
    u2 = np.roll(corners, -2, axis=2) - corners
    return u1, u2


def perfect_cosines(topo: Topology) -> np.ndarray:
    """``cos(2 pi / deg v)`` for the vertex at every face corner, shape ``(F, 3)``."""
    return np.cos(2.0 * np.pi / topo.degree)[topo.faces]


def _penalty(frames: np.ndarray, topo: Topology, exponent: float, want_grad: bool):
    u1, u2 = _corner_vectors(frames, topo)
    l1 = np.linalg.norm(u1, axis=-1)
    l2 = np.linalg.norm(u2, axis=-1)
    if not (np.all(l1 > 0) and np.all(l2 > 0)):
        raise ZeroLengthEdge("an edge has zero length")
    dot = np.einsum("tfjk,tfjk->tfj", u1, u2)
    cos = dot / (l1 * l2)
    dev = cos - perfect_cosines(topo)[None]
    absdev = np.abs(dev)
    value = float(np.power(absdev, exponent).sum())
    if not want_grad:
        return value, None
    if exponent == 1:
        g_cos = np.sign(dev)
    else:
        g_cos = exponent * np.power(absdev, exponent - 1) * np.sign(dev)
    inv = 1.0 / (l1 * l2)
    g_u1 = (g_cos * inv)[..., None] * u2 - (g_cos * cos / l1**2)[..., None] * u1
    g_u2 = (g_cos * inv)[..., None] * u1 - (g_cos * cos / l2**2)[..., None] * u2
    g_corner = -(g_u1 + g_u2) + np.roll(g_u1, 1, axis=2) + np.roll(g_u2, 2, axis=2)
    return value, topo.scatter(g_corner, batch_dims=1)


def path_energy(path: ShapePath, w: MetricWeight) -> float:
    """Discrete horizontal path energy of ``path`` under weight ``w``."""
    return _energy(path.frames, path.topology, w, False)[0]


def timestep_energies(path: ShapePath, w: MetricWeight) -> np.ndarray:
    return _energy(path.frames, path.topology, w, False)[1]


def penalty(path: ShapePath, penalty_exponent: float = 2) -> float:
    """Angle-deviation penalty summed over all frames ``0..N``."""
    return _penalty(path.frames, path.topology, penalty_exponent, False)[0]


def objective(
    path: ShapePath, w: MetricWeight, penalty_factor: float = 1.0, penalty_exponent: float = 2
) -> EnergyBreakdown:
    energy, per_step, _ = _energy(path.frames, path.topology, w, False)
    pen = _penalty(path.frames, path.topology, penalty_exponent, False)[0]
    return EnergyBreakdown(energy, pen, float(penalty_factor), per_step)


def energy_gradient(path: ShapePath, w: MetricWeight) -> np.ndarray:
    """Gradient of :func:`path_energy` w.r.t. interior frames, shape ``(N-1, V, 3)``."""
    return _energy(path.frames, path.topology, w, True)[2][1:-1]


def penalty_gradient(path: ShapePath, penalty_exponent: float = 2) -> np.ndarray:
    return _penalty(path.frames, path.topology, penalty_exponent, True)[1][1:-1]


def gradient(
    path: ShapePath, w: MetricWeight, penalty_factor: float = 1.0, penalty_exponent: float = 2
) -> np.ndarray:
    """Gradient of the objective w.r.t. the free (interior) vertex positions."""
    return objective_and_gradient(path.frames, path.topology, w, penalty_factor, penalty_exponent)[1][1:-1]


def objective_and_gradient(
    frames: np.ndarray,
    topo: Topology,
    w: MetricWeight,
    penalty_factor: float = 1.0,
    penalty_exponent: float = 2,
) -> tuple[EnergyBreakdown, np.ndarray]:
    """Objective breakdown and full-frame gradient (boundary rows included)."""
    energy, per_step, grad = _energy(frames, topo, w, True)
    pen, g_pen = _penalty(frames, topo, penalty_exponent, True)
    if penalty_factor:
        grad = grad + penalty_factor * g_pen
    return EnergyBreakdown(energy, pen, float(penalty_factor), per_step), grad

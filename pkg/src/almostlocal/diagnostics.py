"""Post-hoc checks on discrete paths.

Momenta, horizontality, swept area, the length/area inequalities and the
curvature quadrature for the constant weight.  Per-step quantities use the
forward increment ``inc_t = N (X_{t+1} - X_t)``; momenta and the
horizontality residual use the geometry of frame ``t``.

Swept area and path length are discretized the same way as the energy
(each step averaged over both end frames, normal components only), so
the Cauchy-Schwarz inequalities behind the bounds hold exactly on the
discrete path and not just in the limit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InapplicableBound
from .geometry import batch_geometry, compute_geometry
from .mesh import ShapePath, TriMesh, Topology
from .metric import MetricWeight
from .path_energy import timestep_energies

CSV_COLUMNS = (
    "t",
    "linear_x",
    "linear_y",
    "linear_z",
    "angular_yz",
    "angular_zx",
    "angular_xy",
    "scaling",
    "horizontality",
    "swept_area",
    "energy",
    "length",
)


@dataclass
class PathDiagnostics:
    """Per-timestep diagnostics of a path with ``N`` steps (arrays of length ``N``)."""

    linear: np.ndarray  # (N, 3)
    angular: np.ndarray  # (N, 3), components of x ^ inc as (yz, zx, xy)
    scaling: np.ndarray  # (N,)
    horizontality: np.ndarray  # (N,)
    swept_area: np.ndarray  # (N,) per-step increments (already divided by N)
    step_energy: np.ndarray  # (N,)
    step_length: np.ndarray  # (N,)
    vol: np.ndarray  # (N+1,)

    @property
    def n_timesteps(self) -> int:
        return len(self.scaling)

    @property
    def total_swept_area(self) -> float:
        return float(self.swept_area.sum())

    @property
    def path_length(self) -> float:
        return float(self.step_length.sum())

    @property
    def energy(self) -> float:
        return float(self.step_energy.sum())

    def rows(self):
        for t in range(self.n_timesteps):
            yield (
                t,
                *self.linear[t],
                *self.angular[t],
                self.scaling[t],
                self.horizontality[t],
                self.swept_area[t],
                self.step_energy[t],
                self.step_length[t],
            )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in self.rows():
                writer.writerow([str(row[0])] + [repr(float(x)) for x in row[1:]])


def _vertex_phi(geo, w: MetricWeight) -> np.ndarray:
    trl2 = geo.trl2 if geo.trl2 is not None else np.zeros(geo.vertex_area.shape)
    return w.value(geo.vol[:, None], trl2)


def momenta(path: ShapePath, w: MetricWeight):
    """Linear, angular and scaling momentum per step.

    ``sum_v Phi(v) A(v) inc(v)``, ``sum_v Phi A (x ^ inc)`` and
    ``sum_v Phi A <x, inc>`` with frame-``t`` positions ``x``.
    Returns ``(linear (N,3), angular (N,3), scaling (N,))``.
    """
    frames = path.frames
    n = path.n_timesteps
    geo = batch_geometry(frames[:-1], path.topology, curvature=True)
    weight = (_vertex_phi(geo, w) * geo.vertex_area)[..., None]
    inc = n * (frames[1:] - frames[:-1])
    x = frames[:-1]
    linear = (weight * inc).sum(axis=1)
    angular = (weight * np.cross(x, inc)).sum(axis=1)
    scaling = (weight[..., 0] * np.einsum("tvi,tvi->tv", x, inc)).sum(axis=1)
    return linear, angular, scaling


def momentum_scale(path: ShapePath, w: MetricWeight) -> np.ndarray:
    """``sum_v Phi A |inc|`` per step: the size a momentum is measured against."""
    geo = batch_geometry(path.frames[:-1], path.topology, curvature=True)
    inc = path.n_timesteps * np.diff(path.frames, axis=0)
    return (_vertex_phi(geo, w) * geo.vertex_area * np.linalg.norm(inc, axis=-1)).sum(axis=1)


def relative_variation(values: np.ndarray, scale) -> float:
    """``max_t |m_t - mean(m)| / mean(scale)`` for a per-step momentum series."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    dev = np.linalg.norm(values - values.mean(axis=0), axis=1).max()
    s = float(np.mean(scale))
    return float(dev / s) if s > 0 else 0.0


def horizontality_residual(path: ShapePath) -> np.ndarray:
    """Per step ``||tangential inc||_L2 / ||inc||_L2`` with normals ``VA/|VA|``; 0 for a resting step."""
    frames = path.frames
    geo = batch_geometry(frames[:-1], path.topology, curvature=True)
    nrm = geo.vector_area / np.linalg.norm(geo.vector_area, axis=-1, keepdims=True)
    inc = np.diff(frames, axis=0)
    normal_part = np.einsum("tvi,tvi->tv", inc, nrm)
    total = np.einsum("tv,tvi,tvi->t", geo.vertex_area, inc, inc)
    tangential = total - np.einsum("tv,tv->t", geo.vertex_area, normal_part**2)
    out = np.zeros(len(total))
    ok = total > 0
    out[ok] = np.sqrt(np.clip(tangential[ok], 0.0, None) / total[ok])
    return out


def swept_area_steps(path: ShapePath) -> np.ndarray:
    """Area swept per step: ``|inc . nu_F|`` weighted by ``area(F)/3`` over stars, both end frames averaged, ``/N``."""
    frames = path.frames
    n = path.n_timesteps
    faces = path.topology.faces
    geo = batch_geometry(frames, path.topology, curvature=False)
    inc = n * np.diff(frames, axis=0)[:, faces]  # (N, F, 3, 3)
    out = np.zeros(n)
    for side in (slice(0, n), slice(1, n + 1)):
        nd = np.abs(np.einsum("tfjk,tfk->tfj", inc, geo.normal[side]))
        out += 0.5 * np.einsum("tfj,tf->t", nd, geo.norm[side] / 6.0)
    return out / n


def swept_area(path: ShapePath) -> float:
    return float(swept_area_steps(path).sum())


def path_length(path: ShapePath, w: MetricWeight) -> float:
    """Discrete length ``sum_t sqrt(e_t / N)`` from the per-step energies ``e_t``."""
    e = timestep_energies(path, w)
    return float(np.sqrt(np.clip(e, 0.0, None) / path.n_timesteps).sum())


def analyze_path(path: ShapePath, w: MetricWeight) -> PathDiagnostics:
    linear, angular, scaling = momenta(path, w)
    e = timestep_energies(path, w)
    vol = batch_geometry(path.frames, path.topology, curvature=False).vol
    return PathDiagnostics(
        linear=linear,
        angular=angular,
        scaling=scaling,
        horizontality=horizontality_residual(path),
        swept_area=swept_area_steps(path),
        step_energy=e,
        step_length=np.sqrt(np.clip(e, 0.0, None) / path.n_timesteps),
        vol=vol,
    )


# -- bounds ----------------------------------------------------------------------


@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return bool(self.lhs <= self.rhs)


def bound_constants(path: ShapePath, w: MetricWeight) -> dict:
    """Largest constants valid on ``path``: ``Phi >= C1``, ``Phi >= C Vol``, ``Phi >= C2 TrL^2``."""
    geo = batch_geometry(path.frames, path.topology, curvature=True)
    phi = _vertex_phi(geo, w)
    with np.errstate(divide="ignore"):
        c2 = float(np.min(np.where(geo.trl2 > 0, phi / geo.trl2, np.inf)))
    return {
        "C1": float(phi.min()),
        "C": float((phi / geo.vol[:, None]).min()),
        "C2": c2,
    }


def swept_area_bounds(
    path: ShapePath,
    w: MetricWeight,
    C1: float | None = None,
    C2: float | None = None,
    C: float | None = None,
) -> list[BoundCheck]:
    """Evaluate both sides of each bound for which a constant is supplied.

    * ``C1`` (``Phi >= C1``): ``sqrt(C1) * swept <= max_t sqrt(Vol_t) * L``;
    * ``C`` (``Phi >= C Vol``): ``sqrt(C) * swept <= L``;
    * ``C2`` (``Phi >= C2 TrL^2``): ``|sqrt(Vol_N) - sqrt(Vol_0)| <= L / (2 sqrt(C2))``,
      using the path length as the upper bound for the distance.

    Raises
    ------
    InapplicableBound
        If no positive constant is supplied.
    """
    if not any(c is not None and c > 0 for c in (C1, C2, C)):
        raise InapplicableBound("supply at least one positive bound constant")
    area = swept_area(path)
    length = path_length(path, w)
    vol = batch_geometry(path.frames, path.topology, curvature=False).vol
    out = []
    if C1 is not None and C1 > 0:
        out.append(BoundCheck("area_swept", np.sqrt(C1) * area, float(np.sqrt(vol.max())) * length))
    if C is not None and C > 0:
        out.append(BoundCheck("area_swept_conformal", np.sqrt(C) * area, length))
    if C2 is not None and C2 > 0 and np.isfinite(C2):
        out.append(BoundCheck("sqrt_vol_lipschitz", abs(np.sqrt(vol[-1]) - np.sqrt(vol[0])), length / (2.0 * np.sqrt(C2))))
    return out


# -- curvature quadrature --------------------------------------------------------


def _topology(mesh) -> Topology:
    return mesh.topology if isinstance(mesh, TriMesh) else mesh


def face_gradients(positions, mesh, values) -> np.ndarray:
    """In-plane gradient of the piecewise-linear interpolant of ``values``, shape ``(F, 3)``."""
    topo = _topology(mesh)
    geo = compute_geometry(positions, topo, curvature=False)
    p = np.asarray(positions, dtype=float)[topo.faces]
    a = np.asarray(values, dtype=float)[topo.faces]
    # grad phi_i = nu x e_i / (2 area), e_i the edge opposite corner i
    opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
    g = np.cross(geo.face_normal[:, None, :], opp) / (2.0 * geo.face_area[:, None, None])
    return np.einsum("fj,fjk->fk", a, g)


def g0_curvature_quadrature(positions, mesh, a1, a2) -> float:
    """``0.5 * sum_F |abar1 grad a2 - abar2 grad a1|^2 area(F)`` with face means ``abar``."""
    topo = _topology(mesh)
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    area = compute_geometry(positions, topo, curvature=False).face_area
    g1 = face_gradients(positions, topo, a1)
    g2 = face_gradients(positions, topo, a2)
    m1 = a1[topo.faces].mean(axis=1)[:, None]
    m2 = a2[topo.faces].mean(axis=1)[:, None]
    d = m1 * g2 - m2 * g1
    return float(0.5 * np.einsum("fi,fi,f->", d, d, area))


def dirichlet_energy(positions, mesh, values) -> float:
    """``int |grad a|^2`` of the linear interpolant via edge cotangent weights."""
    topo = _topology(mesh)
    p = np.asarray(positions, dtype=float)
    a = np.asarray(values, dtype=float)
    total = 0.0
    for tri in topo.faces:
        for j in range(3):
            o, i, k = tri[j], tri[(j + 1) % 3], tri[(j + 2) % 3]
            u, v = p[i] - p[o], p[k] - p[o]
            cot = np.dot(u, v) / np.linalg.norm(np.cross(u, v))
            total += 0.5 * cot * (a[i] - a[k]) ** 2
    return float(total)

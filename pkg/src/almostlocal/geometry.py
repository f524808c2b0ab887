"""Discrete differential geometry of one frame (or a batch of frames).

Per face: the cross product ``(p2 - p1) x (p3 - p1)``, its norm, area and
unit normal.  Per vertex: area (a third of the star area), vector area
(the gradient of enclosed volume), vector mean curvature (the gradient of
surface area) and the squared scalar mean curvature ``|VM|^2 / |VA|^2``.

The batched routines work on arrays of shape ``(T, V, 3)`` and come with a
hand-written reverse pass used by :mod:`almostlocal.path_energy`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngle, DegenerateFace, ZeroVectorArea
from .mesh import AREA_FLOOR_FACTOR, TriMesh, Topology

# |VA| below this multiple of the vertex area counts as zero
_ZERO_VA_RTOL = 1e-12


@dataclass
class VertexGeometry:
    cross: np.ndarray
    face_area: np.ndarray
    face_normal: np.ndarray
    vertex_area: np.ndarray
    vector_area: np.ndarray
    vector_mean_curvature: np.ndarray
    trl2: np.ndarray
    total_vol: float

    @property
    def vertex_normal(self) -> np.ndarray:
        va = self.vector_area
        return va / np.linalg.norm(va, axis=1, keepdims=True)


@dataclass
class BatchGeometry:
    """Forward quantities for ``T`` frames, kept for the reverse pass."""

    corners: np.ndarray  # (T, F, 3, 3) positions of the face corners
    cross: np.ndarray  # (T, F, 3)
    norm: np.ndarray  # (T, F)
    normal: np.ndarray  # (T, F, 3)
    vol: np.ndarray  # (T,)
    vertex_area: np.ndarray  # (T, V)
    vector_area: np.ndarray | None = None  # (T, V, 3)
    vector_mean_curvature: np.ndarray | None = None  # (T, V, 3)
    trl2: np.ndarray | None = None  # (T, V)


def _frame_floor(frames: np.ndarray) -> np.ndarray:
    diag = np.linalg.norm(frames.max(axis=1) - frames.min(axis=1), axis=-1)
    return AREA_FLOOR_FACTOR * diag**2


def batch_geometry(frames: np.ndarray, topo: Topology, curvature: bool = True) -> BatchGeometry:
    """Geometry of every frame in ``frames`` (shape ``(T, V, 3)``).

    Raises :class:`DegenerateFace` when a face area is at or below the floor
    and, if ``curvature`` is requested, :class:`ZeroVectorArea` when a
    vertex has vanishing vector area.
    """
    frames = np.asarray(frames, dtype=float)
    corners = frames[:, topo.faces]  # (T, F, 3, 3)
    cross = np.cross(corners[:, :, 1] - corners[:, :, 0], corners[:, :, 2] - corners[:, :, 0])
    norm = np.sqrt(np.einsum("tfi,tfi->tf", cross, cross))
    floor = 2.0 * _frame_floor(frames)  # compare |cross| = 2 * area
    bad = ~(norm > floor[:, None])
    if bad.any():
        t, fi = (int(k[0]) for k in np.nonzero(bad))
        raise DegenerateFace(f"frame {t}: face {fi} has area {0.5 * norm[t, fi]:.3e} at or below the floor")
    normal = cross / norm[..., None]
    vol = 0.5 * norm.sum(axis=1)
    vertex_area = topo.scatter(np.repeat(norm[..., None] / 6.0, 3, axis=-1), batch_dims=1)
    geo = BatchGeometry(corners, cross, norm, normal, vol, vertex_area)
    if curvature:
        va = topo.scatter(np.repeat(cross[:, :, None, :] / 6.0, 3, axis=2), batch_dims=1)
        vm = topo.scatter(_corner_mean_curvature(corners, normal), batch_dims=1)
        va2 = np.einsum("tvi,tvi->tv", va, va)
        small = ~(np.sqrt(va2) > _ZERO_VA_RTOL * geo.vertex_area)
        if small.any():
            t, v = (int(k[0]) for k in np.nonzero(small))
            raise ZeroVectorArea(v, frame=t)
        geo.vector_area = va
        geo.vector_mean_curvature = vm
        geo.trl2 = np.einsum("tvi,tvi->tv", vm, vm) / va2
    return geo


def _corner_mean_curvature(corners: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Per-corner gradient of the face area: ``0.5 * (p_next - p_prev) x nu``."""
    p_next = np.roll(corners, -1, axis=-2)
    p_prev = np.roll(corners, 1, axis=-2)
    return 0.5 * np.cross(p_next - p_prev, normal[..., None, :])


def batch_geometry_backward(
    geo: BatchGeometry,
    topo: Topology,
    g_cross: np.ndarray | None = None,
    g_vol: np.ndarray | None = None,
    g_trl2: np.ndarray | None = None,
) -> np.ndarray:
    """Pull gradients w.r.t. ``cross``, ``vol`` and ``trl2`` back to positions.

    Returns an array of shape ``(T, V, 3)``.
    """
    corners = geo.corners
    n_frames = corners.shape[0]
    gc = np.zeros_like(geo.cross) if g_cross is None else np.array(g_cross, dtype=float)
    g_corner = np.zeros_like(corners)  # direct position gradients per corner
    g_normal = np.zeros_like(geo.normal)

    if g_trl2 is not None:
        va, vm = geo.vector_area, geo.vector_mean_curvature
        va2 = np.einsum("tvi,tvi->tv", va, va)
        g_vm = (2.0 * g_trl2 / va2)[..., None] * vm
        g_va = (-2.0 * g_trl2 * geo.trl2 / va2)[..., None] * va
        # vector area: each face cross contributes cross / 6 to its corners
        gc += g_va[:, topo.faces].sum(axis=2) / 6.0
        # vector mean curvature: m_j = 0.5 * (p_{j+1} - p_{j-1}) x nu
        gm = g_vm[:, topo.faces]  # (T, F, 3, 3)
        nu = geo.normal[:, :, None, :]
        w = 0.5 * np.cross(nu, gm)  # d/d(p_{j+1}) of g . m_j ; negative for p_{j-1}
        g_corner += np.roll(w, 1, axis=2) - np.roll(w, -1, axis=2)
        diff = np.roll(corners, -1, axis=2) - np.roll(corners, 1, axis=2)
        g_normal += 0.5 * np.cross(gm, diff).sum(axis=2)

    if g_vol is not None:
        g_normal_from_vol = 0.5 * np.asarray(g_vol, dtype=float).reshape(n_frames, 1, 1) * geo.normal
        gc += g_normal_from_vol

    # normal = cross / |cross|
    proj = np.einsum("tfi,tfi->tf", geo.normal, g_normal)[..., None]
    gc += (g_normal - geo.normal * proj) / geo.norm[..., None]

    # cross = (p1 - p0) x (p2 - p0)
    e1 = corners[:, :, 1] - corners[:, :, 0]
    e2 = corners[:, :, 2] - corners[:, :, 0]
    g_e1 = np.cross(e2, gc)
    g_e2 = np.cross(gc, e1)
    g_corner[:, :, 1] += g_e1
    g_corner[:, :, 2] += g_e2
    g_corner[:, :, 0] -= g_e1 + g_e2
    return topo.scatter(g_corner, batch_dims=1)


def compute_geometry(positions, mesh: TriMesh | Topology, curvature: bool = True) -> VertexGeometry:
    """All per-face and per-vertex quantities of one frame.

    Parameters
    ----------
    positions : array_like, shape (V, 3)
    mesh : TriMesh or Topology
        Supplies the combinatorics.
    curvature : bool
        Skip vector area / mean curvature when False.
    """
    topo = mesh.topology if isinstance(mesh, TriMesh) else mesh
    geo = batch_geometry(np.asarray(positions, dtype=float)[None], topo, curvature=curvature)
    return VertexGeometry(
        cross=geo.cross[0],
        face_area=0.5 * geo.norm[0],
        face_normal=geo.normal[0],
        vertex_area=geo.vertex_area[0],
        vector_area=None if geo.vector_area is None else geo.vector_area[0],
        vector_mean_curvature=None if geo.vector_mean_curvature is None else geo.vector_mean_curvature[0],
        trl2=None if geo.trl2 is None else geo.trl2[0],
        total_vol=float(geo.vol[0]),
    )


def link_mean_curvature(positions, mesh: TriMesh, vertex: int) -> np.ndarray:
    """Vector mean curvature from the oriented link tuples of ``vertex``.

    Sums ``o * (edge x nu(F))`` over the link and halves it, which makes it
    the gradient of total surface area.
    """
    p = np.asarray(positions, dtype=float)
    topo = mesh.topology
    total = np.zeros(3)
    for face, edge, sign in topo.link_of_vertex[vertex]:
        a, b, c = topo.faces[face]
        cr = np.cross(p[b] - p[a], p[c] - p[a])
        nu = cr / np.linalg.norm(cr)
        e0, e1 = topo.edges[edge]
        total += sign * np.cross(p[e1] - p[e0], nu)
    return 0.5 * total


def cotangent_mean_curvature(positions, mesh: TriMesh, vertex: int) -> np.ndarray:
    """Vector mean curvature by the cotangent formula.

    Returns ``0.5 * sum_i (cot(alpha_i) + cot(beta_i)) * (p - p_i)`` over the
    edges ``(p, p_i)`` at ``vertex``, with ``alpha_i``, ``beta_i`` the angles
    opposite the edge.  The factor one half makes this the gradient of
    surface area.
    """
    p = np.asarray(positions, dtype=float)
    topo = mesh.topology
    v = int(vertex)
    weights: dict[int, float] = {}
    for face in topo.faces_of_vertex[v]:
        tri = topo.faces[face].tolist()
        j = tri.index(v)
        b, c = tri[(j + 1) % 3], tri[(j + 2) % 3]
        # angle at c is opposite edge (v, b); angle at b is opposite (v, c)
        for opp, nbr in ((c, b), (b, c)):
            u = p[v] - p[opp]
            w = p[nbr] - p[opp]
            sin = np.linalg.norm(np.cross(u, w))
            if not sin > 0.0:
                raise DegenerateAngle(f"angle with zero sine in face {int(face)}")
            weights[nbr] = weights.get(nbr, 0.0) + np.dot(u, w) / sin
    total = np.zeros(3)
    for nbr, cot in weights.items():
        total += cot * (p[v] - p[nbr])
    return 0.5 * total


def enclosed_volume(positions, mesh: TriMesh | Topology) -> float:
    topo = mesh.topology if isinstance(mesh, TriMesh) else mesh
    c = np.asarray(positions, dtype=float)[topo.faces]
    return float(np.einsum("fi,fi->", c[:, 0], np.cross(c[:, 1], c[:, 2])) / 6.0)


def surface_area(positions, mesh: TriMesh | Topology) -> float:
    topo = mesh.topology if isinstance(mesh, TriMesh) else mesh
    c = np.asarray(positions, dtype=float)[topo.faces]
    return float(0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1).sum())

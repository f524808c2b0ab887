"""Closed triangle meshes: combinatorics, icospheres, OFF/OBJ I/O.

A :class:`TriMesh` couples one immutable :class:`Topology` (faces plus
every derived adjacency set) with a single array of vertex positions.
Paths of shapes reuse the same topology for every frame, see
:class:`ShapePath`.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from ._validation import check_positions
from .errors import (
    DegenerateFace,
    DegenerateFrame,
    InconsistentOrientation,
    LevelTooLarge,
    NonManifoldEdge,
    NonManifoldVertex,
    ParseError,
    SharedCombinatoricsMismatch,
    UnreferencedVertex,
    UnsupportedElement,
)

MAX_ICOSPHERE_LEVEL = 6
AREA_FLOOR_FACTOR = 1e-12


class Topology:
    """Immutable combinatorics of a closed, consistently oriented triangle mesh.

    Parameters
    ----------
    faces : array_like of int, shape (F, 3)
        Vertex index triples, 0-based.
    n_vertices : int
        Number of vertices.

    Attributes
    ----------
    faces : ndarray, shape (F, 3)
    edges : ndarray, shape (E, 2)
        Unordered edges stored as ``(i, j)`` with ``i < j``, sorted.
    faces_of_vertex : list of ndarray
        Star of each vertex, ordered counter-clockwise seen from outside.
    link_of_vertex : list of ndarray, shape (deg, 3)
        Rows ``(face, edge, o)``: the link edge opposite the vertex in
        ``face`` and a sign with ``o * (p[e1] - p[e0]) = p_b - p_c`` for the
        face read cyclically as ``(v, b, c)``.
    adjacent_edge_pairs : list of ndarray, shape (deg, 4)
        Rows ``(edge1, o1, edge2, o2)`` for consecutive emanating edges
        around the vertex.  ``o * (p[e1] - p[e0])`` points away from the
        vertex.
    """

    def __init__(self, faces, n_vertices: int):
        faces = np.ascontiguousarray(np.asarray(faces, dtype=np.int64))
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must have shape (F, 3)")
        n_vertices = int(n_vertices)
        if faces.size and (faces.min() < 0 or faces.max() >= n_vertices):
            raise ValueError("face index out of range")
        faces.setflags(write=False)
        self.faces = faces
        self.n_vertices = n_vertices
        self._check_faces()
        self._build()

    # -- construction ---------------------------------------------------------

    def _check_faces(self):
        f = self.faces
        bad = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if bad.any():
            raise DegenerateFace(f"face {int(np.flatnonzero(bad)[0])} repeats a vertex index")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[f.ravel()] = True
        if not used.all():
            raise UnreferencedVertex(f"vertex {int(np.flatnonzero(~used)[0])} belongs to no face")

    def _build(self):
        f = self.faces
        n_faces = len(f)
        # directed half-edges (a -> b) of each face, in corner order
        tails = f.ravel()
        heads = np.roll(f, -1, axis=1).ravel()
        directed = {}
        for idx, (a, b) in enumerate(zip(tails.tolist(), heads.tolist())):
            if (a, b) in directed:
                if (b, a) in directed:
                    raise NonManifoldEdge(f"edge ({min(a, b)}, {max(a, b)}) has more than two faces")
                raise InconsistentOrientation(
                    f"directed edge ({a}, {b}) used by faces {directed[(a, b)] // 3} and {idx // 3}"
                )
            directed[(a, b)] = idx
        for a, b in directed:
            if (b, a) not in directed:
                raise NonManifoldEdge(f"edge ({min(a, b)}, {max(a, b)}) has only one face")

        lo = np.minimum(tails, heads)
        hi = np.maximum(tails, heads)
        edges, inverse = np.unique(np.stack([lo, hi], axis=1), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        if len(edges) * 2 != 3 * n_faces:
            raise NonManifoldEdge("every edge must border exactly two faces")
        edges.setflags(write=False)
        self.edges = edges
        # edge index of the directed half-edge starting at corner j of face i
        self.face_edges = inverse.reshape(n_faces, 3)
        self._edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}

        # per vertex: map b -> (face, corner) for faces read as (v, b, c)
        nxt: list[dict[int, tuple[int, int]]] = [dict() for _ in range(self.n_vertices)]
        for fi in range(n_faces):
            for j in range(3):
                v = int(f[fi, j])
                b = int(f[fi, (j + 1) % 3])
                nxt[v][b] = (fi, j)

        faces_of_vertex = []
        link_of_vertex = []
        adjacent_pairs = []
        for v in range(self.n_vertices):
            ring = nxt[v]
            start = min(ring)
            order = []
            b = start
            while True:
                fi, j = ring[b]
                order.append((fi, j, b))
                b = int(f[fi, (j + 2) % 3])
                if b == start or b not in ring or len(order) > len(ring):
                    break
            if len(order) != len(ring):
                raise NonManifoldVertex(f"link of vertex {v} is not a single cycle")
            star = np.array([fi for fi, _, _ in order], dtype=np.int64)
            link = np.empty((len(order), 3), dtype=np.int64)
            pairs = np.empty((len(order), 4), dtype=np.int64)
            for row, (fi, j, b) in enumerate(order):
                c = int(f[fi, (j + 2) % 3])
                e = self.edge_index(b, c)
                # stored (lo, hi); we need o * (p[hi] - p[lo]) = p_b - p_c
                link[row] = (fi, e, 1 if b > c else -1)
                eb = self.edge_index(v, b)
                ec = self.edge_index(v, c)
                pairs[row] = (eb, 1 if b > v else -1, ec, 1 if c > v else -1)
            for arr in (star, link, pairs):
                arr.setflags(write=False)
            faces_of_vertex.append(star)
            link_of_vertex.append(link)
            adjacent_pairs.append(pairs)
        self.faces_of_vertex = faces_of_vertex
        self.link_of_vertex = link_of_vertex
        self.adjacent_edge_pairs = adjacent_pairs
        deg = np.array([len(s) for s in faces_of_vertex], dtype=np.int64)
        deg.setflags(write=False)
        self.degree = deg

    # -- queries --------------------------------------------------------------

    def edge_index(self, a: int, b: int) -> int:
        return self._edge_index[(a, b) if a < b else (b, a)]

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @cached_property
    def corner_scatter(self) -> sparse.csr_matrix:
        """Sparse ``(V, 3F)`` matrix summing per-corner values onto vertices."""
        n = 3 * self.n_faces
        return sparse.csr_matrix(
            (np.ones(n), (self.faces.ravel(), np.arange(n))),
            shape=(self.n_vertices, n),
        )

    def scatter(self, corner_values: np.ndarray, batch_dims: int = 0) -> np.ndarray:
        """Sum values given per face corner onto vertices.

        ``corner_values`` has shape ``(*batch, F, 3, *tail)`` with
        ``batch_dims`` leading axes; the result has shape
        ``(*batch, V, *tail)``.  The reduction order is fixed, so results
        are bit-reproducible.
        """
        arr = np.asarray(corner_values, dtype=float)
        head = arr.shape[:batch_dims]
        if arr.shape[batch_dims:batch_dims + 2] != (self.n_faces, 3):
            raise ValueError("corner array does not have an (F, 3) block after the batch axes")
        tail = arr.shape[batch_dims + 2:]
        moved = np.moveaxis(arr.reshape(head + (3 * self.n_faces,) + tail), batch_dims, 0)
        out = self.corner_scatter @ moved.reshape(3 * self.n_faces, -1)
        out = out.reshape((self.n_vertices,) + head + tail)
        return np.moveaxis(out, 0, batch_dims)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return self.n_vertices == other.n_vertices and np.array_equal(self.faces, other.faces)

    def __hash__(self):
        return hash((self.n_vertices, self.faces.tobytes()))

    def __repr__(self):
        return f"Topology(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces})"


def area_floor(positions: np.ndarray) -> float:
    """Face-area floor ``1e-12 * (bounding-box diagonal)**2`` of a frame."""
    p = np.asarray(positions)
    diag = float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))
    return AREA_FLOOR_FACTOR * diag * diag


class TriMesh:
    """A closed triangle mesh: topology plus one frame of positions."""

    def __init__(self, positions, topology: Topology):
        self.positions = np.array(check_positions(positions, topology.n_vertices), dtype=float)
        self.topology = topology

    @property
    def faces(self) -> np.ndarray:
        return self.topology.faces

    @property
    def edges(self) -> np.ndarray:
        return self.topology.edges

    @property
    def n_vertices(self) -> int:
        return self.topology.n_vertices

    @property
    def n_faces(self) -> int:
        return self.topology.n_faces

    @property
    def n_edges(self) -> int:
        return self.topology.n_edges

    def with_positions(self, positions) -> TriMesh:
        return TriMesh(positions, self.topology)

    def face_cross(self) -> np.ndarray:
        p = self.positions[self.faces]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def surface_area(self) -> float:
        return float(self.face_areas().sum())

    def enclosed_volume(self) -> float:
        p = self.positions[self.faces]
        return float(np.einsum("fi,fi->", p[:, 0], np.cross(p[:, 1], p[:, 2])) / 6.0)

    def check_nondegenerate(self):
        areas = self.face_areas()
        floor = area_floor(self.positions)
        bad = np.flatnonzero(~(areas > floor))
        if bad.size:
            raise DegenerateFace(f"face {int(bad[0])} has area {areas[bad[0]]:.3e} <= floor {floor:.3e}")

    def copy(self) -> TriMesh:
        return TriMesh(self.positions.copy(), self.topology)

    def __repr__(self):
        return f"TriMesh(V={self.n_vertices}, F={self.n_faces})"


def build_combinatorics(positions, faces) -> TriMesh:
    """Validate ``faces`` and derive every adjacency set.

    Raises
    ------
    NonManifoldEdge, NonManifoldVertex, InconsistentOrientation,
    DegenerateFace, UnreferencedVertex
    """
    positions = np.asarray(positions, dtype=float)
    topo = Topology(faces, len(positions))
    return TriMesh(positions, topo)


# -- icospheres -----------------------------------------------------------------

_PHI = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTICES = [
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
]
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def _subdivide(vertices: list, faces: list) -> tuple[list, list]:
    cache: dict[tuple[int, int], int] = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            pa, pb = vertices[a], vertices[b]
            m = ((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2, (pa[2] + pb[2]) / 2)
            n = math.sqrt(m[0] ** 2 + m[1] ** 2 + m[2] ** 2)
            vertices.append((m[0] / n, m[1] / n, m[2] / n))
            cache[key] = len(vertices) - 1
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return vertices, out


def make_icosphere(level: int = 2, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Icosphere by repeated 1-to-4 midpoint subdivision with re-projection.

    Level ``L`` has ``20 * 4**L`` faces.  Faces are oriented with outward
    normals.
    """
    level = int(level)
    if level < 0:
        raise ValueError("level must be non-negative")
    if level > MAX_ICOSPHERE_LEVEL:
        raise LevelTooLarge(f"level {level} exceeds the limit {MAX_ICOSPHERE_LEVEL}")
    norm = math.sqrt(1.0 + _PHI * _PHI)
    vertices = [(x / norm, y / norm, z / norm) for x, y, z in _ICO_VERTICES]
    faces = []
    for a, b, c in _ICO_FACES:
        pa, pb, pc = (np.array(vertices[i]) for i in (a, b, c))
        outward = np.dot(np.cross(pb - pa, pc - pa), pa + pb + pc) > 0
        faces.append((a, b, c) if outward else (a, c, b))
    for _ in range(level):
        vertices, faces = _subdivide(vertices, faces)
    unit = np.array(vertices, dtype=float)
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    positions = float(radius) * unit + np.asarray(center, dtype=float)
    return build_combinatorics(positions, np.array(faces, dtype=np.int64))


# -- paths --------------------------------------------------------------------


@dataclass
class ShapePath:
    """A discrete path of shapes ``frames[0..N]`` over one topology.

    Frames 0 and N are the boundary data; optimizers only ever modify
    ``frames[1:-1]``.
    """

    topology: Topology
    frames: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim != 3 or frames.shape[1:] != (self.topology.n_vertices, 3):
            raise ValueError(
                f"frames must have shape (N+1, {self.topology.n_vertices}, 3), got {frames.shape}"
            )
        if len(frames) < 2:
            raise ValueError("a path needs at least two frames")
        self.frames = frames

    @property
    def n_timesteps(self) -> int:
        return len(self.frames) - 1

    @property
    def n_vertices(self) -> int:
        return self.topology.n_vertices

    @property
    def start(self) -> np.ndarray:
        return self.frames[0]

    @property
    def end(self) -> np.ndarray:
        return self.frames[-1]

    @property
    def interior(self) -> np.ndarray:
        return self.frames[1:-1]

    def frame(self, t: int) -> TriMesh:
        return TriMesh(self.frames[t], self.topology)

    def with_interior(self, interior) -> ShapePath:
        interior = np.asarray(interior, dtype=float).reshape(self.frames[1:-1].shape)
        frames = self.frames.copy()
        frames[1:-1] = interior
        return ShapePath(self.topology, frames, dict(self.metadata))

    def reversed(self) -> ShapePath:
        return ShapePath(self.topology, self.frames[::-1].copy(), dict(self.metadata))

    def validate(self):
        """Raise :class:`DegenerateFrame` if any frame has a face below the area floor."""
        p = self.frames[:, self.topology.faces]
        areas = 0.5 * np.linalg.norm(np.cross(p[:, :, 1] - p[:, :, 0], p[:, :, 2] - p[:, :, 0]), axis=-1)
        for t in range(len(self.frames)):
            floor = area_floor(self.frames[t])
            bad = np.flatnonzero(~(areas[t] > floor))
            if bad.size:
                raise DegenerateFrame(f"frame {t}: face {int(bad[0])} has area {areas[t, bad[0]]:.3e}")
        return self

    def __len__(self):
        return len(self.frames)


def check_same_topology(a: TriMesh, b: TriMesh):
    if a.topology is b.topology:
        return
    if a.topology != b.topology:
        raise SharedCombinatoricsMismatch(
            f"meshes differ in combinatorics: {a.topology!r} vs {b.topology!r}"
        )


# -- file I/O -----------------------------------------------------------------


def _fmt(x: float) -> str:
    # repr gives the shortest round-tripping decimal, independent of locale
    return repr(float(x))


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def _read_off(path) -> TriMesh:
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty file", path) from None
    tokens = header.split()
    if not tokens or tokens[0] != "OFF":
        raise ParseError(f"expected 'OFF' header, got {header!r}", path, lineno)
    rest = tokens[1:]
    if not rest:
        try:
            lineno, counts = next(lines)
        except StopIteration:
            raise ParseError("missing counts line", path) from None
        rest = counts.split()
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except (IndexError, ValueError):
        raise ParseError(f"bad counts line {' '.join(rest)!r}", path, lineno) from None

    positions = np.empty((nv, 3))
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nv):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, found {i}", path) from None
        parts = line.split()
        try:
            positions[i] = [float(s) for s in parts[:3]]
        except ValueError:
            raise ParseError(f"bad vertex line {line!r}", path, lineno) from None
        if len(parts) < 3:
            raise ParseError(f"bad vertex line {line!r}", path, lineno)
    for i in range(nf):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, found {i}", path) from None
        parts = line.split()
        try:
            ints = [int(s) for s in parts]
        except ValueError:
            raise ParseError(f"bad face line {line!r}", path, lineno) from None
        if not ints or ints[0] != 3 or len(ints) < 4:
            raise UnsupportedElement(f"only triangles are supported, got {line!r}", path, lineno)
        faces[i] = ints[1:4]
    if faces.size and (faces.min() < 0 or faces.max() >= nv):
        raise ParseError("face index out of range", path)
    return build_combinatorics(positions, faces)


_OBJ_SKIP = {"vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib", "l"}


def _read_obj(path) -> TriMesh:
    positions = []
    faces = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        key = parts[0]
        if key == "v":
            try:
                positions.append([float(s) for s in parts[1:4]])
            except ValueError:
                raise ParseError(f"bad vertex line {line!r}", path, lineno) from None
            if len(parts) < 4:
                raise ParseError(f"bad vertex line {line!r}", path, lineno)
        elif key == "f":
            refs = parts[1:]
            if len(refs) != 3:
                raise UnsupportedElement(f"only triangles are supported, got {line!r}", path, lineno)
            idx = []
            for r in refs:
                try:
                    k = int(r.split("/", 1)[0])
                except ValueError:
                    raise ParseError(f"bad face line {line!r}", path, lineno) from None
                idx.append(k - 1 if k > 0 else len(positions) + k)
            faces.append(idx)
        elif key in _OBJ_SKIP:
            continue
        else:
            raise ParseError(f"unknown record {key!r}", path, lineno)
    positions = np.array(positions, dtype=float).reshape(-1, 3)
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(positions)):
        raise ParseError("face index out of range", path)
    return build_combinatorics(positions, faces)


def _format_of(path) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".off", ".obj"):
        return ext[1:]
    raise ValueError(f"unsupported mesh extension {ext!r} (use .off or .obj)")


def read_mesh(path) -> TriMesh:
    """Read an OFF (0-based) or OBJ (1-based) triangle mesh."""
    fmt = _format_of(path)
    return _read_off(path) if fmt == "off" else _read_obj(path)


def write_mesh(mesh: TriMesh, path, positions=None):
    """Write ``mesh`` (or ``positions`` over its faces) as OFF or OBJ."""
    pos = mesh.positions if positions is None else np.asarray(positions, dtype=float)
    if pos.shape != (mesh.n_vertices, 3):
        raise ValueError("positions do not match the mesh")
    fmt = _format_of(path)
    out = []
    if fmt == "off":
        out.append("OFF")
        out.append(f"{mesh.n_vertices} {mesh.n_faces} 0")
        out.extend(" ".join(_fmt(x) for x in row) for row in pos)
        out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist())
    else:
        out.extend("v " + " ".join(_fmt(x) for x in row) for row in pos)
        out.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist())
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


_FRAME_RE = re.compile(r"^frame_(\d+)\.off$")


def write_frames(path: ShapePath, directory) -> list[Path]:
    """Write ``frame_0000.off`` ... ``frame_NNNN.off`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mesh = TriMesh(path.frames[0], path.topology)
    written = []
    for t, frame in enumerate(path.frames):
        target = directory / f"frame_{t:04d}.off"
        write_mesh(mesh, target, positions=frame)
        written.append(target)
    return written


def read_frames(directory) -> ShapePath:
    """Read a ``frame_XXXX.off`` sequence back into a :class:`ShapePath`."""
    directory = Path(directory)
    found = sorted(
        (int(m.group(1)), p) for p in directory.iterdir() if (m := _FRAME_RE.match(p.name))
    )
    if len(found) < 2:
        raise ParseError("need at least two frame_XXXX.off files", directory)
    indices = [i for i, _ in found]
    if indices != list(range(len(found))):
        raise ParseError("frame numbering is not contiguous from 0", directory)
    first = read_mesh(found[0][1])
    frames = [first.positions]
    for _, p in found[1:]:
        m = read_mesh(p)
        check_same_topology(first, m)
        frames.append(m.positions)
    return ShapePath(first.topology, np.stack(frames))

import numpy as np
from scipy.spatial import ConvexHull

from almostlocal.mesh import build_combinatorics, make_icosphere


def random_closed_mesh(n_vertices=30, seed=0, jitter=0.15):
    """Convex hull of jittered points on the unit sphere, faces oriented outward."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_vertices, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= 1.0 + jitter * rng.uniform(-1, 1, size=(n_vertices, 1))
    hull = ConvexHull(pts)
    faces = hull.simplices.copy()
    center = pts.mean(axis=0)
    for f in faces:
        a, b, c = pts[f]
        if np.dot(np.cross(b - a, c - a), a - center) < 0:
            f[1], f[2] = f[2], f[1]
    used = np.unique(faces)
    remap = -np.ones(n_vertices, dtype=int)
    remap[used] = np.arange(len(used))
    return build_combinatorics(pts[used], remap[faces])


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def perturbed_icosphere(level=1, seed=0, amount=0.05):
    m = make_icosphere(level)
    rng = np.random.default_rng(seed)
    return m.with_positions(m.positions + amount * rng.normal(size=m.positions.shape))


def random_path(mesh, n_timesteps=3, seed=0, amount=0.05):
    """Path from ``mesh`` through random perturbations, frames of shape ``(N+1, V, 3)``."""
    rng = np.random.default_rng(seed)
    frames = [mesh.positions]
    for t in range(n_timesteps):
        step = 0.1 * (t + 1) * np.array([1.0, 0.3, -0.2])
        frames.append(mesh.positions * (1 + 0.1 * (t + 1)) + step + amount * rng.normal(size=mesh.positions.shape))
    return np.array(frames)


def tetrahedron():
    pts = np.array([[1.0, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]])
    faces = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return build_combinatorics(pts, faces)


def octahedron_with_pyramid_apex(height=0.7):
    """Octahedron whose top vertex is moved so its star is a right square pyramid."""
    pts = np.array([[1.0, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0], [0, 0, height], [0, 0, -1]])
    faces = [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4], [1, 0, 5], [2, 1, 5], [3, 2, 5], [0, 3, 5]]
    return build_combinatorics(pts, faces)


def flat_patch_mesh():
    """Closed mesh with a vertex (index 0) whose ring is coplanar.

    A hexagonal fan in the plane z = 0 closed off below by a cone to one apex.
    """
    ang = np.arange(6) * np.pi / 3
    ring = np.c_[np.cos(ang), np.sin(ang), np.zeros(6)]
    pts = np.vstack([[0.0, 0.0, 0.0], ring, [0.0, 0.0, -1.0]])
    faces = []
    for i in range(6):
        a, b = 1 + i, 1 + (i + 1) % 6
        faces.append([0, a, b])
        faces.append([7, b, a])
    return build_combinatorics(pts, faces)

"""Input checks shared by the public entry points."""

from __future__ import annotations

import numpy as np


def check_positions(positions, n_vertices: int | None = None, name: str = "positions") -> np.ndarray:
    """Return ``positions`` as a finite float array of shape ``(V, 3)``."""
    arr = np.asarray(positions, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (V, 3), got {arr.shape}")
    if n_vertices is not None and arr.shape[0] != n_vertices:
        raise ValueError(f"{name} has {arr.shape[0]} vertices, expected {n_vertices}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_frames(frames, n_vertices: int | None = None) -> np.ndarray:
    """Return ``frames`` as a finite float array of shape ``(T, V, 3)`` with ``T >= 2``."""
    arr = np.asarray(frames, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"frames must have shape (T, V, 3), got {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("a path needs at least two frames")
    if n_vertices is not None and arr.shape[1] != n_vertices:
        raise ValueError(f"frames have {arr.shape[1]} vertices, expected {n_vertices}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("frames contain non-finite values")
    return arr


def check_timesteps(n) -> int:
    if int(n) != n or n < 2:
        raise ValueError(f"number of timesteps must be an integer >= 2, got {n!r}")
    return int(n)


def check_unit_times(t) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if arr.ndim != 1 or np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
        raise ValueError("times must be a 1-d array with values in [0, 1]")
    return arr

"""Geodesic boundary-value solver.

The interior frames of a path are optimized with limited-memory BFGS and
a strong-Wolfe line search.  Trial points that make a frame degenerate
(a face below the area floor, a vanishing vector area) count as
infinitely expensive, so the line search backs off instead of crossing
into invalid shapes.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AlmostLocalError, ConfigError, DegenerateFrame
from .mesh import ShapePath, TriMesh, check_same_topology
from .metric import MetricWeight
from .path_energy import EnergyBreakdown, objective_and_gradient

logger = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    ENERGY_TOLERANCE = "EnergyTolerance"
    MAX_ITERATIONS = "MaxIterations"
    LINE_SEARCH_FAILURE = "LineSearchFailure"


@dataclass
class SolverConfig:
    max_iterations: int = 2000
    grad_tolerance: float | None = None
    rel_energy_tolerance: float = 1e-10
    stall_window: int = 5
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    initialization: str = "linear"
    max_line_search: int = 40

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ConfigError("line search parameters need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ConfigError("memory must be at least 1")
        if self.stall_window < 1:
            raise ConfigError("stall_window must be at least 1")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be non-negative")
        if self.initialization not in ("linear", "provided"):
            raise ConfigError("initialization must be 'linear' or 'provided'")

    _ALIASES = {
        "maxIterations": "max_iterations",
        "gradTolerance": "grad_tolerance",
        "relEnergyTolerance": "rel_energy_tolerance",
        "stallWindow": "stall_window",
        "maxLineSearch": "max_line_search",
    }

    @classmethod
    def from_dict(cls, d: dict) -> SolverConfig:
        kwargs = {}
        for key, value in d.items():
            name = cls._ALIASES.get(key, key)
            if name == "lineSearch" and isinstance(value, dict):
                kwargs.update({k: v for k, v in value.items() if k in ("c1", "c2")})
                continue
            if name not in cls.__dataclass_fields__:
                raise ConfigError(f"unknown solver option {key!r}")
            kwargs[name] = value
        return cls(**kwargs)


@dataclass
class SolveReport:
    iterations: int
    breakdown: EnergyBreakdown
    grad_inf_norm: float
    grad_tolerance: float
    termination: Termination
    history: list = field(default_factory=list)
    n_evaluations: int = 0

    @property
    def converged(self) -> bool:
        return self.termination in (Termination.CONVERGED, Termination.ENERGY_TOLERANCE)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "evaluations": self.n_evaluations,
            "termination": self.termination.value,
            "gradInfNorm": float(self.grad_inf_norm),
            "gradTolerance": float(self.grad_tolerance),
            "breakdown": self.breakdown.to_dict(),
            "objectiveHistory": [float(x) for x in self.history],
        }


@dataclass
class MinimizeResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    evaluations: int
    termination: Termination
    history: list


def _strong_wolfe(phi, f0, d0, alpha0, c1, c2, max_iter):
    """Line search for ``phi(alpha) -> (f, dphi)``; infeasible points return ``inf``.

    Returns ``(alpha, f, dphi, payload)`` or ``None`` when no acceptable
    step exists.
    """
    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = alpha0
    a_max = math.inf
    best = None
    for i in range(max_iter):
        f, d, payload = phi(a)
        if not math.isfinite(f):
            a_max = a
            a = 0.5 * (a_prev + a)
            continue
        if f > f0 + c1 * a * d0 or (i > 0 and f >= f_prev):
            return _zoom(phi, a_prev, f_prev, d_prev, a, f, d, f0, d0, c1, c2, max_iter - i)
        if abs(d) <= -c2 * d0:
            return a, f, d, payload
        if d >= 0:
            return _zoom(phi, a, f, d, a_prev, f_prev, d_prev, f0, d0, c1, c2, max_iter - i)
        best = (a, f, d, payload)
        a_prev, f_prev, d_prev = a, f, d
        a = min(2.0 * a, 0.5 * (a + a_max)) if math.isfinite(a_max) else 2.0 * a
    return best


def _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    # cubic through both end points with derivatives, safeguarded to the bracket
    if math.isfinite(d_hi):
        d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
        rad = d1 * d1 - d_lo * d_hi
        if rad >= 0:
            d2 = math.copysign(math.sqrt(rad), a_hi - a_lo)
            denom = d_hi - d_lo + 2.0 * d2
            if denom != 0:
                a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom
                lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
                width = hi - lo
                if lo + 0.1 * width <= a <= hi - 0.1 * width:
                    return a
    return 0.5 * (a_lo + a_hi)


def _zoom(phi, a_lo, f_lo, d_lo, a_hi, f_hi, d_hi, f0, d0, c1, c2, max_iter):
    payload_lo = None
    for _ in range(max(max_iter, 1)):
        if math.isfinite(f_hi):
            a = _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        else:
            a = 0.5 * (a_lo + a_hi)
        if a == a_lo or a == a_hi:
            break
        f, d, payload = phi(a)
        if not math.isfinite(f) or f > f0 + c1 * a * d0 or f >= f_lo:
            a_hi, f_hi, d_hi = a, f, d
        else:
            if abs(d) <= -c2 * d0:
                return a, f, d, payload
            if d * (a_hi - a_lo) >= 0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo, payload_lo = a, f, d, payload
    if a_lo > 0 and f_lo < f0 and payload_lo is not None:
        # sufficient decrease holds, curvature does not: still a valid descent step
        return a_lo, f_lo, d_lo, payload_lo
    return None


def lbfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    *,
    max_iterations: int = 2000,
    grad_tolerance: float = 1e-6,
    rel_energy_tolerance: float = 1e-10,
    stall_window: int = 5,
    memory: int = 10,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_line_search: int = 40,
    initial_step: float | None = None,
    callback=None,
) -> MinimizeResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    ``fun`` may raise :class:`AlmostLocalError` for infeasible points, which
    the line search treats as ``+inf``.  The energy test stops only after
    ``stall_window`` consecutive iterations each decrease ``f`` by less than
    ``rel_energy_tolerance`` relative to its size, so one short step on a flat
    stretch does not end the run.
    """
    n_evals = 0

    def evaluate(x):
        nonlocal n_evals
        n_evals += 1
        try:
            f, g = fun(x)
        except AlmostLocalError:
            return math.inf, None
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            return math.inf, None
        return f, g

    x = np.array(x0, dtype=float).ravel()
    f, g = evaluate(x)
    if g is None:
        raise DegenerateFrame("the initial path is not a valid point of the objective")
    history = [f]
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)
    termination = Termination.MAX_ITERATIONS
    it = 0
    stalled = 0
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if gnorm <= grad_tolerance:
        return MinimizeResult(x, f, g, 0, n_evals, Termination.CONVERGED, history)

    while it < max_iterations:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            rho = 1.0 / np.dot(y, s)
            a = rho * np.dot(s, q)
            alphas.append((a, rho))
            q -= a * y
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            q *= np.dot(s, y) / np.dot(y, y)
        for (s, y), (a, rho) in zip(zip(s_hist, y_hist), reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        direction = -q
        d0 = float(np.dot(g, direction))
        if not d0 < 0:
            s_hist.clear()
            y_hist.clear()
            direction = -g
            d0 = -float(np.dot(g, g))

        if s_hist:
            alpha0 = 1.0
        elif initial_step is not None:
            alpha0 = initial_step / max(float(np.max(np.abs(direction))), 1e-300)
        else:
            alpha0 = 1.0 / max(float(np.linalg.norm(direction)), 1e-300)

        def phi(alpha, direction=direction):
            xt = x + alpha * direction
            ft, gt = evaluate(xt)
            if gt is None:
                return math.inf, math.nan, None
            return ft, float(np.dot(gt, direction)), (xt, gt)

        found = _strong_wolfe(phi, f, d0, alpha0, c1, c2, max_line_search)
        if found is None and s_hist:
            # retry once along steepest descent with a fresh memory
            s_hist.clear()
            y_hist.clear()
            continue
        if found is None:
            termination = Termination.LINE_SEARCH_FAILURE
            break
        alpha, f_new, _, (x_new, g_new) = found
        it += 1
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
        f_old = f
        x, f, g = x_new, f_new, g_new
        history.append(f)
        gnorm = float(np.max(np.abs(g)))
        if callback is not None:
            callback(it, f, gnorm, alpha * float(np.max(np.abs(direction))))
        if gnorm <= grad_tolerance:
            termination = Termination.CONVERGED
            break
        if abs(f_old - f) <= rel_energy_tolerance * max(abs(f_old), abs(f), 1e-300):
            stalled += 1
            if stalled >= stall_window:
                termination = Termination.ENERGY_TOLERANCE
                break
        else:
            stalled = 0
    return MinimizeResult(x, f, g, it, n_evals, termination, history)


# -- geodesic problem ------------------------------------------------------------


def _as_positions(shape, topology=None) -> np.ndarray:
    if isinstance(shape, TriMesh):
        return shape.positions
    arr = np.asarray(shape, dtype=float)
    if topology is not None and arr.shape != (topology.n_vertices, 3):
        raise ValueError(f"expected positions of shape ({topology.n_vertices}, 3), got {arr.shape}")
    return arr


def initialize_path(start: TriMesh, end, n_timesteps: int, mode: str = "linear", provided=None) -> ShapePath:
    """Initial path: straight-line interpolation, or a validated user path.

    ``provided`` may be a :class:`ShapePath` or an array of shape
    ``(N+1, V, 3)``; its endpoints are replaced by ``start`` and ``end``
    only if they already agree with them.
    """
    n_timesteps = int(n_timesteps)
    if n_timesteps < 2:
        raise ValueError("need at least 2 timesteps")
    if isinstance(end, TriMesh):
        check_same_topology(start, end)
    p0 = start.positions
    p1 = _as_positions(end, start.topology)
    if mode == "linear":
        s = np.linspace(0.0, 1.0, n_timesteps + 1)[:, None, None]
        frames = p0[None] + s * (p1 - p0)[None]
        frames[0], frames[-1] = p0, p1
    elif mode == "provided":
        if provided is None:
            raise ConfigError("mode 'provided' needs an initial path")
        frames = np.array(provided.frames if isinstance(provided, ShapePath) else provided, dtype=float)
        if isinstance(provided, ShapePath) and provided.topology != start.topology:
            raise ValueError("provided path has different combinatorics")
        if frames.shape != (n_timesteps + 1, start.n_vertices, 3):
            raise ValueError(
                f"provided path has shape {frames.shape}, expected {(n_timesteps + 1, start.n_vertices, 3)}"
            )
        if not (np.allclose(frames[0], p0) and np.allclose(frames[-1], p1)):
            raise ValueError("provided path does not start and end at the boundary shapes")
        frames[0], frames[-1] = p0, p1
    else:
        raise ConfigError(f"unknown initialization mode {mode!r}")
    return ShapePath(start.topology, frames).validate()


def _length_scale(path: ShapePath) -> float:
    ends = np.concatenate([path.frames[0], path.frames[-1]])
    return float(np.linalg.norm(ends.max(axis=0) - ends.min(axis=0)))


def solve_geodesic(
    start: TriMesh,
    end,
    n_timesteps: int,
    w: MetricWeight,
    penalty_factor: float = 1.0,
    penalty_exponent: float = 2,
    config: SolverConfig | None = None,
    initial_path=None,
    progress: bool = False,
) -> tuple[ShapePath, SolveReport]:
    """Minimize energy plus weighted penalty over the interior frames.

    Returns the optimized path and a :class:`SolveReport`.
    """
    config = config or SolverConfig()
    mode = "provided" if initial_path is not None else config.initialization
    path = initialize_path(start, end, n_timesteps, mode, provided=initial_path)
    topo = path.topology
    frames = path.frames.copy()
    shape = frames[1:-1].shape

    def fun(x):
        frames[1:-1] = x.reshape(shape)
        breakdown, grad = objective_and_gradient(frames, topo, w, penalty_factor, penalty_exponent)
        return breakdown.objective, grad[1:-1].ravel()

    scale = _length_scale(path)
    if config.grad_tolerance is None:
        f0, _ = fun(path.interior.ravel())
        gtol = 1e-6 * max(abs(f0), 1e-300) / max(scale, 1e-300)
    else:
        gtol = float(config.grad_tolerance)

    def report(it, f, gnorm, step):
        msg = f"iter {it} objective {f:.12e} g_inf {gnorm:.3e} step {step:.3e}"
        if progress:
            logger.info(msg)
        else:
            logger.debug(msg)

    if path.interior.size:
        res = lbfgs(
            fun,
            path.interior.ravel(),
            max_iterations=config.max_iterations,
            grad_tolerance=gtol,
            rel_energy_tolerance=config.rel_energy_tolerance,
            stall_window=config.stall_window,
            memory=config.memory,
            c1=config.c1,
            c2=config.c2,
            max_line_search=config.max_line_search,
            initial_step=1e-2 * scale,
            callback=report,
        )
        frames[1:-1] = res.x.reshape(shape)
        iterations, evaluations, termination, history = res.iterations, res.evaluations, res.termination, res.history
    else:
        iterations, evaluations, termination, history = 0, 0, Termination.CONVERGED, []
    result = ShapePath(topo, frames)
    breakdown, grad = objective_and_gradient(result.frames, topo, w, penalty_factor, penalty_exponent)
    if not history:
        history = [breakdown.objective]
    g_inf = float(np.max(np.abs(grad[1:-1]))) if grad[1:-1].size else 0.0
    return result, SolveReport(
        iterations=iterations,
        breakdown=breakdown,
        grad_inf_norm=g_inf,
        grad_tolerance=gtol,
        termination=termination,
        history=history,
        n_evaluations=evaluations,
    )


def mean_radius(frame: np.ndarray, center=None) -> float:
    """Mean distance of the vertices from ``center`` (default: their centroid)."""
    frame = np.asarray(frame, dtype=float)
    c = frame.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    return float(np.linalg.norm(frame - c, axis=1).mean())


def radius_profile(path: ShapePath, center=None) -> np.ndarray:
    return np.array([mean_radius(f, center) for f in path.frames])

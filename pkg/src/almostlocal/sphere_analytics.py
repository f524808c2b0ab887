"""Exact theory for concentric spheres and translated spheres.

A round sphere of radius ``r`` in ``R^n`` has total volume
``Vol(r) = n pi^(n/2) r^(n-1) / Gamma(1 + n/2)`` and signed mean curvature
``Tr(L) = -(n-1)/r``.  Restricted to concentric spheres a geodesic is
described by its radius alone and obeys::

    r_tt = -r_t^2 (n-1)/Phi [ Phi/(2r) + d1Phi/2 * dVol/dr / (n-1) + d2Phi/(2 r^2) ]

with ``d2Phi`` the derivative in the signed ``Tr(L)``.  Because the ODE
only involves ``r_t^2`` it is the constant-speed condition of the length
element ``r^((n-1)/2) sqrt(Phi) dr``, which gives a quadrature solution
for every weight (:func:`geodesic_radius`).

Everything here is written for scalars; it serves as the reference the
mesh optimizer is compared against.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import (
    BlowupDetected,
    DomainError,
    FitFailure,
    NoAnalyticForm,
    NoPositiveOptimum,
    StepFailure,
    UnsupportedWeight,
)
from .metric import (
    G0,
    Combined,
    ConformalExp,
    ConformalPower,
    GAPower,
    MetricWeight,
    ScaleInvariant,
    evaluate_signed,
    partials_signed,
)


def sphere_volume(r, n: int = 3):
    """Total surface volume of the radius-``r`` sphere in ``R^n`` (``4 pi r^2`` for n=3)."""
    r = np.asarray(r, dtype=float)
    return n * math.pi ** (n / 2) * r ** (n - 1) / math.gamma(1 + n / 2)


def sphere_trace(r, n: int = 3):
    """Signed mean curvature ``-(n-1)/r``."""
    return -(n - 1) / np.asarray(r, dtype=float)


def _check_radius(r):
    if not np.all(np.asarray(r) > 0):
        raise DomainError("radius must be positive")


def phi_on_sphere(w: MetricWeight, r, n: int = 3):
    _check_radius(r)
    return evaluate_signed(w, sphere_volume(r, n), sphere_trace(r, n))


def radius_ode_rhs(r, r_t, w: MetricWeight, n: int = 3):
    """Second derivative ``r_tt`` of a concentric-sphere geodesic at state ``(r, r_t)``."""
    _check_radius(r)
    r = np.asarray(r, dtype=float)
    vol = sphere_volume(r, n)
    tr = sphere_trace(r, n)
    phi = evaluate_signed(w, vol, tr)
    d1, d2 = partials_signed(w, vol, tr)
    dvol = n * math.pi ** (n / 2) * r ** (n - 2) / math.gamma(1 + n / 2)
    bracket = phi / (2 * r) + 0.5 * d1 * dvol + d2 / (2 * r**2)
    out = -np.square(r_t) * (n - 1) / phi * bracket
    return float(out) if np.ndim(out) == 0 else out


# -- closed forms ----------------------------------------------------------------


@dataclass
class RadiusSolution:
    """A radius trajectory ``t -> r(t)`` on ``[0, 1]`` with its derivatives."""

    kind: str
    r: Callable
    r_t: Callable
    r_tt: Callable
    constants: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.r(t)

    def sample(self, samples: int = 101):
        t = np.linspace(0.0, 1.0, int(samples))
        return t, self.r(t), self.r_t(t)


def _power_solution(m: float, r0: float, r1: float) -> RadiusSolution:
    # r^m is affine in t (log r for m = 0)
    if m == 0:
        c2 = math.log(r1 / r0)

        def r(t):
            return r0 * np.exp(c2 * np.asarray(t, dtype=float))

        return RadiusSolution(
            "exponential",
            r,
            lambda t: c2 * r(t),
            lambda t: c2 * c2 * r(t),
            {"C1": r0, "C2": c2},
        )
    a, b = r0**m, r1**m

    def u(t):
        return (1.0 - np.asarray(t, dtype=float)) * a + np.asarray(t, dtype=float) * b

    def r(t):
        return u(t) ** (1.0 / m)

    def r_t(t):
        return (b - a) / m * u(t) ** (1.0 / m - 1.0)

    def r_tt(t):
        return (b - a) ** 2 / m * (1.0 / m - 1.0) * u(t) ** (1.0 / m - 2.0)

    consts = {"m": m}
    if b != a:
        scale = (b - a) / m
        consts["C2"] = -m * a / (b - a)
        if scale > 0:
            consts["C1"] = scale ** (1.0 / m)
    return RadiusSolution("power", r, r_t, r_tt, consts)


def _exp_solution(c: float, r0: float, r1: float) -> RadiusSolution:
    # r = c sqrt(log(C1 t + C2)), C2 = exp(r0^2/c^2)
    c2 = math.exp(r0 * r0 / (c * c))
    c1 = math.exp(r1 * r1 / (c * c)) - c2

    def r(t):
        return c * np.sqrt(np.log(c1 * np.asarray(t, dtype=float) + c2))

    def r_t(t):
        u = c1 * np.asarray(t, dtype=float) + c2
        return c * c1 / (2.0 * u * np.sqrt(np.log(u)))

    def r_tt(t):
        u = c1 * np.asarray(t, dtype=float) + c2
        lg = np.log(u)
        return -c * c1 * c1 / (2.0 * u * u * np.sqrt(lg)) * (1.0 + 0.5 / lg)

    return RadiusSolution("exp-log", r, r_t, r_tt, {"c": c, "C1": c1, "C2": c2})


# prefactors tried for exp(Vol); the first one that solves the ODE is used
EXP_PREFACTORS = (1.0 / (2.0 * math.pi), 1.0 / math.sqrt(2.0 * math.pi))


def ode_residual(sol: RadiusSolution, w: MetricWeight, n: int = 3, samples: int = 101) -> float:
    """Max ``|r_tt - rhs(r, r_t)|`` over the sample points, relative to ``max |r_tt|, |r_t|^2/r``."""
    t = np.linspace(0.0, 1.0, samples)
    r, r_t, r_tt = sol.r(t), sol.r_t(t), sol.r_tt(t)
    rhs = radius_ode_rhs(r, r_t, w, n)
    scale = max(float(np.max(np.abs(r_tt))), float(np.max(r_t**2 / r)), 1e-300)
    return float(np.max(np.abs(r_tt - rhs)) / scale)


def closed_form_radius(w: MetricWeight, r0: float, r1: float, n: int = 3, check_tol: float = 1e-8) -> RadiusSolution:
    """Explicit concentric-sphere geodesic with ``r(0) = r0``, ``r(1) = r1``.

    Supported for ``Vol^k`` (``r^(k+2)`` affine in ``t``), ``exp(Vol)``
    (``r = c sqrt(log(C1 t + C2))``) and the scale-invariant weight
    (``r = C1 exp(C2 t)``), all for ``n = 3``.

    Raises
    ------
    NoAnalyticForm
        For the other weights; use :func:`geodesic_radius` instead.
    FitFailure
        If no candidate closed form passes the ODE residual check.
    """
    _check_radius(np.array([r0, r1]))
    r0, r1 = float(r0), float(r1)
    if n != 3:
        raise NoAnalyticForm("closed forms are given for n = 3 only")
    if isinstance(w, ConformalPower):
        sol = _power_solution(w.k + 2.0, r0, r1)
        candidates = [sol]
    elif isinstance(w, ScaleInvariant):
        candidates = [_power_solution(0.0, r0, r1)]
    elif isinstance(w, ConformalExp):
        candidates = [_exp_solution(c, r0, r1) for c in EXP_PREFACTORS]
    else:
        raise NoAnalyticForm(f"no closed form for {type(w).__name__}")
    if r0 == r1:
        return _power_solution(1.0, r0, r1)
    for sol in candidates:
        if ode_residual(sol, w, n) < check_tol:
            return sol
    raise FitFailure(f"no closed form for {type(w).__name__} satisfies the radius ODE")


# -- quadrature solution ---------------------------------------------------------


def length_density(w: MetricWeight, r, n: int = 3):
    """``r^((n-1)/2) sqrt(Phi(Vol(r), -(n-1)/r))``, the length element per ``dr`` up to a constant."""
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore"):
        return r ** ((n - 1) / 2) * np.sqrt(phi_on_sphere(w, r, n))


def length_constant(n: int = 3) -> float:
    """``sqrt(n) pi^(n/4) / sqrt(Gamma(1 + n/2))``; equals ``sqrt(4 pi)`` for n=3."""
    return math.sqrt(n) * math.pi ** (n / 4) / math.sqrt(math.gamma(1 + n / 2))


def radial_length(w: MetricWeight, r0: float, r1: float, n: int = 3) -> float:
    """Length of the radial path between concentric spheres of radii ``r0`` and ``r1``."""
    if r0 == r1:
        return 0.0
    lo, hi = sorted((float(r0), float(r1)))
    if lo < 0:
        raise DomainError("radius must be non-negative")
    val, _ = integrate.quad(lambda r: float(length_density(w, r, n)) if r > 0 else 0.0, lo, hi, epsabs=0, epsrel=1e-12, limit=200)
    return length_constant(n) * val


def geodesic_radius(w: MetricWeight, r0: float, r1: float, n: int = 3) -> RadiusSolution:
    """Concentric-sphere geodesic for any weight, by arclength inversion.

    The radial arclength ``s(r)`` is affine in ``t`` along the geodesic, so
    ``r(t) = s^-1((1-t) s(r0) + t s(r1))``.  Slower than the closed forms
    but applicable to every weight.
    """
    _check_radius(np.array([r0, r1]))
    r0, r1 = float(r0), float(r1)
    total = radial_length(w, r0, r1, n) * (1.0 if r1 >= r0 else -1.0)
    c = length_constant(n)

    def s(r):
        return radial_length(w, r0, r, n) * (1.0 if r >= r0 else -1.0)

    lo, hi = sorted((r0, r1))

    def r_scalar(t):
        if t <= 0:
            return r0
        if t >= 1:
            return r1
        target = t * total
        return optimize.brentq(lambda x: s(x) - target, lo, hi, xtol=1e-15, rtol=1e-14)

    def r(t):
        t = np.asarray(t, dtype=float)
        return np.vectorize(r_scalar, otypes=[float])(t) if t.ndim else r_scalar(float(t))

    def r_t(t):
        return total / (c * length_density(w, r(t), n))

    def r_tt(t):
        rr = r(t)
        return radius_ode_rhs(rr, r_t(t), w, n)

    return RadiusSolution("quadrature", r, r_t, r_tt, {"length": abs(total)})


# -- completeness ----------------------------------------------------------------


@dataclass
class Completeness:
    """Completeness of the space of concentric spheres at ``r -> 0`` and ``r -> inf``."""

    complete_at_zero: bool
    complete_at_infinity: bool
    exponent_at_zero: float  # integrand ~ r^q near 0
    exponent_at_infinity: float  # integrand ~ r^q near inf (inf: faster than any power)
    numeric_at_zero: bool | None = None
    numeric_at_infinity: bool | None = None

    @property
    def complete(self) -> bool:
        return self.complete_at_zero and self.complete_at_infinity

    @property
    def label(self) -> str:
        return "complete" if self.complete else "incomplete"

    @property
    def confirmed(self) -> bool:
        return self.numeric_at_zero == self.complete_at_zero and self.numeric_at_infinity == self.complete_at_infinity


def _power_terms(w: MetricWeight, n: int):
    """``Phi`` on spheres as ``sum c_i r^p_i``, or ``None`` if not a power sum."""
    v = n * math.pi ** (n / 2) / math.gamma(1 + n / 2)  # Vol = v r^(n-1)
    t2 = float((n - 1) ** 2)  # Tr^2 = t2 r^-2
    if isinstance(w, G0):
        return [(1.0, 0.0)]
    if isinstance(w, GAPower):
        return [(1.0, 0.0), (w.A * t2**w.k, -2.0 * w.k)]
    if isinstance(w, ConformalPower):
        return [(v**w.k, (n - 1) * w.k)]
    if isinstance(w, ScaleInvariant):
        e = (1.0 + n) / (1.0 - n)
        return [(v**e, (n - 1) * e), (w.A * t2 / v, -2.0 - (n - 1))]
    if isinstance(w, Combined):
        return [(w.c0, 0.0), (w.A * t2**w.k, -2.0 * w.k), (w.B * v**w.l, (n - 1) * w.l)]
    return None


def _numeric_divergence(w, n, toward_zero: bool, decades: int = 8) -> bool:
    # ratio of consecutive per-decade integrals: r^q gives 10^-(q+1) at 0 and 10^(q+1) at inf
    f = lambda r: float(length_density(w, r, n))  # noqa: E731
    incs = []
    for j in range(decades):
        a, b = (10.0 ** -(j + 1), 10.0**-j) if toward_zero else (10.0**j, 10.0 ** (j + 1))
        with np.errstate(over="ignore", invalid="ignore"):
            if not math.isfinite(f(b)) or not math.isfinite(f(a)):
                return True
            val, _ = integrate.quad(f, a, b, epsrel=1e-10, limit=200)
        if not math.isfinite(val):
            return True
        incs.append(val)
    ratio = incs[-1] / incs[-2]
    return ratio >= 1.0 - 1e-6


def completeness(w: MetricWeight, n: int = 3, numeric: bool = True) -> Completeness:
    """Classify geodesic completeness of concentric spheres under ``w``.

    The radial length integrand ``r^((n-1)/2) sqrt(Phi)`` behaves like
    ``r^q`` at each end; the integral diverges at 0 iff ``q <= -1`` and at
    infinity iff ``q >= -1``.  With ``numeric`` the verdict is cross-checked
    from the decay of per-decade quadratures.

    Raises
    ------
    UnsupportedWeight
        If ``w`` is not one of the built-in families.
    """
    base = (n - 1) / 2.0
    if isinstance(w, ConformalExp):
        q0, qinf = base, math.inf
    else:
        terms = _power_terms(w, n)
        if terms is None:
            raise UnsupportedWeight(f"completeness is not classified for {type(w).__name__}")
        present = [p for c, p in terms if c != 0]
        q0 = base + min(present) / 2.0
        qinf = base + max(present) / 2.0
    result = Completeness(q0 <= -1.0, qinf >= -1.0, q0, qinf)
    if numeric:
        result.numeric_at_zero = _numeric_divergence(w, n, True)
        result.numeric_at_infinity = _numeric_divergence(w, n, False)
    return result


# -- translation and shrink-grow energies ----------------------------------------


def translation_energy(w: MetricWeight, r: float, ell: float) -> float:
    """Energy ``Phi(4 pi r^2, -2/r) * (4 pi / 3) * ell^2 * r^2`` of translating a sphere by ``ell``."""
    _check_radius(r)
    if ell < 0:
        raise DomainError("translation distance must be non-negative")
    return float(phi_on_sphere(w, r) * (4.0 * math.pi / 3.0) * ell * ell * r * r)


def _check_shrink(w):
    if isinstance(w, ConformalPower) and w.k >= 0:
        return
    if isinstance(w, ConformalExp):
        return
    raise UnsupportedWeight("shrink-and-grow energy needs Vol^k with k >= 0 or exp(Vol)")


def shrink_grow_energy(w: MetricWeight, r: float) -> float:
    """Energy of shrinking a sphere of radius ``r`` to a point and regrowing it, in unit time."""
    _check_shrink(w)
    _check_radius(r)
    if isinstance(w, ConformalExp):
        return float(math.expm1(2.0 * math.pi * r * r) ** 2 / math.pi)
    k = w.k
    return float(4.0 ** (k + 2) * math.pi ** (k + 1) / (k + 2) ** 2 * r ** (2 * k + 4))


def shrink_grow_energy_quadrature(w: MetricWeight, r: float, n: int = 3) -> float:
    """Oracle for :func:`shrink_grow_energy`: the round trip has length ``2L`` so energy ``4 L^2``."""
    _check_radius(r)
    length = radial_length(w, 0.0, r, n)
    return 4.0 * length * length


def crossover_length(w: MetricWeight, r: float) -> float:
    """Translation distance at which translating and shrink-and-grow cost the same."""
    _check_shrink(w)
    _check_radius(r)
    if isinstance(w, ConformalExp):
        return float(math.sqrt(3.0) * -math.expm1(-2.0 * math.pi * r * r) / (2.0 * math.pi * r))
    return float(2.0 * math.sqrt(3.0) * r / (w.k + 2.0))


def optimal_translation_radius(A: float, k: float) -> float:
    """Radius at which pure translation is a geodesic for ``Phi = 1 + A Tr(L)^(2k)``.

    Solves ``r^(2k) = 2^(2k) A (k-1)``.

    Raises
    ------
    NoPositiveOptimum
        If ``k <= 1`` or ``A <= 0``.
    """
    if k <= 1 or A <= 0:
        raise NoPositiveOptimum("pure translation is a geodesic only for A > 0 and k > 1")
    return float(2.0 * (A * (k - 1.0)) ** (1.0 / (2.0 * k)))


def translation_radius_condition(w: MetricWeight, r: float) -> float:
    """``d1Phi (2/r) 4 pi r^2 + d2Phi (2/r^2) + Phi (2/r)`` on a unit-speed translating sphere.

    Zero exactly where translation is a geodesic; used to check
    :func:`optimal_translation_radius` by root finding.
    """
    vol, tr = sphere_volume(r), sphere_trace(r)
    d1, d2 = partials_signed(w, vol, tr)
    return float(d1 * (2.0 / r) * 4.0 * math.pi * r * r + d2 * 2.0 / (r * r) + evaluate_signed(w, vol, tr) * 2.0 / r)


# -- numerical integration -------------------------------------------------------


@dataclass
class RadiusTrajectory:
    t: np.ndarray
    r: np.ndarray
    r_t: np.ndarray
    collapsed: bool = False
    message: str = ""


def integrate_radius_ode(
    w: MetricWeight,
    r0: float,
    rdot0: float,
    t_end: float = 1.0,
    n: int = 3,
    samples: int = 101,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    blowup: float = 1e12,
) -> RadiusTrajectory:
    """Integrate the radius ODE from ``(r0, rdot0)`` to ``t_end`` (which may be negative).

    Uses an adaptive 8(5,3) Runge-Kutta pair.  Stops early with
    ``collapsed=True`` when the radius reaches ``1e-6 r0``, or when the step
    size underflows while the radius is shrinking below ``1e-3 r0`` (the
    speed is singular at a collapse).

    Raises
    ------
    BlowupDetected
        When the radius exceeds ``blowup * r0`` or becomes non-finite.
    StepFailure
        When the step size controller fails.
    """
    _check_radius(r0)
    if rdot0 == 0:
        t = np.linspace(0.0, t_end, samples)
        return RadiusTrajectory(t, np.full_like(t, float(r0)), np.zeros_like(t))
    floor = 1e-6 * r0

    def rhs(_, y):
        r, v = y
        if not r > 0:
            return [v, 0.0]
        return [v, radius_ode_rhs(r, v, w, n)]

    def collapse(_, y):
        return y[0] - floor

    collapse.terminal = True

    def grow(_, y):
        return y[0] - blowup * r0

    grow.terminal = True
    t_eval = np.linspace(0.0, t_end, samples)
    with np.errstate(over="raise", invalid="raise"):
        try:
            sol = integrate.solve_ivp(
                rhs, (0.0, t_end), [float(r0), float(rdot0)], method="DOP853", t_eval=t_eval,
                rtol=rtol, atol=atol, events=(collapse, grow), dense_output=True,
            )
        except FloatingPointError as exc:
            raise BlowupDetected(f"radius ODE overflowed: {exc}") from None
    if sol.status == -1:
        t_last = sol.sol.t_max if t_end > 0 else sol.sol.t_min
        r_last, v_last = sol.sol(t_last)
        if not (r_last < 1e-3 * r0 and v_last * np.sign(t_end) < 0):
            raise StepFailure(sol.message)
        t = np.append(sol.t, t_last)
        y = np.column_stack([sol.y, [r_last, v_last]])
        return RadiusTrajectory(t, y[0], y[1], True, sol.message)
    if len(sol.t_events[1]):
        raise BlowupDetected(f"radius exceeded {blowup:g} r0 at t = {sol.t_events[1][0]:.6g}")
    if not np.all(np.isfinite(sol.y)):
        raise BlowupDetected("radius became non-finite")
    collapsed = bool(len(sol.t_events[0]))
    return RadiusTrajectory(sol.t, sol.y[0], sol.y[1], collapsed, sol.message)


def write_radius_csv(path, t, r, r_t) -> None:
    """Write columns ``t,r,r_t`` with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "r", "r_t"])
        for row in zip(t, r, r_t):
            writer.writerow([repr(float(x)) for x in row])


def read_radius_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]

"""Almost-local weight functions ``Phi(Vol, TrL^2)``.

``Vol`` is the total surface area of the shape and ``TrL^2`` the squared
scalar mean curvature at a point.  Each weight knows its value and both
first partials.  Two derivative conventions are exposed:

* :func:`partials` differentiates w.r.t. ``(Vol, TrL^2)``, which is what
  the discrete energy needs;
* :func:`partials_signed` differentiates w.r.t. ``(Vol, TrL)`` for a signed
  mean curvature, which is how the sphere ODE is written.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, DomainError


class MetricWeight:
    """Base class.  Subclasses are frozen dataclasses."""

    #: False when the weight does not depend on curvature (saves the trl2 pass)
    needs_curvature = True

    def value(self, vol, trl2):
        raise NotImplementedError

    def d_vol(self, vol, trl2):
        raise NotImplementedError

    def d_trl2(self, vol, trl2):
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"type": type(self).__name__, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class G0(MetricWeight):
    needs_curvature = False

    def value(self, vol, trl2):
        return np.ones(np.broadcast(vol, trl2).shape)

    def d_vol(self, vol, trl2):
        return np.zeros(np.broadcast(vol, trl2).shape)

    def d_trl2(self, vol, trl2):
        return np.zeros(np.broadcast(vol, trl2).shape)


@dataclass(frozen=True)
class GAPower(MetricWeight):
    """``1 + A * TrL^(2k)``."""

    A: float = 1.0
    k: int = 1

    def __post_init__(self):
        if self.A < 0:
            raise ValueError("A must be non-negative")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")

    def value(self, vol, trl2):
        return 1.0 + self.A * np.power(trl2, self.k) + 0.0 * vol

    def d_vol(self, vol, trl2):
        return np.zeros(np.broadcast(vol, trl2).shape)

    def d_trl2(self, vol, trl2):
        return self.A * self.k * np.power(trl2, self.k - 1) + 0.0 * vol


@dataclass(frozen=True)
class ConformalPower(MetricWeight):
    """``Vol^k`` for real ``k`` (negative allowed)."""

    k: float = 1.0
    needs_curvature = False

    def value(self, vol, trl2):
        return np.power(vol, self.k) + 0.0 * trl2

    def d_vol(self, vol, trl2):
        return self.k * np.power(vol, self.k - 1.0) + 0.0 * trl2

    def d_trl2(self, vol, trl2):
        return np.zeros(np.broadcast(vol, trl2).shape)


@dataclass(frozen=True)
class ConformalExp(MetricWeight):
    """``exp(Vol)``."""

    needs_curvature = False

    def value(self, vol, trl2):
        return np.exp(vol) + 0.0 * trl2

    def d_vol(self, vol, trl2):
        return np.exp(vol) + 0.0 * trl2

    def d_trl2(self, vol, trl2):
        return np.zeros(np.broadcast(vol, trl2).shape)


@dataclass(frozen=True)
class ScaleInvariant(MetricWeight):
    """``Vol^((1+n)/(1-n)) + A * TrL^2 / Vol``; ``n = 3`` gives ``Vol^-2 + A TrL^2 / Vol``."""

    A: float = 1.0
    n: int = 3

    def __post_init__(self):
        if self.A < 0:
            raise ValueError("A must be non-negative")
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def exponent(self) -> float:
        return (1.0 + self.n) / (1.0 - self.n)

    def value(self, vol, trl2):
        return np.power(vol, self.exponent) + self.A * trl2 / vol

    def d_vol(self, vol, trl2):
        e = self.exponent
        return e * np.power(vol, e - 1.0) - self.A * trl2 / np.square(vol)

    def d_trl2(self, vol, trl2):
        return self.A / vol + 0.0 * trl2


@dataclass(frozen=True)
class Combined(MetricWeight):
    """``c0 + A * TrL^(2k) + B * Vol^l``; the defaults give ``1 + TrL^2 + Vol``."""

    c0: float = 1.0
    A: float = 1.0
    k: float = 1.0
    B: float = 1.0
    l: float = 1.0  # noqa: E741

    @property
    def needs_curvature(self):
        return self.A != 0

    def value(self, vol, trl2):
        return self.c0 + self.A * np.power(trl2, self.k) + self.B * np.power(vol, self.l)

    def d_vol(self, vol, trl2):
        return self.B * self.l * np.power(vol, self.l - 1.0) + 0.0 * trl2

    def d_trl2(self, vol, trl2):
        if self.A == 0:
            return np.zeros(np.broadcast(vol, trl2).shape)
        return self.A * self.k * np.power(trl2, self.k - 1.0) + 0.0 * vol


WEIGHTS = {cls.__name__: cls for cls in (G0, GAPower, ConformalPower, ConformalExp, ScaleInvariant, Combined)}


def _check(vol, trl2):
    vol = np.asarray(vol, dtype=float)
    trl2 = np.asarray(trl2, dtype=float)
    if np.any(~(vol > 0)):
        raise DomainError("Vol must be positive")
    if np.any(~(trl2 >= 0)):
        raise DomainError("TrL^2 must be non-negative")
    return vol, trl2


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def evaluate(w: MetricWeight, vol, trl2):
    """Weight value ``Phi(vol, trl2)``; broadcasts over arrays."""
    vol, trl2 = _check(vol, trl2)
    return _scalar(w.value(vol, trl2))


def partials(w: MetricWeight, vol, trl2):
    """``(dPhi/dVol, dPhi/dTrL^2)``."""
    vol, trl2 = _check(vol, trl2)
    return _scalar(w.d_vol(vol, trl2)), _scalar(w.d_trl2(vol, trl2))


def evaluate_signed(w: MetricWeight, vol, tr):
    """``Phi`` as a function of a signed mean curvature ``tr``."""
    tr = np.asarray(tr, dtype=float)
    return evaluate(w, vol, tr * tr)


def partials_signed(w: MetricWeight, vol, tr):
    """``(dPhi/dVol, dPhi/dTrL)``; the second partial uses ``2 TrL dPhi/dTrL^2``."""
    tr = np.asarray(tr, dtype=float)
    d1, d2 = partials(w, vol, tr * tr)
    return d1, _scalar(2.0 * tr * np.asarray(d2))


def from_dict(data: dict) -> MetricWeight:
    """Build a weight from e.g. ``{"type": "GAPower", "A": 0.0625, "k": 2}``."""
    if isinstance(data, MetricWeight):
        return data
    if isinstance(data, str):
        data = {"type": data}
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError(f"metric must be an object with a 'type' field, got {data!r}")
    kind = data["type"]
    if kind not in WEIGHTS:
        raise ConfigError(f"unknown metric type {kind!r}; expected one of {sorted(WEIGHTS)}")
    cls = WEIGHTS[kind]
    names = {f.name for f in fields(cls)}
    params = {k: v for k, v in data.items() if k != "type"}
    unknown = set(params) - names
    if unknown:
        raise ConfigError(f"unknown parameters for {kind}: {sorted(unknown)}")
    try:
        return cls(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} parameters: {exc}") from None


def from_json(text: str) -> MetricWeight:
    return from_dict(json.loads(text))


def describe(w: MetricWeight) -> str:
    """Short human-readable formula."""
    if isinstance(w, G0):
        return "1"
    if isinstance(w, GAPower):
        return f"1 + {w.A:g} TrL^{2 * w.k}"
    if isinstance(w, ConformalPower):
        return f"Vol^{w.k:g}"
    if isinstance(w, ConformalExp):
        return "exp(Vol)"
    if isinstance(w, ScaleInvariant):
        return f"Vol^{w.exponent:g} + {w.A:g} TrL^2/Vol"
    if isinstance(w, Combined):
        return f"{w.c0:g} + {w.A:g} TrL^{_fmt_exp(2 * w.k)} + {w.B:g} Vol^{w.l:g}"
    return repr(w)


def _fmt_exp(x):
    return f"{x:g}" if not math.isclose(x, round(x)) else str(int(round(x)))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almostlocal.errors import ConfigError, DomainError
from almostlocal.metric import (
    G0,
    Combined,
    ConformalExp,
    ConformalPower,
    GAPower,
    ScaleInvariant,
    describe,
    evaluate,
    evaluate_signed,
    from_dict,
    from_json,
    partials,
    partials_signed,
)

ALL_WEIGHTS = [
    G0(),
    GAPower(1.0, 1),
    GAPower(1 / 16, 2),
    GAPower(0.3, 3),
    ConformalPower(1.0),
    ConformalPower(2.0),
    ConformalPower(-1.0),
    ConformalPower(0.5),
    ConformalExp(),
    ScaleInvariant(1.0),
    ScaleInvariant(0.1),
    Combined(),
    Combined(c0=0.5, A=2.0, k=1.5, B=0.25, l=-1.0),
]


def test_evaluate_examples():
    assert evaluate(G0(), 3.0, 7.0) == 1.0
    assert evaluate(GAPower(1.0, 1), 123.0, 4.0) == 5.0
    assert evaluate(ConformalExp(), 4 * math.pi, 1.0) == pytest.approx(math.exp(4 * math.pi), rel=1e-14)
    assert evaluate(ConformalExp(), 4 * math.pi, 1.0) == pytest.approx(2.86e5, rel=1e-2)
    assert evaluate(GAPower(1 / 16, 2), 1.0, 4.0) == 2.0


def test_partials_examples():
    v = 2.7
    d1, d2 = partials(ConformalPower(2.0), v, 3.0)
    assert d1 == pytest.approx(2 * v, rel=1e-15) and d2 == 0.0
    assert partials(GAPower(0.37, 1), 1.0, 9.0)[1] == 0.37
    vol = 4 * math.pi
    d1, _ = partials(ScaleInvariant(1.0), vol, 4.0)
    assert d1 == pytest.approx(-2 * vol**-3 - 4 / vol**2, rel=1e-14)


def _central(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


@pytest.mark.parametrize("w", ALL_WEIGHTS, ids=repr)
@settings(max_examples=30, deadline=None)
@given(vol=st.floats(0.2, 20.0), trl2=st.floats(0.05, 30.0))
def test_partials_match_finite_differences(w, vol, trl2):
    d1, d2 = partials(w, vol, trl2)
    h1 = 1e-5 * vol
    h2 = 1e-5 * trl2
    fd1 = _central(lambda x: evaluate(w, x, trl2), vol, h1)
    fd2 = _central(lambda x: evaluate(w, vol, x), trl2, h2)
    scale = max(abs(evaluate(w, vol, trl2)), 1.0)
    # rel. error 1e-8 w.r.t. the value scale; FD truncation is about 1e-10 here
    assert abs(d1 - fd1) <= 1e-8 * max(abs(fd1), scale / vol)
    assert abs(d2 - fd2) <= 1e-8 * max(abs(fd2), scale / trl2)


@pytest.mark.parametrize("w", ALL_WEIGHTS, ids=repr)
def test_weights_positive_on_domain(w):
    vol = np.geomspace(1e-2, 50, 40)[:, None]
    trl2 = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 30)])[None, :]
    assert np.all(evaluate(w, vol, trl2) > 0)


def test_signed_partials_use_chain_rule():
    w = GAPower(0.5, 2)
    tr = -1.7
    d1, dtr = partials_signed(w, 3.0, tr)
    fd = _central(lambda x: evaluate_signed(w, 3.0, x), tr, 1e-6)
    assert dtr == pytest.approx(fd, rel=1e-8)
    assert dtr < 0
    assert d1 == 0.0


def test_domain_errors():
    with pytest.raises(DomainError):
        evaluate(G0(), 0.0, 1.0)
    with pytest.raises(DomainError):
        evaluate(ConformalPower(1.0), -1.0, 1.0)
    with pytest.raises(DomainError):
        partials(GAPower(), 1.0, -0.5)
    with pytest.raises(DomainError):
        evaluate(G0(), np.array([1.0, np.nan]), 1.0)


def test_combined_reduces_to_g0():
    w = Combined(c0=1.0, A=0.0, B=0.0)
    vol = np.linspace(0.1, 10, 7)
    trl2 = np.linspace(0.0, 30, 7)
    assert np.array_equal(evaluate(w, vol, trl2), evaluate(G0(), vol, trl2))
    d1, d2 = partials(w, vol, trl2)
    assert not np.any(d1) and not np.any(d2)
    assert not w.needs_curvature


def test_broadcasting():
    out = evaluate(ScaleInvariant(1.0), np.array([[1.0], [2.0]]), np.array([0.0, 1.0, 4.0]))
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[1], 0.25 + np.array([0.0, 1.0, 4.0]) / 2.0)


@pytest.mark.parametrize("w", ALL_WEIGHTS, ids=repr)
def test_json_round_trip(w):
    assert from_json(w.to_json()) == w
    assert from_dict(w.to_dict()) == w


def test_from_dict_forms():
    assert from_dict({"type": "GAPower", "A": 0.0625, "k": 2}) == GAPower(0.0625, 2)
    assert from_dict("G0") == G0()
    w = ScaleInvariant(0.1)
    assert from_dict(w) is w


@pytest.mark.parametrize(
    "data",
    [
        {"type": "Riemann"},
        {"A": 1.0},
        {"type": "GAPower", "A": 1.0, "p": 2},
        {"type": "GAPower", "A": -1.0},
        {"type": "GAPower", "k": 1.5},
        {"type": "ScaleInvariant", "A": -0.1},
        [1, 2],
    ],
)
def test_from_dict_rejects(data):
    with pytest.raises(ConfigError):
        from_dict(data)


def test_scale_invariant_weight_scaling():
    # Phi(lam^2 Vol, TrL^2 / lam^2) = lam^-4 Phi(Vol, TrL^2), which together with
    # vol(lam f) = lam^2 vol(f) and |lam h|^2 = lam^2 |h|^2 leaves the metric unchanged
    w = ScaleInvariant(0.7)
    for lam in (0.3, 2.0, 5.0):
        assert evaluate(w, lam**2 * 3.0, 2.5 / lam**2) == pytest.approx(lam**-4 * evaluate(w, 3.0, 2.5), rel=1e-14)


def test_describe():
    assert describe(G0()) == "1"
    assert describe(GAPower(0.0625, 2)) == "1 + 0.0625 TrL^4"
    assert describe(ScaleInvariant(1.0)) == "Vol^-2 + 1 TrL^2/Vol"
    assert describe(ConformalExp()) == "exp(Vol)"

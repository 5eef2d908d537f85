import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from aoi_pg.cost import (CostModel, DeliveryRecord, PenaltyFunction, penalty_integral,
                         penalty_integral_array)

KINDS = ["identity", "power", "exponential", "step", "scaled_exp"]


def quad_oracle(p, a, b):
    points = None
    if p.kind == "step":
        points = [m / p.gamma for m in range(math.ceil(a * p.gamma), math.floor(b * p.gamma) + 1)]
    val, _ = quad(p, a, b, points=points, limit=500, epsabs=1e-12, epsrel=1e-12)
    return val


def test_identity_examples():
    p = PenaltyFunction("identity")
    assert penalty_integral(p, 1.0, 2.0) == 1.5
    assert penalty_integral(p, 3.0, 3.0) == 0.0


def test_step_example():
    p = PenaltyFunction("step", gamma=0.4)
    assert penalty_integral(p, 0.0, 5.0) == pytest.approx(2.5, abs=1e-12)
    assert quad_oracle(p, 0.0, 5.0) == pytest.approx(2.5, abs=1e-8)


def test_argument_checks():
    p = PenaltyFunction()
    with pytest.raises(ValueError):
        penalty_integral(p, 2.0, 1.0)
    with pytest.raises(ValueError):
        penalty_integral(p, -1.0, 1.0)
    with pytest.raises(ValueError):
        PenaltyFunction("cubic")
    with pytest.raises(ValueError):
        PenaltyFunction("power", gamma=0.0)


def test_delivery_cost_examples():
    peak = CostModel(kind="peak", a_th=5.0, f=0.0)
    assert peak.delivery_cost(DeliveryRecord(1.0, 2.0, 1)) == 0.0
    assert peak.delivery_cost(DeliveryRecord(1.0, 4.0, 1)) == 0.0  # exactly at threshold
    assert peak.delivery_cost(DeliveryRecord(1.0, 4.5, 1)) == 1.0
    pen = CostModel(penalty=PenaltyFunction("identity"), f=4.0)
    assert pen.delivery_cost(DeliveryRecord(1.0, 5.0, 2)) == 25.5
    assert CostModel().delivery_cost(DeliveryRecord(0.0, 0.0, 1)) == 0.0


def test_record_validation():
    with pytest.raises(ValueError):
        DeliveryRecord(-1.0, 1.0)
    with pytest.raises(ValueError):
        DeliveryRecord(1.0, 1.0, 0)
    with pytest.raises(ValueError):
        CostModel(f=-1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_closed_forms_match_quadrature(kind):
    rng = np.random.default_rng(123)
    for _ in range(200):
        gamma = rng.uniform(0.1, 2.0)
        p = PenaltyFunction(kind, gamma=gamma, eta=rng.uniform(0.1, 3.0))
        a = rng.uniform(0, 5)
        b = a + rng.uniform(0, 5)
        exact = penalty_integral(p, a, b)
        assert exact == pytest.approx(quad_oracle(p, a, b), rel=1e-8, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(KINDS), gamma=st.floats(0.05, 2.0),
       a=st.floats(0, 10), d1=st.floats(0, 5), d2=st.floats(0, 5))
def test_additive_and_monotone(kind, gamma, a, d1, d2):
    p = PenaltyFunction(kind, gamma=gamma)
    b, c = a + d1, a + d1 + d2
    whole = penalty_integral(p, a, c)
    parts = penalty_integral(p, a, b) + penalty_integral(p, b, c)
    assert whole == pytest.approx(parts, rel=1e-9, abs=1e-9)
    assert whole >= penalty_integral(p, a, b) - 1e-12
    # non-decreasing penalty: equal-length later intervals cost at least as much
    assert penalty_integral(p, a + d2, c + d2) >= whole - 1e-9 * max(1.0, abs(whole))


@pytest.mark.parametrize("kind", KINDS)
def test_vectorized_matches_scalar(kind):
    p = PenaltyFunction(kind, gamma=0.7, eta=1.3)
    a = np.linspace(0, 4, 9)
    b = a + np.linspace(0, 2, 9)
    expect = [penalty_integral(p, x, y) for x, y in zip(a, b)]
    assert np.allclose(penalty_integral_array(p, a, b), expect, rtol=1e-13, atol=1e-13)


def test_exponential_penalty_starts_at_one():
    assert PenaltyFunction("exponential", gamma=2.0)(0.0) == 1.0
    assert PenaltyFunction("scaled_exp", gamma=2.0)(0.0) == 0.0

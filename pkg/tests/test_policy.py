import math

import numpy as np
import pytest
from scipy import stats

from aoi_pg.check import fd_eligibility_error, pdf_mass
from aoi_pg.policy import FourierFeatures, FourierFeatures2D, StochasticPolicy, ValueFunction
from aoi_pg.streams import RandomStream


def make_policy(d=10, a_min=0.0, a_max=5.0, sigma=0.5, kind="wait", y_max=10.0):
    return StochasticPolicy(FourierFeatures(d, y_max), a_min, a_max, sigma, kind)


def test_mu_examples():
    pol = make_policy()
    pol.theta[0] = 3.2
    assert pol.mu(4.2) == pytest.approx(3.2)
    pol.theta[:] = 0
    pol.theta[1] = 1
    assert pol.mu(10.0 - 1e-12) == pytest.approx(-1.0)
    assert pol.mu(0.0) == 1.0


def test_feature_shapes_and_clipping():
    f = FourierFeatures(5, 10.0)
    assert f(0.0).tolist() == [1.0] * 5
    assert np.array_equal(f(25.0), f(10.0))
    assert not f.in_range(10.0) and f.in_range(9.99)
    f2 = FourierFeatures2D(3, 4, 10.0, 5.0)
    assert f2.size == 12 and f2(0.0, 0.0).tolist() == [1.0] * 12
    # index j*d2 + k holds cos(j*pi*y/y_max + k*pi*yb/yb_max)
    y, yb = 2.0, 1.5
    assert f2(y, yb)[1 * 4 + 2] == pytest.approx(math.cos(math.pi * y / 10 + 2 * math.pi * yb / 5))
    assert not f2.in_range(1.0, 5.0)


def test_transform_examples():
    pol = make_policy(a_min=1.0, a_max=3.0)
    assert pol.transform(0.0) == 2.0
    assert pol.transform(-1e6) == pytest.approx(1.0, abs=1e-8)
    assert pol.transform(1e6) == pytest.approx(3.0, abs=1e-8)
    assert 1.0 < pol.transform(-1e6) and pol.transform(1e6) < 3.0


def test_empirical_median():
    pol = make_policy(a_min=2.0, a_max=10.0)
    st = RandomStream(0)
    acts = np.array([pol.sample_action(3.0, st) for _ in range(100_000)])
    assert np.median(acts) == pytest.approx(6.0, rel=0.01)
    assert pol.median_action(3.0) == 6.0


def test_samples_follow_pdf():
    pol = make_policy(a_min=0.0, a_max=4.0, sigma=0.8)
    pol.theta[:3] = [0.3, -0.5, 0.2]
    st = RandomStream(1)
    y = 2.5
    acts = np.array([pol.sample_action(y, st) for _ in range(50_000)])
    edges = np.linspace(0.0, 4.0, 21)
    from scipy.integrate import quad
    probs = np.array([quad(pol.pdf, lo, hi, args=(y,))[0] for lo, hi in zip(edges[:-1], edges[1:])])
    counts, _ = np.histogram(acts, edges)
    keep = probs * acts.size > 5
    expected = probs[keep] / probs[keep].sum() * counts[keep].sum()
    _, pval = stats.chisquare(counts[keep], expected)
    assert pval > 1e-3
    assert acts.mean() == pytest.approx(pol.mean_action(y), rel=0.01)


def test_fallback_out_of_range():
    w = make_policy(kind="wait", a_min=0.0, a_max=5.0)
    d = make_policy(kind="discard", a_min=1.0, a_max=10.0)
    st = RandomStream(0)
    assert w.sample_action(10.0, st) == 0.0
    assert d.sample_action(12.0, st) == 10.0
    assert w.mean_action(11.0) == 0.0 and d.median_action(11.0) == 10.0


def test_pdf_normalized_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a_min = rng.uniform(0, 3)
        pol = make_policy(a_min=a_min, a_max=a_min + rng.uniform(0.5, 8), sigma=rng.uniform(0.2, 2))
        pol.theta = rng.normal(0, 1, pol.theta.size)
        assert pdf_mass(pol, rng.uniform(0, 10)) == pytest.approx(1.0, abs=1e-6)


def test_pdf_rejects_outside_support():
    pol = make_policy(a_min=1.0, a_max=2.0)
    for a in (1.0, 2.0, 0.5, 3.0):
        with pytest.raises(ValueError):
            pol.log_pdf(a, 1.0)


def test_eligibility_zero_at_mode():
    pol = make_policy(a_min=1.0, a_max=9.0)
    pol.theta[:3] = [0.2, 0.4, -0.1]
    y = 3.3
    a = pol.transform(pol.mu(y))
    assert np.allclose(pol.eligibility(a, y), 0.0, atol=1e-12)


def test_eligibility_at_zero_state_is_constant():
    pol = make_policy()
    e = pol.eligibility(1.7, 0.0)
    assert np.allclose(e, e[0])


def test_eligibility_finite_difference():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        pol = make_policy(d=int(rng.integers(1, 12)), a_min=0.0, a_max=rng.uniform(1, 10),
                          sigma=rng.uniform(0.3, 2.0))
        pol.theta = rng.normal(0, 0.5, pol.theta.size)
        y = rng.uniform(0, 10)
        a = pol.transform(pol.mu(y) + pol.sigma * rng.normal())
        worst = max(worst, fd_eligibility_error(pol, a, y, 1e-6))
    assert worst <= 1e-5


def test_score_has_zero_mean():
    pol = make_policy(d=4, sigma=0.7)
    pol.theta = np.array([0.4, -0.3, 0.1, 0.2])
    st = RandomStream(3)
    y = 1.2
    scores = np.array([pol.eligibility(pol.sample_action(y, st), y) for _ in range(20_000)])
    se = scores.std(axis=0, ddof=1) / math.sqrt(len(scores))
    assert np.all(np.abs(scores.mean(axis=0)) <= 3 * se + 1e-12)


def test_update_examples():
    pol = make_policy()
    f = pol.features(2.0)
    pol.update(0.0, f, 1.0)
    assert not pol.theta.any()
    pol.update(1.0, f, 0.0)
    assert not pol.theta.any()
    pol.update(1.0, f, 1.0)
    assert np.array_equal(pol.theta, f)
    with pytest.raises(FloatingPointError):
        pol.update(float("nan"), f, 1.0)


def test_critic_examples():
    vf = ValueFunction(FourierFeatures(6, 10.0))
    assert vf.value(3.0) == 0.0 and vf.value(8.0) == 0.0
    vf.update(1.0, 1.0, 3.0)
    f = vf.features(3.0)
    assert vf.value(3.0) == pytest.approx(float(f @ f))
    # gradient of a linear critic is its feature vector
    h = 1e-6
    for k in range(vf.omega.size):
        vf.omega[k] += h
        up = vf.value(4.0)
        vf.omega[k] -= 2 * h
        dn = vf.value(4.0)
        vf.omega[k] += h
        assert (up - dn) / (2 * h) == pytest.approx(vf.gradient(4.0)[k], rel=1e-5, abs=1e-9)


def test_constructor_validation():
    with pytest.raises(ValueError):
        make_policy(a_min=2.0, a_max=2.0)
    with pytest.raises(ValueError):
        make_policy(sigma=0.0)
    with pytest.raises(ValueError):
        make_policy(kind="hold")
    with pytest.raises(ValueError):
        FourierFeatures(0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import uniform_moment
from randhyp import core
from randhyp.core import PiecewiseDensity
from randhyp.dense_construct import (
    MixtureConstruction,
    QuantileNotInterior,
    TargetOutOfRange,
    WidthBoundViolated,
    match_moment_density,
    match_quantile_density,
    match_variance_density,
    numeric_check_mixture,
)


def _exact_moment(d, t):
    return sum(h * (b - a) * uniform_moment(a, b, t) for (a, b), h in zip(d.intervals, d.heights))


def test_moment_on_real_line():
    c = match_moment_density(PiecewiseDensity.uniform(0.0, 1.0), 1, 3.0)
    assert _exact_moment(c.mixture, 1) == pytest.approx(3.0, abs=1e-10)
    assert numeric_check_mixture(c).passed


def test_even_moment_needs_narrow_intervals():
    with pytest.raises(WidthBoundViolated):
        match_moment_density(PiecewiseDensity.uniform(3.0, 4.0), 2, 1.0)


def test_even_moment_target_must_be_positive():
    with pytest.raises(TargetOutOfRange):
        match_moment_density(PiecewiseDensity.uniform(0.0, 0.1), 2, -1.0)


def test_moment_on_bounded_support():
    base = PiecewiseDensity(((0.1, 0.15), (0.6, 0.65)), (10.0, 10.0))
    c = match_moment_density(base, 1, 0.3, support=(0.0, 1.0))
    assert c.mixture.lower >= 0.0 and c.mixture.upper <= 1.0
    assert numeric_check_mixture(c).passed


def test_quantile_match():
    base = PiecewiseDensity.uniform(-1.0, 1.0)
    c = match_quantile_density(base, 0.2, 0.9)
    assert c.mixture.cdf(0.2) == pytest.approx(0.9, abs=1e-12)
    assert numeric_check_mixture(c).passed


def test_quantile_already_matched_keeps_base():
    base = PiecewiseDensity.uniform(0.0, 1.0)
    c = match_quantile_density(base, 0.5, 0.5)
    assert c.scale == 1.0 and c.mixture == base


def test_quantile_outside_support():
    with pytest.raises(QuantileNotInterior):
        match_quantile_density(PiecewiseDensity.uniform(0.2, 0.3), 2.0, 0.5, support=(0.0, 1.0))


def test_variance_match():
    c = match_variance_density(PiecewiseDensity.uniform(0.0, 1.0), 4.0)
    m1 = _exact_moment(c.mixture, 1)
    assert _exact_moment(c.mixture, 2) - m1 * m1 == pytest.approx(4.0, abs=1e-9)


def test_base_must_be_normalized():
    with pytest.raises(core.MassNotNormalized):
        match_variance_density(PiecewiseDensity.uniform(0.0, 1.0, mass=0.5), 1.0)


def test_construction_json_round_trip():
    c = match_quantile_density(PiecewiseDensity.uniform(-1.0, 1.0), 0.0, 0.3)
    d = MixtureConstruction.from_json(c.to_json())
    assert d.mixture == c.mixture and d.scale == c.scale


@st.composite
def bases(draw, lo=-3.0, hi=3.0, max_width=0.4):
    m = draw(st.integers(1, 4))
    cuts = sorted(draw(st.lists(st.floats(lo, hi), min_size=2 * m, max_size=2 * m, unique=True)))
    ivs = [(cuts[2 * i], min(cuts[2 * i] + max_width, cuts[2 * i + 1])) for i in range(m)]
    ivs = [(a, b) for a, b in ivs if b - a > 1e-3]
    if not ivs:
        ivs = [(0.0, 0.1)]
    w = draw(st.lists(st.floats(0.1, 1.0), min_size=len(ivs), max_size=len(ivs)))
    total = sum(w)
    return PiecewiseDensity(tuple(ivs), tuple(wi / total / (b - a) for wi, (a, b) in zip(w, ivs)))


def _normalized(base):
    # re-normalise to within float round-off of one
    s = base.mass()
    return PiecewiseDensity(base.intervals, tuple(h / s for h in base.heights))


@settings(max_examples=40, deadline=None)
@given(bases(), st.integers(1, 3).filter(lambda t: t % 2 == 1), st.floats(-5, 5))
def test_odd_moment_property(base, t, beta):
    base = _normalized(base)
    if abs(base.mass() - 1) > 1e-12:
        return
    c = match_moment_density(base, t, beta)
    chk = numeric_check_mixture(c)
    assert chk.total_mass_error < 1e-10
    assert chk.target_residual < 1e-8 * max(1.0, abs(beta))


@settings(max_examples=40, deadline=None)
@given(bases(), st.floats(-2.5, 2.5), st.floats(0.05, 0.95))
def test_quantile_property(base, q, prob):
    base = _normalized(base)
    if abs(base.mass() - 1) > 1e-12:
        return
    chk = numeric_check_mixture(match_quantile_density(base, q, prob))
    assert chk.passed


@settings(max_examples=40, deadline=None)
@given(bases(), st.floats(0.05, 10.0))
def test_variance_property(base, beta):
    base = _normalized(base)
    if abs(base.mass() - 1) > 1e-12:
        return
    chk = numeric_check_mixture(match_variance_density(base, beta))
    assert chk.total_mass_error < 1e-10
    assert chk.target_residual < 1e-8 * max(1.0, beta)


def test_mixture_restricted_to_base_is_scaled_base():
    base = PiecewiseDensity(((0.0, 0.1), (0.5, 0.6)), (6.0, 4.0))
    c = match_moment_density(base, 2, 9.0)
    pts = np.array([0.05, 0.55])
    assert np.allclose(c.mixture(pts), c.scale * base(pts), atol=1e-14)

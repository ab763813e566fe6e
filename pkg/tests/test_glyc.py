import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paceopt.glyc import (
    VLA_TYPES,
    GlycCurve,
    InvalidCurveError,
    build_glyc_curve,
    glyc_deriv,
    glyc_eval,
    load_knot_tables,
)


def test_anchor_values_all_classes():
    for vla in VLA_TYPES:
        curve = build_glyc_curve(vla=vla)
        assert curve(0.0) == pytest.approx(0.30, abs=1e-12)
        assert curve(1.0) == pytest.approx(1.00, abs=1e-12)
        assert curve(1.2) == 1.0  # clamp beyond the last knot


def test_calibrated_good_mid_knot():
    curve = build_glyc_curve(vla="good")
    # Frozen mid-curve calibration point; close to the 0.80 ballpark.
    assert curve(0.9) == pytest.approx(0.79, abs=1e-12)
    assert abs(curve(0.9) - 0.80) < 0.05


def test_knot_interpolation_exact():
    tables = load_knot_tables()
    for vla, knots in tables.items():
        curve = build_glyc_curve(vla=vla)
        for r, g in knots:
            assert curve(r) == pytest.approx(g, abs=1e-12)


def test_second_derivative_continuity_at_interior_knots():
    for vla in VLA_TYPES:
        curve = build_glyc_curve(vla=vla)
        scale = max(abs(curve.second_deriv(r)) for r in np.linspace(0.01, 0.99, 199))
        for r, _ in curve.knots[1:-1]:
            left = curve.second_deriv(r - 1e-12)
            right = curve.second_deriv(r + 1e-12)
            assert abs(left - right) <= 1e-9 * max(scale, 1.0)


def test_natural_end_conditions():
    curve = build_glyc_curve(vla="good")
    assert curve.second_deriv(0.0) == pytest.approx(0.0, abs=1e-12)
    assert curve.second_deriv(1.0) == pytest.approx(0.0, abs=1e-12)


def test_clamp_range_many_ratios():
    rng = np.random.default_rng(7)
    ratios = rng.uniform(0.0, 5.0, 100_000)
    for vla in VLA_TYPES:
        vals = build_glyc_curve(vla=vla)(ratios)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=100.0, allow_nan=False))
def test_clamp_property(ratio):
    val = glyc_eval(build_glyc_curve(vla="average"), ratio)
    assert 0.0 <= val <= 1.0


def test_negative_ratio_rejected():
    curve = build_glyc_curve(vla="good")
    with pytest.raises(ValueError):
        curve(-0.1)
    with pytest.raises(ValueError):
        curve.deriv(-1e-9)


def test_deriv_matches_finite_difference():
    curve = build_glyc_curve(vla="bad")
    rng = np.random.default_rng(3)
    for r in rng.uniform(0.05, 0.95, 40):
        eps = 1e-6
        fd = (curve(r + eps) - curve(r - eps)) / (2 * eps)
        assert glyc_deriv(curve, r) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_deriv_zero_beyond_last_knot():
    curve = build_glyc_curve(vla="good")
    assert curve.deriv(1.0) == 0.0
    assert curve.deriv(2.5) == 0.0


def test_custom_knots():
    curve = build_glyc_curve(knots=((0.0, 0.3), (0.5, 0.5), (1.0, 1.0)))
    assert curve(0.5) == pytest.approx(0.5, abs=1e-12)
    # interpolation at a knot, clamped tail
    assert curve(3.0) == 1.0


@pytest.mark.parametrize(
    "knots",
    [
        ((0.0, 0.3), (0.5, 0.4)),                    # does not end at 1
        ((0.1, 0.3), (1.0, 1.0)),                    # does not start at 0
        ((0.0, 0.3), (0.5, 0.5), (0.5, 0.6), (1.0, 1.0)),  # non-increasing ratios
        ((0.0, -0.1), (1.0, 1.0)),                   # fraction below 0
        ((0.0, 0.3), (1.0, 1.2)),                    # fraction above 1
    ],
)
def test_invalid_knots_rejected(knots):
    with pytest.raises(InvalidCurveError):
        build_glyc_curve(knots=knots)


def test_build_requires_exactly_one_source():
    with pytest.raises(ValueError):
        build_glyc_curve()
    with pytest.raises(ValueError):
        build_glyc_curve(vla="good", knots=((0.0, 0.3), (1.0, 1.0)))


def test_vectorized_eval_matches_scalar():
    curve = build_glyc_curve(vla="average")
    ratios = np.linspace(0.0, 1.5, 57)
    vec = curve(ratios)
    for r, v in zip(ratios, vec):
        assert curve(float(r)) == pytest.approx(v, abs=0.0)


def test_class_ordering_on_the_rise():
    """A worse lactate class burns a larger carbohydrate share at speed."""
    good = build_glyc_curve(vla="good")
    avg = build_glyc_curve(vla="average")
    bad = build_glyc_curve(vla="bad")
    for r in np.linspace(0.3, 0.95, 14):
        assert good(r) < avg(r) < bad(r)

"""Natural cubic spline evaluation and the exact curvature penalty.

The spline engine is checked against scipy's CubicSpline with natural
boundary conditions, and the penalty matrix against numerical quadrature
of the squared second derivative — two independently built references.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from pricelab.errors import ValidationError
from pricelab.smoothing import design_matrix, evaluate, penalty_matrix, quantile_knots

KNOTS = np.array([0.0, 0.13, 0.4, 0.55, 0.81, 1.0])
VALUES = np.array([1.2, -0.7, 0.0, 2.4, 2.1, -3.0])


def test_matches_scipy_natural_spline_inside_knots():
    ref = CubicSpline(KNOTS, VALUES, bc_type="natural")
    x = np.linspace(0.0, 1.0, 400)
    ours = evaluate(KNOTS, VALUES, x)
    assert np.max(np.abs(ours - ref(x))) < 1.5e-13


def test_interpolates_knot_values_exactly():
    assert evaluate(KNOTS, VALUES, KNOTS) == approx(VALUES, abs=1e-12)


def test_linear_extrapolation_with_boundary_slope():
    """Outside the knot span the curve must continue as a straight line
    whose slope matches the one-sided derivative at the boundary knot."""
    h = 1e-6
    left_slope = ((evaluate(KNOTS, VALUES, 0.0 + h) - VALUES[0]) / h).item()
    far = evaluate(KNOTS, VALUES, np.array([-0.5, -1.0, -1.5]))
    assert np.diff(far) == approx(-0.5 * left_slope, rel=1e-6)
    right_slope = ((VALUES[-1] - evaluate(KNOTS, VALUES, 1.0 - h)) / h).item()
    far = evaluate(KNOTS, VALUES, np.array([1.5, 2.0, 2.5]))
    assert np.diff(far) == approx(0.5 * right_slope, rel=1e-6)


def test_design_matrix_reproduces_evaluate():
    x = np.linspace(-0.2, 1.2, 57)
    B = design_matrix(x, KNOTS)
    assert B.shape == (57, len(KNOTS))
    assert B @ VALUES == approx(evaluate(KNOTS, VALUES, x), abs=1e-12)
    # rows are barycentric at the knots themselves
    at_knots = design_matrix(KNOTS, KNOTS)
    assert at_knots == approx(np.eye(len(KNOTS)), abs=1e-12)


def test_penalty_matches_numerical_quadrature():
    """a^T Omega a should equal the integral of f''(x)^2 over the knot span.

    The integrand is piecewise quadratic so adaptive quadrature per segment
    is essentially exact; agreement is required to 1e-8 relative.
    """
    omega = penalty_matrix(KNOTS)
    ref = CubicSpline(KNOTS, VALUES, bc_type="natural")
    d2 = ref.derivative(2)
    total = sum(
        quad(lambda t: d2(t) ** 2, a, b)[0]
        for a, b in zip(KNOTS[:-1], KNOTS[1:])
    )
    assert float(VALUES @ omega @ VALUES) == approx(total, rel=1e-8)


def test_penalty_matrix_properties():
    omega = penalty_matrix(KNOTS)
    assert omega == approx(omega.T, abs=1e-14)
    eigs = np.linalg.eigvalsh(omega)
    assert eigs.min() > -1e-10  # positive semi-definite
    # straight lines carry zero curvature
    line = 3.0 * KNOTS + 1.0
    assert float(line @ omega @ line) == approx(0.0, abs=1e-10)


def test_two_knots_degrade_to_line_with_zero_penalty():
    knots = np.array([0.0, 1.0])
    vals = np.array([2.0, 5.0])
    assert penalty_matrix(knots) == approx(np.zeros((2, 2)), abs=1e-15)
    x = np.array([-1.0, 0.25, 0.5, 2.0])
    assert evaluate(knots, vals, x) == approx(2.0 + 3.0 * x, abs=1e-12)


@given(
    st.integers(min_value=3, max_value=9),
    st.integers(min_value=0, max_value=10**6),
)
@settings(max_examples=25, deadline=None)
def test_spline_tracks_scipy_on_random_configs(k, seed):
    rng = np.random.default_rng(seed)
    knots = np.sort(rng.uniform(0.0, 1.0, size=k))
    if np.min(np.diff(knots)) < 1e-3:
        knots = np.linspace(0.0, 1.0, k)
    values = rng.normal(0.0, 3.0, size=k)
    x = rng.uniform(knots[0], knots[-1], size=50)
    ref = CubicSpline(knots, values, bc_type="natural")
    assert evaluate(knots, values, x) == approx(ref(x), abs=1e-10)


def test_knot_validation():
    with pytest.raises(ValidationError):
        evaluate(np.array([0.5]), np.array([1.0]), 0.3)
    with pytest.raises(ValidationError):
        evaluate(np.array([0.0, 0.0, 1.0]), np.zeros(3), 0.3)
    with pytest.raises(ValidationError):
        quantile_knots(np.arange(10.0), count=1)


def test_quantile_knots_deduplicate():
    # heavy ties collapse coincident quantiles; whatever survives must be
    # strictly increasing and inside the data range
    knots = quantile_knots(np.array([0.0, 0.0, 0.0, 1.0, 1.0]), count=6)
    assert len(knots) < 6
    assert np.all(np.diff(knots) > 0)
    assert knots[0] == 0.0 and knots[-1] == 1.0
    spread = quantile_knots(np.linspace(0.0, 1.0, 101), count=6)
    assert spread == approx(np.linspace(0.0, 1.0, 6), abs=1e-12)

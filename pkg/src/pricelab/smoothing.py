r"""Natural cubic splines parameterised by their values at the knots.

A natural cubic spline with knots t_1 < ... < t_K is fully determined by its
knot values a = (a_1, ..., a_K): the interior second derivatives
g = (g_2, ..., g_{K-1}) solve the tridiagonal system

    R g = Q^T a

with band matrices built from the knot gaps h_i = t_{i+1} - t_i,

    Q[i-1, i] = 1/h_{i-1},  Q[i, i] = -1/h_{i-1} - 1/h_i,  Q[i+1, i] = 1/h_i
    R[i, i] = (h_{i-1} + h_i) / 3,  R[i, i+1] = R[i+1, i] = h_i / 6

(interior columns i = 2..K-1; boundary second derivatives are zero).  The
curvature penalty is the exact integral of the squared second derivative,

    \int f''(x)^2 dx = g^T R g = a^T (Q R^{-1} Q^T) a,

so both evaluation and penalty are linear/quadratic in the knot values.
Outside [t_1, t_K] the spline continues linearly with the boundary slope,
which keeps it C^1 and leaves the penalty unchanged.

With K = 2 there are no interior knots: the "spline" degenerates to the
straight line through the two knot points and the penalty vanishes.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def _validate_knots(knots: np.ndarray) -> np.ndarray:
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 2:
        raise ValidationError("need at least 2 knots")
    if not np.all(np.diff(knots) > 0):
        raise ValidationError("knots must be strictly increasing")
    return knots


def _band_matrices(knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Q (K x K-2) and R (K-2 x K-2) from the gap sequence."""
    k = knots.size
    h = np.diff(knots)
    q = np.zeros((k, k - 2))
    r = np.zeros((k - 2, k - 2))
    for i in range(1, k - 1):
        c = i - 1
        q[i - 1, c] = 1.0 / h[i - 1]
        q[i, c] = -1.0 / h[i - 1] - 1.0 / h[i]
        q[i + 1, c] = 1.0 / h[i]
        r[c, c] = (h[i - 1] + h[i]) / 3.0
        if c + 1 < k - 2:
            r[c, c + 1] = h[i] / 6.0
            r[c + 1, c] = h[i] / 6.0
    return q, r


def penalty_matrix(knots: np.ndarray) -> np.ndarray:
    """Omega with a^T Omega a = integral of the squared second derivative."""
    knots = _validate_knots(knots)
    k = knots.size
    if k == 2:
        return np.zeros((2, 2))
    q, r = _band_matrices(knots)
    omega = q @ np.linalg.solve(r, q.T)
    return (omega + omega.T) / 2.0


def design_matrix(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """N with N @ a = spline values at x, including linear extrapolation.

    Row construction: on [t_i, t_{i+1}] the spline value is

        g_i (t_{i+1}-x)^3 / 6h + g_{i+1} (x-t_i)^3 / 6h
        + (a_i/h - g_i h/6)(t_{i+1}-x) + (a_{i+1}/h - g_{i+1} h/6)(x-t_i)

    which is linear in (a, g); substituting g = R^{-1} Q^T a gives a row in a
    alone.  Outside the knot range the row encodes value + slope at the
    nearest boundary knot.
    """
    knots = _validate_knots(knots)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = knots.size
    h = np.diff(knots)
    n = x.size

    coef_a = np.zeros((n, k))      # weights on knot values
    coef_g = np.zeros((n, k))      # weights on second derivatives (ends stay 0)

    interval = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, k - 2)
    below = x < knots[0]
    above = x > knots[-1]
    inside = ~(below | above)

    idx = np.nonzero(inside)[0]
    i = interval[idx]
    hi = h[i]
    left = knots[i + 1] - x[idx]
    right = x[idx] - knots[i]
    coef_a[idx, i] += left / hi
    coef_a[idx, i + 1] += right / hi
    coef_g[idx, i] += left**3 / (6.0 * hi) - hi * left / 6.0
    coef_g[idx, i + 1] += right**3 / (6.0 * hi) - hi * right / 6.0

    # f(x) = a_1 + (x - t_1) f'(t_1) with f'(t_1) = (a_2 - a_1)/h_1 - h_1 g_2 / 6
    idx = np.nonzero(below)[0]
    if idx.size:
        d = x[idx] - knots[0]
        coef_a[idx, 0] += 1.0 - d / h[0]
        coef_a[idx, 1] += d / h[0]
        if k > 2:
            coef_g[idx, 1] += -d * h[0] / 6.0

    # f(x) = a_K + (x - t_K) f'(t_K) with f'(t_K) = (a_K - a_{K-1})/h + h g_{K-1} / 6
    idx = np.nonzero(above)[0]
    if idx.size:
        d = x[idx] - knots[-1]
        coef_a[idx, -1] += 1.0 + d / h[-1]
        coef_a[idx, -2] += -d / h[-1]
        if k > 2:
            coef_g[idx, -2] += d * h[-1] / 6.0

    if k == 2:
        return coef_a
    q, r = _band_matrices(knots)
    # g_interior = R^{-1} Q^T a, so fold the g weights back onto a.
    return coef_a + coef_g[:, 1:-1] @ np.linalg.solve(r, q.T)


def evaluate(knots: np.ndarray, values: np.ndarray, x) -> np.ndarray:
    """Spline values at x for given knot values (shape follows x)."""
    values = np.asarray(values, dtype=float)
    arr = np.asarray(x, dtype=float)
    out = design_matrix(arr.ravel(), knots) @ values
    return out.reshape(arr.shape)


def quantile_knots(x: np.ndarray, count: int) -> np.ndarray:
    """``count`` knots at evenly spaced quantiles, deduplicated."""
    if count < 2:
        raise ValidationError("knot count must be >= 2")
    qs = np.linspace(0.0, 1.0, count)
    return np.unique(np.quantile(np.asarray(x, dtype=float), qs))

"""Kernel backends: compiled/fallback agreement and independent oracles."""

import math

import numpy as np
import pytest

from genestim._kernels import BACKEND, fallback

if BACKEND == "cython":
    from genestim._kernels import _core as compiled
else:  # pragma: no cover - exercised only when the extension is absent
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None,
                               reason="compiled extension not built")

N1, N2 = 20, 30


def _rng():
    return np.random.default_rng(1234)


@needs_ext
def test_invert_p1_backends_agree():
    rng = _rng()
    theta = rng.uniform(-4, 4, 500)
    tnuis = rng.uniform(0.5, N1 + N2 - 0.5, 500)
    a = fallback.invert_p1_batch(theta, tnuis, N1, N2)
    b = compiled.invert_p1_batch(theta, tnuis, N1, N2)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


@needs_ext
def test_sbar_backends_agree():
    rng = _rng()
    x1 = rng.integers(0, N1 + 1, 300).astype(float)
    x2 = rng.integers(0, N2 + 1, 300).astype(float)
    p1 = rng.uniform(0.01, 0.99, 300)
    p2 = rng.uniform(0.01, 0.99, 300)
    a = fallback.sbar_profiled_batch(x1, x2, N1, N2, p1, p2)
    b = compiled.sbar_profiled_batch(x1, x2, N1, N2, p1, p2)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)


@needs_ext
def test_zinterval_backends_agree():
    rng = _rng()
    x1 = rng.integers(0, N1 + 1, 80)
    x2 = rng.integers(0, N2 + 1, 80)
    tn = (x1 + x2).astype(float)
    z = 1.959964
    ra = fallback.zinterval_p1_batch(x1, x2, N1, N2, tn, z)
    rb = compiled.zinterval_p1_batch(x1, x2, N1, N2, tn, z)
    for a, b in zip(ra[:2], rb[:2]):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12, equal_nan=True)
    for a, b in zip(ra[2:], rb[2:]):
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


@needs_ext
def test_t3_mle_backends_agree():
    rng = _rng()
    x = rng.standard_t(3, (200, 10))
    ra, ca = fallback.t3_mle_batch(x)
    rb, cb = compiled.t3_mle_batch(x)
    assert ca.all() and cb.all()
    np.testing.assert_allclose(ra, rb, rtol=0, atol=1e-9)


def test_invert_p1_solves_the_nuisance_equation():
    rng = _rng()
    theta = rng.uniform(-4, 4, 200)
    tnuis = rng.uniform(0.5, N1 + N2 - 0.5, 200)
    p1 = fallback.invert_p1_batch(theta, tnuis, N1, N2)
    lo = np.maximum(0.0, (tnuis - N2) / N1)
    hi = np.minimum(1.0, tnuis / N1)
    assert np.all((p1 > lo) & (p1 < hi))
    p2 = 1.0 / (1.0 + np.exp(-(np.log(p1 / (1 - p1)) - theta)))
    np.testing.assert_allclose(N1 * p1 + N2 * p2, tnuis, atol=5e-10)


def test_invert_p1_degenerate_nuisance_is_nan():
    out = fallback.invert_p1_batch([0.0, 1.0], [0.0, N1 + N2], N1, N2)
    assert np.isnan(out).all()


def _sq_polynomial(x1, x2, t, z):
    """Cleared-denominator form of sbar^2 = z^2, degree six in p1.

    With p2 = (t - n1 p1)/n2:  n1 n2 [(x1/n1 - p1) a2 - (x2/n2 - p2) a1]^2
    = z^2 (n1 a1 + n2 a2) a1 a2,  a_i = p_i(1 - p_i).
    """
    P = np.polynomial.Polynomial
    p1 = P([0.0, 1.0])
    p2 = (t - N1 * p1) / N2
    a1 = p1 * (1 - p1)
    a2 = p2 * (1 - p2)
    bracket = (x1 / N1 - p1) * a2 - (x2 / N2 - p2) * a1
    return N1 * N2 * bracket ** 2 - z ** 2 * (N1 * a1 + N2 * a2) * a1 * a2


def test_zinterval_endpoints_are_roots_of_the_degree6_polynomial():
    rng = _rng()
    z = 1.959964
    checked = 0
    while checked < 10:
        x1 = int(rng.integers(1, N1))
        x2 = int(rng.integers(1, N2))
        t = float(x1 + x2)
        lo, hi, at_lo, at_hi, ok = fallback.zinterval_p1_batch(
            [x1], [x2], N1, N2, [t], z)
        assert ok[0]
        poly = _sq_polynomial(x1, x2, t, z)
        scale = max(abs(c) for c in poly.coef)
        for edge, at in ((lo[0], at_lo[0]), (hi[0], at_hi[0])):
            if at:
                continue
            assert abs(poly(edge)) < 1e-8 * scale
            checked += 1


def test_zinterval_interior_points_satisfy_the_inequality():
    z = 1.959964
    x1, x2 = 7, 12
    t = float(x1 + x2)
    lo, hi, at_lo, at_hi, ok = fallback.zinterval_p1_batch(
        [x1], [x2], N1, N2, [t], z)
    mid = np.linspace(lo[0], hi[0], 41)
    p2 = (t - N1 * mid) / N2
    s = fallback.sbar_profiled_batch(float(x1), float(x2), N1, N2, mid, p2)
    assert np.all(s * s <= z * z + 1e-9)


def test_t3_mle_is_a_score_root_and_downweights_outliers():
    x = np.array([[0.0, 0.0, 10.0]])
    root, conv = fallback.t3_mle_batch(x)
    assert conv[0]
    # independently bisected root of the t3 score near the data bulk
    assert math.isclose(root[0], 0.1487896462478019, abs_tol=1e-8)
    assert 0.0 < root[0] < 10.0 / 3.0


def test_t3_mle_equivariance_under_shift():
    rng = _rng()
    x = rng.standard_t(3, (50, 10))
    r0, _ = fallback.t3_mle_batch(x)
    r1, _ = fallback.t3_mle_batch(x + 2.5)
    np.testing.assert_allclose(r1, r0 + 2.5, atol=1e-8)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from straintail.truncnorm import MILLS_CROSSOVER, inverse_mills, shifted_moment, trunc_moments

from .oracles import shifted_moment_quad, trunc_moments_quad


def test_half_line_mean():
    assert trunc_moments(0.0)[1] == pytest.approx(-math.sqrt(2 / math.pi), abs=1e-15)


def test_untruncated_limit():
    m = trunc_moments(math.inf)
    assert (m[0], m[1], m[2], m[3], m[4], m[5]) == (1.0, 0.0, 1.0, 0.0, 3.0, 0.0)


def test_moments_match_quadrature_at_one_and_a_half():
    ref = trunc_moments_quad(1.5)
    got = trunc_moments(1.5)
    for k in range(6):
        assert got[k] == pytest.approx(ref[k], abs=1e-10)


def test_shifted_third_moment_against_quadrature():
    assert shifted_moment(0.5, 0.48, 3) == pytest.approx(shifted_moment_quad(0.5, 0.48, 3), abs=1e-10)


def test_shifted_moment_simple_cases():
    assert shifted_moment(1.0, 0.0, 1) == pytest.approx(1 + math.sqrt(2 / math.pi), abs=1e-14)
    for z in (-3.0, 0.2, 4.0):
        assert shifted_moment(0.0, z, 1) == pytest.approx(-trunc_moments(z)[1], abs=1e-15)
    with pytest.raises(ValueError):
        shifted_moment(0.0, 0.0, 4)


def test_far_left_tail_stays_finite():
    for z in (-10.0, -38.0, -40.0, -1e3):
        m = trunc_moments(z)
        assert all(math.isfinite(v) for v in m.m)
        # E[Z | Z <= z] -> z from below as z -> -inf
        assert m[1] < z and m[1] > z - 1.0 / abs(z)


def test_mills_branches_meet():
    z = MILLS_CROSSOVER
    direct = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / float(ndtr(z))
    assert inverse_mills(z - 1e-12) == pytest.approx(direct, rel=1e-12)


def test_rejects_nan_and_minus_inf():
    with pytest.raises(ValueError):
        trunc_moments(float("nan"))
    with pytest.raises(ValueError):
        trunc_moments(-math.inf)


@settings(max_examples=60, deadline=None)
@given(st.floats(-6.0, 6.0))
def test_recurrence_holds(z):
    m = trunc_moments(z)
    lam = inverse_mills(z)
    for k in range(2, 6):
        assert m[k] == pytest.approx((k - 1) * m[k - 2] - z ** (k - 1) * lam, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-6.0, 6.0))
def test_moment_signs_and_variance(z):
    m = trunc_moments(z)
    assert m[0] == 1.0
    assert m[1] < 0
    assert m[2] > 0 and m[4] > 0
    assert m[2] - m[1] ** 2 > 0
    assert m[2] - m[1] ** 2 < 1 + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-6.0, 6.0), st.floats(-3.0, 3.0), st.sampled_from([1, 2, 3]))
def test_shifted_against_quadrature(z, x, k):
    assert shifted_moment(x, z, k) == pytest.approx(shifted_moment_quad(x, z, k), abs=1e-9)


def test_monotone_in_truncation_point():
    zs = np.linspace(-5, 5, 101)
    m1 = [trunc_moments(z)[1] for z in zs]
    assert np.all(np.diff(m1) > 0)

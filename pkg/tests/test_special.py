import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softfail.special import erfc, erfcx, log_erfc

mpmath.mp.dps = 40


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_erfc_matches_mpmath_on_dense_grid():
    xs = np.linspace(0.0, 10.0, 2001)
    got = erfc(xs)
    worst = max(_rel(float(g), float(mpmath.erfc(mpmath.mpf(float(x))))) for g, x in zip(got, xs))
    assert worst <= 1e-12


@given(st.floats(min_value=0.0, max_value=26.0))
@settings(max_examples=300, deadline=None)
def test_erfc_relative_error(x):
    ref = float(mpmath.erfc(mpmath.mpf(x)))
    assert _rel(float(erfc(x)), ref) <= 1e-12


@given(st.floats(min_value=0.0, max_value=1e3))
@settings(max_examples=200, deadline=None)
def test_erfcx_relative_error(x):
    m = mpmath.mpf(x)
    ref = float(mpmath.exp(m * m) * mpmath.erfc(m))
    assert _rel(float(erfcx(x)), ref) <= 1e-12


@given(st.floats(min_value=0.0, max_value=1e3))
@settings(max_examples=200, deadline=None)
def test_log_erfc_finite_past_underflow(x):
    ref = float(mpmath.log(mpmath.erfc(mpmath.mpf(x))))
    got = float(log_erfc(x))
    assert math.isfinite(got)
    assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


def test_known_values():
    assert erfc(0.0) == 1.0
    assert erfc(30.0) == 0.0
    assert float(erfcx(0.0)) == 1.0


def test_scalar_and_array_shapes():
    assert isinstance(erfc(0.5), float)
    assert erfc(np.zeros((2, 3))).shape == (2, 3)


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        erfc(-0.1)

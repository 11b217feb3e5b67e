"""Tests for bulk potentials (app/phasefield/potentials.py)."""
import math

import numpy as np
import pytest

from app.phasefield.errors import UnsupportedPotentialError
from app.phasefield.potentials import DOUBLE_WELL, POLYNOMIAL, Potential


@pytest.mark.parametrize("a", [0.0, 0.5, 1.0, 2000.0])
def test_double_well_derivatives(a):
    pot = Potential.double_well(a)
    s = np.array([-1.5, 0.0, 0.3, 2.0])
    np.testing.assert_allclose(pot.value(s), (s**2 - a) ** 2 / 4)
    np.testing.assert_allclose(pot.d1(s), s**3 - a * s)
    np.testing.assert_allclose(pot.d2(s), 3 * s**2 - a)
    np.testing.assert_allclose(pot.d3(s), 6 * s)
    np.testing.assert_allclose(pot.d4(s), np.full_like(s, 6.0))
    assert pot.w == pytest.approx(math.sqrt(6.0))
    assert pot.kind == DOUBLE_WELL
    assert pot.a == a
    assert pot.constant_fourth_derivative


def test_polynomial_derives_w_from_the_quartic_coefficient():
    pot = Potential.polynomial([0.0, 0.0, -1.0, 0.0, 2.0])
    assert pot.w == pytest.approx(math.sqrt(48.0))
    assert pot.kind == POLYNOMIAL
    assert pot(1.0) == pytest.approx(1.0)


def test_polynomial_without_quartic_has_no_bound():
    pot = Potential.polynomial([0.0, 0.0, 1.0])
    assert pot.w == 0.0
    with pytest.raises(UnsupportedPotentialError):
        pot.require_w()


def test_high_degree_polynomial_needs_explicit_w():
    with pytest.raises(UnsupportedPotentialError, match="explicit w"):
        Potential.polynomial([0, 0, 0, 0, 0, 0, 1.0])
    pot = Potential.polynomial([0, 0, 0, 0, 1.0, 0, 1.0], w=0.0)
    assert not pot.constant_fourth_derivative
    with pytest.raises(UnsupportedPotentialError):
        pot.require_constant_d4()


def test_custom_potential_and_validation():
    pot = Potential.custom(np.cosh, np.sinh, np.cosh, np.sinh, np.cosh, w=1.0)
    assert pot.value(0.0) == 1.0
    with pytest.raises(UnsupportedPotentialError):
        Potential.custom(np.cosh, np.sinh, np.cosh, np.sinh, np.cosh, w=-1.0)
    with pytest.raises(UnsupportedPotentialError):
        pot.a


def test_describe_is_plain_data():
    assert Potential.double_well(2.0).describe() == {"kind": "double_well", "w": math.sqrt(6.0), "a": 2.0}
    assert Potential.zero().describe()["coefficients"] == [0.0]

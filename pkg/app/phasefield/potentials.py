"""Bulk potentials W and their first four derivatives."""
from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial

from app.phasefield.errors import UnsupportedPotentialError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Any], Any]

DOUBLE_WELL = "double_well"
POLYNOMIAL = "polynomial"
CUSTOM = "custom"


@dataclass(frozen=True)
class Potential:
    """W with derivatives d1..d4 and a lower bound ``w`` with d4 >= w**2 everywhere.

    ``w = 0`` means no such bound is known; operations that need it refuse.
    All callables accept scalars and numpy arrays.
    """

    value: ScalarFn
    d1: ScalarFn
    d2: ScalarFn
    d3: ScalarFn
    d4: ScalarFn
    w: float = 0.0
    kind: str = CUSTOM
    constant_fourth_derivative: bool = False
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.w) or self.w < 0:
            raise UnsupportedPotentialError(f"w must be a finite non-negative number, got {self.w}")

    def __call__(self, s: Any) -> Any:
        return self.value(s)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], w: float | None = None) -> Potential:
        """W(s) = sum_j c_j s**j.

        Up to degree 4 the fourth derivative is the constant 24*c4, so ``w`` is
        derived as sqrt(24*c4) when c4 > 0 (0 otherwise). Higher degrees need an
        explicit ``w``.
        """
        coeffs = [float(c) for c in coefficients]
        if not coeffs:
            raise UnsupportedPotentialError("a polynomial potential needs coefficients")
        poly = Polynomial(coeffs)
        degree = len(np.trim_zeros(np.asarray(coeffs), "b")) - 1
        constant_d4 = degree <= 4
        if w is None:
            if not constant_d4:
                raise UnsupportedPotentialError(
                    f"degree {degree} polynomial needs an explicit w (use 0 if unknown)"
                )
            c4 = coeffs[4] if len(coeffs) > 4 else 0.0
            w = math.sqrt(24.0 * c4) if c4 > 0 else 0.0
        derivs = [poly.deriv(order) for order in range(1, 5)]
        return cls(
            value=poly,
            d1=derivs[0],
            d2=derivs[1],
            d3=derivs[2],
            d4=derivs[3],
            w=float(w),
            kind=POLYNOMIAL,
            constant_fourth_derivative=constant_d4,
            params={"coefficients": coeffs},
        )

    @classmethod
    def double_well(cls, a: float) -> Potential:
        """W(s) = (s**2 - a)**2 / 4, so W'' = 3s**2 - a, W''' = 6s and w**2 = 6."""
        a = float(a)
        base = cls.polynomial([a * a / 4.0, 0.0, -a / 2.0, 0.0, 0.25])
        return cls(
            value=base.value,
            d1=base.d1,
            d2=base.d2,
            d3=base.d3,
            d4=base.d4,
            w=math.sqrt(6.0),
            kind=DOUBLE_WELL,
            constant_fourth_derivative=True,
            params={"a": a},
        )

    @classmethod
    def custom(
        cls,
        value: ScalarFn,
        d1: ScalarFn,
        d2: ScalarFn,
        d3: ScalarFn,
        d4: ScalarFn,
        w: float = 0.0,
        *,
        constant_fourth_derivative: bool = False,
    ) -> Potential:
        return cls(value, d1, d2, d3, d4, float(w), CUSTOM, constant_fourth_derivative)

    @classmethod
    def zero(cls) -> Potential:
        """W = 0. Useful for checking the quadratic parts alone."""
        return cls.polynomial([0.0])

    @property
    def a(self) -> float:
        if self.kind != DOUBLE_WELL:
            raise UnsupportedPotentialError(f"a {self.kind} potential has no double-well parameter")
        return float(self.params["a"])

    def require_w(self) -> float:
        if self.w <= 0:
            raise UnsupportedPotentialError("this operation needs a potential with w > 0")
        return self.w

    def require_constant_d4(self) -> None:
        if not self.constant_fourth_derivative:
            raise UnsupportedPotentialError("this operation needs a constant fourth derivative")

    def describe(self) -> dict[str, Any]:
        """Plain mapping for record metadata."""
        return {"kind": self.kind, "w": self.w, **self.params}

"""Minimizations over the dual lattice 2*pi*Z^N.

Every nonzero k in 2*pi*Z^N has |k|^2 = 4*pi^2*q for an integer q that is a sum
of N squares, so both lattice minima reduce to a search over representable q.
Both objectives are convex in x = 4*pi^2*q with their minimizer at a finite x,
so a bound past that point (plus slack for the next representable q) covers
the global minimum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from app.phasefield.errors import PreconditionError

logger = logging.getLogger(__name__)

FOUR_PI_SQ = 4.0 * np.pi**2
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class LatticeMinResult:
    value: float
    argmin_norms: tuple[int, ...]
    searched_bound: int
    witness: tuple[int, ...]

    def to_dict(self) -> dict[str, object]:
        return {
            "value": self.value,
            "argmin_norms": list(self.argmin_norms),
            "searched_bound": self.searched_bound,
            "witness": list(self.witness),
        }


def _check_rank(dim: int) -> None:
    if dim not in (1, 2, 3):
        raise PreconditionError(f"dimension must be 1, 2 or 3, got {dim}")


def representable_norms(dim: int, q_max: int) -> list[int]:
    """Sorted distinct q in 1..q_max that are sums of ``dim`` integer squares."""
    _check_rank(dim)
    if q_max < 1:
        raise PreconditionError(f"q_max must be at least 1, got {q_max}")
    squares = np.arange(math.isqrt(q_max) + 1) ** 2
    reachable = np.zeros(q_max + 1, dtype=bool)
    reachable[squares] = True
    for _ in range(dim - 1):
        grown = reachable.copy()
        for s in squares[1:]:
            grown[s:] |= reachable[: q_max + 1 - s]
        reachable = grown
    return [int(q) for q in np.flatnonzero(reachable[1:]) + 1]


def search_bound(alpha: float = 0.0, gamma: float = 0.0) -> int:
    return math.ceil(max(2.0 * alpha / FOUR_PI_SQ, 2.0 * gamma / FOUR_PI_SQ, 4.0)) + 8


def _smallest_decomposition(q: int, slots: int) -> tuple[int, ...] | None:
    if slots == 1:
        root = math.isqrt(q)
        return (root,) if root * root == q else None
    for j in range(math.isqrt(q) + 1):
        rest = _smallest_decomposition(q - j * j, slots - 1)
        if rest is not None:
            return (j, *rest)
    return None


def lattice_vector(dim: int, q: int) -> tuple[int, ...]:
    """Lexicographically smallest non-negative integer vector with squared norm q."""
    vector = _smallest_decomposition(q, dim)
    if vector is None:
        raise PreconditionError(f"{q} is not a sum of {dim} squares")
    return vector


def _minimize(objective: np.ndarray, norms: list[int], dim: int, bound: int) -> LatticeMinResult:
    best = float(objective.min())
    ties = np.isclose(objective, best, rtol=TIE_RTOL, atol=0.0) | (objective == best)
    argmin = tuple(q for q, tie in zip(norms, ties, strict=True) if tie)
    return LatticeMinResult(best, argmin, bound, lattice_vector(dim, argmin[0]))


def lattice_min_pfc(alpha: float, dim: int) -> LatticeMinResult:
    """min over k != 0 in 2 pi Z^dim of (alpha - |k|^2)^2."""
    _check_rank(dim)
    bound = search_bound(alpha=alpha)
    norms = representable_norms(dim, bound)
    x = FOUR_PI_SQ * np.asarray(norms, dtype=float)
    return _minimize((alpha - x) ** 2, norms, dim, bound)


def lattice_min_ok(gamma: float, dim: int) -> LatticeMinResult:
    """min over k != 0 in 2 pi Z^dim of |k|^2/gamma^2 + 1/|k|^2, minimized near |k|^2 = gamma."""
    _check_rank(dim)
    if gamma <= 0:
        raise PreconditionError(f"gamma must be positive, got {gamma}")
    bound = search_bound(gamma=gamma)
    norms = representable_norms(dim, bound)
    x = FOUR_PI_SQ * np.asarray(norms, dtype=float)
    return _minimize(x / gamma**2 + 1.0 / x, norms, dim, bound)

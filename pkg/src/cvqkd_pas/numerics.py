"""Composite Simpson quadrature grids and golden-section maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid with composite Simpson weights on ``[lo, hi]``."""

    lo: float
    hi: float
    n_points: int
    points: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_points
        if n < 3 or n % 2 == 0:
            raise DomainError(f"Simpson needs an odd number of points >= 3, got {n}")
        if not self.hi > self.lo:
            raise DomainError(f"empty range [{self.lo}, {self.hi}]")
        x = np.linspace(self.lo, self.hi, n)
        h = (self.hi - self.lo) / (n - 1)
        w = np.full(n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)

    @property
    def range(self) -> tuple[float, float]:
        return self.lo, self.hi

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class GridPolicy:
    """How to lay out the Simpson grid around Bob's outcome distribution.

    The grid spans ``[min mean - tail*sigma, max mean + tail*sigma]``.
    """

    n_points: int = 1201
    tail_sigmas: float = 8.0

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise DomainError(f"n_points must be odd and >= 3, got {self.n_points}")
        if not self.tail_sigmas > 0:
            raise DomainError("tail_sigmas must be positive")

    def grid(self, lo_mean: float, hi_mean: float, sigma: float) -> QuadratureGrid:
        pad = self.tail_sigmas * sigma
        return QuadratureGrid(lo_mean - pad, hi_mean + pad, self.n_points)

    def doubled(self) -> "GridPolicy":
        return GridPolicy(2 * self.n_points - 1, self.tail_sigmas)


DEFAULT_GRID = GridPolicy()


def golden_section_max(
    f: Callable[[float], float],
    a: float,
    b: float,
    xtol: float = 1e-4,
) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]`` by golden-section search.

    Ties keep the left sub-interval, so flat plateaus drift towards ``a``.
    Returns ``(x_best, f_best)`` among the evaluated interior points; the
    caller decides whether endpoints should also be compared.
    """
    if b < a:
        a, b = b, a
    h = b - a
    if h <= xtol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
    if fc >= fd:
        return c, fc
    return d, fd


def xlog2x(p: np.ndarray) -> np.ndarray:
    """``p*log2(p)`` with the convention ``0 log 0 = 0`` (for p < 1e-300)."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p >= 1e-300
    out[mask] = p[mask] * np.log2(p[mask])
    return out

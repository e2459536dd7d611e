"""
Certified interval enclosures.

A CertifiedInterval [lower, upper] encloses a mathematically defined real. Arithmetic
rounds outward by a relative slop (settings.slop, default 2**-45) so that double
precision results stay enclosures at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from settings_loader import get_settings

Number = Union[int, float]


def _slop() -> float:
    return get_settings().slop


def round_down(x: float, slop: float | None = None) -> float:
    """Move x outward (down) by the relative slop and one ulp."""
    if math.isinf(x):
        return x
    eps = _slop() if slop is None else slop
    return math.nextafter(x - abs(x) * eps, -math.inf)


def round_up(x: float, slop: float | None = None) -> float:
    """Move x outward (up) by the relative slop and one ulp."""
    if math.isinf(x):
        return x
    eps = _slop() if slop is None else slop
    return math.nextafter(x + abs(x) * eps, math.inf)


@dataclass(frozen=True, slots=True)
class CertifiedInterval:
    """
    Closed interval [lower, upper] enclosing a real quantity.

    Examples:
        >>> CertifiedInterval.point(1.0).contains(1.0)
        True
        >>> (CertifiedInterval(1, 2) + 1).upper
        3.0...
    """
    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoint is NaN")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, 'lower', lo)
        object.__setattr__(self, 'upper', hi)

    @classmethod
    def point(cls, x: Number) -> CertifiedInterval:
        """Degenerate interval [x, x]."""
        return cls(x, x)

    @classmethod
    def around(cls, x: Number, slop: float | None = None) -> CertifiedInterval:
        """Outward-rounded enclosure of a floating value."""
        return cls(round_down(float(x), slop), round_up(float(x), slop))

    @classmethod
    def hull(cls, items: Iterable[CertifiedInterval]) -> CertifiedInterval:
        items = list(items)
        return cls(min(i.lower for i in items), max(i.upper for i in items))

    @property
    def midpoint(self) -> float:
        if math.isinf(self.lower) or math.isinf(self.upper):
            return self.upper if math.isinf(self.lower) else self.lower
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def contains(self, x: Union[Number, CertifiedInterval]) -> bool:
        if isinstance(x, CertifiedInterval):
            return self.lower <= x.lower and x.upper <= self.upper
        return self.lower <= x <= self.upper

    def intersects(self, other: CertifiedInterval) -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def widened(self, slop: float | None = None) -> CertifiedInterval:
        return CertifiedInterval(round_down(self.lower, slop), round_up(self.upper, slop))

    def __add__(self, other: Union[Number, CertifiedInterval]) -> CertifiedInterval:
        if isinstance(other, CertifiedInterval):
            return CertifiedInterval(round_down(self.lower + other.lower),
                                     round_up(self.upper + other.upper))
        if isinstance(other, (int, float)):
            return CertifiedInterval(round_down(self.lower + other), round_up(self.upper + other))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> CertifiedInterval:
        return CertifiedInterval(-self.upper, -self.lower)

    def __sub__(self, other: Union[Number, CertifiedInterval]) -> CertifiedInterval:
        return self + (-other)

    def __rsub__(self, other: Number) -> CertifiedInterval:
        return (-self) + other

    def scale(self, factor: Number) -> CertifiedInterval:
        """Multiply by a real scalar, flipping endpoints for negative factors."""
        if factor == 0:
            return CertifiedInterval.point(0.0)
        a, b = self.lower * factor, self.upper * factor
        lo, hi = (a, b) if factor > 0 else (b, a)
        return CertifiedInterval(round_down(lo), round_up(hi))

    def __mul__(self, other: Union[Number, CertifiedInterval]) -> CertifiedInterval:
        if isinstance(other, (int, float)):
            return self.scale(other)
        if isinstance(other, CertifiedInterval):
            products = [self.lower * other.lower, self.lower * other.upper,
                        self.upper * other.lower, self.upper * other.upper]
            return CertifiedInterval(round_down(min(products)), round_up(max(products)))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: Union[Number, CertifiedInterval]) -> CertifiedInterval:
        if isinstance(other, (int, float)):
            if other == 0:
                raise ZeroDivisionError("interval division by zero")
            return self.scale(1.0 / other).widened()
        if other.lower <= 0 <= other.upper:
            raise ZeroDivisionError("divisor interval contains zero")
        inv = CertifiedInterval(round_down(1.0 / other.upper), round_up(1.0 / other.lower))
        return self * inv

    def log(self) -> CertifiedInterval:
        if self.lower <= 0:
            raise ValueError(f"log of non-positive interval {self}")
        return CertifiedInterval(round_down(math.log(self.lower)), round_up(math.log(self.upper)))

    def exp(self) -> CertifiedInterval:
        return CertifiedInterval(round_down(math.exp(self.lower)), round_up(math.exp(self.upper)))

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}

    def __repr__(self) -> str:
        return f"CertifiedInterval({self.lower!r}, {self.upper!r})"


def round_down_array(x: np.ndarray, slop: float | None = None) -> np.ndarray:
    """Elementwise round_down; infinities pass through."""
    eps = _slop() if slop is None else slop
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.isinf(x), x, np.nextafter(x - np.abs(x) * eps, -np.inf))


def round_up_array(x: np.ndarray, slop: float | None = None) -> np.ndarray:
    """Elementwise round_up; infinities pass through."""
    eps = _slop() if slop is None else slop
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.isinf(x), x, np.nextafter(x + np.abs(x) * eps, np.inf))

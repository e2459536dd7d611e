"""
Exact arithmetic in real quadratic fields Q(sqrt d).

Elements are p + q*sqrt(d) with rational p, q and square-free d > 1 (d = 0 marks a
rational). Comparisons are decided exactly by sign tests on p^2 - q^2 d, so the
boundary-crossing decisions of the geodesic tracer and the fixed points of integer
Mobius maps never depend on rounding.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from typing import Tuple, Union

from core.errors import DomainError

Rational = Union[int, Fraction]


def squarefree_part(n: int) -> Tuple[int, int]:
    """Return (f, d) with n = f^2 * d and d square-free."""
    if n <= 0:
        raise DomainError(f"radicand must be positive, got {n}")
    f, d = 1, n
    k = 2
    while k * k <= d:
        while d % (k * k) == 0:
            d //= k * k
            f *= k
        k += 1
    return f, d


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


@total_ordering
class QuadraticIrrational:
    """
    Immutable element p + q*sqrt(d) of Q(sqrt d).

    Examples:
        >>> phi2 = QuadraticIrrational(Fraction(3, 2), Fraction(1, 2), 5)
        >>> phi2 == 3 - 1 / phi2
        True
    """

    __slots__ = ("_p", "_q", "_d")

    def __init__(self, p: Rational, q: Rational = 0, d: int = 0):
        p, q = Fraction(p), Fraction(q)
        if q != 0:
            f, d = squarefree_part(d)
            if d == 1:
                p, q, d = p + q * f, Fraction(0), 0
            else:
                q *= f
        if q == 0:
            d = 0
        self._p, self._q, self._d = p, q, d

    @classmethod
    def coerce(cls, value) -> QuadraticIrrational:
        if isinstance(value, QuadraticIrrational):
            return value
        if isinstance(value, float):
            return cls(Fraction(value))
        if isinstance(value, (int, Fraction)):
            return cls(value)
        raise TypeError(f"cannot coerce {type(value).__name__} to a quadratic irrational")

    @property
    def p(self) -> Fraction:
        return self._p

    @property
    def q(self) -> Fraction:
        return self._q

    @property
    def d(self) -> int:
        return self._d

    @property
    def is_rational(self) -> bool:
        return self._q == 0

    @property
    def is_integer(self) -> bool:
        return self.is_rational and self._p.denominator == 1

    def _common(self, other: QuadraticIrrational) -> int:
        if self._d and other._d and self._d != other._d:
            raise DomainError(f"mixed quadratic fields Q(sqrt {self._d}) and Q(sqrt {other._d})")
        return self._d or other._d

    def conjugate(self) -> QuadraticIrrational:
        return QuadraticIrrational(self._p, -self._q, self._d)

    def norm(self) -> Fraction:
        return self._p * self._p - self._q * self._q * self._d

    def sign(self) -> int:
        sp, sq = _sign(self._p), _sign(self._q)
        if sq == 0:
            return sp
        if sp == 0 or sp == sq:
            return sq
        # opposite signs: compare p^2 with q^2 d
        return sp * _sign(self.norm())

    def __add__(self, other) -> QuadraticIrrational:
        try:
            other = QuadraticIrrational.coerce(other)
        except TypeError:
            return NotImplemented
        d = self._common(other)
        return QuadraticIrrational(self._p + other._p, self._q + other._q, d)

    __radd__ = __add__

    def __neg__(self) -> QuadraticIrrational:
        return QuadraticIrrational(-self._p, -self._q, self._d)

    def __sub__(self, other) -> QuadraticIrrational:
        try:
            other = QuadraticIrrational.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> QuadraticIrrational:
        return QuadraticIrrational.coerce(other) - self

    def __mul__(self, other) -> QuadraticIrrational:
        try:
            other = QuadraticIrrational.coerce(other)
        except TypeError:
            return NotImplemented
        d = self._common(other)
        p = self._p * other._p + self._q * other._q * d
        q = self._p * other._q + self._q * other._p
        return QuadraticIrrational(p, q, d)

    __rmul__ = __mul__

    def reciprocal(self) -> QuadraticIrrational:
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("reciprocal of zero in a quadratic field")
        return QuadraticIrrational(self._p / n, -self._q / n, self._d)

    def __truediv__(self, other) -> QuadraticIrrational:
        try:
            other = QuadraticIrrational.coerce(other)
        except TypeError:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> QuadraticIrrational:
        return QuadraticIrrational.coerce(other) * self.reciprocal()

    def __eq__(self, other) -> bool:
        try:
            other = QuadraticIrrational.coerce(other)
        except TypeError:
            return NotImplemented
        return (self - other).sign() == 0

    def __lt__(self, other) -> bool:
        try:
            other = QuadraticIrrational.coerce(other)
        except TypeError:
            return NotImplemented
        return (self - other).sign() < 0

    def __hash__(self) -> int:
        return hash((self._p, self._q, self._d))

    def __float__(self) -> float:
        return float(self._p) + float(self._q) * math.sqrt(self._d)

    def floor(self) -> int:
        n = math.floor(float(self))
        while self < n:
            n -= 1
        while self >= n + 1:
            n += 1
        return n

    def ceil(self) -> int:
        n = self.floor()
        return n if self == n else n + 1

    def to_dict(self) -> dict:
        return {"p_num": self._p.numerator, "p_den": self._p.denominator,
                "q_num": self._q.numerator, "q_den": self._q.denominator, "d": self._d}

    @classmethod
    def from_dict(cls, data: dict) -> QuadraticIrrational:
        return cls(Fraction(data["p_num"], data.get("p_den", 1)),
                   Fraction(data.get("q_num", 0), data.get("q_den", 1)),
                   data.get("d", 0))

    def __repr__(self) -> str:
        if self.is_rational:
            return f"QuadraticIrrational({self._p})"
        return f"QuadraticIrrational({self._p} + {self._q}*sqrt({self._d}))"


def attracting_fixed_point(a: int, b: int, c: int, d: int) -> QuadraticIrrational:
    """
    Larger fixed point of the integer Mobius map z -> (a z + b) / (c z + d).

    Solves c z^2 + (d - a) z - b = 0 exactly; requires c > 0 and a positive
    discriminant that is not a perfect square (hyperbolic map).
    """
    if c <= 0:
        raise DomainError("fixed point needs c > 0")
    disc = (a - d) ** 2 + 4 * b * c
    if disc <= 0:
        raise DomainError(f"non-hyperbolic map (discriminant {disc})")
    root = math.isqrt(disc)
    if root * root == disc:
        return QuadraticIrrational(Fraction(a - d + root, 2 * c))
    return QuadraticIrrational(Fraction(a - d, 2 * c), Fraction(1, 2 * c), disc)

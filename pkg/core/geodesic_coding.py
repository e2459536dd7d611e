"""
Arithmetic and geometric codes of geodesics on the modular surface.

The geometric code is obtained by renormalization: the current piece of the geodesic
lives in the fundamental region F = {|z| >= 1, |Re z| <= 1/2}; the side through which
it leaves F decides which generator (T, T^-1 or S) is applied to the endpoint pair.
All side decisions are sign tests, exact for endpoints in Q(sqrt d).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Literal, Tuple, Union

from core.errors import DomainError, UndecidableCrossing
from core.minus_cf import expand_minus_cf, periodic_value
from core.quadratic import QuadraticIrrational
from core.shift_core import TransitionRule, Word
from settings_loader import get_settings

logger = logging.getLogger(__name__)

Real = Union[QuadraticIrrational, float]
CodeKind = Literal["arithmetic", "geometric"]

HALF = Fraction(1, 2)
THREE_QUARTERS = Fraction(3, 4)


def _describe(x: Real) -> Union[dict, float]:
    return x.to_dict() if isinstance(x, QuadraticIrrational) else float(x)


@dataclass(frozen=True)
class GeodesicEndpoints:
    """Oriented geodesic from u to w; reduced when 0 < u < 1 < w."""
    u: Real
    w: Real

    def __post_init__(self):
        for name in ("u", "w"):
            value = getattr(self, name)
            if isinstance(value, (int, Fraction)):
                object.__setattr__(self, name, QuadraticIrrational(value))
            elif isinstance(value, float) and not math.isfinite(value):
                raise DomainError(f"endpoint {name} must be finite, got {value}")
        if self.u == self.w:
            raise DomainError("geodesic endpoints must be distinct")

    @property
    def is_exact(self) -> bool:
        return isinstance(self.u, QuadraticIrrational) and isinstance(self.w, QuadraticIrrational)

    @property
    def is_reduced(self) -> bool:
        return 0 < self.u < 1 < self.w

    def translated(self, n: int = 1) -> GeodesicEndpoints:
        """Image under T^n: z -> z + n."""
        return GeodesicEndpoints(self.u + n, self.w + n)

    def to_dict(self) -> dict:
        return {"u": _describe(self.u), "w": _describe(self.w),
                "u_approx": float(self.u), "w_approx": float(self.w)}


@dataclass(frozen=True)
class SymbolicCode:
    """
    Finite window of a bi-infinite code, or a periodic block.

    offset is the window position of n_1 (the first digit of w's expansion) for
    arithmetic codes; geometric windows start at an arbitrary return.
    """
    digits: Tuple[int, ...]
    kind: CodeKind = "arithmetic"
    periodic: bool = False
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'digits', tuple(int(d) for d in self.digits))
        if self.periodic and not self.digits:
            raise DomainError("a periodic block needs at least one digit")
        if self.kind == "arithmetic" and any(d < 2 for d in self.digits):
            raise DomainError(f"arithmetic digits must be >= 2, got {self.digits}")

    @classmethod
    def parse(cls, text: str, kind: CodeKind = "arithmetic", periodic: bool = False) -> SymbolicCode:
        """Parse a comma separated digit list such as '6,3'."""
        try:
            digits = tuple(int(part) for part in text.replace(" ", "").split(",") if part)
        except ValueError as e:
            raise DomainError(f"malformed code '{text}': {e}")
        return cls(digits, kind, periodic)

    def __len__(self) -> int:
        return len(self.digits)

    def canonical_rotation(self) -> Tuple[int, ...]:
        if not self.digits:
            return ()
        return Word(self.digits).canonical_rotation()

    def matches_up_to_shift(self, other: SymbolicCode) -> bool:
        return self.canonical_rotation() == other.canonical_rotation()

    def to_dict(self) -> dict:
        return {"code": list(self.digits), "kind": self.kind, "periodic": self.periodic}


def arithmetic_code(g: GeodesicEndpoints, terms_forward: int, terms_backward: int) -> SymbolicCode:
    """
    Window [n_{-b+1}, ..., n_0, n_1, ..., n_f] of the arithmetic code.

    w = n_1 - 1/(n_2 - ...) and 1/u = n_0 - 1/(n_{-1} - ...). The endpoints are named
    (u, w) throughout; the second endpoint is sometimes written v in the literature.

    Raises:
        DomainError: If the geodesic is not reduced or a term count is negative
    """
    if terms_forward < 0 or terms_backward < 0:
        raise DomainError("term counts must be non-negative")
    if not g.is_reduced:
        raise DomainError(f"geodesic is not reduced: u={float(g.u)}, w={float(g.w)}")
    forward: Tuple[int, ...] = ()
    backward: Tuple[int, ...] = ()
    if terms_forward:
        forward = expand_minus_cf(g.w, terms_forward).word.digits
    if terms_backward:
        backward = expand_minus_cf(1 / g.u, terms_backward).word.digits
    return SymbolicCode(tuple(reversed(backward)) + forward, "arithmetic", offset=len(backward))


class _SideTest:
    """Sign tests for the tracer: exact in Q(sqrt d), slop-guarded for floats."""

    def __init__(self, exact: bool):
        self.exact = exact
        self.slop = get_settings().slop

    def compare(self, lhs, rhs, certify: bool = True) -> int:
        if self.exact:
            return QuadraticIrrational.coerce(lhs - rhs).sign()
        lhs, rhs = float(lhs), float(rhs)
        diff = lhs - rhs
        scale = max(1.0, abs(lhs), abs(rhs))
        if certify and abs(diff) <= 64 * self.slop * scale:
            raise UndecidableCrossing(
                f"crossing test {lhs!r} vs {rhs!r} is within rounding slop; use exact endpoints")
        return (diff > 0) - (diff < 0)

    def floor(self, x) -> int:
        return x.floor() if self.exact else math.floor(x)


def _reduce_into_f(a, b, x, test: _SideTest, limit: int):
    """Move the point of the geodesic (a, b) with real part x into F."""
    for _ in range(limit):
        n = test.floor(x + HALF)
        if n:
            a, b, x = a - n, b - n, x - n
        z2 = x * (a + b) - a * b
        if test.compare(z2, 1, certify=False) >= 0:
            return a, b, x
        a, b, x = -1 / a, -1 / b, -x / z2
    raise DomainError("could not reduce the starting point into the fundamental region")


def trace_crossings(g: GeodesicEndpoints, returns: int) -> List[str]:
    """
    Boundary crossings of the geodesic through F, in order.

    Events are 'R' (right vertical side, T^-1 applied), 'L' (left side, T applied) and
    'S' (circular side). Tracing stops after the given number of 'S' events. A hit of
    an elliptic corner counts as a vertical-side crossing.
    """
    test = _SideTest(g.is_exact)
    a, b = g.u, g.w
    if test.exact and (a.is_rational or b.is_rational):
        raise DomainError("geodesics ending at a rational point go to the cusp")
    if not test.exact:
        a, b = float(a), float(b)
    limit = get_settings().max_iterations
    a, b, x = _reduce_into_f(a, b, (a + b) / 2, test, limit)

    events: List[str] = []
    circle_hits = 0
    for _ in range(limit):
        if circle_hits >= returns:
            return events
        right = test.compare(a, b) < 0
        side = HALF if right else -HALF
        if test.compare((side - a) * (b - side), THREE_QUARTERS) >= 0:
            if right:
                a, b, x = a - 1, b - 1, -HALF
            else:
                a, b, x = a + 1, b + 1, HALF
            events.append('R' if right else 'L')
            continue
        s = a + b
        if test.compare(s, 0, certify=False) == 0:
            raise DomainError("geodesic symmetric about the imaginary axis never meets the arc")
        x_circle = (a * b + 1) / s
        if test.compare(a, 0, certify=False) == 0 or test.compare(b, 0, certify=False) == 0:
            raise DomainError("geodesic goes to the cusp")
        a, b, x = -1 / a, -1 / b, -x_circle
        events.append('S')
        circle_hits += 1
    raise DomainError(f"no return to the circular side within {limit} crossings")


def group_crossings(events: List[str]) -> Tuple[int, ...]:
    """Signed block lengths between consecutive circular hits; the leading partial block is dropped."""
    digits: List[int] = []
    count, sign, started = 0, 0, False
    for event in events:
        if event == 'S':
            if started:
                digits.append(sign * count)
            started, count, sign = True, 0, 0
        else:
            count += 1
            sign = 1 if event == 'R' else -1
    return tuple(digits)


def geometric_code(g: GeodesicEndpoints, terms: int) -> SymbolicCode:
    """
    First `terms` digits of the geometric code: +k for k consecutive right-side
    crossings, -k for k left-side crossings, one digit per excursion between hits of
    the circular side.

    Raises:
        UndecidableCrossing: For floating endpoints whose side test falls in the slop
        DomainError: For geodesics that go to the cusp
    """
    if terms < 0:
        raise DomainError("terms must be non-negative")
    if terms == 0:
        return SymbolicCode((), "geometric")
    events = trace_crossings(g, terms + 1)
    digits = group_crossings(events)
    logger.debug(f"traced {len(events)} crossings for {terms} geometric digits")
    return SymbolicCode(digits[:terms], "geometric")


def endpoints_from_periodic_code(code: SymbolicCode) -> GeodesicEndpoints:
    """w from the periodic block, u as the reciprocal of the reversed block's value."""
    if not code.digits:
        raise DomainError("periodic block must be nonempty")
    if any(d < 2 for d in code.digits):
        raise DomainError(f"periodic block digits must be >= 2, got {code.digits}")
    w = periodic_value(code.digits)
    u = 1 / periodic_value(tuple(reversed(code.digits)))
    g = GeodesicEndpoints(u, w)
    if not g.is_reduced:
        raise DomainError(f"block {code.digits} did not produce a reduced geodesic")
    return g


def is_positive(code: SymbolicCode) -> bool:
    """Admissibility of the code in Sigma_A (digits >= 3, no forbidden adjacent pair)."""
    if not code.digits:
        return True
    if min(code.digits) < 3:
        return False
    return Word(code.digits, periodic=code.periodic).is_admissible(TransitionRule.modular())


__all__ = [
    "GeodesicEndpoints", "SymbolicCode", "arithmetic_code", "geometric_code",
    "endpoints_from_periodic_code", "is_positive", "trace_crossings", "group_crossings",
]

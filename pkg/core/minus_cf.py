"""
Minus (backwards) continued fractions w = n1 - 1/(n2 - 1/(n3 - ...)) and the roof
function tau = 2 log w of the positive geodesic flow.

Sign convention: the expansion subtracts at every level, including the first one.
This is the only reading under which 2 log(c n1) <= tau <= 2 log n1 holds with
c = (3 + sqrt 5)/6; the "+" after n1 in the usual display of w is treated as a slip.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import DomainError
from core.intervals import (CertifiedInterval, round_down, round_down_array, round_up,
                            round_up_array)
from core.quadratic import QuadraticIrrational, attracting_fixed_point
from core.shift_core import Word

logger = logging.getLogger(__name__)

SQRT5 = QuadraticIrrational(0, 1, 5)
# supremum of 1/(n2 - 1/(n3 - ...)) over digits >= 3; fixed point of y -> 1/(3 - y)
Y_MAX_A = (3 - SQRT5) / 2
# c of the two-sided roof bound 2 log(c n1) <= tau <= 2 log n1
C_ROOF = (3 + SQRT5) / 6
LOG_C_ROOF = math.log(float(C_ROOF))

TailMode = Literal["empty", "worst_case", "periodic_extension"]


@dataclass(frozen=True)
class TailModel:
    """How the digits beyond a finite word are accounted for."""
    mode: TailMode = "worst_case"
    y_max: QuadraticIrrational = Y_MAX_A

    @classmethod
    def empty(cls) -> TailModel:
        return cls("empty")

    @classmethod
    def worst_case(cls) -> TailModel:
        """Tail range [0, (3 - sqrt 5)/2], valid for continuations with digits >= 3."""
        return cls("worst_case", Y_MAX_A)

    @classmethod
    def general(cls) -> TailModel:
        """Tail range [0, 1], valid for any continuation with digits >= 2."""
        return cls("worst_case", QuadraticIrrational(1))

    @classmethod
    def periodic(cls) -> TailModel:
        return cls("periodic_extension")


@dataclass(frozen=True)
class CFValue:
    """Enclosure of a minus continued fraction, with its exact value when known."""
    value: CertifiedInterval
    exact: Optional[QuadraticIrrational] = None
    finite: bool = False

    def to_dict(self) -> dict:
        data = self.value.to_dict()
        if self.exact is not None:
            data["exact"] = self.exact.to_dict()
        if self.finite:
            data["finite"] = True
        return data


class Expansion(NamedTuple):
    word: Word
    finite: bool


def _enclose(x: QuadraticIrrational) -> CertifiedInterval:
    return CertifiedInterval.around(float(x))


def word_matrix(digits: Sequence[int]) -> Tuple[int, int, int, int]:
    """Integer matrix of z -> n1 - 1/(n2 - ... - 1/(nk - 1/z))."""
    a, b, c, d = 1, 0, 0, 1
    for n in digits:
        # right-multiply by [[n, -1], [1, 0]]
        a, b, c, d = a * n + b, -a, c * n + d, -c
    return a, b, c, d


def periodic_value(digits: Sequence[int]) -> QuadraticIrrational:
    """Exact value of the purely periodic expansion (n1 ... nk)^infinity (root > 1)."""
    if any(n < 2 for n in digits):
        raise DomainError(f"minus continued fraction digits must be >= 2, got {tuple(digits)}")
    a, b, c, d = word_matrix(digits)
    w = attracting_fixed_point(a, b, c, d)
    if not w > 1:
        raise DomainError(f"periodic block {tuple(digits)} is parabolic (value {w})")
    return w


def _backward(digits: Sequence[int], y_lo: QuadraticIrrational,
              y_hi: QuadraticIrrational) -> Tuple[QuadraticIrrational, QuadraticIrrational]:
    """Exact endpoints of n1 - 1/(... - 1/(nk - y)) for y in [y_lo, y_hi]."""
    w_lo = digits[-1] - y_hi
    w_hi = digits[-1] - y_lo
    for n in reversed(digits[:-1]):
        if w_lo.sign() <= 0:
            raise ZeroDivisionError("finite expansion: backward evaluation hit zero")
        # z -> n - 1/z is increasing for z > 0
        w_lo, w_hi = n - 1 / w_lo, n - 1 / w_hi
    return w_lo, w_hi


def eval_minus_cf(digits: Union[Word, Sequence[int]], tail: TailModel = TailModel()) -> CFValue:
    """
    Enclose w = n1 - 1/(n2 - 1/(n3 - ...)) evaluated backwards from the deepest digit.

    Args:
        digits: Digit word (all digits >= 2; >= 3 for the Sigma_A tail enclosure)
        tail: Accounting for the digits beyond the word

    Returns:
        CFValue; exact is set for periodic extensions and for empty tails

    Raises:
        DomainError: For digits below 2, or a Sigma_A tail after a last digit below 3
    """
    word = digits if isinstance(digits, Word) else Word(tuple(digits))
    ds = word.digits
    if min(ds) < 2:
        raise DomainError(f"minus continued fraction digits must be >= 2, got {ds}")

    if tail.mode == "periodic_extension":
        w = periodic_value(ds)
        return CFValue(_enclose(w), exact=w)

    if tail.mode == "empty":
        try:
            w_lo, _ = _backward(ds, QuadraticIrrational(0), QuadraticIrrational(0))
        except ZeroDivisionError:
            logger.warning(f"finite expansion while evaluating {ds}")
            raise DomainError(f"finite expansion: {ds} evaluates through zero")
        return CFValue(_enclose(w_lo), exact=w_lo, finite=True)

    if tail.y_max == Y_MAX_A and ds[-1] < 3:
        raise DomainError(f"the digits >= 3 tail bound does not apply after digit {ds[-1]} in {ds}; "
                          f"use TailModel.general()")
    w_lo, w_hi = _backward(ds, QuadraticIrrational(0), tail.y_max)
    return CFValue(CertifiedInterval(round_down(float(w_lo)), round_up(float(w_hi))))


def tau(digits: Union[Word, Sequence[int]], tail: TailModel = TailModel()) -> CertifiedInterval:
    """Enclosure of the roof 2 log w on the cylinder (or periodic point) of the word."""
    word = digits if isinstance(digits, Word) else Word(tuple(digits))
    if min(word.digits) < 3:
        raise DomainError(f"roof function is defined on digits >= 3, got {word.digits}")
    value = eval_minus_cf(word, tail).value.log().scale(2.0)
    if tail.mode == "worst_case" and tail.y_max == Y_MAX_A:
        # both are enclosures of the same quantity
        box = tau_bounds(word.digits[0])
        value = CertifiedInterval(max(value.lower, box.lower), min(value.upper, box.upper))
    return value


def tau_bounds(n1: int) -> CertifiedInterval:
    """The coarse box [2 log(c n1), 2 log n1] for any point of the 1-cylinder of n1."""
    return CertifiedInterval(round_down(2.0 * (LOG_C_ROOF + math.log(n1))),
                             round_up(2.0 * math.log(n1)))


def tau_array(digits: np.ndarray, depth: np.ndarray, y_hi: np.ndarray,
              slop: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized roof enclosures for many words at once.

    Row i uses the digits digits[i, :depth[i]] and a tail y in [0, y_hi[i]]; every
    floating operation is rounded outward.

    Returns:
        (lower, upper) arrays of 2 log w
    """
    digits = np.asarray(digits, dtype=np.float64)
    depth = np.broadcast_to(np.asarray(depth), (len(digits),))
    y_hi = np.broadcast_to(np.asarray(y_hi, dtype=np.float64), (len(digits),))
    if np.any(depth < 1) or np.any(depth > digits.shape[1]):
        raise DomainError("roof depth must lie between 1 and the word length")
    w_lo = np.ones(len(digits))
    w_hi = np.ones(len(digits))
    for j in reversed(range(digits.shape[1])):
        d = digits[:, j]
        start = depth == j + 1
        step = depth > j + 1
        w_lo[start] = round_down_array(d[start] - y_hi[start], slop)
        w_hi[start] = d[start]
        w_lo[step] = round_down_array(d[step] - round_up_array(1.0 / w_lo[step], slop), slop)
        w_hi[step] = round_up_array(d[step] - round_down_array(1.0 / w_hi[step], slop), slop)
    lower = round_down_array(2.0 * round_down_array(np.log(w_lo), slop), slop)
    upper = round_up_array(2.0 * round_up_array(np.log(w_hi), slop), slop)
    return lower, upper


def _as_exact(w) -> QuadraticIrrational:
    if isinstance(w, QuadraticIrrational):
        return w
    if isinstance(w, float):
        if not math.isfinite(w):
            raise DomainError(f"cannot expand {w}")
        return QuadraticIrrational(Fraction(w))
    return QuadraticIrrational(Fraction(w))


def expand_minus_cf(w, max_digits: int) -> Expansion:
    """
    Minus continued fraction digits of w > 1.

    Recurrence: n = ceil(w), w <- 1/(n - w). An exact integer remainder ends the
    expansion with that integer as its last digit (5/2 -> (3, 2)). Floats are
    expanded as the exact rationals they represent.

    Returns:
        Expansion(word, finite); finite is True when the expansion terminated
    """
    x = _as_exact(w)
    if not x > 1:
        raise DomainError(f"minus continued fraction needs w > 1, got {float(x)}")
    if max_digits < 1:
        raise DomainError("max_digits must be at least 1")
    digits = []
    finite = False
    while len(digits) < max_digits:
        if x.is_integer:
            digits.append(int(x.p))
            finite = True
            break
        n = x.ceil()
        digits.append(n)
        x = 1 / (n - x)
    return Expansion(Word(tuple(digits)), finite)

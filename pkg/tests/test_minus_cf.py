"""
Minus continued fractions and the roof function.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from core.checks import random_admissible_word, random_periodic_blocks
from core.errors import DomainError
from core.intervals import CertifiedInterval
from core.minus_cf import (C_ROOF, Y_MAX_A, TailModel, eval_minus_cf, expand_minus_cf,
                           periodic_value, tau, tau_array, tau_bounds, word_matrix)
from core.quadratic import QuadraticIrrational
from core.shift_core import Word

SQRT3 = QuadraticIrrational(0, 1, 3)
SQRT5 = QuadraticIrrational(0, 1, 5)


# === eval_minus_cf ===

def test_all_three_periodic_value_is_exact():
    value = eval_minus_cf(Word((3,), periodic=True), TailModel.periodic())
    assert value.exact == (3 + SQRT5) / 2
    assert value.value.midpoint == pytest.approx(2.618034, abs=1e-6)


def test_all_four_periodic_value_is_exact():
    value = eval_minus_cf((4,), TailModel.periodic())
    assert value.exact == 2 + SQRT3
    assert value.value.midpoint == pytest.approx(3.732051, abs=1e-6)


@pytest.mark.parametrize("n", [3, 4, 7, 40])
def test_worst_case_tail_of_a_single_digit(n):
    value = eval_minus_cf((n,), TailModel.worst_case()).value
    assert value.contains(n - float(Y_MAX_A))
    assert value.contains(float(n))
    assert value.width == pytest.approx(float(Y_MAX_A), abs=1e-9)


def test_empty_tail_gives_the_finite_value():
    value = eval_minus_cf((3, 2), TailModel.empty())
    assert value.finite
    assert value.exact == Fraction(5, 2)


def test_digits_below_two_are_rejected():
    with pytest.raises(DomainError):
        eval_minus_cf((1, 3))


def test_digits_three_tail_needs_a_last_digit_from_three():
    with pytest.raises(DomainError):
        eval_minus_cf((4, 2))
    general = eval_minus_cf((4, 2), TailModel.general()).value
    assert general.contains(4 - 1 / 2) and general.contains(4 - 1 / 1)


def test_deeper_prefixes_never_widen():
    rng = np.random.default_rng(7)
    for _ in range(50):
        word = random_admissible_word(rng, 6, 20)
        widths = [eval_minus_cf(word[:j]).value.width for j in range(1, len(word) + 1)]
        assert all(b <= a + 1e-12 for a, b in zip(widths, widths[1:]))


def test_word_matrix_of_a_single_digit():
    assert word_matrix((4,)) == (4, -1, 1, 0)


def test_parabolic_block_is_rejected():
    with pytest.raises(DomainError):
        periodic_value((2,))


# === tau ===

def test_tau_of_periodic_points():
    assert tau((3,), TailModel.periodic()).midpoint == pytest.approx(1.924847, abs=1e-6)
    assert tau((4,), TailModel.periodic()).midpoint == pytest.approx(2.634370, abs=1e-6)


@pytest.mark.parametrize("word", [(3,), (6, 3), (4, 4, 4), (12, 7, 3, 9)])
def test_tau_lies_in_the_coarse_box(word):
    box = tau_bounds(word[0])
    assert box.contains(tau(word))


def test_coarse_box_constant():
    assert float(C_ROOF) == pytest.approx(0.872678, abs=1e-6)
    box = tau_bounds(5)
    assert box.lower == pytest.approx(2 * math.log(float(C_ROOF) * 5))
    assert box.upper == pytest.approx(2 * math.log(5))


def test_tau_needs_digits_from_three():
    with pytest.raises(DomainError):
        tau((2, 5))


def test_vectorized_roof_matches_scalar_enclosures():
    words = np.array([[6, 3], [4, 4], [9, 12]])
    lower, upper = tau_array(words, 2, float(Y_MAX_A))
    for row, lo, hi in zip(words.tolist(), lower, upper):
        scalar = eval_minus_cf(tuple(row)).value.log().scale(2.0)
        assert CertifiedInterval(lo, hi).intersects(scalar)


# === expand_minus_cf ===

def test_expansion_of_periodic_points():
    assert expand_minus_cf((3 + SQRT5) / 2, 5).word.digits == (3, 3, 3, 3, 3)
    assert expand_minus_cf(2 + SQRT3, 4).word.digits == (4, 4, 4, 4)


def test_terminating_expansion():
    expansion = expand_minus_cf(Fraction(5, 2), 4)
    assert expansion.word.digits == (3, 2)
    assert expansion.finite
    assert expand_minus_cf(2.5, 4).word.digits == (3, 2)


def test_expansion_needs_w_above_one():
    with pytest.raises(DomainError):
        expand_minus_cf(Fraction(1), 3)
    with pytest.raises(DomainError):
        expand_minus_cf(Fraction(3, 4), 3)


def test_expansion_round_trip_on_random_periodic_words():
    rng = np.random.default_rng(0)
    for block in random_periodic_blocks(rng, 200, max_length=8, max_digit=12):
        exact = eval_minus_cf(block, TailModel.periodic()).exact
        digits = expand_minus_cf(exact, len(block)).word.digits
        assert Word(digits).canonical_rotation() == Word(block).canonical_rotation()

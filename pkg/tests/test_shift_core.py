"""
Transition rules, truncations, periodic words and the BIP property.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import DomainError, OracleScaleExceeded
from core.shift_core import (TransitionRule, Word, admissible_words, check_bip, is_allowed,
                             periodic_words, truncate, word_array)


# === is_allowed ===

def test_forbidden_pairs_of_the_modular_rule(modular):
    assert not is_allowed(modular, 3, 3)
    assert is_allowed(modular, 4, 4)
    assert is_allowed(modular, 6, 3)


def test_allowed_is_not_symmetric_in_its_arguments(modular):
    assert is_allowed(modular, 3, 6) and is_allowed(modular, 6, 3)
    assert not is_allowed(modular, 3, 5)
    assert is_allowed(modular, 5, 4)


def test_symbol_below_alphabet_is_a_domain_error(modular):
    with pytest.raises(DomainError):
        is_allowed(modular, 2, 4)


def test_symbol_above_configured_cap(modular, settings_override):
    settings_override(max_symbol=100)
    with pytest.raises(DomainError):
        is_allowed(modular, 101, 4)


# === TransitionRule ===

def test_rule_json_round_trip(modular):
    assert TransitionRule.from_json(modular.to_json()) == modular


def test_rule_rejects_zero_row():
    with pytest.raises(ValidationError):
        TransitionRule(alphabet_min=3, alphabet_max=3, forbidden_pairs=[(3, 3)])


def test_rule_rejects_pairs_outside_alphabet():
    with pytest.raises(ValidationError):
        TransitionRule(alphabet_min=3, forbidden_pairs=[(2, 5)])


def test_full_subshift_min(modular):
    assert modular.full_subshift_min() == 6
    assert TransitionRule.full_shift(0).full_subshift_min() == 0


# === truncate ===

def test_truncate_at_four_is_not_irreducible(modular):
    shift = truncate(modular, 4)
    assert shift.symbols == (3, 4)
    assert shift.adjacency.tolist() == [[0, 0], [0, 1]]
    assert not shift.is_irreducible
    assert shift.recurrent_symbols == (4,)


def test_truncate_at_five_keeps_symbol_three(modular):
    shift = truncate(modular, 5)
    assert shift.symbols == (3, 4, 5)
    assert shift.recurrent_symbols == (4, 5)
    assert shift.recurrent_shift().adjacency.tolist() == [[1, 1], [1, 1]]


@pytest.mark.parametrize("N", [6, 7, 10, 25, 50])
def test_truncations_from_six_are_irreducible_and_aperiodic(modular, N):
    shift = truncate(modular, N)
    assert shift.adjacency.shape == (N - 2, N - 2)
    assert shift.is_irreducible
    assert shift.is_aperiodic


def test_truncate_below_alphabet(modular):
    with pytest.raises(DomainError):
        truncate(modular, 2)


def test_truncate_respects_alphabet_max():
    rule = TransitionRule.full_shift(0, 3)
    assert truncate(rule, 10).symbols == (0, 1, 2, 3)


# === Words ===

def test_periodic_word_checks_wrap_around(modular):
    assert Word((6, 3), periodic=True).is_admissible(modular)
    assert not Word((4, 3), periodic=True).is_admissible(modular)
    assert not Word((3, 6, 3), periodic=True).is_admissible(modular)


def test_canonical_rotation():
    assert Word((6, 3, 4)).canonical_rotation() == (3, 4, 6)


def test_empty_word_is_rejected():
    with pytest.raises(DomainError):
        Word(())


# === periodic_words ===

def test_periodic_words_on_two_block(two_block):
    words = {w.digits for w in periodic_words(two_block, 2)}
    assert words == {(4, 4), (4, 5), (5, 4), (5, 5)}


def test_periodic_words_of_period_one(modular):
    assert [w.digits for w in periodic_words(truncate(modular, 4), 1)] == [(4,)]
    assert {w.digits for w in periodic_words(truncate(modular, 6), 1)} == {(4,), (5,), (6,)}


@pytest.mark.parametrize("n", range(1, 7))
def test_periodic_word_count_equals_trace(modular, n):
    shift = truncate(modular, 7)
    adjacency = shift.adjacency.astype(np.int64)
    trace = int(np.trace(np.linalg.matrix_power(adjacency, n)))
    words = periodic_words(shift, n)
    assert len(words) == trace
    assert len({w.digits for w in words}) == len(words)


def test_periodic_words_respect_cap(modular, settings_override):
    settings_override(max_oracle_words=100)
    with pytest.raises(OracleScaleExceeded):
        periodic_words(truncate(modular, 8), 3)


# === check_bip ===

def test_bip_examples(modular):
    assert check_bip(modular, {6})
    assert not check_bip(modular, {3})
    assert check_bip(TransitionRule.full_shift(0), {0})


def test_bip_needs_candidates(modular):
    with pytest.raises(DomainError):
        check_bip(modular, set())


# === word_array ===

def test_word_array_counts_admissible_pairs(modular):
    words = word_array(truncate(modular, 6), 2)
    assert words.shape == (11, 2)
    assert (3, 3) not in set(map(tuple, words.tolist()))


def test_admissible_words_are_tuples(two_block):
    assert sorted(admissible_words(two_block, 2)) == [(4, 4), (4, 5), (5, 4), (5, 5)]


def test_word_array_respects_cap(modular):
    with pytest.raises(OracleScaleExceeded):
        word_array(truncate(modular, 30), 4, cap=1000)

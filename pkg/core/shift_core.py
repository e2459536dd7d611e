"""
Countable Markov shifts described by finitely many forbidden transitions.

A TransitionRule is the 0/1 matrix B(i, j) on the alphabet {alphabet_min, ...}
(optionally capped by alphabet_max) that equals 1 except on a finite forbidden set.
Finite truncations (FiniteShift) carry the restricted adjacency, their strongly
connected structure (networkx) and the recurrent class used by the pressure code.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import sparse
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.errors import DomainError, OracleScaleExceeded
from settings_loader import get_settings

logger = logging.getLogger(__name__)

# (3,3), (3,4), (3,5), (4,3), (5,3): the five Platonic solids {p, q} with 1/p + 1/q > 1/2
MODULAR_FORBIDDEN = frozenset({(3, 3), (3, 4), (3, 5), (4, 3), (5, 3)})


class TransitionRule(BaseModel):
    """Transition matrix given by an alphabet and a finite set of forbidden pairs."""

    model_config = ConfigDict(frozen=True)

    alphabet_min: int = 0
    forbidden_pairs: FrozenSet[Tuple[int, int]] = Field(default_factory=frozenset)
    alphabet_max: Optional[int] = None

    @field_validator("forbidden_pairs", mode="before")
    @classmethod
    def _pairs(cls, value):
        return frozenset(tuple(int(x) for x in pair) for pair in value)

    @model_validator(mode="after")
    def _no_zero_rows_or_columns(self) -> TransitionRule:
        if self.alphabet_max is not None and self.alphabet_max < self.alphabet_min:
            raise ValueError("alphabet_max below alphabet_min")
        for a, b in self.forbidden_pairs:
            if a < self.alphabet_min or b < self.alphabet_min:
                raise ValueError(f"forbidden pair {(a, b)} outside the alphabet")
        if self.alphabet_max is None:
            # an infinite alphabet minus finitely many pairs leaves every row and column alive
            return self
        symbols = range(self.alphabet_min, self.alphabet_max + 1)
        for s in symbols:
            row = any((s, t) not in self.forbidden_pairs for t in symbols)
            col = any((t, s) not in self.forbidden_pairs for t in symbols)
            if not (row and col):
                raise ValueError(f"symbol {s} has an identically zero row or column")
        return self

    @classmethod
    def modular(cls) -> TransitionRule:
        """The matrix A on {3, 4, 5, ...} coding positive geodesics."""
        return cls(alphabet_min=3, forbidden_pairs=MODULAR_FORBIDDEN)

    @classmethod
    def full_shift(cls, alphabet_min: int = 0, alphabet_max: Optional[int] = None) -> TransitionRule:
        return cls(alphabet_min=alphabet_min, alphabet_max=alphabet_max)

    @classmethod
    def from_json(cls, text: str) -> TransitionRule:
        return cls.model_validate_json(text)

    def to_json(self) -> str:
        return json.dumps({
            "alphabet_min": self.alphabet_min,
            "forbidden_pairs": sorted([list(p) for p in self.forbidden_pairs]),
            "alphabet_max": self.alphabet_max,
        })

    @property
    def is_countable(self) -> bool:
        return self.alphabet_max is None

    def full_subshift_min(self) -> int:
        """Smallest symbol m such that every symbol >= m has no forbidden neighbour."""
        involved = [s for pair in self.forbidden_pairs for s in pair]
        return max(involved) + 1 if involved else self.alphabet_min


def is_allowed(rule: TransitionRule, a: int, b: int) -> bool:
    """B(a, b) for the rule; symbols above alphabet_max are simply not allowed."""
    cap = get_settings().max_symbol
    for s in (a, b):
        if s < rule.alphabet_min:
            raise DomainError(f"symbol {s} below alphabet_min {rule.alphabet_min}")
        if s > cap:
            raise DomainError(f"symbol {s} above the configured cap {cap}")
    if rule.alphabet_max is not None and (a > rule.alphabet_max or b > rule.alphabet_max):
        return False
    return (a, b) not in rule.forbidden_pairs


@dataclass(frozen=True)
class Word:
    """Nonempty digit sequence; periodic words also constrain the wrap-around pair."""
    digits: Tuple[int, ...]
    periodic: bool = False

    def __post_init__(self):
        digits = tuple(int(x) for x in self.digits)
        if not digits:
            raise DomainError("a word needs at least one digit")
        object.__setattr__(self, 'digits', digits)

    def __len__(self) -> int:
        return len(self.digits)

    def pairs(self) -> List[Tuple[int, int]]:
        pairs = list(zip(self.digits, self.digits[1:]))
        if self.periodic:
            pairs.append((self.digits[-1], self.digits[0]))
        return pairs

    def is_admissible(self, rule: TransitionRule) -> bool:
        if min(self.digits) < rule.alphabet_min:
            return False
        return all(is_allowed(rule, a, b) for a, b in self.pairs())

    def canonical_rotation(self) -> Tuple[int, ...]:
        """Lexicographically minimal cyclic rotation of the digits."""
        n = len(self.digits)
        return min(self.digits[i:] + self.digits[:i] for i in range(n))

    def __str__(self) -> str:
        return ",".join(str(d) for d in self.digits)


@dataclass(frozen=True)
class FiniteShift:
    """Restriction of a TransitionRule to a finite ordered symbol list."""
    rule: TransitionRule
    symbols: Tuple[int, ...]
    adjacency: np.ndarray = field(compare=False, repr=False)

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.symbols)}

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.symbols)
        rows, cols = np.nonzero(self.adjacency)
        g.add_edges_from((self.symbols[i], self.symbols[j]) for i, j in zip(rows, cols))
        return g

    @cached_property
    def is_irreducible(self) -> bool:
        return nx.is_strongly_connected(self.graph) and self.graph.number_of_edges() > 0

    @cached_property
    def is_aperiodic(self) -> bool:
        return self.is_irreducible and nx.is_aperiodic(self.graph)

    @cached_property
    def recurrent_symbols(self) -> Tuple[int, ...]:
        """
        The maximal irreducible piece: the strongly connected component carrying a cycle
        with the largest topological entropy (ties broken by size, then smallest symbol).
        """
        best, best_key = (), None
        for component in nx.strongly_connected_components(self.graph):
            members = sorted(component)
            sub = self.graph.subgraph(members)
            if sub.number_of_edges() == 0:
                continue
            idx = [self.index[s] for s in members]
            radius = float(max(abs(np.linalg.eigvals(self.adjacency[np.ix_(idx, idx)]))))
            key = (round(radius, 12), len(members), -members[0])
            if best_key is None or key > best_key:
                best, best_key = tuple(members), key
        return best

    def restrict(self, symbols: Sequence[int]) -> FiniteShift:
        idx = [self.index[s] for s in symbols]
        return FiniteShift(self.rule, tuple(symbols), self.adjacency[np.ix_(idx, idx)])

    def recurrent_shift(self) -> FiniteShift:
        return self.restrict(self.recurrent_symbols)

    def allowed(self, a: int, b: int) -> bool:
        return bool(self.adjacency[self.index[a], self.index[b]])


def truncate(rule: TransitionRule, max_symbol: int) -> FiniteShift:
    """
    Restrict the rule to symbols alphabet_min..max_symbol.

    Args:
        rule: The transition rule
        max_symbol: Largest retained symbol

    Returns:
        FiniteShift with restricted adjacency (non-recurrent symbols are kept)
    """
    if max_symbol < rule.alphabet_min:
        raise DomainError(f"max_symbol {max_symbol} below alphabet_min {rule.alphabet_min}")
    if rule.alphabet_max is not None:
        max_symbol = min(max_symbol, rule.alphabet_max)
    symbols = tuple(range(rule.alphabet_min, max_symbol + 1))
    n = len(symbols)
    adjacency = np.ones((n, n), dtype=np.int8)
    base = rule.alphabet_min
    for a, b in rule.forbidden_pairs:
        if a <= max_symbol and b <= max_symbol:
            adjacency[a - base, b - base] = 0
    adjacency.setflags(write=False)
    return FiniteShift(rule, symbols, adjacency)


def periodic_words(shift: FiniteShift, n: int) -> List[Word]:
    """
    All length-n words whose cyclic extension is admissible, each exactly once.

    Raises:
        OracleScaleExceeded: If |symbols|^n exceeds settings.max_oracle_words
    """
    if n < 1:
        raise DomainError("period must be at least 1")
    cap = get_settings().max_oracle_words
    if len(shift.symbols) ** n > cap:
        raise OracleScaleExceeded(
            f"oracle scale exceeded: {len(shift.symbols)}^{n} candidate words > cap {cap}")

    successors = {s: [t for t in shift.symbols if shift.allowed(s, t)] for s in shift.symbols}
    words: List[Word] = []

    def extend(prefix: List[int]):
        if len(prefix) == n:
            if shift.allowed(prefix[-1], prefix[0]):
                words.append(Word(tuple(prefix), periodic=True))
            return
        for t in successors[prefix[-1]]:
            prefix.append(t)
            extend(prefix)
            prefix.pop()

    for s in shift.symbols:
        extend([s])
    return words


def check_bip(rule: TransitionRule, candidates: Sequence[int]) -> bool:
    """
    Decide the big-images-and-preimages property for a finite candidate set.

    Only symbols up to full_subshift_min() can lack a connection; every larger symbol
    behaves like full_subshift_min() itself, so checking up to it is exhaustive.
    """
    candidates = sorted(set(candidates))
    if not candidates:
        raise DomainError("BIP candidate set must be nonempty")
    if candidates[0] < rule.alphabet_min:
        return False
    if rule.alphabet_max is not None:
        if candidates[-1] > rule.alphabet_max:
            return False
        top = rule.alphabet_max
    else:
        top = max(rule.full_subshift_min(), candidates[-1]) + 1
    for a in range(rule.alphabet_min, top + 1):
        incoming = any(is_allowed(rule, b, a) for b in candidates)
        outgoing = any(is_allowed(rule, a, b) for b in candidates)
        if not (incoming and outgoing):
            logger.debug(f"BIP fails at symbol {a} for candidates {candidates}")
            return False
    return True


def word_array(shift: FiniteShift, length: int, cap: Optional[int] = None) -> np.ndarray:
    """
    All admissible words of the given length as rows of symbols.

    Raises:
        OracleScaleExceeded: If the number of words exceeds the cap (settings.max_states)
    """
    if length < 1:
        raise DomainError("word length must be at least 1")
    cap = get_settings().max_states if cap is None else cap
    adjacency = sparse.csr_matrix(shift.adjacency)
    indptr, indices = adjacency.indptr, adjacency.indices
    words = np.arange(len(shift.symbols))[:, None]
    for _ in range(length - 1):
        last = words[:, -1]
        counts = indptr[last + 1] - indptr[last]
        total = int(counts.sum())
        if total > cap:
            raise OracleScaleExceeded(f"oracle scale exceeded: {total} words of length "
                                      f"{words.shape[1] + 1} > cap {cap}")
        rows = np.repeat(np.arange(len(words)), counts)
        offsets = np.repeat(indptr[last] - (np.cumsum(counts) - counts), counts)
        words = np.column_stack([words[rows], indices[offsets + np.arange(total)]])
    return np.asarray(shift.symbols, dtype=np.int64)[words]


def admissible_words(shift: FiniteShift, length: int) -> List[Tuple[int, ...]]:
    """All admissible (non-cyclic) words of the given length over the shift's symbols."""
    return [tuple(int(x) for x in row) for row in word_array(shift, length)]


__all__ = [
    "MODULAR_FORBIDDEN", "TransitionRule", "Word", "FiniteShift", "is_allowed", "truncate",
    "periodic_words", "check_bip", "admissible_words", "word_array",
]

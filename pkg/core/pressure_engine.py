"""
Gurevich pressure of cylinder potentials on countable Markov shifts.

Two-sided enclosures come from finite weighted word matrices:
    - lower: log spectral radius of the truncation to symbols <= N, with cylinder lower bounds
    - upper: the same matrix with every symbol > N lumped into one super-symbol whose weight
      is a certified bound of the tail series sum_{n > N} exp(sup of the potential on [n])
Divergence of the 1-cylinder series on the full sub-shift certifies +infinity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Literal, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import logsumexp

from core.errors import DegenerateTruncation, DomainError, OracleScaleExceeded
from core.intervals import (CertifiedInterval, round_down, round_down_array, round_up,
                            round_up_array)
from core.minus_cf import LOG_C_ROOF, Y_MAX_A, tau_array
from core.series import PowerLogSeries
from core.shift_core import FiniteShift, TransitionRule, periodic_words, truncate, word_array
from settings_loader import get_settings

logger = logging.getLogger(__name__)

# stands for every symbol above the truncation level in lumped matrices
STAR = -1
Y_MAX_UP = round_up(float(Y_MAX_A))


class CylinderPotential(BaseModel):
    """
    Potential tau_coef * tau + log_coef * log n1 + loglog_coef * log log n1
    + linear_coef * n1 + constant, read on cylinders of the given depth.

    table overrides the non-roof part on listed 1-cylinders; a hoelder bound (K, theta)
    widens table entries by K * theta^depth. With midpoint set, every cylinder interval
    collapses to its midpoint (the locally constant potential used by the oracle).
    """

    model_config = ConfigDict(frozen=True)

    tau_coef: float = 0.0
    log_coef: float = 0.0
    loglog_coef: float = 0.0
    linear_coef: float = 0.0
    constant: float = 0.0
    table: Dict[int, float] = Field(default_factory=dict)
    depth: int = Field(default=1, ge=1, le=8)
    hoelder: Optional[Tuple[float, float]] = None
    midpoint: bool = False

    @field_validator("hoelder")
    @classmethod
    def _hoelder(cls, value):
        if value is not None and (value[0] < 0 or not 0 < value[1] < 1):
            raise ValueError("hoelder bound needs K >= 0 and 0 < theta < 1")
        return value

    @classmethod
    def zero(cls, depth: int = 1) -> CylinderPotential:
        return cls(depth=depth)

    @classmethod
    def minus_t_tau(cls, t: float, depth: int = 1) -> CylinderPotential:
        return cls(tau_coef=-t, depth=depth)

    @classmethod
    def power_log(cls, a: float, b: float = 0.0, depth: int = 1) -> CylinderPotential:
        """-a log n1 - b log log n1."""
        return cls(log_coef=-a, loglog_coef=-b, depth=depth)

    @classmethod
    def from_series(cls, series: PowerLogSeries) -> CylinderPotential:
        """The locally constant potential log lambda_{n1} of a weight family."""
        return cls(constant=series.log_scale, log_coef=series.power,
                   loglog_coef=series.log_power, linear_coef=series.rate)

    def shift(self, a: float) -> CylinderPotential:
        return self.model_copy(update={"constant": self.constant + a})

    def plus_tau(self, s: float) -> CylinderPotential:
        return self.model_copy(update={"tau_coef": self.tau_coef + s})

    def at_depth(self, depth: int) -> CylinderPotential:
        return self.model_copy(update={"depth": depth})

    def at_midpoints(self) -> CylinderPotential:
        return self.model_copy(update={"midpoint": True})

    @property
    def exponents(self) -> Tuple[float, float, float]:
        """(A, B, G) with exp(potential on [n]) of order n^A (log n)^B exp(G n)."""
        return 2.0 * self.tau_coef + self.log_coef, self.loglog_coef, self.linear_coef

    @property
    def min_symbol(self) -> int:
        if self.tau_coef:
            return 3
        if self.loglog_coef:
            return 2
        return 1 if self.log_coef else 0

    @property
    def is_locally_constant(self) -> bool:
        return self.tau_coef == 0 or self.midpoint

    def _check_symbols(self, smallest: int):
        if smallest < self.min_symbol and not (set(range(smallest, self.min_symbol)) <= set(self.table)):
            raise DomainError(f"potential needs symbols >= {self.min_symbol}, got {smallest}")

    def base_bounds(self, n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Enclosure of the non-roof part on the 1-cylinders of the symbols n."""
        n = np.asarray(n, dtype=np.float64)
        value = np.full(n.shape, self.constant, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.log_coef:
                value += self.log_coef * np.log(n)
            if self.loglog_coef:
                value += self.loglog_coef * np.log(np.log(n))
        if self.linear_coef:
            value += self.linear_coef * n
        lo, hi = round_down_array(value), round_up_array(value)
        if self.table:
            width = 0.0 if self.hoelder is None else self.hoelder[0] * self.hoelder[1] ** self.depth
            for symbol, entry in self.table.items():
                mask = n == symbol
                lo[mask] = round_down(entry - width)
                hi[mask] = round_up(entry + width)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("potential is not finite on every cylinder")
        return lo, hi

    def word_bounds(self, words: np.ndarray, concrete: Optional[np.ndarray] = None,
                    y_hi: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Enclosures on the cylinders of many words (rows of at least `depth` symbols).

        Args:
            words: Word rows; only the first `depth` columns are read
            concrete: Number of leading actual digits per row (later ones are lumped)
            y_hi: Tail range per row for the roof evaluation

        Returns:
            (lower, upper) arrays
        """
        words = np.asarray(words)
        if words.shape[1] < self.depth:
            raise DomainError(f"words of length {words.shape[1]} are shorter than depth {self.depth}")
        lo, hi = self.base_bounds(words[:, 0])
        if self.tau_coef:
            depth = np.full(len(words), self.depth) if concrete is None else np.minimum(concrete, self.depth)
            tails = np.full(len(words), Y_MAX_UP) if y_hi is None else y_hi
            if np.any(words[:, 0] < 3):
                raise DomainError("roof function is defined on digits >= 3")
            t_lo, t_hi = tau_array(words[:, :self.depth], depth, tails)
            s = self.tau_coef
            lo = round_down_array(lo + round_down_array(s * (t_lo if s > 0 else t_hi)))
            hi = round_up_array(hi + round_up_array(s * (t_hi if s > 0 else t_lo)))
        if self.midpoint:
            mid = 0.5 * (lo + hi)
            return mid, mid.copy()
        return lo, hi

    def cylinder_value(self, word) -> CertifiedInterval:
        digits = tuple(word.digits if hasattr(word, "digits") else word)
        row = np.asarray([digits[:self.depth]], dtype=np.int64)
        if row.shape[1] < self.depth:
            raise DomainError(f"cylinder word shorter than depth {self.depth}")
        lo, hi = self.word_bounds(row)
        return CertifiedInterval(float(lo[0]), float(hi[0]))

    def values(self, shift: FiniteShift) -> Dict[Tuple[int, ...], CertifiedInterval]:
        """Cylinder intervals on every admissible depth-word of a truncation."""
        words = word_array(shift, self.depth)
        lo, hi = self.word_bounds(words)
        return {tuple(int(x) for x in w): CertifiedInterval(float(a), float(b))
                for w, a, b in zip(words, lo, hi)}

    def _series(self, start: int, upper: bool) -> PowerLogSeries:
        A, B, G = self.exponents
        s = self.tau_coef
        # tau lies in [2 log(c n), 2 log n] on the 1-cylinder of n
        c_shift = 2.0 * s * LOG_C_ROOF if (s < 0) == upper and s != 0 else 0.0
        log_scale = self.constant + c_shift
        log_scale = round_up(log_scale) if upper else round_down(log_scale)
        return PowerLogSeries(log_scale=log_scale, power=A, log_power=B, rate=G,
                              start=max(start, self.min_symbol, 2 if B else 0, 1 if A else 0))

    def sup_series(self, start: int) -> PowerLogSeries:
        """Series of exp(sup of the potential on [n]) for n >= start (table entries excluded)."""
        return self._series(start, upper=True)

    def inf_series(self, start: int) -> PowerLogSeries:
        return self._series(start, upper=False)

    def describe(self) -> dict:
        return self.model_dump(exclude_defaults=True)


class PotentialDescriptor(BaseModel):
    """JSON form of a potential: {"depth", "family", "params", "cutoff"}."""

    depth: int = Field(default=1, ge=1, le=8)
    family: Literal["tau", "power_log", "constant", "table", "geometric"]
    params: dict = Field(default_factory=dict)
    cutoff: Optional[int] = None

    def to_potential(self) -> CylinderPotential:
        p = self.params
        t = float(p.get("t", 0.0))
        if self.family == "tau":
            pot = CylinderPotential(tau_coef=float(p.get("coef", 1.0)) if "t" not in p else 0.0)
        elif self.family == "power_log":
            pot = CylinderPotential.power_log(float(p.get("a", 0.0)), float(p.get("b", 0.0)))
        elif self.family == "constant":
            pot = CylinderPotential(constant=float(p.get("value", 0.0)))
        elif self.family == "geometric":
            series = PowerLogSeries.geometric(float(p["ratio"]), float(p.get("scale", 1.0)))
            pot = CylinderPotential.from_series(series)
        else:
            tail = p.get("tail", {})
            pot = CylinderPotential(
                table={int(k): float(v) for k, v in p.get("values", {}).items()},
                log_coef=-float(tail.get("a", 0.0)), loglog_coef=-float(tail.get("b", 0.0)),
                constant=float(tail.get("constant", 0.0)),
                hoelder=tuple(p["hoelder"]) if "hoelder" in p else None)
        return pot.plus_tau(-t).at_depth(self.depth)


@dataclass(frozen=True)
class PressureResult:
    """A pressure enclosure, or +infinity together with its divergence witness."""
    value: Optional[CertifiedInterval]
    witness: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def infinity(cls, witness: dict, **diagnostics) -> PressureResult:
        return cls(None, witness, diagnostics)

    @property
    def infinite(self) -> bool:
        return self.value is None

    @property
    def lower(self) -> float:
        return math.inf if self.value is None else self.value.lower

    @property
    def upper(self) -> float:
        return math.inf if self.value is None else self.value.upper

    def to_dict(self) -> dict:
        data = {"infinite": True, "witness": self.witness} if self.infinite else self.value.to_dict()
        data.update(self.diagnostics)
        return data


class PerronResult(NamedTuple):
    log_lower: float
    log_upper: float
    iterations: int
    converged: bool
    vector: np.ndarray


class WeightedWordMatrix:
    """
    M[s, s'] = exp(log_weight[s]) when the last K-1 symbols of s are the first K-1 of s'.

    Products group states by their (K-1)-prefix, so M v costs O(states).
    """

    def __init__(self, words: np.ndarray, log_weights: np.ndarray, aperiodic: bool = True):
        words = np.asarray(words)
        states, K = words.shape
        if K < 2:
            raise DomainError("word states need length >= 2")
        cap = get_settings().max_states
        if states > cap:
            raise OracleScaleExceeded(f"{states} states exceed max_states {cap}")
        keys = np.concatenate([words[:, :-1], words[:, 1:]])
        _, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        self.words = words
        self.prefix_idx = inverse[:states]
        self.suffix_idx = inverse[states:]
        self.n_keys = int(inverse.max()) + 1
        log_weights = np.asarray(log_weights, dtype=np.float64)
        self.log_scale = float(np.max(log_weights))
        self.weights = np.exp(log_weights - self.log_scale)
        self.aperiodic = aperiodic
        self.max_degree = int(np.bincount(self.prefix_idx, minlength=self.n_keys).max())

    @property
    def size(self) -> int:
        return len(self.words)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        grouped = np.bincount(self.prefix_idx, weights=v, minlength=self.n_keys)
        return self.weights * grouped[self.suffix_idx]

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        grouped = np.bincount(self.suffix_idx, weights=self.weights * v, minlength=self.n_keys)
        return grouped[self.prefix_idx]

    def dense(self) -> np.ndarray:
        connect = self.suffix_idx[:, None] == self.prefix_idx[None, :]
        return np.where(connect, self.weights[:, None], 0.0)

    def perron(self, tol: Optional[float] = None, left: bool = False) -> PerronResult:
        """
        Power iteration with Collatz-Wielandt bracketing of the spectral radius.

        The running bounds are max of the minimum ratios and min of the maximum ratios;
        they enclose rho(M) at every step, so a non-converged run is still valid.
        """
        settings = get_settings()
        tol = settings.power_tol if tol is None else tol
        apply = self.rmatvec if left else self.matvec
        v = np.ones(self.size)
        best_lo, best_hi = 0.0, math.inf
        converged = False
        iterations = 0
        for iterations in range(1, settings.max_iterations + 1):
            mv = apply(v)
            ratios = mv / v
            lo, hi = float(ratios.min()), float(ratios.max())
            assert lo <= hi
            best_lo, best_hi = max(best_lo, lo), min(best_hi, hi)
            if best_hi <= 0:
                raise DegenerateTruncation("weighted matrix is nilpotent")
            if best_lo > 0 and math.log(best_hi) - math.log(best_lo) <= tol:
                converged = True
                v = mv
                break
            v = mv if self.aperiodic else mv + v
            v = np.maximum(v / v.max(), 1e-300)
        if not converged:
            logger.warning(f"⚠️ power iteration stopped after {iterations} steps with gap "
                           f"{math.log(best_hi) - math.log(max(best_lo, 1e-300)):.3e}")
        err = (self.max_degree + 4) * np.finfo(float).eps
        log_lo = -math.inf if best_lo <= 0 else round_down(math.log(best_lo) - err + self.log_scale)
        log_hi = round_up(math.log(best_hi) + err + self.log_scale)
        return PerronResult(log_lo, log_hi, iterations, converged, v / v.sum())

    def log_trace_power(self, n: int) -> float:
        """log trace(M^n) by scaled repeated multiplication of the dense matrix."""
        m = self.dense()
        product = np.eye(self.size)
        log_factor = 0.0
        for _ in range(n):
            product = product @ m
            top = product.max()
            if top <= 0:
                return -math.inf
            product /= top
            log_factor += math.log(top)
        trace = float(np.trace(product))
        if trace <= 0:
            return -math.inf
        return math.log(trace) + log_factor + n * self.log_scale


class TruncatedPressure(NamedTuple):
    value: CertifiedInterval
    lower: PerronResult
    upper: PerronResult
    states: int
    word_length: int


def word_length(pot: CylinderPotential) -> int:
    return max(pot.depth, 2)


def build_matrix(shift: FiniteShift, pot: CylinderPotential,
                 which: Literal["lower", "upper", "midpoint"] = "midpoint") -> WeightedWordMatrix:
    """Weighted word matrix of a potential on a (recurrent) truncation."""
    pot._check_symbols(min(shift.symbols))
    words = word_array(shift, word_length(pot))
    lo, hi = pot.word_bounds(words)
    weights = {"lower": lo, "upper": hi, "midpoint": 0.5 * (lo + hi)}[which]
    return WeightedWordMatrix(words, weights, aperiodic=shift.is_aperiodic)


def truncated_pressure(shift: FiniteShift, pot: CylinderPotential,
                       tol: Optional[float] = None) -> TruncatedPressure:
    """pressure_truncated with its power-iteration diagnostics."""
    recurrent = shift.recurrent_shift()
    if not recurrent.symbols:
        raise DegenerateTruncation(f"truncation on {shift.symbols[0]}..{shift.symbols[-1]} has no cycle")
    pot._check_symbols(min(recurrent.symbols))
    words = word_array(recurrent, word_length(pot))
    lo, hi = pot.word_bounds(words)
    lower_matrix = WeightedWordMatrix(words, lo, aperiodic=recurrent.is_aperiodic)
    lower = lower_matrix.perron(tol)
    if np.array_equal(lo, hi):
        upper = lower
    else:
        upper = WeightedWordMatrix(words, hi, aperiodic=recurrent.is_aperiodic).perron(tol)
    value = CertifiedInterval(lower.log_lower, max(upper.log_upper, lower.log_lower))
    return TruncatedPressure(value, lower, upper, len(words), words.shape[1])


def pressure_truncated(shift: FiniteShift, pot: CylinderPotential,
                       tol: Optional[float] = None) -> CertifiedInterval:
    """
    Enclosure of the pressure of the truncation's maximal irreducible piece.

    Raises:
        DegenerateTruncation: If the truncation carries no cycle
    """
    return truncated_pressure(shift, pot, tol).value


def pressure_periodic_oracle(shift: FiniteShift, pot: CylinderPotential, n: int) -> float:
    """
    (1/n) log of the sum over cyclically admissible length-n words of exp(cyclic Birkhoff
    sum of the potential's cylinder midpoints).

    The trace of the n-th power of the midpoint word matrix counts the periodic orbits
    when the dense matrix fits the cap; otherwise periodic_words are enumerated.

    Raises:
        OracleScaleExceeded: If neither the enumeration nor the dense matrix fits the cap
    """
    if n < 1:
        raise DomainError("period must be at least 1")
    cap = get_settings().max_oracle_words
    pot._check_symbols(min(shift.symbols))
    matrix = build_matrix(shift, pot, "midpoint")
    if matrix.size ** 2 <= cap:
        log_trace = matrix.log_trace_power(n)
        if not math.isfinite(log_trace):
            raise DegenerateTruncation(f"no periodic words of length {n}")
        return log_trace / n
    if len(shift.symbols) ** n <= cap:
        words = periodic_words(shift, n)
        if not words:
            raise DegenerateTruncation(f"no periodic words of length {n}")
        cyclic = np.asarray([w.digits for w in words], dtype=np.int64)
        columns = (np.arange(n)[:, None] + np.arange(pot.depth)[None, :]) % n
        windows = cyclic[:, columns].reshape(-1, pot.depth)
        lo, hi = pot.word_bounds(windows)
        sums = (0.5 * (lo + hi)).reshape(len(words), n).sum(axis=1)
        return float(logsumexp(sums)) / n
    raise OracleScaleExceeded(
        f"oracle scale exceeded: {len(shift.symbols)}^{n} words and {matrix.size}^2 matrix entries")


def full_shift_series_pressure(weights: PowerLogSeries, head: Optional[int] = None) -> PressureResult:
    """
    log of sum lambda_n for the full shift on the series' index range, or +infinity.

    Raises:
        TailNotCertifiable: If no certified tail bound applies
    """
    if not weights.converges:
        witness = weights.divergence_witness()
        logger.info(f"series diverges: {witness['comparison']}")
        return PressureResult.infinity(witness, series=weights.describe())
    value = weights.log_sum(head)
    return PressureResult(value, diagnostics={"series": weights.describe(),
                                              "head": head or weights.start + 100_000})


def lumped_shift(rule: TransitionRule, N: int) -> FiniteShift:
    """truncate(rule, N) plus the STAR super-symbol, allowed before and after everything."""
    base = truncate(rule, N)
    size = len(base.symbols)
    adjacency = np.ones((size + 1, size + 1), dtype=np.int8)
    adjacency[:size, :size] = base.adjacency
    adjacency.setflags(write=False)
    return FiniteShift(rule, base.symbols + (STAR,), adjacency)


def _lumped_upper(rule: TransitionRule, pot: CylinderPotential, N: int,
                  tol: Optional[float]) -> Tuple[PerronResult, CertifiedInterval, int]:
    tail = pot.sup_series(N + 1).tail(N)
    shift = lumped_shift(rule, N)
    words = word_array(shift, word_length(pot))
    star = words == STAR
    concrete = np.where(star.any(axis=1), star.argmax(axis=1), words.shape[1])
    y_star = round_up(1.0 / round_down(N + 1 - Y_MAX_UP))
    y_hi = np.where(concrete < pot.depth, y_star, Y_MAX_UP)

    log_weights = np.empty(len(words))
    lead = concrete > 0
    placeholder = np.where(star, N + 1, words)
    _, hi = pot.word_bounds(placeholder[lead], concrete[lead], y_hi[lead])
    log_weights[lead] = hi
    log_weights[~lead] = round_up(math.log(tail.upper)) if tail.upper > 0 else -745.0
    matrix = WeightedWordMatrix(words, log_weights, aperiodic=True)
    return matrix.perron(tol), tail, len(words)


def pressure(rule: TransitionRule, pot: CylinderPotential, N: int, k: int,
             tol: Optional[float] = None) -> PressureResult:
    """
    Two-sided enclosure of the Gurevich pressure of pot (read at depth k) on the rule.

    Args:
        rule: Transition rule (countable or finite)
        pot: Cylinder potential
        N: Truncation level; at least full_subshift_min() - 1 for countable rules
        k: Cylinder depth of the weighted matrices
        tol: Collatz-Wielandt gap target (settings.power_tol by default)

    Returns:
        PressureResult, infinite with a witness when the 1-cylinder series on the full
        sub-shift diverges
    """
    if k < 1:
        raise DomainError("depth k must be at least 1")
    pot = pot.at_depth(k)
    tol = get_settings().power_tol if tol is None else tol
    diagnostics = {"N": N, "k": k, "tol": tol}

    if rule.is_countable:
        subshift_min = rule.full_subshift_min()
        if N < subshift_min - 1:
            raise DomainError(f"N = {N} is below the full sub-shift level {subshift_min - 1}")
        if any(symbol > N for symbol in pot.table):
            raise DomainError("table entries above the truncation level")
        floor_start = max([subshift_min, rule.alphabet_min] + [s + 1 for s in pot.table])
        floor_series = pot.inf_series(floor_start)
        if not floor_series.converges:
            witness = floor_series.divergence_witness()
            witness["subshift_min"] = floor_series.start
            logger.info(f"pressure is +infinity: {witness['comparison']} diverges")
            return PressureResult.infinity(witness, **diagnostics)

    truncated = truncated_pressure(truncate(rule, N), pot, tol)
    diagnostics.update(states=truncated.states, word_length=truncated.word_length,
                       iterations=truncated.lower.iterations + truncated.upper.iterations,
                       converged=truncated.lower.converged and truncated.upper.converged)
    if not rule.is_countable:
        return PressureResult(truncated.value, diagnostics=diagnostics)

    upper, tail, lumped_states = _lumped_upper(rule, pot, N, tol)
    diagnostics.update(tail_weight=tail.to_dict(), lumped_states=lumped_states,
                       converged=diagnostics["converged"] and upper.converged)
    lower = truncated.value.lower
    value = CertifiedInterval(lower, max(lower, upper.log_upper))
    logger.info(f"pressure enclosure [{value.lower:.6f}, {value.upper:.6f}] at N={N}, k={k}")
    return PressureResult(value, diagnostics=diagnostics)


class FinitenessThreshold(NamedTuple):
    t_star: float
    finite_at_threshold: bool


def finiteness_threshold(base: CylinderPotential) -> FinitenessThreshold:
    """
    The t* with P(base - t tau) finite for t > t* and +infinity for t < t*.

    Exact from the series exponents: sum n^(A - 2t) (log n)^B exp(G n).
    """
    A, B, G = base.exponents
    if G < 0:
        return FinitenessThreshold(-math.inf, True)
    if G > 0:
        return FinitenessThreshold(math.inf, False)
    return FinitenessThreshold((A + 1.0) / 2.0, B < -1)


__all__ = [
    "STAR", "CylinderPotential", "PotentialDescriptor", "PressureResult", "PerronResult",
    "WeightedWordMatrix", "TruncatedPressure", "build_matrix", "truncated_pressure",
    "pressure_truncated", "pressure_periodic_oracle", "full_shift_series_pressure",
    "lumped_shift", "pressure", "FinitenessThreshold", "finiteness_threshold",
]

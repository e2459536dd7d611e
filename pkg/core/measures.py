"""
Invariant Markov measures on finite truncations.

Measures live on the word states of a recurrent truncation (words of length
K = max(depth, 2)). The Ruelle-Perron-Frobenius construction turns the left and right
Perron vectors of a weighted word matrix into the equilibrium (Gibbs) measure; lifts
to the suspension flow follow Abramov's formula.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.linalg import spsolve

from core.errors import DegenerateTruncation, DepthMismatch, DomainError
from core.intervals import CertifiedInterval, round_down, round_up
from core.pressure_engine import CylinderPotential, build_matrix, pressure_truncated, word_length
from core.shift_core import FiniteShift, word_array
from settings_loader import get_settings

logger = logging.getLogger(__name__)

Provenance = Literal["rpf", "user", "random"]

# dense elimination is used for the stationary vector up to this many states
GTH_MAX_STATES = 600

EPS = np.finfo(float).eps


def successor_pattern(words: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(rows, cols) of all state pairs s -> s' where the suffix of s is the prefix of s'."""
    words = np.asarray(words)
    S = len(words)
    keys = np.concatenate([words[:, :-1], words[:, 1:]])
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    prefix_idx, suffix_idx = inverse[:S], inverse[S:]
    n_keys = int(inverse.max()) + 1
    order = np.argsort(prefix_idx, kind="stable")
    degree = np.bincount(prefix_idx, minlength=n_keys)
    starts = np.concatenate([[0], np.cumsum(degree)[:-1]])
    counts = degree[suffix_idx]
    total = int(counts.sum())
    rows = np.repeat(np.arange(S), counts)
    offsets = np.repeat(starts[suffix_idx] - (np.cumsum(counts) - counts), counts)
    cols = order[offsets + np.arange(total)]
    return rows, cols


def _gth(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination for a row-stochastic matrix."""
    A = np.array(P, dtype=np.float64)
    n = len(A)
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0:
            raise DegenerateTruncation("transition matrix is not irreducible")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def stationary_distribution(P: sparse.csr_matrix) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix."""
    n = P.shape[0]
    if n <= GTH_MAX_STATES:
        return _gth(P.toarray())
    system = (P.T - sparse.identity(n, format="csr")).tolil()
    system[n - 1, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    pi = np.maximum(spsolve(system.tocsc(), rhs), 0.0)
    pi /= pi.sum()
    for _ in range(3):
        pi = P.T @ pi
        pi /= pi.sum()
    return pi


def _refine(P: sparse.csr_matrix, pi: np.ndarray, steps: int = 200) -> np.ndarray:
    """Power steps pi <- pi P until stationary to 1e-12; direct solve as a last resort."""
    pi = pi / pi.sum()
    for _ in range(steps):
        if float(np.max(np.abs(P.T @ pi - pi))) <= 1e-12:
            return pi
        pi = P.T @ pi
        pi /= pi.sum()
    logger.warning("⚠️ stationary vector did not settle under power steps; solving directly")
    return stationary_distribution(P)


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """
    Stationary Markov measure on the word states of a finite shift.

    P[s, s'] may be positive only when the suffix of s is the prefix of s'.
    """
    shift: FiniteShift
    words: np.ndarray
    P: sparse.csr_matrix
    pi: np.ndarray
    provenance: Provenance = "user"
    log_pressure: Optional[float] = None

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.int64)
        if words.ndim != 2 or words.shape[1] < 2:
            raise DomainError("measure states must be words of length >= 2")
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "P", sparse.csr_matrix(self.P))
        pi = np.asarray(self.pi, dtype=np.float64)
        S = len(words)
        if self.P.shape != (S, S) or pi.shape != (S,):
            raise DomainError("transition matrix and stationary vector do not match the states")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise DomainError("stationary vector must be a probability vector")
        rows = np.repeat(np.arange(S), np.diff(self.P.indptr))
        cols = self.P.indices
        if np.any(self.P.data < 0) or np.max(np.abs(np.asarray(self.P.sum(axis=1)).ravel() - 1.0)) > 1e-12:
            raise DomainError("transition matrix must be row-stochastic")
        live = self.P.data > 0
        if not np.all(words[rows[live], 1:] == words[cols[live], :-1]):
            raise DomainError("transition matrix charges a non-admissible transition")
        object.__setattr__(self, "pi", pi)
        residual = self.stationarity_residual
        if residual > 1e-10:
            raise DomainError(f"vector is not stationary (residual {residual:.2e})")

    @classmethod
    def from_matrix(cls, shift: FiniteShift, words: np.ndarray, P,
                    provenance: Provenance = "user") -> MarkovMeasure:
        """Measure with the stationary vector computed from P."""
        P = sparse.csr_matrix(P, dtype=np.float64)
        return cls(shift, words, P, stationary_distribution(P), provenance)

    @property
    def word_length(self) -> int:
        return self.words.shape[1]

    @property
    def states(self) -> int:
        return len(self.words)

    @property
    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.P.T @ self.pi - self.pi)))

    @cached_property
    def _codes(self) -> Tuple[np.ndarray, np.ndarray, int]:
        base = int(self.words.max()) + 1
        codes = self.words @ (base ** np.arange(self.word_length - 1, -1, -1))
        order = np.argsort(codes)
        return codes[order], order, base

    def state_index(self, words: np.ndarray) -> np.ndarray:
        """Indices of K-word rows among the states; DomainError if a row is not a state."""
        codes, order, base = self._codes
        words = np.asarray(words, dtype=np.int64)
        if np.any(words >= base):
            raise DomainError("word uses a symbol outside the measure's states")
        query = words @ (base ** np.arange(self.word_length - 1, -1, -1))
        pos = np.clip(np.searchsorted(codes, query), 0, len(codes) - 1)
        if not np.all(codes[pos] == query):
            raise DomainError("word is not a state of the measure")
        return order[pos]

    def transitions(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, probabilities) of the positive transitions."""
        rows = np.repeat(np.arange(self.states), np.diff(self.P.indptr))
        return rows, self.P.indices, self.P.data

    def log_cylinder_measure(self, words: np.ndarray) -> np.ndarray:
        """log mu of the cylinders of word rows of any length."""
        words = np.asarray(words, dtype=np.int64)
        K = self.word_length
        if words.shape[1] < K:
            prefix_mass: Dict[tuple, float] = {}
            for w, p in zip(map(tuple, self.words[:, :words.shape[1]]), self.pi):
                prefix_mass[w] = prefix_mass.get(w, 0.0) + p
            with np.errstate(divide="ignore"):
                return np.log(np.asarray([prefix_mass.get(tuple(w), 0.0) for w in words]))
        idx = [self.state_index(words[:, i:i + K]) for i in range(words.shape[1] - K + 1)]
        with np.errstate(divide="ignore"):
            out = np.log(self.pi[idx[0]])
            for a, b in zip(idx[:-1], idx[1:]):
                out = out + np.log(np.asarray(self.P[a, b]).ravel())
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"word": [",".join(str(int(x)) for x in w) for w in self.words],
                             "weight": self.pi})


def rpf_measure(shift: FiniteShift, pot: CylinderPotential) -> MarkovMeasure:
    """
    Equilibrium measure of a locally constant potential on a truncation.

    The potential is read at cylinder midpoints. With M r = rho r and l M = rho l,
    P[s, s'] = r[s'] / sum of r over the successors of s and pi = l * r / <l, r>.

    Raises:
        DegenerateTruncation: If the truncation has no cycle
    """
    recurrent = shift.recurrent_shift()
    if not recurrent.symbols:
        raise DegenerateTruncation("truncation has no recurrent part")
    if len(recurrent.symbols) < len(shift.symbols):
        logger.info(f"measure restricted to the irreducible component on {len(recurrent.symbols)} symbols")
    matrix = build_matrix(recurrent, pot, "midpoint")
    right = matrix.perron()
    left = matrix.perron(left=True)
    r, l = right.vector, left.vector

    rows, cols = successor_pattern(matrix.words)
    successor_mass = np.bincount(rows, weights=r[cols], minlength=matrix.size)
    data = r[cols] / successor_mass[rows]
    P = sparse.csr_matrix((data, (rows, cols)), shape=(matrix.size, matrix.size))
    pi = _refine(P, l * r)
    log_rho = 0.5 * (right.log_lower + right.log_upper)
    return MarkovMeasure(recurrent, matrix.words, P, pi, "rpf", log_rho)


def random_markov_measure(shift: FiniteShift, K: int, rng: np.random.Generator,
                          bias: float = 0.0) -> MarkovMeasure:
    """
    Random stationary Markov measure on the K-word states of the recurrent part.

    bias > 0 tilts every row towards its first successor.
    """
    recurrent = shift.recurrent_shift()
    words = word_array(recurrent, max(K, 2))
    rows, cols = successor_pattern(words)
    data = rng.uniform(0.05, 1.0, size=len(rows))
    if bias:
        first = np.concatenate([[True], rows[1:] != rows[:-1]])
        data[first] += bias
    data /= np.bincount(rows, weights=data, minlength=len(words))[rows]
    P = sparse.csr_matrix((data, (rows, cols)), shape=(len(words), len(words)))
    return MarkovMeasure.from_matrix(recurrent, words, P, "random")


def entropy_of(m: MarkovMeasure) -> float:
    """Entropy rate -sum_i pi_i sum_j P_ij log P_ij (0 log 0 = 0)."""
    rows, _, data = m.transitions()
    live = data > 0
    h = -float(np.sum(m.pi[rows[live]] * data[live] * np.log(data[live])))
    return max(h, 0.0)


def _weighted_sum(weights: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> CertifiedInterval:
    err = 2 * EPS * len(weights) * float(np.dot(weights, np.maximum(np.abs(lo), np.abs(hi))))
    return CertifiedInterval(round_down(float(np.dot(weights, lo)) - err),
                             round_up(float(np.dot(weights, hi)) + err))


def integrate(m: MarkovMeasure, pot: CylinderPotential) -> CertifiedInterval:
    """
    Enclosure of the integral of pot against m.

    Raises:
        DepthMismatch: If pot reads more than one symbol beyond the state words
    """
    K = m.word_length
    if pot.depth > K + 1:
        raise DepthMismatch(f"potential depth {pot.depth} exceeds measure word length {K} + 1")
    if pot.depth <= K:
        lo, hi = pot.word_bounds(m.words)
        return _weighted_sum(m.pi, lo, hi)
    rows, cols, data = m.transitions()
    extended = np.column_stack([m.words[rows], m.words[cols, -1]])
    lo, hi = pot.word_bounds(extended)
    return _weighted_sum(m.pi[rows] * data, lo, hi)


@dataclass(frozen=True, eq=False)
class FlowMeasureStats:
    """Statistics of the flow measure obtained by lifting a base measure."""
    base: MarkovMeasure
    entropy: float
    roof_integral: CertifiedInterval
    flow_entropy: CertifiedInterval
    flow_integral: CertifiedInterval

    @property
    def flow_entropy_point(self) -> float:
        """Abramov quotient at the roof integral's midpoint."""
        return self.entropy / self.roof_integral.midpoint

    def to_dict(self) -> dict:
        return {"entropy": self.entropy, "roof_integral": self.roof_integral.to_dict(),
                "flow_entropy": self.flow_entropy.to_dict(),
                "flow_integral": self.flow_integral.to_dict(),
                "flow_entropy_point": self.flow_entropy_point}


def lift(m: MarkovMeasure, roof: CylinderPotential,
         base_integrand: Optional[CylinderPotential] = None) -> FlowMeasureStats:
    """
    Flow entropy h / int(roof) and flow integral int(Delta_F) / int(roof) of the lifted
    measure.

    Raises:
        DomainError: If the roof integral is not bounded away from zero
    """
    roof_integral = integrate(m, roof)
    if roof_integral.lower <= 0:
        raise DomainError("roof integral must be positive")
    h = entropy_of(m)
    integrand = base_integrand if base_integrand is not None else CylinderPotential.zero()
    flow_entropy = CertifiedInterval.around(h) / roof_integral
    flow_integral = integrate(m, integrand) / roof_integral
    return FlowMeasureStats(m, h, roof_integral, flow_entropy, flow_integral)


@dataclass(frozen=True)
class GibbsReport:
    table: pd.DataFrame
    stable_from: Optional[int]

    @property
    def passed(self) -> bool:
        return self.stable_from is not None

    def to_dict(self) -> dict:
        return {"rows": self.table.to_dict(orient="records"), "stable_from": self.stable_from,
                "passed": self.passed}


def gibbs_ratio_check(m: MarkovMeasure, pot: CylinderPotential, P: float,
                      depths: Sequence[int] = range(1, 6), tolerance: float = 1e-6) -> GibbsReport:
    """
    Extremal ratios mu(C) / exp(-n P + S_n pot) over all admissible cylinders of each depth n.

    The potential is read at cylinder midpoints. stable_from is the first depth from
    which every later spread agrees with it within a factor 1 + tolerance.

    Raises:
        OracleScaleExceeded: If a depth has more cylinders than max_oracle_words
    """
    cap = get_settings().max_oracle_words
    rows = []
    for n in depths:
        length = n + pot.depth - 1
        words = word_array(m.shift, length, cap=cap)
        windows = np.stack([words[:, i:i + pot.depth] for i in range(n)], axis=1)
        lo, hi = pot.word_bounds(windows.reshape(-1, pot.depth))
        birkhoff = (0.5 * (lo + hi)).reshape(len(words), n).sum(axis=1)
        log_ratio = m.log_cylinder_measure(words) + n * P - birkhoff
        finite = log_ratio[np.isfinite(log_ratio)]
        low, high = float(finite.min()), float(finite.max())
        rows.append({"depth": n, "cylinders": len(words), "min_ratio": math.exp(low),
                     "max_ratio": math.exp(high), "log_spread": high - low})
    table = pd.DataFrame(rows)
    spreads = table["log_spread"].to_numpy()
    stable_from = None
    for i in range(len(spreads) - 1):
        if np.all(np.abs(spreads[i + 1:] - spreads[i]) <= math.log1p(tolerance)):
            stable_from = int(table["depth"].iloc[i])
            break
    if len(spreads) == 1:
        stable_from = int(table["depth"].iloc[0])
    return GibbsReport(table, stable_from)


@dataclass(frozen=True)
class VariationalReport:
    table: pd.DataFrame
    pressure: CertifiedInterval
    rpf_value: float
    rpf_pressure: float
    seed: int
    flow_upper: Optional[float] = None

    @property
    def rpf_gap(self) -> float:
        return abs(self.rpf_value - self.rpf_pressure)

    @property
    def passed(self) -> bool:
        ok = bool(self.table["below_pressure"].all()) and self.rpf_gap <= 1e-8
        if "below_flow_pressure" in self.table:
            ok = ok and bool(self.table["below_flow_pressure"].all())
        return ok

    def to_dict(self) -> dict:
        data = {"samples": self.table.to_dict(orient="records"),
                "pressure": self.pressure.to_dict(), "rpf_value": self.rpf_value,
                "rpf_pressure": self.rpf_pressure, "rpf_gap": self.rpf_gap,
                "seed": self.seed, "passed": self.passed}
        if self.flow_upper is not None:
            data["flow_upper"] = self.flow_upper
        return data


def variational_check(shift: FiniteShift, pot: CylinderPotential, samples: int, seed: int = 0,
                      roof: Optional[CylinderPotential] = None,
                      flow_upper: Optional[float] = None) -> VariationalReport:
    """
    Compare h(nu) + int(pot) for random stationary Markov measures with the truncation
    pressure; the RPF measure of the midpoint potential must attain it.

    With a roof and an upper bound of the flow pressure, the lifted samples are checked
    against it as well (pot then plays the role of Delta_F).
    """
    if samples < 1:
        raise DomainError("samples must be at least 1")
    recurrent = shift.recurrent_shift()
    enclosure = pressure_truncated(recurrent, pot)
    rng = np.random.default_rng(seed)
    K = word_length(pot)
    rows = []
    for i in range(samples):
        m = random_markov_measure(recurrent, K, rng)
        h = entropy_of(m)
        integral = integrate(m, pot)
        row = {"sample": i, "entropy": h, "integral_upper": integral.upper,
               "value_upper": round_up(h + integral.upper),
               "below_pressure": h + integral.upper <= enclosure.upper + 1e-9}
        if roof is not None and flow_upper is not None:
            stats = lift(m, roof, pot)
            value = (stats.flow_entropy + stats.flow_integral).upper
            row.update(flow_value_upper=value, below_flow_pressure=value <= flow_upper + 1e-9)
        rows.append(row)

    midpoint_pot = pot.at_midpoints()
    equilibrium = rpf_measure(recurrent, midpoint_pot)
    rpf_value = entropy_of(equilibrium) + integrate(equilibrium, midpoint_pot).midpoint
    rpf_pressure = pressure_truncated(recurrent, midpoint_pot).midpoint
    report = VariationalReport(pd.DataFrame(rows), enclosure, rpf_value, rpf_pressure, seed,
                               flow_upper)
    if not report.passed:
        logger.warning(f"⚠️ variational check failed (RPF gap {report.rpf_gap:.2e})")
    return report


def pressure_derivative_check(shift: FiniteShift, base: CylinderPotential, t0: float,
                              step: float = 1e-3,
                              roof: Optional[CylinderPotential] = None) -> dict:
    """
    Centered difference of t -> P(base - t roof) at t0 against -int(roof) for the RPF
    measure at t0 (all potentials read at midpoints).
    """
    roof = roof or CylinderPotential(tau_coef=1.0, depth=base.depth)
    recurrent = shift.recurrent_shift()

    def family(t: float) -> CylinderPotential:
        return base.plus_tau(-t * roof.tau_coef).at_midpoints()

    p_plus = pressure_truncated(recurrent, family(t0 + step)).midpoint
    p_minus = pressure_truncated(recurrent, family(t0 - step)).midpoint
    difference = (p_plus - p_minus) / (2 * step)
    measure = rpf_measure(recurrent, family(t0))
    derivative = -integrate(measure, roof.at_midpoints().at_depth(base.depth)).midpoint
    return {"t0": t0, "step": step, "finite_difference": difference,
            "derivative": derivative, "gap": abs(difference - derivative)}


def export_csv(m: MarkovMeasure, path: Optional[str] = None) -> str:
    """CSV of (word, stationary weight) rows; written to path when given."""
    buffer = io.StringIO()
    m.to_frame().to_csv(buffer, index=False)
    text = buffer.getvalue()
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    return text


__all__ = [
    "MarkovMeasure", "FlowMeasureStats", "GibbsReport", "VariationalReport",
    "successor_pattern", "stationary_distribution", "rpf_measure", "random_markov_measure",
    "entropy_of", "integrate", "lift", "gibbs_ratio_check", "variational_check",
    "pressure_derivative_check", "export_csv",
]

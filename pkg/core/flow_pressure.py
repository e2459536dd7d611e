"""
Pressure of the suspension flow over (Sigma_A, sigma) with roof tau.

P_Phi(F) = inf{t : P(Delta_F - t tau) <= 0}. Every t is classified from certified
pressure enclosures: IN when the upper bound is <= 0, OUT when the lower bound is > 0
or the pressure is +infinity. The infimum is enclosed between the largest OUT point and
the smallest IN point found by bisection; below the analytic threshold t* every t is OUT.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import ConditionInapplicable, DomainError, TailNotCertifiable, UnbracketedRoot
from core.intervals import CertifiedInterval, round_up
from core.pressure_engine import (CylinderPotential, PressureResult, finiteness_threshold,
                                  pressure)
from core.series import PowerLogSeries
from core.shift_core import TransitionRule, truncate
from settings_loader import get_settings

logger = logging.getLogger(__name__)

RootKind = Literal["RootExists", "NoRootGap", "Infinite"]
Verdict = Literal["equilibrium-certified", "no-equilibrium-certified", "inconclusive"]


class FlowParams(BaseModel):
    """Truncation level, cylinder depth and bisection width of a flow computation."""

    model_config = ConfigDict(frozen=True)

    N: int = Field(200, ge=1)
    k: int = Field(2, ge=1, le=4)
    tol: float = Field(1e-3, gt=0)
    power_tol: Optional[float] = Field(None, gt=0)
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    t_max_limit: Optional[float] = None

    def resolved(self) -> FlowParams:
        """Fill the scan range from the settings."""
        settings = get_settings()
        return self.model_copy(update={
            "t_min": settings.t_min if self.t_min is None else self.t_min,
            "t_max": settings.t_max if self.t_max is None else self.t_max,
            "t_max_limit": settings.t_max_limit if self.t_max_limit is None else self.t_max_limit,
        })

    def describe(self) -> dict:
        return {"N": self.N, "k": self.k, "tol": self.tol}


class FlowPotentialSpec(BaseModel):
    """
    A flow potential F given through Delta_F (its integral along the roof) on the base.

    The roof is c * tau with c > 0; sup_F and inf_F are set when F is declared bounded.
    """

    model_config = ConfigDict(frozen=True)

    base: CylinderPotential = Field(default_factory=CylinderPotential.zero)
    roof: CylinderPotential = Field(default_factory=lambda: CylinderPotential(tau_coef=1.0))
    rule: TransitionRule = Field(default_factory=TransitionRule.modular)
    sup_F: Optional[float] = None
    inf_F: Optional[float] = None
    label: str = ""

    @model_validator(mode="after")
    def _roof_is_tau(self) -> FlowPotentialSpec:
        roof = self.roof
        if not roof.tau_coef > 0:
            raise ValueError("roof must be a positive multiple of tau")
        if roof.log_coef or roof.loglog_coef or roof.linear_coef or roof.constant or roof.table:
            raise ValueError("roof must belong to the tau family")
        if self.rule.alphabet_min < 3:
            raise ValueError("tau is only defined on digits >= 3")
        if (self.sup_F is None) != (self.inf_F is None):
            raise ValueError("declare both sup_F and inf_F or neither")
        if self.sup_F is not None and self.sup_F < self.inf_F:
            raise ValueError("sup_F below inf_F")
        return self

    @classmethod
    def zero(cls, rule: Optional[TransitionRule] = None) -> FlowPotentialSpec:
        """F = 0; its flow pressure is the topological entropy."""
        return cls(rule=rule or TransitionRule.modular(), sup_F=0.0, inf_F=0.0, label="zero")

    @property
    def bounded(self) -> bool:
        return self.sup_F is not None

    def potential_at(self, t: float) -> CylinderPotential:
        """Delta_F - t * roof."""
        return self.base.plus_tau(-t * self.roof.tau_coef)

    def threshold(self) -> Tuple[float, bool]:
        """(t*, finite at t*) for t -> P(Delta_F - t * roof)."""
        if not self.rule.is_countable:
            return -math.inf, True
        t_star, finite = finiteness_threshold(self.base)
        return t_star / self.roof.tau_coef, finite

    def describe(self) -> dict:
        data = {"base": self.base.describe(), "roof": self.roof.describe(),
                "rule": self.rule.to_json()}
        if self.bounded:
            data.update(sup_F=self.sup_F, inf_F=self.inf_F)
        if self.label:
            data["label"] = self.label
        return data


@dataclass(frozen=True)
class Evaluation:
    """One pressure evaluation of the root search."""
    t: float
    result: PressureResult

    @property
    def verdict(self) -> Literal["in", "out", "undetermined"]:
        if self.result.lower > 0:
            return "out"
        if self.result.upper <= 0:
            return "in"
        return "undetermined"

    def to_dict(self) -> dict:
        return {"t": self.t, "verdict": self.verdict, "lower": self.result.lower,
                "upper": self.result.upper, "infinite": self.result.infinite}


class _Evaluator:
    """Cached pressure evaluations along a family Delta_F - t tau."""

    def __init__(self, spec: FlowPotentialSpec, params: FlowParams):
        self.spec = spec
        self.params = params
        self.cache: Dict[float, Evaluation] = {}

    def __call__(self, t: float) -> Evaluation:
        t = float(t)
        if t not in self.cache:
            result = pressure(self.spec.rule, self.spec.potential_at(t),
                              self.params.N, self.params.k, self.params.power_tol)
            self.cache[t] = Evaluation(t, result)
            logger.debug(f"t = {t:.6f}: {self.cache[t].verdict}")
        return self.cache[t]

    @property
    def evaluations(self) -> List[Evaluation]:
        return [self.cache[t] for t in sorted(self.cache)]


@dataclass(frozen=True)
class RootDiagnosis:
    """Enclosure of P_Phi(F) with the classification of the root."""
    kind: RootKind
    t_star: CertifiedInterval
    P_Phi: CertifiedInterval
    pressure_at_root: Optional[CertifiedInterval]
    finite_at_threshold: bool = False
    evaluations: Tuple[Evaluation, ...] = ()
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    @property
    def is_consistent(self) -> bool:
        """Every OUT point lies below every IN point."""
        outs = [e.t for e in self.evaluations if e.verdict == "out"]
        ins = [e.t for e in self.evaluations if e.verdict == "in"]
        return not outs or not ins or max(outs) < min(ins)

    def to_dict(self) -> dict:
        data = {
            "P_Phi": self.P_Phi.to_dict(),
            "kind": self.kind,
            "pressure_at_root": None if self.pressure_at_root is None else self.pressure_at_root.to_dict(),
            "t_star": {**self.t_star.to_dict(), "finite_at_threshold": self.finite_at_threshold},
            "params": self.params,
            "evaluations": [e.to_dict() for e in self.evaluations],
        }
        if self.diagnostics:
            data["diagnostics"] = self.diagnostics
        if self.notes:
            data["notes"] = list(self.notes)
        return data


def _find_in_point(evaluate: _Evaluator, params: FlowParams) -> Optional[float]:
    t = params.t_max
    while True:
        if evaluate(t).verdict == "in":
            return t
        if t >= params.t_max_limit:
            return None
        t = min(t + max(t - params.t_min, 1.0), params.t_max_limit)


def _find_out_anchor(evaluate: _Evaluator, params: FlowParams, t_star: float,
                     hi: float) -> float:
    """A point below which every t is OUT (certified or via the threshold)."""
    if math.isfinite(t_star):
        if t_star < params.t_min < hi and evaluate(params.t_min).verdict == "out":
            return params.t_min
        return t_star
    t = min(params.t_min, hi)
    step = max(hi - t, 1.0)
    while evaluate(t).verdict != "out":
        if t <= -params.t_max_limit:
            raise UnbracketedRoot(
                f"no t with positive pressure in [{t}, {hi}]", (t, hi))
        t = max(t - step, -params.t_max_limit)
        step *= 2
    return t


def flow_pressure(spec: FlowPotentialSpec, params: Optional[FlowParams] = None) -> RootDiagnosis:
    """
    Certified enclosure of P_Phi(F) = inf{t : P(Delta_F - t tau) <= 0}.

    Args:
        spec: Flow potential
        params: Truncation level, depth and bisection width

    Returns:
        RootDiagnosis; kind is NoRootGap when the pressure at the infimum is certified
        negative and Infinite when no t in the scan range is certified IN

    Raises:
        UnbracketedRoot: If no OUT point exists down to -t_max_limit
    """
    params = (params or FlowParams()).resolved()
    evaluate = _Evaluator(spec, params)
    t_star, finite_at = spec.threshold()
    star = CertifiedInterval.point(t_star)

    def diagnosis(kind: RootKind, P_Phi: CertifiedInterval, at_root: Optional[CertifiedInterval],
                  notes: Sequence[str] = ()) -> RootDiagnosis:
        diag = RootDiagnosis(kind, star, P_Phi, at_root, finite_at, tuple(evaluate.evaluations),
                             params.describe(), notes=tuple(notes))
        if not diag.is_consistent:
            logger.error("❌ IN and OUT evaluations interleave; enclosures are inconsistent")
        return diag

    hi = _find_in_point(evaluate, params)
    if hi is None:
        logger.warning(f"⚠️ no certified IN point up to t = {params.t_max_limit}; P_Phi = +infinity")
        return diagnosis("Infinite", CertifiedInterval(math.inf, math.inf), None,
                         [f"scanned t up to {params.t_max_limit}"])

    lo = _find_out_anchor(evaluate, params, t_star, hi)
    notes: List[str] = []
    if lo == t_star:
        notes.append(f"every t < t* = {t_star} gives pressure +infinity")
        at_star = evaluate(t_star)
        if at_star.verdict == "in":
            value = at_star.result.value
            kind: RootKind = "NoRootGap" if value.upper < 0 else "RootExists"
            if kind == "NoRootGap":
                notes.append("pressure at the infimum is certified negative")
            logger.info(f"P_Phi = t* = {t_star}, pressure there in [{value.lower:.6f}, {value.upper:.6f}]")
            return diagnosis(kind, CertifiedInterval(t_star, t_star), value, notes)

    # largest OUT point
    out_lo, out_hi = lo, hi
    while out_hi - out_lo > params.tol:
        mid = 0.5 * (out_lo + out_hi)
        if evaluate(mid).verdict == "out":
            out_lo = mid
        else:
            out_hi = mid

    # smallest IN point
    in_hi = min(e.t for e in evaluate.evaluations if e.verdict == "in")
    in_lo = max([e.t for e in evaluate.evaluations if e.verdict != "in" and e.t < in_hi] + [out_lo])
    while in_hi - in_lo > params.tol:
        mid = 0.5 * (in_lo + in_hi)
        if evaluate(mid).verdict == "in":
            in_hi = mid
        else:
            in_lo = mid

    upper_at = evaluate(out_lo).result.upper
    lower_at = evaluate(in_hi).result.lower
    at_root = CertifiedInterval(min(lower_at, upper_at), upper_at)
    P_Phi = CertifiedInterval(out_lo, in_hi)
    logger.info(f"P_Phi in [{P_Phi.lower:.6f}, {P_Phi.upper:.6f}] after {len(evaluate.cache)} evaluations")
    return diagnosis("RootExists", P_Phi, at_root, notes)


def domination_bound(rule: TransitionRule, tol: float = 1e-6) -> float:
    """
    Upper bound for the entropy from the full shift on the same alphabet with weights
    sup exp(-t tau) = (c n)^(-2t) on each 1-cylinder.
    """
    if not rule.is_countable:
        raise DomainError("domination bound needs a countable alphabet")

    def dominated(t: float) -> bool:
        series = CylinderPotential.minus_t_tau(t).sup_series(rule.alphabet_min)
        try:
            return series.converges and series.log_sum().upper <= 0
        except TailNotCertifiable:
            return False

    lo, hi = 0.5, 1.0
    while not dominated(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if dominated(mid):
            hi = mid
        else:
            lo = mid
    return hi


def entropy_report(params: Optional[FlowParams] = None,
                   rule: Optional[TransitionRule] = None) -> RootDiagnosis:
    """flow_pressure of the zero potential with both bounding branches recorded."""
    rule = rule or TransitionRule.modular()
    diag = flow_pressure(FlowPotentialSpec.zero(rule), params)
    branches = {"truncation_lower": diag.P_Phi.lower, "lumped_tail_upper": diag.P_Phi.upper}
    if rule.is_countable:
        branches["domination_upper"] = domination_bound(rule)
    return RootDiagnosis(diag.kind, diag.t_star, diag.P_Phi, diag.pressure_at_root,
                         diag.finite_at_threshold, diag.evaluations, diag.params,
                         branches, diag.notes)


def entropy(params: Optional[FlowParams] = None,
            rule: Optional[TransitionRule] = None) -> CertifiedInterval:
    """
    Enclosure of the topological entropy h(Phi) = P_Phi(0).

    Restricting the rule to a sub-shift (e.g. the full shift on {6, 7, ...}) gives a
    lower bound for the entropy of the full system.
    """
    return flow_pressure(FlowPotentialSpec.zero(rule), params).P_Phi


@dataclass(frozen=True)
class EquilibriumReport:
    verdict: Verdict
    reason: str
    zero_in_pressure: bool
    roof_integral: CertifiedInterval
    tail_estimate: float
    integrability: Literal["integrable", "not integrable", "undecided"]
    root: RootDiagnosis
    expected_verdict: Optional[str] = None

    @property
    def matches_expected(self) -> Optional[bool]:
        if self.expected_verdict is None:
            return None
        return self.verdict == self.expected_verdict

    def to_dict(self) -> dict:
        data = {"verdict": self.verdict, "reason": self.reason,
                "zero_in_pressure": self.zero_in_pressure,
                "roof_integral": self.roof_integral.to_dict(),
                "tail_estimate": self.tail_estimate, "integrability": self.integrability,
                "root": self.root.to_dict()}
        if self.expected_verdict is not None:
            data.update(expected_verdict=self.expected_verdict,
                        matches_expected=self.matches_expected)
        return data


def _roof_weighted_series(spec: FlowPotentialSpec, t: float, start: int, upper: bool) -> PowerLogSeries:
    """Series of tau(n) * exp(Delta_F - t tau) on 1-cylinders, with tau ~ 2c log n."""
    pot = spec.potential_at(t)
    series = pot.sup_series(start) if upper else pot.inf_series(start)
    return series.model_copy(update={
        "log_scale": series.log_scale + math.log(2.0 * spec.roof.tau_coef),
        "log_power": series.log_power + 1.0,
        "start": max(series.start, 2),
    })


def equilibrium_diagnosis(spec: FlowPotentialSpec, params: Optional[FlowParams] = None,
                          expected_verdict: Optional[str] = None,
                          root: Optional[RootDiagnosis] = None) -> EquilibriumReport:
    """
    Decide whether Delta_F - P_Phi(F) tau has pressure zero and a Gibbs measure with
    integrable roof.

    Args:
        spec: Flow potential
        params: Truncation parameters
        expected_verdict: Optional verdict to compare against
        root: A flow_pressure result for the same spec and params, if already computed

    Returns:
        EquilibriumReport; "inconclusive" is a valid outcome

    Raises:
        ConditionInapplicable: If P_Phi(F) is +infinity
    """
    from core.measures import integrate, rpf_measure

    params = (params or FlowParams()).resolved()
    root = root or flow_pressure(spec, params)
    if root.kind == "Infinite":
        raise ConditionInapplicable("equilibrium diagnosis needs a finite P_Phi")

    lo, hi = root.P_Phi.lower, root.P_Phi.upper
    t_mid = root.P_Phi.midpoint
    measure = rpf_measure(truncate(spec.rule, params.N), spec.potential_at(t_mid).at_depth(params.k))
    roof_integral = integrate(measure, spec.roof.at_depth(params.k))

    start = spec.rule.full_subshift_min() if spec.rule.is_countable else params.N + 1
    tail_estimate = 0.0
    integrability = "integrable"
    if spec.rule.is_countable:
        tail_series = _roof_weighted_series(spec, t_mid, params.N + 1, upper=True)
        tail_estimate = tail_series.tail(params.N).upper if tail_series.converges else math.inf
        if not _roof_weighted_series(spec, hi, start, upper=False).converges:
            integrability = "not integrable"
        elif not _roof_weighted_series(spec, lo, start, upper=True).converges:
            integrability = "undecided"

    t_star = root.t_star.lower
    if root.kind == "NoRootGap":
        verdict, reason = "no-equilibrium-certified", "negative pressure at P_Phi"
    elif integrability == "not integrable":
        verdict, reason = "no-equilibrium-certified", "roof not integrable for the Gibbs measure"
    elif integrability == "integrable" and lo > t_star:
        verdict, reason = "equilibrium-certified", "pressure zero at P_Phi and integrable roof"
    else:
        verdict, reason = "inconclusive", "root at the finiteness threshold or undecided integrability"

    report = EquilibriumReport(verdict, reason, root.pressure_at_root.contains(0.0), roof_integral,
                               tail_estimate, integrability, root, expected_verdict)
    if report.matches_expected is False:
        logger.warning(f"⚠️ computed verdict {verdict} differs from expected {expected_verdict}")
    logger.info(f"equilibrium diagnosis: {verdict} ({reason})")
    return report


@dataclass(frozen=True)
class OscillationReport:
    holds: bool
    margin: float
    oscillation: float
    entropy: CertifiedInterval
    bracket: Optional[CertifiedInterval] = None
    s: Optional[float] = None
    pressure_low: Optional[PressureResult] = None
    pressure_high: Optional[PressureResult] = None

    @property
    def bracket_verified(self) -> Optional[bool]:
        """P((inf F - s) tau) > 0 and P((sup F - s) tau) < infinity at the chosen s."""
        if self.pressure_low is None:
            return None
        return self.pressure_low.lower > 0 and not self.pressure_high.infinite

    def to_dict(self) -> dict:
        data = {"holds": self.holds, "margin": self.margin, "oscillation": self.oscillation,
                "entropy": self.entropy.to_dict()}
        if self.bracket is not None:
            data.update(bracket=self.bracket.to_dict(), s=self.s,
                        pressure_low=self.pressure_low.to_dict(),
                        pressure_high=self.pressure_high.to_dict(),
                        bracket_verified=self.bracket_verified)
        return data


def small_oscillation_check(spec: FlowPotentialSpec, params: Optional[FlowParams] = None,
                            entropy_bounds: Optional[CertifiedInterval] = None) -> OscillationReport:
    """
    Sufficient condition sup F - inf F < h(Phi) - t0 for an equilibrium state, where
    t0 is the finiteness threshold of -t tau (1/2 for the unit roof).

    Raises:
        ConditionInapplicable: If the spec declares no bounds or the alphabet is finite
    """
    if not spec.bounded:
        raise ConditionInapplicable("small oscillation check needs declared sup F and inf F")
    if not spec.rule.is_countable:
        raise ConditionInapplicable("small oscillation check needs a countable alphabet")
    params = (params or FlowParams()).resolved()
    h = entropy_bounds or entropy(params, spec.rule)
    t0 = FlowPotentialSpec(roof=spec.roof, rule=spec.rule).threshold()[0]
    oscillation = spec.sup_F - spec.inf_F
    margin = h.lower - t0 - oscillation
    if margin <= 0:
        logger.info(f"oscillation {oscillation} is not below h - {t0} (margin {margin:.4f})")
        return OscillationReport(False, margin, oscillation, h)

    bracket = CertifiedInterval(t0 + spec.sup_F, h.lower + spec.inf_F)
    s = bracket.midpoint
    c = spec.roof.tau_coef
    low = pressure(spec.rule, CylinderPotential(tau_coef=(spec.inf_F - s) * c),
                   params.N, params.k, params.power_tol)
    high = pressure(spec.rule, CylinderPotential(tau_coef=(spec.sup_F - s) * c),
                    params.N, params.k, params.power_tol)
    report = OscillationReport(True, margin, oscillation, h, bracket, s, low, high)
    if not report.bracket_verified:
        logger.warning(f"⚠️ bracket at s = {s:.4f} not verified at N={params.N}, k={params.k}")
    return report


@dataclass(frozen=True)
class PressureCurve:
    table: pd.DataFrame
    monotone: bool
    convex: bool

    def to_dict(self) -> dict:
        rows = self.table.replace({np.inf: None}).to_dict(orient="records")
        return {"rows": rows, "monotone": self.monotone, "convex": self.convex}


def _monotone(lower: np.ndarray, upper: np.ndarray) -> bool:
    """Some choice p1 >= p2 >= ... inside consecutive enclosures exists."""
    return bool(np.all(upper[:-1] >= lower[1:]))


def _convex(t: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> bool:
    for i in range(1, len(t) - 1):
        t1, t2, t3 = t[i - 1], t[i], t[i + 1]
        if t3 == t1:
            continue
        if math.isinf(upper[i - 1]) or math.isinf(upper[i + 1]):
            continue
        lam = (t3 - t2) / (t3 - t1)
        chord = round_up(lam * upper[i - 1] + (1 - lam) * upper[i + 1])
        if lower[i] > chord:
            return False
    return True


def pressure_curve(spec: FlowPotentialSpec, t_grid: Sequence[float],
                   params: Optional[FlowParams] = None) -> PressureCurve:
    """
    Pressure enclosures of Delta_F - t tau along a sorted t-grid, with interval-consistent
    checks of monotone decrease and convexity.
    """
    grid = np.asarray(list(t_grid), dtype=np.float64)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise DomainError("t-grid must be nonempty and finite")
    if np.any(np.diff(grid) < 0):
        raise DomainError("t-grid must be sorted")
    params = (params or FlowParams()).resolved()
    evaluate = _Evaluator(spec, params)
    rows = []
    for t in grid:
        result = evaluate(t).result
        rows.append({"t": float(t), "lower": result.lower, "upper": result.upper,
                     "midpoint": math.inf if result.infinite else result.value.midpoint,
                     "infinite": result.infinite, "N": params.N, "k": params.k})
    table = pd.DataFrame(rows, columns=["t", "lower", "upper", "midpoint", "infinite", "N", "k"])
    lower, upper = table["lower"].to_numpy(), table["upper"].to_numpy()
    curve = PressureCurve(table, _monotone(lower, upper), _convex(grid, lower, upper))
    if not (curve.monotone and curve.convex):
        logger.warning("⚠️ pressure curve failed an interval consistency check")
    return curve


__all__ = [
    "FlowParams", "FlowPotentialSpec", "Evaluation", "RootDiagnosis", "flow_pressure",
    "domination_bound", "entropy", "entropy_report", "EquilibriumReport",
    "equilibrium_diagnosis", "OscillationReport", "small_oscillation_check", "PressureCurve",
    "pressure_curve",
]

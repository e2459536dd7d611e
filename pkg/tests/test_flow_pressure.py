"""
Flow pressure by bisection, entropy brackets, equilibrium diagnosis, oscillation, curves.
"""

import math

import pytest
from pydantic import ValidationError

from core.errors import ConditionInapplicable, DomainError
from core.flow_pressure import (FlowParams, FlowPotentialSpec, domination_bound, entropy,
                                entropy_report, equilibrium_diagnosis, flow_pressure,
                                pressure_curve, small_oscillation_check)
from core.intervals import CertifiedInterval
from core.pressure_engine import CylinderPotential, full_shift_series_pressure, pressure
from core.series import PowerLogSeries
from core.shift_core import TransitionRule

ENTROPY_BRACKET = CertifiedInterval(0.7771, 0.8161)
QUICK = FlowParams(N=20, k=1)


def log_log_spec():
    return FlowPotentialSpec(base=CylinderPotential.power_log(0, 2), label="log log")


def full_shift_from_six_spec():
    return FlowPotentialSpec(base=CylinderPotential.power_log(1, 2),
                             rule=TransitionRule.full_shift(6), label="full shift from 6")


# === FlowPotentialSpec ===

def test_roof_must_be_a_positive_multiple_of_tau():
    with pytest.raises(ValidationError):
        FlowPotentialSpec(roof=CylinderPotential(tau_coef=-1.0))
    with pytest.raises(ValidationError):
        FlowPotentialSpec(roof=CylinderPotential(tau_coef=1.0, constant=0.5))


def test_bounds_come_in_pairs():
    with pytest.raises(ValidationError):
        FlowPotentialSpec(sup_F=1.0)
    with pytest.raises(ValidationError):
        FlowPotentialSpec(sup_F=0.0, inf_F=1.0)


def test_roof_needs_digits_from_three():
    with pytest.raises(ValidationError):
        FlowPotentialSpec(rule=TransitionRule.full_shift(2))


def test_threshold_scales_with_the_roof():
    spec = FlowPotentialSpec(roof=CylinderPotential(tau_coef=2.0))
    assert spec.threshold() == (0.25, False)


# === entropy ===

def test_entropy_enclosure_meets_the_known_bracket():
    h = entropy(QUICK)
    assert h.intersects(ENTROPY_BRACKET)


def test_entropy_report_records_all_branches():
    report = entropy_report(QUICK)
    assert set(report.diagnostics) == {"truncation_lower", "lumped_tail_upper", "domination_upper"}
    assert report.kind == "RootExists"
    assert report.is_consistent


def test_domination_bound():
    bound = domination_bound(TransitionRule.modular())
    assert ENTROPY_BRACKET.upper <= bound <= 0.90


def test_domination_needs_a_countable_alphabet():
    with pytest.raises(DomainError):
        domination_bound(TransitionRule.full_shift(3, 10))


@pytest.mark.slow
def test_entropy_at_the_default_level():
    h = entropy(FlowParams(N=200, k=2))
    assert h.intersects(ENTROPY_BRACKET)
    assert h.width <= 0.1
    assert h.lower >= 0.70
    assert h.upper <= 0.90


# the N=20 run may place its bisection points up to tol differently
@pytest.mark.parametrize("fine, slop", [(FlowParams(N=20, k=1), 1e-3),
                                        pytest.param(FlowParams(N=200, k=2), 1e-9,
                                                     marks=pytest.mark.slow)],
                         ids=["N20", "N200"])
def test_finer_entropy_enclosures_are_nested(fine, slop):
    coarse = entropy(FlowParams(N=10, k=1))
    assert coarse.widened(slop).contains(entropy(fine))


# === flow_pressure ===

def test_in_and_out_points_are_separated_by_the_enclosure():
    diag = flow_pressure(FlowPotentialSpec.zero(), QUICK)
    assert diag.is_consistent
    for evaluation in diag.evaluations:
        if evaluation.t < diag.P_Phi.lower:
            assert evaluation.verdict != "in"
        if evaluation.t > diag.P_Phi.upper:
            assert evaluation.verdict != "out"


def test_adding_the_roof_shifts_the_flow_pressure_by_one():
    base = flow_pressure(FlowPotentialSpec.zero(), QUICK)
    shifted = flow_pressure(FlowPotentialSpec(base=CylinderPotential(tau_coef=1.0)), QUICK)
    assert shifted.t_star.lower == pytest.approx(1.5)
    assert shifted.P_Phi.intersects(base.P_Phi + 1.0)


def test_log_log_potential_root_sits_at_the_threshold():
    spec = log_log_spec()
    assert pressure(spec.rule, spec.potential_at(0.45), N=20, k=1).infinite
    diag = flow_pressure(spec, QUICK)
    assert diag.t_star.lower == pytest.approx(0.5)
    assert diag.finite_at_threshold
    assert diag.kind in {"NoRootGap", "RootExists"}
    assert diag.P_Phi.lower >= 0.5 - 1e-9
    assert diag.pressure_at_root is not None


def test_full_shift_from_six_has_a_gap_at_zero():
    diag = flow_pressure(full_shift_from_six_spec(), QUICK)
    assert diag.kind == "NoRootGap"
    assert diag.P_Phi == CertifiedInterval(0.0, 0.0)
    assert diag.pressure_at_root.upper < 0


def test_full_shift_from_six_series_matches_the_matrix():
    series = PowerLogSeries.power_log(1, 2, start=6)
    closed = full_shift_series_pressure(series, head=2000)
    matrix = pressure(TransitionRule.full_shift(6), CylinderPotential.power_log(1, 2), N=60, k=1)
    assert closed.value.intersects(matrix.value)


def test_unreachable_root_is_infinite():
    spec = FlowPotentialSpec(base=CylinderPotential(constant=150.0))
    diag = flow_pressure(spec, QUICK)
    assert diag.kind == "Infinite"
    assert diag.P_Phi.lower == math.inf
    with pytest.raises(ConditionInapplicable):
        equilibrium_diagnosis(spec, QUICK, root=diag)


def test_root_diagnosis_dict_form():
    data = flow_pressure(FlowPotentialSpec.zero(), QUICK).to_dict()
    assert data["kind"] == "RootExists"
    assert data["params"] == {"N": 20, "k": 1, "tol": 1e-3}
    assert data["t_star"]["finite_at_threshold"] is False
    assert all(e["verdict"] in {"in", "out", "undetermined"} for e in data["evaluations"])


# === equilibrium_diagnosis ===

def test_zero_potential_has_an_equilibrium():
    report = equilibrium_diagnosis(FlowPotentialSpec.zero(), QUICK,
                                   expected_verdict="equilibrium-certified")
    assert report.verdict == "equilibrium-certified"
    assert report.integrability == "integrable"
    assert report.matches_expected
    assert report.roof_integral.lower > 0


def test_full_shift_from_six_verdict_is_definite():
    report = equilibrium_diagnosis(full_shift_from_six_spec(), QUICK)
    assert report.verdict == "no-equilibrium-certified"
    assert report.reason == "negative pressure at P_Phi"
    assert "verdict" in report.to_dict()


def test_mismatch_with_an_expected_verdict_is_reported():
    report = equilibrium_diagnosis(full_shift_from_six_spec(), QUICK,
                                   expected_verdict="equilibrium-certified")
    assert report.matches_expected is False
    assert report.to_dict()["matches_expected"] is False


# === small_oscillation_check ===

def test_zero_potential_passes_the_oscillation_condition():
    report = small_oscillation_check(FlowPotentialSpec.zero(), QUICK, ENTROPY_BRACKET)
    assert report.holds
    assert report.margin >= 0.27
    assert report.bracket is not None


def test_large_oscillation_fails():
    spec = FlowPotentialSpec(sup_F=0.5, inf_F=0.0)
    report = small_oscillation_check(spec, QUICK, ENTROPY_BRACKET)
    assert not report.holds
    assert report.margin < 0
    assert report.bracket_verified is None


def test_oscillation_check_needs_bounds():
    with pytest.raises(ConditionInapplicable):
        small_oscillation_check(log_log_spec(), QUICK, ENTROPY_BRACKET)


# === pressure_curve ===

def test_roof_pressure_curve_is_decreasing_and_convex():
    curve = pressure_curve(FlowPotentialSpec.zero(), [0.4, 1.0, 1.5, 2.0, 3.0], QUICK)
    assert curve.monotone and curve.convex
    assert bool(curve.table["infinite"].iloc[0])
    finite = curve.table[~curve.table["infinite"]]
    assert finite["midpoint"].is_monotonic_decreasing


def test_curve_grid_must_be_sorted():
    with pytest.raises(DomainError):
        pressure_curve(FlowPotentialSpec.zero(), [2.0, 1.0], QUICK)

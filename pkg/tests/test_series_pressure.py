"""
Weight series, truncated and lumped pressure enclosures, the periodic-orbit oracle.
"""

import math

import pytest
from pydantic import ValidationError

from core.errors import DomainError, TailNotCertifiable
from core.pressure_engine import (CylinderPotential, PotentialDescriptor, finiteness_threshold,
                                  full_shift_series_pressure, pressure, pressure_periodic_oracle,
                                  pressure_truncated)
from core.series import PowerLogSeries
from core.shift_core import TransitionRule, truncate


# === PowerLogSeries ===

def test_geometric_series_sums_to_one():
    result = full_shift_series_pressure(PowerLogSeries.geometric(0.5, 0.5), head=60)
    assert not result.infinite
    assert abs(result.value.midpoint) < 1e-10
    assert result.value.widened(1e-12).contains(0.0)


def test_geometric_tail_is_exact():
    tail = PowerLogSeries.geometric(0.5).tail(9)
    assert tail.contains(2.0 ** -9)
    assert tail.width < 1e-15


def test_inverse_square_tail_brackets_the_true_value():
    tail = PowerLogSeries.power_log(2, start=1).tail(10)
    true_tail = math.pi ** 2 / 6 - sum(1.0 / n ** 2 for n in range(1, 11))
    assert tail.contains(true_tail)
    assert tail.upper - tail.lower < 0.01


def test_borderline_log_weights_converge():
    series = PowerLogSeries.power_log(1, 2, start=6)
    assert series.converges
    result = full_shift_series_pressure(series, head=1000)
    assert math.isfinite(result.upper)
    assert result.lower < 0


def test_slow_power_diverges_with_a_witness(settings_override):
    settings = settings_override()
    result = full_shift_series_pressure(PowerLogSeries.power_log(0.8))
    assert result.infinite
    assert result.upper == math.inf
    assert result.witness["log_partial_sum_lower"] >= settings.divergence_log_threshold
    assert result.to_dict()["infinite"] is True


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (1.0, 0.0), (0.5, 3.0), (-1.0, 0.0)])
def test_divergence_witness_clears_the_threshold(a, b):
    witness = PowerLogSeries.power_log(a, b).divergence_witness()
    assert witness["log_partial_sum_lower"] >= witness["threshold"]


def test_convergent_series_has_no_witness():
    with pytest.raises(DomainError):
        PowerLogSeries.power_log(2).divergence_witness()


def test_tail_of_divergent_series():
    with pytest.raises(TailNotCertifiable):
        PowerLogSeries.power_log(1).tail(10)


def test_log_powers_need_start_from_two():
    with pytest.raises(ValidationError):
        PowerLogSeries(log_power=-2.0, start=1)


def test_geometric_weights_need_positive_ratio():
    with pytest.raises(DomainError):
        PowerLogSeries.geometric(0.0)


# === pressure_truncated ===

def test_two_symbol_full_shift_has_pressure_log_two(two_block):
    assert pressure_truncated(two_block, CylinderPotential.zero()).widened(1e-12).contains(math.log(2))


def test_constant_potential_shifts_pressure(two_block):
    value = pressure_truncated(two_block, CylinderPotential(constant=0.3))
    assert value.widened(1e-12).contains(math.log(2) + 0.3)


def test_truncation_at_five_uses_its_recurrent_piece(modular):
    value = pressure_truncated(truncate(modular, 5), CylinderPotential.zero())
    assert value.widened(1e-12).contains(math.log(2))


def test_truncated_roof_pressure_is_an_interval(modular):
    value = pressure_truncated(truncate(modular, 8), CylinderPotential.minus_t_tau(1.0, depth=2))
    assert value.lower <= value.upper
    assert value.width < 0.5


@pytest.mark.parametrize("pot", [CylinderPotential.zero(), CylinderPotential.minus_t_tau(1.0),
                                 CylinderPotential.minus_t_tau(0.6, depth=2)],
                         ids=["zero", "roof", "roof-depth-two"])
def test_larger_truncations_never_lower_the_pressure(modular, pot):
    lowers = [pressure_truncated(truncate(modular, N), pot).lower for N in (10, 20, 50, 100)]
    assert all(b >= a - 1e-12 for a, b in zip(lowers, lowers[1:]))


# === pressure_periodic_oracle ===

def test_oracle_on_the_two_symbol_full_shift(two_block):
    assert pressure_periodic_oracle(two_block, CylinderPotential.zero(), 5) == pytest.approx(math.log(2))


def test_oracle_counts_fixed_points(modular):
    # 4, 5 and 6 follow themselves; 3 does not
    value = pressure_periodic_oracle(truncate(modular, 6), CylinderPotential.zero(), 1)
    assert value == pytest.approx(math.log(3))


def test_oracle_needs_positive_period(two_block):
    with pytest.raises(DomainError):
        pressure_periodic_oracle(two_block, CylinderPotential.zero(), 0)


# === pressure ===

def test_zero_potential_on_the_modular_rule_is_infinite(modular):
    result = pressure(modular, CylinderPotential.zero(), N=10, k=1)
    assert result.infinite
    assert result.witness["subshift_min"] == 6


def test_small_roof_multiple_is_infinite(modular):
    assert pressure(modular, CylinderPotential.minus_t_tau(0.4), N=10, k=1).infinite


def test_roof_pressure_at_t_one_is_finite(modular):
    result = pressure(modular, CylinderPotential.minus_t_tau(1.0), N=30, k=1)
    assert not result.infinite
    assert result.lower <= result.upper < math.inf
    assert result.diagnostics["converged"]


def test_enclosures_at_different_levels_overlap(modular):
    pot = CylinderPotential.minus_t_tau(1.0)
    coarse = pressure(modular, pot, N=20, k=1)
    fine = pressure(modular, pot, N=40, k=1)
    assert coarse.value.widened(1e-9).intersects(fine.value.widened(1e-9))


@pytest.mark.parametrize("t", [0.8, 1.0, 1.5])
def test_deeper_cylinders_never_widen_the_enclosure(modular, t):
    widths = [pressure(modular, CylinderPotential.minus_t_tau(t), N=20, k=k).value.width
              for k in (1, 2, 3)]
    assert all(b <= a + 1e-9 for a, b in zip(widths, widths[1:]))


@pytest.mark.parametrize("c", [-1.0, 0.3, 2.5])
@pytest.mark.parametrize("pot", [CylinderPotential.minus_t_tau(1.0),
                                 CylinderPotential.power_log(1, 2)], ids=["roof", "power-log"])
def test_adding_a_constant_shifts_the_pressure(modular, pot, c):
    rule = modular if pot.tau_coef else TransitionRule.full_shift(6)
    base = pressure(rule, pot, N=20, k=1)
    shifted = pressure(rule, pot.shift(c), N=20, k=1)
    assert shifted.lower == pytest.approx(base.lower + c, abs=1e-9)
    assert shifted.upper == pytest.approx(base.upper + c, abs=1e-9)


@pytest.mark.slow
def test_roof_multiple_just_above_threshold_has_negative_pressure(modular):
    result = pressure(modular, CylinderPotential.minus_t_tau(0.85), N=100, k=2)
    assert result.upper < 0


def test_matrix_and_series_enclosures_agree():
    series = PowerLogSeries.geometric(0.5, 0.5)
    matrix = pressure(TransitionRule.full_shift(0), CylinderPotential.from_series(series), N=60, k=1)
    closed = full_shift_series_pressure(series, head=60)
    assert matrix.value.widened(1e-10).intersects(closed.value)
    assert abs(matrix.lower) < 1e-9 and abs(matrix.upper) < 1e-9


def test_finite_rule_pressure(modular):
    rule = TransitionRule.full_shift(4, 5)
    result = pressure(rule, CylinderPotential.zero(), N=5, k=1)
    assert result.value.widened(1e-12).contains(math.log(2))


def test_level_below_the_full_subshift(modular):
    with pytest.raises(DomainError):
        pressure(modular, CylinderPotential.minus_t_tau(1.0), N=4, k=1)


def test_depth_must_be_positive(modular):
    with pytest.raises(DomainError):
        pressure(modular, CylinderPotential.minus_t_tau(1.0), N=10, k=0)


# === finiteness_threshold ===

def test_threshold_of_the_roof_family():
    threshold = finiteness_threshold(CylinderPotential.zero())
    assert threshold.t_star == 0.5
    assert not threshold.finite_at_threshold


def test_threshold_with_a_log_log_correction():
    threshold = finiteness_threshold(CylinderPotential.power_log(0, 2))
    assert threshold.t_star == 0.5
    assert threshold.finite_at_threshold


def test_threshold_of_geometric_weights():
    series = PowerLogSeries.geometric(0.5)
    assert finiteness_threshold(CylinderPotential.from_series(series)).t_star == -math.inf


# === PotentialDescriptor ===

def test_descriptor_for_the_roof_family():
    pot = PotentialDescriptor(family="tau", params={"t": 0.9}, depth=2).to_potential()
    assert pot.tau_coef == -0.9
    assert pot.depth == 2


def test_descriptor_for_power_log():
    pot = PotentialDescriptor(family="power_log", params={"a": 1, "b": 2}).to_potential()
    assert (pot.log_coef, pot.loglog_coef) == (-1.0, -2.0)


def test_descriptor_rejects_unknown_family():
    with pytest.raises(ValidationError):
        PotentialDescriptor(family="wavelet")

"""
Markov measures on truncations: RPF construction, entropy, integrals, lifts, Gibbs ratios.
"""

import math

import numpy as np
import pytest

from core.errors import DepthMismatch, DomainError
from core.flow_pressure import FlowParams, entropy
from core.measures import (MarkovMeasure, entropy_of, export_csv, gibbs_ratio_check, integrate,
                           lift, pressure_derivative_check, random_markov_measure, rpf_measure,
                           variational_check)
from core.pressure_engine import CylinderPotential
from core.shift_core import truncate


@pytest.fixture
def shift10(modular):
    return truncate(modular, 10)


@pytest.fixture
def roof_midpoints():
    return CylinderPotential.minus_t_tau(1.0).at_midpoints()


# === rpf_measure ===

def test_uniform_measure_on_the_two_symbol_full_shift(two_block):
    m = rpf_measure(two_block, CylinderPotential.zero())
    assert m.provenance == "rpf"
    assert np.allclose(m.pi, 0.25)
    assert entropy_of(m) == pytest.approx(math.log(2), abs=1e-12)
    assert m.log_pressure == pytest.approx(math.log(2), abs=1e-10)


def test_bernoulli_measure_from_a_symbol_table(two_block):
    a, b = 0.3, 0.7
    pot = CylinderPotential(table={4: math.log(a), 5: math.log(b)})
    m = rpf_measure(two_block, pot)
    expected_h = -(a * math.log(a) + b * math.log(b))
    assert entropy_of(m) == pytest.approx(expected_h, abs=1e-10)
    assert integrate(m, pot).midpoint == pytest.approx(-expected_h, abs=1e-10)
    assert m.log_pressure == pytest.approx(0.0, abs=1e-10)
    assert np.exp(m.log_cylinder_measure(np.array([[4], [5]]))) == pytest.approx([a, b])


def test_parry_measure_attains_the_topological_entropy(shift10):
    m = rpf_measure(shift10, CylinderPotential.zero())
    assert entropy_of(m) == pytest.approx(m.log_pressure, abs=1e-8)
    assert m.stationarity_residual <= 1e-10


def test_rpf_measure_is_stationary_and_admissible(shift10, roof_midpoints):
    m = rpf_measure(shift10, roof_midpoints)
    rows, cols, data = m.transitions()
    assert np.all(m.words[rows, 1:] == m.words[cols, :-1])
    assert np.allclose(np.bincount(rows, weights=data), 1.0)


def test_measure_on_the_all_four_loop(modular):
    m = rpf_measure(truncate(modular, 4), CylinderPotential.zero())
    assert m.states == 1
    assert entropy_of(m) == 0.0
    roof_integral = integrate(m, CylinderPotential(tau_coef=1.0, depth=2))
    assert roof_integral.contains(2.634370)


# === random_markov_measure ===

def test_random_measures_are_reproducible(shift10):
    first = random_markov_measure(shift10, 2, np.random.default_rng(3))
    second = random_markov_measure(shift10, 2, np.random.default_rng(3))
    assert np.array_equal(first.pi, second.pi)
    assert first.provenance == "random"


def test_random_measure_entropy_is_below_the_parry_entropy(shift10):
    parry = rpf_measure(shift10, CylinderPotential.zero())
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert entropy_of(random_markov_measure(shift10, 3, rng)) <= parry.log_pressure + 1e-9


# === integrate ===

def test_integral_of_a_constant(shift10):
    m = random_markov_measure(shift10, 2, np.random.default_rng(1))
    assert integrate(m, CylinderPotential(constant=2.5)).widened(1e-12).contains(2.5)


def test_depth_one_beyond_the_states_uses_transitions(shift10):
    m = rpf_measure(shift10, CylinderPotential.zero())
    value = integrate(m, CylinderPotential(tau_coef=1.0, depth=3))
    coarse = integrate(m, CylinderPotential(tau_coef=1.0, depth=2))
    assert value.intersects(coarse)


def test_potential_too_deep_for_the_measure(shift10):
    m = rpf_measure(shift10, CylinderPotential.zero())
    with pytest.raises(DepthMismatch):
        integrate(m, CylinderPotential(tau_coef=1.0, depth=4))


# === lift ===

def test_unit_roof_keeps_the_entropy(shift10):
    m = random_markov_measure(shift10, 2, np.random.default_rng(5))
    stats = lift(m, CylinderPotential(constant=1.0))
    assert stats.flow_entropy.contains(stats.entropy)
    assert stats.flow_entropy_point == pytest.approx(stats.entropy, abs=1e-12)


def test_abramov_quotient(shift10, roof):
    m = rpf_measure(shift10, CylinderPotential.zero())
    stats = lift(m, roof.at_depth(2), CylinderPotential(constant=0.5))
    assert stats.flow_entropy.contains(stats.entropy / stats.roof_integral.midpoint)
    assert stats.flow_integral.contains(0.5 / stats.roof_integral.midpoint)
    assert abs(stats.flow_entropy_point * stats.roof_integral.midpoint - stats.entropy) <= 1e-12


def test_lift_needs_a_positive_roof(shift10):
    m = rpf_measure(shift10, CylinderPotential.zero())
    with pytest.raises(DomainError):
        lift(m, CylinderPotential(constant=-1.0))


# === gibbs_ratio_check ===

def test_rpf_measure_has_stable_gibbs_ratios(shift10, roof_midpoints):
    m = rpf_measure(shift10, roof_midpoints)
    report = gibbs_ratio_check(m, roof_midpoints, m.log_pressure)
    assert report.passed
    assert list(report.table["depth"]) == [1, 2, 3, 4, 5]


def test_biased_measure_fails_the_gibbs_check(shift10, roof_midpoints):
    parry_pressure = rpf_measure(shift10, roof_midpoints).log_pressure
    m = random_markov_measure(shift10, 2, np.random.default_rng(0), bias=1.0)
    report = gibbs_ratio_check(m, roof_midpoints, parry_pressure)
    spreads = report.table["log_spread"].to_numpy()
    assert not report.passed
    assert spreads[-1] > spreads[0]


# === variational_check ===

def test_variational_principle_on_a_truncation(shift10):
    report = variational_check(shift10, CylinderPotential.minus_t_tau(1.0), samples=5, seed=0)
    assert report.passed
    assert report.rpf_gap <= 1e-8
    assert len(report.table) == 5


def test_variational_principle_for_lifted_measures(shift10, roof):
    upper = entropy(FlowParams(N=20, k=1)).upper
    report = variational_check(shift10, CylinderPotential.zero(), samples=5, roof=roof,
                               flow_upper=upper)
    assert report.passed
    assert report.table["below_flow_pressure"].all()


@pytest.mark.slow
def test_variational_principle_at_full_size(modular, roof):
    shift20 = truncate(modular, 20)
    report = variational_check(shift20, CylinderPotential.minus_t_tau(1.0), samples=20, seed=0)
    assert report.passed
    assert len(report.table) == 20
    assert report.rpf_gap <= 1e-8
    flow = variational_check(shift20, CylinderPotential.zero(), samples=20, seed=1, roof=roof,
                             flow_upper=entropy(FlowParams(N=20, k=1)).upper)
    assert flow.passed
    assert flow.table["below_flow_pressure"].all()


def test_variational_check_needs_samples(shift10):
    with pytest.raises(DomainError):
        variational_check(shift10, CylinderPotential.zero(), samples=0)


# === pressure_derivative_check ===

def test_slope_of_the_roof_pressure_curve(shift10):
    result = pressure_derivative_check(shift10, CylinderPotential.zero(), 0.8)
    assert result["gap"] <= 1e-4
    assert result["derivative"] < 0


# === MarkovMeasure ===

def test_export_csv(two_block, tmp_path):
    m = rpf_measure(two_block, CylinderPotential.zero())
    path = tmp_path / "measure.csv"
    text = export_csv(m, str(path))
    assert text.splitlines()[0] == "word,weight"
    assert len(text.splitlines()) == 5
    assert path.read_text(encoding="utf-8") == text


def test_measure_validation(two_block):
    words = np.array([[4, 5], [5, 4]])
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    MarkovMeasure(two_block, words, flip, np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        MarkovMeasure(two_block, words, flip, np.array([0.6, 0.6]))
    with pytest.raises(DomainError):
        MarkovMeasure(two_block, words, np.eye(2), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        MarkovMeasure(two_block, np.array([[4], [5]]), flip, np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        MarkovMeasure(two_block, words, flip, np.array([0.9, 0.1]))


def test_from_matrix_computes_the_stationary_vector(two_block):
    words = np.array([[4, 5], [5, 4]])
    m = MarkovMeasure.from_matrix(two_block, words, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert m.pi == pytest.approx([0.5, 0.5])

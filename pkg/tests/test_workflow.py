"""
Flow-analysis workflow and settings loading.
"""

import json
from pathlib import Path

import pytest
from langgraph.graph import END
from pydantic import ValidationError

from core.flow_pressure import FlowPotentialSpec
from main import check_error, create_workflow, route_optional, run_analysis
from nodes.prepare_spec import FlowSpecDescriptor, prepare_spec
from settings_loader import get_settings, load_settings, use_settings

SAMPLES = Path(__file__).resolve().parent.parent / "samples"
QUICK = {"N": 20, "k": 1}


def sample(name):
    with open(SAMPLES / name, 'r', encoding='utf-8') as f:
        return json.load(f)


# === Routing ===

@pytest.mark.parametrize("kind", ["usage", "domain", "budget", "internal"])
def test_check_error_routing(kind):
    assert check_error({"error": "boom", "error_kind": kind}) == END
    assert check_error({}) == "continue"


def test_optional_stage_routing():
    bounded = FlowPotentialSpec.zero()
    unbounded = FlowPotentialSpec()
    assert route_optional({"error": "boom", "spec": bounded}) == END
    assert route_optional({"spec": bounded}) == "check_oscillation"
    assert route_optional({"spec": bounded, "oscillation": object()}) == "assemble_report"
    assert route_optional({"spec": unbounded, "t_grid": [1.0, 2.0]}) == "tabulate_curve"
    assert route_optional({"spec": unbounded, "t_grid": [1.0], "curve": object()}) == "assemble_report"


def test_workflow_compiles():
    graph = create_workflow().get_graph()
    assert {"prepare_spec", "solve_root", "diagnose_equilibrium", "check_oscillation",
            "tabulate_curve", "assemble_report"} <= set(graph.nodes)


# === prepare_spec ===

def test_descriptor_to_spec():
    spec = FlowSpecDescriptor.model_validate(sample("gap_loglog.json")).to_spec()
    assert spec.label == "loglog-gap"
    assert spec.base.loglog_coef == -2.0
    assert spec.rule.forbidden_pairs


def test_expected_verdict_from_the_descriptor():
    state = prepare_spec({"spec_descriptor": sample("gap_loglog.json"), "params_input": QUICK})
    assert state["expected_verdict"] == "no-equilibrium-certified"
    state = prepare_spec({"spec_descriptor": sample("gap_loglog.json"), "params_input": QUICK,
                          "expected_verdict": "inconclusive"})
    assert state["expected_verdict"] == "inconclusive"


def test_unknown_expected_verdict_is_rejected():
    with pytest.raises(ValidationError):
        FlowSpecDescriptor.model_validate({"expected_verdict": "maybe"})


def test_prepare_spec_fills_the_scan_range():
    state = prepare_spec({"spec_descriptor": {}, "params_input": QUICK})
    assert state["params"].t_max == get_settings().t_max
    assert state["spec"].roof.tau_coef == 1.0
    assert not state.get("error")


# === run_analysis ===

def test_subshift_example_end_to_end():
    final = run_analysis({"spec_descriptor": sample("subshift_power_log.json"),
                          "params_input": QUICK})
    assert not final.get("error")
    report = final["report"]
    assert report["kind"] == "NoRootGap"
    assert report["P_Phi"] == {"lower": 0.0, "upper": 0.0}
    assert report["equilibrium"]["verdict"] == "no-equilibrium-certified"
    assert "oscillation" not in report
    assert final["inconclusive"] is False
    assert report["equilibrium"]["matches_expected"] is True
    assert "computed verdict no-equilibrium-certified agrees with expected no-equilibrium-certified" in report["notes"]


def test_bounded_spec_runs_the_oscillation_stage():
    final = run_analysis({"spec_descriptor": sample("bounded_oscillation.json"),
                          "params_input": QUICK, "entropy_bounds": [0.7771, 0.8161]})
    assert not final.get("error")
    assert final["report"]["oscillation"]["holds"] is False


def test_curve_stage():
    final = run_analysis({"spec_descriptor": {}, "params_input": QUICK, "t_grid": [1.0, 2.0, 3.0]})
    curve = final["report"]["curve"]
    assert len(curve["rows"]) == 3
    assert curve["monotone"] and curve["convex"]


def test_invalid_descriptor_stops_the_workflow():
    final = run_analysis({"spec_descriptor": {"base": {"family": "wavelet"}}, "params_input": QUICK})
    assert final["error_node"] == "prepare_spec"
    assert final["error_kind"] == "usage"
    assert final.get("report") is None


def test_invalid_parameters_stop_the_workflow():
    final = run_analysis({"spec_descriptor": {}, "params_input": {"N": 20, "k": 9}})
    assert final["error_node"] == "prepare_spec"


# === Settings ===

def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("MODPRESS_POWER_TOL", "1e-10")
    monkeypatch.setenv("MODPRESS_LOG_LEVEL", "debug")
    settings = load_settings()
    assert settings.power_tol == 1e-10
    assert settings.log_level == "DEBUG"


def test_config_file_and_explicit_overrides(tmp_path):
    path = tmp_path / "modpress.json"
    path.write_text(json.dumps({"t_max": 7.0, "max_states": 1000}), encoding="utf-8")
    settings = load_settings(str(path), max_states=500)
    assert settings.t_max == 7.0
    assert settings.max_states == 500


def test_sample_config_is_valid():
    settings = load_settings(str(SAMPLES / "sample_modpress.json"))
    assert settings.t_max_limit == 40.0


def test_missing_config_file():
    with pytest.raises(FileNotFoundError):
        load_settings("does-not-exist.json")


def test_invalid_settings():
    with pytest.raises(ValidationError):
        load_settings(max_states=0)


def test_installed_settings_are_process_wide():
    use_settings(load_settings(t_max=9.0))
    assert get_settings().t_max == 9.0
    use_settings(None)
    assert get_settings().t_max == 5.0

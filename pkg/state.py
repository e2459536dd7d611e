"""
State management for the flow-analysis workflow.
Defines the state schema that will be passed between nodes in the LangGraph.
"""

from typing import Any, Dict, List, Optional, TypedDict

from core.flow_pressure import (EquilibriumReport, FlowParams, FlowPotentialSpec, OscillationReport,
                                PressureCurve, RootDiagnosis)


class AnalysisState(TypedDict, total=False):
    """Main state object passed between nodes in the workflow."""
    # Input
    spec_descriptor: Optional[Dict[str, Any]]  # raw flow potential descriptor (JSON)
    params_input: Optional[Dict[str, Any]]  # N, k, tol and scan range overrides
    expected_verdict: Optional[str]  # verdict to compare the diagnosis against
    entropy_bounds: Optional[List[float]]  # [lower, upper] used by the oscillation check
    t_grid: Optional[List[float]]  # optional pressure-curve grid

    # Prepared inputs
    spec: Optional[FlowPotentialSpec]
    params: Optional[FlowParams]

    # Results
    root: Optional[RootDiagnosis]
    equilibrium: Optional[EquilibriumReport]
    oscillation: Optional[OscillationReport]
    curve: Optional[PressureCurve]
    notes: Optional[List[str]]  # skipped stages and other remarks

    # Final output
    report: Optional[Dict[str, Any]]  # JSON report assembled from the results
    inconclusive: Optional[bool]

    # Error handling
    error: Optional[str]  # Any error messages
    error_node: Optional[str]  # Which node had the error
    error_kind: Optional[str]  # usage | domain | budget | internal

"""
Assemble Report Node - Final Stage: Collects every result into one JSON report.
"""

from state import AnalysisState
from .utils import banner, record_error, status


def assemble_report(state: AnalysisState) -> AnalysisState:
    """
    Builds state['report'] with the layout {P_Phi, kind, pressure_at_root, t_star, params, ...}.

    Args:
        state: Workflow state with the computed results

    Returns:
        Updated state with the report
    """
    banner("📝 Final Stage: Assembling Report")

    try:
        if state.get('error'):
            return state

        report = state['root'].to_dict()
        report['spec'] = state['spec'].describe()
        if state.get('equilibrium') is not None:
            equilibrium = state['equilibrium'].to_dict()
            equilibrium.pop('root')
            report['equilibrium'] = equilibrium
        if state.get('oscillation') is not None:
            report['oscillation'] = state['oscillation'].to_dict()
        if state.get('curve') is not None:
            report['curve'] = state['curve'].to_dict()
        if state.get('notes'):
            report['notes'] = report.get('notes', []) + state['notes']

        state['report'] = report
        status("✅ Report ready")
        return state

    except Exception as e:
        return record_error(state, "assemble_report", e)

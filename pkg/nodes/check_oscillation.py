"""
Check Oscillation Node - Stage 4: Small-oscillation criterion for bounded potentials.
"""

from core.flow_pressure import small_oscillation_check
from core.intervals import CertifiedInterval
from state import AnalysisState
from .utils import banner, record_error, status


def check_oscillation(state: AnalysisState) -> AnalysisState:
    """
    Runs small_oscillation_check, using supplied entropy bounds when present.

    Args:
        state: Workflow state with a bounded spec

    Returns:
        Updated state with the oscillation report
    """
    banner("〰️ Stage 4: Small Oscillation Check")

    try:
        if state.get('error'):
            return state

        bounds = state.get('entropy_bounds')
        entropy_bounds = CertifiedInterval(*bounds) if bounds else None
        report = small_oscillation_check(state['spec'], state['params'], entropy_bounds)
        state['oscillation'] = report

        if report.holds:
            status(f"✅ Condition holds with margin {report.margin:.4f}")
            if report.bracket_verified is False:
                status("⚠️ Pressure bracket could not be verified at this truncation")
        else:
            status(f"⚠️ Condition fails (margin {report.margin:.4f})")
        return state

    except Exception as e:
        return record_error(state, "check_oscillation", e)

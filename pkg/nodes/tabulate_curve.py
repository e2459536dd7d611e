"""
Tabulate Curve Node - Stage 5: Pressure enclosures along a t-grid.
"""

from core.flow_pressure import pressure_curve
from state import AnalysisState
from .utils import banner, record_error, status


def tabulate_curve(state: AnalysisState) -> AnalysisState:
    """
    Runs pressure_curve on the requested grid.

    Args:
        state: Workflow state with spec, params and t_grid

    Returns:
        Updated state with the curve
    """
    banner("📈 Stage 5: Pressure Curve")

    try:
        if state.get('error'):
            return state

        curve = pressure_curve(state['spec'], state['t_grid'], state['params'])
        state['curve'] = curve

        status(f"✅ {len(curve.table)} grid points tabulated")
        status(f"   • monotone decrease: {'consistent' if curve.monotone else 'violated'}")
        status(f"   • convexity: {'consistent' if curve.convex else 'violated'}")
        return state

    except Exception as e:
        return record_error(state, "tabulate_curve", e)

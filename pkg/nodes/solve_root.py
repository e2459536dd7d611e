"""
Solve Root Node - Stage 2: Encloses P_Phi(F) by certified bisection.
"""

from core.flow_pressure import flow_pressure
from state import AnalysisState
from .utils import banner, record_error, status


def solve_root(state: AnalysisState) -> AnalysisState:
    """
    Runs flow_pressure on the prepared spec.

    Args:
        state: Workflow state with spec and params

    Returns:
        Updated state with the root diagnosis
    """
    banner("📐 Stage 2: Solving for the Flow Pressure")

    try:
        if state.get('error'):
            return state

        root = flow_pressure(state['spec'], state['params'])
        state['root'] = root

        if root.kind == "Infinite":
            status("⚠️ No certified IN point in the scan range: P_Phi = +infinity")
        else:
            status(f"✅ P_Phi in [{root.P_Phi.lower:.6f}, {root.P_Phi.upper:.6f}] ({root.kind})")
            status(f"   • pressure at the root in [{root.pressure_at_root.lower:.6f}, "
                   f"{root.pressure_at_root.upper:.6f}]")
        status(f"   • {len(root.evaluations)} pressure evaluations")
        return state

    except Exception as e:
        return record_error(state, "solve_root", e)

"""
Diagnose Equilibrium Node - Stage 3: Decides whether an equilibrium measure exists.
"""

from core.flow_pressure import equilibrium_diagnosis
from state import AnalysisState
from .utils import banner, record_error, status


def diagnose_equilibrium(state: AnalysisState) -> AnalysisState:
    """
    Runs equilibrium_diagnosis on the root found by the previous stage.

    Args:
        state: Workflow state with spec, params and root

    Returns:
        Updated state with the equilibrium report (skipped when P_Phi is infinite)
    """
    banner("⚖️ Stage 3: Equilibrium Diagnosis")

    try:
        if state.get('error'):
            return state

        root = state['root']
        if root.kind == "Infinite":
            state['notes'] = (state.get('notes') or []) + ["equilibrium diagnosis skipped: P_Phi infinite"]
            status("⚠️ Skipped: P_Phi is infinite")
            return state

        report = equilibrium_diagnosis(state['spec'], state['params'],
                                       state.get('expected_verdict'), root)
        state['equilibrium'] = report
        state['inconclusive'] = report.verdict == "inconclusive"

        status(f"✅ Verdict: {report.verdict} ({report.reason})")
        status(f"   • integral of the roof in [{report.roof_integral.lower:.6f}, "
               f"{report.roof_integral.upper:.6f}], tail estimate {report.tail_estimate:.3e}")
        if report.matches_expected is not None:
            agreement = "agrees with" if report.matches_expected else "differs from"
            state['notes'] = (state.get('notes') or []) + [
                f"computed verdict {report.verdict} {agreement} expected {report.expected_verdict}"]
        if report.matches_expected is False:
            status(f"⚠️ Expected verdict was {report.expected_verdict}")
        return state

    except Exception as e:
        return record_error(state, "diagnose_equilibrium", e)

"""
modpress - Main Workflow Orchestrator and command line
Runs the thermodynamic-formalism computations for the positive geodesic flow and uses
LangGraph to drive the multi-stage flow-pressure analysis.
"""

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from langgraph.graph import END, StateGraph
from pydantic import BaseModel, Field, ValidationError, model_validator

from core.checks import oracle_convergence, roundtrip_check, tau_box_check
from core.flow_pressure import FlowParams, entropy_report
from core.geodesic_coding import (GeodesicEndpoints, SymbolicCode, arithmetic_code,
                                  endpoints_from_periodic_code, geometric_code, is_positive)
from core.measures import (gibbs_ratio_check, pressure_derivative_check, random_markov_measure,
                           rpf_measure, variational_check)
from core.pressure_engine import (CylinderPotential, PotentialDescriptor,
                                  full_shift_series_pressure, pressure, word_length)
from core.quadratic import QuadraticIrrational
from core.shift_core import TransitionRule, truncate
from settings_loader import ModpressSettings, load_settings, use_settings
from state import AnalysisState

# Import all node functions - with validation
try:
    from nodes.assemble_report import assemble_report
    from nodes.check_oscillation import check_oscillation
    from nodes.diagnose_equilibrium import diagnose_equilibrium
    from nodes.prepare_spec import prepare_spec
    from nodes.solve_root import solve_root
    from nodes.tabulate_curve import tabulate_curve
    from nodes.utils import classify_error, dump_json, status
except ImportError as e:
    print(f"❌ Error importing node modules: {e}", file=sys.stderr)
    print("Please ensure all node files are present in the 'nodes/' directory.", file=sys.stderr)
    sys.exit(1)

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_INCONCLUSIVE = 0, 1, 2, 3
EXIT_CODES = {"usage": EXIT_USAGE, "domain": EXIT_DOMAIN, "budget": EXIT_INCONCLUSIVE,
              "internal": EXIT_DOMAIN}


def configure_logging(settings: ModpressSettings):
    """
    Route log records to stderr and, when configured, to a log file.

    Args:
        settings: Active settings (log_level, log_file)
    """
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file, encoding='utf-8'))
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


# ----------------------------------------------------------------------------
# Flow-analysis workflow
# ----------------------------------------------------------------------------

def check_error(state: AnalysisState) -> str:
    """
    Check if a stage recorded an error and route accordingly.

    Any recorded error ends the run, whatever its error_kind: 'usage' (malformed
    descriptor or parameters), 'domain' (a ModpressError such as DomainError or
    ConditionInapplicable), 'budget' (UnbracketedRoot, OracleScaleExceeded or
    TailNotCertifiable within the configured range) or 'internal'. The kind is kept
    in the state for the CLI exit-code mapping.

    Args:
        state: Current workflow state

    Returns:
        END on error, otherwise "continue"
    """
    if state.get('error'):
        return END
    return "continue"


def route_optional(state: AnalysisState) -> str:
    """
    Route to the optional stages that apply to this run.

    Args:
        state: Current workflow state

    Returns:
        'check_oscillation', 'tabulate_curve', 'assemble_report' or END
    """
    if state.get('error'):
        return END
    spec = state['spec']
    if spec.bounded and spec.rule.is_countable and state.get('oscillation') is None:
        return "check_oscillation"
    if state.get('t_grid') and state.get('curve') is None:
        return "tabulate_curve"
    return "assemble_report"


def create_workflow():
    """
    Creates and configures the LangGraph workflow for the flow-pressure analysis.

    Returns:
        Compiled workflow
    """
    workflow = StateGraph(AnalysisState)

    workflow.add_node("prepare_spec", prepare_spec)
    workflow.add_node("solve_root", solve_root)
    workflow.add_node("diagnose_equilibrium", diagnose_equilibrium)
    workflow.add_node("check_oscillation", check_oscillation)
    workflow.add_node("tabulate_curve", tabulate_curve)
    workflow.add_node("assemble_report", assemble_report)

    workflow.set_entry_point("prepare_spec")

    workflow.add_conditional_edges(
        "prepare_spec",
        check_error,
        {
            "continue": "solve_root",
            END: END
        }
    )

    workflow.add_conditional_edges(
        "solve_root",
        check_error,
        {
            "continue": "diagnose_equilibrium",
            END: END
        }
    )

    optional = {
        "check_oscillation": "check_oscillation",
        "tabulate_curve": "tabulate_curve",
        "assemble_report": "assemble_report",
        END: END
    }
    workflow.add_conditional_edges("diagnose_equilibrium", route_optional, optional)
    workflow.add_conditional_edges("check_oscillation", route_optional, optional)
    workflow.add_conditional_edges("tabulate_curve", route_optional, optional)

    workflow.add_edge("assemble_report", END)

    return workflow.compile()


def run_analysis(initial_state: AnalysisState) -> AnalysisState:
    """Stream the workflow and return the last node's state."""
    workflow = create_workflow()
    final_state = initial_state
    for update in workflow.stream(initial_state):
        # The stream yields dictionaries with node names as keys
        for node_name, node_state in update.items():
            if node_name != "__end__" and node_state:
                final_state = {**final_state, **node_state}
    return final_state


def display_summary(state: Dict[str, Any]):
    """
    Display a summary of the completed analysis on stderr.

    Args:
        state: Final workflow state
    """
    status("\n" + "=" * 60)
    status("📊 ANALYSIS SUMMARY")
    status("=" * 60)

    if state.get('error'):
        status("\n❌ Analysis ended with error:")
        status(f"   Error: {state['error']}")
        status(f"   Node: {state.get('error_node', 'Unknown')}")
        return

    root = state.get('root')
    if root is not None:
        status(f"\n✅ P_Phi: [{root.P_Phi.lower:.6f}, {root.P_Phi.upper:.6f}] ({root.kind})")
    if state.get('equilibrium') is not None:
        status(f"   • Equilibrium: {state['equilibrium'].verdict}")
    if state.get('oscillation') is not None:
        status(f"   • Small oscillation: {'holds' if state['oscillation'].holds else 'fails'}")
    if state.get('curve') is not None:
        curve = state['curve']
        status(f"   • Curve: monotone={curve.monotone}, convex={curve.convex}")


# ----------------------------------------------------------------------------
# Command line
# ----------------------------------------------------------------------------

class UsageError(Exception):
    """Malformed command line."""


class ModpressArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class RunConfig(BaseModel):
    """Validated parameters shared by the subcommands."""

    command: Literal["pressure", "flow-pressure", "entropy", "code", "positivity", "gibbs", "check"]
    rule: TransitionRule = Field(default_factory=TransitionRule.modular)
    potential: Optional[PotentialDescriptor] = None
    N: int = Field(200, ge=1)
    k: int = Field(2, ge=1, le=4)
    tol: Optional[float] = Field(None, gt=0)
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    output: Optional[str] = None
    fmt: Literal["json", "csv"] = "json"
    seed: int = 0

    @model_validator(mode="after")
    def _modular_level(self) -> 'RunConfig':
        if self.rule == TransitionRule.modular() and self.N < 6:
            raise ValueError("N must be at least 6 for the modular shift")
        return self

    def describe(self) -> dict:
        return {"N": self.N, "k": self.k, "tol": self.tol}


def load_json_arg(text: Optional[str]) -> Optional[Any]:
    """Parse a JSON argument given inline or as a path to a file."""
    if text is None:
        return None
    path = Path(text)
    if path.suffix == ".json" or (len(text) < 255 and path.is_file()):
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    return json.loads(text)


def parse_int_list(text: str) -> List[int]:
    """'1-5' or '6,8,10'."""
    if "-" in text and "," not in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def parse_float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def parse_real(text: str) -> QuadraticIrrational:
    """'7/2', '3.25' or 'p,q,d' for p + q sqrt(d) with rational p and q."""
    parts = [part.strip() for part in text.split(",")]
    if len(parts) == 3:
        return QuadraticIrrational(Fraction(parts[0]), Fraction(parts[1]), int(parts[2]))
    if len(parts) == 1:
        return QuadraticIrrational(Fraction(parts[0]))
    raise ValueError(f"cannot parse endpoint '{text}'")


def build_parser() -> ModpressArgumentParser:
    parser = ModpressArgumentParser(prog="modpress", description=__doc__.strip().splitlines()[1])
    parser.add_argument("--config", help="JSON settings file")
    parser.add_argument("--log-level", help="Logging level (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ModpressArgumentParser)

    def common(p, N=200, k=2):
        p.add_argument("--rule", help="Transition rule JSON (inline or file); default: modular")
        p.add_argument("--N", type=int, default=N, help="Truncation level")
        p.add_argument("--k", type=int, default=k, help="Cylinder depth")
        p.add_argument("--tol", type=float, help="Tolerance")
        p.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
        p.add_argument("--output", help="Write the artifact to this path instead of stdout")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("pressure", help="Pressure enclosure of a potential")
    common(p)
    p.add_argument("--potential", help="Potential descriptor JSON (inline or file)")
    p.add_argument("--levels", help="Comma separated truncation levels for a convergence table")
    p.add_argument("--series", action="store_true",
                   help="Closed-form series pressure for full shifts with 1-cylinder weights")

    p = sub.add_parser("flow-pressure", help="Flow pressure, equilibrium diagnosis and checks")
    common(p)
    p.add_argument("--spec", help="Flow potential descriptor JSON (inline or file)")
    p.add_argument("--t-grid", help="Comma separated t values for a pressure curve")
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--expected", help="Expected equilibrium verdict")
    p.add_argument("--entropy-bounds", help="lower,upper entropy bounds for the oscillation check")

    p = sub.add_parser("entropy", help="Topological entropy of the flow")
    common(p)
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)

    p = sub.add_parser("code", help="Arithmetic or geometric code of a geodesic")
    p.add_argument("kind", choices=["arithmetic", "geometric"])
    p.add_argument("--periodic-code", help="Periodic block, e.g. '6,3'")
    p.add_argument("--u", help="Endpoint u ('7/2' or 'p,q,d' for p + q sqrt d)")
    p.add_argument("--w", help="Endpoint w")
    p.add_argument("--terms", type=int, default=6)
    p.add_argument("--backward", type=int, default=0, help="Backward terms (arithmetic)")
    p.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
    p.add_argument("--output")

    p = sub.add_parser("positivity", help="Admissibility of a code for the modular shift")
    p.add_argument("--code", required=True)
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
    p.add_argument("--output")

    p = sub.add_parser("gibbs", help="Gibbs ratio check of an RPF measure")
    common(p, N=20, k=1)
    p.add_argument("--potential", help="Potential descriptor JSON (inline or file)")
    p.add_argument("--depths", default="1-5")
    p.add_argument("--negative-control", action="store_true",
                   help="Use a biased random measure instead of the RPF measure")

    p = sub.add_parser("check", help="Reproducible numerical checks")
    p.add_argument("name", choices=["variational", "oracle", "derivative", "roundtrip", "tau-box"])
    common(p, N=20, k=1)
    p.add_argument("--potential", help="Potential descriptor JSON (inline or file)")
    p.add_argument("--samples", type=int)
    p.add_argument("--periods", default="6-12")
    p.add_argument("--t0", type=float, default=0.8)
    p.add_argument("--flow-upper", type=float, help="Upper bound of the flow pressure")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    rule = load_json_arg(getattr(args, "rule", None))
    potential = load_json_arg(getattr(args, "potential", None))
    data = {
        "command": args.command,
        "N": getattr(args, "N", 200),
        "k": getattr(args, "k", 2),
        "tol": getattr(args, "tol", None),
        "t_min": getattr(args, "t_min", None),
        "t_max": getattr(args, "t_max", None),
        "output": getattr(args, "output", None),
        "fmt": getattr(args, "fmt", "json"),
        "seed": getattr(args, "seed", 0),
    }
    if rule is not None:
        data["rule"] = rule
    if potential is not None:
        data["potential"] = potential
    return RunConfig.model_validate(data)


def _potential(config: RunConfig) -> CylinderPotential:
    if config.potential is None:
        return CylinderPotential.zero(config.k)
    return config.potential.to_potential()


def cmd_pressure(config: RunConfig, args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    pot = _potential(config)
    if args.series:
        rule = config.rule
        if rule.forbidden_pairs or not rule.is_countable or pot.table or pot.tau_coef:
            raise ValueError("--series needs a full shift and a 1-cylinder potential without tau")
        start = max(config.rule.alphabet_min, pot.min_symbol)
        result = full_shift_series_pressure(pot.inf_series(start))
        return {**result.to_dict(), "params": {"series": True}}, None, EXIT_OK

    levels = parse_int_list(args.levels) if args.levels else [config.N]
    rows = []
    results = []
    for N in levels:
        result = pressure(config.rule, pot, N, config.k, config.tol)
        results.append(result)
        rows.append({"N": N, "k": config.k, "tol": result.diagnostics["tol"], "lower": result.lower,
                     "upper": result.upper, "infinite": result.infinite,
                     "converged": result.diagnostics.get("converged", True)})
    table = pd.DataFrame(rows)
    code = EXIT_OK if bool(table["converged"].all()) else EXIT_INCONCLUSIVE
    if len(levels) == 1:
        payload = {**results[0].to_dict(), "params": {**config.describe(), "tol": rows[0]["tol"]}}
    else:
        payload = {"rows": table.to_dict(orient="records"), "params": config.describe()}
    return payload, table, code


def cmd_flow_pressure(config: RunConfig, args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    params = {"N": config.N, "k": config.k, "t_min": config.t_min, "t_max": config.t_max}
    if config.tol is not None:
        params["tol"] = config.tol
    initial_state: AnalysisState = {
        "spec_descriptor": load_json_arg(args.spec) or {},
        "params_input": params,
        "expected_verdict": args.expected,
        "entropy_bounds": parse_float_list(args.entropy_bounds) if args.entropy_bounds else None,
        "t_grid": parse_float_list(args.t_grid) if args.t_grid else None,
    }
    final_state = run_analysis(initial_state)
    display_summary(final_state)
    if final_state.get('error'):
        return ({"error": final_state['error'], "error_node": final_state.get('error_node')},
                None, EXIT_CODES.get(final_state.get('error_kind'), EXIT_DOMAIN))
    report = final_state['report']
    curve = final_state.get('curve')
    code = EXIT_INCONCLUSIVE if final_state.get('inconclusive') else EXIT_OK
    table = curve.table if curve is not None else pd.json_normalize(
        {k: v for k, v in report.items() if k not in ("evaluations", "notes")})
    return report, table, code


def cmd_entropy(config: RunConfig, args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    params = FlowParams(N=config.N, k=config.k, tol=config.tol or 1e-3,
                        t_min=config.t_min, t_max=config.t_max)
    diag = entropy_report(params, config.rule)
    payload = {"lower": diag.P_Phi.lower, "upper": diag.P_Phi.upper, "kind": diag.kind,
               "params": diag.params, "branches": diag.diagnostics,
               "evaluations": [e.to_dict() for e in diag.evaluations]}
    table = pd.DataFrame([{"lower": diag.P_Phi.lower, "upper": diag.P_Phi.upper, **diag.params}])
    return payload, table, EXIT_OK


def cmd_code(args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    if args.periodic_code:
        block = SymbolicCode.parse(args.periodic_code, periodic=True)
        g = endpoints_from_periodic_code(block)
    elif args.u and args.w:
        g = GeodesicEndpoints(parse_real(args.u), parse_real(args.w))
    else:
        raise UsageError("give --periodic-code or both --u and --w")
    if args.kind == "geometric":
        code = geometric_code(g, args.terms)
    else:
        code = arithmetic_code(g, args.terms, args.backward)
    payload = {**code.to_dict(), "endpoints": g.to_dict(), "terms": args.terms}
    table = pd.DataFrame({"position": range(len(code.digits)), "digit": code.digits})
    return payload, table, EXIT_OK


def cmd_positivity(args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    code = SymbolicCode.parse(args.code, periodic=args.periodic)
    payload = {"positive": is_positive(code), "code": list(code.digits), "periodic": code.periodic}
    return payload, pd.DataFrame([payload]), EXIT_OK


def cmd_gibbs(config: RunConfig, args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    pot = _potential(config).at_depth(config.k)
    shift = truncate(config.rule, config.N)
    equilibrium = rpf_measure(shift, pot)
    if args.negative_control:
        rng = np.random.default_rng(config.seed)
        measure = random_markov_measure(shift, word_length(pot), rng, bias=1.0)
    else:
        measure = equilibrium
    report = gibbs_ratio_check(measure, pot, equilibrium.log_pressure, parse_int_list(args.depths))
    payload = {**report.to_dict(), "params": config.describe(), "seed": config.seed,
               "negative_control": args.negative_control, "pressure": equilibrium.log_pressure}
    code = EXIT_OK if report.passed or args.negative_control else EXIT_INCONCLUSIVE
    return payload, report.table, code


def cmd_check(config: RunConfig, args) -> Tuple[dict, Optional[pd.DataFrame], int]:
    pot = _potential(config).at_depth(config.k)
    if args.name == "variational":
        roof = CylinderPotential(tau_coef=1.0, depth=config.k) if args.flow_upper is not None else None
        report = variational_check(truncate(config.rule, config.N), pot, args.samples or 20,
                                   config.seed, roof, args.flow_upper)
        payload, table, passed = report.to_dict(), report.table, report.passed
    elif args.name == "oracle":
        report = oracle_convergence(truncate(config.rule, config.N), pot, parse_int_list(args.periods))
        payload, table, passed = report.to_dict(), report.table, report.passed
    elif args.name == "derivative":
        result = pressure_derivative_check(truncate(config.rule, config.N), pot, args.t0)
        passed = result["gap"] <= 1e-4
        payload, table = {**result, "passed": passed}, pd.DataFrame([result])
    elif args.name == "roundtrip":
        report = roundtrip_check(args.samples or 50, config.seed)
        payload, table, passed = report.to_dict(), report.table, report.passed
    else:
        report = tau_box_check(args.samples or 1000, config.seed)
        payload, table, passed = report.to_dict(), report.table, report.passed
    payload = {**payload, "params": {**config.describe(), "seed": config.seed}}
    return payload, table, EXIT_OK if passed else EXIT_INCONCLUSIVE


def emit(payload: dict, table: Optional[pd.DataFrame], fmt: str, output: Optional[str]):
    """Write JSON (the source of truth) or its CSV projection."""
    if fmt == "csv":
        frame = table if table is not None else pd.json_normalize(payload)
        text = frame.to_csv(index=False)
    else:
        text = dump_json(payload) + "\n"
    if output:
        with open(output, 'w', encoding='utf-8') as f:
            f.write(text)
        status(f"✅ Wrote {output}")
    else:
        sys.stdout.write(text)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Execute one subcommand.

    Args:
        argv: Command line arguments (sys.argv[1:] by default)

    Returns:
        Exit code: 0 success, 1 usage, 2 domain error, 3 inconclusive within budget
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"modpress: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        settings = load_settings(args.config, log_level=args.log_level)
    except (FileNotFoundError, json.JSONDecodeError, ValidationError) as e:
        print(f"modpress: error: invalid settings: {e}", file=sys.stderr)
        return EXIT_USAGE
    use_settings(settings)
    configure_logging(settings)

    try:
        if args.command == "code":
            payload, table, code = cmd_code(args)
            fmt, output = args.fmt, args.output
        elif args.command == "positivity":
            payload, table, code = cmd_positivity(args)
            fmt, output = args.fmt, args.output
        else:
            config = make_config(args)
            handler = {"pressure": cmd_pressure, "flow-pressure": cmd_flow_pressure,
                       "entropy": cmd_entropy, "gibbs": cmd_gibbs, "check": cmd_check}[args.command]
            payload, table, code = handler(config, args)
            fmt, output = config.fmt, config.output
    except UsageError as e:
        print(f"modpress: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        kind = classify_error(e)
        if kind == "internal":
            logger.exception("unexpected failure")
        print(f"modpress: error: {e}", file=sys.stderr)
        return EXIT_CODES[kind]

    emit(payload, table, fmt, output)
    return code


def main():
    """
    Main entry point for the modpress command line.
    """
    try:
        sys.exit(run(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\n\n⚠️ Cancelled by user", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()

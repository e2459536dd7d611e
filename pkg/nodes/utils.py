"""
Utility functions for nodes - common functionality used across multiple nodes.
"""

import json
import logging
import math
import sys
from typing import Any, Dict

import numpy as np
from pydantic import ValidationError

from core.errors import ModpressError, OracleScaleExceeded, TailNotCertifiable, UnbracketedRoot

logger = logging.getLogger(__name__)

# errors meaning "not decided within the configured budget"
BUDGET_ERRORS = (UnbracketedRoot, OracleScaleExceeded, TailNotCertifiable)


def banner(title: str):
    """Print a node header to stderr (stdout carries only the emitted artifact)."""
    print("\n" + "-" * 40, file=sys.stderr)
    print(title, file=sys.stderr)
    print("-" * 40, file=sys.stderr)


def status(message: str):
    print(message, file=sys.stderr)


def classify_error(exc: BaseException) -> str:
    """
    Map an exception to an error kind.

    Returns:
        'usage' for malformed descriptors, 'budget' for searches that ran out of range,
        'domain' for mathematical domain errors and 'internal' otherwise
    """
    if isinstance(exc, (ValidationError, json.JSONDecodeError, FileNotFoundError)):
        return "usage"
    if isinstance(exc, BUDGET_ERRORS):
        return "budget"
    if isinstance(exc, (ModpressError, ValueError, ZeroDivisionError)):
        return "domain"
    return "internal"


def record_error(state: Dict[str, Any], node: str, exc: BaseException) -> Dict[str, Any]:
    """Store an exception in the workflow state the way every node reports failures."""
    state['error'] = str(exc)
    state['error_node'] = node
    state['error_kind'] = classify_error(exc)
    status(f"❌ Error in {node}: {exc}")
    if state['error_kind'] == "internal":
        logger.exception(f"unexpected failure in {node}")
    return state


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars, tuples and non-finite floats into JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return None
        return "inf" if value > 0 else "-inf"
    return value


def dump_json(payload: Dict[str, Any]) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2)

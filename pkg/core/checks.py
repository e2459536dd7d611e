"""
Reproducible numerical checks run by the `check` command.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np
import pandas as pd

from core.geodesic_coding import SymbolicCode, endpoints_from_periodic_code, geometric_code
from core.minus_cf import TailModel, eval_minus_cf, tau_bounds
from core.pressure_engine import CylinderPotential, pressure_periodic_oracle, pressure_truncated
from core.shift_core import FiniteShift, TransitionRule, Word

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckReport:
    name: str
    table: pd.DataFrame
    passed: bool
    params: dict

    def to_dict(self) -> dict:
        return {"check": self.name, "rows": self.table.to_dict(orient="records"),
                "passed": self.passed, "params": self.params}


def oracle_convergence(shift: FiniteShift, pot: CylinderPotential,
                       periods: Iterable[int] = range(6, 13), tolerance: float = 1e-3) -> CheckReport:
    """
    Periodic-orbit values against the truncation pressure of the midpoint potential.

    Passes when the distances never grow (up to 1e-12) and the last one is within tolerance.
    """
    enclosure = pressure_truncated(shift, pot)
    target = pressure_truncated(shift, pot.at_midpoints()).midpoint
    rows = []
    for n in periods:
        value = pressure_periodic_oracle(shift, pot, n)
        rows.append({"n": n, "value": value, "distance": abs(value - target),
                     "inside_enclosure": enclosure.contains(value)})
    table = pd.DataFrame(rows)
    distances = table["distance"].to_numpy()
    monotone = bool(np.all(np.diff(distances) <= 1e-12))
    passed = monotone and distances[-1] <= tolerance
    return CheckReport("oracle", table, passed,
                       {"symbols": [shift.symbols[0], shift.symbols[-1]], "target": target,
                        "enclosure": enclosure.to_dict(), "tolerance": tolerance})


def random_periodic_blocks(rng: np.random.Generator, samples: int, max_length: int = 6,
                           max_digit: int = 12) -> List[tuple]:
    """Random blocks whose periodic extension is admissible for the modular rule."""
    rule = TransitionRule.modular()
    blocks = []
    while len(blocks) < samples:
        length = int(rng.integers(1, max_length + 1))
        block = tuple(int(d) for d in rng.integers(3, max_digit + 1, size=length))
        if Word(block, periodic=True).is_admissible(rule):
            blocks.append(block)
    return blocks


def roundtrip_check(samples: int = 50, seed: int = 0, max_length: int = 6,
                    max_digit: int = 12) -> CheckReport:
    """Geometric code of the geodesic of a periodic block reproduces the block up to shift."""
    rng = np.random.default_rng(seed)
    rows = []
    for block in random_periodic_blocks(rng, samples, max_length, max_digit):
        code = SymbolicCode(block, periodic=True)
        geometric = geometric_code(endpoints_from_periodic_code(code), len(block))
        rows.append({"block": ",".join(map(str, block)),
                     "geometric": ",".join(map(str, geometric.digits)),
                     "match": geometric.matches_up_to_shift(code)})
    table = pd.DataFrame(rows)
    return CheckReport("roundtrip", table, bool(table["match"].all()),
                       {"samples": samples, "seed": seed, "max_length": max_length,
                        "max_digit": max_digit})


def random_admissible_word(rng: np.random.Generator, length: int, max_digit: int) -> tuple:
    rule = TransitionRule.modular()
    digits = [int(rng.integers(3, max_digit + 1))]
    while len(digits) < length:
        d = int(rng.integers(3, max_digit + 1))
        if (digits[-1], d) not in rule.forbidden_pairs:
            digits.append(d)
    return tuple(digits)


def tau_box_check(samples: int = 1000, seed: int = 0, max_length: int = 6,
                  max_digit: int = 60) -> CheckReport:
    """
    Roof enclosures computed from the continued fraction alone (no clipping to the box)
    lie inside [2 log(c n1), 2 log n1] up to outward rounding (1e-12 relative).
    """
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(samples):
        word = random_admissible_word(rng, int(rng.integers(1, max_length + 1)), max_digit)
        value = eval_minus_cf(word, TailModel.worst_case()).value.log().scale(2.0)
        box = tau_bounds(word[0]).widened(1e-12)
        rows.append({"word": ",".join(map(str, word)), "lower": value.lower,
                     "upper": value.upper, "inside": box.contains(value)})
    table = pd.DataFrame(rows)
    violations = int((~table["inside"]).sum())
    if violations:
        logger.warning(f"⚠️ {violations} roof enclosures left the box")
    return CheckReport("tau-box", table, violations == 0,
                       {"samples": samples, "seed": seed, "max_length": max_length,
                        "max_digit": max_digit})


__all__ = ["CheckReport", "oracle_convergence", "random_periodic_blocks", "roundtrip_check",
           "random_admissible_word", "tau_box_check"]

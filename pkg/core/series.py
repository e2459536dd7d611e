"""
Positive series with terms exp(C) * n^A * (log n)^B * exp(G n), n >= start.

These are the 1-cylinder weight families of every built-in potential. The class
decides convergence exactly from the exponents, encloses tails with integral and
ratio tests, and produces divergence witnesses (a certified lower bound on a partial
sum exceeding exp(divergence_log_threshold)).
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import gamma, gammaincc, logsumexp

from core.errors import DomainError, TailNotCertifiable
from core.intervals import CertifiedInterval, round_down, round_up
from settings_loader import get_settings

logger = logging.getLogger(__name__)

# explicit summation before a tail bound applies is capped at this many terms
MAX_BRIDGE_TERMS = 10_000_000


class PowerLogSeries(BaseModel):
    """Sum over n >= start of exp(log_scale) n^power (log n)^log_power exp(rate n)."""

    model_config = ConfigDict(frozen=True)

    log_scale: float = 0.0
    power: float = 0.0
    log_power: float = 0.0
    rate: float = 0.0
    start: int = 1

    @model_validator(mode="after")
    def _domain(self) -> PowerLogSeries:
        if self.log_power != 0 and self.start < 2:
            raise ValueError("log powers need start >= 2")
        if self.power != 0 and self.start < 1:
            raise ValueError("powers of n need start >= 1")
        if self.start < 0:
            raise ValueError("start must be non-negative")
        return self

    @classmethod
    def power_log(cls, a: float, b: float = 0.0, start: int = 2) -> PowerLogSeries:
        """lambda_n = n^-a (log n)^-b."""
        return cls(power=-a, log_power=-b, start=start)

    @classmethod
    def geometric(cls, ratio: float, scale: float = 1.0, start: int = 0) -> PowerLogSeries:
        """lambda_n = scale * ratio^n."""
        if not 0 < ratio or scale <= 0:
            raise DomainError("geometric weights need ratio > 0 and scale > 0")
        return cls(log_scale=math.log(scale), rate=math.log(ratio), start=start)

    def with_start(self, start: int) -> PowerLogSeries:
        return self.model_copy(update={"start": start})

    @property
    def converges(self) -> bool:
        if self.rate != 0:
            return self.rate < 0
        if self.power != -1:
            return self.power < -1
        return self.log_power < -1

    def log_terms(self, lo: int, hi: int) -> np.ndarray:
        """Natural logs of the terms for n = lo..hi."""
        n = np.arange(max(lo, self.start), hi + 1, dtype=np.float64)
        out = np.full(n.shape, self.log_scale)
        if self.power:
            out += self.power * np.log(n)
        if self.log_power:
            out += self.log_power * np.log(np.log(n))
        if self.rate:
            out += self.rate * n
        return out

    def log_term(self, n: int) -> float:
        return float(self.log_terms(n, n)[0])

    def log_partial_sum(self, lo: int, hi: int) -> CertifiedInterval:
        """Enclosure of log sum_{n=lo}^{hi} of the terms."""
        terms = self.log_terms(lo, hi)
        if terms.size == 0:
            raise DomainError(f"empty summation range [{lo}, {hi}]")
        total = float(logsumexp(terms))
        # relative error of each log term plus the pairwise summation error
        top = terms[terms >= total - 40.0]
        err = 4 * np.finfo(float).eps * (float(np.max(np.abs(top))) + math.log2(terms.size) + 4)
        return CertifiedInterval(round_down(total - err), round_up(total + err))

    def _decreasing_from(self) -> int:
        """An index from which the terms are nonincreasing (convergent series only)."""
        a_pos = max(self.power, 0.0)
        b_pos = max(self.log_power, 0.0)
        x0 = max(self.start, 3)
        if self.rate < 0:
            x0 = max(x0, math.ceil((a_pos + b_pos) / -self.rate) + 1)
        elif self.log_power > 0:
            # A + B / log x <= 0 with A < -1
            x0 = max(x0, math.ceil(math.exp(self.log_power / -self.power)) + 1)
        return x0

    def _ratio_bound(self, m: int) -> float:
        """Upper bound of term(n+1)/term(n) for all n >= m."""
        r = self.rate
        if self.power > 0:
            r += self.power * math.log1p(1.0 / m)
        if self.log_power > 0:
            r += self.log_power * math.log(math.log(m + 1) / math.log(m))
        return math.exp(r)

    def _tail_from(self, m: int) -> CertifiedInterval:
        """Enclosure of sum_{n >= m} for an m from which the terms are nonincreasing."""
        A, B = self.power, self.log_power
        head = math.exp(self.log_term(m))
        if self.rate < 0:
            if A == 0 and B == 0:
                exact = head / (1.0 - math.exp(self.rate))
                return CertifiedInterval(round_down(exact), round_up(exact))
            m_ratio = m
            while self._ratio_bound(m_ratio) >= 1:
                m_ratio *= 2
            bridge = 0.0
            if m_ratio > m:
                bridge = self._bridge_sum(m, m_ratio - 1).upper
            geometric = math.exp(self.log_term(m_ratio)) / (1.0 - self._ratio_bound(m_ratio))
            return CertifiedInterval(round_down(head), round_up(bridge + geometric, 1e-12))

        L = math.log(m)
        scale = math.exp(self.log_scale)
        if A == -1:
            # integral of u^B du from log m to infinity
            lower = upper = L ** (B + 1) / (-B - 1)
        else:
            lam = -(A + 1)
            if B > -1:
                lower = upper = lam ** -(B + 1) * gamma(B + 1) * gammaincc(B + 1, lam * L)
            else:
                upper = L ** B * math.exp(-lam * L) / lam
                lower = (L + 1) ** B * (math.exp(-lam * L) - math.exp(-lam * (L + 1))) / lam
        if not (math.isfinite(upper) and upper > 0):
            raise TailNotCertifiable(f"tail integral from {m} is not representable")
        return CertifiedInterval(round_down(scale * lower, 1e-12),
                                 round_up(head + scale * upper, 1e-12))

    def _bridge_sum(self, lo: int, hi: int) -> CertifiedInterval:
        if hi - lo > MAX_BRIDGE_TERMS:
            raise TailNotCertifiable(f"terms only become monotone after index {hi}")
        return self.log_partial_sum(lo, hi).exp()

    def tail(self, N: int) -> CertifiedInterval:
        """
        Enclosure of sum_{n > N} of the terms.

        Raises:
            TailNotCertifiable: If the series diverges or monotonicity starts too late
        """
        if not self.converges:
            raise TailNotCertifiable("tail of a divergent series")
        first = max(N + 1, self.start)
        m = max(first, self._decreasing_from())
        tail = self._tail_from(m)
        if m > first:
            tail = tail + self._bridge_sum(first, m - 1)
        return tail

    def log_sum(self, head: Optional[int] = None) -> CertifiedInterval:
        """Enclosure of log of the full sum; head terms are summed explicitly."""
        head = self.start + 100_000 if head is None else max(head, self.start)
        log_head = self.log_partial_sum(self.start, head)
        tail = self.tail(head)
        lower = log_head.lower if tail.lower <= 0 else float(np.logaddexp(log_head.lower, math.log(tail.lower)))
        upper = float(np.logaddexp(log_head.upper, math.log(tail.upper))) if tail.upper > 0 else log_head.upper
        return CertifiedInterval(round_down(lower), round_up(upper))

    def divergence_witness(self) -> dict:
        """
        Certified lower bound of a partial sum exceeding exp(divergence_log_threshold).

        Growing terms are witnessed by a single term at n = 2^j; slowly divergent series
        by a closed-form integral minorant of sum_{n=n1}^{M} over a range where the terms
        are monotone.
        """
        if self.converges:
            raise DomainError("convergent series has no divergence witness")
        threshold = get_settings().divergence_log_threshold
        A, B, G, C = self.power, self.log_power, self.rate, self.log_scale

        if G > 0 or A > 0:
            j = max(2, math.ceil(math.log2(max(self.start, 2))))
            for _ in range(100_000):
                u = j * math.log(2)
                growth = (G * 2.0 ** j if j < 1000 else math.inf) if G else 0.0
                value = C + A * u + B * math.log(u) + growth
                if round_down(value) >= threshold:
                    return {"comparison": "single term", "index": f"2^{j}",
                            "log_index": u, "log_partial_sum_lower": round_down(value),
                            "threshold": threshold}
                j += 1
            raise TailNotCertifiable("divergent series without a witness within the search range")

        # terms are monotone once A + B/u has a constant sign, u = log n
        if A == 0:
            u_switch = 0.0
        else:
            u_switch = max(B / -A, 0.0)
        u1_target = max(u_switch + 1.0, math.log(max(self.start, 3)) + 1.0)
        if u1_target > 700:
            raise TailNotCertifiable("terms only become monotone beyond floating range")
        n1 = math.ceil(math.exp(u1_target))
        U1 = math.log(n1)

        if A == -1:
            if B == -1:
                # log log M - log log n1 >= e^(threshold - C)
                log_UM = math.log(U1) + math.exp(threshold - C + 1e-6)
                log_value = C + math.log(log_UM - math.log(U1))
            else:
                p = B + 1
                log_UM = float(np.logaddexp(math.log(p) + threshold - C + 1e-6,
                                            p * math.log(U1))) / p
                log_value = (C + p * log_UM + math.log1p(-math.exp(p * (math.log(U1) - log_UM)))
                             - math.log(p))
            comparison = "integral of u^B du, u = log n"
        else:
            alpha = A + 1
            UM = U1 + 1.0
            for _ in range(2000):
                gap = math.log1p(-math.exp(alpha * (U1 - UM)))
                log_value = (C + min(B * math.log(U1), B * math.log(UM)) + alpha * UM
                             + gap - math.log(alpha))
                if round_down(log_value) >= threshold:
                    break
                UM *= 2
            log_UM = math.log(UM)
            comparison = "integral of u^B exp((A+1) u) du, u = log n"
        value = round_down(log_value, 1e-12)
        if value < threshold:
            raise TailNotCertifiable("divergence witness did not clear the threshold")
        logger.debug(f"divergence witness: log partial sum >= {value} up to log log M = {log_UM}")
        return {"comparison": comparison, "from_index": n1, "log_log_upper_index": log_UM,
                "log_partial_sum_lower": value, "threshold": threshold}

    def describe(self) -> dict:
        return {"log_scale": self.log_scale, "power": self.power, "log_power": self.log_power,
                "rate": self.rate, "start": self.start}

"""Client selection and round execution for the SFL and FRFL policies.

SFL assumes per-round channel knowledge: every client transmits at its own
maximum rate and the round lasts as long as the slowest upload. FRFL knows
only the gain distribution: all clients share one fixed rate and clients in
outage lose their update for the round.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import FadingModel
from .linkmath import (
    LinkConfig,
    MinGainStats,
    achievable_rate,
    expected_min_rate,
    frfl_round_duration,
    outage_probability,
)

__all__ = ["Policy", "RoundOutcome", "select_clients", "frfl_select_rate", "execute_round"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Policy:
    """Scheduling policy: "sfl", "frfl" (epsilon target), or "frfl_fixed"."""

    kind: str
    epsilon: float | None = None
    rate_bps: float | None = None

    def __post_init__(self):
        if self.kind == "sfl":
            if self.epsilon is not None or self.rate_bps is not None:
                raise ValueError("sfl takes no parameters")
        elif self.kind == "frfl":
            if self.epsilon is None or not 0.0 < self.epsilon < 1.0:
                raise ValueError("frfl epsilon target must lie in (0, 1)")
        elif self.kind == "frfl_fixed":
            if self.rate_bps is None or self.rate_bps <= 0.0:
                raise ValueError("frfl_fixed rate must be positive")
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    @classmethod
    def sfl(cls) -> "Policy":
        return cls("sfl")

    @classmethod
    def frfl(cls, epsilon: float) -> "Policy":
        return cls("frfl", epsilon=epsilon)

    @classmethod
    def frfl_fixed(cls, rate_bps: float) -> "Policy":
        return cls("frfl_fixed", rate_bps=rate_bps)

    @property
    def is_fixed_rate(self) -> bool:
        return self.kind in ("frfl", "frfl_fixed")


@dataclass(frozen=True)
class RoundOutcome:
    """What one communication round produced."""

    selected: np.ndarray
    succeeded: np.ndarray
    duration_s: float
    rate_per_client: np.ndarray
    capped: bool = False

    @property
    def n_succeeded(self) -> int:
        return int(self.succeeded.size)


def select_clients(n_total: int, c: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random subset of exactly c client ids, without replacement."""
    if not 1 <= c <= n_total:
        raise ValueError(f"need 1 <= c <= n_total, got c={c}, n_total={n_total}")
    return rng.choice(n_total, size=c, replace=False)


def frfl_select_rate(cfg: LinkConfig, model: FadingModel, policy: Policy, c: int) -> float:
    """Resolve an FRFL policy to its fixed rate R* in bits/s.

    For an epsilon target, R* is the unique rate whose outage probability
    equals epsilon: B log2(1 + A * quantile(eps)). Logs the realized
    alpha = R* / E[R_min]; the heuristic expects alpha > 1, and a violation
    is reported loudly but does not stop the run.
    """
    if not policy.is_fixed_rate:
        raise ValueError("frfl_select_rate needs an FRFL policy")
    if policy.kind == "frfl":
        h_eps = model.quantile(policy.epsilon)
        rate = cfg.bandwidth_hz * math.log2(1.0 + cfg.quality_factor * h_eps)
    else:
        rate = float(policy.rate_bps)
    e_min = expected_min_rate(cfg, MinGainStats(c, model))
    if e_min > 0.0:
        alpha = rate / e_min
        if alpha <= 1.0:
            logger.warning(
                "FRFL heuristic premise violated: R*=%.6g <= E[R_min]=%.6g (alpha=%.4f)",
                rate, e_min, alpha,
            )
        else:
            logger.info("FRFL rate R*=%.6g bits/s, alpha=R*/E[R_min]=%.4f", rate, alpha)
    return rate


def execute_round(
    policy: Policy,
    cfg: LinkConfig,
    gains,
    *,
    t_ths: float = math.inf,
    frfl_rate: float | None = None,
    client_ids=None,
) -> RoundOutcome:
    """Run one communication round over the given per-client gains.

    SFL: each client uploads at its own rate; the round lasts until the
    slowest finishes, or until t_ths, at which point unfinished clients are
    dropped. FRFL: the round lasts Z/R* and client k succeeds iff its
    channel sustains R*. Pass the resolved R* as `frfl_rate` for an
    epsilon-target policy (see frfl_select_rate).
    """
    h = np.asarray(gains, dtype=float)
    if h.size == 0:
        raise ValueError("gains must be nonempty")
    if np.any(h < 0.0):
        raise ValueError("channel gain h must be nonnegative")
    if client_ids is None:
        ids = np.arange(h.size)
    else:
        ids = np.asarray(client_ids)
        if ids.size != h.size:
            raise ValueError("client_ids and gains must have equal length")

    if policy.kind == "sfl":
        rates = np.asarray(achievable_rate(cfg, h), dtype=float)
        with np.errstate(divide="ignore"):
            times = np.where(rates > 0.0, cfg.payload_bits / rates, math.inf)
        duration = float(times.max())
        if duration > t_ths:
            ok = times <= t_ths
            return RoundOutcome(ids, ids[ok], t_ths, rates, capped=True)
        return RoundOutcome(ids, ids, duration, rates, capped=False)

    rate = float(policy.rate_bps) if policy.kind == "frfl_fixed" else frfl_rate
    if rate is None:
        raise ValueError("epsilon-target FRFL needs frfl_rate (resolve via frfl_select_rate)")
    duration = frfl_round_duration(cfg, rate)
    ok = np.asarray(achievable_rate(cfg, h), dtype=float) >= rate
    rates = np.full(h.size, rate)
    return RoundOutcome(ids, ids[ok], duration, rates, capped=False)

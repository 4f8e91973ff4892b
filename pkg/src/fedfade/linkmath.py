"""Rate, min-gain order statistics, outage, and round-duration formulas.

Everything here is a pure function of immutable inputs; evaluation is safe
to parallelize across grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .channel import FadingModel

__all__ = [
    "LinkConfig",
    "MinGainStats",
    "NumericFailure",
    "achievable_rate",
    "min_gain_cdf",
    "min_gain_pdf",
    "min_gain_quantile",
    "sample_min_gain",
    "expected_min_rate",
    "outage_probability",
    "expected_successful_clients",
    "frfl_round_duration",
    "sfl_round_duration",
]


class NumericFailure(RuntimeError):
    """Raised when a numeric routine cannot reach its accuracy target."""


@dataclass(frozen=True)
class LinkConfig:
    """Uplink parameters shared by every subchannel of one experiment."""

    bandwidth_hz: float
    quality_factor: float
    payload_bits: int

    def __post_init__(self):
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth_hz must be positive")
        if self.quality_factor <= 0.0:
            raise ValueError("quality_factor must be positive")
        if self.payload_bits <= 0:
            raise ValueError("payload_bits must be positive")


@dataclass(frozen=True)
class MinGainStats:
    """Distribution of the minimum gain among `client_count` iid draws."""

    client_count: int
    base_model: FadingModel

    def __post_init__(self):
        if self.client_count < 1:
            raise ValueError("client_count must be >= 1")


def achievable_rate(cfg: LinkConfig, h):
    """Shannon rate B * log2(1 + h*A) in bits/s; zero at h = 0."""
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("channel gain h must be nonnegative")
    val = cfg.bandwidth_hz * np.log2(1.0 + arr * cfg.quality_factor)
    return val if val.ndim else float(val)


def min_gain_cdf(stats: MinGainStats, h):
    base = np.asarray(stats.base_model.cdf(h), dtype=float)
    val = 1.0 - (1.0 - base) ** stats.client_count
    return val if val.ndim else float(val)


def min_gain_pdf(stats: MinGainStats, h):
    c = stats.client_count
    base_cdf = np.asarray(stats.base_model.cdf(h), dtype=float)
    base_pdf = np.asarray(stats.base_model.pdf(h), dtype=float)
    val = c * (1.0 - base_cdf) ** (c - 1) * base_pdf
    return val if val.ndim else float(val)


def min_gain_quantile(stats: MinGainStats, p):
    """h with min_gain_cdf(h) = p, via the base quantile at 1 - (1-p)^(1/C)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("quantile requires 0 <= p < 1")
    base_p = -np.expm1(np.log1p(-p_arr) / stats.client_count)
    return stats.base_model.quantile(base_p)


def sample_min_gain(stats: MinGainStats, rng: np.random.Generator, size: int) -> np.ndarray:
    """Minimum of `client_count` iid gains, one per simulated round."""
    c = stats.client_count
    out = np.empty(size)
    # Chunked so size * client_count draws never blow up memory.
    chunk = max(1, 8_000_000 // c)
    for start in range(0, size, chunk):
        n = min(chunk, size - start)
        draws = stats.base_model.sample(rng, size=(n, c))
        out[start : start + n] = draws.min(axis=1)
    return out


def expected_min_rate(
    cfg: LinkConfig,
    stats: MinGainStats,
    method: str = "quadrature",
    *,
    n: int = 200_000,
    rng: np.random.Generator | None = None,
) -> float:
    """E[B log2(1 + h_min A)] in bits/s.

    `method` is "quadrature" (adaptive Gauss-Kronrod against the min-gain
    pdf, absolute tolerance 1e-7 on the dimensionless integral) or
    "monte_carlo" (mean over `n` simulated rounds, needs `rng`).
    """
    a = cfg.quality_factor
    if method == "quadrature":
        # Upper limit where the min-gain cdf reaches 1 - 1e-7.
        h_hi = min_gain_quantile(stats, 1.0 - 1e-7)

        def integrand(h):
            return math.log2(1.0 + h * a) * min_gain_pdf(stats, h)

        result = integrate.quad(integrand, 0.0, h_hi, epsabs=1e-7, epsrel=1e-10,
                                limit=300, full_output=1)
        if len(result) > 3:
            raise NumericFailure(f"expected_min_rate quadrature did not converge: {result[3]}")
        value, abserr = result[0], result[1]
        if abserr > 1e-6:
            raise NumericFailure(f"expected_min_rate quadrature error {abserr:g} above tolerance")
        return cfg.bandwidth_hz * value
    if method == "monte_carlo":
        if rng is None:
            raise ValueError("monte_carlo method needs an explicit rng")
        if n < 1:
            raise ValueError("monte_carlo sample count must be >= 1")
        mins = sample_min_gain(stats, rng, n)
        return float(np.mean(cfg.bandwidth_hz * np.log2(1.0 + mins * a)))
    raise ValueError(f"unknown method {method!r}")


def outage_probability(cfg: LinkConfig, model: FadingModel, rate):
    """Probability the chosen rate exceeds the instantaneous capacity."""
    arr = np.asarray(rate, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("rate must be nonnegative")
    threshold = (np.exp2(arr / cfg.bandwidth_hz) - 1.0) / cfg.quality_factor
    val = np.asarray(model.cdf(threshold), dtype=float)
    return val if val.ndim else float(val)


def expected_successful_clients(cfg: LinkConfig, model: FadingModel, rate, c: int) -> float:
    if c < 1:
        raise ValueError("client count c must be >= 1")
    return c * (1.0 - outage_probability(cfg, model, rate))


def frfl_round_duration(cfg: LinkConfig, rate: float) -> float:
    """Z / rate: the constant round length of a fixed-rate policy."""
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    return cfg.payload_bits / rate


def sfl_round_duration(cfg: LinkConfig, gains) -> float:
    """max_k Z/R_k, set by the minimum gain; inf flags a stalled round."""
    arr = np.asarray(gains, dtype=float)
    if arr.size == 0:
        raise ValueError("gains must be nonempty")
    if np.any(arr < 0.0):
        raise ValueError("channel gain h must be nonnegative")
    h_min = float(arr.min())
    if h_min == 0.0:
        return math.inf
    return cfg.payload_bits / achievable_rate(cfg, h_min)

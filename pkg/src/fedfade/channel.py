"""Channel-gain distributions: Rayleigh, Rician, and Nakagami fading.

Each model exposes cdf/pdf/quantile plus a seedable sampler. Gains are
amplitude-style and iid across clients, subchannels, and rounds; model
objects are immutable and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "FadingModel",
    "Rayleigh",
    "Rician",
    "Nakagami",
    "marcum_q1",
    "model_from_spec",
]

# Largest Poisson mean the Marcum-Q series handles before exp(-lam) underflows.
_MARCUM_MAX_LAMBDA = 700.0


def marcum_q1(a: float, b) -> np.ndarray | float:
    """First-order Marcum Q-function Q1(a, b).

    Evaluated as a Poisson mixture of Erlang survival functions,
    Q1(a, b) = sum_j Pois(j; a^2/2) * P[Erlang(j+1) > b^2/2],
    truncated once the remaining Poisson mass is below 1e-13, which bounds
    the absolute error by the same amount. `b` may be an array.
    """
    lam = 0.5 * a * a
    if lam > _MARCUM_MAX_LAMBDA:
        raise ValueError(f"Marcum-Q series requires a^2/2 <= {_MARCUM_MAX_LAMBDA}, got {lam:g}")
    b_arr = np.asarray(b, dtype=float)
    y = 0.5 * b_arr * b_arr
    # Erlang survival S_j = sum_{i<=j} e^-y y^i / i!, built by recurrence.
    term = np.exp(-y)
    surv = term.copy()
    weight = math.exp(-lam)
    weight_sum = weight
    total = weight * surv
    j_max = int(lam + 12.0 * math.sqrt(lam + 1.0) + 30.0)
    for j in range(1, j_max + 1):
        term = term * y / j
        surv = surv + term
        weight = weight * lam / j
        weight_sum += weight
        total = total + weight * surv
        if 1.0 - weight_sum < 1e-13:
            break
    out = np.clip(total, 0.0, 1.0)
    return out if out.ndim else float(out)


def _check_nonneg(h) -> np.ndarray:
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("channel gain h must be nonnegative")
    return arr


def _scalar_like(value: np.ndarray, template) -> np.ndarray | float:
    return value if np.asarray(template).ndim else float(value)


@dataclass(frozen=True)
class FadingModel:
    """Base class for the gain distributions; subclasses fill in the math."""

    sigma2: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0.0:
            raise ValueError("sigma2 must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def label(self) -> str:
        return type(self).__name__.lower()

    def cdf(self, h):
        raise NotImplementedError

    def pdf(self, h):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def quantile(self, p):
        """Invert the cdf by bisection; |cdf(result) - p| <= 1e-9."""
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr < 0.0) or np.any(p_arr >= 1.0):
            raise ValueError("quantile requires 0 <= p < 1")
        out = np.empty_like(p_arr, dtype=float)
        for idx, pv in np.ndenumerate(p_arr):
            out[idx] = self._bisect_quantile(float(pv))
        return _scalar_like(out, p)

    def _bisect_quantile(self, p: float) -> float:
        if p == 0.0:
            return 0.0
        lo, hi = 0.0, self.sigma
        while self.cdf(hi) <= p:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = self.cdf(mid)
            if abs(fm - p) <= 1e-9:
                return mid
            if fm < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Rayleigh(FadingModel):
    """Single diffuse component; F(h) = 1 - exp(-h^2 / (2 sigma2)).

    Note E[h^2] = 2*sigma2 under this cdf (the scale enters as the
    per-component variance, not the mean-square gain).
    """

    def cdf(self, h):
        arr = _check_nonneg(h)
        return _scalar_like(-np.expm1(-arr * arr / (2.0 * self.sigma2)), h)

    def pdf(self, h):
        arr = _check_nonneg(h)
        val = (arr / self.sigma2) * np.exp(-arr * arr / (2.0 * self.sigma2))
        return _scalar_like(val, h)

    def quantile(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr < 0.0) or np.any(p_arr >= 1.0):
            raise ValueError("quantile requires 0 <= p < 1")
        val = self.sigma * np.sqrt(-2.0 * np.log1p(-p_arr))
        return _scalar_like(val, p)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.rayleigh(scale=self.sigma, size=size)


@dataclass(frozen=True)
class Rician(FadingModel):
    """Dominant specular path plus diffuse scatter.

    K is the linear power ratio nu^2 / (2 sigma2); the specular amplitude is
    nu = sigma * sqrt(2K). F(h) = 1 - Q1(nu/sigma, h/sigma).
    """

    k_factor: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.k_factor < 0.0:
            raise ValueError("Rician K must be nonnegative")

    @property
    def nu(self) -> float:
        return self.sigma * math.sqrt(2.0 * self.k_factor)

    def cdf(self, h):
        arr = _check_nonneg(h)
        val = 1.0 - marcum_q1(self.nu / self.sigma, arr / self.sigma)
        return _scalar_like(np.asarray(val), h)

    def pdf(self, h):
        arr = _check_nonneg(h)
        s2 = self.sigma2
        # i0e keeps the Bessel factor bounded; the exponent collapses to
        # -(h - nu)^2 / (2 sigma2).
        val = (arr / s2) * special.i0e(arr * self.nu / s2) * np.exp(
            -((arr - self.nu) ** 2) / (2.0 * s2)
        )
        return _scalar_like(val, h)

    def sample(self, rng: np.random.Generator, size=None):
        x = self.nu + self.sigma * rng.standard_normal(size)
        y = self.sigma * rng.standard_normal(size)
        return np.hypot(x, y)


@dataclass(frozen=True)
class Nakagami(FadingModel):
    """m iid diffuse clusters with mean diffuse power sigma2.

    F(h) = gammainc(m, m h^2 / sigma2) with the regularized lower
    incomplete gamma function.
    """

    m: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.m < 0.5:
            raise ValueError("Nakagami shape m must be >= 0.5")

    def cdf(self, h):
        arr = _check_nonneg(h)
        val = special.gammainc(self.m, self.m * arr * arr / self.sigma2)
        return _scalar_like(val, h)

    def pdf(self, h):
        arr = _check_nonneg(h)
        m, s2 = self.m, self.sigma2
        log_h = np.log(arr, where=arr > 0, out=np.zeros_like(arr))
        log_val = (
            m * math.log(m)
            + (2.0 * m - 1.0) * log_h
            - m * arr * arr / s2
            - special.gammaln(m)
            - m * math.log(s2)
        )
        val = 2.0 * np.exp(log_val)
        # h = 0: zero density except at the m = 1/2 half-normal edge.
        at_zero = 2.0 * m**m / (math.gamma(m) * s2**m) if m == 0.5 else 0.0
        val = np.where(arr == 0.0, at_zero, val)
        return _scalar_like(val, h)

    def sample(self, rng: np.random.Generator, size=None):
        return np.sqrt(rng.gamma(shape=self.m, scale=self.sigma2 / self.m, size=size))


def model_from_spec(spec: dict) -> FadingModel:
    """Build a model from a config mapping like {"kind": "rician", "k_factor": 15.8}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    makers = {"rayleigh": Rayleigh, "rician": Rician, "nakagami": Nakagami}
    if kind not in makers:
        raise ValueError(f"unknown fading model kind: {kind!r}")
    try:
        return makers[kind](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind} model: {exc}") from exc

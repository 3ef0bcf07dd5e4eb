"""Random variates and analytic constants for symmetric alpha-stable laws.

Every sampler accepts either an :class:`RngStream` or a ready
``numpy.random.Generator``.  Passing a stream always starts from the
beginning of that stream, so two calls with the same stream return the same
draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .errors import ParameterError

_MASK64 = (1 << 64) - 1
_ALPHA_ONE_BAND = 1e-6


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Uses the Philox-4x64 bijection with the 128-bit key built from the two
    64-bit halves, so distinct replicate indices give non-overlapping streams
    without any coordination between workers.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = (self.seed & _MASK64) | ((self.stream_id & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise ParameterError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def check_alpha(alpha: float, *, allow_gaussian: bool = False) -> float:
    """Validate a stability index; ``alpha == 2`` only for diagnostic oracles."""
    alpha = float(alpha)
    upper_ok = alpha <= 2.0 if allow_gaussian else alpha < 2.0
    if not (alpha > 0.0 and upper_ok and math.isfinite(alpha)):
        bound = "(0, 2]" if allow_gaussian else "(0, 2)"
        raise ParameterError(f"alpha must lie in {bound}, got {alpha}")
    return alpha


def sample_sas(alpha: float, scale: float | np.ndarray = 1.0, size=None, *, rng: RngLike) -> np.ndarray | float:
    """Draw symmetric alpha-stable variates (Chambers-Mallows-Stuck).

    The characteristic function of each draw is ``exp(-|scale * theta|**alpha)``.
    ``scale`` may be an array broadcastable to ``size``.
    """
    alpha = check_alpha(alpha)
    scale_arr = np.asarray(scale, dtype=float)
    if np.any(~(scale_arr > 0)):
        raise ParameterError("scale must be positive")
    gen = as_generator(rng)
    if size is None and scale_arr.ndim:
        size = scale_arr.shape
    v = gen.uniform(-0.5 * np.pi, 0.5 * np.pi, size=size)
    w = gen.standard_exponential(size=size)
    if alpha == 1.0:
        x = np.tan(v)
    else:
        x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
             * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
    x = scale_arr * x
    return float(x) if np.ndim(x) == 0 else x


def sample_positive_stable(alpha_half: float, size=None, *, rng: RngLike) -> np.ndarray | float:
    """Totally skewed positive stable draws with Laplace transform ``exp(-s**alpha_half)``.

    Kanter's representation; ``alpha_half`` must lie in (0, 1).
    """
    a = float(alpha_half)
    if not 0.0 < a < 1.0:
        raise ParameterError(f"positive stable index must lie in (0, 1), got {a}")
    gen = as_generator(rng)
    u = gen.uniform(0.0, np.pi, size=size)
    w = gen.standard_exponential(size=size)
    # guard the open interval; u == 0 has probability ~1e-16 per draw
    u = np.where(u <= 0.0, np.finfo(float).tiny, u)
    log_a = (a * np.log(np.sin(a * u)) + (1.0 - a) * np.log(np.sin((1.0 - a) * u))
             - np.log(np.sin(u))) / (1.0 - a)
    y = np.exp((log_a - np.log(w)) * (1.0 - a) / a)
    return float(y) if np.ndim(y) == 0 else y


def poisson_arrivals(count: int, size=None, *, rng: RngLike) -> np.ndarray:
    """Arrival times of a unit-rate Poisson process.

    Returns an array whose last axis holds ``Gamma_1 < ... < Gamma_count``;
    ``size`` prepends batch dimensions.  ``count == 0`` gives an empty axis.
    """
    count = int(count)
    if count < 0:
        raise ParameterError("count must be non-negative")
    gen = as_generator(rng)
    batch = () if size is None else tuple(np.atleast_1d(size))
    increments = gen.standard_exponential(size=batch + (count,))
    return np.cumsum(increments, axis=-1)


def rademacher(size=None, *, rng: RngLike) -> np.ndarray | float:
    gen = as_generator(rng)
    signs = 2.0 * gen.integers(0, 2, size=size) - 1.0
    return float(signs) if np.ndim(signs) == 0 else signs


def c_alpha(alpha: float) -> float:
    """Tail constant: ``P(|X| > x) ~ c_alpha(alpha) * x**-alpha`` for unit-scale SaS ``X``."""
    alpha = check_alpha(alpha)
    if abs(alpha - 1.0) <= _ALPHA_ONE_BAND:
        return 2.0 / math.pi
    return (1.0 - alpha) / (math.gamma(2.0 - alpha) * math.cos(math.pi * alpha / 2.0))


def frechet_moment(alpha: float, beta: float) -> float:
    """Mean of the Frechet law with shape ``alpha / beta``, i.e. ``Gamma(1 - beta/alpha)``."""
    alpha = check_alpha(alpha, allow_gaussian=True)
    beta = float(beta)
    if beta < 0:
        raise ParameterError("beta must be non-negative")
    if beta >= alpha:
        raise ParameterError(f"Gamma pole: beta={beta} must be smaller than alpha={alpha}")
    return float(np.exp(special.gammaln(1.0 - beta / alpha)))


def sas_abs_moment(alpha: float, p: float, scale: float = 1.0) -> float:
    """``E|X|**p`` for SaS ``X`` with the given scale, ``-1 < p < alpha``."""
    alpha = check_alpha(alpha, allow_gaussian=True)
    if not -1.0 < p < alpha:
        raise ParameterError("fractional moment requires -1 < p < alpha")
    if p == 0:
        return 1.0
    # E|X|^p = 2^p Gamma((1+p)/2) Gamma(1-p/alpha) / (sqrt(pi) Gamma(1-p/2))
    log_m = (p * math.log(2.0) + special.gammaln((1 + p) / 2) + special.gammaln(1 - p / alpha)
             - 0.5 * math.log(math.pi) - special.gammaln(1 - p / 2))
    return float(np.exp(log_m)) * scale ** p


def sas_scale_estimate(samples: np.ndarray, alpha: float, theta: float | None = None) -> float:
    """Scale of SaS data with known ``alpha`` from the empirical characteristic function.

    ``theta`` defaults to the reciprocal of a quantile-based pilot scale.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ParameterError("need at least two samples")
    if theta is None:
        pilot = float(np.median(np.abs(x)))
        theta = 1.0 / pilot if pilot > 0 else 1.0
    phi = float(np.mean(np.cos(theta * x)))
    if not 0.0 < phi < 1.0:
        raise ParameterError("empirical characteristic function out of range; change theta")
    return (-math.log(phi)) ** (1.0 / alpha) / theta


@dataclass(frozen=True)
class FrechetLaw:
    """Frechet law with CDF ``exp(-(x / scale)**-shape)`` on ``x > 0``."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ParameterError("Frechet shape and scale must be positive")

    def cdf(self, x):
        return frechet_cdf(self, x)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        return self.scale * (-np.log(q)) ** (-1.0 / self.shape)

    def median(self) -> float:
        return self.scale * math.log(2.0) ** (-1.0 / self.shape)

    def mean(self) -> float:
        if self.shape <= 1:
            return math.inf
        return self.scale * math.gamma(1.0 - 1.0 / self.shape)


def frechet_cdf(law: FrechetLaw, x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        z = np.where(x > 0, x / law.scale, 1.0)
        out = np.where(x > 0, np.exp(-z ** (-law.shape)), 0.0)
    return float(out) if out.ndim == 0 else out

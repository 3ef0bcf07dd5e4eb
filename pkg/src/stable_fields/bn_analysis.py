"""The deterministic window sequence ``b_n`` and its growth exponents.

``b_n**alpha`` is the integral over the control space of the largest
``|f_t|**alpha`` across the window ``0 <= t <= (n-1)1``.  Lattice models are
summed exactly; the fractional motions use quadrature with explicit error
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, ndimage

from .errors import InsufficientDataError, NumericalError, ParameterError
from .fitting import ScalingFit, loglog_fit
from .kernels import (
    LATTICE_TAGS,
    KernelSpec,
    ModelTag,
    kappa_tilde,
    kappa_tilde_with_error,
    lfsm_tail_difference,
    periodic_power_integral,
)
from .stable_core import check_alpha

DEFAULT_TOL = 1e-10


@dataclass
class BnCurve:
    model: KernelSpec
    entries: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def alpha(self) -> float:
        return self.model.alpha

    @property
    def n(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries], dtype=float)

    @property
    def bn(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries], dtype=float)

    @property
    def err(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries], dtype=float)

    def is_monotone(self, rtol: float = 1e-12) -> bool:
        bn = self.bn[np.argsort(self.n)]
        return bool(np.all(np.diff(bn) >= -rtol * bn[1:]))


# lattice models -----------------------------------------------------------

def bn_moving_average(kernel: KernelSpec, n: int) -> tuple[float, bool]:
    """Exact ``b_n`` of a finite moving average by enumerating window maxima.

    Embedded models reduce to their ``p``-dimensional base kernel.
    """
    if kernel.tag is ModelTag.EMBEDDED:
        kernel = kernel.base
    if kernel.tag not in LATTICE_TAGS:
        raise ParameterError("bn_moving_average needs a lattice kernel")
    n = _check_n(n)
    power = np.abs(kernel.coefs) ** kernel.alpha
    if not np.any(power > 0):
        raise ParameterError("empty kernel")
    padded = np.pad(power, n - 1)
    # every window position touching the support is counted exactly once
    window_max = ndimage.maximum_filter(padded, size=n, mode="constant", cval=0.0)
    return float(window_max.sum() ** (1.0 / kernel.alpha)), True


# linear fractional stable motion ------------------------------------------

@dataclass(frozen=True)
class LfsmPieces:
    """``b_n**alpha = tail + boundary + (n - 1) * interior`` with error bounds."""

    tail: float
    interior: float
    boundary: float
    tail_err: float
    interior_err: float
    truncation: float

    def bn_alpha(self, n: int) -> float:
        return self.tail + self.boundary + (n - 1) * self.interior

    def error(self, n: int) -> float:
        return self.tail_err + self.truncation + (n - 1) * self.interior_err


def _quad(f, lo, hi, tol, what, **kw):
    val, err = integrate.quad(f, lo, hi, epsabs=tol, epsrel=1e-12, limit=500, **kw)
    if not (math.isfinite(val) and err <= max(tol, 1e-12 * abs(val))):
        raise NumericalError(f"quadrature for {what} on [{lo}, {hi}] did not converge "
                             f"(estimate {val:.6g}, error {err:.2e})")
    return val, err


def lfsm_far_cutoff(H: float, alpha: float, tol: float, lag: float = 1.0) -> float:
    """Distance ``L`` beyond which the ``alpha``-mass of the lag-``lag`` kernel is below ``tol``.

    Uses ``|(lag + u)**a - u**a| <= |a| * lag * u**(a - 1)`` for ``u >= lag``.
    """
    a = H - 1.0 / alpha
    if a == 0:
        return lag
    decay = alpha * (1.0 - H)
    log_l = (math.log(abs(a) ** alpha * lag ** alpha / (decay * tol))) / decay
    return max(lag, math.exp(min(log_l, 700.0))) if log_l < 700 else math.inf


def lfsm_tail_bound(H: float, alpha: float, cutoff: float, lag: float = 1.0) -> float:
    a = H - 1.0 / alpha
    if a == 0:
        return 0.0
    decay = alpha * (1.0 - H)
    return (abs(a) * lag) ** alpha * cutoff ** (-decay) / decay


@lru_cache(maxsize=128)
def lfsm_pieces(H: float, alpha: float, tol: float = DEFAULT_TOL) -> LfsmPieces:
    alpha = check_alpha(alpha)
    if not 0 < H < 1:
        raise ParameterError("H must lie in (0, 1)")
    a = H - 1.0 / alpha
    if a == 0:
        return LfsmPieces(0.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    boundary = 1.0 / (a * alpha + 1.0)

    # tail: int_0^inf |(1+x)^a - x^a|^alpha dx, split at x = 1
    def near(x):
        return abs(lfsm_tail_difference(1.0, x, a)) ** alpha if x > 0 else (1.0 if a > 0 else math.inf)

    if a < 0:
        # x = y**k removes the x**(a*alpha) endpoint singularity
        k = 1.0 / (a * alpha + 1.0)
        t_near, e_near = _quad(lambda y: near(y ** k) * k * y ** (k - 1.0) if y > 0 else
                               k * 1.0, 0.0, 1.0, tol / 4, "LFSM tail (near)")
    else:
        t_near, e_near = _quad(near, 0.0, 1.0, tol / 4, "LFSM tail (near)")
    cutoff = lfsm_far_cutoff(H, alpha, tol / 10)
    if not math.isfinite(cutoff):
        raise NumericalError(f"tail truncation for H={H}, alpha={alpha} needs an astronomically large cutoff")
    t_far, e_far = _quad(lambda u: abs(float(lfsm_tail_difference(1.0, math.exp(u), a))) ** alpha * math.exp(u),
                         0.0, math.log(cutoff), tol / 4, "LFSM tail (far)")
    truncation = lfsm_tail_bound(H, alpha, cutoff)

    # interior: int_0^1 max(w^a, |(1+w)^a - w^a|)^alpha dw
    if a < 0:
        interior, i_err = boundary, 0.0
    else:
        w_star = 1.0 / (2.0 ** (1.0 / a) - 1.0)
        left, i_err = _quad(lambda w: float(lfsm_tail_difference(1.0, w, a)) ** alpha if w > 0 else 1.0,
                            0.0, w_star, tol / 4, "LFSM interior")
        interior = left + (1.0 - w_star ** (a * alpha + 1.0)) / (a * alpha + 1.0)
    return LfsmPieces(t_near + t_far, interior, boundary, e_near + e_far, i_err, truncation)


def bn_lfsm(n: int, H: float, alpha: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """``b_n`` of the unit-lag LFSM increment field and an absolute error bound."""
    n = _check_n(n)
    if tol <= 0:
        raise ParameterError("tolerance must be positive")
    pieces = lfsm_pieces(float(H), float(alpha), float(tol))
    if H == 1.0 / alpha:
        return float(n) ** (1.0 / alpha), 0.0
    val = pieces.bn_alpha(n)
    bn = val ** (1.0 / alpha)
    return bn, bn / alpha * pieces.error(n) / val


def _lfsm_window_max(s, n: int, a: float, alpha: float):
    k = np.arange(n)[:, None]
    s = np.atleast_1d(np.asarray(s, dtype=float))[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(k + 1 - s > 0, np.abs(k + 1 - s) ** a, 0.0)
        lo = np.where(k - s > 0, np.abs(k - s) ** a, 0.0)
    return np.max(np.abs(up - lo), axis=0) ** alpha


def lfsm_window_integrals(n: int, H: float, alpha: float, tol: float = 1e-11) -> np.ndarray:
    """Per-unit-interval integrals of ``max_k |g_k|**alpha`` with the max taken over all ``k``.

    Entry ``l`` is the integral over ``(l, l + 1)``; this brute-force route
    does not use the two-neighbour reduction and serves as a check on it.
    """
    n = _check_n(n)
    a = H - 1.0 / check_alpha(alpha)
    out = []
    for ell in range(n):
        f = lambda s: float(_lfsm_window_max(s, n, a, alpha)[0])
        if a < 0:
            # endpoint singularities at both ends; split at the midpoint
            v1, _ = integrate.quad(f, ell, ell + 0.5, epsabs=tol, epsrel=1e-12, limit=500)
            v2, _ = integrate.quad(f, ell + 0.5, ell + 1, epsabs=tol, epsrel=1e-12, limit=500)
            out.append(v1 + v2)
        else:
            pts = []
            if a > 0 and ell + 1 < n:
                pts = [ell + 1 - 1.0 / (2.0 ** (1.0 / a) - 1.0)]
            v, _ = integrate.quad(f, ell, ell + 1, epsabs=tol, epsrel=1e-12, limit=500,
                                  points=pts or None)
            out.append(v)
    return np.array(out)


# harmonizable fractional stable motion ------------------------------------

def _hfsm_integral(p, p_reduced, H: float, alpha: float) -> tuple[float, float]:
    q = alpha * H + 1.0
    val, err = periodic_power_integral(p, p_reduced, alpha, q, p_max=2.0 ** alpha)
    return 2.0 * val, 2.0 * err


def bn_hfsm_with_error(H: float, alpha: float, v: int = 1) -> tuple[float, float]:
    alpha = check_alpha(alpha, allow_gaussian=True)
    if v not in (1, -1):
        raise ParameterError("increment direction v must be +1 or -1")

    def p(x):
        return np.abs(2.0 * np.sin(0.5 * v * np.asarray(x))) ** alpha

    def p_reduced(x):
        return np.abs(np.sinc(0.5 * v * np.asarray(x) / np.pi)) ** alpha

    integral, err = _hfsm_integral(p, p_reduced, H, alpha)
    kt, kt_err = kappa_tilde_with_error(H, alpha)
    value = kt * integral ** (1.0 / alpha)
    return value, value * (kt_err / kt + err / (alpha * integral))


def bn_hfsm(H: float, alpha: float, v: int = 1) -> float:
    """Window-independent ``b_n`` of the unit-lag HFSM increment field."""
    return bn_hfsm_with_error(H, alpha, v)[0]


def bn_hfsm_windowed(n: int, H: float, alpha: float, v: int = 1) -> float:
    """``b_n`` with the maximum over ``0 <= k <= n-1`` evaluated inside the integrand."""
    n = _check_n(n)
    alpha = check_alpha(alpha, allow_gaussian=True)
    k = np.arange(n)[:, None]

    def raw(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        diff = np.abs(np.exp(1j * (k + v) * x) - np.exp(1j * k * x))
        return np.max(diff, axis=0)

    def p(x):
        out = raw(x) ** alpha
        return out[0] if np.ndim(x) == 0 else out

    def p_reduced(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        safe = np.where(xs > 0, xs, 1.0)
        out = np.where(xs > 0, raw(safe) / safe, 1.0) ** alpha
        return out[0] if np.ndim(x) == 0 else out

    integral, _ = _hfsm_integral(p, p_reduced, H, alpha)
    return kappa_tilde(H, alpha) * integral ** (1.0 / alpha)


# dispatch ------------------------------------------------------------------

def norm_alpha(model: KernelSpec) -> float:
    """``||f||_alpha**alpha`` of the stationary field's time-zero kernel."""
    if model.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        bn, _ = bn_lfsm(1, model.H, model.alpha)
        return (model.scale * bn) ** model.alpha
    if model.tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT):
        return bn_value(model, 1)[0] ** model.alpha
    return model.norm_alpha()


def bn_value(model: KernelSpec, n: int, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """``(b_n, error)`` for any model; self-similar models use their unit-lag increments."""
    tag = model.tag
    if tag in LATTICE_TAGS or tag is ModelTag.EMBEDDED:
        bn, _ = bn_moving_average(model, n)
        return bn, 0.0
    if tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        bn, err = bn_lfsm(n, model.H, model.alpha, tol)
        return model.scale * bn, model.scale * err
    if tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT):
        _check_n(n)
        bn, err = bn_hfsm_with_error(model.H, model.alpha)
        factor = model.scale / kappa_tilde(model.H, model.alpha)
        return factor * bn, factor * err
    if tag is ModelTag.CONSTANT:
        _check_n(n)
        return model.scale, 0.0
    raise ParameterError(f"unsupported model {tag}")


def bn_curve(model: KernelSpec, n_grid, tol: float = DEFAULT_TOL) -> BnCurve:
    entries = []
    for n in sorted({int(v) for v in n_grid}):
        bn, err = bn_value(model, n, tol)
        entries.append((n, bn, err))
    return BnCurve(model, entries)


def dyadic_n_grid(lo_exp: int = 2, hi_exp: int = 10) -> list[int]:
    return [2 ** k for k in range(lo_exp, hi_exp + 1)]


def fit_weak_effective_dimension(curve: BnCurve) -> ScalingFit:
    """Least-squares exponent of ``b_n**alpha`` in ``n``."""
    if len(curve.entries) < 4:
        raise InsufficientDataError("need at least 4 (n, b_n) entries")
    return loglog_fit(curve.n, curve.bn ** curve.alpha)


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    ratios: list[float]
    dimension: int

    def __bool__(self) -> bool:
        return self.passed


def verify_bn_upper_bound(curve: BnCurve, f_norm: float, *, rel_slack: float = 1e-9) -> BoundReport:
    """Check ``b_n**alpha <= n**d * f_norm**alpha`` for every curve entry."""
    d = curve.model.d
    alpha = curve.alpha
    ratios = []
    for n, bn, _ in curve.entries:
        ratios.append(bn ** alpha / (n ** d * f_norm ** alpha))
    passed = all(r <= 1.0 + rel_slack for r in ratios)
    return BoundReport(passed, ratios, d)


def limit_constant_estimate(model: KernelSpec, n: int = 2 ** 14, tol: float = DEFAULT_TOL) -> float:
    """``lim n**(-p/alpha) b_n`` (exact for lattice models, 0 for conservative ones)."""
    if model.tag in LATTICE_TAGS:
        return float(np.max(np.abs(model.coefs)))
    if model.tag is ModelTag.EMBEDDED:
        return float(np.max(np.abs(model.base.coefs)))
    if model.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        pieces = lfsm_pieces(model.H, model.alpha, tol)
        return model.scale * pieces.interior ** (1.0 / model.alpha)
    return 0.0


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ParameterError(f"window size n must be a positive integer, got {n}")
    return int(n)

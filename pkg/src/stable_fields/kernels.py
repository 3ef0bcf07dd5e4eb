"""Kernel families for the supported stable field models.

A :class:`KernelSpec` is the tagged description of one model: lattice moving
averages (including the iid point mass), linear and harmonizable fractional
stable motions with their unit-lag increment fields, fields embedded from a
lower dimension, and the constant field.  Lattice kernels use the convention
``f_t(s) = f(t + s)`` so that ``Y(t) = sum_s f(t + s) Z(s)``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .errors import NumericalError, ParameterError
from .stable_core import check_alpha


class ModelTag(str, enum.Enum):
    IID = "iid"
    LATTICE_MA = "lattice_ma"
    LFSM = "lfsm"
    LFSM_INCREMENT = "lfsm_increment"
    HFSM = "hfsm"
    HFSM_INCREMENT = "hfsm_increment"
    EMBEDDED = "embedded"
    CONSTANT = "constant"


LATTICE_TAGS = (ModelTag.IID, ModelTag.LATTICE_MA)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Immutable description of a stationary (or self-similar) SaS model.

    Build instances with the ``iid``, ``lattice``, ``geometric``, ``lfsm``,
    ``hfsm``, ``embedded`` and ``constant`` constructors rather than directly.
    """

    tag: ModelTag
    alpha: float
    d: int = 1
    H: float | None = None
    p: int | None = None
    coefs: np.ndarray | None = None
    origin: tuple[int, ...] | None = None
    base: "KernelSpec | None" = None
    scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    # constructors -------------------------------------------------------

    @classmethod
    def iid(cls, alpha: float, d: int = 1) -> "KernelSpec":
        check_alpha(alpha)
        _check_dim(d)
        coefs = np.ones((1,) * d)
        return cls(ModelTag.IID, float(alpha), d, coefs=coefs, origin=(0,) * d,
                   metadata={"support_radius": 0})

    @classmethod
    def lattice(cls, coefs, alpha: float, origin=None) -> "KernelSpec":
        """Finite moving-average table; ``coefs[idx]`` is ``f(idx - origin)``."""
        check_alpha(alpha)
        arr = np.array(coefs, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.size == 0 or not np.any(arr != 0):
            raise ParameterError("lattice kernel must have at least one non-zero coefficient")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("lattice coefficients must be finite")
        d = arr.ndim
        origin = (0,) * d if origin is None else tuple(int(o) for o in origin)
        if len(origin) != d:
            raise ParameterError("origin must have one entry per dimension")
        arr.setflags(write=False)
        radius = max(max(o, s - 1 - o) for o, s in zip(origin, arr.shape))
        return cls(ModelTag.LATTICE_MA, float(alpha), d, coefs=arr, origin=origin,
                   metadata={"support_radius": int(radius)})

    @classmethod
    def geometric(cls, rho: float, alpha: float, tol: float = 1e-12) -> "KernelSpec":
        """One-sided kernel ``f(k) = rho**k``, truncated once ``|rho|**(k*alpha) < tol``."""
        if not 0 < abs(rho) < 1:
            raise ParameterError("geometric decay needs 0 < |rho| < 1")
        check_alpha(alpha)
        length = max(1, int(math.ceil(math.log(tol) / (alpha * math.log(abs(rho))))))
        spec = cls.lattice(rho ** np.arange(length), alpha)
        spec.metadata.update(tail_ratio=abs(rho), truncation_tol=tol)
        return spec

    @classmethod
    def lfsm(cls, H: float, alpha: float, *, increment: bool = False, kappa: float = 1.0) -> "KernelSpec":
        check_alpha(alpha)
        _check_hurst(H)
        tag = ModelTag.LFSM_INCREMENT if increment else ModelTag.LFSM
        return cls(tag, float(alpha), 1, H=float(H), scale=float(kappa),
                   metadata={"tail_exponent": float(alpha) * (float(H) - 1.0)})

    @classmethod
    def hfsm(cls, H: float, alpha: float, *, increment: bool = False) -> "KernelSpec":
        check_alpha(alpha)
        _check_hurst(H)
        tag = ModelTag.HFSM_INCREMENT if increment else ModelTag.HFSM
        return cls(tag, float(alpha), 1, H=float(H), scale=kappa_tilde(H, alpha))

    @classmethod
    def embedded(cls, base: "KernelSpec", d: int) -> "KernelSpec":
        """Field on Z^d depending only on the first ``base.d`` coordinates."""
        if base.tag not in LATTICE_TAGS:
            raise ParameterError("embedded models wrap a lattice kernel")
        _check_dim(d)
        if not 1 <= base.d < d:
            raise ParameterError(f"effective dimension p={base.d} must satisfy 1 <= p < d={d}")
        return cls(ModelTag.EMBEDDED, base.alpha, d, p=base.d, base=base)

    @classmethod
    def constant(cls, alpha: float, scale: float = 1.0, d: int = 1) -> "KernelSpec":
        check_alpha(alpha)
        _check_dim(d)
        if not scale > 0:
            raise ParameterError("scale must be positive")
        return cls(ModelTag.CONSTANT, float(alpha), d, scale=float(scale))

    # derived views ------------------------------------------------------

    @property
    def is_lattice(self) -> bool:
        return self.tag in LATTICE_TAGS

    @property
    def effective_dimension(self) -> int:
        """Polynomial growth index of ``b_n**alpha`` (0 for conservative models)."""
        if self.tag in LATTICE_TAGS:
            return self.d
        if self.tag is ModelTag.EMBEDDED:
            return self.p
        if self.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
            return 1
        return 0

    @property
    def dissipative(self) -> bool:
        return self.effective_dimension > 0

    def scaled(self, c: float) -> "KernelSpec":
        """Same model with the kernel multiplied by ``c > 0``."""
        if not c > 0:
            raise ParameterError("scale factor must be positive")
        if self.tag in LATTICE_TAGS:
            out = KernelSpec.lattice(self.coefs * c, self.alpha, self.origin)
            return out
        if self.tag is ModelTag.EMBEDDED:
            return KernelSpec.embedded(self.base.scaled(c), self.d)
        return KernelSpec(self.tag, self.alpha, self.d, self.H, self.p, self.coefs,
                          self.origin, self.base, self.scale * c, dict(self.metadata))

    def norm_alpha(self) -> float:
        """``||f||_alpha**alpha`` of the time-zero kernel (lattice and constant models)."""
        if self.tag in LATTICE_TAGS:
            return float(np.sum(np.abs(self.coefs) ** self.alpha))
        if self.tag is ModelTag.EMBEDDED:
            return self.base.norm_alpha()
        if self.tag is ModelTag.CONSTANT:
            return self.scale ** self.alpha
        raise ParameterError(f"norm_alpha for {self.tag.value} lives in bn_analysis")

    def value(self, u) -> np.ndarray:
        """Lattice coefficient ``f(u)`` for integer index arrays ``u`` (last axis = dimension)."""
        if self.tag not in LATTICE_TAGS:
            raise ParameterError("value() is defined for lattice kernels only")
        u = np.asarray(u, dtype=int)
        if self.d == 1 and (u.ndim == 0 or u.shape[-1] != 1):
            u = u[..., None]
        idx = u + np.asarray(self.origin)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.coefs.shape)), axis=-1)
        clipped = np.clip(idx, 0, np.asarray(self.coefs.shape) - 1)
        vals = self.coefs[tuple(np.moveaxis(clipped, -1, 0))]
        return np.where(inside, vals, 0.0)

    def support_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Lowest and highest lattice index carrying a coefficient."""
        lo = -np.asarray(self.origin)
        hi = lo + np.asarray(self.coefs.shape) - 1
        return lo, hi


def _check_dim(d: int) -> None:
    if int(d) != d or d < 1:
        raise ParameterError("dimension must be a positive integer")


def _check_hurst(H: float) -> None:
    if not 0.0 < H < 1.0:
        raise ParameterError(f"H must lie in (0, 1), got {H}")


FieldModel = KernelSpec


# vertex sets --------------------------------------------------------------

def vertex_set(d: int) -> np.ndarray:
    """``{-1, 0, 1}^d`` without the origin, as an array of shape ``(3**d - 1, d)``."""
    _check_dim(d)
    verts = [v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)]
    return np.array(verts, dtype=int)


# lattice kernel files -----------------------------------------------------

def load_kernel_table(path: str | Path, alpha: float) -> KernelSpec:
    """Read ``index_1 ... index_d value`` rows (whitespace separated, ``#`` comments)."""
    rows = np.loadtxt(path, comments="#", ndmin=2)
    if rows.shape[1] < 2:
        raise ParameterError(f"{path}: each row needs at least one index and a value")
    idx = rows[:, :-1]
    if not np.all(idx == np.round(idx)):
        raise ParameterError(f"{path}: lattice indices must be integers")
    idx = idx.astype(int)
    lo = idx.min(axis=0)
    shape = tuple(idx.max(axis=0) - lo + 1)
    coefs = np.zeros(shape)
    for i, v in zip(idx - lo, rows[:, -1]):
        coefs[tuple(i)] += v
    return KernelSpec.lattice(coefs, alpha, origin=tuple(-lo))


def save_kernel_table(spec: KernelSpec, path: str | Path) -> None:
    if spec.tag not in LATTICE_TAGS:
        raise ParameterError("only lattice kernels have coefficient tables")
    lo, _ = spec.support_offsets()
    with open(path, "w") as fh:
        fh.write("# " + " ".join(f"i{k}" for k in range(1, spec.d + 1)) + " value\n")
        for idx in np.ndindex(spec.coefs.shape):
            v = spec.coefs[idx]
            if v != 0:
                fh.write(" ".join(str(int(i + l)) for i, l in zip(idx, lo)) + f" {float(v)!r}\n")


# closed-form kernels ------------------------------------------------------

def positive_power(x, a: float) -> np.ndarray:
    """``x_+**a`` with the convention ``x_+**0 = 1{x > 0}``; ``0**a = inf`` for ``a < 0``."""
    x = np.asarray(x, dtype=float)
    if a == 0:
        return (x > 0).astype(float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.abs(x) ** a, np.where(x == 0, np.inf if a < 0 else 0.0, 0.0))


def lfsm_kernel(t, s, H: float, alpha: float):
    """``(t - s)_+**(H - 1/alpha) - (-s)_+**(H - 1/alpha)`` (normalising constant excluded).

    Returns ``+-inf`` at the integrable singularities ``s = t`` or ``s = 0``
    when ``H < 1/alpha``.
    """
    _check_hurst(H)
    a = H - 1.0 / check_alpha(alpha)
    with np.errstate(invalid="ignore"):
        out = positive_power(np.subtract(t, s), a) - positive_power(np.negative(s), a)
    return float(out) if out.ndim == 0 else out


def lfsm_increment_kernel(k, s, H: float, alpha: float):
    """Unit-lag increment kernel ``g_k(s) = (k+1-s)_+**a - (k-s)_+**a``."""
    return lfsm_kernel(np.add(k, 1), s, H, alpha) - lfsm_kernel(k, s, H, alpha)


def lfsm_tail_difference(t, u, a: float):
    """``(t + u)**a - u**a`` for ``u > 0``, ``t >= 0`` without cancellation."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if a == 0:
        return np.zeros(np.broadcast(t, u).shape)
    return u ** a * np.expm1(a * np.log1p(t / u))


def hfsm_kernel_magnitude(t, x, H: float, alpha: float):
    """``|exp(itx) - 1| / |x|**(H + 1/alpha)`` = ``2|sin(tx/2)| / |x|**(H + 1/alpha)``."""
    _check_hurst(H)
    alpha = check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ParameterError("HFSM kernel is singular at x = 0; exclude it from quadrature")
    t = np.asarray(t, dtype=float)
    out = 2.0 * np.abs(np.sin(0.5 * t * x)) / np.abs(x) ** (H + 1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def embedded_kernel(t, s, base: KernelSpec, d: int):
    """Evaluate ``f_t(s) = base(t[:p] + s)`` for ``t`` in Z^d; coordinates past ``p`` are inert."""
    if base.tag not in LATTICE_TAGS:
        raise ParameterError("embedded kernels wrap a lattice kernel")
    p = base.d
    if not 1 <= p < d:
        raise ParameterError(f"need 1 <= p < d, got p={p}, d={d}")
    t = np.asarray(t, dtype=int)
    if t.shape[-1] != d:
        raise ParameterError(f"t must have {d} coordinates")
    s = np.asarray(s, dtype=int)
    if p == 1 and (s.ndim == 0 or s.shape[-1] != 1):
        s = s[..., None]
    return base.value(t[..., :p] + s)


# HFSM normalising constant ------------------------------------------------

def periodic_power_integral(p, p_reduced, r: float, q: float, p_max: float, *,
                            periods: int = 40, epsabs: float = 1e-13,
                            epsrel: float = 1e-11) -> tuple[float, float]:
    """``int_0^inf p(x) x**-q dx`` for a 2*pi-periodic ``p >= 0`` with ``p(x) ~ x**r`` at 0.

    ``p_reduced(x)`` must return ``p(x) / x**r`` on ``(0, 2*pi]`` and stay
    accurate as ``x -> 0``; ``p_max`` bounds ``p``.  The first ``periods``
    periods are integrated adaptively; the remainder uses a three-term
    Taylor expansion of ``x**-q`` per period summed with Hurwitz zeta
    functions.  Returns ``(value, error_estimate)``.
    """
    if not (r - q > -1 and q > 1):
        raise ParameterError("integral diverges: need r - q > -1 and q > 1")
    two_pi = 2.0 * math.pi

    total, total_err = integrate.quad(p_reduced, 0.0, two_pi, weight="alg", wvar=(r - q, 0.0),
                                      epsabs=epsabs, epsrel=epsrel, limit=400)
    for m in range(1, periods):
        v, e = integrate.quad(lambda x: p(x) * x ** -q, m * two_pi, (m + 1) * two_pi,
                              epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
        total_err += e
    for k, coeff in enumerate((1.0, -q, 0.5 * q * (q + 1))):
        moment, e = integrate.quad(lambda u: p(u) * u ** k, 0.0, two_pi,
                                   epsabs=epsabs, epsrel=epsrel, limit=200)
        s = q + k
        total += coeff * moment * two_pi ** -s * float(special.zeta(s, periods))
        total_err += e
    # the first omitted Taylor term bounds the truncation
    trunc = (q * (q + 1) * (q + 2) / 6.0 * p_max * two_pi ** 4 / 4.0
             * two_pi ** -(q + 3) * float(special.zeta(q + 3, periods)))
    return total, total_err + trunc


@lru_cache(maxsize=256)
def kappa_tilde(H: float, alpha: float) -> float:
    """Normalising constant of the harmonizable fractional stable motion.

    ``2**-0.5 * (int_R (1 - cos x)**(alpha/2) |x|**-(alpha*H + 1) dx)**(-1/alpha)``;
    ``alpha = 2`` is accepted as a diagnostic.
    """
    value, _ = kappa_tilde_with_error(H, alpha)
    return value


def kappa_tilde_with_error(H: float, alpha: float) -> tuple[float, float]:
    _check_hurst(H)
    alpha = check_alpha(alpha, allow_gaussian=True)
    half = alpha / 2.0

    def reduced(x):
        # (1 - cos x)**(alpha/2) / x**alpha, smooth at 0
        x = np.asarray(x, dtype=float)
        small = x < 1e-4
        xs = np.where(small, 1.0, x)
        big = (2.0 * np.sin(0.5 * xs) ** 2) ** half / xs ** alpha
        xt = np.where(small, x, 0.0)
        series = 2.0 ** -half * (1.0 - xt * xt / 12.0) ** half
        out = np.where(small, series, big)
        return float(out) if out.ndim == 0 else out

    def full(x):
        return (1.0 - np.cos(x)) ** half

    integral, err = periodic_power_integral(full, reduced, alpha, alpha * H + 1.0, p_max=2.0 ** half)
    integral *= 2.0
    err *= 2.0
    if not (integral > 0 and math.isfinite(integral)):
        raise NumericalError(f"kappa_tilde quadrature failed for H={H}, alpha={alpha}")
    value = 2.0 ** -0.5 * integral ** (-1.0 / alpha)
    if err > 1e-6 * integral:
        raise NumericalError(f"kappa_tilde quadrature error {err:.2e} too large (H={H}, alpha={alpha})")
    return value, value / alpha * err / integral

"""Sample paths for every supported model.

Lattice moving averages are correlations of iid SaS noise with the kernel
table.  LFSM paths are cumulative sums of a discretized moving average whose
cells carry the exact ``alpha``-mass of the kernel.  HFSM paths use the
spectral representation folded onto one period, which is exact in law on the
integer grid before the frequency cells are discretized.  The LePage series
gives exact-in-law samples of lattice fields up to truncation.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, signal, special

from .bn_analysis import bn_moving_average, lfsm_pieces, lfsm_tail_bound
from .errors import ConfigurationError, ParameterError
from .kernels import LATTICE_TAGS, KernelSpec, ModelTag, kappa_tilde
from .stable_core import (
    RngLike,
    RngStream,
    as_generator,
    c_alpha,
    poisson_arrivals,
    rademacher,
    sample_positive_stable,
    sample_sas,
)

_DIRECT_LIMIT = 10 ** 6


@dataclass
class SamplePath:
    """Field values on a regular grid ``spacing * k`` with ``k`` in ``[0, extent)``."""

    model: KernelSpec | None
    values: np.ndarray
    spacing: float = 1.0
    provenance: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def extent(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    def axis(self, i: int = 0) -> np.ndarray:
        return self.spacing * np.arange(self.values.shape[i])

    def scaled(self, c: float) -> "SamplePath":
        model = None if self.model is None else self.model.scaled(c)
        return SamplePath(model, self.values * c, self.spacing, dict(self.provenance))

    # serialization ---------------------------------------------------------

    def metadata(self) -> dict:
        return {
            "model": None if self.model is None else self.model.tag.value,
            "alpha": None if self.model is None else self.model.alpha,
            "H": None if self.model is None else self.model.H,
            "d": self.d,
            "extent": list(self.extent),
            "spacing": self.spacing,
            "dtype": "<f8",
            "order": "C",
            "provenance": self.provenance,
        }

    def to_csv(self, path: str | Path) -> None:
        vals = np.asarray(self.values, dtype=float)
        idx = np.indices(vals.shape).reshape(vals.ndim, -1).T * self.spacing
        cols = [f"t{i + 1}" for i in range(vals.ndim)] if vals.ndim > 1 else ["t"]
        data = np.column_stack([idx, vals.reshape(-1)])
        np.savetxt(path, data, delimiter=",", header=",".join(cols + ["value"]),
                   comments="", fmt="%.17g")

    def to_binary(self, path: str | Path) -> Path:
        """Write little-endian float64 values and a ``.json`` sidecar; returns the sidecar path."""
        path = Path(path)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True, default=_jsonable))
        return sidecar

    @classmethod
    def from_binary(cls, path: str | Path, model: KernelSpec) -> "SamplePath":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        vals = np.fromfile(path, dtype="<f8").reshape(meta["extent"])
        return cls(model, vals, meta["spacing"], meta["provenance"])


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(type(obj))


def _provenance(rng: RngLike, **extra) -> dict:
    out = {}
    if isinstance(rng, RngStream):
        out.update(seed=rng.seed, stream_id=rng.stream_id)
    out.update(extra)
    return out


def _extent(window, d: int) -> tuple[int, ...]:
    ext = (int(window),) * d if np.ndim(window) == 0 else tuple(int(w) for w in window)
    if len(ext) != d or any(w < 1 for w in ext):
        raise ParameterError(f"window must give {d} positive extents, got {window}")
    return ext


def _correlate(noise: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out_size = np.prod([n - k + 1 for n, k in zip(noise.shape, kernel.shape)])
    method = "direct" if out_size * kernel.size <= _DIRECT_LIMIT else "fft"
    return signal.correlate(noise, kernel, mode="valid", method=method)


# lattice models -------------------------------------------------------------

def simulate_moving_average(kernel: KernelSpec, window, rng: RngLike) -> SamplePath:
    """Moving average ``Y(t) = sum_u f(u) Z(t + u)`` on the window ``[0, window)``.

    Embedded models return a read-only broadcast view over the inert axes,
    and the constant field a broadcast of a single draw.
    """
    ext = _extent(window, kernel.d)
    gen = as_generator(rng)
    prov = _provenance(rng, window=list(ext))
    if kernel.tag is ModelTag.CONSTANT:
        y = kernel.scale * sample_sas(kernel.alpha, rng=gen)
        return SamplePath(kernel, np.broadcast_to(np.float64(y), ext), 1.0, prov)
    if kernel.tag is ModelTag.EMBEDDED:
        base = simulate_moving_average(kernel.base, ext[:kernel.p], gen)
        vals = base.values.reshape(base.values.shape + (1,) * (kernel.d - kernel.p))
        return SamplePath(kernel, np.broadcast_to(vals, ext), 1.0, prov)
    if kernel.tag not in LATTICE_TAGS:
        raise ParameterError(f"{kernel.tag.value} is not a lattice model")
    coefs = kernel.coefs
    noise = sample_sas(kernel.alpha, size=tuple(e + k - 1 for e, k in zip(ext, coefs.shape)), rng=gen)
    if kernel.tag is ModelTag.IID and coefs.size == 1:
        values = noise * float(coefs.flat[0])
    else:
        values = _correlate(noise, coefs)
    return SamplePath(kernel, values, 1.0, prov)


# linear fractional stable motion ---------------------------------------------

@dataclass(frozen=True)
class LfsmDiscretization:
    """Cell layout for the LFSM moving average, in units of the grid step.

    ``substeps`` fine cells per step cover ``near`` steps behind each point;
    unit cells continue out to ``far``.  With ``far=None`` the cutoff is the
    smallest one whose neglected ``alpha``-mass changes the scale by less than
    ``tol`` (relative).
    """

    substeps: int = 16
    near: int = 64
    far: int | None = None
    tol: float = 1e-3
    max_far: int = 2 * 10 ** 7

    def __post_init__(self):
        if self.substeps < 1 or self.near < 1:
            raise ParameterError("substeps and near must be positive")
        if not 0 < self.tol < 1:
            raise ParameterError("tol must lie in (0, 1)")


def lfsm_required_cutoff(H: float, alpha: float, tol: float) -> int:
    """Smallest integer cutoff meeting the relative scale tolerance ``tol``."""
    a = H - 1.0 / alpha
    if a == 0:
        return 1
    b1_alpha = lfsm_pieces(H, alpha).bn_alpha(1)
    target = alpha * tol * b1_alpha
    decay = alpha * (1.0 - H)
    log_l = math.log(abs(a) ** alpha / (decay * target)) / decay
    return max(1, int(math.ceil(math.exp(min(log_l, 60.0)))))


def _unit_kernel_h(x, a):
    """``(x + 1)_+**a - x_+**a``, the unit-lag increment kernel as a function of ``k - s``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(x + 1 > 0, np.abs(x + 1) ** a, 0.0)
        lo = np.where(x > 0, np.abs(x) ** a, 0.0)
    return up - lo


def _cell_weights(a: float, alpha: float, edges: np.ndarray, exact_mask: np.ndarray) -> np.ndarray:
    """Signed ``(mean of |h|**alpha over the cell)**(1/alpha)`` for each cell."""
    lo, hi = edges[:-1], edges[1:]
    nodes, wts = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    mass = (np.abs(_unit_kernel_h(pts, a)) ** alpha) @ wts * half
    for i in np.flatnonzero(exact_mask):
        f = lambda x: float(abs(_unit_kernel_h(x, a)) ** alpha)
        mass[i] = integrate.quad(f, lo[i], hi[i], epsabs=1e-13, epsrel=1e-10, limit=200)[0]
    sign = np.sign(_unit_kernel_h(mid, a))
    sign[sign == 0] = 1.0
    return sign * (mass / (hi - lo)) ** (1.0 / alpha)


@lru_cache(maxsize=16)
def _lfsm_plan(H: float, alpha: float, disc: LfsmDiscretization):
    a = H - 1.0 / alpha
    m, near = disc.substeps, disc.near
    need = lfsm_required_cutoff(H, alpha, disc.tol)
    far = need if disc.far is None else int(disc.far)
    if far > disc.max_far:
        raise ConfigurationError(f"truncation L={far} exceeds the memory cap {disc.max_far}; "
                                 f"raise tol (currently {disc.tol})")
    if far < need:
        raise ConfigurationError(f"truncation L={far} is too short for tol={disc.tol}; use L >= {need}")
    far = max(far, near)
    fine_edges = -1.0 + np.arange(m * (near + 1) + 1) / m
    exact = np.abs(0.5 * (fine_edges[:-1] + fine_edges[1:])) < 1.0  # cells next to the singular points
    w_fine = _cell_weights(a, alpha, fine_edges, exact)
    coarse_edges = near + np.arange(far - near + 1, dtype=float)
    w_coarse = _cell_weights(a, alpha, coarse_edges, np.zeros(far - near, dtype=bool))
    neglected = lfsm_tail_bound(H, alpha, float(far))
    return w_fine[::-1].copy(), w_coarse[::-1].copy(), neglected


def simulate_lfsm_increments(n: int, H: float, alpha: float, disc: LfsmDiscretization | None = None,
                             *, rng: RngLike, kappa: float = 1.0) -> SamplePath:
    """Unit-lag LFSM increments ``Y(k) = X(k + 1) - X(k)`` for ``k = 0..n-1``."""
    if n < 1:
        raise ParameterError("n must be positive")
    disc = disc or LfsmDiscretization()
    model = KernelSpec.lfsm(H, alpha, increment=True, kappa=kappa)
    w_fine, w_coarse, neglected = _lfsm_plan(float(H), float(alpha), disc)
    m, near = disc.substeps, disc.near
    nc = w_coarse.size
    gen = as_generator(rng)
    fine = sample_sas(alpha, (1.0 / m) ** (1.0 / alpha), size=m * (n + near), rng=gen)
    far = sample_sas(alpha, size=nc, rng=gen)
    # unit cells inside the fine region are sums of their fine cells
    blocks = fine.reshape(-1, m).sum(axis=1)
    coarse = np.concatenate([far, blocks[: max(0, n - 1)]])[: n + nc - 1]
    y_fine = _correlate(fine, w_fine)[::m][:n]
    y_coarse = _correlate(coarse, w_coarse)[:n]
    values = kappa * (y_fine + y_coarse)
    prov = _provenance(rng, substeps=m, near=near, far=near + nc, neglected_alpha_mass=neglected)
    return SamplePath(model, values, 1.0, prov)


def simulate_lfsm(t_max: float, grid_points: int, H: float, alpha: float,
                  disc: LfsmDiscretization | None = None, *, rng: RngLike, kappa: float = 1.0) -> SamplePath:
    """LFSM on ``grid_points`` equally spaced times in ``[0, t_max]`` with ``X(0) = 0``.

    The path is the cumulative sum of unit-lag increments rescaled by
    ``spacing**H`` (self-similarity).
    """
    if grid_points < 2 or not t_max > 0:
        raise ParameterError("need grid_points >= 2 and t_max > 0")
    inc = simulate_lfsm_increments(grid_points - 1, H, alpha, disc, rng=rng, kappa=kappa)
    step = t_max / (grid_points - 1)
    values = np.concatenate([[0.0], np.cumsum(inc.values)]) * step ** H
    return SamplePath(KernelSpec.lfsm(H, alpha, kappa=kappa), values, step, inc.provenance)


# harmonizable fractional stable motion ---------------------------------------

@dataclass(frozen=True)
class HfsmDiscretization:
    """Frequency cells on one period; ``oversample`` = cells per simulated step."""

    oversample: int = 8
    exact_cells: int = 8

    def __post_init__(self):
        if self.oversample < 2:
            raise ConfigurationError("frequency resolution too coarse: oversample must be at least 2")


def _folded_density(y: np.ndarray, q: float) -> np.ndarray:
    """``sum_j |y + 2 pi j|**(-q)`` for ``y`` in ``(0, 2 pi)``."""
    u = y / (2.0 * np.pi)
    return (2.0 * np.pi) ** (-q) * (special.zeta(q, u) + special.zeta(q, 1.0 - u))


@lru_cache(maxsize=16)
def _hfsm_plan(H: float, alpha: float, nfreq: int, exact_cells: int) -> np.ndarray:
    q = alpha * H + 1.0
    dy = 2.0 * np.pi / nfreq
    edges = dy * np.arange(nfreq + 1)
    lo, hi = edges[:-1], edges[1:]
    nodes, wts = np.polynomial.legendre.leggauss(6)
    mid, half = 0.5 * (lo + hi), 0.5 * dy
    half_cells = nfreq // 2
    # mass is symmetric about pi, so evaluate the first half only
    pts = mid[:half_cells, None] + half * nodes[None, :]
    dens = np.abs(2.0 * np.sin(0.5 * pts)) ** alpha * _folded_density(pts, q)
    mass = np.empty(nfreq)
    mass[:half_cells] = dens @ wts * half

    def smooth_part(y):
        # |2 sin(y/2)|^alpha * folded density, divided by y**(alpha - q)
        s = np.sinc(y / (2.0 * np.pi)) ** alpha
        rest = (2.0 * np.pi) ** (-q) * (special.zeta(q, 1.0 + y / (2.0 * np.pi))
                                        + special.zeta(q, 1.0 - y / (2.0 * np.pi)))
        return s * (1.0 + y ** q * rest)

    for i in range(min(exact_cells, half_cells)):
        if i == 0:
            mass[i] = integrate.quad(smooth_part, lo[i], hi[i], weight="alg", wvar=(alpha - q, 0.0),
                                     epsabs=0, epsrel=1e-10, limit=200)[0]
        else:
            mass[i] = integrate.quad(lambda y: smooth_part(y) * y ** (alpha - q), lo[i], hi[i],
                                     epsabs=0, epsrel=1e-10, limit=200)[0]
    mass[half_cells:] = mass[:half_cells][::-1]
    phase = np.exp(1j * mid) - 1.0
    phase /= np.abs(phase)
    return kappa_tilde(H, alpha) * mass ** (1.0 / alpha) * phase


def _rotational_noise(alpha: float, size: int, gen: np.random.Generator) -> np.ndarray:
    """Isotropic complex SaS draws whose real parts have unit scale (sub-Gaussian construction)."""
    amp = np.sqrt(sample_positive_stable(alpha / 2.0, size=size, rng=gen))
    g = gen.normal(0.0, math.sqrt(2.0), size=(2, size))
    return amp * (g[0] + 1j * g[1])


def simulate_hfsm_increments(n: int, H: float, alpha: float, disc: HfsmDiscretization | None = None,
                             *, rng: RngLike) -> SamplePath:
    """Unit-lag HFSM increments for ``k = 0..n-1`` (unit SaS scale each)."""
    if n < 1:
        raise ParameterError("n must be positive")
    disc = disc or HfsmDiscretization()
    nfreq = 1 << int(math.ceil(math.log2(max(2, disc.oversample * n))))
    weights = _hfsm_plan(float(H), float(alpha), nfreq, disc.exact_cells)
    gen = as_generator(rng)
    z = _rotational_noise(alpha, nfreq, gen)
    k = np.arange(n)
    spec = np.fft.ifft(weights * z)[:n] * nfreq
    values = np.real(np.exp(1j * np.pi * k / nfreq) * spec)
    model = KernelSpec.hfsm(H, alpha, increment=True)
    return SamplePath(model, values, 1.0, _provenance(rng, frequency_cells=nfreq))


def simulate_hfsm(t_max: float, grid_points: int, H: float, alpha: float,
                  disc: HfsmDiscretization | None = None, *, rng: RngLike) -> SamplePath:
    """HFSM on ``grid_points`` equally spaced times in ``[0, t_max]`` with ``X(0) = 0``."""
    if grid_points < 2 or not t_max > 0:
        raise ParameterError("need grid_points >= 2 and t_max > 0")
    inc = simulate_hfsm_increments(grid_points - 1, H, alpha, disc, rng=rng)
    step = t_max / (grid_points - 1)
    values = np.concatenate([[0.0], np.cumsum(inc.values)]) * step ** H
    return SamplePath(KernelSpec.hfsm(H, alpha), values, step, inc.provenance)


# LePage series ---------------------------------------------------------------

@dataclass(frozen=True)
class LePageConfig:
    """Series truncation; ``gaussian_remainder`` adds the normal approximation of the omitted terms."""

    J: int = 10_000
    tol: float | None = None
    gaussian_remainder: bool = True
    max_remainder_dim: int = 4096

    def __post_init__(self):
        if self.J < 1:
            raise ParameterError("J must be at least 1")


def lepage_tail_scale(J: int, alpha: float) -> float:
    """Typical size of the omitted series tail, ``sqrt(J**(1 - 2/alpha) / (2/alpha - 1))``."""
    return math.sqrt(J ** (1.0 - 2.0 / alpha) / (2.0 / alpha - 1.0))


@dataclass
class _LePagePlan:
    alpha: float
    window: tuple[int, ...]
    probs: np.ndarray       # eta_n over support points
    cdf: np.ndarray
    ratios: np.ndarray      # (support, window size): f(t + s) / max_t |f(t + s)|
    prefactor: float        # b_n * C_alpha**(1/alpha)
    remainder_root: np.ndarray | None


def _lepage_plan(model: KernelSpec, n: int, cfg: LePageConfig) -> _LePagePlan:
    if model.tag not in LATTICE_TAGS:
        raise ParameterError("the LePage sampler needs a finite lattice kernel")
    alpha, d = model.alpha, model.d
    coefs = model.coefs
    window = (n,) * d
    # support of s -> f(t + s) over the window, padded by n - 1 on the low side
    padded = np.pad(coefs, [(n - 1, 0)] * d)
    sup_shape = padded.shape
    # ratios[s, t] = f(t + s) with s ranging over the padded support
    grids = np.indices(sup_shape).reshape(d, -1).T
    offs = np.indices(window).reshape(d, -1).T
    idx = grids[:, None, :] + offs[None, :, :]
    inside = np.all(idx < np.asarray(sup_shape), axis=-1)
    idx = np.minimum(idx, np.asarray(sup_shape) - 1)
    vals = np.where(inside, padded[tuple(np.moveaxis(idx, -1, 0))], 0.0)
    peak = np.max(np.abs(vals), axis=1)
    keep = peak > 0
    vals, peak = vals[keep], peak[keep]
    power = peak ** alpha
    probs = power / power.sum()
    bn, _ = bn_moving_average(model, n)
    if not math.isclose(power.sum() ** (1.0 / alpha), bn, rel_tol=1e-12):
        raise RuntimeError("LePage support table disagrees with b_n")
    ratios = vals / peak[:, None]
    prefactor = bn * c_alpha(alpha) ** (1.0 / alpha)
    root = None
    if cfg.gaussian_remainder and ratios.shape[1] <= cfg.max_remainder_dim:
        cov = (ratios * probs[:, None]).T @ ratios
        evals, evecs = np.linalg.eigh(cov)
        root = evecs * np.sqrt(np.clip(evals, 0.0, None))[None, :]
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return _LePagePlan(alpha, window, probs, cdf, ratios, prefactor, root)


def _lepage_draw(plan: _LePagePlan, cfg: LePageConfig, gen: np.random.Generator) -> tuple[np.ndarray, float]:
    gam = poisson_arrivals(cfg.J, rng=gen)
    signs = rademacher(cfg.J, rng=gen)
    u = np.searchsorted(plan.cdf, gen.random(cfg.J), side="right")
    u = np.minimum(u, plan.cdf.size - 1)
    coef = np.bincount(u, weights=signs * gam ** (-1.0 / plan.alpha), minlength=plan.cdf.size)
    y = coef @ plan.ratios
    gamma_j = float(gam[-1])
    if plan.remainder_root is not None:
        var = gamma_j ** (1.0 - 2.0 / plan.alpha) / (2.0 / plan.alpha - 1.0)
        y = y + math.sqrt(var) * (plan.remainder_root @ gen.standard_normal(plan.remainder_root.shape[1]))
    return plan.prefactor * y, gamma_j


def lepage_series_field(model: KernelSpec, n: int, cfg: LePageConfig | None = None, *,
                        rng: RngLike) -> SamplePath:
    """Field on the window ``[0, n-1]^d`` from the truncated LePage series.

    Points are drawn from the law proportional to ``max_t |f_t|**alpha``.
    The provenance records ``J``, ``Gamma_J**(-1/alpha)`` (the envelope of
    the first omitted term, times the prefactor) and whether the Gaussian
    remainder was added.
    """
    cfg = cfg or LePageConfig()
    plan = _lepage_plan(model, int(n), cfg)
    y, gamma_j = _lepage_draw(plan, cfg, as_generator(rng))
    envelope = plan.prefactor * gamma_j ** (-1.0 / model.alpha)
    if cfg.tol is not None and plan.remainder_root is None:
        bound = plan.prefactor * lepage_tail_scale(cfg.J, model.alpha)
        if bound > cfg.tol:
            warnings.warn(f"LePage truncation J={cfg.J} leaves a tail of size ~{bound:.3g} "
                          f"above tol={cfg.tol}", RuntimeWarning, stacklevel=2)
    prov = _provenance(rng, J=cfg.J, omitted_envelope=envelope,
                       gaussian_remainder=plan.remainder_root is not None)
    return SamplePath(model, y.reshape(plan.window), 1.0, prov)


def lepage_replicates(model: KernelSpec, n: int, R: int, seed: int, cfg: LePageConfig | None = None) -> np.ndarray:
    """``R`` LePage samples (one stream per replicate), shape ``(R, n**d)``."""
    cfg = cfg or LePageConfig()
    plan = _lepage_plan(model, int(n), cfg)
    out = np.empty((R, plan.ratios.shape[1]))
    for r in range(R):
        out[r] = _lepage_draw(plan, cfg, RngStream(seed, r).generator())[0]
    return out


# dispatch and replicate farms -----------------------------------------------

def simulate_window(model: KernelSpec, n: int, rng: RngLike, *, lfsm_disc: LfsmDiscretization | None = None,
                    hfsm_disc: HfsmDiscretization | None = None) -> SamplePath:
    """Stationary field of ``model`` on ``[0, n-1]^d`` (self-similar models give unit-lag increments)."""
    tag = model.tag
    if tag in LATTICE_TAGS or tag in (ModelTag.EMBEDDED, ModelTag.CONSTANT):
        return simulate_moving_average(model, n, rng)
    if tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        return simulate_lfsm_increments(n, model.H, model.alpha, lfsm_disc, rng=rng, kappa=model.scale)
    if tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT):
        path = simulate_hfsm_increments(n, model.H, model.alpha, hfsm_disc, rng=rng)
        factor = model.scale / kappa_tilde(model.H, model.alpha)
        return path if factor == 1.0 else SamplePath(model, path.values * factor, 1.0, path.provenance)
    raise ParameterError(f"unsupported model {tag}")


def map_replicates(fn: Callable[[RngStream], object], seed: int, replicates: int | Sequence[int],
                   threads: int = 1) -> list:
    """Apply ``fn`` to ``RngStream(seed, r)`` for each replicate, in replicate order.

    Results do not depend on ``threads``; 0 means one worker per CPU.
    """
    ids = range(replicates) if isinstance(replicates, int) else list(replicates)
    streams = [RngStream(seed, r) for r in ids]
    if threads == 1 or len(streams) < 2:
        return [fn(s) for s in streams]
    workers = (os.cpu_count() or 1) if threads == 0 else threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams))

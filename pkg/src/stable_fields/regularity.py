"""Dyadic chaining grids, path oscillation and modulus-of-continuity fits."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import InsufficientDataError, ParameterError
from .fitting import ScalingFit, loglog_fit
from .simulate import SamplePath


# dyadic grids ----------------------------------------------------------------

@dataclass(frozen=True)
class DyadicGrid:
    """Points ``k / 2**m`` with ``0 <= k_j <= 2**m - 1`` in ``[0, 1)^d``."""

    m: int
    d: int

    def __post_init__(self):
        if self.m < 0 or self.d < 1:
            raise ParameterError("need m >= 0 and d >= 1")

    @property
    def side(self) -> int:
        return 2 ** self.m

    @property
    def size(self) -> int:
        return self.side ** self.d

    def indices(self) -> np.ndarray:
        """Integer coordinates, shape ``(size, d)``, in row-major order."""
        return np.indices((self.side,) * self.d).reshape(self.d, -1).T

    def points(self) -> np.ndarray:
        return self.indices() / self.side

    def neighbors(self, k) -> np.ndarray:
        """Integer coordinates in level ``m - 1`` within sup-distance ``2**-m`` of ``k / 2**m``."""
        if self.m == 0:
            raise ParameterError("level 0 has no coarser level")
        k = np.asarray(k, dtype=int).reshape(self.d)
        per_axis = []
        for kj in k:
            # |kj - 2 j| <= 1
            cands = [j for j in ((kj - 1) // 2, kj // 2, (kj + 1) // 2)
                     if 0 <= j < self.side // 2 and abs(kj - 2 * j) <= 1]
            per_axis.append(sorted(set(cands)))
        return np.array(list(itertools.product(*per_axis)), dtype=int).reshape(-1, self.d)

    def parent(self, k) -> np.ndarray:
        """Nearest lower-level point at or below ``k / 2**m`` (coordinate-wise floor)."""
        if self.m == 0:
            raise ParameterError("level 0 has no coarser level")
        return np.asarray(k, dtype=int) // 2

    def max_neighbor_count(self) -> int:
        if self.m == 0:
            return 0
        return max(len(self.neighbors(k)) for k in self.indices())

    def verify_chaining(self) -> bool:
        """Every point's parent lies in its neighbour set."""
        if self.m == 0:
            return True
        for k in self.indices():
            nb = self.neighbors(k)
            if not np.any(np.all(nb == self.parent(k), axis=1)):
                return False
        return True


def dyadic_grid(m: int, d: int) -> DyadicGrid:
    grid = DyadicGrid(int(m), int(d))
    if grid.m and grid.size <= 1 << 14 and grid.max_neighbor_count() > 2 ** d:
        raise RuntimeError("neighbour bound violated")  # cannot happen for this construction
    return grid


# oscillation -----------------------------------------------------------------

def _dense_values(values: np.ndarray) -> np.ndarray:
    """Drop broadcast (zero-stride) axes; the field is constant along them."""
    v = np.asarray(values)
    index = tuple(0 if (s == 0 and n > 1) else slice(None) for s, n in zip(v.strides, v.shape))
    return np.asarray(v[index], dtype=float)


def _window_steps(spacing: float, h: float) -> int:
    w = int(math.floor(h / spacing + 1e-9))
    if w < 1:
        raise ParameterError(f"h={h} is below the grid resolution {spacing}")
    return w


def oscillation(path: SamplePath, h: float) -> float:
    """``max |X(t) - X(s)|`` over grid pairs with ``|t - s|_inf <= h``.

    Pairs within sup-distance ``h`` are exactly the pairs sharing a cube of
    side ``h``, so the answer is the largest max-minus-min over sliding cubes.
    """
    w = _window_steps(path.spacing, h)
    vals = _dense_values(path.values)
    size = [min(w + 1, n) for n in vals.shape]
    hi = ndimage.maximum_filter(vals, size=size, mode="nearest")
    lo = ndimage.minimum_filter(vals, size=size, mode="nearest")
    return float(np.max(hi - lo))


def oscillation_bruteforce(values: np.ndarray, spacing: float, h: float) -> float:
    """All-pairs reference implementation (quadratic in the grid size)."""
    w = _window_steps(spacing, h)
    vals = np.asarray(values, dtype=float)
    idx = np.indices(vals.shape).reshape(vals.ndim, -1).T
    flat = vals.reshape(-1)
    best = 0.0
    for i in range(flat.size):
        close = np.max(np.abs(idx - idx[i]), axis=1) <= w
        best = max(best, float(np.max(np.abs(flat[close] - flat[i]))))
    return best


# modulus profiles --------------------------------------------------------------

@dataclass
class ModulusProfile:
    """Per-path ``omega(h)`` on a grid of ``h`` with quartile summaries.

    ``normalizer`` documents any division applied before fitting, e.g.
    ``{"sigma": "h^H", "log_power": 0.5}``.
    """

    h: np.ndarray
    omega: np.ndarray            # shape (paths, len(h))
    normalizer: dict = field(default_factory=dict)

    @property
    def omega_median(self) -> np.ndarray:
        return np.median(self.omega, axis=0)

    @property
    def omega_q25(self) -> np.ndarray:
        return np.quantile(self.omega, 0.25, axis=0)

    @property
    def omega_q75(self) -> np.ndarray:
        return np.quantile(self.omega, 0.75, axis=0)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.omega, axis=1) >= 0))

    def to_csv(self, path) -> None:
        data = np.column_stack([self.h, self.omega_median, self.omega_q25, self.omega_q75])
        np.savetxt(path, data, delimiter=",", header="h,omega_median,omega_q25,omega_q75",
                   comments="", fmt="%.17g")


def dyadic_h_grid(spacing: float, lo_factor: int = 8, hi: float = 0.25) -> np.ndarray:
    """Dyadic ``h`` from ``lo_factor * spacing`` up to ``hi``."""
    k_lo = int(math.ceil(math.log2(lo_factor * spacing) - 1e-9))
    k_hi = int(math.floor(math.log2(hi) + 1e-9))
    return 2.0 ** np.arange(k_lo, k_hi + 1)


def modulus_profile(paths: Sequence[SamplePath], h_grid) -> ModulusProfile:
    h = np.sort(np.asarray(h_grid, dtype=float))
    omega = np.array([[oscillation(p, hv) for hv in h] for p in paths])
    return ModulusProfile(h, omega.reshape(len(paths), h.size))


def fit_holder_exponent(paths: Sequence[SamplePath], h_grid=None, *, log_power: float = 0.0,
                        min_spacing_factor: int = 8) -> ScalingFit:
    """Slope of ``log median omega(h)`` against ``log h``.

    Only ``h >= min_spacing_factor * spacing`` enters the fit.  With
    ``log_power > 0`` the median is first divided by ``log(1/h)**log_power``,
    which removes a logarithmic factor of known power from the modulus.
    """
    if not paths:
        raise InsufficientDataError("no paths")
    spacing = max(p.spacing for p in paths)
    h = dyadic_h_grid(spacing, min_spacing_factor) if h_grid is None else np.asarray(h_grid, dtype=float)
    h = np.sort(h[h >= min_spacing_factor * spacing * (1 - 1e-12)])
    if h.size < 4:
        raise InsufficientDataError("need at least 4 usable h values")
    if log_power and np.any(h >= 1):
        raise ParameterError("log normalization needs h < 1")
    prof = modulus_profile(paths, h)
    y = prof.omega_median / (np.log(1.0 / h) ** log_power if log_power else 1.0)
    return loglog_fit(h, y, min_points=4, min_octaves=2.0)


# modulus ratios ----------------------------------------------------------------

@dataclass
class RatioSeries:
    h: np.ndarray
    ratios: np.ndarray           # shape (paths, len(h))
    path_decreasing: np.ndarray  # per path: ratio shrinks as h shrinks over the three smallest h
    verdict: bool

    @property
    def median(self) -> np.ndarray:
        return np.median(self.ratios, axis=0)

    @property
    def fraction_decreasing(self) -> float:
        return float(np.mean(self.path_decreasing))


def modulus_normalizer(h, H: float, theta2: float, alpha: float, gamma: float) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return h ** (H - theta2 / alpha) * np.log(1.0 / h) ** (1.0 / gamma)


def modulus_ratio_series(paths: Sequence[SamplePath], H: float, theta2: float, alpha: float,
                         gamma: float, h_grid) -> RatioSeries:
    """``omega(h) / (h**(H - theta2/alpha) * log(1/h)**(1/gamma))`` per path.

    A path counts as decreasing when the ratio at the smallest ``h`` does
    not exceed the ratio at the third smallest.  The overall verdict asks for
    the median ratio to be non-increasing as ``h`` shrinks over those three
    values.
    """
    if theta2 >= alpha * H:
        raise ParameterError(f"theta2={theta2} must be below alpha*H={alpha * H}")
    if not 0 < gamma < alpha:
        raise ParameterError("gamma must lie in (0, alpha)")
    h = np.sort(np.asarray(h_grid, dtype=float))
    if h.size < 3 or np.any(h >= 1):
        raise ParameterError("need at least three h values in (0, 1)")
    prof = modulus_profile(paths, h)
    ratios = prof.omega / modulus_normalizer(h, H, theta2, alpha, gamma)[None, :]
    path_dec = ratios[:, 0] <= ratios[:, 2]
    med = np.median(ratios, axis=0)
    verdict = bool(med[0] <= med[1] <= med[2])
    return RatioSeries(h, ratios, path_dec, verdict)


# chaining bound --------------------------------------------------------------------

@dataclass
class ChainingReport:
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    n: int
    gamma: float

    @property
    def holds(self) -> bool:
        slack = 3.0 * math.hypot(self.lhs_stderr, self.rhs_stderr)
        return self.lhs <= self.rhs + slack


def chain_pair_max(values: np.ndarray, n: int) -> float:
    """``max |X(tau) - X(tau')|`` over ``tau`` in level ``n`` and its level-``n-1`` neighbours (d = 1).

    ``values[k]`` is ``X(k / 2**n)`` for ``k = 0..2**n - 1``.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (2 ** n,):
        raise ParameterError("expected X on the level-n dyadic grid")
    coarse = v[::2]   # level n-1 points j / 2**(n-1) = 2j / 2**n
    left = np.abs(v[1::2] - coarse[: v[1::2].size])
    right = np.abs(v[1:-1:2] - coarse[1:])
    parts = [left, right] if right.size else [left]
    return float(max(np.max(p) for p in parts)) if v.size > 1 else 0.0


def chaining_fields(values_ext: np.ndarray, n: int, H: float, provenance: dict | None = None):
    """Split one path into ``X`` on the level-``n`` grid and the unit-lag fields ``Y^(v)``.

    ``values_ext[k + 1] = X(k / 2**n)`` for ``k = -1..2**n``; self-similarity
    rescales the lag-``2**-n`` increments to unit lag.
    """
    v = np.asarray(values_ext, dtype=float)
    if v.shape != (2 ** n + 2,):
        raise ParameterError("expected 2**n + 2 values covering k = -1..2**n")
    x = v[1:-1] - v[1]
    scale = 2.0 ** (n * H)
    y = {+1: scale * (v[2:] - v[1:-1]), -1: scale * (v[:-2] - v[1:-1])}
    prov = dict(provenance or {})
    return (SamplePath(None, x, 2.0 ** -n, prov),
            {k: SamplePath(None, val, 1.0, dict(prov)) for k, val in y.items()})


def _same_source(a: SamplePath, b: SamplePath) -> bool:
    keys = ("seed", "stream_id")
    return all(a.provenance.get(k) == b.provenance.get(k) for k in keys)


def chaining_increment_bound(x_paths: Sequence[SamplePath], y_paths: Mapping[int, Sequence[SamplePath]],
                             n: int, gamma: float, H: float) -> ChainingReport:
    """Monte Carlo estimates of both sides of the one-level chaining inequality (d = 1).

    lhs: ``E max |X(tau) - X(tau')|**gamma`` over neighbouring chain pairs;
    rhs: ``2**(-n gamma H) * sum_v E (M^(v)_{2**n})**gamma``.
    """
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    R = len(x_paths)
    if R < 2 or any(len(ys) != R for ys in y_paths.values()):
        raise ParameterError("need matching replicate counts (at least 2)")
    for ys in y_paths.values():
        for xp, yp in zip(x_paths, ys):
            if not _same_source(xp, yp):
                raise ParameterError("X and Y^(v) replicates come from different seeds")
    lhs = np.array([chain_pair_max(p.values, n) ** gamma for p in x_paths])
    factor = 2.0 ** (-n * gamma * H)
    rhs = np.zeros(R)
    for ys in y_paths.values():
        rhs += np.array([np.max(np.abs(p.values[: 2 ** n])) ** gamma for p in ys])
    rhs *= factor
    se = lambda a: float(np.std(a, ddof=1) / math.sqrt(a.size))
    return ChainingReport(float(lhs.mean()), se(lhs), float(rhs.mean()), se(rhs), n, gamma)


def simulate_chaining_fields(model, n: int, rng, **disc):
    """One replicate of ``X`` on the level-``n`` grid and its ``Y^(v)`` fields, from shared noise.

    Supports LFSM, HFSM and the constant field (d = 1).
    """
    from .kernels import ModelTag
    from .simulate import simulate_hfsm_increments, simulate_lfsm_increments
    from .stable_core import as_generator, sample_sas

    size = 2 ** n + 1
    if model.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        inc = simulate_lfsm_increments(size, model.H, model.alpha, disc.get("lfsm_disc"),
                                       rng=rng, kappa=model.scale)
        H = model.H
    elif model.tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT):
        inc = simulate_hfsm_increments(size, model.H, model.alpha, disc.get("hfsm_disc"), rng=rng)
        H = model.H
    elif model.tag is ModelTag.CONSTANT and model.d == 1:
        value = model.scale * sample_sas(model.alpha, rng=as_generator(rng))
        prov = {"seed": getattr(rng, "seed", None), "stream_id": getattr(rng, "stream_id", None)}
        x = SamplePath(model, np.full(2 ** n, value), 2.0 ** -n, prov)
        zero = {v: SamplePath(model, np.zeros(2 ** n), 1.0, dict(prov)) for v in (1, -1)}
        return x, zero
    else:
        raise ParameterError(f"chaining fields are not available for {model.tag.value}")
    ext = np.concatenate([[0.0], np.cumsum(inc.values)]) * 2.0 ** (-n * H)
    x, ys = chaining_fields(ext, n, H, inc.provenance)
    x.model = model
    return x, ys

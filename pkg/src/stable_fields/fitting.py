"""Least-squares power-law fits on log-log scale."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientDataError


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    intercept: float
    stderr: float
    r2: float
    n_range: tuple[float, float]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        return d


def loglog_fit(x, y, *, min_points: int = 4, min_octaves: float = 2.0) -> ScalingFit:
    """Fit ``log y = intercept + exponent * log x`` by ordinary least squares.

    ``x`` must span at least ``min_octaves`` factors of two.  The standard
    error is the usual OLS slope error; R^2 is 1 for an exact fit (including
    constant ``y``).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InsufficientDataError("x and y must be 1-d arrays of equal length")
    if x.size < min_points:
        raise InsufficientDataError(f"need at least {min_points} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InsufficientDataError("log-log fit needs strictly positive data")
    if math.log2(x.max() / x.min()) < min_octaves:
        raise InsufficientDataError(f"x must span at least {min_octaves} octaves")

    lx, ly = np.log(x), np.log(y)
    mx, my = lx.mean(), ly.mean()
    dx, dy = lx - mx, ly - my
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = float(my - slope * mx)
    resid = dy - slope * dx
    sse = float(resid @ resid)
    sst = float(dy @ dy)
    dof = x.size - 2
    stderr = math.sqrt(sse / dof / sxx) if dof > 0 else 0.0
    # constant y up to rounding in the mean counts as an exact fit
    flat = sst <= 1e-24 * x.size * max(1.0, my * my)
    r2 = 1.0 if flat else min(1.0, max(0.0, 1.0 - sse / sst))
    return ScalingFit(slope, intercept, stderr, r2, (float(x.min()), float(x.max())))

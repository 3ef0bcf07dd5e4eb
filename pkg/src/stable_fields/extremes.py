"""Partial maxima, their moments, growth exponents and the Frechet limit."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .bn_analysis import limit_constant_estimate
from .errors import ConservativeRegimeError, ParameterError
from .fitting import ScalingFit, loglog_fit
from .kernels import KernelSpec
from .simulate import SamplePath, map_replicates, simulate_window
from .stable_core import FrechetLaw, c_alpha, check_alpha, frechet_moment

MOM_BLOCKS = 16


def _abs_dense(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values)
    # the field is constant along broadcast axes, so one slice suffices
    index = tuple(slice(0, 1) if (s == 0 and n > 1) else slice(None) for s, n in zip(v.strides, v.shape))
    return np.abs(np.asarray(v[index], dtype=float))


def partial_max(path: SamplePath, n: int) -> float:
    """``max |Y(t)|`` over the cube ``0 <= t <= (n-1)1``."""
    if n < 1 or any(n > e for e in path.extent):
        raise ParameterError(f"n={n} exceeds the path extent {path.extent}")
    a = _abs_dense(path.values)
    return float(np.max(a[tuple(slice(0, min(n, s)) for s in a.shape)]))


def partial_max_sequence(path: SamplePath, n_grid: Sequence[int]) -> np.ndarray:
    """``M_n`` for every ``n`` in ``n_grid`` from one pass of cumulative maxima."""
    n_grid = np.asarray(n_grid, dtype=int)
    if np.any(n_grid < 1) or any(n_grid.max() > e for e in path.extent):
        raise ParameterError("window sizes must lie in [1, extent]")
    a = _abs_dense(path.values)
    for ax in range(a.ndim):
        a = np.maximum.accumulate(a, axis=ax)
    idx = tuple(np.minimum(n_grid - 1, s - 1) for s in a.shape)
    return a[idx]


# moment tables -------------------------------------------------------------------

@dataclass
class MaxMomentTable:
    model: KernelSpec
    beta: float
    entries: list[tuple[int, float, float, int]] = field(default_factory=list)
    estimator: str = "mean"

    @property
    def n(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries], dtype=float)

    @property
    def estimate(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "estimate", "stderr", "R"])
            for n, est, se, r in self.entries:
                w.writerow([n, repr(float(est)), repr(float(se)), r])

    @classmethod
    def from_csv(cls, path: str | Path, model: KernelSpec, beta: float, estimator: str = "mean"):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        entries = [(int(r["n"]), float(r["estimate"]), float(r["stderr"]), int(r["R"])) for r in rows]
        return cls(model, beta, entries, estimator)


def _median_of_means(x: np.ndarray, blocks: int) -> tuple[np.ndarray, np.ndarray]:
    parts = np.array_split(x, blocks, axis=0)
    means = np.array([p.mean(axis=0) for p in parts])
    # large-sample standard error of a median of (approximately normal) block means
    se = math.sqrt(math.pi / 2.0) * means.std(axis=0, ddof=1) / math.sqrt(blocks)
    return np.median(means, axis=0), se


def max_power_samples(model: KernelSpec, n_grid: Sequence[int], beta: float, R: int, seed: int,
                      *, threads: int = 1, **sim_kwargs) -> np.ndarray:
    """Matrix ``M_n**beta`` with one row per replicate (one path per replicate, nested windows)."""
    n_grid = sorted(int(v) for v in n_grid)
    nmax = n_grid[-1]

    def one(stream):
        path = simulate_window(model, nmax, stream, **sim_kwargs)
        return partial_max_sequence(path, n_grid) ** beta

    return np.array(map_replicates(one, seed, R, threads))


def estimate_max_moment(model: KernelSpec, n_grid: Sequence[int], beta: float, R: int, seed: int,
                        *, threads: int = 1, min_replicates: int = 100, **sim_kwargs) -> MaxMomentTable:
    """Monte Carlo ``E[M_n**beta]`` on ``n_grid`` with common random numbers across ``n``.

    Uses the plain mean when ``2 beta < alpha`` and a median of 16 block
    means otherwise (the variance of ``M_n**beta`` may be infinite there).
    """
    check_alpha(model.alpha)
    if not 0 < beta < model.alpha:
        raise ParameterError(f"beta must lie in (0, alpha={model.alpha})")
    if R < min_replicates:
        raise ParameterError(f"need at least {min_replicates} replicates")
    n_grid = sorted({int(v) for v in n_grid})
    samples = max_power_samples(model, n_grid, beta, R, seed, threads=threads, **sim_kwargs)
    if 2 * beta < model.alpha:
        est = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(R)
        tag = "mean"
    else:
        est, se = _median_of_means(samples, MOM_BLOCKS)
        tag = "median_of_means"
    entries = [(n, float(e), float(s), R) for n, e, s in zip(n_grid, est, se)]
    return MaxMomentTable(model, float(beta), entries, tag)


def fit_growth_rate(table: MaxMomentTable) -> ScalingFit:
    if len(table.entries) < 4:
        raise ParameterError("need at least 4 table entries")
    return loglog_fit(table.n, table.estimate)


def growth_report(fit: ScalingFit, expected: float, tol: float, *, mode: str = "within") -> dict:
    """JSON-ready verdict; ``mode="at_most"`` only bounds the fitted exponent from above."""
    if mode == "within":
        ok = abs(fit.exponent - expected) <= tol
    elif mode == "at_most":
        ok = fit.exponent <= expected + tol
    else:
        raise ParameterError(f"unknown mode {mode}")
    return {
        "exponent_expected": expected,
        "exponent_fitted": fit.exponent,
        "stderr": fit.stderr,
        "verdict": "pass" if ok else "fail",
    }


# limit constants -------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConstant:
    alpha: float
    beta: float
    c_tilde: float
    value: float


def limit_constant(alpha: float, beta: float, c_tilde: float) -> LimitConstant:
    """``c_tilde**beta * C_alpha**(beta/alpha) * Gamma(1 - beta/alpha)``."""
    if c_tilde < 0:
        raise ParameterError("c_tilde must be non-negative")
    moment = frechet_moment(alpha, beta)
    if c_tilde == 0:
        return LimitConstant(alpha, beta, 0.0, 0.0)
    value = c_tilde ** beta * c_alpha(alpha) ** (beta / alpha) * moment
    return LimitConstant(alpha, beta, float(c_tilde), float(value))


@dataclass
class MomentConstantReport:
    n: np.ndarray
    scaled: np.ndarray
    scaled_stderr: np.ndarray
    target: float
    passed: bool
    decreasing_after: int | None = None

    def as_dict(self) -> dict:
        return {
            "n": self.n.tolist(),
            "scaled": self.scaled.tolist(),
            "scaled_stderr": self.scaled_stderr.tolist(),
            "target": self.target,
            "verdict": "pass" if self.passed else "fail",
        }


def verify_moment_constant(table: MaxMomentTable, limit: LimitConstant, dim: int, *,
                           allowance: float = 0.10, decreasing_from: int = 16) -> MomentConstantReport:
    """Compare ``n**(-dim beta/alpha) E[M_n**beta]`` with the limit constant.

    For a positive limit the largest-``n`` value must lie within 3 standard
    errors plus ``allowance`` (relative) of it.  For the zero limit the scaled
    sequence must decrease strictly from ``n >= decreasing_from`` on.
    """
    alpha = table.model.alpha
    factor = table.n ** (-dim * table.beta / alpha)
    scaled = table.estimate * factor
    se = table.stderr * factor
    if limit.value > 0:
        ok = abs(scaled[-1] - limit.value) <= 3 * se[-1] + allowance * limit.value
        return MomentConstantReport(table.n, scaled, se, limit.value, bool(ok))
    tail = scaled[table.n >= decreasing_from]
    ok = tail.size >= 2 and bool(np.all(np.diff(tail) < 0))
    return MomentConstantReport(table.n, scaled, se, 0.0, ok, decreasing_from)


# Frechet limit -------------------------------------------------------------------------

@dataclass(frozen=True)
class FrechetTest:
    statistic: float
    pvalue: float
    threshold: float
    passed: bool
    scale: float
    median_ratio: float
    n: int
    R: int


def frechet_scale(model: KernelSpec) -> float:
    """Scale of the Frechet limit of ``n**(-p/alpha) M_n``: ``c_tilde * C_alpha**(1/alpha)``."""
    if not model.dissipative:
        raise ConservativeRegimeError("conservative models have a degenerate (zero) maxima limit")
    return limit_constant_estimate(model) * c_alpha(model.alpha) ** (1.0 / model.alpha)


def frechet_limit_test(model: KernelSpec, n: int, R: int, seed: int, *, threshold: float = 0.05,
                       threads: int = 1, min_replicates: int = 500, **sim_kwargs) -> FrechetTest:
    """KS distance between ``n**(-p/alpha) M_n`` and Frechet(alpha, c_hat)."""
    if not model.dissipative:
        raise ConservativeRegimeError(f"{model.tag.value}: the normalized maxima converge to 0, not Frechet")
    if R < min_replicates:
        raise ParameterError(f"need at least {min_replicates} replicates")
    p = model.effective_dimension
    scale = frechet_scale(model)
    samples = max_power_samples(model, [n], 1.0, R, seed, threads=threads, **sim_kwargs)[:, 0]
    samples = samples * float(n) ** (-p / model.alpha)
    law = FrechetLaw(model.alpha, scale)
    res = stats.kstest(samples, law.cdf)
    median_ratio = float(np.median(samples) / law.median())
    return FrechetTest(float(res.statistic), float(res.pvalue), threshold,
                       bool(res.statistic <= threshold), scale, median_ratio, int(n), int(R))

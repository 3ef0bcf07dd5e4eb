"""Command-line driver: ``stable-fields run <config.json>`` and ``stable-fields report <DIR>``.

A config is a JSON object with ``model``, ``experiment``, ``numeric`` and
``output`` blocks; unknown keys are rejected.  Each run writes its outputs, a
``summary.json`` verdict and a ``manifest.json`` with SHA-256 checksums into
one directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .bn_analysis import (
    bn_curve,
    dyadic_n_grid,
    fit_weak_effective_dimension,
    limit_constant_estimate,
    norm_alpha,
    verify_bn_upper_bound,
)
from .errors import ConservativeRegimeError, NumericalError, ParameterError, StableFieldsError
from .extremes import (
    estimate_max_moment,
    fit_growth_rate,
    frechet_limit_test,
    growth_report,
    limit_constant,
    verify_moment_constant,
)
from .kernels import KernelSpec, ModelTag, load_kernel_table
from .regularity import (
    chaining_increment_bound,
    dyadic_h_grid,
    fit_holder_exponent,
    modulus_profile,
    modulus_ratio_series,
    simulate_chaining_fields,
)
from .simulate import (
    HfsmDiscretization,
    LfsmDiscretization,
    SamplePath,
    map_replicates,
    simulate_hfsm,
    simulate_lfsm,
)
from .stable_core import sample_sas
from .svgplot import loglog_svg, slope_line

ENV_OUTPUT_ROOT = "STABLE_FIELDS_OUTPUT"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


# configuration ---------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelBlock(_Strict):
    tag: Literal["iid", "lattice_ma", "geometric", "lfsm", "lfsm_increment", "hfsm",
                 "hfsm_increment", "embedded", "constant"]
    alpha: float = Field(gt=0, lt=2)
    H: Optional[float] = Field(default=None, gt=0, lt=1)
    d: int = Field(default=1, ge=1)
    p: Optional[int] = Field(default=None, ge=1)
    coefs: Optional[list] = None
    kernel_file: Optional[str] = None
    rho: Optional[float] = None
    scale: float = Field(default=1.0, gt=0)

    def build(self) -> KernelSpec:
        tag = self.tag
        if tag == "iid":
            return KernelSpec.iid(self.alpha, self.d)
        if tag == "lattice_ma":
            if (self.coefs is None) == (self.kernel_file is None):
                raise ParameterError("lattice_ma needs exactly one of coefs or kernel_file")
            if self.kernel_file is not None:
                return load_kernel_table(self.kernel_file, self.alpha)
            return KernelSpec.lattice(self.coefs, self.alpha)
        if tag == "geometric":
            if self.rho is None:
                raise ParameterError("geometric needs rho")
            return KernelSpec.geometric(self.rho, self.alpha)
        if tag in ("lfsm", "lfsm_increment", "hfsm", "hfsm_increment"):
            if self.H is None:
                raise ParameterError(f"{tag} needs H")
            inc = tag.endswith("increment")
            if tag.startswith("lfsm"):
                return KernelSpec.lfsm(self.H, self.alpha, increment=inc, kappa=self.scale)
            return KernelSpec.hfsm(self.H, self.alpha, increment=inc)
        if tag == "embedded":
            p = self.p or 1
            if self.coefs is not None:
                base = KernelSpec.lattice(self.coefs, self.alpha)
                if base.d != p:
                    raise ParameterError("coefs dimension must equal p")
            else:
                base = KernelSpec.iid(self.alpha, p)
            return KernelSpec.embedded(base, self.d)
        return KernelSpec.constant(self.alpha, self.scale, self.d)


class LfsmBlock(_Strict):
    substeps: int = Field(default=16, ge=1)
    near: int = Field(default=64, ge=1)
    far: Optional[int] = Field(default=None, ge=1)
    tol: float = Field(default=1e-3, gt=0, lt=1)

    def build(self) -> LfsmDiscretization:
        return LfsmDiscretization(self.substeps, self.near, self.far, self.tol)


class HfsmBlock(_Strict):
    oversample: int = Field(default=8, ge=2)

    def build(self) -> HfsmDiscretization:
        return HfsmDiscretization(self.oversample)


class NumericBlock(_Strict):
    n_grid: Optional[list[int]] = None
    beta: Optional[float] = Field(default=None, gt=0)
    gamma: Optional[float] = Field(default=None, gt=0)
    theta2: Optional[float] = Field(default=None, ge=0)
    replicates: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    tol: float = Field(default=1e-10, gt=0)
    exponent_tol: float = Field(default=0.05, gt=0)
    ks_threshold: float = Field(default=0.05, gt=0, lt=1)
    grid_points: int = Field(default=2 ** 14 + 1, ge=9)
    h_grid: Optional[list[float]] = None
    log_power: Optional[float] = Field(default=None, ge=0)
    level: int = Field(default=6, ge=1, le=20)
    lfsm: LfsmBlock = Field(default_factory=LfsmBlock)
    hfsm: HfsmBlock = Field(default_factory=HfsmBlock)


class OutputBlock(_Strict):
    directory: Optional[str] = None
    formats: list[Literal["csv", "json", "svg"]] = Field(default_factory=lambda: ["csv", "json", "svg"])


class ExperimentConfig(_Strict):
    model: ModelBlock
    experiment: Literal["bn", "moments", "frechet", "holder", "modulus", "chaining", "report"]
    numeric: NumericBlock = Field(default_factory=NumericBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _check(self):
        try:
            spec = self.model.build()
        except (StableFieldsError, OSError) as exc:
            raise ValueError(f"model: {exc}") from exc
        num = self.numeric
        if num.beta is not None and num.beta >= spec.alpha:
            raise ValueError("numeric.beta must be below model.alpha")
        if num.gamma is not None and num.gamma >= spec.alpha:
            raise ValueError("numeric.gamma must be below model.alpha")
        if num.n_grid is not None and any(n < 1 for n in num.n_grid):
            raise ValueError("numeric.n_grid entries must be positive")
        if self.experiment in ("holder", "modulus", "chaining") and spec.tag not in (
                ModelTag.LFSM, ModelTag.HFSM, ModelTag.LFSM_INCREMENT, ModelTag.HFSM_INCREMENT, ModelTag.CONSTANT):
            raise ValueError(f"experiment {self.experiment} needs a self-similar or constant model")
        if self.experiment == "modulus":
            if num.theta2 is None or num.gamma is None:
                raise ValueError("modulus needs numeric.theta2 and numeric.gamma")
            if spec.H is not None and num.theta2 >= spec.alpha * spec.H:
                raise ValueError("numeric.theta2 must be below alpha * H")
        if self.experiment == "frechet" and not spec.dissipative:
            raise ValueError("frechet needs a dissipative model")
        return self

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    return ExperimentConfig.model_validate_json(text)


# helpers ----------------------------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_to_builtin) + "\n"


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class _Outputs:
    """Collects output files so the manifest can checksum exactly what was written."""

    def __init__(self, root: Path, formats):
        self.root = root
        self.formats = set(formats)
        self.files: list[Path] = []

    def text(self, name: str, content: str, kind: str) -> None:
        if kind not in self.formats and name != "summary.json":
            return
        path = self.root / name
        path.write_text(content)
        self.files.append(path)

    def writer(self, name: str, kind: str, fn) -> None:
        if kind not in self.formats:
            return
        path = self.root / name
        fn(path)
        self.files.append(path)


def _theorem_label(spec: KernelSpec, experiment: str) -> str:
    if experiment == "bn":
        return "weak effective dimension of b_n"
    if experiment == "moments":
        if spec.tag is ModelTag.EMBEDDED:
            return "maxima moments, effective dimension p"
        return "maxima moments, dissipative" if spec.dissipative else "maxima moments, conservative"
    return {
        "frechet": "Frechet limit of maxima",
        "holder": "uniform modulus, Holder exponent",
        "modulus": "modulus ratio tends to 0",
        "chaining": "chaining increment bound",
    }[experiment]


# experiments --------------------------------------------------------------------------

def _exp_bn(cfg, spec, out: _Outputs, threads: int) -> dict:
    num = cfg.numeric
    grid = num.n_grid or dyadic_n_grid(2, 10)
    curve = bn_curve(spec, grid, num.tol)
    fit = fit_weak_effective_dimension(curve)
    bound = verify_bn_upper_bound(curve, norm_alpha(spec) ** (1.0 / spec.alpha))
    expected = float(spec.effective_dimension)

    def write_csv(path):
        with open(path, "w") as fh:
            fh.write("n,bn,err\n")
            for n, bn, err in curve.entries:
                fh.write(f"{n},{bn!r},{err!r}\n")

    out.writer("bn.csv", "csv", write_csv)
    n = curve.n
    y = curve.bn ** spec.alpha
    out.text("bn.svg", loglog_svg([
        {"x": n, "y": y, "label": "b_n^alpha"},
        {"x": n, "y": slope_line(n, n[0], y[0], expected), "label": f"slope {expected:g}", "dashed": True},
    ], title="b_n^alpha against n", xlabel="n", ylabel="b_n^alpha"), "svg")
    summary = growth_report(fit, expected, num.exponent_tol)
    summary.update(r2=fit.r2, bound_holds=bool(bound), monotone=curve.is_monotone())
    if not bound:
        summary["verdict"] = "fail"
    return summary


def _exp_moments(cfg, spec, out: _Outputs, threads: int) -> dict:
    num = cfg.numeric
    beta = num.beta if num.beta is not None else spec.alpha / 4.0
    grid = num.n_grid or [2 ** k for k in range(4, 13)]
    kwargs = {}
    if spec.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        kwargs["lfsm_disc"] = num.lfsm.build()
    if spec.tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT):
        kwargs["hfsm_disc"] = num.hfsm.build()
    table = estimate_max_moment(spec, grid, beta, num.replicates, num.seed, threads=threads, **kwargs)
    fit = fit_growth_rate(table)
    dim = spec.effective_dimension
    expected = dim * beta / spec.alpha
    mode = "within" if dim > 0 else "at_most"
    summary = growth_report(fit, expected, num.exponent_tol, mode=mode)
    summary.update(beta=beta, estimator=table.estimator, r2=fit.r2)
    c_tilde = limit_constant_estimate(spec) if dim > 0 else 0.0
    if spec.is_lattice or spec.tag is ModelTag.EMBEDDED or dim == 0:
        lc = limit_constant(spec.alpha, beta, c_tilde)
        rep = verify_moment_constant(table, lc, dim)
        summary["limit_constant"] = rep.as_dict()
    out.writer("moments.csv", "csv", table.to_csv)
    n, est = table.n, table.estimate
    out.text("moments.svg", loglog_svg([
        {"x": n, "y": est, "label": f"E[M_n^{beta:g}]"},
        {"x": n, "y": slope_line(n, n[0], est[0], expected), "label": f"slope {expected:.4g}", "dashed": True},
    ], title="maximal moments", xlabel="n", ylabel="E[M_n^beta]"), "svg")
    return summary


def _exp_frechet(cfg, spec, out, threads) -> dict:
    num = cfg.numeric
    n = (num.n_grid or [4096])[-1]
    res = frechet_limit_test(spec, n, num.replicates, num.seed, threshold=num.ks_threshold,
                             threads=threads)
    return {
        "exponent_expected": None,
        "exponent_fitted": None,
        "stderr": None,
        "ks_statistic": res.statistic,
        "ks_pvalue": res.pvalue,
        "frechet_scale": res.scale,
        "median_ratio": res.median_ratio,
        "n": n,
        "verdict": "pass" if res.passed else "fail",
    }


def _self_similar_paths(cfg, spec, threads):
    num = cfg.numeric
    lfsm_disc, hfsm_disc = num.lfsm.build(), num.hfsm.build()

    def one(stream):
        if spec.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
            return simulate_lfsm(1.0, num.grid_points, spec.H, spec.alpha, lfsm_disc, rng=stream, kappa=spec.scale)
        if spec.tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT):
            return simulate_hfsm(1.0, num.grid_points, spec.H, spec.alpha, hfsm_disc, rng=stream)
        v = spec.scale * sample_sas(spec.alpha, rng=stream)
        return SamplePath(spec, np.full(num.grid_points, v), 1.0 / (num.grid_points - 1),
                          {"seed": stream.seed, "stream_id": stream.stream_id})

    return map_replicates(one, num.seed, num.replicates, threads)


def _expected_holder(spec) -> float:
    if spec.tag in (ModelTag.LFSM, ModelTag.LFSM_INCREMENT):
        return spec.H - 1.0 / spec.alpha
    return spec.H if spec.H is not None else 0.0


def _exp_holder(cfg, spec, out, threads) -> dict:
    num = cfg.numeric
    paths = _self_similar_paths(cfg, spec, threads)
    spacing = paths[0].spacing
    h = np.asarray(num.h_grid) if num.h_grid else dyadic_h_grid(spacing, 8, 2.0 ** -7)
    log_power = num.log_power
    if log_power is None:
        log_power = 0.5 if spec.tag in (ModelTag.HFSM, ModelTag.HFSM_INCREMENT) else 0.0
    fit = fit_holder_exponent(paths, h, log_power=log_power)
    raw = fit_holder_exponent(paths, h) if log_power else fit
    prof = modulus_profile(paths, h)
    prof.normalizer = {"log_power": log_power}
    out.writer("modulus.csv", "csv", prof.to_csv)
    expected = _expected_holder(spec)
    med = prof.omega_median
    out.text("modulus.svg", loglog_svg([
        {"x": prof.h, "y": med, "label": "median omega(h)"},
        {"x": prof.h, "y": slope_line(prof.h, prof.h[-1], med[-1], expected),
         "label": f"slope {expected:.4g}", "dashed": True},
    ], title="modulus of continuity", xlabel="h", ylabel="omega(h)"), "svg")
    summary = growth_report(fit, expected, num.exponent_tol)
    summary.update(log_power=log_power, raw_exponent=raw.exponent, raw_stderr=raw.stderr)
    return summary


def _exp_modulus(cfg, spec, out, threads) -> dict:
    num = cfg.numeric
    paths = _self_similar_paths(cfg, spec, threads)
    h = np.asarray(num.h_grid) if num.h_grid else dyadic_h_grid(paths[0].spacing, 8, 2.0 ** -6)
    H = spec.H if spec.H is not None else 1.0
    rs = modulus_ratio_series(paths, H, num.theta2, spec.alpha, num.gamma, h)

    def write_csv(path):
        with open(path, "w") as fh:
            fh.write("h,ratio_median\n")
            for hv, r in zip(rs.h, rs.median):
                fh.write(f"{hv!r},{float(r)!r}\n")

    out.writer("ratios.csv", "csv", write_csv)
    frac = rs.fraction_decreasing
    return {
        "exponent_expected": None,
        "exponent_fitted": None,
        "stderr": None,
        "fraction_decreasing": frac,
        "median_trend_decreasing": rs.verdict,
        "verdict": "pass" if (rs.verdict and frac >= 0.9) else "fail",
    }


def _exp_chaining(cfg, spec, out, threads) -> dict:
    num = cfg.numeric
    gamma = num.gamma if num.gamma is not None else 0.5
    n = num.level
    disc = {"lfsm_disc": num.lfsm.build(), "hfsm_disc": num.hfsm.build()}
    reps = map_replicates(lambda s: simulate_chaining_fields(spec, n, s, **disc), num.seed, num.replicates, threads)
    xs = [r[0] for r in reps]
    ys = {v: [r[1][v] for r in reps] for v in (1, -1)}
    H = spec.H if spec.H is not None else 1.0
    rep = chaining_increment_bound(xs, ys, n, gamma, H)
    return {
        "exponent_expected": None,
        "exponent_fitted": None,
        "stderr": None,
        "lhs": rep.lhs, "lhs_stderr": rep.lhs_stderr,
        "rhs": rep.rhs, "rhs_stderr": rep.rhs_stderr,
        "verdict": "pass" if rep.holds else "fail",
    }


EXPERIMENTS = {
    "bn": _exp_bn,
    "moments": _exp_moments,
    "frechet": _exp_frechet,
    "holder": _exp_holder,
    "modulus": _exp_modulus,
    "chaining": _exp_chaining,
}


# commands -------------------------------------------------------------------------------

def _output_root(cfg: ExperimentConfig, override: str | None) -> Path:
    if override:
        return Path(override)
    if cfg.output.directory:
        return Path(cfg.output.directory)
    return Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))


def run(config_path: str | Path, out: str | None = None, threads: int = 1, seed: int | None = None) -> int:
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(), "numeric": {
                **cfg.model_dump()["numeric"], "seed": seed}})
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            print(f"config error at {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    if cfg.experiment == "report":
        return report(_output_root(cfg, out))

    canonical = cfg.canonical()
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    root = _output_root(cfg, out) / f"{cfg.experiment}-{digest[:12]}"
    started = time.perf_counter()
    try:
        root.mkdir(parents=True, exist_ok=True)
        spec = cfg.model.build()
        outputs = _Outputs(root, cfg.output.formats)
        summary = EXPERIMENTS[cfg.experiment](cfg, spec, outputs, threads)
        summary.update(experiment=cfg.experiment, model=spec.tag.value,
                       theorem=_theorem_label(spec, cfg.experiment))
        outputs.text("config.json", canonical + "\n", "json")
        outputs.text("summary.json", _dump_json(summary), "json")
        manifest = {
            "config_sha256": digest,
            "tool_version": __version__,
            "seed": cfg.numeric.seed,
            "wall_clock_seconds": round(time.perf_counter() - started, 3),
            "outputs": {p.name: sha256_file(p) for p in outputs.files},
        }
        (root / "manifest.json").write_text(_dump_json(manifest))
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParameterError, ConservativeRegimeError, StableFieldsError) as exc:
        print(f"invalid experiment: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(root)
    return EXIT_OK


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def report(directory: str | Path) -> int:
    """Tabulate every run below ``directory`` into ``report.md`` and ``report.svg``."""
    directory = Path(directory)
    if not directory.is_dir():
        print(f"no such directory: {directory}", file=sys.stderr)
        return EXIT_IO
    rows = []
    for summary_path in sorted(directory.rglob("summary.json")):
        manifest = summary_path.parent / "manifest.json"
        if not manifest.exists():
            print(f"warning: skipping {summary_path.parent} (no manifest)", file=sys.stderr)
            continue
        try:
            s = json.loads(summary_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"warning: skipping {summary_path}: {exc}", file=sys.stderr)
            continue
        rows.append((summary_path.parent.name, s))
    if not rows:
        print(f"no runs with a manifest under {directory}", file=sys.stderr)
        return EXIT_IO
    lines = ["# Experiment report", "",
             "| run | model | theorem | predicted | fitted | stderr | verdict |",
             "|---|---|---|---|---|---|---|"]
    pts_x, pts_y = [], []
    for name, s in rows:
        lines.append(f"| {name} | {s.get('model', '-')} | {s.get('theorem', '-')} | "
                     f"{_fmt(s.get('exponent_expected'))} | {_fmt(s.get('exponent_fitted'))} | "
                     f"{_fmt(s.get('stderr'))} | {s.get('verdict', '-')} |")
        e, f = s.get("exponent_expected"), s.get("exponent_fitted")
        if isinstance(e, (int, float)) and isinstance(f, (int, float)) and e > 0 and f > 0:
            pts_x.append(e)
            pts_y.append(f)
    lines += ["", "Tolerances are desk-scale calibrations; see each run's summary.json.", ""]
    try:
        (directory / "report.md").write_text("\n".join(lines))
        if pts_x:
            order = np.argsort(pts_x)
            xs = np.array(pts_x)[order]
            (directory / "report.svg").write_text(loglog_svg([
                {"x": xs, "y": np.array(pts_y)[order], "label": "fitted"},
                {"x": xs, "y": xs, "label": "predicted", "dashed": True},
            ], title="fitted against predicted exponents", xlabel="predicted", ylabel="fitted"))
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(directory / "report.md")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stable-fields", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help=f"output root (default: config, then ${ENV_OUTPUT_ROOT}, then ./runs)")
    p_run.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    p_run.add_argument("--seed", type=int, default=None, help="override numeric.seed")
    p_rep = sub.add_parser("report", help="summarize runs below a directory")
    p_rep.add_argument("directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        if args.threads < 0:
            print("--threads must be >= 0", file=sys.stderr)
            return EXIT_VALIDATION
        return run(args.config, args.out, args.threads, args.seed)
    return report(args.directory)


if __name__ == "__main__":
    sys.exit(main())

"""Batch experiments: configuration, drivers and reports.

A run is described by one JSON document::

    {
      "generator": {"preset": "random_sectorial", "params": {"n": 4, "seed": 3}},
      "signal": {"preset": "gauss_bump", "params": {"t0": 5.0, "w": 0.5}, "seed": 0},
      "grid": {"T": 20.0, "N": 2048},
      "experiments": ["commutator", "norm_equality"],
      "paths": "direct",
      "tolerances": {"commutator": 5e-3},
      "output": {"path": "report.json", "format": "json"}
    }

``generator`` and ``signal`` may instead name a ``file``.  ``grid.T`` defaults
to ``max(20/alpha, 10 * signal support)``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import __version__
from . import funcalc as fc
from . import maxreg as mr
from . import numlin as nl
from .errors import GeneratorError
from .presets import GENERATOR_PRESETS, preset_generator
from .semigroup import Generator, make_generator
from .signal import PRESETS, Grid, Signal, is_pow2, l2_norm, load_signal, nominal_support, preset_signal

EXPERIMENTS = (
    "commutator", "norm_equality", "desimon", "adjoint", "residuals",
    "funcalc", "extended_commutator", "l2_norm",
)
PATH_SENSITIVE = ("commutator", "extended_commutator")
DEFAULT_TOLERANCES = {
    "commutator": 5e-3,
    "norm_equality": 5e-3,
    "desimon": 5e-3,
    "adjoint": 5e-3,
    "residuals": 1e-9,
    "funcalc": 1e-9,
    "extended_commutator": 5e-3,
    "l2_norm": 1e-4,
    "order": 1.5,
}
CSV_COLUMNS = ("experiment", "operator", "path", "N", "T", "n", "alpha", "value",
               "tail_bound", "wall_time_s", "pass")
VOLATILE = ("timestamp", "wall_time_s")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (exit status 2)."""


@dataclass
class RunConfig:
    generator: dict
    signal: dict
    grid: dict = field(default_factory=dict)
    experiments: list = field(default_factory=list)
    paths: str = "direct"
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0
    funcalc: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)

    @property
    def effective_tolerances(self) -> dict:
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances)
        return tol

    def echo(self) -> dict:
        return {
            "generator": self.generator,
            "signal": self.signal,
            "grid": self.grid,
            "experiments": list(self.experiments),
            "paths": self.paths,
            "tolerances": self.effective_tolerances,
            "seed": self.seed,
            "funcalc": self.funcalc,
        }


def _require(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def parse_config(doc: dict) -> RunConfig:
    _require(isinstance(doc, dict), "config", "top level must be a JSON object")
    known = {"generator", "signal", "grid", "experiments", "paths", "tolerances", "output",
             "seed", "funcalc", "sweep", "bench"}
    for key in doc:
        _require(key in known, f"config.{key}", "unknown field")
    gen = doc.get("generator")
    _require(isinstance(gen, dict), "config.generator", "required object")
    _require(("preset" in gen) != ("file" in gen), "config.generator", "give exactly one of 'preset' or 'file'")
    if "preset" in gen:
        _require(gen["preset"] in GENERATOR_PRESETS, "config.generator.preset",
                 f"unknown preset {gen['preset']!r}; expected one of {GENERATOR_PRESETS}")
        angle = (gen.get("params") or {}).get("angle")
        _require(angle is None or 0 <= float(angle) < math.pi / 2, "config.generator.params.angle",
                 "must lie in [0, pi/2)")
    sig = doc.get("signal", {"preset": "gauss_bump"})
    _require(isinstance(sig, dict), "config.signal", "must be an object")
    _require(("preset" in sig) != ("file" in sig), "config.signal", "give exactly one of 'preset' or 'file'")
    if "preset" in sig:
        _require(sig["preset"] in PRESETS, "config.signal.preset",
                 f"unknown preset {sig['preset']!r}; expected one of {PRESETS}")
    grid = doc.get("grid", {})
    _require(isinstance(grid, dict), "config.grid", "must be an object")
    if "N" in grid:
        _require(isinstance(grid["N"], int) and is_pow2(grid["N"]), "config.grid.N", "must be a power of two")
    if "T" in grid:
        _require(isinstance(grid["T"], (int, float)) and grid["T"] > 0, "config.grid.T", "must be positive")
    exps = doc.get("experiments", [])
    _require(isinstance(exps, list), "config.experiments", "must be a list")
    for i, e in enumerate(exps):
        _require(e in EXPERIMENTS, f"config.experiments[{i}]", f"unknown experiment {e!r}")
    paths = doc.get("paths", "direct")
    _require(paths in ("direct", "fourier", "both"), "config.paths", "must be direct, fourier or both")
    tol = doc.get("tolerances", {})
    _require(isinstance(tol, dict), "config.tolerances", "must be an object")
    for k, v in tol.items():
        _require(k in DEFAULT_TOLERANCES, f"config.tolerances.{k}", "unknown tolerance")
        _require(isinstance(v, (int, float)) and v >= 0, f"config.tolerances.{k}", "must be a non-negative number")
    out = doc.get("output", {})
    _require(isinstance(out, dict), "config.output", "must be an object")
    if "format" in out:
        _require(out["format"] in ("csv", "json"), "config.output.format", "must be csv or json")
    seed = doc.get("seed", 0)
    _require(isinstance(seed, int), "config.seed", "must be an integer")
    return RunConfig(
        generator=gen, signal=sig, grid=grid, experiments=list(exps), paths=paths,
        tolerances=tol, output=out, seed=seed, funcalc=doc.get("funcalc", {}),
        sweep=doc.get("sweep", {}), bench=doc.get("bench", {}),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


# ---------------------------------------------------------------------------
# inputs


def build_generator(cfg: RunConfig, n: Optional[int] = None) -> Generator:
    spec = cfg.generator
    if "file" in spec:
        return make_generator(nl.load_matrix(spec["file"]))
    params = dict(spec.get("params") or {})
    if n is not None:
        params["n"] = n
    return preset_generator(spec["preset"], params, seed=spec.get("seed", cfg.seed))


def build_grid(cfg: RunConfig, g: Generator, N: Optional[int] = None) -> Grid:
    if "file" in cfg.signal:
        return load_signal(cfg.signal["file"]).grid
    T = cfg.grid.get("T")
    if T is None:
        support = nominal_support(cfg.signal["preset"], cfg.signal.get("params"))
        T = max(20.0 / g.alpha, 10.0 * support)
    return Grid(float(T), int(N or cfg.grid.get("N", 2048)))


def build_signal(cfg: RunConfig, grid: Grid, dim: int, seed_offset: int = 0) -> Signal:
    spec = cfg.signal
    if "file" in spec:
        f = load_signal(spec["file"])
        if f.grid != grid:
            f = _resample(f, grid)
        return f
    seed = int(spec.get("seed", cfg.seed)) + seed_offset
    return preset_signal(spec["preset"], grid, dim, spec.get("params"), seed)


def _resample(f: Signal, grid: Grid) -> Signal:
    if f.grid.T != grid.T or grid.N % f.grid.N and f.grid.N % grid.N:
        raise ConfigError("signal file grid is incompatible with the requested grid")
    if grid.N < f.grid.N:
        return Signal(grid, f.samples[:: f.grid.N // grid.N])
    raise ConfigError("signal files cannot be refined; sweep them at or below their own N")


def holo_from_config(doc) -> fc.HoloFunction:
    if "num" in doc:
        return fc.rational_from_config(doc)
    kind = doc.get("builtin")
    if kind == "const_one":
        return fc.const_one()
    if kind == "resolvent_frac":
        return fc.resolvent_frac(float(doc.get("sigma", 1.0)), doc.get("sign", "+"))
    if kind == "exp_scale":
        return fc.exp_scale(float(doc.get("t", 1.0)))
    if kind == "halfplane_indicator":
        return fc.halfplane_indicator(doc.get("side", "re_positive"), float(doc.get("shift", 0.0)))
    raise ConfigError(f"funcalc: unknown function spec {doc!r}")


# ---------------------------------------------------------------------------
# experiments; each returns (operator, value, passed, tail_bound, details)


def _exp_commutator(g, f, path, tol, cfg):
    rep = mr.commutator_residual(g, f, path=path)
    details = {
        "abs_residual": rep.abs_residual,
        "boundary_norm_rel": rep.boundary_norm / max(l2_norm(f), mr.REL_EPS),
        "rel_boundary_defect": rep.rel_boundary_defect,
        "tail_energy_flag": mr.tail_flag(f),
    }
    tail = mr._tail_bound(g, f, False)
    return "[M+,M-]", rep.rel_residual, rep.rel_residual <= tol["commutator"], tail, details


def _exp_norm_equality(g, f, path, tol, cfg):
    rep = mr.norm_equality_report(g, f)
    details = {"norm_plus": rep.norm_plus, "norm_minus": rep.norm_minus,
               "is_selfadjoint": rep.is_selfadjoint, "boundary_gap": rep.boundary_gap}
    return "|M+f|-|M-f|", rep.rel_gap, rep.rel_gap <= tol["norm_equality"], mr._tail_bound(g, f, False), details


def _exp_desimon(g, f, path, tol, cfg):
    C = mr.desimon_constant(g)
    nf = l2_norm(f)
    rp = l2_norm(mr.apply_plus(g, f, path)) / nf
    rm = l2_norm(mr.apply_minus(g, f, path)) / nf
    ok = rp <= C + tol["desimon"] and rm <= C + tol["desimon"]
    return "C", C, ok, mr._tail_bound(g, f, False), {"ratio_plus": rp, "ratio_minus": rm}


def _exp_adjoint(g, f, path, tol, cfg):
    phi = build_signal(cfg, f.grid, g.n, seed_offset=1)
    d = mr.adjoint_defect(g, f, phi)
    return "(M+)*-M-^{A*}", d, d <= tol["adjoint"], mr._tail_bound(g, f, False), {}


def _exp_residuals(g, f, path, tol, cfg):
    nf = max(l2_norm(f), mr.REL_EPS)
    u = mr.solve_forward(g, f)
    v = mr.solve_backward(g, f)
    du = l2_norm(u.apply(g.a) - mr.apply_plus(g, f)) / nf
    dv = l2_norm(v.apply(g.a) + mr.apply_minus(g, f)) / nf
    ru, rv = mr.ode_residuals(g, f)
    value = max(du, dv)
    ok = value <= tol["residuals"] and bool(np.all(u.samples[0] == 0))
    details = {"ode_residual_forward": ru / nf, "ode_residual_backward": rv / nf}
    return "Au-M+f,Av+M-f", value, ok, mr._tail_bound(g, f, False), details


def _funcalc_pair(cfg):
    sigma = float(cfg.funcalc.get("sigma", 1.0))
    b1 = holo_from_config(cfg.funcalc["b1"]) if "b1" in cfg.funcalc else fc.resolvent_frac(sigma, "+")
    b2 = holo_from_config(cfg.funcalc["b2"]) if "b2" in cfg.funcalc else fc.resolvent_frac(sigma, "-")
    return b1, b2


def _exp_funcalc(g, f, path, tol, cfg):
    b1, b2 = _funcalc_pair(cfg)
    d = fc.homomorphism_defect(g, b1, b2)
    return f"{b1.name}*{b2.name}", d, d <= tol["funcalc"], 0.0, {}


def _exp_extended(g, f, path, tol, cfg):
    ext = cfg.funcalc.get("extended", {})
    b1 = holo_from_config(ext["b1"]) if "b1" in ext else fc.const_one()
    b2 = holo_from_config(ext["b2"]) if "b2" in ext else fc.const_one()
    r = fc.extended_commutator_residual(g, b1, b2, f, path)
    bd = fc.extended_boundary_defect(g, b1, b2, f, path)
    return (f"[M+ {b1.name}, M- {b2.name}]", r, r <= tol["extended_commutator"],
            mr._tail_bound(g, f, False), {"rel_boundary_defect": bd})


def _exp_l2_norm(g, f, path, tol, cfg):
    spec = cfg.signal
    exact = closed_form_sq_norm(spec.get("preset"), spec.get("params") or {}, f)
    if exact is None:
        raise ConfigError("l2_norm needs an exp_decay or gauss_bump signal with explicit direction")
    err = abs(l2_norm(f) ** 2 - exact) / exact
    return "||f||^2", err, err <= tol["l2_norm"], 0.0, {"exact": exact}


def closed_form_sq_norm(name, params, f: Signal):
    """``∫_0^∞ |f|^2`` for presets that have one (uses the sampled direction)."""
    if name == "exp_decay":
        beta = float(params.get("beta", 1.0))
        return float(np.sum(np.abs(f.samples[0]) ** 2)) / (2 * beta)
    if name == "gauss_bump":
        t0 = float(params.get("t0", f.grid.T / 4))
        w = float(params.get("w", f.grid.T / 40))
        idx = int(np.argmax(np.linalg.norm(f.samples, axis=1)))
        t = f.grid.nodes[idx]
        d2 = float(np.sum(np.abs(f.samples[idx]) ** 2)) / math.exp(-((t - t0) ** 2) / (w * w))
        return d2 * w * math.sqrt(math.pi) / 2 * (1 + math.erf(t0 / w))
    return None


_DISPATCH = {
    "commutator": _exp_commutator,
    "norm_equality": _exp_norm_equality,
    "desimon": _exp_desimon,
    "adjoint": _exp_adjoint,
    "residuals": _exp_residuals,
    "funcalc": _exp_funcalc,
    "extended_commutator": _exp_extended,
    "l2_norm": _exp_l2_norm,
}


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    config: dict
    rows: list = field(default_factory=list)
    kind: str = "run"
    numerical_error: bool = False

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    @property
    def exit_code(self) -> int:
        if self.numerical_error:
            return 3
        return 0 if self.passed else 1

    def to_dict(self, timestamp: Optional[str] = None) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "environment": {
                "version": __version__,
                "timestamp": timestamp or datetime.now(timezone.utc).isoformat(),
            },
            "rows": self.rows,
            "passed": self.passed,
        }

    def to_json(self, timestamp: Optional[str] = None) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2, sort_keys=True, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _csv_cell(r.get(k)) for k in CSV_COLUMNS})
        return buf.getvalue()

    def write(self, path, fmt: str = "json") -> None:
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w") as fh:
            fh.write(text)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serializable: {type(x)}")


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _row(exp, operator, path, grid, g, value, passed, tail, wall, details=None, error=None):
    row = {
        "experiment": exp,
        "operator": operator,
        "path": path,
        "N": grid.N if grid else None,
        "T": grid.T if grid else None,
        "n": g.n if g else None,
        "alpha": g.alpha if g else None,
        "value": None if value is None else float(value),
        "tail_bound": None if tail is None else float(tail),
        "wall_time_s": float(wall),
        "pass": bool(passed),
    }
    if details:
        row["details"] = details
    if error:
        row["error"] = error
    return row


def _paths_for(cfg, exp):
    if exp in PATH_SENSITIVE and cfg.paths == "both":
        return ["direct", "fourier"]
    return ["fourier" if cfg.paths == "fourier" and exp in PATH_SENSITIVE + ("desimon",) else "direct"]


def _run_experiments(cfg: RunConfig, g: Generator, f: Signal, report: Report) -> None:
    tol = cfg.effective_tolerances
    for exp in cfg.experiments:
        for path in _paths_for(cfg, exp):
            t0 = time.perf_counter()
            try:
                op, value, ok, tail, details = _DISPATCH[exp](g, f, path, tol, cfg)
            except (ArithmeticError, GeneratorError, ValueError) as exc:
                if isinstance(exc, (ArithmeticError, GeneratorError)):
                    report.numerical_error = True
                report.rows.append(_row(exp, None, path, f.grid, g, None, False, None,
                                        time.perf_counter() - t0,
                                        error={"type": type(exc).__name__, "message": str(exc)}))
                continue
            report.rows.append(_row(exp, op, path, f.grid, g, value, ok, tail,
                                    time.perf_counter() - t0, details))


def run(cfg: RunConfig) -> Report:
    """Execute the configured experiments on one grid."""
    report = Report(cfg.echo(), kind="run")
    if not cfg.experiments:
        return report
    g = build_generator(cfg)
    grid = build_grid(cfg, g)
    f = build_signal(cfg, grid, g.n)
    _run_experiments(cfg, g, f, report)
    return report


def fit_order(Ns, values) -> float:
    """Least-squares slope of ``-log2(value)`` against ``log2(N)``."""
    x = np.log2(np.asarray(Ns, dtype=float))
    y = np.asarray(values, dtype=float)
    if len(x) < 2 or np.any(y <= 0):
        return float("nan")
    slope = np.polyfit(x, -np.log2(y), 1)[0]
    return float(slope)


CONVERGENT = ("commutator", "norm_equality", "adjoint", "extended_commutator", "l2_norm")


def sweep(cfg: RunConfig, N_list) -> Report:
    """Run on every ``N`` in ``N_list`` and fit convergence orders."""
    N_list = [int(n) for n in N_list]
    if not N_list or any(not is_pow2(n) for n in N_list) or N_list != sorted(set(N_list)):
        raise ConfigError("sweep: N list must be ascending distinct powers of two")
    if len(N_list) == 1:
        sub = RunConfig(**{**cfg.__dict__, "grid": {**cfg.grid, "N": N_list[0]}})
        rep = run(sub)
        rep.kind = "sweep"
        return rep
    report = Report({**cfg.echo(), "N_list": N_list}, kind="sweep")
    if not cfg.experiments:
        return report
    g = build_generator(cfg)
    series = {}
    for N in N_list:
        grid = build_grid(cfg, g, N)
        f = build_signal(cfg, grid, g.n)
        start = len(report.rows)
        _run_experiments(cfg, g, f, report)
        for r in report.rows[start:]:
            series.setdefault((r["experiment"], r["path"]), []).append((N, r["value"]))
    tol = cfg.effective_tolerances
    for (exp, path), pts in series.items():
        if exp not in CONVERGENT or any(v is None for _, v in pts):
            continue
        order = fit_order([p[0] for p in pts], [p[1] for p in pts])
        report.rows.append({
            "experiment": f"{exp}:order", "operator": "log2 fit", "path": path,
            "N": N_list[-1], "T": None, "n": g.n, "alpha": g.alpha, "value": order,
            "tail_bound": None, "wall_time_s": 0.0,
            "pass": bool(order >= tol["order"]),
        })
    return report


def bench(cfg: RunConfig, N_list, n_list, repeats: int = 1) -> Report:
    """Wall time of the O(N^2) direct loop against the fourier path for M+.

    One row per ``(N, n)`` cell; ``value`` is the relative difference of the
    two outputs and the per-path times sit in ``details``.  Each measurement
    uses a fresh generator so both paths pay their own setup (kernel chain
    or symbol solves).  With two or more sizes a trend row per ``n``
    records whether the direct/fourier time ratio strictly increases.
    """
    N_list = [int(n) for n in N_list]
    if not N_list or any(not is_pow2(n) for n in N_list) or N_list != sorted(set(N_list)):
        raise ConfigError("bench: N list must be ascending distinct powers of two")
    agree_tol = float(cfg.bench.get("agreement", 1e-2))
    report = Report({**cfg.echo(), "N_list": N_list, "n_list": list(n_list)}, kind="bench")
    for n in n_list:
        ratios = []
        for N in N_list:
            g0 = build_generator(cfg, n)
            grid = build_grid(cfg, g0, N)
            f = build_signal(cfg, grid, g0.n)
            td, tf = [], []
            for _ in range(repeats):
                g = make_generator(g0.a)
                t0 = time.perf_counter()
                d = mr.mreg_forward_direct(g, f, "trapezoid", "loop").output
                td.append(time.perf_counter() - t0)
                g = make_generator(g0.a)
                t0 = time.perf_counter()
                q = mr.mreg_fourier(g, f, "+").output
                tf.append(time.perf_counter() - t0)
            diff = l2_norm(d - q) / max(l2_norm(d), mr.REL_EPS)
            ratio = min(td) / min(tf)
            ratios.append(ratio)
            report.rows.append(_row("bench", "M+", "both", grid, g0, diff, diff <= agree_tol, None,
                                    min(td) + min(tf),
                                    {"direct_s": min(td), "fourier_s": min(tf), "ratio": ratio}))
        if len(N_list) > 1:
            increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
            report.rows.append({
                "experiment": "bench:ratio_trend", "operator": "direct/fourier", "path": "both",
                "N": N_list[-1], "T": None, "n": n, "alpha": None, "value": ratios[-1],
                "tail_bound": None, "wall_time_s": 0.0, "pass": bool(increasing),
                "details": {"ratios": dict(zip(map(str, N_list), ratios))},
            })
    return report


def strip_volatile(doc: dict) -> dict:
    """Copy of a report dict without timestamp and wall-time fields."""
    doc = json.loads(json.dumps(doc, default=_jsonable))
    doc.get("environment", {}).pop("timestamp", None)
    for r in doc.get("rows", []):
        r.pop("wall_time_s", None)
        if str(r.get("experiment", "")).startswith("bench"):
            r.pop("details", None)
            if r["experiment"] == "bench:ratio_trend":
                r.pop("value", None)
                r.pop("pass", None)
    return doc

"""Experiment runner.

Configuration files are flat ``key = value`` text; ``#`` starts a comment.
Measures are given by repeated ``atom = lambda, weight`` lines; lists are
comma separated, and frequency vectors are separated by ``;`` (in one
dimension a plain comma list is a list of frequencies)::

    experiment = fk-vs-pde
    dim = 1
    atom = 1.0, 1.0
    eps = 0.25
    t = 0.25
    xi = 0, 1, 2
    n_paths = 2000
    n_fields = 500
    L = 40
    N = 2048

Each run writes ``<experiment>.csv`` and ``<experiment>.json`` into the
output directory.  Exit status: 0 all verdicts pass, 1 a verdict failed,
2 invalid configuration, 3 flagged variance blow-up under ``strict = true``,
4 input/output failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .covariance import SchoenbergMeasure, mean_x_tau, mean_x_tau_quad
from .ensemble import EnsembleEstimate, VarianceWarning, deterministic_map, substream_seed
from .pde import RESOLUTION_FACTOR, SnapWarning, TorusGrid, ensemble_average_fourier, homogenization_error, \
    sample_potential
from .profiles import InitialProfile
from .representation import Budgets, EstimateRow, FKEnsemble, compare_routes, write_rows_csv

EXPERIMENTS = ("field-stats", "intersection", "mean-xtau", "fk-vs-pde", "theorem11", "homogenize",
               "duhamel-check")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

SMALL_TIME_ADVISORY = 0.5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "mean-xtau"
    dim: int = 1
    atoms: list = field(default_factory=list)
    eps: list = field(default_factory=lambda: [0.25])
    t: float = 0.25
    xi: list = field(default_factory=lambda: [[0.0]])
    tau: list = field(default_factory=lambda: [0.01])
    coupling: list = field(default_factory=lambda: [1.0, 0.5])
    lags: list = field(default_factory=lambda: [0, 1, 2, 4, 8])
    profile_width: float = 1.0
    profile_center: list | None = None
    profile_wavevector: list | None = None
    n_paths: int = 2000
    n_fields: int = 200
    n_steps: int = 1024
    limit_paths: int | None = None
    limit_steps: int | None = None
    L: float = 40.0
    N: int | None = 2048
    dt: float | None = None
    moll_eps: float | None = None
    bin_width: float | None = None
    estimator: str = "mollified"
    box_doubling_eps: float | None = None
    strict: bool = False
    seed: int = 0
    out: str = "results"

    @property
    def measure(self) -> SchoenbergMeasure:
        return SchoenbergMeasure.from_atoms(self.atoms) if self.atoms else SchoenbergMeasure.zero()

    def profile(self) -> InitialProfile:
        return InitialProfile.gaussian(self.dim, self.profile_width, self.profile_center, self.profile_wavevector)


_INT_KEYS = {"dim", "n_paths", "n_fields", "n_steps", "limit_paths", "limit_steps", "N", "seed"}
_FLOAT_KEYS = {"t", "profile_width", "L", "dt", "moll_eps", "bin_width", "box_doubling_eps"}
_LIST_KEYS = {"eps", "tau", "coupling", "profile_center", "profile_wavevector"}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v != ""]


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen_xi = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key == "atom":
                pair = _floats(value)
                if len(pair) != 2:
                    raise ConfigError(f"line {lineno}: atom needs lambda, weight")
                cfg.atoms.append((pair[0], pair[1]))
            elif key == "experiment":
                cfg.experiment = value
            elif key == "estimator":
                cfg.estimator = value
            elif key == "out":
                cfg.out = value
            elif key == "strict":
                cfg.strict = value.lower() in ("1", "true", "yes", "on")
            elif key == "xi":
                seen_xi = value
            elif key == "lags":
                cfg.lags = [int(v) for v in _floats(value)]
            elif key in _INT_KEYS:
                setattr(cfg, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, key, float(value))
            elif key in _LIST_KEYS:
                setattr(cfg, key, _floats(value))
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: cannot parse {key!r}: {exc}") from None
    if seen_xi is not None:
        cfg.xi = _parse_xi(seen_xi, cfg.dim)
    else:
        cfg.xi = [[0.0] * cfg.dim]
    return cfg


def _parse_xi(text: str, dim: int) -> list[list[float]]:
    if ";" in text:
        return [_floats(v) for v in text.split(";") if v.strip()]
    vals = _floats(text)
    return [[v] for v in vals] if dim == 1 else [vals]


def validate(cfg: RunConfig) -> list[str]:
    """Precondition violations; an empty list means the run can start."""
    bad = []
    if cfg.experiment not in EXPERIMENTS:
        bad.append(f"cli.run: unknown experiment {cfg.experiment!r} (choose from {', '.join(EXPERIMENTS)})")
    if cfg.dim not in (1, 2):
        bad.append("covariance: dim must be 1 or 2")
    for lam, w in cfg.atoms:
        if not (lam > 0 and math.isfinite(lam)):
            bad.append(f"covariance.SchoenbergMeasure: lambda must be positive and finite, got {lam}")
        if not (w > 0 and math.isfinite(w)):
            bad.append(f"covariance.SchoenbergMeasure: weight must be positive and finite, got {w}")
    if not cfg.t > 0:
        bad.append("t must be positive")
    if not cfg.eps or any(not e > 0 for e in cfg.eps):
        bad.append("eps values must be positive")
    if cfg.n_steps < 1:
        bad.append("paths.sample_path: n_steps must be at least 1")
    if cfg.n_paths < 2:
        bad.append("representation.fk_average: n_paths must be at least 2")
    if cfg.n_fields < 2:
        bad.append("pde.ensemble_average_fourier: n_fields must be at least 2")
    if not cfg.profile_width > 0:
        bad.append("representation.InitialProfile: width must be positive")
    for name in ("profile_center", "profile_wavevector"):
        v = getattr(cfg, name)
        if v is not None and len(v) != cfg.dim:
            bad.append(f"representation.InitialProfile: {name} needs {cfg.dim} components")
    for x in cfg.xi:
        if len(x) != cfg.dim:
            bad.append(f"xi vector {x} does not have {cfg.dim} components")
    for name in ("dt", "moll_eps", "bin_width"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            bad.append(f"{name} must be positive")
    if cfg.experiment == "mean-xtau" and (not cfg.tau or any(not v > 0 for v in cfg.tau)):
        bad.append("covariance.mean_x_tau: tau must be positive")
    if cfg.experiment == "duhamel-check":
        if any(not c > 0 for c in cfg.coupling) or any(b >= a for a, b in zip(cfg.coupling, cfg.coupling[1:])):
            bad.append("duhamel.weak_coupling_check: couplings must be positive and decreasing")
    if cfg.experiment == "homogenize":
        if cfg.dim != 2:
            bad.append("pde.homogenization_error: dim must be 2")
        if any(not 0 < e < 1 for e in cfg.eps):
            bad.append("pde.homogenization_error: eps must lie in (0, 1)")
    if cfg.experiment == "theorem11" and cfg.estimator not in ("mollified", "clark-ocone"):
        bad.append("representation.limit_average: estimator must be mollified or clark-ocone")
    atoms_ok = all(lam > 0 and w > 0 and math.isfinite(lam) and math.isfinite(w) for lam, w in cfg.atoms)
    if cfg.experiment in ("field-stats", "fk-vs-pde", "theorem11", "homogenize") and cfg.dim in (1, 2) and atoms_ok:
        bad += _grid_violations(cfg)
    return bad


def _grid_for(cfg: RunConfig, eps: float, length: float | None = None) -> TorusGrid:
    length = length or cfg.L
    if cfg.N is not None and length == cfg.L:
        return TorusGrid(cfg.dim, length, cfg.N)
    lam = cfg.measure.max_lambda or 1.0
    need = length * RESOLUTION_FACTOR * lam / eps
    return TorusGrid(cfg.dim, length, max(16, 1 << math.ceil(math.log2(need - 1e-9))))


def _grid_violations(cfg: RunConfig) -> list[str]:
    bad = []
    if not cfg.L > 0:
        return ["pde.TorusGrid: L must be positive"]
    if cfg.N is not None and (cfg.N < 2 or cfg.N & (cfg.N - 1)):
        return ["pde.TorusGrid: N must be a power of two"]
    if cfg.N is None:
        return bad
    h = cfg.L / cfg.N
    m = cfg.measure
    for e in cfg.eps:
        if not m.is_zero and h > e / (RESOLUTION_FACTOR * m.max_lambda) * (1 + 1e-12):
            bad.append(f"pde.sample_potential: grid spacing h={h:.4g} exceeds eps/(4 max lambda)="
                       f"{e / (RESOLUTION_FACTOR * m.max_lambda):.4g} at eps={e}")
    if cfg.experiment != "field-stats":
        try:
            prof = cfg.profile()
        except ValueError:
            return bad
        lost = prof.mass_outside_box(0.5 * cfg.L, cfg.t)
        if lost > 1e-6:
            bad.append(f"pde.ensemble_average_fourier: box too small, free mass outside at t={cfg.t} is {lost:.2e}")
    return bad


# ------------------------------------------------------------------ experiments

@dataclass
class Outcome:
    csv_text: str
    summary: dict
    verdicts: dict
    flagged: bool = False
    tags: dict = field(default_factory=dict)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(v) -> str:
    return repr(float(v))


def _est_json(e: EnsembleEstimate) -> dict:
    return {"mean_re": e.mean.real, "mean_im": e.mean.imag, "stderr": e.stderr, "n": e.n_samples,
            "flagged": e.flagged}


def _exp_mean_xtau(cfg: RunConfig, workers: int) -> Outcome:
    from .paths import x_tau_discrete_mean

    rows, comps, verdicts = [], [], {}
    tags = {}
    for tau in cfg.tau:
        closed = mean_x_tau(cfg.dim, tau, cfg.t)
        quad = mean_x_tau_quad(cfg.dim, tau, cfg.t)
        rows.append([cfg.dim, _f(tau), _f(cfg.t), "closed-form", _f(closed.real), _f(closed.imag), _f(0.0), 0])
        rows.append([cfg.dim, _f(tau), _f(cfg.t), "quadrature", _f(quad.real), _f(quad.imag), _f(0.0), 0])
        ok = abs(closed - quad) <= 1e-8 * abs(quad)
        verdicts[f"closed_vs_quadrature_tau={tau!r}"] = bool(ok)
        comp = {"tau": tau, "closed": [closed.real, closed.imag], "quadrature": [quad.real, quad.imag]}
        if cfg.n_paths >= 2 and cfg.experiment == "mean-xtau" and _wants_mc(cfg):
            tag = f"mean-xtau|d={cfg.dim}|tau={tau!r}|t={cfg.t!r}|n={cfg.n_steps}"
            tags[tag] = cfg.n_paths
            vals = np.array(deterministic_map(_XTauSampler(cfg.dim, cfg.t, cfg.n_steps, cfg.seed, tag, tau),
                                              cfg.n_paths, workers))
            est = EnsembleEstimate.from_samples(vals, warn=False)
            rows.append([cfg.dim, _f(tau), _f(cfg.t), "monte-carlo", _f(est.mean.real), _f(est.mean.imag),
                         _f(est.stderr), est.n_samples])
            # the path sum is unbiased for its own trapezoid mean, not for the continuum value
            target = x_tau_discrete_mean(cfg.dim, tau, cfg.t, cfg.n_steps)
            rows.append([cfg.dim, _f(tau), _f(cfg.t), "discrete-mean", _f(target.real), _f(target.imag), _f(0.0), 0])
            mc_ok = abs(est.mean - target) <= 3 * est.stderr + 1e-12
            verdicts[f"monte_carlo_tau={tau!r}"] = bool(mc_ok)
            comp["monte_carlo"] = _est_json(est)
            comp["discrete_mean"] = [target.real, target.imag]
        comps.append(comp)
    header = ["dim", "tau", "t", "route", "mean_re", "mean_im", "stderr", "n"]
    return Outcome(_csv(header, rows), {"rows": comps}, verdicts, tags=tags)


def _wants_mc(cfg: RunConfig) -> bool:
    # the quadrature-only mode is selected with n_steps = 1 (no meaningful path sums)
    return cfg.n_steps > 1


@dataclass(frozen=True)
class _XTauSampler:
    dim: int
    t: float
    n_steps: int
    seed: int
    tag: str
    tau: float

    def __call__(self, j):
        from .paths import sample_path, x_tau
        return x_tau(sample_path(self.dim, self.t, self.n_steps, substream_seed(self.seed, self.tag, j)), self.tau)


@dataclass(frozen=True)
class _IntersectionSampler:
    dim: int
    t: float
    n_steps: int
    seed: int
    tag: str
    bin_width: float | None
    moll_eps: float | None

    def __call__(self, j):
        from .paths import beta_intersection, clark_ocone_gamma, gamma_renormalized, sample_path
        p = sample_path(self.dim, self.t, self.n_steps, substream_seed(self.seed, self.tag, j))
        if self.dim == 1:
            bw = self.bin_width or math.sqrt(self.moll_eps or 4 * p.dt)
            return np.array([beta_intersection(p, bw), gamma_renormalized(p, self.moll_eps), clark_ocone_gamma(p)])
        g = gamma_renormalized(p, self.moll_eps)
        return np.array([g, g, clark_ocone_gamma(p)])


def _exp_intersection(cfg: RunConfig, workers: int) -> Outcome:
    from .paths import beta_mean

    tag = f"intersection|d={cfg.dim}|t={cfg.t!r}|n={cfg.n_steps}"
    vals = np.stack(deterministic_map(
        _IntersectionSampler(cfg.dim, cfg.t, cfg.n_steps, cfg.seed, tag, cfg.bin_width, cfg.moll_eps),
        cfg.n_paths, workers))
    names = ["beta", "gamma", "gamma_clark_ocone"] if cfg.dim == 1 else ["gamma", "gamma", "gamma_clark_ocone"]
    targets = [beta_mean(cfg.t), 0.0, 0.0] if cfg.dim == 1 else [0.0, 0.0, 0.0]
    rows, verdicts, comps = [], {}, []
    for k, (name, target) in enumerate(zip(names, targets)):
        if cfg.dim == 2 and k == 1:
            continue
        est = EnsembleEstimate.from_samples(vals[:, k], warn=False)
        ok = abs(est.mean.real - target) <= 3 * est.stderr
        verdicts[f"{name}_mean"] = bool(ok)
        rows.append([cfg.dim, _f(cfg.t), name, _f(est.mean.real), _f(est.stderr), est.n_samples, _f(target)])
        comps.append({"quantity": name, "target": target, **_est_json(est)})
    g = vals[:, 1]
    mse = float(np.mean((vals[:, 2] - g) ** 2))
    var = float(np.var(g, ddof=1))
    comps.append({"quantity": "clark_ocone_mse_over_var", "value": mse / var})
    header = ["dim", "t", "quantity", "mean", "stderr", "n", "target"]
    return Outcome(_csv(header, rows), {"rows": comps}, verdicts, tags={tag: cfg.n_paths})


def _exp_field_stats(cfg: RunConfig, workers: int) -> Outcome:
    m = cfg.measure
    rows, verdicts, comps, tags = [], {}, [], {}
    for eps in cfg.eps:
        grid = _grid_for(cfg, eps)
        tag = f"field-stats|d={cfg.dim}|eps={eps!r}|L={grid.L!r}|N={grid.N}"
        tags[tag] = cfg.n_fields
        stats = np.stack(deterministic_map(_FieldStats(m, grid, eps, cfg.seed, tag, tuple(cfg.lags)),
                                           cfg.n_fields, workers))
        for k, lag in enumerate(["mean"] + list(cfg.lags)):
            est = EnsembleEstimate.from_samples(stats[:, k], warn=False)
            if lag == "mean":
                target = 0.0
            else:
                target = eps ** (-cfg.dim) * float(np.sum(
                    [w * math.exp(-0.5 * (lam * lag * grid.h / eps) ** 2) for lam, w in m.atoms]))
            ok = abs(est.mean.real - target) <= 3 * est.stderr + 1e-12
            key = f"eps={eps!r}|{'mean' if lag == 'mean' else f'lag={lag}'}"
            verdicts[key] = bool(ok)
            rows.append([cfg.dim, _f(eps), str(lag), _f(est.mean.real), _f(est.stderr), est.n_samples, _f(target)])
            comps.append({"eps": eps, "lag": lag, "target": target, **_est_json(est)})
    header = ["dim", "eps", "lag", "value", "stderr", "n", "target"]
    return Outcome(_csv(header, rows), {"rows": comps}, verdicts, tags=tags)


@dataclass(frozen=True)
class _FieldStats:
    m: SchoenbergMeasure
    grid: TorusGrid
    eps: float
    seed: int
    tag: str
    lags: tuple

    def __call__(self, j):
        v = sample_potential(self.m, self.grid, self.eps, substream_seed(self.seed, self.tag, j)).values
        out = [float(np.mean(v))]
        for lag in self.lags:
            out.append(float(np.mean(v * np.roll(v, -lag, axis=-1))))
        return np.array(out)


def _fourier_rows_outcome(rows: list[EstimateRow], comps, verdicts, tags) -> Outcome:
    buf = io.StringIO()
    write_rows_csv(rows, buf)
    return Outcome(buf.getvalue(), {"comparisons": comps}, verdicts, any(r.estimate.flagged for r in rows), tags)


def _exp_fk_vs_pde(cfg: RunConfig, workers: int) -> Outcome:
    from .ensemble import combined_stderr, compatible
    from .pde import pde_tag
    from .representation import fk_tag

    m, prof = cfg.measure, cfg.profile()
    rows, comps, tags = [], [], {}
    ok_all = True
    for eps in sorted(cfg.eps, reverse=True):
        grid = _grid_for(cfg, eps)
        snapped = [tuple(grid.snap(x)[0]) for x in cfg.xi]
        ens = FKEnsemble.simulate(m, cfg.dim, eps, cfg.t, cfg.n_paths, cfg.n_steps, cfg.seed, workers)
        tags[fk_tag(cfg.dim, eps, cfg.t, cfg.n_steps)] = cfg.n_paths
        tags[pde_tag(cfg.dim, eps, cfg.t, grid)] = cfg.n_fields
        pde = ensemble_average_fourier(m, cfg.dim, eps, cfg.t, snapped, prof, grid, cfg.n_fields, cfg.dt,
                                       cfg.seed, workers)
        for x, xi_req, p in zip(snapped, cfg.xi, pde):
            f = ens.fk(x, prof)
            rows += [EstimateRow(cfg.dim, eps, cfg.t, x, "fk", f), EstimateRow(cfg.dim, eps, cfg.t, x, "pde", p)]
            ok = compatible(f, p)
            ok_all &= ok
            comps.append({"eps": eps, "xi_requested": list(xi_req), "xi": list(x), "fk": _est_json(f),
                          "pde": _est_json(p), "abs_diff": abs(f.mean - p.mean),
                          "combined_stderr": combined_stderr(f, p), "compatible": bool(ok)})
    return _fourier_rows_outcome(rows, comps, {"fk_pde_compatible": bool(ok_all)}, tags)


def _exp_theorem11(cfg: RunConfig, workers: int) -> Outcome:
    from .representation import limit_tag

    grid = _grid_for(cfg, min(cfg.eps))
    budgets = Budgets(cfg.n_paths, cfg.n_steps, cfg.n_fields, grid.L, grid.N, cfg.dt, cfg.moll_eps,
                      cfg.limit_paths, cfg.limit_steps)
    rep = compare_routes(cfg.measure, cfg.dim, cfg.t, cfg.xi, cfg.eps, cfg.profile(), budgets, cfg.seed, workers,
                         cfg.estimator)
    tags = {limit_tag(cfg.dim, cfg.t, cfg.limit_steps or cfg.n_steps): cfg.limit_paths or cfg.n_paths}
    return _fourier_rows_outcome(rep.rows, rep.comparisons, rep.verdicts, tags)


def _exp_homogenize(cfg: RunConfig, workers: int) -> Outcome:
    from .pde import pde_tag

    m, prof = cfg.measure, cfg.profile()
    norm = prof.norm_sq()
    rows, comps, tags = [], [], {}
    errs = []
    for eps in sorted(cfg.eps, reverse=True):
        grid = _grid_for(cfg, eps)
        tags[pde_tag(2, eps, cfg.t, grid, "hom")] = cfg.n_fields
        est = homogenization_error(m, eps, cfg.t, prof, grid, cfg.n_fields, cfg.dt, cfg.seed, workers)
        errs.append((eps, est))
        rows.append([2, _f(eps), _f(cfg.t), _f(grid.L), grid.N, _f(est.mean.real), _f(est.stderr),
                     est.n_samples, _f(est.mean.real / norm)])
        comps.append({"eps": eps, "L": grid.L, "N": grid.N, **_est_json(est), "relative": est.mean.real / norm})
    mono = all(b.mean.real <= a.mean.real + 3 * math.hypot(a.stderr, b.stderr)
               for (_, a), (_, b) in zip(errs, errs[1:]))
    verdicts = {"nonincreasing": bool(mono), "final_below_10pct": bool(errs[-1][1].mean.real <= 0.1 * norm)}
    if cfg.box_doubling_eps is not None:
        eps = cfg.box_doubling_eps
        g1 = _grid_for(cfg, eps)
        g2 = TorusGrid(2, 2 * g1.L, 2 * g1.N)
        tags[pde_tag(2, eps, cfg.t, g1, "hom")] = cfg.n_fields
        tags[pde_tag(2, eps, cfg.t, g2, "hom")] = cfg.n_fields
        done = dict(errs)
        if eps in done:
            a = done[eps]
        else:
            a = homogenization_error(m, eps, cfg.t, prof, g1, cfg.n_fields, cfg.dt, cfg.seed, workers)
        b = homogenization_error(m, eps, cfg.t, prof, g2, cfg.n_fields, cfg.dt, cfg.seed, workers)
        for g, e in ((g1, a), (g2, b)):
            rows.append([2, _f(eps), _f(cfg.t), _f(g.L), g.N, _f(e.mean.real), _f(e.stderr), e.n_samples,
                         _f(e.mean.real / norm)])
        stable = abs(a.mean.real - b.mean.real) <= 3 * math.hypot(a.stderr, b.stderr)
        verdicts["box_doubling_stable"] = bool(stable)
        comps.append({"box_doubling": {"eps": eps, "L": [g1.L, g2.L], "errors": [_est_json(a), _est_json(b)]}})
    header = ["dim", "eps", "t", "L", "N", "error", "stderr", "n", "relative_error"]
    return Outcome(_csv(header, rows), {"rows": comps, "norm_sq": norm}, verdicts, tags=tags)


def _exp_duhamel(cfg: RunConfig, workers: int) -> Outcome:
    from .duhamel import first_order_term, weak_coupling_check
    from .representation import fk_tag

    m, prof = cfg.measure, cfg.profile()
    eps = cfg.eps[0]
    rows, comps, verdicts = [], [], {}
    ens = FKEnsemble.simulate(m, cfg.dim, eps, cfg.t, cfg.n_paths, cfg.n_steps, cfg.seed, workers)
    for x in cfg.xi:
        rep = weak_coupling_check(m, cfg.dim, eps, cfg.t, x, prof, cfg.coupling, cfg.n_paths, cfg.n_steps,
                                  cfg.seed, ensemble=ens)
        first = first_order_term(m, cfg.dim, eps, cfg.t, x, prof)
        xt = tuple(float(v) for v in x)
        rows.append(EstimateRow(cfg.dim, eps, cfg.t, xt, "duhamel-n1", EnsembleEstimate(first.value, 0.0, 0)))
        rows.append(EstimateRow(cfg.dim, eps, cfg.t, xt, "duhamel-n0", EnsembleEstimate(rep.free, 0.0, 0)))
        for c, est in zip(rep.couplings, rep.fk):
            rows.append(EstimateRow(cfg.dim, eps, cfg.t, xt, f"fk-c={c!r}", est))
        verdicts[f"ratio_band_xi={list(xt)}"] = rep.passed
        comps.append({"xi": list(xt), "couplings": rep.couplings, "residuals": rep.residuals,
                      "residual_stderr": rep.residual_stderr, "ratios": rep.ratios,
                      "first_order": [first.value.real, first.value.imag],
                      "quadrature_error": first.quadrature_error})
    return _fourier_rows_outcome(rows, comps, verdicts, {fk_tag(cfg.dim, eps, cfg.t, cfg.n_steps): cfg.n_paths})


_RUNNERS = {
    "field-stats": _exp_field_stats,
    "intersection": _exp_intersection,
    "mean-xtau": _exp_mean_xtau,
    "fk-vs-pde": _exp_fk_vs_pde,
    "theorem11": _exp_theorem11,
    "homogenize": _exp_homogenize,
    "duhamel-check": _exp_duhamel,
}


def run(cfg: RunConfig, workers: int = 1) -> int:
    """Run one experiment and write its CSV and JSON summary; returns the exit status."""
    problems = validate(cfg)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(cfg.out, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    if cfg.t > SMALL_TIME_ADVISORY and cfg.experiment in ("fk-vs-pde", "theorem11"):
        print(f"advisory: t={cfg.t} exceeds {SMALL_TIME_ADVISORY}; the limit formula is only "
              "guaranteed for small times", file=sys.stderr)
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", VarianceWarning)
        warnings.simplefilter("always", SnapWarning)
        outcome = _RUNNERS[cfg.experiment](cfg, workers)
    elapsed = time.perf_counter() - start
    notes = sorted({str(w.message) for w in caught})
    flagged = outcome.flagged or any(issubclass(w.category, VarianceWarning) for w in caught)
    summary = {
        "experiment": cfg.experiment,
        "version": __version__,
        "inputs": _inputs(cfg),
        "verdicts": outcome.verdicts,
        "passed": all(outcome.verdicts.values()),
        "variance_flagged": bool(flagged),
        "warnings": notes,
        "wall_clock_seconds": elapsed,
        "workers": workers,
        "seeds": {
            "master": cfg.seed,
            "substream_rule": "numpy SeedSequence(master, spawn_key=(crc32(tag), j)), 64 bits from generate_state",
            "ensembles": outcome.tags,
        },
        **outcome.summary,
    }
    base = os.path.join(cfg.out, cfg.experiment)
    try:
        with open(base + ".csv", "w", newline="") as fh:
            fh.write(outcome.csv_text)
        with open(base + ".json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    if flagged and cfg.strict:
        return EXIT_NUMERIC
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _inputs(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["atoms"] = [list(a) for a in cfg.atoms]
    return d


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avgwave", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for ensembles")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    ap.add_argument("--validate-only", action="store_true", help="report violations and exit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.validate_only:
        problems = validate(cfg)
        for p in problems:
            print(p)
        return EXIT_CONFIG if problems else EXIT_OK
    return run(cfg, args.workers)


if __name__ == "__main__":
    sys.exit(main())

"""Monte Carlo evaluators for the average wave function in Fourier space.

Three routes estimate E[phi_hat(t, xi)]:

* ``fk_average``: the finite-eps Feynman-Kac path average,
  phi_hat_0 e^{-i C_eps t} E exp{i sqrt(i) xi.B_t - X_eps(t)};
* ``split_average``: the same average with E X_eps pulled out analytically;
* ``limit_average``: the eps -> 0 formula driven by the renormalized
  self-intersection local time gamma.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .covariance import (
    I_POW_3_2,
    ModelConstants,
    SchoenbergMeasure,
    mean_x_tau,
    renorm_constant,
    rho_d,
)
from .ensemble import EnsembleEstimate, compatible, combined_stderr, deterministic_map, substream_seed
from .paths import (
    clark_ocone_gamma,
    gamma_renormalized,
    mixture_taus,
    sample_path,
    x_tau_many,
)
from .profiles import InitialProfile

__all__ = [
    "InitialProfile",
    "EnsembleEstimate",
    "FKEnsemble",
    "LimitEnsemble",
    "fk_average",
    "split_average",
    "limit_average",
    "compare_routes",
    "Budgets",
    "EstimateRow",
    "RouteReport",
    "write_rows_csv",
]


def _xi(xi, dim: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (dim,):
        raise ValueError(f"xi must have {dim} components")
    return xi


def _check_common(dim, t, n_paths, n_steps):
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if not t > 0:
        raise ValueError("t must be positive")
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")


def fk_tag(dim: int, eps: float, t: float, n_steps: int) -> str:
    return f"fk|d={dim}|eps={eps!r}|t={t!r}|n={n_steps}"


def limit_tag(dim: int, t: float, n_steps: int) -> str:
    return f"limit|d={dim}|t={t!r}|n={n_steps}"


@dataclass(frozen=True)
class _FKSampler:
    dim: int
    t: float
    n_steps: int
    seed: int
    tag: str
    taus: tuple

    def __call__(self, j: int) -> np.ndarray:
        path = sample_path(self.dim, self.t, self.n_steps, substream_seed(self.seed, self.tag, j))
        xs = x_tau_many(path, self.taus) if self.taus else np.zeros(0, complex)
        return np.concatenate([path.endpoint, xs.real, xs.imag])


@dataclass(frozen=True, eq=False)
class FKEnsemble:
    """Per-path endpoints B_t and x_tau values at tau_k = eps^2 / lambda_k^2.

    X_eps is linear in the measure weights, so one ensemble serves every
    uniform rescaling of the weights (see :meth:`fk`).
    """

    m: SchoenbergMeasure
    dim: int
    eps: float
    t: float
    n_steps: int
    endpoints: np.ndarray
    x_values: np.ndarray
    seed: int
    tag: str

    @classmethod
    def simulate(cls, m: SchoenbergMeasure, dim: int, eps: float, t: float, n_paths: int,
                 n_steps: int, seed: int, workers: int = 1, tag: str | None = None) -> "FKEnsemble":
        _check_common(dim, t, n_paths, n_steps)
        if not eps > 0:
            raise ValueError("eps must be positive")
        tag = tag or fk_tag(dim, eps, t, n_steps)
        taus = tuple(float(v) for v in mixture_taus(m, eps))
        sampler = _FKSampler(dim, float(t), int(n_steps), int(seed), tag, taus)
        rows = np.stack(deterministic_map(sampler, n_paths, workers))
        k = len(taus)
        xs = rows[:, dim:dim + k] + 1j * rows[:, dim + k:dim + 2 * k]
        return cls(m, dim, float(eps), float(t), int(n_steps), rows[:, :dim], xs, int(seed), tag)

    @property
    def n_paths(self) -> int:
        return self.endpoints.shape[0]

    def mirrored(self) -> "FKEnsemble":
        """The ensemble driven by B -> -B (x_tau depends on |B_s - B_u| only)."""
        return replace(self, endpoints=-self.endpoints)

    def _atom_factors(self, coupling: float) -> np.ndarray:
        lam = np.asarray(self.m.lambdas)
        w = coupling * np.asarray(self.m.weights)
        return (2 * np.pi) ** (self.dim / 2) * np.exp(-1j * np.pi * self.dim / 4) * w * lam ** (-self.dim)

    def x_eps(self, coupling: float = 1.0) -> np.ndarray:
        """X_eps(t) per path for the measure with weights scaled by ``coupling``."""
        if self.m.is_zero or coupling == 0:
            return np.zeros(self.n_paths, complex)
        return np.conj(self.x_values) @ self._atom_factors(coupling)

    def renorm(self, coupling: float = 1.0) -> float:
        if self.m.is_zero or coupling == 0:
            return 0.0
        return renorm_constant(self.m.scaled(coupling), self.dim, self.eps)

    def mean_x(self) -> np.ndarray:
        return np.array([mean_x_tau(self.dim, (self.eps / lam) ** 2, self.t) for lam in self.m.lambdas])

    def _drift(self, xi) -> np.ndarray:
        return I_POW_3_2 * (self.endpoints @ _xi(xi, self.dim))

    def fk(self, xi, profile: InitialProfile, coupling: float = 1.0) -> EnsembleEstimate:
        samples = np.exp(self._drift(xi) - self.x_eps(coupling))
        pref = profile.fourier(_xi(xi, self.dim)) * np.exp(-1j * self.renorm(coupling) * self.t)
        return EnsembleEstimate.from_samples(samples, pref)

    def split_prefactor(self, xi, profile: InitialProfile, coupling: float = 1.0) -> complex:
        expo = -1j * self.renorm(coupling) * self.t
        if not (self.m.is_zero or coupling == 0):
            expo -= np.conj(self.mean_x()) @ self._atom_factors(coupling)
        return complex(profile.fourier(_xi(xi, self.dim)) * np.exp(expo))

    def split(self, xi, profile: InitialProfile, coupling: float = 1.0) -> EnsembleEstimate:
        if self.m.is_zero or coupling == 0:
            y_part = np.zeros(self.n_paths, complex)
        else:
            y_part = np.conj(self.x_values - self.mean_x()) @ self._atom_factors(coupling)
        z = np.exp(self._drift(xi) - y_part)
        return EnsembleEstimate.from_samples(z, self.split_prefactor(xi, profile, coupling))


def fk_average(m, dim, eps, t, xi, profile, n_paths, n_steps, seed, workers=1) -> EnsembleEstimate:
    return FKEnsemble.simulate(m, dim, eps, t, n_paths, n_steps, seed, workers).fk(xi, profile)


def split_average(m, dim, eps, t, xi, profile, n_paths, n_steps, seed, workers=1) -> EnsembleEstimate:
    return FKEnsemble.simulate(m, dim, eps, t, n_paths, n_steps, seed, workers).split(xi, profile)


GAMMA_ESTIMATORS = ("mollified", "clark-ocone")


@dataclass(frozen=True)
class _LimitSampler:
    dim: int
    t: float
    n_steps: int
    seed: int
    tag: str
    moll_eps: float | None
    estimators: tuple

    def __call__(self, j: int) -> np.ndarray:
        path = sample_path(self.dim, self.t, self.n_steps, substream_seed(self.seed, self.tag, j))
        out = list(path.endpoint)
        for est in self.estimators:
            out.append(gamma_renormalized(path, self.moll_eps) if est == "mollified" else clark_ocone_gamma(path))
        return np.array(out)


@dataclass(frozen=True, eq=False)
class LimitEnsemble:
    dim: int
    t: float
    n_steps: int
    endpoints: np.ndarray
    gammas: dict = field(default_factory=dict)

    @classmethod
    def simulate(cls, dim, t, n_paths, n_steps, seed, moll_eps=None,
                 estimators=("mollified",), workers=1, tag=None) -> "LimitEnsemble":
        _check_common(dim, t, n_paths, n_steps)
        for e in estimators:
            if e not in GAMMA_ESTIMATORS:
                raise ValueError(f"unknown gamma estimator {e!r}")
        if moll_eps is not None and not moll_eps > 0:
            raise ValueError("moll_eps must be positive")
        tag = tag or limit_tag(dim, t, n_steps)
        sampler = _LimitSampler(dim, float(t), int(n_steps), int(seed), tag, moll_eps, tuple(estimators))
        rows = np.stack(deterministic_map(sampler, n_paths, workers))
        gam = {e: rows[:, dim + i] for i, e in enumerate(estimators)}
        return cls(dim, float(t), int(n_steps), rows[:, :dim], gam)

    def average(self, m: SchoenbergMeasure, xi, profile: InitialProfile,
                estimator: str = "mollified") -> EnsembleEstimate:
        consts = ModelConstants.from_measure(m, self.dim)
        drift = I_POW_3_2 * (self.endpoints @ _xi(xi, self.dim))
        if m.is_zero:
            samples = np.exp(drift)
            rho = 0j
        else:
            samples = np.exp(drift - consts.i_pow_3d_2 * consts.rbar * self.gammas[estimator])
            rho = rho_d(m, self.dim, self.t)
        return EnsembleEstimate.from_samples(samples, profile.fourier(_xi(xi, self.dim)) * np.exp(rho))


def limit_average(m, dim, t, xi, profile, n_paths, n_steps, moll_eps=None, seed=0,
                  estimator="mollified", workers=1) -> EnsembleEstimate:
    ens = LimitEnsemble.simulate(dim, t, n_paths, n_steps, seed, moll_eps, (estimator,), workers)
    return ens.average(m, xi, profile, estimator)


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class EstimateRow:
    dim: int
    eps: float
    t: float
    xi: tuple
    route: str
    estimate: EnsembleEstimate


def _fmt(v: float) -> str:
    return repr(float(v))


def csv_header(dim: int) -> list[str]:
    return ["dim", "eps", "t"] + [f"xi{i + 1}" for i in range(dim)] + ["route", "mean_re", "mean_im", "stderr", "n"]


def write_rows_csv(rows: list[EstimateRow], fh) -> None:
    """Shared result schema; ``eps`` is 0 for the eps -> 0 limit route."""
    if not rows:
        return
    dim = rows[0].dim
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(csv_header(dim))
    for r in rows:
        e = r.estimate
        w.writerow([r.dim, _fmt(r.eps), _fmt(r.t)] + [_fmt(v) for v in r.xi]
                   + [r.route, _fmt(e.mean.real), _fmt(e.mean.imag), _fmt(e.stderr), e.n_samples])


def rows_to_csv(rows: list[EstimateRow]) -> str:
    buf = io.StringIO()
    write_rows_csv(rows, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class Budgets:
    n_paths: int = 2000
    n_steps: int = 1024
    n_fields: int = 200
    grid_L: float = 40.0
    grid_N: int = 2048
    dt: float | None = None
    moll_eps: float | None = None
    limit_paths: int | None = None
    limit_steps: int | None = None


@dataclass
class RouteReport:
    rows: list[EstimateRow]
    comparisons: list[dict]
    verdicts: dict

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        return json.dumps({"comparisons": self.comparisons, "verdicts": self.verdicts}, indent=2, sort_keys=True)


def compare_routes(m, dim, t, xi_list, eps_list, profile, budgets: Budgets, seed: int,
                   workers: int = 1, estimator: str = "mollified") -> RouteReport:
    """Feynman-Kac, PDE and limit estimates on a shared table of (xi, eps).

    xi values are first snapped to the PDE lattice and every route is
    evaluated at the snapped frequency.
    """
    from .pde import TorusGrid, ensemble_average_fourier

    if not xi_list or not eps_list:
        raise ValueError("xi_list and eps_list must be nonempty")
    grid = TorusGrid(dim, budgets.grid_L, budgets.grid_N)
    snapped = [tuple(grid.snap(_xi(x, dim))[0]) for x in xi_list]
    eps_sorted = sorted((float(e) for e in eps_list), reverse=True)
    rows: list[EstimateRow] = []
    lim_ens = LimitEnsemble.simulate(
        dim, t, budgets.limit_paths or budgets.n_paths, budgets.limit_steps or budgets.n_steps,
        seed, budgets.moll_eps, (estimator,), workers)
    lim = {x: lim_ens.average(m, x, profile, estimator) for x in snapped}
    comparisons = []
    fk_ok = True
    shrink_ok = True
    last_gap = {x: math.inf for x in snapped}
    for eps in eps_sorted:
        fk_ens = FKEnsemble.simulate(m, dim, eps, t, budgets.n_paths, budgets.n_steps, seed, workers)
        pde_est = ensemble_average_fourier(m, dim, eps, t, snapped, profile, grid, budgets.n_fields,
                                           budgets.dt, seed, workers)
        for x, p in zip(snapped, pde_est):
            f = fk_ens.fk(x, profile)
            rows += [EstimateRow(dim, eps, t, x, "fk", f), EstimateRow(dim, eps, t, x, "pde", p)]
            ok = compatible(f, p)
            gap = abs(p.mean - lim[x].mean)
            fk_ok &= ok
            shrink_ok &= gap <= last_gap[x]
            last_gap[x] = gap
            comparisons.append({
                "eps": eps, "xi": list(x),
                "fk_minus_pde": abs(f.mean - p.mean), "fk_pde_stderr": combined_stderr(f, p),
                "pde_minus_limit": gap, "pde_limit_stderr": combined_stderr(p, lim[x]),
                "fk_minus_limit": abs(f.mean - lim[x].mean), "fk_pde_compatible": bool(ok),
            })
    rows += [EstimateRow(dim, 0.0, t, x, "limit", lim[x]) for x in snapped]
    verdicts = {"fk_pde_compatible": bool(fk_ok), "limit_gap_shrinks": bool(shrink_ok)}
    return RouteReport(rows, comparisons, verdicts)

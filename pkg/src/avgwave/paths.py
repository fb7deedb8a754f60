"""Brownian paths and the intersection functionals evaluated on them.

Double time integrals over the ordered simplex {0 <= u < s <= t} use the
left grid points B_0..B_{n-1}: off-diagonal pairs k < j carry weight dt^2
and the diagonal carries dt^2/2 times the kernel at the origin.  For a
constant path this gives exactly K(0) t^2 / 2, and the expectation of the
discrete sum is the trapezoid rule applied to the exact mean.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import integrate, special

from . import _kernels
from .covariance import (
    SchoenbergMeasure,
    correlation_complex,
    free_kernel_prefactor,
    mean_x_tau,
    minus_two_pi_i_pow,
)

# exp(-GAUSS_WINDOW^2 / 2) ~ 2e-18: beyond this the 1D Gaussian kernel is dropped.
GAUSS_WINDOW = 9.0


@dataclass(frozen=True, eq=False)
class BrownianPath:
    dim: int
    t_end: float
    n_steps: int
    positions: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.shape != (self.n_steps + 1, self.dim):
            raise ValueError(f"positions must have shape {(self.n_steps + 1, self.dim)}, got {pos.shape}")
        if np.any(pos[0] != 0.0):
            raise ValueError("paths start at the origin")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def endpoint(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def mirrored(self) -> "BrownianPath":
        return BrownianPath(self.dim, self.t_end, self.n_steps, -self.positions, self.seed)

    def _left_xy(self):
        left = self.positions[:-1]
        x = np.ascontiguousarray(left[:, 0])
        y = np.ascontiguousarray(left[:, 1]) if self.dim == 2 else np.zeros_like(x)
        return x, y


def sample_path(dim: int, t_end: float, n_steps: int, seed: int) -> BrownianPath:
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal((n_steps, dim)) * math.sqrt(t_end / n_steps)
    pos = np.zeros((n_steps + 1, dim))
    np.cumsum(inc, axis=0, out=pos[1:])
    return BrownianPath(dim, t_end, n_steps, pos, seed)


def constant_path(dim: int, t_end: float, n_steps: int) -> BrownianPath:
    """Path that never leaves the origin (test fixture)."""
    return BrownianPath(dim, t_end, n_steps, np.zeros((n_steps + 1, dim)), None)


def _simplex_total(offdiag: float | complex | np.ndarray, k0, path: BrownianPath):
    return path.dt**2 * (offdiag + 0.5 * path.n_steps * k0)


def _discrete_mean(mean_fn, path: BrownianPath) -> float:
    """Expectation of the discrete simplex sum when E K(B_s - B_u) = mean_fn(s - u)."""
    n = path.n_steps
    lags = np.arange(1, n)
    vals = mean_fn(lags * path.dt)
    return path.dt**2 * (0.5 * n * mean_fn(np.zeros(1))[0] + float(np.sum((n - lags) * vals)))


# ---------------------------------------------------------------- local time (d=1)

@dataclass(frozen=True, eq=False)
class LocalTimeProfile:
    bin_width: float
    indices: np.ndarray
    masses: np.ndarray

    @property
    def bins(self) -> dict[int, float]:
        return {int(i): float(m) for i, m in zip(self.indices, self.masses)}

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def density(self) -> np.ndarray:
        """Local time l(t, x) at the bin centres."""
        return self.masses / self.bin_width


def _require_1d(path: BrownianPath) -> None:
    if path.dim != 1:
        raise ValueError("local time is defined for one-dimensional paths only")


def local_time_profile(path: BrownianPath, bin_width: float) -> LocalTimeProfile:
    _require_1d(path)
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    idx = np.floor(path.positions[:-1, 0] / bin_width).astype(np.int64)
    uniq, counts = np.unique(idx, return_counts=True)
    return LocalTimeProfile(float(bin_width), uniq, counts * path.dt)


def beta_intersection(path: BrownianPath, bin_width: float) -> float:
    """Intersection local time 1/2 int l(t,x)^2 dx from the binned occupation measure."""
    prof = local_time_profile(path, bin_width)
    return 0.5 * float(np.sum(prof.masses**2)) / bin_width


def _gauss_sum_1d(path: BrownianPath, var: float) -> float:
    """sum_{k<j} exp(-(B_j - B_k)^2 / (2 var)) over left grid points."""
    xs = np.sort(path.positions[:-1, 0])
    rows = _kernels.gauss_pair_rows_sorted(xs, 0.5 / var, GAUSS_WINDOW * math.sqrt(var))
    return float(np.sum(rows))


def _gauss_sum_2d(path: BrownianPath, var: float) -> float:
    x, y = path._left_xy()
    rows = _kernels.gauss_pair_rows(x, y, np.array([0.5 / var]))
    return float(np.sum(rows))


def beta_via_kernel(path: BrownianPath, eps_kernel: float) -> float:
    """(1/eps) int int f((B_s - B_u)/eps) over the simplex, f the standard normal density."""
    _require_1d(path)
    if not eps_kernel > 0:
        raise ValueError("eps_kernel must be positive")
    k0 = 1.0 / (eps_kernel * math.sqrt(2 * math.pi))
    return k0 * _simplex_total(_gauss_sum_1d(path, eps_kernel**2), 1.0, path)


def beta_mean(t: float) -> float:
    """E beta = 4 t^{3/2} / (3 sqrt(2 pi))."""
    return 4.0 * t**1.5 / (3.0 * math.sqrt(2 * math.pi))


def default_moll_eps(path: BrownianPath) -> float:
    return 4.0 * path.dt


def gamma_renormalized(path: BrownianPath, moll_eps: float | None = None) -> float:
    """Renormalized self-intersection local time.

    Simplex sum of q_eps(B_s - B_u) minus its exact discrete expectation, with
    q_eps the centred Gaussian density of covariance eps I, so the estimator
    is centred at every resolution.  In d=1 it tends to beta - E beta.
    """
    if moll_eps is None:
        moll_eps = default_moll_eps(path)
    if not moll_eps > 0:
        raise ValueError("moll_eps must be positive")
    d = path.dim
    if d == 1:
        raw = beta_via_kernel(path, math.sqrt(moll_eps))
    else:
        raw = _simplex_total(_gauss_sum_2d(path, moll_eps), 1.0, path) / (2 * math.pi * moll_eps)
    centre = _discrete_mean(lambda v: (2 * math.pi * (moll_eps + v)) ** (-d / 2), path)
    return raw - centre


# ------------------------------------------------------------ oscillatory functionals

def _phase_sums(path: BrownianPath, coefs: np.ndarray) -> np.ndarray:
    """sum_{k<j} exp(i a |B_j - B_k|^2) for every a in ``coefs``."""
    x, y = path._left_xy()
    span = float(np.sum(np.ptp(path.positions[:-1], axis=0) ** 2))
    if np.max(np.abs(coefs)) * span > _kernels.MAX_PHASE:
        re, im = _kernels.phase_pair_rows_ref(x, y, coefs)
    else:
        re, im = _kernels.phase_pair_rows(x, y, coefs)
    return np.sum(re, axis=0) + 1j * np.sum(im, axis=0)


def _check_taus(taus) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(~(taus > 0)):
        raise ValueError("tau must be positive")
    return taus


def x_tau_many(path: BrownianPath, taus: Iterable[float]) -> np.ndarray:
    """x_tau for several tau values sharing one pass over the pair distances."""
    taus = _check_taus(list(taus))
    sums = _phase_sums(path, 0.5 / taus)
    prefs = np.array([free_kernel_prefactor(path.dim, tau) for tau in taus])
    return prefs * _simplex_total(sums, 1.0, path)


def x_tau_discrete_mean(dim: int, tau: float, t_end: float, n_steps: int) -> complex:
    """Exact E of the discrete x_tau sum; E s_tau(B_v) = (2 pi (v + i tau))^{-d/2}."""
    dt = t_end / n_steps
    lags = np.arange(n_steps) * dt
    k = (2 * np.pi * (lags + 1j * tau)) ** (-dim / 2)
    weights = (n_steps - np.arange(n_steps)).astype(float)
    weights[0] = 0.5 * n_steps
    return complex(dt**2 * np.sum(weights * k))


def x_tau(path: BrownianPath, tau: float) -> complex:
    """Simplex integral of the free Schrodinger kernel s_tau(B_s - B_u)."""
    return complex(x_tau_many(path, [tau])[0])


def y_tau_many(path: BrownianPath, taus: Iterable[float]) -> np.ndarray:
    taus = _check_taus(list(taus))
    means = np.array([mean_x_tau(path.dim, tau, path.t_end) for tau in taus])
    return x_tau_many(path, taus) - means


def y_tau(path: BrownianPath, tau: float) -> complex:
    """x_tau centred by its exact expectation."""
    return complex(y_tau_many(path, [tau])[0])


def mixture_taus(m: SchoenbergMeasure, eps: float) -> np.ndarray:
    return np.array([(eps / lam) ** 2 for lam in m.lambdas])


def mixture_from_x(m: SchoenbergMeasure, dim: int, xs) -> complex:
    """(-2 pi i)^{d/2} sum_k w_k lambda_k^{-d} conj(xs_k)."""
    if m.is_zero:
        return 0j
    lam = np.asarray(m.lambdas)
    w = np.asarray(m.weights)
    return complex(minus_two_pi_i_pow(dim) * np.sum(w * lam ** (-dim) * np.conj(np.asarray(xs))))


def x_eps_mixture(path: BrownianPath, m: SchoenbergMeasure, eps: float, route: str = "fast") -> complex:
    """X_eps(t) = simplex integral of eps^{-d} R(sqrt(i) (B_s - B_u) / eps), conjugated.

    ``route="fast"`` assembles it from x_tau at tau = eps^2/lambda_k^2;
    ``route="direct"`` sums correlation_complex(|B_s - B_u|/eps) with numpy.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if m.is_zero:
        return 0j
    if route == "fast":
        return mixture_from_x(m, path.dim, x_tau_many(path, mixture_taus(m, eps)))
    if route == "direct":
        return _x_eps_direct(path, m, eps)
    raise ValueError(f"unknown route {route!r}")


def _x_eps_direct(path: BrownianPath, m: SchoenbergMeasure, eps: float, block: int = 256) -> complex:
    left = path.positions[:-1]
    n = left.shape[0]
    off = 0j
    for start in range(1, n, block):
        stop = min(n, start + block)
        rows = left[start:stop]
        d = np.sqrt(np.sum((rows[:, None, :] - left[None, :stop, :]) ** 2, axis=-1))
        mask = np.arange(stop)[None, :] < np.arange(start, stop)[:, None]
        vals = correlation_complex(m, d / eps)
        off += np.sum(np.where(mask, vals, 0.0))
    return complex(eps ** (-path.dim) * _simplex_total(off, m.total_mass, path))


# ---------------------------------------------------------------- Clark-Ocone

def chi0_kernel(dim: int, x, big_t: float):
    """int_0^T grad q_sigma(x) d sigma in closed form (q_sigma the heat kernel)."""
    if not big_t > 0:
        raise ValueError("T must be positive")
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return -np.sign(x) * special.erfc(np.abs(x) / math.sqrt(2 * big_t))
    r2 = np.sum(x**2, axis=-1, keepdims=True)
    return -x / (math.pi * r2) * np.exp(-r2 / (2 * big_t))


def chi0_kernel_quad(dim: int, x, big_t: float) -> np.ndarray:
    """Same integral by adaptive quadrature in sigma (reference for the closed forms)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r2 = float(np.sum(x**2))

    def scalar_part(sig):
        return -(2 * math.pi * sig) ** (-dim / 2) / sig * math.exp(-r2 / (2 * sig))

    # substitute sigma = r2 / (2 v) near the essential singularity at 0
    brk = [b for b in (r2 / 50, r2 / 5, r2, 5 * r2) if 0 < b < big_t]
    edges = [0.0] + brk + [big_t]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(scalar_part, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
    return total * x


@dataclass(frozen=True)
class ItoIntegrandSample:
    r: float
    chi: np.ndarray


@dataclass(frozen=True, eq=False)
class ItoIntegrand:
    """chi_0(t, r_j) on the left grid points r_j = j dt."""

    r: np.ndarray
    chi: np.ndarray

    def __len__(self):
        return self.r.size

    def __getitem__(self, j) -> ItoIntegrandSample:
        return ItoIntegrandSample(float(self.r[j]), self.chi[j])


def clark_ocone_integrand(path: BrownianPath) -> ItoIntegrand:
    """Discrete chi_0: inner time integral over u < r with the u = r term excluded."""
    x, y = path._left_xy()
    if path.dim == 1:
        chi = _kernels.chi0_rows_1d(x, path.t_end, path.dt)[:, None]
    else:
        cx, cy = _kernels.chi0_rows_2d(x, y, path.t_end, path.dt)
        chi = np.stack([cx, cy], axis=1)
    return ItoIntegrand(path.times[:-1], chi)


def clark_ocone_gamma(path: BrownianPath) -> float:
    """Left-point Ito sum of chi_0(t, r) . dB_r."""
    chi = clark_ocone_integrand(path).chi
    return float(np.sum(chi * path.increments))


# ---------------------------------------------------------------- dumps

def write_path_csv(path: BrownianPath, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time", "x"] if path.dim == 1 else ["time", "x", "y"])
    for t, p in zip(path.times, path.positions):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in p])


def write_path_binary(path: BrownianPath, fh) -> None:
    """Little-endian float64 records (time, x[, y]), one per grid point, no header."""
    rec = np.column_stack([path.times, path.positions]).astype("<f8")
    fh.write(rec.tobytes())


def read_path_binary(fh, dim: int, t_end: float) -> BrownianPath:
    rec = np.frombuffer(fh.read(), dtype="<f8").reshape(-1, dim + 1)
    return BrownianPath(dim, t_end, rec.shape[0] - 1, rec[:, 1:].copy())

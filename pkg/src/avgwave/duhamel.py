"""Free term and first pairing term of the Duhamel expansion of E[phi_hat(t, xi)].

Averaging the second-order Duhamel iterate over the Gaussian potential
leaves one pairing.  With v = s_1 - s_2 the ordered time simplex collapses to

    F_1 = -phi_hat_0(xi) (2 pi)^{-d} int_0^t (t - v) e^{-i|xi|^2 (t-v)/2}
              int R_hat(eps p) e^{-i|xi - p|^2 v/2} dp dv.

The spectral density is a sum of isotropic Gaussians, so the momentum
integral factorizes into one-dimensional integrals per atom and per axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import SchoenbergMeasure, renorm_constant
from .ensemble import EnsembleEstimate
from .profiles import InitialProfile

# R_hat(eps p) / R_hat(0) < 1e-12 beyond |p| = TRUNCATION * lambda / eps
TRUNCATION = math.sqrt(2 * math.log(1e12))


@dataclass(frozen=True)
class DuhamelTerm:
    order: int
    value: complex
    quadrature_error: float = 0.0


def pairing_count(n: int) -> int:
    """Number of perfect matchings of 2n points, (2n - 1)!!."""
    if n < 1:
        raise ValueError("n must be positive")
    return math.prod(range(1, 2 * n, 2))


def free_term(dim: int, t: float, xi, profile: InitialProfile) -> DuhamelTerm:
    return DuhamelTerm(0, profile.free_evolution(_xi(xi, dim), t), 0.0)


def _xi(xi, dim):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (dim,):
        raise ValueError(f"xi must have {dim} components")
    return xi


def _momentum_factor(lam: float, eps: float, xi_k: float, v: np.ndarray, n_nodes: int) -> np.ndarray:
    """int exp(-eps^2 p^2 / (2 lam^2)) exp(-i (xi_k - p)^2 v / 2) dp on the truncated line."""
    cut = TRUNCATION * lam / eps
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    out = np.empty(v.size, complex)
    for i, vi in enumerate(v):
        # about three oscillations of the chirp exp(-i p^2 v / 2) per panel
        oscillations = vi * (cut + abs(xi_k)) ** 2 / (2 * math.pi)
        n_panels = max(4, int(math.ceil(oscillations / 3)))
        edges = np.linspace(-cut, cut, n_panels + 1)
        half = 0.5 * np.diff(edges)
        p = ((0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * nodes[None, :]).ravel()
        wts = (half[:, None] * weights[None, :]).ravel()
        env = np.exp(-0.5 * (eps / lam) ** 2 * p**2) * wts
        out[i] = np.exp(-0.5j * vi * (xi_k - p) ** 2) @ env
    return out


def _time_nodes(t: float, scale: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on panels graded geometrically from v ~ scale up to t.

    The momentum integral behaves like (scale + i v)^{-d/2} near v = 0.
    """
    edges = [0.0] + [e for e in np.geomspace(scale, t, 12) if e < t] + [t] if scale < t else [0.0, t]
    nodes, weights = np.polynomial.legendre.leggauss(n)
    v, wv = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        v.append(0.5 * (b - a) * (nodes + 1) + a)
        wv.append(0.5 * (b - a) * weights)
    return np.concatenate(v), np.concatenate(wv)


def _first_order_raw(m: SchoenbergMeasure, dim: int, eps: float, t: float, xi: np.ndarray,
                     n_time: int, n_mom: int) -> complex:
    v, wv = _time_nodes(t, (eps / m.max_lambda) ** 2, n_time)
    inner = np.zeros(v.size, complex)
    for lam, w in m.atoms:
        acc = (2 * math.pi) ** (dim / 2) * w * lam ** (-dim) * np.ones(v.size, complex)
        for k in range(dim):
            acc = acc * _momentum_factor(lam, eps, xi[k], v, n_mom)
        inner += acc
    xi2 = float(xi @ xi)
    outer = (t - v) * np.exp(-0.5j * xi2 * (t - v))
    return complex(-(2 * math.pi) ** (-dim) * np.sum(wv * outer * inner))


def first_order_term(m: SchoenbergMeasure, dim: int, eps: float, t: float, xi,
                     profile: InitialProfile, n_time: int = 16, n_mom: int = 24) -> DuhamelTerm:
    """First pairing term F_1 by Gauss-Legendre quadrature in time and momentum.

    The reported quadrature error is the change under doubling both rules.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not t > 0:
        raise ValueError("t must be positive")
    xi = _xi(xi, dim)
    if m.is_zero:
        return DuhamelTerm(1, 0j, 0.0)
    phi0 = profile.fourier(xi)
    coarse = _first_order_raw(m, dim, eps, t, xi, n_time, n_mom)
    fine = _first_order_raw(m, dim, eps, t, xi, 2 * n_time, 2 * n_mom)
    return DuhamelTerm(1, complex(phi0 * fine), float(abs(phi0) * abs(fine - coarse)))


def momentum_integral_exact(m: SchoenbergMeasure, dim: int, eps: float, xi, v) -> np.ndarray:
    """Closed form of int R_hat(eps p) exp(-i |xi - p|^2 v / 2) dp (Gaussian integral)."""
    xi = _xi(xi, dim)
    v = np.asarray(v, dtype=float)
    xi2 = float(xi @ xi)
    out = np.zeros(v.shape, complex)
    for lam, w in m.atoms:
        a = (eps / lam) ** 2 + 1j * v
        out += ((2 * math.pi) ** (dim / 2) * w * lam ** (-dim) * (2 * math.pi / a) ** (dim / 2)
                * np.exp(-(v**2) * xi2 / (2 * a) - 0.5j * v * xi2))
    return out


def first_order_term_exact_inner(m: SchoenbergMeasure, dim: int, eps: float, t: float, xi,
                                 profile: InitialProfile, n_time: int = 64) -> complex:
    """F_1 with the momentum integral in closed form (independent check of the quadrature)."""
    xi = _xi(xi, dim)
    v, wv = _time_nodes(t, (eps / m.max_lambda) ** 2, n_time)
    xi2 = float(xi @ xi)
    inner = momentum_integral_exact(m, dim, eps, xi, v)
    outer = (t - v) * np.exp(-0.5j * xi2 * (t - v))
    return complex(-profile.fourier(xi) * (2 * math.pi) ** (-dim) * np.sum(wv * outer * inner))


@dataclass
class WeakCouplingReport:
    couplings: list[float]
    fk: list[EnsembleEstimate]
    free: complex
    first: complex
    residuals: list[float]
    residual_stderr: list[float]
    ratios: list[float]
    ratio_band: tuple[float, float] = (0.15, 0.4)
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        lo, hi = self.ratio_band
        return all(lo <= r <= hi for r in self.ratios)


def weak_coupling_check(m: SchoenbergMeasure, dim: int, eps: float, t: float, xi, profile: InitialProfile,
                        coupling_list, n_paths: int, n_steps: int, seed: int, workers: int = 1,
                        ensemble=None) -> WeakCouplingReport:
    """Second-order residual of the truncated expansion under weights -> c * weights.

    All couplings share one path ensemble, since X_eps is linear in the weights.
    In d=2 the renormalization phase e^{-i C_eps t} also enters at first order
    in c and is added to the truncated expansion.
    """
    from .representation import FKEnsemble

    cs = [float(c) for c in coupling_list]
    if not cs or any(c <= 0 for c in cs):
        raise ValueError("couplings must be positive")
    if any(b >= a for a, b in zip(cs, cs[1:])):
        raise ValueError("couplings must be strictly decreasing")
    xi = _xi(xi, dim)
    ens = ensemble or FKEnsemble.simulate(m, dim, eps, t, n_paths, n_steps, seed, workers)
    free = free_term(dim, t, xi, profile).value
    first = first_order_term(m, dim, eps, t, xi, profile).value
    c1 = renorm_constant(m, dim, eps) if not m.is_zero else 0.0
    ests, res, res_se = [], [], []
    for c in cs:
        est = ens.fk(xi, profile, coupling=c)
        trunc = free + c * first - 1j * c * c1 * t * free
        ests.append(est)
        res.append(abs(est.mean - trunc))
        res_se.append(est.stderr)
    ratios = [res[k + 1] / res[k] for k in range(len(cs) - 1)]
    return WeakCouplingReport(cs, ests, free, first, res, res_se, ratios)

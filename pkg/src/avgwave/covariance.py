"""Schoenberg-class covariances and the deterministic constants built from them.

A covariance in the Schoenberg class is a scale mixture of Gaussians,

    rho(r) = sum_k w_k exp(-(lambda_k r)^2 / 2),

and every quantity the rest of the package needs (the integral of R, its
log-moment, the renormalization constant, the limiting phase rho_d(t), the
spectral density) is a finite sum over the atoms (lambda_k, w_k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import integrate

SQRT_I = complex(1.0, 1.0) / math.sqrt(2.0)
I_POW_3_2 = complex(-1.0, 1.0) / math.sqrt(2.0)

QUAD_RTOL = 1e-8


@dataclass(frozen=True)
class SchoenbergMeasure:
    """Finite atomic measure mu = sum_k w_k delta_{lambda_k}.

    An empty atom list is the zero measure (no potential).
    """

    lambdas: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        w = tuple(float(v) for v in self.weights)
        if len(lam) != len(w):
            raise ValueError("lambdas and weights must have the same length")
        for v in lam:
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"atom scale must be positive and finite, got {v}")
        for v in w:
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"atom weight must be positive and finite, got {v}")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]]) -> "SchoenbergMeasure":
        atoms = list(atoms)
        return cls(tuple(a[0] for a in atoms), tuple(a[1] for a in atoms))

    @classmethod
    def zero(cls) -> "SchoenbergMeasure":
        return cls((), ())

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas, self.weights))

    @property
    def is_zero(self) -> bool:
        return len(self.lambdas) == 0

    @property
    def total_mass(self) -> float:
        return float(sum(self.weights))

    @property
    def max_lambda(self) -> float:
        return max(self.lambdas) if self.lambdas else 0.0

    def scaled(self, factor: float) -> "SchoenbergMeasure":
        """Multiply every weight by ``factor`` (zero gives the zero measure)."""
        if factor == 0:
            return SchoenbergMeasure.zero()
        return SchoenbergMeasure(self.lambdas, tuple(factor * w for w in self.weights))

    def _arrays(self):
        return np.asarray(self.lambdas, dtype=float), np.asarray(self.weights, dtype=float)


def _check_dim(dim: int) -> None:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")


def correlation(m: SchoenbergMeasure, r):
    """rho(r) = sum_k w_k exp(-(lambda_k r)^2/2). Vectorized over ``r``."""
    lam, w = m._arrays()
    r = np.asarray(r, dtype=float)
    out = np.tensordot(w, np.exp(-0.5 * np.multiply.outer(lam**2, r**2)), axes=1) if lam.size else np.zeros_like(r)
    return float(out) if out.ndim == 0 else out


def correlation_complex(m: SchoenbergMeasure, r):
    """rho evaluated at sqrt(i) r, i.e. sum_k w_k exp(-i lambda_k^2 r^2 / 2)."""
    lam, w = m._arrays()
    r = np.asarray(r, dtype=float)
    if not lam.size:
        out = np.zeros(r.shape, dtype=complex)
    else:
        out = np.tensordot(w, np.exp(-0.5j * np.multiply.outer(lam**2, r**2)), axes=1)
    return complex(out) if out.ndim == 0 else out


def rbar(m: SchoenbergMeasure, dim: int) -> float:
    """Integral of R over R^d: (2 pi)^{d/2} sum_k w_k / lambda_k^d."""
    _check_dim(dim)
    lam, w = m._arrays()
    return float((2 * np.pi) ** (dim / 2) * np.sum(w / lam**dim))


def rbar2_prime(m: SchoenbergMeasure) -> float:
    """Planar log-moment 2 pi sum_k w_k log(lambda_k) / lambda_k^2."""
    lam, w = m._arrays()
    return float(2 * np.pi * np.sum(w * np.log(lam) / lam**2))


def renorm_constant(m: SchoenbergMeasure, dim: int, eps: float) -> float:
    """C_eps: zero in d=1, (Rbar_2/pi) log(1/eps) in d=2."""
    _check_dim(dim)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if dim == 1:
        return 0.0
    return rbar(m, 2) / np.pi * math.log(1.0 / eps)


def rho_d(m: SchoenbergMeasure, dim: int, t: float) -> complex:
    """Deterministic exponent multiplying the limit average wave function."""
    _check_dim(dim)
    if t <= 0:
        raise ValueError("t must be positive")
    if dim == 1:
        sqrt_i_pi = math.sqrt(math.pi) * SQRT_I
        return complex(-rbar(m, 1) * (2 * t) ** 1.5 / (3 * sqrt_i_pi))
    r2 = rbar(m, 2)
    r2p = rbar2_prime(m)
    return complex(r2 * (1j * t / (2 * np.pi) * math.log(t / math.e) - t / 4) + r2p * 1j * t / np.pi)


def minus_two_pi_i_pow(dim: int) -> complex:
    """(-2 pi i)^{d/2} on the branch (2 pi)^{d/2} exp(-i pi d / 4)."""
    return (2 * np.pi) ** (dim / 2) * complex(np.exp(-1j * np.pi * dim / 4))


def free_kernel_prefactor(dim: int, tau: float) -> complex:
    """(2 pi i tau)^{-d/2}, the normalization of the free Schrodinger kernel."""
    return (2 * np.pi * tau) ** (-dim / 2) * complex(np.exp(-1j * np.pi * dim / 4))


@dataclass(frozen=True)
class ModelConstants:
    dim: int
    rbar: float
    rbar2_prime: float
    sqrt_i: complex = SQRT_I
    i_pow_3_2: complex = I_POW_3_2
    i_pow_3d_2: complex = I_POW_3_2

    @classmethod
    def from_measure(cls, m: SchoenbergMeasure, dim: int) -> "ModelConstants":
        _check_dim(dim)
        return cls(
            dim=dim,
            rbar=rbar(m, dim),
            rbar2_prime=rbar2_prime(m) if dim == 2 else 0.0,
            i_pow_3d_2=I_POW_3_2 if dim == 1 else -1j,
        )


def _check_tau_t(tau: float, t: float) -> None:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


def mean_x_tau(dim: int, tau: float, t: float) -> complex:
    """E_B of the free-kernel self-intersection functional, in closed form.

    The double integral over the simplex reduces to
    (2 pi i)^{-d/2} int_0^t (t-u) (tau - i u)^{-d/2} du, and both dimensions
    have elementary antiderivatives.
    """
    _check_dim(dim)
    _check_tau_t(tau, t)
    if dim == 1:
        # w = tau - i u:  int (t-u) w^{-1/2} du = 2i (t + i tau) w^{1/2} + (2/3) w^{3/2}
        def antider(w):
            sw = np.sqrt(w)
            return 2j * (t + 1j * tau) * sw + (2.0 / 3.0) * w * sw

        val = antider(complex(tau, -t)) - antider(complex(tau, 0.0))
        return complex(free_kernel_prefactor(1, 1.0) * val)
    ratio = t / tau
    at = math.atan(ratio)
    lg = math.log1p(ratio * ratio)
    re_part = t * at - 0.5 * tau * lg  # int (t-u) tau/(tau^2+u^2)
    im_part = 0.5 * t * lg - t + tau * at  # int (t-u) u/(tau^2+u^2)
    return complex(im_part / (2 * np.pi), -re_part / (2 * np.pi))


def mean_x_tau_quad(dim: int, tau: float, t: float, rtol: float = 1e-10) -> complex:
    """Adaptive-quadrature evaluation of the same single integral."""
    _check_dim(dim)
    _check_tau_t(tau, t)
    pref = free_kernel_prefactor(dim, 1.0)
    if dim == 1:
        # u = v^2 removes the tau -> 0 endpoint singularity
        def f(v):
            return (t - v * v) * (tau - 1j * v * v) ** -0.5 * 2 * v

        lo, hi = 0.0, math.sqrt(t)
        brk = [math.sqrt(b) for b in np.geomspace(tau, t, 12)[:-1] if b < t]
    else:
        def f(u):
            return (t - u) / (tau - 1j * u)

        lo, hi = 0.0, t
        brk = [b for b in np.geomspace(tau, t, 24)[:-1] if b < t]
    edges = [lo] + sorted(set(brk)) + [hi]
    total = 0j
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, _ = integrate.quad(f, a, b, complex_func=True, epsrel=rtol, epsabs=0.0, limit=200)
        total += val
    return complex(pref * total)


def lemma41_limit(m: SchoenbergMeasure, dim: int, eps: float, t: float) -> complex:
    """Finite-eps constant in front of the centred Feynman-Kac average.

    -(-2 pi i)^{d/2} sum_k w_k lambda_k^{-d} conj(E X_{eps^2/lambda_k^2}(t)) - i C_eps t,
    which tends to rho_d(t) as eps -> 0.
    """
    _check_dim(dim)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if t <= 0:
        raise ValueError("t must be positive")
    acc = 0j
    for lam, w in m.atoms:
        acc += w * lam ** (-dim) * np.conj(mean_x_tau(dim, eps**2 / lam**2, t))
    return complex(-minus_two_pi_i_pow(dim) * acc - 1j * renorm_constant(m, dim, eps) * t)


def spectral_density(m: SchoenbergMeasure, dim: int, p):
    """Fourier transform of R: (2 pi)^{d/2} sum_k w_k lambda_k^{-d} exp(-|p|^2/(2 lambda_k^2)).

    ``p`` is a d-vector or an array whose last axis has length d; for dim=1 a
    scalar or any array of scalars is accepted as well.
    """
    _check_dim(dim)
    p = np.asarray(p, dtype=float)
    if dim == 1 and (p.ndim == 0 or p.shape[-1] != 1):
        p2 = p**2
    else:
        if p.shape[-1] != dim:
            raise ValueError("last axis of p must have length dim")
        p2 = np.sum(p**2, axis=-1)
    return spectral_density_sq(m, dim, p2)


def spectral_density_sq(m: SchoenbergMeasure, dim: int, p2):
    """Spectral density as a function of |p|^2 (saves a sqrt on lattices)."""
    lam, w = m._arrays()
    p2 = np.asarray(p2, dtype=float)
    out = np.zeros_like(p2)
    for lk, wk in zip(lam, w):
        out = out + wk * lk ** (-dim) * np.exp(-p2 / (2 * lk * lk))
    out = (2 * np.pi) ** (dim / 2) * out
    return float(out) if out.ndim == 0 else out


def oscillatory_kernel_integral(tau: float, lam: float, t: float) -> complex:
    """int_0^t (i tau + s)^{-3/2} exp(-lam/(i tau + s)) ds by adaptive quadrature.

    This is the time integral inside the one-dimensional Clark-Ocone
    integrand; its modulus is bounded by C / sqrt(lam) uniformly in tau and t.
    """
    _check_tau_t(tau, t)
    if lam <= 0:
        raise ValueError("lam must be positive")

    def f(s):
        z = 1j * tau + s
        return z**-1.5 * np.exp(-lam / z)

    edges = sorted({0.0, t} | {b for b in (tau, lam, 10 * tau, 0.1 * lam) if 0 < b < t})
    total = 0j
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, a, b, complex_func=True, epsrel=1e-10, epsabs=1e-14, limit=500)
        total += val
    return complex(total)

"""Gaussian potentials on a periodic box and split-step Schrodinger solves.

The torus [-L/2, L/2)^d carries N points per side.  Discrete Fourier values
are normalized to approximate the whole-space transform,
phi_hat(p) = h^d sum_x phi(x) exp(-i p.x), so that
L^{-d} sum_p |phi_hat(p)|^2 = h^d sum_x |phi(x)|^2.
"""
from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import fft as sfft

from .covariance import SchoenbergMeasure, rbar, renorm_constant, spectral_density_sq
from .ensemble import EnsembleEstimate, deterministic_map, substream_seed
from .profiles import InitialProfile

PHASE_RULE = 0.1
WRAP_TOL = 1e-6
RESOLUTION_FACTOR = 4.0


class SnapWarning(UserWarning):
    """A requested frequency was moved to the nearest lattice frequency."""


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def bin(self) -> float:
        """Spacing of the dual lattice, 2 pi / L."""
        return 2 * math.pi / self.L

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.N)

    @cached_property
    def freqs(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.N, self.h)

    @cached_property
    def p2(self) -> np.ndarray:
        """|p|^2 on the full FFT lattice."""
        f2 = self.freqs**2
        return f2 if self.dim == 1 else f2[:, None] + f2[None, :]

    @cached_property
    def p2_half(self) -> np.ndarray:
        """|p|^2 on the real-FFT half lattice."""
        fr = 2 * math.pi * np.fft.rfftfreq(self.N, self.h)
        return fr**2 if self.dim == 1 else (self.freqs**2)[:, None] + (fr**2)[None, :]

    def coords(self) -> list[np.ndarray]:
        return [self.axis] * self.dim

    def snap(self, xi) -> tuple[np.ndarray, tuple[int, ...], float]:
        """Nearest lattice frequency, its FFT index and the shift measured in bins."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape != (self.dim,):
            raise ValueError(f"xi must have {self.dim} components")
        k = np.rint(xi / self.bin).astype(int)
        if np.any(k < -self.N // 2) or np.any(k >= self.N // 2):
            raise ValueError(f"xi={xi} lies outside the lattice frequency range")
        snapped = k * self.bin
        shift = float(np.max(np.abs(xi - snapped)) / self.bin)
        return snapped, tuple(int(v) % self.N for v in k), shift

    def resolves(self, m: SchoenbergMeasure, eps: float) -> bool:
        return m.is_zero or self.h <= eps / (RESOLUTION_FACTOR * m.max_lambda) * (1 + 1e-12)


@dataclass(frozen=True, eq=False)
class FieldSample:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)
    eps: float
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: TorusGrid
    amplitudes: np.ndarray = field(repr=False)
    time: float = 0.0

    @classmethod
    def from_profile(cls, profile: InitialProfile, grid: TorusGrid) -> "WaveField":
        if profile.dim != grid.dim:
            raise ValueError("profile and grid dimensions differ")
        return cls(grid, profile.values(grid.coords()), 0.0)

    def norm(self) -> float:
        """Discrete L^2 norm h^{d/2} ||amplitudes||."""
        return self.grid.h ** (self.grid.dim / 2) * float(np.linalg.norm(self.amplitudes))

    def fourier_lattice(self) -> np.ndarray:
        """phi_hat on the full FFT lattice."""
        g = self.grid
        shift = np.exp(-1j * g.freqs * g.axis[0])
        out = sfft.fftn(self.amplitudes) * g.h**g.dim
        if g.dim == 1:
            return out * shift
        return out * shift[:, None] * shift[None, :]

    def fourier_at(self, xi) -> complex:
        """phi_hat at a lattice frequency, by direct separable summation."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        g = self.grid
        e = [np.exp(-1j * xi[k] * g.axis) for k in range(g.dim)]
        if g.dim == 1:
            s = e[0] @ self.amplitudes
        else:
            s = e[0] @ self.amplitudes @ e[1]
        return complex(g.h**g.dim * s)

    def fourier_mass(self) -> float:
        """L^{-d} sum_p |phi_hat(p)|^2, the Riemann sum of int |phi_hat|^2 dxi / (2 pi)^d."""
        return float(np.sum(np.abs(self.fourier_lattice()) ** 2)) / self.grid.L**self.grid.dim


@lru_cache(maxsize=16)
def _spectral_amplitude(grid: TorusGrid, atoms: tuple, eps: float) -> np.ndarray:
    m = SchoenbergMeasure.from_atoms(atoms)
    dens = spectral_density_sq(m, grid.dim, eps * eps * grid.p2_half)
    return np.sqrt(dens / grid.h**grid.dim)


def sample_potential(m: SchoenbergMeasure, grid: TorusGrid, eps: float, seed: int) -> FieldSample:
    """Stationary Gaussian field with the periodized covariance R_eps(x) = eps^{-d} R(x/eps).

    White noise on the lattice is filtered in Fourier space by
    sqrt(R_hat(eps p) / h^d); the real FFT keeps the result exactly real.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not grid.resolves(m, eps):
        raise ValueError(
            f"grid spacing h={grid.h:.4g} exceeds eps/(4 max lambda)={eps / (RESOLUTION_FACTOR * m.max_lambda):.4g}")
    if m.is_zero:
        return FieldSample(grid, np.zeros(grid.shape), float(eps), seed)
    noise = np.random.default_rng(seed).standard_normal(grid.shape)
    amp = _spectral_amplitude(grid, tuple(m.atoms), float(eps))
    values = sfft.irfftn(sfft.rfftn(noise) * amp, s=grid.shape)
    return FieldSample(grid, values, float(eps), seed)


def phase_rule_dt(V: FieldSample | None, c_shift: float) -> float:
    vmax = abs(c_shift) if V is None else float(np.max(np.abs(V.values + c_shift)))
    return PHASE_RULE / vmax if vmax > 0 else math.inf


def split_step_evolve(w: WaveField, V: FieldSample | None, c_shift: float, t_end: float, dt: float,
                      potential_scale: float = 1.0) -> WaveField:
    """Strang splitting up to time ``t_end``; the step is shrunk so it divides the interval.

    The potential acting is potential_scale * V + c_shift.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if V is not None and V.grid != w.grid:
        raise ValueError("potential and wave field live on different grids")
    span = t_end - w.time
    if span < 0:
        raise ValueError("t_end precedes the current time")
    if span == 0:
        return w
    n = max(1, math.ceil(span / dt - 1e-9))
    h = span / n
    pot = c_shift if V is None else potential_scale * V.values + c_shift
    half = np.exp(-0.5j * h * np.asarray(pot, dtype=float))
    full = half * half
    kin = np.exp(-0.5j * h * w.grid.p2)
    psi = w.amplitudes * half
    for i in range(n):
        psi = sfft.ifftn(sfft.fftn(psi, overwrite_x=True) * kin, overwrite_x=True)
        psi *= full if i < n - 1 else half
    return WaveField(w.grid, psi, float(t_end))


def check_box(profile: InitialProfile, grid: TorusGrid, t: float) -> None:
    if profile.kind != "gaussian-packet":
        raise ValueError("PDE solves need a gaussian-packet profile")
    lost = profile.mass_outside_box(0.5 * grid.L, t)
    if lost > WRAP_TOL:
        raise ValueError(f"box too small: free mass outside the box at t={t} is {lost:.2e} > {WRAP_TOL:g}")


def pde_tag(dim: int, eps: float, t: float, grid: TorusGrid, kind: str = "pde") -> str:
    return f"{kind}|d={dim}|eps={eps!r}|t={t!r}|L={grid.L!r}|N={grid.N}"


@dataclass(frozen=True)
class _FieldSolver:
    m: SchoenbergMeasure
    eps: float
    t: float
    grid: TorusGrid
    profile: InitialProfile
    dt: float | None
    seed: int
    tag: str
    c_shift: float
    potential_scale: float
    xis: tuple
    full_lattice: bool

    def __call__(self, j: int) -> np.ndarray:
        V = sample_potential(self.m, self.grid, self.eps, substream_seed(self.seed, self.tag, j))
        if self.dt is not None:
            step = self.dt
        else:
            scaled = FieldSample(V.grid, self.potential_scale * V.values, V.eps)
            step = min(phase_rule_dt(scaled, self.c_shift), self.t)
        w = split_step_evolve(WaveField.from_profile(self.profile, self.grid), V, self.c_shift, self.t,
                              step, self.potential_scale)
        if self.full_lattice:
            return w.fourier_lattice()
        return np.array([w.fourier_at(x) for x in self.xis])


def ensemble_average_fourier(m, dim, eps, t, xi_list, profile, grid: TorusGrid, n_fields: int,
                             dt: float | None = None, seed: int = 0, workers: int = 1,
                             c_shift: float | None = None) -> list[EnsembleEstimate]:
    """E[phi_hat_eps(t, xi)] over independent potentials, xi snapped to the lattice.

    ``c_shift`` defaults to the renormalization constant C_eps; ``dt=None``
    applies the rule dt * max|V + C| <= 0.1 to each realization.
    """
    if grid.dim != dim:
        raise ValueError("grid dimension differs from dim")
    if not (eps > 0 and t > 0):
        raise ValueError("eps and t must be positive")
    if n_fields < 2:
        raise ValueError("n_fields must be at least 2")
    check_box(profile, grid, t)
    snapped = []
    for xi in xi_list:
        s, _, shift = grid.snap(xi)
        if shift > 1e-9:
            warnings.warn(f"xi={list(np.atleast_1d(xi))} snapped to {list(s)} ({shift:.3f} bins)", SnapWarning,
                          stacklevel=2)
        snapped.append(tuple(s))
    if c_shift is None:
        c_shift = 0.0 if m.is_zero else renorm_constant(m, dim, eps)
    solver = _FieldSolver(m, float(eps), float(t), grid, profile, dt, int(seed), pde_tag(dim, eps, t, grid),
                          float(c_shift), 1.0, tuple(snapped), False)
    if m.is_zero:
        vals = solver(0)
        return [EnsembleEstimate.exact(v, n_fields) for v in vals]
    samples = np.stack(deterministic_map(solver, n_fields, workers))
    return [EnsembleEstimate.from_samples(samples[:, i]) for i in range(len(snapped))]


def homogenized_solution(m: SchoenbergMeasure, t: float, xi, profile: InitialProfile) -> complex:
    """phi_hat_0(xi) exp(-i t (|xi|^2/2 - Rbar_2/pi)), the planar homogenized limit."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (2,):
        raise ValueError("homogenization is planar: xi needs two components")
    r2 = rbar(m, 2) if not m.is_zero else 0.0
    return complex(profile.fourier(xi) * np.exp(-1j * t * (0.5 * xi @ xi - r2 / math.pi)))


def homogenization_coupling(eps: float) -> float:
    """Factor |log eps|^{-1/2} turning V_eps into the homogenization-scaled potential."""
    return 1.0 / math.sqrt(abs(math.log(eps)))


@dataclass(frozen=True)
class _HomogenizationSolver:
    inner: _FieldSolver
    phase: np.ndarray = field(repr=False)
    phi0_hat: np.ndarray = field(repr=False)

    def __call__(self, j: int) -> np.ndarray:
        got = self.inner(j)
        diff = got - self.phi0_hat * self.phase
        return np.array(float(np.sum(np.abs(diff) ** 2)) / self.inner.grid.L**2)


def homogenization_error(m, eps, t, profile, grid: TorusGrid, n_fields: int, dt: float | None = None,
                         seed: int = 0, workers: int = 1) -> EnsembleEstimate:
    """E int |phi_hat_eps(t) - phi_hat_hom(t)|^2 dxi / (2 pi)^2 on the lattice.

    The potential is |log eps|^{-1/2} V_eps with no renormalization shift;
    phi_hat_hom uses the discrete transform of phi_0 so that the zero
    measure gives an error at round-off level.
    """
    if grid.dim != 2:
        raise ValueError("homogenization error is planar")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if n_fields < 2:
        raise ValueError("n_fields must be at least 2")
    check_box(profile, grid, t)
    r2 = rbar(m, 2) if not m.is_zero else 0.0
    phase = np.exp(-1j * t * (0.5 * grid.p2 - r2 / math.pi))
    phi0_hat = WaveField.from_profile(profile, grid).fourier_lattice()
    inner = _FieldSolver(m, float(eps), float(t), grid, profile, dt, int(seed),
                         pde_tag(2, eps, t, grid, "hom"), 0.0, homogenization_coupling(eps), (), True)
    solver = _HomogenizationSolver(inner, phase, phi0_hat)
    samples = np.array(deterministic_map(solver, n_fields, workers), dtype=float)
    return EnsembleEstimate.from_samples(samples, warn=False)


# ------------------------------------------------------------------ snapshots

_MAGIC = b"AWSNAP1\0"
_DTYPES = {np.dtype("<f8"): b"<f8\0\0\0\0\0", np.dtype("<c16"): b"<c16\0\0\0\0"}


def write_snapshot_binary(values: np.ndarray, grid: TorusGrid, fh) -> None:
    """Header: 8-byte magic, int32 dim, int32 N, float64 L, 8-byte dtype code; then row-major data."""
    arr = np.asarray(values)
    dt = np.dtype("<c16") if np.iscomplexobj(arr) else np.dtype("<f8")
    if arr.shape != grid.shape:
        raise ValueError("array shape does not match the grid")
    fh.write(_MAGIC + struct.pack("<iid", grid.dim, grid.N, grid.L) + _DTYPES[dt])
    fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def read_snapshot_binary(fh) -> tuple[np.ndarray, TorusGrid]:
    head = fh.read(32)
    if len(head) != 32 or head[:8] != _MAGIC:
        raise ValueError("not a snapshot file")
    dim, n, length = struct.unpack("<iid", head[8:24])
    code = head[24:32].rstrip(b"\0").decode()
    grid = TorusGrid(dim, length, n)
    data = np.frombuffer(fh.read(), dtype=np.dtype(code)).reshape(grid.shape)
    return data.copy(), grid


def write_snapshot_csv(values: np.ndarray, grid: TorusGrid, fh) -> None:
    arr = np.asarray(values)
    cplx = np.iscomplexobj(arr)
    w = csv.writer(fh, lineterminator="\n")
    names = ["x"] if grid.dim == 1 else ["x", "y"]
    w.writerow(names + (["re", "im"] if cplx else ["value"]))
    for idx in np.ndindex(arr.shape):
        pos = [repr(float(grid.axis[i])) for i in idx]
        v = arr[idx]
        w.writerow(pos + ([repr(float(v.real)), repr(float(v.imag))] if cplx else [repr(float(v))]))

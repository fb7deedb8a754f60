"""Initial wave profiles phi_0 with their Fourier transforms.

Fourier convention: phi_hat(xi) = int phi(x) exp(-i xi.x) dx.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class InitialProfile:
    """Gaussian packet exp(-|x-x0|^2/(2 sigma^2) + i k0.x), or a table of phi_hat values."""

    kind: str = "gaussian-packet"
    dim: int = 1
    center: tuple[float, ...] = (0.0,)
    width: float = 1.0
    wavevector: tuple[float, ...] = (0.0,)
    table: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.kind == "gaussian-packet":
            if len(self.center) != self.dim or len(self.wavevector) != self.dim:
                raise ValueError("center and wavevector need dim components")
            if not self.width > 0:
                raise ValueError("width must be positive")
        elif self.kind == "tabulated":
            if not self.table:
                raise ValueError("tabulated profile needs at least one entry")
            tab = {}
            for k, v in self.table.items():
                key = _key(k, self.dim)
                if not np.isfinite(complex(v)):
                    raise ValueError(f"non-finite table entry at xi={key}")
                tab[key] = complex(v)
            object.__setattr__(self, "table", tab)
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def gaussian(cls, dim: int, width: float = 1.0, center=None, wavevector=None) -> "InitialProfile":
        center = tuple(float(c) for c in (center if center is not None else (0.0,) * dim))
        wavevector = tuple(float(c) for c in (wavevector if wavevector is not None else (0.0,) * dim))
        return cls("gaussian-packet", dim, center, float(width), wavevector)

    @classmethod
    def tabulated(cls, dim: int, table: dict) -> "InitialProfile":
        return cls("tabulated", dim, (0.0,) * dim, 1.0, (0.0,) * dim, dict(table))

    @property
    def is_real_fourier(self) -> bool:
        """phi_hat real-valued (true for centred, unmodulated packets)."""
        if self.kind == "tabulated":
            return all(v.imag == 0 for v in self.table.values())
        return not any(self.center) and not any(self.wavevector)

    def fourier(self, xi) -> complex:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape != (self.dim,):
            raise ValueError(f"xi must have {self.dim} components")
        if self.kind == "tabulated":
            key = _key(xi, self.dim)
            if key not in self.table:
                raise KeyError(f"profile table has no entry at xi={key}")
            return self.table[key]
        s2 = self.width**2
        dk = xi - np.asarray(self.wavevector)
        return complex((2 * math.pi * s2) ** (self.dim / 2)
                       * np.exp(-0.5 * s2 * dk @ dk - 1j * dk @ np.asarray(self.center)))

    def free_evolution(self, xi, t: float) -> complex:
        """phi_hat_0(xi) exp(-i |xi|^2 t / 2)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return self.fourier(xi) * complex(np.exp(-0.5j * t * (xi @ xi)))

    def values(self, coords: list[np.ndarray], t: float = 0.0) -> np.ndarray:
        """phi(t, x) under free evolution on the tensor grid spanned by ``coords``."""
        if self.kind != "gaussian-packet":
            raise ValueError("real-space values need a gaussian-packet profile")
        mesh = np.meshgrid(*coords, indexing="ij")
        s2 = self.width**2
        a = s2 + 1j * t
        k0 = np.asarray(self.wavevector)
        out = np.full(mesh[0].shape, (s2 / a) ** (self.dim / 2) * np.exp(-0.5j * t * (k0 @ k0)), dtype=complex)
        for xk, ck, kk in zip(mesh, self.center, k0):
            out *= np.exp(1j * kk * xk - (xk - ck - kk * t) ** 2 / (2 * a))
        return out

    def norm_sq(self) -> float:
        """||phi_0||^2 in L^2(R^d)."""
        if self.kind != "gaussian-packet":
            raise ValueError("norm needs a gaussian-packet profile")
        return (math.pi * self.width**2) ** (self.dim / 2)

    def mass_outside_box(self, half_side: float, t: float) -> float:
        """Fraction of the freely evolved mass outside [-half_side, half_side]^d."""
        if self.kind != "gaussian-packet":
            raise ValueError("needs a gaussian-packet profile")
        s2 = self.width**2
        # |phi(t)|^2 is Gaussian with per-axis variance (s2 + t^2/s2)/2
        sd = math.sqrt(0.5 * (s2 + t * t / s2))
        inside = 1.0
        for c, k in zip(self.center, self.wavevector):
            m = c + k * t
            p = 0.5 * (math.erf((half_side - m) / (sd * math.sqrt(2))) + math.erf((half_side + m) / (sd * math.sqrt(2))))
            inside *= p
        return max(0.0, 1.0 - inside)


def _key(xi, dim: int) -> tuple[float, ...]:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (dim,):
        raise ValueError(f"xi must have {dim} components")
    return tuple(round(float(v), 12) for v in xi)

"""Seed substreams, ensemble estimates and a deterministic parallel map."""
from __future__ import annotations

import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

BLOWUP_RATIO = 10.0


class VarianceWarning(UserWarning):
    """Sample spread is large compared with the mean modulus."""


def tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def substream_seed(master: int, tag: str, j: int) -> int:
    """64-bit seed for sample ``j`` of the ensemble labelled ``tag``."""
    ss = np.random.SeedSequence(int(master), spawn_key=(tag_key(tag), int(j)))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class EnsembleEstimate:
    mean: complex
    stderr: float
    n_samples: int
    flagged: bool = False

    @classmethod
    def from_samples(cls, values, scale: complex = 1.0, warn: bool = True) -> "EnsembleEstimate":
        """Mean and standard error of ``scale * values`` (indexed pairwise reduction)."""
        v = np.asarray(values)
        n = v.shape[0]
        if n < 2:
            raise ValueError("need at least two samples for a standard error")
        mean = np.sum(v) / n
        dev = np.abs(v - mean) ** 2
        sd = math.sqrt(float(np.sum(dev)) / (n - 1))
        s = abs(scale)
        flagged = sd > BLOWUP_RATIO * abs(mean)
        if flagged and warn:
            warnings.warn(
                f"sample std {sd:.3g} exceeds {BLOWUP_RATIO:g}x the mean modulus {abs(mean):.3g}",
                VarianceWarning,
                stacklevel=2,
            )
        return cls(complex(scale * mean), float(s * sd / math.sqrt(n)), n, bool(flagged))

    @classmethod
    def exact(cls, value: complex, n: int) -> "EnsembleEstimate":
        return cls(complex(value), 0.0, n)

    def scaled(self, factor: complex) -> "EnsembleEstimate":
        return EnsembleEstimate(self.mean * factor, self.stderr * abs(factor), self.n_samples, self.flagged)


def combined_stderr(a: EnsembleEstimate, b: EnsembleEstimate) -> float:
    return math.hypot(a.stderr, b.stderr)


def compatible(a: EnsembleEstimate, b: EnsembleEstimate, k: float = 3.0, rtol: float = 1e-9) -> bool:
    """|a - b| within k combined standard errors (plus a round-off floor for exact routes)."""
    floor = rtol * max(abs(a.mean), abs(b.mean))
    return abs(a.mean - b.mean) <= k * combined_stderr(a, b) + floor


def _run_chunk(args):
    fn, indices = args
    return [fn(j) for j in indices]


def deterministic_map(fn: Callable[[int], np.ndarray], n: int, workers: int = 1,
                      chunk: int | None = None) -> list:
    """[fn(0), ..., fn(n-1)] in index order, optionally across processes.

    ``fn`` must be a picklable pure function of the sample index; the result
    list does not depend on ``workers``.
    """
    if workers <= 1 or n < 2:
        return [fn(j) for j in range(n)]
    chunk = chunk or max(1, n // (4 * workers))
    blocks = [range(s, min(n, s + chunk)) for s in range(0, n, chunk)]
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_run_chunk, [(fn, b) for b in blocks]):
            out.extend(res)
    return out


def stack(results: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack([np.asarray(r) for r in results])

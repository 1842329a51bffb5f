"""Azimuth-averaged lattice-effect function for walks ending on a curved surface.

For a walk from the origin and a plane through the origin with unit normal
n(theta, phi), the walk stays strictly on the side <x, n> < 0 for theta in a
single (possibly empty) interval. Averaging the indicator of that interval
over walks and uniform phi estimates l_hat(theta) up to a constant, which is
fixed by normalising the table to mean one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numba as nb
import numpy as np

from .lattice import FULL
from .pivot import ChainConfig, PivotChain, chain_seed, sample


class LatticeEffectWarning(UserWarning):
    pass


@nb.njit(cache=True)
def _interval(walk, phi):
    cp = math.cos(phi)
    sp = math.sin(phi)
    lo = 0.0
    hi = math.pi
    for i in range(1, walk.shape[0]):
        a = walk[i, 0] * cp + walk[i, 1] * sp
        b = float(walk[i, 2])
        # a sin(t) + b cos(t) < 0 on [0, pi] with alpha = atan2(b, a):
        # alpha < 0 -> [0, -alpha), otherwise (pi - alpha, pi]
        alpha = math.atan2(b, a)
        if alpha < 0:
            if -alpha < hi:
                hi = -alpha
        elif math.pi - alpha > lo:
            lo = math.pi - alpha
        if lo >= hi:
            return 0.0, 0.0
    return lo, hi


def theta_interval(walk, phi: float) -> Optional[tuple[float, float]]:
    """Polar angles theta in [0, pi] for which <walk[i], n(theta, phi)> < 0 for all i >= 1.

    Returns ``(lo, hi)`` or None when empty. Endpoint membership is not
    tracked (boundaries have measure zero).
    """
    lo, hi = _interval(np.asarray(walk, dtype=np.int64), float(phi))
    return None if lo >= hi else (lo, hi)


@nb.njit(cache=True)
def interval_kernel(walk, params, s, row):
    """params[s] is the azimuth for sample s; row = [lo, hi]."""
    lo, hi = _interval(walk, params[s])
    row[0] = lo
    row[1] = hi


@dataclass
class LatticeEffectTable:
    edges: np.ndarray      # radians, len bins + 1
    values: np.ndarray
    n_steps: int = 0
    n_samples: int = 0
    flagged: bool = False

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def lookup(self, theta):
        """Linear interpolation between bin centres, constant beyond the end centres."""
        return np.interp(theta, self.centers, self.values)

    @classmethod
    def uniform(cls, bins: int, value: float = 1.0) -> "LatticeEffectTable":
        return cls(np.linspace(0, np.pi, bins + 1), np.full(bins, float(value)))

    def to_text(self, comments: tuple[str, ...] = ()) -> str:
        lines = [f"# {c}" for c in comments]
        lines.append(f"# n_steps={self.n_steps} samples={self.n_samples} bins={self.values.size}")
        lines.append("theta_center_deg,value")
        lines += [f"{c!r},{v!r}" for c, v in zip(np.degrees(self.centers).tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"

    def to_csv(self, path, comments: tuple[str, ...] = ()) -> None:
        Path(path).write_text(self.to_text(comments))

    @classmethod
    def from_csv(cls, path) -> "LatticeEffectTable":
        meta = {}
        rows = []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            elif line and not line.startswith("theta"):
                c, v = line.split(",")
                rows.append((float(c), float(v)))
        centers = np.radians([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
        if centers.size < 2:
            raise ValueError(f"{path}: lattice-effect table needs at least two bins")
        width = np.diff(centers).mean()
        edges = np.concatenate([[centers[0] - width / 2], centers + width / 2])
        return cls(edges, values, int(meta.get("n_steps", 0)), int(meta.get("samples", 0)),
                   bool(np.any(values <= 0)))


def accumulate_intervals(intervals: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Per-bin count of intervals ``(lo, hi)`` containing the bin centre."""
    lo, hi = intervals[:, 0], intervals[:, 1]
    keep = lo < hi
    start = np.searchsorted(centers, lo[keep], side="right")
    stop = np.searchsorted(centers, hi[keep], side="left")
    diff = np.bincount(start, minlength=centers.size + 1) - np.bincount(stop, minlength=centers.size + 1)
    return np.cumsum(diff[:-1]).astype(np.float64)


def estimate_lhat(
    n_steps: int,
    n_samples: int,
    bins: int = 180,
    stride: int = 10,
    seed: int = 0,
    chain_id: int = 0,
    warmup: Optional[int] = None,
    chunk: int = 100_000,
) -> LatticeEffectTable:
    """Monte Carlo estimate of l_hat on ``bins`` equal theta bins, normalised to mean 1."""
    edges = np.linspace(0.0, np.pi, bins + 1)
    counts = lattice_effect_counts(n_steps, n_samples, edges, stride, seed, chain_id, warmup, chunk)
    return table_from_counts(edges, counts, n_steps, n_samples)


def lattice_effect_counts(n_steps, n_samples, edges, stride=10, seed=0, chain_id=0,
                          warmup=None, chunk=100_000) -> np.ndarray:
    """Raw per-bin counts from one chain; counts from several chains simply add."""
    centers = 0.5 * (edges[:-1] + edges[1:])
    cfg = ChainConfig(n_steps, FULL, stride=stride, warmup=warmup, seed=seed, chain_id=chain_id)
    chain = PivotChain(cfg)
    chain.advance(cfg.warmup_iterations)
    # azimuths come from a stream independent of the chain's own
    phi_rng = np.random.Generator(np.random.PCG64(chain_seed(seed, chain_id).spawn(1)[0]))
    counts = np.zeros(centers.size)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        phis = phi_rng.uniform(0.0, 2 * np.pi, m)
        rows, _ = sample(cfg, m, interval_kernel, phis, 2, chain=chain, warmup=False)
        counts += accumulate_intervals(rows, centers)
        done += m
    return counts


def table_from_counts(edges, counts, n_steps, n_samples) -> LatticeEffectTable:
    counts = np.asarray(counts, dtype=np.float64)
    flagged = bool(np.any(counts == 0))
    if flagged:
        warnings.warn(
            f"{int(np.sum(counts == 0))} lattice-effect bins are empty; increase the sample count",
            LatticeEffectWarning,
        )
    mean = counts.mean()
    values = counts / mean if mean > 0 else counts
    return LatticeEffectTable(np.asarray(edges), values, n_steps, n_samples, flagged)

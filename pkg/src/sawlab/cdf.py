"""Weighted empirical CDFs with batch-means error bars.

The estimate at a grid angle t is sum(w * [theta <= t]) / sum(w). Samples are
grouped into contiguous batches; for each batch we keep the weighted
histogram against the grid, so accumulators from independent chains merge by
concatenating batches. The error bar is twice the batch-means standard error
of the ratio estimator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass
class EmpiricalCdf:
    grid: np.ndarray        # radians
    cdf: np.ndarray
    err_2sigma: np.ndarray
    n_samples: int
    total_weight: float
    n_batches: int

    @property
    def grid_deg(self) -> np.ndarray:
        return np.degrees(self.grid)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d array")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] > np.pi + 1e-12:
        raise ValueError("grid must lie within [0, pi]")
    return grid


class CdfAccumulator:
    """Streaming accumulator; ``batch_size`` counts emitted samples per batch."""

    def __init__(self, grid, batch_size: int):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.grid = _check_grid(grid)
        self.batch_size = int(batch_size)
        self._hists: list[np.ndarray] = []
        self._weights: list[float] = []
        self._counts: list[int] = []
        self._pending_theta: list[np.ndarray] = []
        self._pending_weight: list[np.ndarray] = []
        self._n_pending = 0

    def add(self, theta: float, weight: float) -> None:
        self.add_many(np.array([theta]), np.array([weight]))

    def add_many(self, theta, weight) -> None:
        theta = np.asarray(theta, dtype=np.float64).ravel()
        weight = np.asarray(weight, dtype=np.float64).ravel()
        if theta.shape != weight.shape:
            raise ValueError("theta and weight differ in length")
        if np.any(~(weight > 0)):
            raise ValueError("weights must be positive")
        self._pending_theta.append(theta)
        self._pending_weight.append(weight)
        self._n_pending += theta.size
        if self._n_pending >= self.batch_size:
            th = np.concatenate(self._pending_theta)
            w = np.concatenate(self._pending_weight)
            n_full = th.size // self.batch_size * self.batch_size
            for lo in range(0, n_full, self.batch_size):
                self._close(th[lo:lo + self.batch_size], w[lo:lo + self.batch_size])
            self._pending_theta = [th[n_full:]]
            self._pending_weight = [w[n_full:]]
            self._n_pending = th.size - n_full

    def add_batch(self, theta, weight) -> None:
        """Record one complete batch directly, bypassing ``batch_size``."""
        self.flush()
        theta = np.asarray(theta, dtype=np.float64).ravel()
        weight = np.asarray(weight, dtype=np.float64).ravel()
        if theta.shape != weight.shape or theta.size == 0:
            raise ValueError("a batch needs matching, nonempty theta and weight")
        if np.any(~(weight > 0)):
            raise ValueError("weights must be positive")
        self._close(theta, weight)

    def _close(self, theta: np.ndarray, weight: np.ndarray) -> None:
        # bin j collects theta in (grid[j-1], grid[j]]; the last bin is overflow
        idx = np.searchsorted(self.grid, theta, side="left")
        self._hists.append(np.bincount(idx, weights=weight, minlength=self.grid.size + 1))
        self._weights.append(float(weight.sum()))
        self._counts.append(int(theta.size))

    def flush(self) -> None:
        """Close the trailing partial batch, if any."""
        if self._n_pending:
            self._close(np.concatenate(self._pending_theta), np.concatenate(self._pending_weight))
        self._pending_theta, self._pending_weight, self._n_pending = [], [], 0

    def merge(self, other: "CdfAccumulator") -> "CdfAccumulator":
        """New accumulator holding the batches of ``self`` followed by those of ``other``."""
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("cannot merge accumulators on different grids")
        self.flush()
        other.flush()
        out = CdfAccumulator(self.grid, self.batch_size)
        out._hists = self._hists + other._hists
        out._weights = self._weights + other._weights
        out._counts = self._counts + other._counts
        return out

    @property
    def n_samples(self) -> int:
        return sum(self._counts) + self._n_pending

    def result(self) -> EmpiricalCdf:
        self.flush()
        if not self._counts:
            raise ValueError("no samples: cannot estimate a CDF")
        return _estimate(self.grid, np.array(self._hists), np.array(self._weights), sum(self._counts))


def _estimate(grid, hists: np.ndarray, weights: np.ndarray, n_samples: int) -> EmpiricalCdf:
    cum = np.cumsum(hists[:, :-1], axis=1)
    total = weights.sum()
    cdf = np.minimum(cum.sum(axis=0) / total, 1.0)
    n_b = len(weights)
    if n_b >= 2:
        resid = cum - np.outer(weights, cdf)
        var = n_b / (n_b - 1) * (resid ** 2).sum(axis=0) / total ** 2
        err = 2.0 * np.sqrt(var)
    else:
        err = np.full(grid.size, np.nan)
    return EmpiricalCdf(grid, cdf, err, int(n_samples), float(total), n_b)


def weighted_cdf(samples: Iterable, grid, batches: int = 20) -> EmpiricalCdf:
    """Estimate the weighted CDF of a finite stream of ``(theta, weight)`` pairs.

    The stream is cut into ``batches`` contiguous, nearly equal batches.
    """
    grid = _check_grid(grid)
    pairs = np.array([(t, w) for t, w in samples], dtype=np.float64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        raise ValueError("no samples: cannot estimate a CDF")
    if np.any(~(pairs[:, 1] > 0)):
        raise ValueError("weights must be positive")
    acc = CdfAccumulator(grid, batch_size=1)
    for chunk in np.array_split(pairs, min(batches, len(pairs))):
        acc.add_batch(chunk[:, 0], chunk[:, 1])
    return acc.result()


def sup_diff(cdf: EmpiricalCdf, predicted: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    d = np.abs(cdf.cdf - np.asarray(predicted))
    return float(np.max(d if mask is None else d[mask]))

"""Multi-chain drivers for the three hitting-angle experiments and the lattice-effect table.

Chain ``i`` of a run is seeded from ``(seed, i)``; per-chain results are
merged in chain order, so output does not depend on how many worker processes
ran the chains.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cdf import CdfAccumulator, EmpiricalCdf
from .ensembles import ExponentSet, half_space_kernel, point_to_point_kernel, sphere_kernel
from .lattice import FULL, HALF
from .lattice_effect import LatticeEffectTable, lattice_effect_counts, table_from_counts
from .pivot import DEFAULT_STRIDES, ChainConfig, ChainStats, sample

log = logging.getLogger(__name__)

HALF_EXP, SPHERE_EXP, P2P_EXP = "half", "sphere", "p2p"

_KERNELS = {
    HALF_EXP: (half_space_kernel, HALF),
    SPHERE_EXP: (sphere_kernel, FULL),
    P2P_EXP: (point_to_point_kernel, FULL),
}


@dataclass
class RunSpec:
    kind: str
    n_steps: int
    n_samples: int
    stride: Optional[int] = None
    warmup: Optional[int] = None
    chains: int = 1
    seed: int = 0
    exponents: ExponentSet = field(default_factory=ExponentSet)
    theta_max: Optional[float] = None  # radians, half-space conditioning
    a: float = 0.75
    batches: int = 50  # per chain
    workers: int = 1

    def __post_init__(self):
        if self.kind not in _KERNELS:
            raise ValueError(f"unknown experiment {self.kind!r}")
        if self.n_samples < 1 or self.chains < 1 or self.batches < 1 or self.workers < 1:
            raise ValueError("samples, chains, batches and workers must be positive")
        if self.stride is None:
            self.stride = DEFAULT_STRIDES[self.kind]

    def params(self) -> np.ndarray:
        e = self.exponents
        if self.kind == HALF_EXP:
            return np.array([e.p])
        if self.kind == SPHERE_EXP:
            return np.array([e.p, self.a])
        return np.array([e.gamma_over_nu])

    def chain_samples(self, chain_id: int) -> int:
        q, r = divmod(self.n_samples, self.chains)
        return q + (chain_id < r)


@dataclass
class RunResult:
    spec: RunSpec
    rows: list            # per chain (n, 2) arrays of (theta, weight); NaN = not emitted
    stats: list           # per chain ChainStats

    @property
    def n_emitted(self) -> int:
        return int(sum(np.count_nonzero(self._emitted(r)) for r in self.rows))

    @property
    def acceptance(self) -> float:
        it = sum(s.iterations for s in self.stats)
        return sum(s.accepted for s in self.stats) / it if it else 0.0

    def _emitted(self, rows):
        keep = ~np.isnan(rows[:, 0])
        if self.spec.theta_max is not None:
            keep &= rows[:, 0] <= self.spec.theta_max
        return keep

    def cdf(self, grid, lattice_effect: Optional[LatticeEffectTable] = None) -> EmpiricalCdf:
        """Weighted CDF; batches are contiguous runs of chain samples."""
        acc = CdfAccumulator(grid, batch_size=1)
        for rows in self.rows:
            for chunk in np.array_split(rows, min(self.spec.batches, len(rows))):
                chunk = chunk[self._emitted(chunk)]
                if not len(chunk):
                    continue
                w = chunk[:, 1]
                if lattice_effect is not None:
                    w = w / lattice_effect.lookup(chunk[:, 0])
                acc.add_batch(chunk[:, 0], w)
        return acc.result()


def _run_one(spec: RunSpec, chain_id: int):
    kernel, constraint = _KERNELS[spec.kind]
    cfg = ChainConfig(spec.n_steps, constraint, stride=spec.stride, warmup=spec.warmup,
                      seed=spec.seed, chain_id=chain_id)
    rows, stats = sample(cfg, spec.chain_samples(chain_id), kernel, spec.params(), 2)
    log.info("chain %d: %d samples, acceptance %.3f", chain_id, stats.samples, stats.acceptance)
    return rows, stats


def _fan_out(fn, args_list, workers):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


def run(spec: RunSpec) -> RunResult:
    out = _fan_out(_run_one, [(spec, i) for i in range(spec.chains)], spec.workers)
    return RunResult(spec, [o[0] for o in out], [o[1] for o in out])


def run_lattice_effect(n_steps: int, n_samples: int, bins: int = 180, stride: int = 10,
                       warmup: Optional[int] = None, chains: int = 1, seed: int = 0,
                       workers: int = 1) -> LatticeEffectTable:
    edges = np.linspace(0.0, np.pi, bins + 1)
    q, r = divmod(n_samples, chains)
    jobs = [(n_steps, q + (i < r), edges, stride, seed, i, warmup) for i in range(chains)]
    counts = _fan_out(lattice_effect_counts, jobs, workers)
    return table_from_counts(edges, np.sum(counts, axis=0), n_steps, n_samples)


def degree_grid(lo: float, hi: float, step: float = 1.0) -> np.ndarray:
    """Angles lo, lo + step, ..., hi in degrees (inclusive)."""
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


__all__ = ["RunSpec", "RunResult", "run", "run_lattice_effect", "degree_grid", "ChainStats"]

"""Pivot-algorithm Markov chain for fixed-length SAWs, full space or half-space.

The hot loop is compiled with numba. The walk is kept in an internal frame
(actual = frame @ internal + shift, frame a lattice symmetry) so that every
pivot moves only the shorter side of the walk. Occupancy is a site -> index
hash table with open addressing; entries whose site has since moved are
detected as stale on lookup, and the table is rebuilt once it is half full.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numba as nb
import numpy as np

from .lattice import FULL, HALF, PIVOT_MOVES, SYMMETRIES, new_rod, symmetry_index

_OFFSET = 1 << 20  # packed coordinates must stay within +-2**20
_RECENTER = 1 << 18  # internal frame is re-anchored once it drifts this far
_MAX_STEPS = 1 << 18
_MULT = np.uint64(0x9E3779B97F4A7C15)

DEFAULT_STRIDES = {"half": 100, "p2p": 100, "sphere": 10}

# meta layout: log2 capacity, used slots
_BITS, _USED = 0, 1
_EMPTY = -1


@nb.njit(cache=True, inline="always")
def _pack(x, y, z):
    return ((x + _OFFSET) << 42) | ((y + _OFFSET) << 21) | (z + _OFFSET)


@nb.njit(cache=True, inline="always")
def _slot(key, bits):
    # 4x4x4 blocks of sites share a run of 64 slots so walk neighbours share cache lines
    x = (key >> 42) & 0x1FFFFF
    y = (key >> 21) & 0x1FFFFF
    z = key & 0x1FFFFF
    block = (x >> 2) << 42 | (y >> 2) << 21 | (z >> 2)
    h = np.int64((np.uint64(block) * _MULT) >> np.uint64(64 - bits))
    return ((h << 6) | ((x & 3) << 4) | ((y & 3) << 2) | (z & 3)) & ((1 << bits) - 1)


@nb.njit(cache=True, inline="always")
def _lookup(iw, table, bits, key):
    """Index of the walk site at ``key``, or -1. Entries whose site moved are stale."""
    mask = (1 << bits) - 1
    s = _slot(key, bits)
    while table[s, 0] != _EMPTY:
        if table[s, 0] == key:
            i = table[s, 1]
            if _pack(iw[i, 0], iw[i, 1], iw[i, 2]) == key:
                return i
            return -1
        s = (s + 1) & mask
    return -1


@nb.njit(cache=True, inline="always")
def _insert(table, bits, key, i):
    """Point ``key`` at walk index ``i``; returns 1 if a fresh slot was taken."""
    mask = (1 << bits) - 1
    s = _slot(key, bits)
    while table[s, 0] != _EMPTY:
        if table[s, 0] == key:
            table[s, 1] = i
            return 0
        s = (s + 1) & mask
    table[s, 0] = key
    table[s, 1] = i
    return 1


@nb.njit(cache=True)
def _rebuild(iw, table, meta):
    bits = meta[_BITS]
    for s in range(table.shape[0]):
        table[s, 0] = _EMPTY
    used = 0
    for i in range(iw.shape[0]):
        used += _insert(table, bits, _pack(iw[i, 0], iw[i, 1], iw[i, 2]), i)
    meta[_USED] = used


@nb.njit(cache=True, inline="always")
def _mul3(a, b, out, transpose_a):
    for r in range(3):
        for c in range(3):
            acc = 0
            for m in range(3):
                acc += (a[m, r] if transpose_a else a[r, m]) * b[m, c]
            out[r, c] = acc


@nb.njit(cache=True)
def _try_pivot(iw, frame, shift, table, meta, scratch, k, g, half):
    """Propose rotating the sites after ``k`` by ``g`` about site ``k``; apply it if legal.

    The actual walk is ``frame @ iw[i] + shift``. Only the shorter side of
    the internal walk is moved; when that is the head, the global frame
    absorbs the difference so the actual walk equals the tail rotation.
    """
    n = iw.shape[0] - 1
    bits = meta[_BITS]
    # actual pivot point
    px = frame[0, 0] * iw[k, 0] + frame[0, 1] * iw[k, 1] + frame[0, 2] * iw[k, 2] + shift[0]
    py = frame[1, 0] * iw[k, 0] + frame[1, 1] * iw[k, 1] + frame[1, 2] * iw[k, 2] + shift[1]
    pz = frame[2, 0] * iw[k, 0] + frame[2, 1] * iw[k, 1] + frame[2, 2] * iw[k, 2] + shift[2]
    gf = scratch[0]
    _mul3(g, frame, gf, False)
    if half:
        # z of the proposed tail: pz + (g frame)[2] . (iw[j] - iw[k])
        for j in range(k + 1, n + 1):
            z = pz + gf[2, 0] * (iw[j, 0] - iw[k, 0]) + gf[2, 1] * (iw[j, 1] - iw[k, 1]) \
                + gf[2, 2] * (iw[j, 2] - iw[k, 2])
            if z < 1:
                return False
    # internal-frame rotation: frame^T g frame
    h = scratch[1]
    _mul3(frame, gf, h, True)
    cx = iw[k, 0]
    cy = iw[k, 1]
    cz = iw[k, 2]
    tail = n - k <= k
    if tail:
        lo = k + 1
        hi = n + 1
        r = h
    else:
        lo = 0
        hi = k
        r = scratch[2]
        for a in range(3):
            for b in range(3):
                r[a, b] = h[b, a]
    # check the moved side outward from the pivot against the fixed side
    for step in range(hi - lo):
        i = lo + step if tail else hi - 1 - step
        dx = iw[i, 0] - cx
        dy = iw[i, 1] - cy
        dz = iw[i, 2] - cz
        qx = cx + r[0, 0] * dx + r[0, 1] * dy + r[0, 2] * dz
        qy = cy + r[1, 0] * dx + r[1, 1] * dy + r[1, 2] * dz
        qz = cz + r[2, 0] * dx + r[2, 1] * dy + r[2, 2] * dz
        idx = _lookup(iw, table, bits, _pack(qx, qy, qz))
        if idx >= 0 and (idx <= k if tail else idx >= k):
            return False
    for i in range(lo, hi):
        dx = iw[i, 0] - cx
        dy = iw[i, 1] - cy
        dz = iw[i, 2] - cz
        iw[i, 0] = cx + r[0, 0] * dx + r[0, 1] * dy + r[0, 2] * dz
        iw[i, 1] = cy + r[1, 0] * dx + r[1, 1] * dy + r[1, 2] * dz
        iw[i, 2] = cz + r[2, 0] * dx + r[2, 1] * dy + r[2, 2] * dz
    if not tail:
        # new frame: x -> g x + (p - g p) composed with the old one
        gs0 = g[0, 0] * shift[0] + g[0, 1] * shift[1] + g[0, 2] * shift[2]
        gs1 = g[1, 0] * shift[0] + g[1, 1] * shift[1] + g[1, 2] * shift[2]
        gs2 = g[2, 0] * shift[0] + g[2, 1] * shift[1] + g[2, 2] * shift[2]
        gp0 = g[0, 0] * px + g[0, 1] * py + g[0, 2] * pz
        gp1 = g[1, 0] * px + g[1, 1] * py + g[1, 2] * pz
        gp2 = g[2, 0] * px + g[2, 1] * py + g[2, 2] * pz
        shift[0] = gs0 + px - gp0
        shift[1] = gs1 + py - gp1
        shift[2] = gs2 + pz - gp2
        frame[:, :] = gf
        if max(abs(iw[0, 0]), abs(iw[0, 1]), abs(iw[0, 2])) > _RECENTER:
            _recenter(iw, frame, shift)
            _rebuild(iw, table, meta)
            return True
    if 2 * (meta[_USED] + hi - lo) > table.shape[0]:
        _rebuild(iw, table, meta)
    else:
        used = meta[_USED]
        for i in range(lo, hi):
            used += _insert(table, bits, _pack(iw[i, 0], iw[i, 1], iw[i, 2]), i)
        meta[_USED] = used
    return True


@nb.njit(cache=True)
def _recenter(iw, frame, shift):
    ox = iw[0, 0]
    oy = iw[0, 1]
    oz = iw[0, 2]
    for i in range(iw.shape[0]):
        iw[i, 0] -= ox
        iw[i, 1] -= oy
        iw[i, 2] -= oz
    for r in range(3):
        shift[r] += frame[r, 0] * ox + frame[r, 1] * oy + frame[r, 2] * oz


@nb.njit(cache=True)
def _materialize(iw, frame, shift, out):
    for i in range(iw.shape[0]):
        for r in range(3):
            out[i, r] = frame[r, 0] * iw[i, 0] + frame[r, 1] * iw[i, 1] + frame[r, 2] * iw[i, 2] + shift[r]


@nb.njit(cache=True)
def _run_pivots(iw, frame, shift, table, meta, scratch, moves, n_attempts, half, rng):
    n = iw.shape[0] - 1
    n_moves = moves.shape[0]
    accepted = 0
    for _ in range(n_attempts):
        k = rng.integers(0, n)
        m = rng.integers(0, n_moves)
        if _try_pivot(iw, frame, shift, table, meta, scratch, k, moves[m], half):
            accepted += 1
    return accepted


def chain_seed(master_seed: int, chain_id: int) -> np.random.SeedSequence:
    """Per-chain seed material mixed from ``(master_seed, chain_id)``."""
    return np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(chain_id)])


@dataclass(frozen=True)
class ChainConfig:
    n_steps: int
    constraint: str = FULL
    stride: int = 100
    warmup: Optional[int] = None  # None -> 20 * n_steps attempted pivots
    seed: int = 0
    chain_id: int = 0

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("pivot chains need n_steps >= 2")
        if self.n_steps > _MAX_STEPS:
            raise ValueError("n_steps too large for the packed site index")
        if self.constraint not in (FULL, HALF):
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError("warmup must be >= 0")

    @property
    def warmup_iterations(self) -> int:
        return 20 * self.n_steps if self.warmup is None else self.warmup


@dataclass
class ChainStats:
    iterations: int
    accepted: int
    samples: int

    @property
    def acceptance(self) -> float:
        return self.accepted / self.iterations if self.iterations else 0.0


class PivotChain:
    """State of one pivot chain: current walk, site index, counters, PRNG."""

    def __init__(self, cfg: ChainConfig, walk: Optional[np.ndarray] = None):
        self.cfg = cfg
        self.half = cfg.constraint == HALF
        if walk is None:
            walk = new_rod(cfg.n_steps, "+z" if self.half else "+x")
        self._iw = np.array(walk, dtype=np.int64, order="C")
        if self._iw.shape != (cfg.n_steps + 1, 3):
            raise ValueError("initial walk has the wrong length")
        self._frame = np.eye(3, dtype=np.int64)
        self._shift = np.zeros(3, dtype=np.int64)
        bits = max(8, int(np.ceil(np.log2(4 * (cfg.n_steps + 1)))))
        self._table = np.full((1 << bits, 2), _EMPTY, dtype=np.int64)
        self._meta = np.array([bits, 0], dtype=np.int64)
        self._scratch = np.zeros((3, 3, 3), dtype=np.int64)
        _rebuild(self._iw, self._table, self._meta)
        self.rng = np.random.Generator(np.random.PCG64(chain_seed(cfg.seed, cfg.chain_id)))
        self.iterations = 0
        self.accepted = 0
        self._walk = self._iw.copy()
        self._view = self._walk.view()
        self._view.flags.writeable = False
        self._fresh = True

    def _state(self):
        return self._iw, self._frame, self._shift, self._table, self._meta, self._scratch

    @property
    def current(self) -> np.ndarray:
        """Read-only view of the current walk; it is overwritten as the chain advances."""
        if not self._fresh:
            _materialize(self._iw, self._frame, self._shift, self._walk)
            self._fresh = True
        return self._view

    def advance(self, n_attempts: int) -> int:
        """Run ``n_attempts`` random pivot attempts; returns how many were accepted."""
        if n_attempts <= 0:
            return 0
        acc = _run_pivots(*self._state(), PIVOT_MOVES, int(n_attempts), self.half, self.rng)
        self.iterations += n_attempts
        self.accepted += acc
        if acc:
            self._fresh = False
        return acc

    def pivot_step(self, k: int, g: np.ndarray) -> bool:
        """Attempt one given pivot: sites after ``k`` rotated by symmetry ``g`` about site ``k``."""
        if not 0 <= k <= self.cfg.n_steps - 1:
            raise ValueError("pivot site must lie in 0..N-1")
        g = np.ascontiguousarray(SYMMETRIES[symmetry_index(g)])
        ok = _try_pivot(*self._state(), int(k), g, self.half)
        self.iterations += 1
        self.accepted += int(ok)
        if ok:
            self._fresh = False
        return bool(ok)


def run_chain(
    cfg: ChainConfig,
    n_samples: int,
    observe: Callable[[np.ndarray], None],
    chain: Optional[PivotChain] = None,
) -> ChainStats:
    """Warm up, then hand every ``stride``-th walk to ``observe`` until ``n_samples`` are delivered.

    ``observe`` receives a read-only view that is overwritten by later
    iterations; copy it if it must outlive the call.
    """
    if chain is None:
        chain = PivotChain(cfg)
    chain.advance(cfg.warmup_iterations)
    for _ in range(n_samples):
        chain.advance(cfg.stride)
        observe(chain.current)
    return ChainStats(chain.iterations, chain.accepted, n_samples)


@nb.njit(cache=True)
def _sample_loop(iw, frame, shift, table, meta, scratch, moves, half, rng,
                 stride, walk, kernel, params, out):
    accepted = 0
    for s in range(out.shape[0]):
        accepted += _run_pivots(iw, frame, shift, table, meta, scratch, moves, stride, half, rng)
        _materialize(iw, frame, shift, walk)
        kernel(walk, params, s, out[s])
    return accepted


def sample(
    cfg: ChainConfig,
    n_samples: int,
    kernel,
    params: np.ndarray,
    width: int,
    chain: Optional[PivotChain] = None,
    warmup: bool = True,
) -> tuple[np.ndarray, ChainStats]:
    """Compiled counterpart of :func:`run_chain`.

    ``kernel(walk, params, s, row)`` must be a numba-jitted function; it is
    called on every ``stride``-th walk and fills ``row`` (length ``width``)
    of the returned ``(n_samples, width)`` array. ``s`` is the sample index.
    """
    if chain is None:
        chain = PivotChain(cfg)
    if warmup:
        chain.advance(cfg.warmup_iterations)
    out = np.full((n_samples, width), np.nan)
    if n_samples:
        acc = _sample_loop(
            *chain._state(), PIVOT_MOVES, chain.half, chain.rng, int(cfg.stride),
            chain._walk, kernel, np.ascontiguousarray(params, dtype=np.float64), out,
        )
        chain.iterations += n_samples * cfg.stride
        chain.accepted += acc
        chain._fresh = True
    return out, ChainStats(chain.iterations, chain.accepted, n_samples)


@nb.njit(cache=True)
def squared_end_to_end(walk, params, s, row):
    row[0] = walk[-1, 0] ** 2 + walk[-1, 1] ** 2 + walk[-1, 2] ** 2


@nb.njit(cache=True)
def step_code(walk, params, s, row):
    """Base-6 code of the walk's step sequence (identifies a walk exactly for small N)."""
    code = 0
    for i in range(1, walk.shape[0]):
        dx = walk[i, 0] - walk[i - 1, 0]
        dy = walk[i, 1] - walk[i - 1, 1]
        dz = walk[i, 2] - walk[i - 1, 2]
        d = 0 if dx == 1 else 1 if dx == -1 else 2 if dy == 1 else 3 if dy == -1 else 4 if dz == 1 else 5
        code = code * 6 + d
    row[0] = code

"""Cubic-lattice geometry: walks, the 48 lattice symmetries, exact enumeration.

Walks are ``(N + 1, 3)`` int64 arrays whose first row is the origin.
Symmetries are ``3 x 3`` signed permutation matrices acting on column vectors.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

FULL = "full"
HALF = "half"
CONSTRAINTS = (FULL, HALF)

MAX_ENUMERATION_STEPS = 10

STEPS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=np.int64,
)

AXES = {
    "+x": (1, 0, 0), "-x": (-1, 0, 0),
    "+y": (0, 1, 0), "-y": (0, -1, 0),
    "+z": (0, 0, 1), "-z": (0, 0, -1),
}


def _signed_permutations() -> np.ndarray:
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=np.int64)
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            mats.append(m)
    mats.sort(key=lambda m: (not np.array_equal(m, np.eye(3, dtype=np.int64)), tuple(m.ravel())))
    return np.array(mats, dtype=np.int64)


#: All 48 symmetries of the cubic lattice fixing the origin; index 0 is the identity.
SYMMETRIES = _signed_permutations()
SYMMETRIES.setflags(write=False)
IDENTITY = SYMMETRIES[0]
#: The 47 non-identity symmetries used as pivot moves.
PIVOT_MOVES = np.ascontiguousarray(SYMMETRIES[1:])


def symmetry_index(g: np.ndarray) -> int:
    """Position of ``g`` in :data:`SYMMETRIES`; raises ``ValueError`` if absent."""
    hits = np.flatnonzero(np.all(SYMMETRIES == np.asarray(g), axis=(1, 2)))
    if hits.size != 1:
        raise ValueError("not a cubic lattice symmetry")
    return int(hits[0])


def is_lattice_symmetry(g: np.ndarray) -> bool:
    g = np.asarray(g)
    if g.shape != (3, 3) or not np.all(np.isin(g, (-1, 0, 1))):
        return False
    return bool(np.all(np.abs(g).sum(axis=0) == 1) and np.all(np.abs(g).sum(axis=1) == 1))


def apply_symmetry(g: np.ndarray, p) -> np.ndarray:
    """Apply ``g`` to a point (shape ``(3,)``) or to every row of an ``(M, 3)`` array."""
    p = np.asarray(p, dtype=np.int64)
    return p @ np.asarray(g, dtype=np.int64).T


def new_rod(n_steps: int, axis="+z") -> np.ndarray:
    """Straight walk of ``n_steps`` unit steps along ``axis`` (a name like ``"+z"`` or a unit vector)."""
    if n_steps < 1:
        raise ValueError("a rod needs at least one step")
    direction = np.asarray(AXES[axis] if isinstance(axis, str) else axis, dtype=np.int64)
    if direction.shape != (3,) or np.abs(direction).sum() != 1:
        raise ValueError(f"axis must be a lattice unit vector, got {axis!r}")
    return np.arange(n_steps + 1, dtype=np.int64)[:, None] * direction[None, :]


def is_nearest_neighbor(walk: np.ndarray) -> bool:
    walk = np.asarray(walk)
    if len(walk) < 2:
        return True
    return bool(np.all(np.abs(np.diff(walk, axis=0)).sum(axis=1) == 1))


def is_self_avoiding(walk: np.ndarray) -> bool:
    """True iff no lattice site is visited twice."""
    seen = set()
    for site in map(tuple, np.asarray(walk).tolist()):
        if site in seen:
            return False
        seen.add(site)
    return True


def in_half_space(walk: np.ndarray) -> bool:
    """Half-space constraint: every site after the origin has ``z >= 1``."""
    walk = np.asarray(walk)
    return bool(np.all(walk[1:, 2] >= 1))


def is_valid_walk(walk: np.ndarray, constraint: str = FULL) -> bool:
    walk = np.asarray(walk)
    ok = (
        walk.ndim == 2
        and walk.shape[1] == 3
        and not np.any(walk[0])
        and is_nearest_neighbor(walk)
        and is_self_avoiding(walk)
    )
    if ok and constraint == HALF:
        ok = in_half_space(walk)
    return ok


@dataclass(frozen=True)
class EnumerationResult:
    n_steps: int
    constraint: str
    count: int


def enumerate_saws(
    n_steps: int,
    constraint: str = FULL,
    visit: Optional[Callable[[np.ndarray], None]] = None,
) -> EnumerationResult:
    """Count every ``n_steps``-step SAW from the origin by depth-first search.

    ``visit`` (if given) is called once per complete walk with a fresh array.
    """
    if constraint not in CONSTRAINTS:
        raise ValueError(f"unknown constraint {constraint!r}")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if n_steps > MAX_ENUMERATION_STEPS:
        raise ValueError(
            f"refusing to enumerate N={n_steps} > {MAX_ENUMERATION_STEPS} (combinatorial blow-up)"
        )
    steps = [tuple(s) for s in STEPS.tolist()]
    path = [(0, 0, 0)]
    occupied = {(0, 0, 0)}
    count = 0

    def extend(depth: int) -> None:
        nonlocal count
        if depth == n_steps:
            count += 1
            if visit is not None:
                visit(np.array(path, dtype=np.int64))
            return
        x, y, z = path[-1]
        for dx, dy, dz in steps:
            site = (x + dx, y + dy, z + dz)
            if site in occupied or (constraint == HALF and site[2] < 1):
                continue
            occupied.add(site)
            path.append(site)
            extend(depth + 1)
            path.pop()
            occupied.remove(site)

    extend(0)
    return EnumerationResult(n_steps, constraint, count)

"""Reweighting fixed-length SAW samples into the three boundary-ended ensembles.

Each observable maps one walk to a hitting angle and a weight:

* half-space: walk from the half-space chain, endpoint ``(x0, y0, z0)``;
  angle ``arctan(hypot(x0, y0) / z0)``, weight ``z0 ** p``.
* sphere: walk dilated by ``R`` so it ends on the unit sphere centred at
  ``(0, 0, -a)``; kept only if it stays inside; angle measured from the
  centre; weight ``R ** p * W(angle)``.
* point to point: walk rotated and dilated to run from the origin to
  ``(0, 0, 2)``; angle of the first crossing of ``z = 1``; weight
  ``|endpoint| ** (-gamma / nu)``.

The per-walk work is done by numba kernels (``*_kernel``) that the pivot
sampler calls in-loop; the plain functions are thin wrappers for single walks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba as nb
import numpy as np

NU = 0.587597
GAMMA = 1.15698
GAMMA1 = 0.6786
B_FIT = 1.3303

# sites within this relative distance of the sphere count as inside
_SPHERE_RTOL = 1e-12


@dataclass(frozen=True)
class ExponentSet:
    nu: float = NU
    gamma: float = GAMMA
    gamma1: float = GAMMA1
    b: float = B_FIT

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not self.gamma > self.rho > 0:
            raise ValueError("need gamma > rho > 0 (rho = gamma - gamma1)")

    @property
    def rho(self) -> float:
        return self.gamma - self.gamma1

    @property
    def p(self) -> float:
        """Exponent of the dilation weight, (rho - gamma) / nu."""
        return (self.rho - self.gamma) / self.nu

    @property
    def gamma_over_nu(self) -> float:
        return self.gamma / self.nu


class WeightedSample(NamedTuple):
    theta: float
    weight: float


@dataclass(frozen=True)
class SphereConfig:
    a: float = 0.75
    lattice_effect: Optional[object] = None  # a LatticeEffectTable

    def __post_init__(self):
        if not -1 < self.a < 1:
            raise ValueError("sphere start offset must satisfy |a| < 1")


def _endpoint(walk) -> np.ndarray:
    return np.asarray(walk, dtype=np.float64)[-1]


# --- half-space -------------------------------------------------------------

@nb.njit(cache=True)
def half_space_kernel(walk, params, s, row):
    """params = [p]; row = [theta, weight]."""
    x = float(walk[-1, 0])
    y = float(walk[-1, 1])
    z = float(walk[-1, 2])
    row[0] = math.atan2(math.sqrt(x * x + y * y), z)
    row[1] = z ** params[0]


def half_space_observable(walk, e: ExponentSet = ExponentSet(), theta_max: Optional[float] = None):
    """Hitting angle and ``z0 ** p`` weight for a half-space walk; None if above ``theta_max``."""
    x0, y0, z0 = _endpoint(walk)
    if z0 < 1:
        raise ValueError("walk does not end in the half-space z >= 1")
    row = np.empty(2)
    half_space_kernel(np.asarray(walk, dtype=np.int64), np.array([e.p]), 0, row)
    if theta_max is not None and row[0] > theta_max:
        return None
    return WeightedSample(float(row[0]), float(row[1]))


# --- sphere -----------------------------------------------------------------

@nb.njit(cache=True, inline="always")
def _dilation(x, y, z, a):
    r2 = x * x + y * y + z * z
    return (a * z + math.sqrt(r2 - a * a * (x * x + y * y))) / (1.0 - a * a)


def dilation_factor(walk, a: float) -> float:
    """R such that ``walk / R`` ends on the unit sphere centred at ``(0, 0, -a)``.

    Accepts a walk or a bare endpoint.
    """
    if not -1 < a < 1:
        raise ValueError("|a| must be < 1")
    pts = np.asarray(walk, dtype=np.float64)
    x, y, z = pts if pts.ndim == 1 else pts[-1]
    if x == 0 and y == 0 and z == 0:
        raise ValueError("dilation undefined for an endpoint at the origin")
    return float(_dilation(x, y, z, a))


def shell_weight(theta_s, a: float):
    """Reciprocal normal speed of the sphere family ``R * (u - a z_hat)`` at polar angle ``theta_s``."""
    return 1.0 / (1.0 - a * np.cos(theta_s))


@nb.njit(cache=True)
def sphere_kernel(walk, params, s, row):
    """params = [p, a]; row = [theta_s, weight without lattice correction], NaN when outside."""
    p = params[0]
    a = params[1]
    n = walk.shape[0] - 1
    x = float(walk[n, 0])
    y = float(walk[n, 1])
    z = float(walk[n, 2])
    r = _dilation(x, y, z, a)
    shift = a * r
    lim = r * r * (1.0 + _SPHERE_RTOL)
    for i in range(1, n):
        xi = float(walk[i, 0])
        yi = float(walk[i, 1])
        zi = float(walk[i, 2]) + shift
        if xi * xi + yi * yi + zi * zi > lim:
            row[0] = np.nan
            row[1] = np.nan
            return
    theta = math.atan2(math.sqrt(x * x + y * y), z + shift)
    row[0] = theta
    row[1] = r ** p / (1.0 - a * math.cos(theta))


def sphere_observable(walk, cfg: SphereConfig = SphereConfig(), e: ExponentSet = ExponentSet()):
    """Sphere hitting angle and weight, or None when the dilated walk leaves the sphere."""
    row = np.empty(2)
    sphere_kernel(np.asarray(walk, dtype=np.int64), np.array([e.p, cfg.a]), 0, row)
    if np.isnan(row[0]):
        return None
    weight = row[1]
    if cfg.lattice_effect is not None:
        weight /= cfg.lattice_effect.lookup(row[0])
    return WeightedSample(float(row[0]), float(weight))


# --- point to point ---------------------------------------------------------

@nb.njit(cache=True)
def _align_rotation(x, y, z, out):
    """Rotation taking direction (x, y, z) to +z about the axis (x, y, z) x z_hat."""
    norm = math.sqrt(x * x + y * y + z * z)
    ux = x / norm
    uy = y / norm
    c = z / norm
    s = math.sqrt(ux * ux + uy * uy)
    out[:, :] = 0.0
    if x == 0 and y == 0:
        out[0, 0] = 1.0
        out[1, 1] = 1.0 if c > 0 else -1.0
        out[2, 2] = 1.0 if c > 0 else -1.0
        return
    nx = uy / s
    ny = -ux / s
    out[0, 0] = c + (1 - c) * nx * nx
    out[0, 1] = (1 - c) * nx * ny
    out[0, 2] = s * ny
    out[1, 0] = (1 - c) * nx * ny
    out[1, 1] = c + (1 - c) * ny * ny
    out[1, 2] = -s * nx
    out[2, 0] = -s * ny
    out[2, 1] = s * nx
    out[2, 2] = c


@nb.njit(cache=True)
def point_to_point_kernel(walk, params, s, row):
    """params = [gamma / nu]; row = [theta of first crossing of z = 1, weight]."""
    n = walk.shape[0] - 1
    ex = walk[n, 0]
    ey = walk[n, 1]
    ez = walk[n, 2]
    e2 = ex * ex + ey * ey + ez * ez
    dist = math.sqrt(float(e2))
    # exact integer test: the transformed z of site i is >= 1 iff 2 w_i . e >= |e|^2
    hprev = -e2
    for i in range(1, n + 1):
        h = 2 * (walk[i, 0] * ex + walk[i, 1] * ey + walk[i, 2] * ez) - e2
        if h >= 0:
            t = -hprev / (h - hprev)
            px = walk[i - 1, 0] + t * (walk[i, 0] - walk[i - 1, 0])
            py = walk[i - 1, 1] + t * (walk[i, 1] - walk[i - 1, 1])
            pz = walk[i - 1, 2] + t * (walk[i, 2] - walk[i - 1, 2])
            rot = np.empty((3, 3))
            _align_rotation(float(ex), float(ey), float(ez), rot)
            scale = 2.0 / dist
            hx = scale * (rot[0, 0] * px + rot[0, 1] * py + rot[0, 2] * pz)
            hy = scale * (rot[1, 0] * px + rot[1, 1] * py + rot[1, 2] * pz)
            row[0] = math.atan(math.sqrt(hx * hx + hy * hy))
            row[1] = dist ** (-params[0])
            return
        hprev = h


def point_to_point_transform(walk) -> np.ndarray:
    """The walk rotated and dilated so that it runs from the origin to (0, 0, 2)."""
    pts = np.asarray(walk, dtype=np.float64)
    x, y, z = pts[-1]
    if x == 0 and y == 0 and z == 0:
        raise ValueError("endpoint at the origin")
    rot = np.empty((3, 3))
    _align_rotation(x, y, z, rot)
    return (2.0 / np.linalg.norm(pts[-1])) * pts @ rot.T


def point_to_point_observable(walk, e: ExponentSet = ExponentSet()) -> WeightedSample:
    """First hit of the bisecting plane and the ``|endpoint| ** (-gamma/nu)`` weight."""
    walk = np.asarray(walk, dtype=np.int64)
    assert np.any(walk[-1]), "a SAW cannot end at its start"
    row = np.empty(2)
    point_to_point_kernel(walk, np.array([e.gamma_over_nu]), 0, row)
    return WeightedSample(float(row[0]), float(row[1]))

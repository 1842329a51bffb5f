"""Closed-form hitting-angle CDFs predicted by conformal invariance, and the b fit.

All angles are radians.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

HALF_SPACE = "half-space"
SPHERE = "sphere"
BISECT = "bisecting-plane"


def cdf_half(theta, b: float):
    """P(Theta <= theta) = 1 - cos(theta)**(2(b-1)) for the half-space hitting angle."""
    theta = np.asarray(theta, dtype=np.float64)
    if b <= 1:
        raise ValueError("half-space CDF needs b > 1")
    if np.any(theta < 0) or np.any(theta >= np.pi / 2):
        raise ValueError("half-space angle must lie in [0, pi/2)")
    return 1.0 - np.cos(theta) ** (2.0 * (b - 1.0))


def cdf_sphere(theta, a: float, b: float):
    """CDF of the polar hitting angle on the unit sphere for a walk started at (0, 0, a)."""
    theta = np.asarray(theta, dtype=np.float64)
    if not -1 < a < 1:
        raise ValueError("sphere CDF needs |a| < 1")
    if b == 1:
        raise ValueError("sphere CDF formula is singular at b = 1")
    if np.any(theta < 0) or np.any(theta > np.pi + 1e-12):
        raise ValueError("sphere angle must lie in [0, pi]")
    if abs(a) < 1e-9:
        # the closed form is 0/0 here; its limit is the uniform measure, off by O(a)
        return (1.0 - np.cos(theta)) / 2.0
    e = 1.0 - b
    top = (1 - a) ** (2 * e)
    return (top - (1 + a * a - 2 * a * np.cos(theta)) ** e) / (top - (1 + a) ** (2 * e))


def cdf_bisect(theta):
    """First hit of the bisecting plane: P(Theta <= theta) = sin(theta)**2."""
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0) or np.any(theta > np.pi / 2 + 1e-12):
        raise ValueError("bisecting-plane angle must lie in [0, pi/2]")
    return np.sin(theta) ** 2


def density_half(theta, b: float):
    """Density of the half-space angle, from sigma(x, y) ~ (x^2 + y^2 + 1)^(-b) with r = tan(theta)."""
    r = np.tan(theta)
    return 2 * (b - 1) * r * (r * r + 1) ** (-b) / np.cos(theta) ** 2


def density_sphere(theta, a: float, b: float):
    """Unnormalised sphere angle density (1 + a^2 - 2a cos theta)^(-b) sin theta."""
    return (1 + a * a - 2 * a * np.cos(theta)) ** (-b) * np.sin(theta)


def b_from_scaling(nu, gamma, rho, d=3):
    """b = (2 rho - gamma) / (2 nu) + d / 2. Exact for Fraction inputs."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    return (2 * rho - gamma) / (2 * nu) + Fraction(d, 2)


def dH_db(theta, beta: float):
    """Derivative of :func:`cdf_half` with respect to b."""
    c = np.cos(np.asarray(theta, dtype=np.float64))
    return -2.0 * np.log(c) * c ** (2.0 * (beta - 1.0))


def conditioned_cdf_half(theta, b: float, theta0: float):
    """Half-space CDF conditioned on Theta <= theta0."""
    return cdf_half(theta, b) / cdf_half(theta0, b)


def dH_db_conditioned(theta, beta: float, theta0: float):
    h, h0 = cdf_half(theta, beta), cdf_half(theta0, beta)
    return (dH_db(theta, beta) * h0 - h * dH_db(theta0, beta)) / h0 ** 2


def inversion_map(x, y, z):
    """f(x, y, z) = 2 (x, y, 1 - z) / (x^2 + y^2 + (1 - z)^2); vectorised."""
    x, y, z = (np.asarray(v, dtype=np.float64) for v in (x, y, z))
    den = x * x + y * y + (1 - z) ** 2
    if np.any(den == 0):
        raise ValueError("inversion map is singular at (0, 0, 1)")
    return 2 * x / den, 2 * y / den, 2 * (1 - z) / den


@dataclass(frozen=True)
class PredictedCdf:
    kind: str
    b: float = 1.3303
    a: float = 0.75
    theta0: Optional[float] = None

    def __call__(self, theta):
        if self.kind == HALF_SPACE:
            if self.theta0 is not None:
                return conditioned_cdf_half(theta, self.b, self.theta0)
            return cdf_half(theta, self.b)
        if self.kind == SPHERE:
            return cdf_sphere(theta, self.a, self.b)
        if self.kind == BISECT:
            return cdf_bisect(theta)
        raise ValueError(f"unknown prediction {self.kind!r}")

    @property
    def domain_max(self) -> float:
        if self.kind == SPHERE:
            return np.pi
        if self.kind == HALF_SPACE and self.theta0 is not None:
            return self.theta0
        return np.pi / 2


# --- fitting b ---------------------------------------------------------------

@dataclass
class FitResult:
    b: float
    epsilon: float
    p_fit: float
    g: np.ndarray
    theta: np.ndarray
    residual_norm: float
    p_at_bound: bool = False  # p ran into the search bracket: the data do not pin it down


def _solve_linear(p, n_steps, diffs, dh):
    """Least squares in (epsilon, g) for fixed p. Returns (epsilon, g, residual norm)."""
    k, m = diffs.shape
    scale = n_steps ** (-p)
    design = np.zeros((k * m, m + 1))
    for i in range(k):
        design[i * m:(i + 1) * m, 0] = dh
        design[i * m:(i + 1) * m, 1:] = scale[i] * np.eye(m)
    sol, *_ = np.linalg.lstsq(design, diffs.ravel(), rcond=None)
    resid = diffs.ravel() - design @ sol
    return sol[0], sol[1:], float(np.linalg.norm(resid))


def fit_b(
    n_steps: Sequence[float],
    cdfs: Sequence[np.ndarray],
    theta: np.ndarray,
    beta0: float,
    theta0: Optional[float] = None,
    p_bracket=(1e-3, 2.0),
    max_relinearize: int = 10,
    p_fixed: Optional[float] = None,
) -> FitResult:
    """Fit F_N(theta) - H(theta, beta) ~ N^-p g(theta) + epsilon dH/dbeta; b = beta + epsilon.

    For fixed p the model is linear in (epsilon, g); p is found by a bounded
    scalar search of the residual, or held at ``p_fixed``. The expansion
    point beta starts at ``beta0`` and moves to the fitted b while that keeps
    shrinking epsilon, so the answer does not carry the curvature of H in b.
    The reported epsilon is ``b - beta0``. ``theta0`` switches to the
    conditioned half-space CDF.
    """
    n_steps = np.asarray(n_steps, dtype=np.float64)
    cdfs = np.asarray(cdfs, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if n_steps.size < 3 or cdfs.shape[0] != n_steps.size:
        raise ValueError("fit_b needs at least three datasets")
    if np.unique(n_steps).size != n_steps.size:
        raise ValueError("datasets must have distinct N")
    if cdfs.ndim != 2 or cdfs.shape[1] != theta.size or theta.size < 2:
        raise ValueError("datasets must share one grid of at least two angles")
    if p_fixed is not None and not p_fixed > 0:
        raise ValueError("p_fixed must be positive")
    beta = beta0
    eps, p, g, res = _fit_at(n_steps, cdfs, theta, beta, theta0, p_bracket, p_fixed)
    for _ in range(max_relinearize):
        if abs(eps) < 1e-12 or not beta + eps > 1:
            break
        trial = _fit_at(n_steps, cdfs, theta, beta + eps, theta0, p_bracket, p_fixed)
        if not abs(trial[0]) < abs(eps):
            break  # noisy data: the re-expansion is not contracting
        beta += eps
        eps, p, g, res = trial
    b = beta + eps
    at_bound = p_fixed is None and min(p - p_bracket[0], p_bracket[1] - p) < 1e-3 * (p_bracket[1] - p_bracket[0])
    return FitResult(b, float(b - beta0), p, g, theta, res, bool(at_bound))


def _fit_at(n_steps, cdfs, theta, beta, theta0, p_bracket, p_fixed=None):
    if theta0 is None:
        pred, dh = cdf_half(theta, beta), dH_db(theta, beta)
    else:
        pred, dh = conditioned_cdf_half(theta, beta, theta0), dH_db_conditioned(theta, beta, theta0)
    if not np.any(dh):
        raise ValueError("degenerate grid: dH/db vanishes everywhere")
    diffs = cdfs - pred
    if p_fixed is not None:
        eps, g, res = _solve_linear(p_fixed, n_steps, diffs, dh)
        return float(eps), float(p_fixed), g, res
    # coarse scan first so the bounded search starts in the right basin
    grid_p = np.linspace(*p_bracket, 200)
    scores = [_solve_linear(q, n_steps, diffs, dh)[2] for q in grid_p]
    i = int(np.argmin(scores))
    lo, hi = grid_p[max(i - 1, 0)], grid_p[min(i + 1, len(grid_p) - 1)]
    best = minimize_scalar(lambda q: _solve_linear(q, n_steps, diffs, dh)[2],
                           bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
    p = float(best.x) if best.fun <= scores[i] else float(grid_p[i])
    eps, g, res = _solve_linear(p, n_steps, diffs, dh)
    return float(eps), p, g, res

"""Reaction-diffusion PDE d_t rho = (1/2) rho'' + F(rho) on the unit torus,
its stationary solutions, and the Fourier metric on measures of the torus.

Grid convention: M points theta_j = j/M, spacing h = 1/M, periodic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.linalg import solve_circulant

from .errors import GridMismatch, OvershootError
from .model import ReactionPolynomials

__all__ = [
    "DensitySlice",
    "DensityPath",
    "evolve",
    "reaction_step_bound",
    "StationarySolution",
    "stationary_solutions",
    "fourier_coefficients",
    "MetricValue",
    "fourier_metric",
    "tail_bound",
    "l2_distance",
    "sup_distance",
    "bin_average",
    "laplacian",
]

OVERSHOOT_TOL = 1e-12
DEFAULT_K = 40


@dataclass(frozen=True, eq=False)
class DensitySlice:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("density slice must be a non-empty 1-d array")
        if np.any(v < -OVERSHOOT_TOL) or np.any(v > 1 + OVERSHOOT_TOL):
            raise ValueError("density values must lie in [0, 1]")
        v = np.clip(v, 0.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    @classmethod
    def constant(cls, rho: float, M: int) -> "DensitySlice":
        return cls(np.full(M, float(rho)))

    @classmethod
    def from_function(cls, f, M: int) -> "DensitySlice":
        return cls(np.asarray(f(np.arange(M) / M), dtype=float) * np.ones(M))


@dataclass(frozen=True, eq=False)
class DensityPath:
    """Slices on a uniform time grid; ``values[i]`` is the slice at ``times[i]``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != t.size:
            raise ValueError("values must have one row per time")
        if t.size > 1:
            steps = np.diff(t)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, steps.mean()):
                raise ValueError("time grid must be uniform and increasing")
        if np.any(v < -OVERSHOOT_TOL) or np.any(v > 1 + OVERSHOOT_TOL):
            raise ValueError("density values must lie in [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", np.clip(v, 0.0, 1.0))

    @property
    def M(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self):
        return self.times.size

    def slice(self, i: int) -> DensitySlice:
        return DensitySlice(self.values[i])

    def at(self, t: float) -> DensitySlice:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the path grid")
        return self.slice(i)

    def to_rows(self) -> list:
        return [[float(t), *row.tolist()] for t, row in zip(self.times, self.values)]

    @classmethod
    def constant(cls, rho: float, M: int, T: float, steps: int) -> "DensityPath":
        return cls(np.linspace(0.0, T, steps + 1), np.full((steps + 1, M), float(rho)))


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


def laplacian(v: np.ndarray) -> np.ndarray:
    """Periodic second difference along the last axis, divided by h^2."""
    M = v.shape[-1]
    return (np.roll(v, -1, axis=-1) - 2 * v + np.roll(v, 1, axis=-1)) * M * M


def reaction_step_bound(poly: ReactionPolynomials) -> float:
    return 0.1 / max(poly.sup_abs_dF(), 1e-12)


def _rk4(poly, r, dt):
    k1 = poly.F(r)
    k2 = poly.F(r + 0.5 * dt * k1)
    k3 = poly.F(r + 0.5 * dt * k2)
    k4 = poly.F(r + dt * k3)
    return r + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_range(v, t):
    lo, hi = v.min(), v.max()
    if lo < -OVERSHOOT_TOL or hi > 1 + OVERSHOOT_TOL:
        raise OvershootError(f"density left [0, 1] at t={t:.6g} (min {lo:.3e}, max {hi:.3e})")
    return np.clip(v, 0.0, 1.0)


def evolve(rho0, poly: ReactionPolynomials, T: float, dt: float, save_every: int = 1) -> DensityPath:
    """Strang splitting: backward-Euler diffusion half steps around an RK4
    reaction step.  The reaction step is sub-cycled to respect
    dt_sub <= 0.1 / sup|F'|.  Every ``save_every``-th step is stored.
    """
    v = _values(rho0).copy()
    M = v.size
    steps = int(round(T / dt))
    if steps < 0 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a non-negative multiple of dt")
    # first column of the circulant matrix I - (dt/4) Delta_h
    a = 0.25 * dt * M * M
    col = np.zeros(M)
    col[0] = 1 + 2 * a
    if M > 1:
        col[1] += -a
        col[-1] += -a
    sub = max(1, math.ceil(dt / reaction_step_bound(poly) - 1e-12))
    times, rows = [0.0], [v.copy()]
    for i in range(1, steps + 1):
        v = solve_circulant(col, v) if M > 1 else v
        for _ in range(sub):
            v = _rk4(poly, v, dt / sub)
        v = solve_circulant(col, v) if M > 1 else v
        v = _check_range(v, i * dt)
        if i % save_every == 0:
            times.append(i * dt)
            rows.append(v.copy())
    return DensityPath(np.array(times), np.array(rows))


@dataclass(frozen=True)
class StationarySolution:
    slice: DensitySlice
    residual: float
    constant: bool


def _constant_roots(poly: ReactionPolynomials) -> list:
    roots = np.roots(poly.f[::-1]) if len(poly.f) > 1 else np.array([])
    out = []
    for r in roots:
        if abs(r.imag) < 1e-9 and -1e-9 <= r.real <= 1 + 1e-9:
            x = min(max(r.real, 0.0), 1.0)
            # Newton polish on the real polynomial
            for _ in range(5):
                d = poly.dF(x)
                if d == 0:
                    break
                x = min(max(x - poly.F(x) / d, 0.0), 1.0)
            if all(abs(x - y) > 1e-9 for y in out):
                out.append(float(x))
    return sorted(out)


def stationary_solutions(poly: ReactionPolynomials, M: int = 256, seeds: int = 50,
                         rng=None, tol: float = 1e-8, max_iter: int = 60) -> list:
    """Constant roots of F plus any non-constant solutions of
    (1/2) Delta_h rho + F(rho) = 0 found by Newton from random smooth profiles.
    The search is heuristic; no completeness claim.
    """
    sols = [StationarySolution(DensitySlice.constant(r, M), abs(float(poly.F(r))), True)
            for r in _constant_roots(poly)]
    rng = np.random.default_rng(rng)
    theta = np.arange(M) / M
    lap = (np.diag(np.full(M, -2.0)) + np.diag(np.ones(M - 1), 1) + np.diag(np.ones(M - 1), -1))
    lap[0, -1] = lap[-1, 0] = 1.0
    lap *= 0.5 * M * M
    found = []
    for _ in range(seeds):
        modes = rng.integers(1, 4)
        v = rng.uniform(0.2, 0.8) + sum(
            rng.normal(0, 0.15) * np.cos(2 * np.pi * k * theta + rng.uniform(0, 2 * np.pi))
            for k in range(1, modes + 1))
        v = np.clip(v, 0.01, 0.99)
        for _ in range(max_iter):
            res = lap @ v + poly.F(v)
            if np.max(np.abs(res)) < tol:
                break
            try:
                v = v - np.linalg.solve(lap + np.diag(poly.dF(v)), res)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(v)):
                break
        res = float(np.max(np.abs(lap @ v + poly.F(v)))) if np.all(np.isfinite(v)) else math.inf
        if res >= tol or v.min() < 0 or v.max() > 1 or np.ptp(v) < 1e-6:
            continue
        # identify solutions up to translation
        spec = np.abs(np.fft.rfft(v))
        if any(np.max(np.abs(spec - s)) < 1e-6 for s in found):
            continue
        found.append(spec)
        sols.append(StationarySolution(DensitySlice(v), res, False))
    return sols


# ---------------------------------------------------------------------------
# Fourier metric
# ---------------------------------------------------------------------------


def _basis(theta: np.ndarray, K: int):
    k = np.arange(1, K + 1)[:, None]
    arg = 2 * np.pi * k * theta[None, :]
    return math.sqrt(2) * np.cos(arg), math.sqrt(2) * np.sin(arg)


def fourier_coefficients(measure, K: int = DEFAULT_K):
    """Pairings with e_0 = 1, e_k = sqrt2 cos(2 pi k .), e_{-k} = sqrt2 sin(2 pi k .).

    ``measure`` is a DensitySlice (measure rho(theta) d theta, periodic
    trapezoid quadrature) or a Configuration / 0-1 occupation vector (the
    atomic measure (1/n) sum_x eta(x) delta_{x/n}, summed exactly).  A
    2-d occupation array is treated as one configuration per row.
    Returns (cos part of length K+1 starting with k=0, sin part of length K).
    """
    if isinstance(measure, DensitySlice):
        w = measure.values
    else:
        w = np.asarray(getattr(measure, "bits", measure), dtype=float)
    n = w.shape[-1]
    theta = np.arange(n) / n
    cb, sb = _basis(theta, K)
    c0 = w.sum(axis=-1, keepdims=True) / n
    return np.concatenate([c0, w @ cb.T / n], axis=-1), w @ sb.T / n


def _weights(K: int) -> np.ndarray:
    return 0.5 ** np.arange(K + 1)


def tail_bound(K: int) -> float:
    """Bound on the omitted |k| > K terms for two measures of mass <= 1:
    each pairing difference is at most 2 sqrt2, and the weights on both sides
    sum to 2 * 2^-K."""
    return 4 * math.sqrt(2) * 2.0 ** (-K)


@dataclass(frozen=True)
class MetricValue:
    value: float
    tail: float

    def surely_at_least(self, r: float) -> bool:
        return self.value - self.tail >= r

    def surely_below(self, r: float) -> bool:
        return self.value + self.tail < r


def fourier_metric(a, b, K: int = DEFAULT_K):
    """Truncated metric sum over |k| <= K with its tail bound.

    With 2-d occupation input on either side, returns an array of values
    (one per row) in a MetricValue.
    """
    if K < 1:
        raise ValueError("truncation K must be >= 1")
    ca, sa = fourier_coefficients(a, K)
    cb, sb = fourier_coefficients(b, K)
    w = _weights(K)
    d = np.abs(ca - cb) @ w + np.abs(sa - sb) @ w[1:]
    if np.ndim(d) == 0:
        d = float(d)
    return MetricValue(d, tail_bound(K))


def _same_grid(a, b):
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise GridMismatch(f"grids differ: {va.shape} vs {vb.shape}")
    return va, vb


def l2_distance(a, b) -> float:
    """Periodic trapezoid rule: sqrt((1/M) sum_j (a_j - b_j)^2)."""
    va, vb = _same_grid(a, b)
    return float(np.sqrt(np.mean((va - vb) ** 2, axis=-1)))


def sup_distance(a, b) -> float:
    va, vb = _same_grid(a, b)
    return float(np.max(np.abs(va - vb)))


def bin_average(x, bins: int) -> np.ndarray:
    """Average consecutive grid values into ``bins`` cells (bins must divide M)."""
    v = _values(x)
    M = v.shape[-1]
    if bins <= 0 or M % bins:
        raise GridMismatch(f"{bins} bins do not divide M={M}")
    return v.reshape(*v.shape[:-1], bins, M // bins).mean(axis=-1)

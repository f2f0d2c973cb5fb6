"""Dynamical action of density paths and homogeneous quasi-potentials.

Discretisation of J(G) for a path rho on a uniform (t_k, theta_j) grid:

* time pairing by summation by parts: the two boundary pairings minus the
  time-derivative pairing equal sum_k <rho_{k+1} - rho_k, (G_k + G_{k+1}) / 2>;
* the remaining terms use trapezoid weights in time, the 3-point periodic
  Laplacian, and edge differences (G_{j+1} - G_j) / h with the mobility
  averaged to edges.

With this choice J is a sum of strictly concave functions of the separate
time slices G_k, so the supremum over G is found slice by slice with a
damped Newton iteration (periodic tridiagonal Hessians).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
import numpy as np
from scipy import integrate, optimize

from .errors import GridMismatch, NotConverged, SingleWell
from .hydro import DensityPath, DensitySlice, laplacian
from .model import ReactionPolynomials, potential_minima

__all__ = [
    "energy",
    "ActionBreakdown",
    "j_functional",
    "j_gradient",
    "RateResult",
    "rate_function",
    "holding_cost",
    "homogeneous_lagrangian",
    "QuasipotentialResult",
    "quasipotential_homogeneous",
    "quasipotential_oracle",
    "WellDepth",
    "well_depth_estimate",
    "well_depths",
    "quasipotential_path",
]

GRAD_TOL = 1e-7
MAX_ITER = 10_000
DEFAULT_FLOOR = 1e-3


def _trap_weights(K1: int, dt: float) -> np.ndarray:
    w = np.full(K1, dt)
    if K1 > 1:
        w[0] = w[-1] = dt / 2
    else:
        w[:] = 0.0
    return w


def energy(path: DensityPath) -> float:
    """int_0^T int |d_theta rho|^2 with centred differences and trapezoid weights."""
    v = path.values
    M = path.M
    grad = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) * (M / 2.0)
    per_t = np.mean(grad**2, axis=1)
    return float(np.dot(_trap_weights(len(path), path.dt), per_t))


def _mobility_edges(v):
    chi = v * (1 - v)
    return 0.5 * (chi + np.roll(chi, -1, axis=-1))


def _edge_diff(G):
    return np.roll(G, -1, axis=-1) - G


@dataclass(frozen=True)
class ActionBreakdown:
    total: float
    energy: float
    boundary: float
    bulk: float
    mobility: float
    birth: float
    death: float

    def to_json(self) -> dict:
        return asdict(self)


def _check_grid(path: DensityPath, G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.shape != path.values.shape:
        raise GridMismatch(f"control field shape {G.shape} differs from path grid {path.values.shape}")
    if not np.all(np.isfinite(G)):
        raise ValueError("control field must be finite")
    return G


def j_functional(path: DensityPath, G, poly: ReactionPolynomials) -> ActionBreakdown:
    G = _check_grid(path, G)
    v = path.values
    M = path.M
    h = 1.0 / M
    w = _trap_weights(len(path), path.dt)
    boundary = h * float(np.dot(v[-1], G[-1]) - np.dot(v[0], G[0]))
    mid = 0.5 * (v[1:] + v[:-1])
    time_part = h * float(np.sum(mid * (G[1:] - G[:-1])))
    lap_part = 0.5 * h * float(np.dot(w, np.sum(v * laplacian(G), axis=1)))
    bulk = -time_part - lap_part
    mob = -0.5 * h * float(np.dot(w, np.sum(_mobility_edges(v) * (_edge_diff(G) * M) ** 2, axis=1)))
    birth = -h * float(np.dot(w, np.sum(poly.B(v) * np.expm1(G), axis=1)))
    death = -h * float(np.dot(w, np.sum(poly.D(v) * np.expm1(-G), axis=1)))
    total = boundary + bulk + mob + birth + death
    return ActionBreakdown(total, energy(path), boundary, bulk, mob, birth, death)


class _SliceProblem:
    """Per-slice concave problems phi_k(g) = J restricted to G_k, divided by h."""

    def __init__(self, path: DensityPath, poly: ReactionPolynomials):
        v = path.values
        self.M = path.M
        K1 = len(path)
        dv = np.diff(v, axis=0)
        a = np.zeros_like(v)
        a[:-1] += 0.5 * dv
        a[1:] += 0.5 * dv
        self.w = _trap_weights(K1, path.dt)[:, None]
        self.c = a - self.w * 0.5 * laplacian(v)
        self.chi = _mobility_edges(v) * self.M * self.M  # edge weights / h^2
        self.B = poly.B(v)
        self.D = poly.D(v)

    def value(self, G):
        quad = 0.5 * np.sum(self.chi * _edge_diff(G) ** 2, axis=1)
        reac = np.sum(self.B * np.expm1(G) + self.D * np.expm1(-G), axis=1)
        return np.sum(self.c * G, axis=1) - self.w[:, 0] * (quad + reac)

    def grad(self, G):
        flux = self.chi * _edge_diff(G)  # on edge j (between j and j+1)
        div = flux - np.roll(flux, 1, axis=1)  # sum of neighbour pulls
        return self.c + self.w * (div - self.B * np.exp(G) + self.D * np.exp(-G))

    def newton_direction(self, G, grad):
        diag = self.w * (self.chi + np.roll(self.chi, 1, axis=1) + self.B * np.exp(G) + self.D * np.exp(-G))
        off = -self.w * self.chi  # coupling between j and j+1 (periodic)
        return _cyclic_tridiag_solve(diag, off, grad)


def _cyclic_tridiag_solve(diag, off, rhs):
    """Batched solve of symmetric periodic tridiagonal systems (one per row):
    A[j, j] = diag[j], A[j, j+1] = A[j+1, j] = off[j] (indices mod M)."""
    K1, M = diag.shape
    if M <= 2:
        A = np.zeros((K1, M, M))
        idx = np.arange(M)
        A[:, idx, idx] = diag
        if M == 2:
            A[:, 0, 1] += off[:, 0] + off[:, 1]
            A[:, 1, 0] += off[:, 0] + off[:, 1]
        return np.linalg.solve(A, rhs[..., None])[..., 0]
    # Sherman-Morrison: A = T + u v^T with u = (gam, 0, ..., 0, corner), v = (1, 0, ..., corner/gam)
    corner = off[:, -1]
    gam = -diag[:, 0]
    d = diag.copy()
    d[:, 0] -= gam
    d[:, -1] -= corner * corner / gam
    u = np.zeros((K1, M))
    u[:, 0] = gam
    u[:, -1] = corner
    both = _thomas(d, off[:, :-1], np.stack([rhs, u], axis=0))
    y, z = both[0], both[1]
    fac = (y[:, 0] + corner / gam * y[:, -1]) / (1 + z[:, 0] + corner / gam * z[:, -1])
    return y - fac[:, None] * z


def _thomas(d, e, rhs):
    """Symmetric tridiagonal solves; rhs has shape (r, K1, M)."""
    M = d.shape[1]
    cp = np.empty_like(d)
    dp = np.empty_like(rhs)
    cp[:, 0] = e[:, 0] / d[:, 0]
    dp[:, :, 0] = rhs[:, :, 0] / d[:, 0]
    for j in range(1, M):
        den = d[:, j] - e[:, j - 1] * cp[:, j - 1]
        if j < M - 1:
            cp[:, j] = e[:, j] / den
        dp[:, :, j] = (rhs[:, :, j] - e[:, j - 1] * dp[:, :, j - 1]) / den
    x = np.empty_like(rhs)
    x[:, :, -1] = dp[:, :, -1]
    for j in range(M - 2, -1, -1):
        x[:, :, j] = dp[:, :, j] - cp[:, j] * x[:, :, j + 1]
    return x


def j_gradient(path: DensityPath, G, poly: ReactionPolynomials) -> np.ndarray:
    """dJ/dG_{k,j} for the discretised functional."""
    G = _check_grid(path, G)
    return _SliceProblem(path, poly).grad(G) / path.M


@dataclass(frozen=True)
class RateResult:
    value: float
    breakdown: ActionBreakdown | None
    G: np.ndarray | None
    iterations: int
    grad_norm: float
    floor: float = DEFAULT_FLOOR
    trace: tuple = ()

    @property
    def finite_energy(self) -> bool:
        return self.breakdown is not None and math.isfinite(self.breakdown.energy)

    def to_json(self) -> dict:
        out = {"value": self.value, "iterations": self.iterations, "grad_norm": self.grad_norm,
               "floor": self.floor}
        if self.breakdown is not None:
            out["breakdown"] = self.breakdown.to_json()
        return out


def rate_function(path: DensityPath, rho0, poly: ReactionPolynomials, tol: float = GRAD_TOL,
                  max_iter: int = MAX_ITER, floor: float = DEFAULT_FLOOR, raise_on_fail: bool = True) -> RateResult:
    """sup over gridded G of J, started from G = 0.

    Returns +inf when the path does not start at ``rho0`` (within 1e-9).
    Convergence: sup-norm of the slice gradients, per unit time weight,
    below ``tol``.
    """
    r0 = np.asarray(getattr(rho0, "values", rho0), dtype=float)
    if r0.shape != (path.M,):
        raise GridMismatch("initial profile grid differs from the path grid")
    if np.max(np.abs(path.values[0] - r0)) > 1e-9:
        return RateResult(math.inf, None, None, 0, 0.0, floor)
    if len(path) < 2:
        return RateResult(0.0, j_functional(path, np.zeros_like(path.values), poly),
                          np.zeros_like(path.values), 0, 0.0, floor)
    prob = _SliceProblem(path, poly)
    G = np.zeros_like(path.values)
    val = prob.value(G)
    trace = []
    gnorm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = prob.grad(G)
        gnorm = float(np.max(np.abs(g) / prob.w))
        trace.append((it - 1, float(np.sum(val) / path.M), gnorm))
        if gnorm < tol:
            it -= 1
            break
        step_dir = prob.newton_direction(G, g)
        slope = np.sum(g * step_dir, axis=1)
        s = np.ones(G.shape[0])
        todo = np.ones(G.shape[0], dtype=bool)
        newG = G.copy()
        newval = val.copy()
        for _ in range(60):
            cand = G[todo] + s[todo, None] * step_dir[todo]
            cval = _SliceSubset(prob, todo).value(cand)
            ok = cval >= val[todo] + 1e-4 * s[todo] * slope[todo] - 1e-15 * np.abs(val[todo])
            idx = np.nonzero(todo)[0]
            newG[idx[ok]] = cand[ok]
            newval[idx[ok]] = cval[ok]
            todo[idx[ok]] = False
            s[idx[~ok]] *= 0.5
            if not todo.any():
                break
        G, val = newG, newval
    else:
        it = max_iter
    if gnorm >= tol:
        res = RateResult(float(np.sum(val) / path.M), j_functional(path, G, poly), G, it, gnorm, floor, tuple(trace))
        if raise_on_fail:
            raise NotConverged(f"gradient norm {gnorm:.3e} after {it} iterations", res.value, gnorm)
        return res
    bd = j_functional(path, G, poly)
    return RateResult(bd.total, bd, G, it, gnorm, floor, tuple(trace))


class _SliceSubset:
    """View of a _SliceProblem restricted to a subset of time slices."""

    def __init__(self, prob: _SliceProblem, mask):
        self.c = prob.c[mask]
        self.w = prob.w[mask]
        self.chi = prob.chi[mask]
        self.B = prob.B[mask]
        self.D = prob.D[mask]

    value = _SliceProblem.value


def holding_cost(poly: ReactionPolynomials, rho) -> float:
    """Cost per unit time of holding a flat profile at rho: (sqrt B - sqrt D)^2."""
    return float((np.sqrt(poly.B(rho)) - np.sqrt(poly.D(rho))) ** 2)


def homogeneous_lagrangian(poly: ReactionPolynomials, rho, a):
    """L(rho, a) = sup_g [a g - B (e^g - 1) - D (e^-g - 1)] and its partial
    derivatives (dL/drho, dL/da)."""
    rho = np.asarray(rho, dtype=float)
    a = np.asarray(a, dtype=float)
    B, D = poly.B(rho), poly.D(rho)
    y = (a + np.sqrt(a * a + 4 * B * D)) / (2 * B)
    # stable form for a << 0
    y = np.where(a < 0, 2 * D / (np.sqrt(a * a + 4 * B * D) - a), y)
    g = np.log(y)
    L = a * g - B * (y - 1) - D * (1 / y - 1)
    dL_drho = -poly.dB(rho) * (y - 1) - poly.dD(rho) * (1 / y - 1)
    return L, dL_drho, g


@dataclass(frozen=True)
class QuasipotentialResult:
    value: float
    oracle: float
    path: np.ndarray
    times: np.ndarray
    converged: bool
    label: str = "homogeneous paths only: upper bound for the quasi-potential"

    def to_json(self) -> dict:
        return {"value": self.value, "oracle": self.oracle, "converged": self.converged, "label": self.label}


def quasipotential_oracle(poly: ReactionPolynomials, rho_well: float, rho_target: float) -> float:
    """int_{well}^{target} log(D(u) / B(u)) du by adaptive quadrature."""
    if rho_target == rho_well:
        return 0.0
    val, _ = integrate.quad(lambda u: math.log(poly.D(u) / poly.B(u)), rho_well, rho_target,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


def quasipotential_homogeneous(poly: ReactionPolynomials, rho_target: float, rho_well: float,
                               T: float = 50.0, steps: int = 400, tol: float = 1e-10,
                               raise_on_fail: bool = True) -> QuasipotentialResult:
    """Minimal action over flat paths from ``rho_well`` to ``rho_target`` on a
    long fixed horizon (the path may idle at the well)."""
    if not (0 < rho_target < 1 and 0 < rho_well < 1):
        raise ValueError("densities must lie in (0, 1)")
    oracle = quasipotential_oracle(poly, rho_well, rho_target)
    times = np.linspace(0.0, T, steps + 1)
    if rho_target == rho_well:
        return QuasipotentialResult(0.0, oracle, np.full(steps + 1, rho_well), times, True)
    dt = T / steps
    # start: idle at the well for the first half, then a straight climb
    x0 = np.full(steps + 1, float(rho_well))
    half = steps // 2
    x0[half:] = np.linspace(rho_well, rho_target, steps + 1 - half)

    def action(inner):
        x = np.concatenate([[rho_well], inner, [rho_target]])
        mid = 0.5 * (x[1:] + x[:-1])
        a = np.diff(x) / dt
        L, dL_dr, g = homogeneous_lagrangian(poly, mid, a)
        val = dt * np.sum(L)
        # d/dx_k through the midpoints k-1/2, k+1/2 and the velocities
        dmid = 0.5 * dt * dL_dr
        grad = dmid[:-1] + dmid[1:] + g[:-1] - g[1:]
        return val, grad

    lo, hi = 1e-9, 1 - 1e-9
    res = optimize.minimize(action, x0[1:-1], jac=True, method="L-BFGS-B",
                            bounds=[(lo, hi)] * (steps - 1),
                            options={"maxiter": 20000, "maxfun": 40000, "ftol": 1e-15, "gtol": tol})
    val, grad = action(res.x)
    converged = bool(res.success) or float(np.max(np.abs(grad))) < 1e-6
    path = np.concatenate([[rho_well], res.x, [rho_target]])
    out = QuasipotentialResult(float(val), oracle, path, times, converged)
    if not converged and raise_on_fail:
        raise NotConverged(f"quasi-potential optimisation failed: {res.message}", float(val),
                           float(np.max(np.abs(grad))))
    return out


@dataclass(frozen=True)
class WellDepth:
    well: float
    radius: float
    estimate: float
    sides: dict
    label: str = "upper-bound estimate (homogeneous paths)"


def well_depth_estimate(poly: ReactionPolynomials, rho_well: float, radius: float, **kw) -> WellDepth:
    """Half the smallest homogeneous quasi-potential at the flat profiles
    rho_well +- radius (flat profiles sit at metric distance |offset| from
    the well)."""
    sides = {}
    for sgn in (-1, 1):
        target = rho_well + sgn * radius
        if 0 < target < 1:
            sides[target] = quasipotential_homogeneous(poly, target, rho_well, **kw).value
    if not sides:
        raise ValueError("radius leaves (0, 1) on both sides of the well")
    return WellDepth(rho_well, radius, 0.5 * min(sides.values()), sides)


def well_depths(poly: ReactionPolynomials, radius: float, **kw) -> tuple:
    """(h_0, per-well estimates); needs at least two wells."""
    prof = potential_minima(poly)
    if prof.ell < 2:
        raise SingleWell("well depths need at least two local minima of the potential")
    per = [well_depth_estimate(poly, m, radius, **kw) for m in prof.minima]
    return min(w.estimate for w in per), per


# ---------------------------------------------------------------------------
# slow mode: inhomogeneous paths
# ---------------------------------------------------------------------------


def _dJ_drho(path: DensityPath, G, poly: ReactionPolynomials) -> np.ndarray:
    """Partial derivative of the discretised J with respect to the path values."""
    v = path.values
    M = path.M
    h = 1.0 / M
    w = _trap_weights(len(path), path.dt)[:, None]
    Gbar = np.zeros_like(G)
    # d/d rho_k of sum_m <rho_{m+1} - rho_m, (G_m + G_{m+1}) / 2>
    Gbar[1:] += 0.5 * (G[1:] + G[:-1])
    Gbar[:-1] -= 0.5 * (G[1:] + G[:-1])
    grad = Gbar - w * 0.5 * laplacian(G)
    ge2 = (_edge_diff(G) * M) ** 2
    dchi = 1 - 2 * v
    grad -= w * 0.25 * dchi * (ge2 + np.roll(ge2, 1, axis=1))
    grad -= w * (poly.dB(v) * np.expm1(G) + poly.dD(v) * np.expm1(-G))
    return h * grad


def quasipotential_path(poly: ReactionPolynomials, rho_well: float, target: DensitySlice,
                        T: float = 2.0, steps: int = 40, maxiter: int = 200) -> QuasipotentialResult:
    """Slow mode: minimise the action over space-time paths from the flat
    well profile to ``target`` on a fixed horizon (inner maximisation over G
    by rate_function, outer L-BFGS-B with the envelope gradient).  No
    optimality claim."""
    M = target.M
    times = np.linspace(0.0, T, steps + 1)
    start = np.full(M, float(rho_well))
    s = (times / T)[:, None]
    x0 = (1 - s) * start + s * target.values

    def action(inner):
        vals = np.vstack([start, inner.reshape(steps - 1, M), target.values])
        path = DensityPath(times, vals)
        res = rate_function(path, start, poly, tol=1e-8, raise_on_fail=False)
        g = _dJ_drho(path, res.G, poly)
        return res.value, g[1:-1].ravel()

    eps = 1e-6
    res = optimize.minimize(action, x0[1:-1].ravel(), jac=True, method="L-BFGS-B",
                            bounds=[(eps, 1 - eps)] * ((steps - 1) * M), options={"maxiter": maxiter})
    vals = np.vstack([start, res.x.reshape(steps - 1, M), target.values])
    oracle = math.nan
    if np.ptp(target.values) == 0:
        oracle = quasipotential_oracle(poly, rho_well, float(target.values[0]))
    return QuasipotentialResult(float(res.fun), oracle, vals, times, bool(res.success),
                                "space-time paths on a fixed horizon: upper bound, no optimality claim")

"""Exact computations for the full chain on {0,1}^n, n <= 20.

State index convention: bit x of the index is eta(x) (as in
``Configuration.to_index``).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.stats import poisson

from .errors import DegenerateSet, EmptyTarget, SizeCapExceeded, SolveFailure
from .hydro import DEFAULT_K, fourier_metric
from .model import Configuration, LocalRate, _check_window

__all__ = [
    "MAX_N",
    "GeneratorMatrix",
    "StateSet",
    "build_generator",
    "state_bits",
    "stationary_distribution",
    "tv_curve",
    "mixing_time_exact",
    "orbit_representatives",
    "mean_hitting_exact",
    "RateIntoSet",
    "rate_into_set",
]

MAX_N = 20
# largest state space handled with dense transition matrices
DENSE_STATES = 4096
TRUNCATION = 1e-12


def state_bits(n: int) -> np.ndarray:
    """(2^n, n) uint8 array; row s holds the configuration with index s."""
    s = np.arange(2**n, dtype=np.int64)[:, None]
    return ((s >> np.arange(n)) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    n: int
    rate: LocalRate
    Q: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.Q.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.Q.diagonal()

    def off_diagonal(self) -> sp.csr_matrix:
        off = self.Q.tolil()
        off.setdiag(0)
        return off.tocsr()


def _window_codes_all(rate: LocalRate, bits: np.ndarray) -> np.ndarray:
    R = rate.radius
    codes = np.zeros(bits.shape, dtype=np.int64)
    for j in range(-R, R + 1):
        codes = (codes << 1) | np.roll(bits, -j, axis=1)
    return codes


def build_generator(n: int, rate: LocalRate) -> GeneratorMatrix:
    """Sparse generator: flips at rate c(x, eta), exchanges at rate n^2/2 per
    bond with unequal occupations.  For n = 2 the two bonds join the same pair
    of sites, so each contributes and the exchange rate between 01 and 10 is 4.
    """
    if n > MAX_N:
        raise SizeCapExceeded(f"n={n} exceeds the exact-computation cap {MAX_N}")
    if n < 1:
        raise ValueError("n must be positive")
    rate = _check_window(rate, n)
    S = 2**n
    bits = state_bits(n)
    idx = np.arange(S, dtype=np.int64)
    codes = _window_codes_all(rate, bits)
    rows, cols, vals = [], [], []
    for x in range(n):
        rows.append(idx)
        cols.append(idx ^ (1 << x))
        vals.append(rate.table[codes[:, x]])
    if n > 1:
        ex = n * n / 2.0
        for x in range(n):
            y = (x + 1) % n
            movable = bits[:, x] != bits[:, y]
            src = idx[movable]
            rows.append(src)
            cols.append(src ^ (1 << x) ^ (1 << y))
            vals.append(np.full(src.size, ex))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    off = sp.coo_matrix((v, (r, c)), shape=(S, S)).tocsr()
    off.sum_duplicates()
    Q = off - sp.diags(np.asarray(off.sum(axis=1)).ravel())
    return GeneratorMatrix(n, rate, Q.tocsr())


# ---------------------------------------------------------------------------
# state sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateSet:
    """Explicit bitset over the 2^n states, built from a predicate on the
    empirical measure."""

    n: int
    mask: np.ndarray
    label: str = ""
    predicate: object = None

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (2**self.n,):
            raise ValueError("mask must have one entry per state")
        object.__setattr__(self, "mask", m)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, config) -> bool:
        return bool(self.mask[Configuration(getattr(config, "bits", config)).to_index()])

    def complement(self) -> "StateSet":
        pred = None if self.predicate is None else (lambda b, p=self.predicate: ~p(b))
        return StateSet(self.n, ~self.mask, f"not ({self.label})", pred)

    def recheck(self, samples: int = 64, rng=None) -> bool:
        """Re-evaluate the defining predicate on random states."""
        if self.predicate is None:
            return True
        rng = np.random.default_rng(rng)
        s = rng.integers(0, 2**self.n, size=samples)
        bits = ((s[:, None] >> np.arange(self.n)) & 1).astype(np.uint8)
        return bool(np.array_equal(np.asarray(self.predicate(bits), dtype=bool), self.mask[s]))

    @classmethod
    def from_predicate(cls, n: int, predicate, label: str = "") -> "StateSet":
        """``predicate`` maps a (states, n) occupation array to booleans."""
        if n > MAX_N:
            raise SizeCapExceeded(f"n={n} exceeds the exact-computation cap {MAX_N}")
        return cls(n, np.asarray(predicate(state_bits(n)), dtype=bool), label, predicate)

    @classmethod
    def density_window(cls, n: int, lo: float = -math.inf, hi: float = math.inf) -> "StateSet":
        """States whose particle density lies in [lo, hi]."""
        def pred(b):
            d = b.sum(axis=1) / n
            return (d >= lo - 1e-12) & (d <= hi + 1e-12)
        return cls.from_predicate(n, pred, f"density in [{lo}, {hi}]")

    @classmethod
    def metric_ball(cls, n: int, center, radius: float, K: int = DEFAULT_K,
                    outside: bool = False) -> "StateSet":
        """Conservative metric ball around ``center`` (a DensitySlice).

        ``outside=False``: states surely within ``radius`` (d + tail < radius).
        ``outside=True``: states surely at distance >= radius (d - tail >= radius),
        the escape rule used by the hitting experiments.
        """
        def pred(b):
            m = fourier_metric(b, center, K)
            if outside:
                return m.value - m.tail >= radius
            return m.value + m.tail < radius
        side = ">=" if outside else "<"
        return cls.from_predicate(n, pred, f"d(pi, center) {side} {radius}")


# ---------------------------------------------------------------------------
# stationary distribution
# ---------------------------------------------------------------------------


def _residual(mu, Q) -> float:
    return float(np.max(np.abs(Q.T @ mu)))


def stationary_distribution(gen: GeneratorMatrix, tol: float = 1e-10) -> np.ndarray:
    """Solve mu Q = 0, sum mu = 1 (one balance equation replaced by the
    normalisation).  Raises SolveFailure if the residual exceeds ``tol``."""
    Q = gen.Q
    S = gen.size
    if S == 1:
        return np.ones(1)
    A = Q.T.tolil()
    A[0, :] = np.ones(S)
    rhs = np.zeros(S)
    rhs[0] = 1.0
    A = A.tocsc()
    try:
        if S <= 1 << 16:
            mu = spla.spsolve(A, rhs)
        else:
            mu, info = spla.gmres(A, rhs, rtol=1e-13, restart=200, maxiter=2000)
    except Exception as exc:  # noqa: BLE001 - solver failures are reported uniformly
        raise SolveFailure(f"linear solve failed: {exc}", math.nan) from exc
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)):
        raise SolveFailure("non-finite solution", math.nan)
    res = _residual(mu, Q)
    # scale-aware check: row sums of Q are O(n^3)
    if res > tol * max(1.0, float(np.max(gen.exit_rates))) or mu.min() <= 0:
        raise SolveFailure(f"stationary solve residual {res:.3e}", res)
    return mu / mu.sum()


# ---------------------------------------------------------------------------
# transition probabilities by uniformization
# ---------------------------------------------------------------------------


def _poisson_terms(m: float, tol: float) -> np.ndarray:
    """Poisson(m) weights for j = 0..J with P(N > J) <= tol."""
    J = int(poisson.isf(tol, m)) + 1 if m > 0 else 0
    while m > 0 and poisson.sf(J, m) > tol:
        J += 1
    return poisson.pmf(np.arange(J + 1), m)


def _uniformized(Q):
    lam = float(np.max(-Q.diagonal()))
    lam = lam if lam > 0 else 1.0
    Kmat = Q / lam
    if sp.issparse(Kmat):
        Kmat = Kmat + sp.identity(Q.shape[0], format="csr")
    else:
        Kmat = Kmat + np.eye(Q.shape[0])
    return lam, Kmat


def _propagate_rows(R: np.ndarray, Kmat, lam: float, t: float, tol: float,
                    chunk: float = 64.0) -> np.ndarray:
    """R P(t) for row vectors R, in chunks with lam * dt <= chunk."""
    if t <= 0:
        return R.copy()
    pieces = max(1, math.ceil(lam * t / chunk))
    dt = t / pieces
    w = _poisson_terms(lam * dt, tol / pieces)
    KT = Kmat.T.tocsr() if sp.issparse(Kmat) else Kmat.T
    out = R.T.copy()
    for _ in range(pieces):
        term = out
        acc = w[0] * term
        for wj in w[1:]:
            term = KT @ term
            acc += wj * term
        out = acc
    return out.T


def _dense_step(Kmat: np.ndarray, lam: float, t: float, tol: float) -> np.ndarray:
    """Full matrix P(t) = sum_j Poisson(lam t)_j K^j by Horner's rule."""
    w = _poisson_terms(lam * t, tol)
    P = w[-1] * np.eye(Kmat.shape[0])
    for wj in w[-2::-1]:
        P = Kmat @ P
        P[np.diag_indices_from(P)] += wj
    return P


def _tv_rows(R: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(R - mu[None, :]).sum(axis=1)


def tv_curve(gen: GeneratorMatrix, eta0, times, mu: np.ndarray | None = None,
             tol: float = TRUNCATION) -> np.ndarray:
    """TV distance between the law at each time (started from eta0) and mu."""
    if mu is None:
        mu = stationary_distribution(gen)
    i0 = eta0 if isinstance(eta0, (int, np.integer)) else Configuration(getattr(eta0, "bits", eta0)).to_index()
    times = np.asarray(times, dtype=float)
    order = np.argsort(times)
    lam, Kmat = _uniformized(gen.Q)
    row = np.zeros((1, gen.size))
    row[0, i0] = 1.0
    out = np.empty(times.size)
    t_prev = 0.0
    for k in order:
        row = _propagate_rows(row, Kmat, lam, times[k] - t_prev, tol)
        t_prev = times[k]
        out[k] = min(1.0, float(_tv_rows(row, mu)[0]))
    return out


# ---------------------------------------------------------------------------
# mixing time
# ---------------------------------------------------------------------------


def _reverse_bits(idx: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(idx)
    for x in range(n):
        out |= ((idx >> x) & 1) << (n - 1 - x)
    return out


def _rate_symmetries(rate: LocalRate) -> tuple[bool, bool]:
    w = rate.width
    codes = np.arange(2**w)
    rev = _reverse_bits(codes, w)
    reflect = bool(np.allclose(rate.table[rev], rate.table, rtol=0, atol=0))
    spin = bool(np.allclose(rate.table[codes ^ (2**w - 1)], rate.table, rtol=0, atol=0))
    return reflect, spin


def orbit_representatives(gen: GeneratorMatrix) -> np.ndarray:
    """One state per orbit of the symmetry group of the dynamics: translations,
    plus reflection and global spin flip when the rate table is invariant
    under them."""
    n = gen.n
    S = gen.size
    rate = _check_window(gen.rate, n)
    reflect, spin = _rate_symmetries(rate)
    idx = np.arange(S, dtype=np.int64)
    full = S - 1
    images = [idx]
    if reflect:
        images.append(_reverse_bits(idx, n))
    if spin:
        images += [im ^ full for im in images]
    canon = idx.copy()
    for im in images:
        for r in range(n):
            rot = ((im >> r) | (im << (n - r))) & full
            canon = np.minimum(canon, rot)
    return np.unique(canon)


def mixing_time_exact(gen: GeneratorMatrix, eps: float, mu: np.ndarray | None = None,
                      rel_tol: float = 1e-3, symmetry: bool = True) -> float:
    """inf{t : max_eta TV(P_t(eta, .), mu) <= eps}, up to relative ``rel_tol``.

    The returned time t satisfies max TV(t) <= eps and max TV(t (1 - rel_tol)) > eps.
    The maximum runs over symmetry-orbit representatives (all states with
    ``symmetry=False``).  Up to 4096 states, transition matrices are dense:
    a short uniformized step is doubled by squaring to bracket the answer,
    then the bracket is refined with stored powers.  Larger chains propagate
    the representative rows with sparse uniformization.
    """
    if gen.n > MAX_N:
        raise SizeCapExceeded(f"n={gen.n} exceeds the exact-computation cap {MAX_N}")
    if mu is None:
        mu = stationary_distribution(gen)
    reps = orbit_representatives(gen) if symmetry else np.arange(gen.size)
    if float(np.max(1.0 - mu[reps])) <= eps:
        return 0.0
    refine = max(1, math.ceil(-math.log2(rel_tol)))
    lam, Kmat = _uniformized(gen.Q)
    if gen.size <= DENSE_STATES:
        return _mixing_dense(Kmat.toarray(), lam, mu, reps, eps, refine)
    return _mixing_sparse(Kmat, lam, mu, reps, eps, refine)


def _mixing_dense(Kmat, lam, mu, reps, eps, refine):
    h = 0.125 / lam
    while True:
        P = _dense_step(Kmat, lam, h, TRUNCATION)
        if np.max(_tv_rows(P[reps], mu)) > eps:
            break
        h /= 8.0
    # powers[i] = P(2^i h); only the last refine+1 are needed for refinement
    powers = deque([P], maxlen=refine + 2)
    k = 0
    while np.max(_tv_rows(powers[-1][reps], mu)) > eps:
        powers.append(powers[-1] @ powers[-1])
        k += 1
    # TV(2^(k-1) h) > eps >= TV(2^k h)
    R = powers[-2][reps]
    t_lo = 2.0 ** (k - 1) * h
    for j in range(1, refine + 1):
        step = 2.0 ** (k - 1 - j) * h
        idx = len(powers) - 2 - j
        Pj = powers[idx] if idx >= 0 and k - 1 - j >= 0 else _dense_step(Kmat, lam, step, TRUNCATION)
        cand = R @ Pj
        if np.max(_tv_rows(cand, mu)) > eps:
            R, t_lo = cand, t_lo + step
    return t_lo + 2.0 ** (k - 1 - refine) * h


def _mixing_sparse(Kmat, lam, mu, reps, eps, refine):
    R = np.zeros((reps.size, mu.size))
    R[np.arange(reps.size), reps] = 1.0
    t, step = 0.0, 1.0 / lam
    while True:
        nxt = _propagate_rows(R, Kmat, lam, step, TRUNCATION)
        if np.max(_tv_rows(nxt, mu)) <= eps:
            break
        R, t, step = nxt, t + step, step * 2.0
    # TV(t) > eps >= TV(t + step); bisect on the increment
    for _ in range(refine + math.ceil(math.log2(max(1.0, step / max(t, 1e-300))))):
        step /= 2.0
        cand = _propagate_rows(R, Kmat, lam, step, TRUNCATION)
        if np.max(_tv_rows(cand, mu)) > eps:
            R, t = cand, t + step
        if step <= t * 2.0 ** (-refine):
            break
    return t + step


# ---------------------------------------------------------------------------
# hitting times and the rate into a set
# ---------------------------------------------------------------------------


def mean_hitting_exact(gen: GeneratorMatrix, target: StateSet) -> np.ndarray:
    """E_eta[H_target] for every state: zero on the target, and
    (Q E)(eta) = -1 elsewhere."""
    if target.size == 0:
        raise EmptyTarget("target set is empty")
    out = np.zeros(gen.size)
    rest = np.nonzero(~target.mask)[0]
    if rest.size == 0:
        return out
    Q = gen.Q.tocsr()[rest][:, rest].tocsc()
    E = spla.spsolve(Q, -np.ones(rest.size))
    E = np.atleast_1d(E)
    res = float(np.max(np.abs(Q @ E + 1.0)))
    if not np.all(np.isfinite(E)) or res > 1e-6:
        raise SolveFailure(f"hitting-time solve residual {res:.3e}", res)
    out[rest] = E
    return out


@dataclass(frozen=True)
class RateIntoSet:
    rate: float
    boundary: StateSet
    mu_A: float
    exact_bound: Fraction
    into: np.ndarray  # R_N(xi, A) for every state (zero on A)
    exact_rate: Fraction  # same average, in rational arithmetic on the float inputs
    exact_into_max: Fraction

    @property
    def within_bound(self) -> bool:
        """Rational comparison with n^3/2 + n max c (float rounding of the
        average can exceed the bound by an ulp when it is attained)."""
        return self.exact_rate <= self.exact_bound and self.exact_into_max <= self.exact_bound


def rate_into_set(gen: GeneratorMatrix, mu: np.ndarray, A: StateSet) -> RateIntoSet:
    """Average rate of jumps from the complement of A into A under mu, and
    the outer boundary of A (states outside A one flip or exchange away)."""
    mu_A = float(mu[A.mask].sum())
    if A.size == 0 or A.size == gen.size or not 0.0 < mu_A < 1.0:
        raise DegenerateSet("rate into a set needs 0 < mu(A) < 1")
    off = gen.off_diagonal()
    into = np.asarray(off[:, A.mask].sum(axis=1)).ravel()
    into[A.mask] = 0.0
    out_mask = ~A.mask
    r = float(np.dot(mu[out_mask], into[out_mask]) / mu[out_mask].sum())
    # outer boundary: neighbours by flips or by any bond swap (moves along
    # equal bonds are trivial and never leave the complement)
    n = gen.n
    idx = np.arange(gen.size, dtype=np.int64)
    near = np.zeros(gen.size, dtype=bool)
    for x in range(n):
        near |= A.mask[idx ^ (1 << x)]
        y = (x + 1) % n
        bx, by = (idx >> x) & 1, (idx >> y) & 1
        swapped = np.where(bx != by, idx ^ (1 << x) ^ (1 << y), idx)
        near |= A.mask[swapped]
    boundary = StateSet(n, near & out_mask, f"outer boundary of {A.label}")
    rate = _check_window(gen.rate, n)
    bound = Fraction(n**3, 2) + n * Fraction(float(rate.c_max))
    exact_r, exact_max = _exact_rate(off, mu, A.mask)
    return RateIntoSet(r, boundary, mu_A, bound, into, exact_r, exact_max)


def _exact_rate(off, mu, mask):
    """sum mu(xi) R(xi, A) / mu(A^c) and max R(xi, A) over A^c, as Fractions."""
    off = off.tocsr()
    num, den, top = Fraction(0), Fraction(0), Fraction(0)
    for i in np.nonzero(~mask)[0]:
        lo, hi = off.indptr[i], off.indptr[i + 1]
        cols, vals = off.indices[lo:hi], off.data[lo:hi]
        R = sum((Fraction(float(v)) for v in vals[mask[cols]]), Fraction(0))
        w = Fraction(float(mu[i]))
        num += w * R
        den += w
        top = max(top, R)
    return num / den, top

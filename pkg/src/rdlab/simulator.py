"""Exact event-driven simulation of the Glauber + n^2 Kawasaki process.

The state keeps two incremental caches so that every event costs O(R):

* the window code of every site plus the number of sites per code, so the
  total flip rate is exact and a flip site is drawn proportionally to its rate;
* the set of active bonds (unequal endpoints).  Exchanges across equal
  endpoints do not change the configuration and are never scheduled.

All kernels are numba-compiled and take a ``numpy.random.Generator``; replica
ensembles use one Philox stream per replica, spawned from a ``SeedSequence``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import AttractivityRequired, BinMismatch
from .model import Configuration, LocalRate, _check_window, is_attractive, window_codes

EVENT_EXCHANGE = 0
EVENT_FLIP = 1
EVENT_LOG_DTYPE = np.dtype([("dt", "<f8"), ("type", "u1"), ("site", "<i4")])

# counters layout
_N_ACTIVE, _N_FLIPS, _N_EXCH = 0, 1, 2


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def spawn_rngs(seed, k: int) -> list:
    """k independent Philox streams; replica i always gets the same stream."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in ss.spawn(k)]


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _wrap(x, n):
    if x < 0:
        return x + n
    if x >= n:
        return x - n
    return x


@numba.njit(cache=True)
def _code_at(eta, x, R, n):
    code = 0
    for j in range(-R, R + 1):
        code = (code << 1) | eta[_wrap(x + j, n)]
    return code


@numba.njit(cache=True)
def _flip_total(bcount, table):
    s = 0.0
    for c in range(table.shape[0]):
        s += bcount[c] * table[c]
    return s


@numba.njit(cache=True)
def _fourier_distance(cc, ss, centre_c, centre_s, weights):
    d = 0.0
    for k in range(cc.shape[0]):
        d += weights[k] * (abs(cc[k] - centre_c[k]) + abs(ss[k] - centre_s[k]))
    return d


# Hitting-mode status codes returned by _run.
RUN_TIME, RUN_BUDGET, RUN_ESCAPED = 0, 1, 2


@numba.njit(cache=True, nogil=True)
def _run(
    eta, codes, bcount, bonds, bpos, counters, ftot,
    table, R, exch, flips, t, t_end, max_events, rng,
    log_dt, log_type, log_site,
    watch, basis_c, basis_s, cc, ss, centre_c, centre_s, weights, radii, excursions,
):
    """Event loop.  Helpers are written inline: passing arrays through
    non-inlined calls costs more than the event itself.

    Returns (time, events done, status).  With ``watch`` the Fourier
    coefficients (cc, ss) of the empirical measure are kept current and the
    run stops as soon as the conservative distance to the centre reaches
    radii[2]; excursions[0] is the phase (0: looking for the annulus,
    1: looking for the inner ball or escape), excursions[1] the excursion
    count, followed by (sigma_k, tau_k) pairs.
    """
    n = eta.shape[0]
    K1 = cc.shape[0]
    use_log = log_dt.shape[0] > 0
    nact = counters[0]
    nfl = counters[1]
    nex = counters[2]
    ft = ftot[0]
    alpha, beta, gamma, tail = radii[0], radii[1], radii[2], radii[3]
    cap = (excursions.shape[0] - 2) // 2
    done = 0
    status = RUN_BUDGET
    while done < max_events:
        lam_ex = exch * nact
        lam_fl = ft if flips else 0.0
        lam = lam_ex + lam_fl
        if lam <= 0.0:
            t = t_end
            status = RUN_TIME
            break
        dt = rng.standard_exponential() / lam
        if t + dt >= t_end:
            t = t_end
            status = RUN_TIME
            break
        t += dt
        u = rng.random() * lam
        if u < lam_ex:
            k = int(u / exch)
            if k >= nact:
                k = nact - 1
            x = bonds[k]
            y = x + 1
            if y == n:
                y = 0
            kind = 0
            site = x
            nex += 1
        else:
            # flip site proportional to its rate: pick the code, then scan
            u -= lam_ex
            c = -1
            for k in range(table.shape[0]):
                if bcount[k] == 0:
                    continue
                c = k
                w = bcount[k] * table[k]
                if u < w:
                    break
                u -= w
            k = int(u / table[c])
            if k >= bcount[c]:
                k = bcount[c] - 1
            x = 0
            for z in range(n):
                if codes[z] == c:
                    if k == 0:
                        x = z
                        break
                    k -= 1
            y = -1
            kind = 1
            site = x
            nfl += 1
        # toggle the changed sites (one for a flip, two for an exchange)
        for q in range(2):
            z = x if q == 0 else y
            if z < 0:
                break
            eta[z] ^= 1
            for wv in range(z - R, z + R + 1):
                v = wv
                if v < 0:
                    v += n
                elif v >= n:
                    v -= n
                old = codes[v]
                new = old ^ (1 << (R + wv - z))
                codes[v] = new
                bcount[old] -= 1
                bcount[new] += 1
                ft += table[new] - table[old]
            if watch:
                sgn = 1.0 if eta[z] == 1 else -1.0
                for m in range(K1):
                    cc[m] += sgn * basis_c[m, z]
                    ss[m] += sgn * basis_s[m, z]
        # active-bond bookkeeping for the bonds left of x and right of the last site
        for q in range(2):
            if q == 0:
                b = x - 1 if x > 0 else n - 1
            else:
                b = x if y < 0 else y
            b1 = b + 1
            if b1 == n:
                b1 = 0
            kk = bpos[b]
            if eta[b] != eta[b1]:
                if kk < 0:
                    bonds[nact] = b
                    bpos[b] = nact
                    nact += 1
            elif kk >= 0:
                nact -= 1
                last = bonds[nact]
                bonds[kk] = last
                bpos[last] = kk
                bpos[b] = -1
        if use_log:
            log_dt[done] = dt
            log_type[done] = kind
            log_site[done] = site
        done += 1
        if (done & 4095) == 0:
            ft = _flip_total(bcount, table)
        if watch:
            if (done & 65535) == 0:
                for m in range(K1):
                    sc = 0.0
                    sn = 0.0
                    for z in range(n):
                        if eta[z] == 1:
                            sc += basis_c[m, z]
                            sn += basis_s[m, z]
                    cc[m] = sc
                    ss[m] = sn
            d = _fourier_distance(cc, ss, centre_c, centre_s, weights)
            j = int(excursions[1])
            if excursions[0] == 0:
                if d - tail >= beta and d + tail <= 2.0 * beta:
                    if j < cap:
                        excursions[2 + 2 * j] = t
                    excursions[0] = 1
            if d - tail >= gamma:
                if excursions[0] == 0 and j < cap:
                    # jumped over the annulus straight out of the ball
                    excursions[2 + 2 * j] = t
                if j < cap:
                    excursions[3 + 2 * j] = t
                excursions[1] = j + 1.0
                excursions[0] = 2
                status = RUN_ESCAPED
                break
            if excursions[0] == 1 and d + tail < alpha:
                if j < cap:
                    excursions[3 + 2 * j] = t
                excursions[1] = j + 1.0
                excursions[0] = 0
    counters[0] = nact
    counters[1] = nfl
    counters[2] = nex
    ftot[0] = _flip_total(bcount, table)
    return t, done, status


# ---------------------------------------------------------------------------
# single-copy state
# ---------------------------------------------------------------------------


@dataclass
class SimState:
    """Mutable simulation state with incremental rate caches."""

    rate: LocalRate
    eta: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    flips: bool = True
    codes: np.ndarray = field(init=False, repr=False)
    bcount: np.ndarray = field(init=False, repr=False)
    bonds: np.ndarray = field(init=False, repr=False)
    bpos: np.ndarray = field(init=False, repr=False)
    counters: np.ndarray = field(init=False, repr=False)
    ftot: np.ndarray = field(init=False, repr=False)

    @classmethod
    def create(cls, rate: LocalRate, config, seed=None, flips: bool = True, time: float = 0.0):
        bits = config.bits if isinstance(config, Configuration) else np.asarray(config)
        rate = _check_window(rate, len(bits))
        st = cls(rate, np.array(bits, dtype=np.int64), make_rng(seed), float(time), flips)
        st.rebuild()
        return st

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @property
    def exchange_rate(self) -> float:
        return self.n * self.n / 2.0

    def rebuild(self):
        n, ncodes = self.n, self.rate.table.shape[0]
        self.codes = window_codes(self.rate, self.eta).astype(np.int64)
        self.bcount = np.bincount(self.codes, minlength=ncodes).astype(np.int64)
        active = np.nonzero(self.eta != np.roll(self.eta, -1))[0]
        self.bonds = np.zeros(n, dtype=np.int64)
        self.bonds[: active.size] = active
        self.bpos = np.full(n, -1, dtype=np.int64)
        self.bpos[active] = np.arange(active.size)
        self.counters = np.array([active.size, 0, 0], dtype=np.int64)
        self.ftot = np.array([float(self.rate.table[self.codes].sum())])

    @property
    def config(self) -> Configuration:
        return Configuration(self.eta.astype(np.uint8))

    @property
    def flip_rates(self) -> np.ndarray:
        return self.rate.table[self.codes]

    @property
    def active_bonds(self) -> np.ndarray:
        return np.sort(self.bonds[: self.counters[_N_ACTIVE]])

    @property
    def total_rate(self) -> float:
        flip = float(self.ftot[0]) if self.flips else 0.0
        return self.exchange_rate * int(self.counters[_N_ACTIVE]) + flip

    @property
    def n_flips(self) -> int:
        return int(self.counters[_N_FLIPS])

    @property
    def n_exchanges(self) -> int:
        return int(self.counters[_N_EXCH])

    def check_caches(self) -> bool:
        """Full recomputation of flip rates and active bonds against the caches."""
        codes = window_codes(self.rate, self.eta)
        ok = np.array_equal(codes, self.codes)
        ok &= np.array_equal(np.bincount(codes, minlength=self.bcount.size), self.bcount)
        active = set(np.nonzero(self.eta != np.roll(self.eta, -1))[0].tolist())
        ok &= set(self.bonds[: self.counters[_N_ACTIVE]].tolist()) == active
        ok &= bool(np.all((self.bpos >= 0) == np.isin(np.arange(self.n), list(active))))
        ok &= math.isclose(self.ftot[0], float(self.rate.table[codes].sum()), rel_tol=1e-9, abs_tol=1e-9)
        return bool(ok)

    def copy(self, seed=None) -> "SimState":
        return SimState.create(self.rate, self.eta, seed if seed is not None else self.rng, self.flips, self.time)


_EMPTY_F = np.zeros(0)
_EMPTY_U8 = np.zeros(0, dtype=np.uint8)
_EMPTY_I4 = np.zeros(0, dtype=np.int32)
_NO_WATCH = (np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), np.zeros(1), np.zeros(1),
             np.zeros(1), np.zeros(1), np.zeros(4), np.zeros(2))


class EventLog:
    """Binary event log: records of (time delta, event type, site)."""

    def __init__(self, capacity: int = 1 << 16):
        self.capacity = capacity
        self.chunks = []

    def buffers(self):
        return (np.zeros(self.capacity), np.zeros(self.capacity, dtype=np.uint8),
                np.zeros(self.capacity, dtype=np.int32))

    def append(self, dt, kind, site, k):
        rec = np.zeros(k, dtype=EVENT_LOG_DTYPE)
        rec["dt"], rec["type"], rec["site"] = dt[:k], kind[:k], site[:k]
        self.chunks.append(rec)

    @property
    def records(self) -> np.ndarray:
        if not self.chunks:
            return np.zeros(0, dtype=EVENT_LOG_DTYPE)
        return np.concatenate(self.chunks)

    def write(self, path):
        self.records.tofile(path)

    @staticmethod
    def read(path) -> np.ndarray:
        return np.fromfile(path, dtype=EVENT_LOG_DTYPE)


def advance(state: SimState, t_end: float, log: EventLog | None = None,
            max_events: int | None = None) -> SimState:
    """Sample the exact trajectory of ``state`` up to time ``t_end`` (in place).

    With ``max_events`` the run may stop early, at the time of the last event.
    """
    if t_end < state.time:
        raise ValueError("t_end must not precede the current time")
    budget = max_events if max_events is not None else np.iinfo(np.int64).max
    chunk = log.capacity if log is not None else budget
    bufs = log.buffers() if log is not None else (_EMPTY_F, _EMPTY_U8, _EMPTY_I4)
    while True:
        t, done, status = _run(
            state.eta, state.codes, state.bcount, state.bonds, state.bpos, state.counters,
            state.ftot, state.rate.table, state.rate.radius, state.exchange_rate, state.flips,
            state.time, float(t_end), min(chunk, budget), state.rng, *bufs, False, *_NO_WATCH,
        )
        state.time = t
        budget -= done
        if log is not None:
            log.append(*bufs, done)
        if status == RUN_TIME or budget <= 0:
            return state


def replay(rate: LocalRate, config, records: np.ndarray, flips: bool = True) -> SimState:
    """Re-apply a logged event sequence deterministically (no randomness)."""
    st = SimState.create(rate, config, seed=0, flips=flips)
    n = st.n
    for r in records:
        x = int(r["site"])
        if r["type"] == EVENT_FLIP:
            st.eta[x] ^= 1
        else:
            y = (x + 1) % n
            st.eta[x], st.eta[y] = st.eta[y], st.eta[x]
    st.time = float(np.sum(records["dt"]))
    st.rebuild()
    return st


# ---------------------------------------------------------------------------
# empirical profiles and initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalProfile:
    bins: np.ndarray
    n: int
    time: float

    @property
    def M(self) -> int:
        return self.bins.size

    def pair(self, G) -> float:
        """(1/M) sum_j G(j/M) bin_j, a block-averaged pairing."""
        theta = np.arange(self.M) / self.M
        return float(np.mean(np.asarray(G(theta)) * self.bins))


def profile_of(bits, M: int, time: float = 0.0) -> EmpiricalProfile:
    bits = np.asarray(bits, dtype=float)
    n = bits.size
    if M <= 0 or n % M:
        raise BinMismatch(f"{M} bins do not divide n={n}")
    return EmpiricalProfile(bits.reshape(M, n // M).mean(axis=1), n, time)


def empirical_profile(state: SimState, M: int) -> EmpiricalProfile:
    return profile_of(state.eta, M, state.time)


def empirical_pairing(bits, G) -> float:
    """<pi_N, G> = (1/n) sum_x G(x/n) eta(x)."""
    bits = np.asarray(bits, dtype=float)
    n = bits.size
    return float(np.dot(G(np.arange(n) / n), bits) / n)


def sample_profile_configuration(rho, n: int, rng) -> Configuration:
    """Independent Bernoulli(rho(x/n)) occupations.

    ``rho`` is a callable on [0, 1) or an array of grid values (read as a
    piecewise-constant density on cells [j/M, (j+1)/M)).
    """
    rng = make_rng(rng)
    theta = np.arange(n) / n
    if callable(rho):
        p = np.asarray(rho(theta), dtype=float) * np.ones(n)
    else:
        vals = np.asarray(getattr(rho, "values", rho), dtype=float)
        p = vals[np.floor(theta * vals.size).astype(int)]
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("density values must lie in [0, 1]")
    return Configuration((rng.random(n) < p).astype(np.uint8))


def simulate_profiles(state: SimState, times, M: int) -> list:
    """Advance through ``times`` and record an M-bin profile at each."""
    out = []
    for t in times:
        advance(state, float(t))
        out.append(empirical_profile(state, M))
    return out


def profiles_to_rows(profiles) -> list:
    return [[p.time, *p.bins.tolist()] for p in profiles]


# ---------------------------------------------------------------------------
# monotone coupling
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _coupled_run(up, lo, bonds, bpos, counters, table, R, cbound, exch, t, t_end,
                 stop_at_coalescence, check_every, rng):
    """Basic coupling: shared stirring on bonds, shared uniforms for flips.

    Returns (time, coalescence time or -1, dominance ok).  counters holds
    [active bonds in either copy, number of discrepancies, events].
    """
    n = up.shape[0]
    lam_fl = n * cbound
    nact = counters[0]
    ndisc = counters[1]
    nev = counters[2]
    t_coal = -1.0
    ok = True
    if ndisc == 0:
        t_coal = t
    while not (stop_at_coalescence and t_coal >= 0.0):
        lam_ex = exch * nact
        lam = lam_ex + lam_fl
        dt = rng.standard_exponential() / lam
        if t + dt >= t_end:
            t = t_end
            break
        t += dt
        u = rng.random() * lam
        if u < lam_ex:
            k = int(u / exch)
            if k >= nact:
                k = nact - 1
            x = bonds[k]
            y = x + 1 if x + 1 < n else 0
            a = up[x]
            up[x] = up[y]
            up[y] = a
            a = lo[x]
            lo[x] = lo[y]
            lo[y] = a
            left = x - 1 if x > 0 else n - 1
            right = y
            if up[x] < lo[x] or up[y] < lo[y]:
                ok = False
        else:
            x = int((u - lam_ex) / cbound)
            if x >= n:
                x = n - 1
            v = rng.random() * cbound
            cu_code = 0
            cl_code = 0
            for j in range(-R, R + 1):
                z = x + j
                if z < 0:
                    z += n
                elif z >= n:
                    z -= n
                cu_code = (cu_code << 1) | up[z]
                cl_code = (cl_code << 1) | lo[z]
            cu = table[cu_code]
            cl = table[cl_code]
            if up[x] == lo[x]:
                if v < cu:
                    up[x] ^= 1
                if v < cl:
                    lo[x] ^= 1
                if up[x] != lo[x]:
                    ndisc += 1
            else:
                # up = 1, lo = 0: death of the upper copy and birth of the
                # lower one use disjoint parts of [0, cbound)
                if v < cu:
                    up[x] ^= 1
                if v >= cbound - cl:
                    lo[x] ^= 1
                if up[x] == lo[x]:
                    ndisc -= 1
            left = x - 1 if x > 0 else n - 1
            right = x
            if up[x] < lo[x]:
                ok = False
        for b in (left, right):
            b1 = b + 1 if b + 1 < n else 0
            kk = bpos[b]
            if up[b] != up[b1] or lo[b] != lo[b1]:
                if kk < 0:
                    bonds[nact] = b
                    bpos[b] = nact
                    nact += 1
            elif kk >= 0:
                nact -= 1
                last = bonds[nact]
                bonds[kk] = last
                bpos[last] = kk
                bpos[b] = -1
        nev += 1
        if check_every > 0 and nev % check_every == 0:
            for z in range(n):
                if up[z] < lo[z]:
                    ok = False
        if not ok:
            break
        if ndisc == 0 and t_coal < 0.0:
            t_coal = t
    counters[0] = nact
    counters[1] = ndisc
    counters[2] = nev
    return t, t_coal, ok


@dataclass
class CoupledPair:
    """Two copies, upper >= lower, driven by one event stream."""

    rate: LocalRate
    upper: np.ndarray
    lower: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    coalescence_time: float | None = None
    check_every: int = 1 << 20
    bonds: np.ndarray = field(init=False, repr=False)
    bpos: np.ndarray = field(init=False, repr=False)
    counters: np.ndarray = field(init=False, repr=False)

    @classmethod
    def create(cls, rate: LocalRate, upper, lower, seed=None, check_every: int = 1 << 20):
        if not is_attractive(rate):
            raise AttractivityRequired("monotone coupling needs an attractive rate")
        up = np.array(getattr(upper, "bits", upper), dtype=np.int64)
        lo = np.array(getattr(lower, "bits", lower), dtype=np.int64)
        rate = _check_window(rate, up.size)
        if np.any(up < lo):
            raise ValueError("upper configuration must dominate the lower one")
        pair = cls(rate, up, lo, make_rng(seed), check_every=check_every)
        pair.rebuild()
        return pair

    @classmethod
    def extremal(cls, rate: LocalRate, n: int, seed=None, **kw):
        return cls.create(rate, np.ones(n, dtype=np.int64), np.zeros(n, dtype=np.int64), seed, **kw)

    @property
    def n(self):
        return self.upper.size

    def rebuild(self):
        n = self.n
        act = np.nonzero((self.upper != np.roll(self.upper, -1)) | (self.lower != np.roll(self.lower, -1)))[0]
        self.bonds = np.zeros(n, dtype=np.int64)
        self.bonds[: act.size] = act
        self.bpos = np.full(n, -1, dtype=np.int64)
        self.bpos[act] = np.arange(act.size)
        self.counters = np.array([act.size, int(np.sum(self.upper != self.lower)), 0], dtype=np.int64)
        if self.counters[1] == 0 and self.coalescence_time is None:
            self.coalescence_time = self.time

    @property
    def coalesced(self) -> bool:
        return bool(self.counters[1] == 0)

    def dominance_holds(self) -> bool:
        return bool(np.all(self.upper >= self.lower))


def coupled_advance(pair: CoupledPair, t_end: float, stop_at_coalescence: bool = False) -> CoupledPair:
    """Run both copies to ``t_end`` (or to coalescence); dominance is asserted."""
    if not is_attractive(pair.rate):
        raise AttractivityRequired("monotone coupling needs an attractive rate")
    t, t_coal, ok = _coupled_run(
        pair.upper, pair.lower, pair.bonds, pair.bpos, pair.counters, pair.rate.table,
        pair.rate.radius, 2.0 * pair.rate.c_max, pair.n * pair.n / 2.0, pair.time, float(t_end),
        stop_at_coalescence, pair.check_every, pair.rng,
    )
    pair.time = t
    if t_coal >= 0 and pair.coalescence_time is None:
        pair.coalescence_time = t_coal
    if not ok:
        raise AssertionError(f"coupling dominance violated at t={t}")
    return pair


def coalescence_time(rate: LocalRate, n: int, seed, t_max: float = math.inf) -> float:
    """Coalescence time of the extremal pair (all ones over all zeros); inf if beyond t_max."""
    pair = CoupledPair.extremal(rate, n, seed)
    coupled_advance(pair, t_max, stop_at_coalescence=True)
    return pair.coalescence_time if pair.coalescence_time is not None else math.inf


def map_replicas(fn, rngs, threads: int = 1) -> list:
    """Apply ``fn`` to each replica stream; result order follows the streams."""
    if threads <= 1:
        return [fn(r) for r in rngs]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, rngs))


def coalescence_times(rate: LocalRate, n: int, replicas: int, seed, threads: int = 1,
                      t_max: float = math.inf) -> np.ndarray:
    rngs = spawn_rngs(seed, replicas)
    return np.array(map_replicas(lambda r: coalescence_time(rate, n, r, t_max), rngs, threads))


@dataclass(frozen=True)
class MixingEstimate:
    time: float
    eps: float
    replicas: int
    note: str


def mixing_quantile(times, eps: float) -> float:
    """Smallest sample t with empirical P(T > t) <= eps."""
    times = np.sort(np.asarray(times, dtype=float))
    m = times.size
    k = math.ceil((1.0 - eps) * m - 1e-12)
    if k <= 0:
        return 0.0
    return float(times[k - 1])


def tv_mixing_upper_estimate(rate: LocalRate, n: int, eps: float, replicas: int, seed,
                             threads: int = 1, times=None) -> MixingEstimate:
    """Coupling upper estimate of the total-variation mixing time.

    By monotonicity every copy started inside [all zeros, all ones] is
    sandwiched by the extremal pair, so the worst-case TV distance at time t
    is at most P(coalescence > t).
    """
    if not is_attractive(rate):
        raise AttractivityRequired("coupling estimate needs an attractive rate")
    if eps >= 1:
        return MixingEstimate(0.0, eps, 0, "vacuous threshold")
    if times is None:
        times = coalescence_times(rate, n, replicas, seed, threads)
    m = len(times)
    # binomial standard error of the exceedance fraction at the quantile
    se = math.sqrt(max(eps * (1 - eps), 1e-12) / m)
    note = f"empirical {1 - eps:.3f}-quantile of {m} coalescence times; exceedance s.e. ~{se:.3f}"
    return MixingEstimate(mixing_quantile(times, eps), eps, m, note)

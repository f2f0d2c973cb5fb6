"""Escape times from metric neighbourhoods of a density profile, excursion
logs between the inner ball and the annulus, and the exponential-law test.

Neighbourhoods (Fourier metric d around a centre, decided conservatively
with the truncation tail bound):

* A: d + tail < alpha
* annulus B: d - tail >= beta and d + tail <= 2 beta
* escape (outside C): d - tail >= gamma

Excursions: tau_0 = 0; sigma_k is the first time after tau_k in B; tau_{k+1}
the first time after sigma_k in A or outside C.  The escape time H equals
tau_nu for the escaping excursion nu.  If a single event jumps from inside the
annulus' inner radius straight out of C, sigma_k = tau_{k+1} = H.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy import stats

from .errors import StartOutsideA, TooFewSamples
from .hydro import DEFAULT_K, DensitySlice, fourier_coefficients, fourier_metric, tail_bound
from .model import Configuration, LocalRate
from .simulator import (
    RUN_ESCAPED, RUN_TIME, EventLog, SimState, _EMPTY_F, _EMPTY_I4, _EMPTY_U8, _run,
    advance, map_replicas, spawn_rngs, tv_mixing_upper_estimate,
)

__all__ = [
    "NeighborhoodSpec",
    "HittingSample",
    "hitting_experiment",
    "hitting_time",
    "excursions_from_log",
    "set_hitting_time",
    "KSReport",
    "exp_law_test",
    "ScalingFit",
    "escape_scaling_sweep",
    "mixing_scaling_sweep",
    "separation_report",
]

KS_COEFF_01 = 1.63


@dataclass(frozen=True)
class NeighborhoodSpec:
    center: float | DensitySlice
    alpha: float = 0.02
    beta: float = 0.05
    gamma: float = 0.15
    K: int = DEFAULT_K

    def __post_init__(self):
        if not (0 < self.alpha < self.beta and 2 * self.beta < self.gamma):
            raise ValueError("radii must satisfy 0 < alpha < beta and 2 beta < gamma")
        if self.K < 1:
            raise ValueError("truncation K must be >= 1")

    @property
    def tail(self) -> float:
        return tail_bound(self.K)

    def center_slice(self, M: int = 64) -> DensitySlice:
        if isinstance(self.center, DensitySlice):
            return self.center
        return DensitySlice.constant(float(self.center), M)

    def distance(self, config):
        return fourier_metric(getattr(config, "bits", config), self.center_slice(), self.K)

    def region(self, config) -> str:
        """'A', 'B', 'escaped' or '' (none of them)."""
        m = self.distance(config)
        if m.value - m.tail >= self.gamma:
            return "escaped"
        if m.value + m.tail < self.alpha:
            return "A"
        if m.value - m.tail >= self.beta and m.value + m.tail <= 2 * self.beta:
            return "B"
        return ""


@dataclass(frozen=True)
class HittingSample:
    replica: int
    H: float
    sigma: np.ndarray
    tau: np.ndarray  # tau[0] = 0, tau[nu] = H
    nu: int
    escaped: bool
    truncated_log: bool = False

    @property
    def excursions(self) -> int:
        return self.sigma.size


def _watch_arrays(spec: NeighborhoodSpec, n: int):
    K = spec.K
    theta = np.arange(n) / n
    k = np.arange(1, K + 1)[:, None]
    basis_c = np.vstack([np.ones((1, n)), math.sqrt(2) * np.cos(2 * np.pi * k * theta)]) / n
    basis_s = np.vstack([np.zeros((1, n)), math.sqrt(2) * np.sin(2 * np.pi * k * theta)]) / n
    cc, ss = fourier_coefficients(spec.center_slice(), K)
    centre_c = cc
    centre_s = np.concatenate([[0.0], ss])
    weights = 0.5 ** np.arange(K + 1)
    radii = np.array([spec.alpha, spec.beta, spec.gamma, spec.tail])
    return basis_c, basis_s, centre_c, centre_s, weights, radii


def hitting_time(rate: LocalRate, spec: NeighborhoodSpec, start, seed, replica: int = 0,
                 t_max: float = math.inf, log: EventLog | None = None,
                 max_excursions: int = 1 << 16, chunk: int = 1 << 22) -> HittingSample:
    """One escape time, simulated event by event from ``start``."""
    bits = np.asarray(getattr(start, "bits", start))
    n = bits.size
    region = spec.region(bits)
    if region == "escaped":
        return HittingSample(replica, 0.0, np.zeros(0), np.zeros(1), 0, True)
    if region != "A":
        raise StartOutsideA("start configuration is not inside the inner ball A")
    st = SimState.create(rate, bits, seed)
    basis_c, basis_s, centre_c, centre_s, weights, radii = _watch_arrays(spec, n)
    cc = basis_c @ st.eta
    ss = basis_s @ st.eta
    exc = np.zeros(2 + 2 * max_excursions)
    bufs = log.buffers() if log is not None else (_EMPTY_F, _EMPTY_U8, _EMPTY_I4)
    size = log.capacity if log is not None else chunk
    status = RUN_TIME
    while True:
        t, done, status = _run(
            st.eta, st.codes, st.bcount, st.bonds, st.bpos, st.counters, st.ftot,
            st.rate.table, st.rate.radius, st.exchange_rate, st.flips, st.time, float(t_max),
            size, st.rng, *bufs, True, basis_c, basis_s, cc, ss, centre_c, centre_s, weights,
            radii, exc,
        )
        st.time = t
        if log is not None:
            log.append(*bufs, done)
        if status != 1:  # time limit or escape
            break
    count = int(exc[1])
    kept = min(count, max_excursions)
    sigma = exc[2:2 + 2 * kept:2].copy()
    tau = np.concatenate([[0.0], exc[3:3 + 2 * kept:2]])
    escaped = status == RUN_ESCAPED
    H = st.time if escaped else math.inf
    return HittingSample(replica, H, sigma, tau, count if escaped else -1, escaped,
                         count > max_excursions)


def hitting_experiment(rate: LocalRate, n: int, spec: NeighborhoodSpec, start, samples: int,
                       seed, threads: int = 1, t_max: float = math.inf) -> list:
    """Independent escape times from ``start``; replica i uses stream i of ``seed``."""
    bits = np.asarray(getattr(start, "bits", start))
    if bits.size != n:
        raise ValueError("start configuration has the wrong size")
    rngs = spawn_rngs(seed, samples)
    jobs = list(enumerate(rngs))
    return map_replicas(lambda job: hitting_time(rate, spec, bits, job[1], job[0], t_max), jobs, threads)


def excursions_from_log(spec: NeighborhoodSpec, start, records: np.ndarray):
    """Recompute (sigma, tau, nu, H) by replaying an event log and evaluating
    the metric from scratch after every event."""
    eta = np.array(getattr(start, "bits", start), dtype=np.uint8)
    n = eta.size
    t = 0.0
    sig, tau = [], [0.0]
    phase = 0
    for r in records:
        t += float(r["dt"])
        x = int(r["site"])
        if r["type"] == 1:
            eta[x] ^= 1
        else:
            y = (x + 1) % n
            eta[x], eta[y] = eta[y], eta[x]
        m = spec.distance(eta)
        lo, hi = m.value - m.tail, m.value + m.tail
        if phase == 0 and lo >= spec.beta and hi <= 2 * spec.beta:
            sig.append(t)
            phase = 1
        if lo >= spec.gamma:
            if phase == 0:
                sig.append(t)
            tau.append(t)
            return np.array(sig), np.array(tau), len(tau) - 1, t
        if phase == 1 and hi < spec.alpha:
            tau.append(t)
            phase = 0
    return np.array(sig), np.array(tau), -1, math.inf


def set_hitting_time(rate: LocalRate, start, target_mask, seed, chunk_time: float = 1.0,
                     t_max: float = math.inf) -> float:
    """First time the state index (bit x = eta(x)) lies in ``target_mask``.

    Runs the simulator with an event log and scans the logged trajectory:
    the index after each event is a cumulative XOR of the event masks.
    """
    mask = np.asarray(target_mask, dtype=bool)
    bits = np.asarray(getattr(start, "bits", start))
    n = bits.size
    idx = int(np.dot(bits.astype(np.int64), 1 << np.arange(n)))
    if mask[idx]:
        return 0.0
    st = SimState.create(rate, bits, seed)
    t0 = 0.0
    while st.time < t_max:
        log = EventLog(1 << 16)
        advance(st, min(st.time + chunk_time, t_max), log)
        rec = log.records
        if rec.size:
            x = rec["site"].astype(np.int64)
            flip = rec["type"] == 1
            move = np.where(flip, 1 << x, (1 << x) | (1 << ((x + 1) % n)))
            path = idx ^ np.bitwise_xor.accumulate(move)
            hit = np.nonzero(mask[path])[0]
            if hit.size:
                return t0 + float(np.cumsum(rec["dt"])[hit[0]])
            idx = int(path[-1])
        t0 = st.time
    return math.inf


@dataclass(frozen=True)
class KSReport:
    statistic: float
    samples: int
    threshold: float
    mean: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.threshold

    def to_json(self) -> dict:
        return {"statistic": self.statistic, "samples": self.samples,
                "threshold": self.threshold, "mean": self.mean, "passed": self.passed}


def exp_law_test(H) -> KSReport:
    """KS distance between H / mean(H) and Exp(1), with the 0.01-level
    threshold 1.63 / sqrt(m)."""
    x = np.asarray([getattr(h, "H", h) for h in H], dtype=float)
    m = x.size
    if m < 100:
        raise TooFewSamples(f"{m} samples; the test needs at least 100")
    if not np.all(np.isfinite(x)):
        raise ValueError("hitting times must be finite")
    mean = float(x.mean())
    stat = float(stats.kstest(x / mean, "expon").statistic) if mean > 0 else 1.0
    return KSReport(stat, m, KS_COEFF_01 / math.sqrt(m), mean)


@dataclass(frozen=True)
class ScalingFit:
    rows: list  # per-n rows
    slope: float
    intercept: float
    r2: float


def _loglinear(ns, values) -> tuple:
    fit = stats.linregress(np.asarray(ns, dtype=float), np.log(np.asarray(values, dtype=float)))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def escape_scaling_sweep(rate: LocalRate, spec_for, ns, samples: int, seed, start_for,
                         threads: int = 1, t_max: float = math.inf) -> ScalingFit:
    """Mean escape time per n with a normal 95% interval, and the fit of
    log(mean H) against n.  ``spec_for(n)`` / ``start_for(n)`` give the
    neighbourhood and start configuration at each size."""
    rows = []
    seeds = np.random.SeedSequence(seed).spawn(len(ns))
    for n, ss in zip(ns, seeds):
        spec = spec_for(n) if callable(spec_for) else spec_for
        H = np.array([s.H for s in hitting_experiment(rate, n, spec, start_for(n), samples, ss,
                                                     threads, t_max)])
        mean = float(H.mean())
        half = 1.96 * float(H.std(ddof=1)) / math.sqrt(H.size) if H.size > 1 else math.nan
        rows.append({"n": n, "mean_H": mean, "ci_low": mean - half, "ci_high": mean + half,
                     "samples": int(H.size)})
    slope, icpt, r2 = _loglinear([r["n"] for r in rows], [r["mean_H"] for r in rows])
    return ScalingFit(rows, slope, icpt, r2)


def mixing_scaling_sweep(rate: LocalRate, ns, eps: float, mode: str = "exact", replicas: int = 32,
                         seed=0, threads: int = 1) -> ScalingFit:
    """t_mix(eps) per n: exact (n <= 20) or the coupling upper estimate."""
    from .exact import build_generator, mixing_time_exact

    rows = []
    seeds = np.random.SeedSequence(seed).spawn(len(ns))
    for n, ss in zip(ns, seeds):
        if mode == "exact":
            t = mixing_time_exact(build_generator(n, rate), eps)
        elif mode == "coupling":
            t = tv_mixing_upper_estimate(rate, n, eps, replicas, ss, threads).time
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rows.append({"n": n, "t_mix": t, "t_over_log_n": t / math.log(n)})
    if all(r["t_mix"] > 0 for r in rows) and len(rows) > 1:
        slope, icpt, r2 = _loglinear([r["n"] for r in rows], [r["t_mix"] for r in rows])
    else:
        slope = icpt = r2 = math.nan
    return ScalingFit(rows, slope, icpt, r2)


def separation_report(H, t_mix: float, mu_A: float | None = None, r_N: float | None = None) -> dict:
    """Scales entering the exponential-law argument: the mixing time, the mean
    escape time and the fraction of escapes before their geometric mean."""
    x = np.asarray([getattr(h, "H", h) for h in H], dtype=float)
    mean = float(x.mean())
    S = math.sqrt(max(t_mix, 0.0) * mean)
    return {"t_mix": t_mix, "mean_H": mean, "S_N": S, "P_H_below_S": float(np.mean(x < S)),
            "mu_A": mu_A, "r_N": r_N}

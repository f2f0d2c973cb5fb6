"""Acceptance criteria, one test each, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines as
they happen; they are also repeated in the terminal summary.
"""
import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P
from scipy import stats

from rdlab.exact import StateSet, build_generator, mean_hitting_exact, mixing_time_exact, rate_into_set, \
    state_bits, stationary_distribution
from rdlab.hitting import NeighborhoodSpec, exp_law_test, hitting_experiment, hitting_time
from rdlab.hydro import DensityPath, DensitySlice, bin_average, evolve, fourier_metric, l2_distance
from rdlab.ldp import holding_cost, quasipotential_homogeneous, rate_function
from rdlab.model import Configuration, example_2_1, reaction_polynomials
from rdlab.simulator import SimState, advance, sample_profile_configuration, spawn_rngs, \
    tv_mixing_upper_estimate

pytestmark = pytest.mark.acceptance


def _printed_coefficients(g):
    u = np.array([1.0, -2.0])
    uu = P.polymul(u, u)
    B = P.polymul([1.0, -1.0], P.polyadd(P.polysub([1.0], 2 * g * u), g * g * uu))
    D = P.polymul([0.0, 1.0], P.polyadd(P.polyadd([1.0], 2 * g * u), g * g * uu))
    s2 = P.polymul([-0.5, 1.0], [-0.5, 1.0])
    V = P.polyadd((1 - 2 * g) * s2, 2 * g * g * P.polymul(s2, s2))
    return B, D, P.polysub(B, D), V


def test_c01_reaction_polynomials(report):
    worst = 0.0
    for g in (0.0, 0.25, 0.5, 0.75):
        poly = reaction_polynomials(example_2_1(g))
        for got, want in zip((poly.b, poly.d, poly.f, poly.v), _printed_coefficients(g)):
            k = max(len(got), len(want))
            worst = max(worst, float(np.max(np.abs(np.pad(got, (0, k - len(got)))
                                                   - np.pad(want, (0, k - len(want)))))))
    report("C1 reaction polynomials", worst < 1e-12, f"max coefficient error {worst:.2e}")


def test_c02_phase_transition_signature(report):
    ns = [6, 8, 10, 12]
    t = {g: np.array([mixing_time_exact(build_generator(n, example_2_1(g)), 0.25) for n in ns])
         for g in (0.25, 0.75)}
    fits = {g: stats.linregress(ns, np.log(t[g])) for g in t}
    ratios = t[0.75][1:] / t[0.75][:-1]
    increasing = bool(np.all(np.diff(ratios) > 0))
    s_hi, s_lo = fits[0.75].slope, fits[0.25].slope
    ok = increasing and s_hi > 0 and fits[0.75].rvalue ** 2 > 0.9 and s_hi >= 5 * s_lo
    report("C2 phase-transition signature", ok,
           f"t(0.75)={np.round(t[0.75], 3).tolist()} ratios={np.round(ratios, 4).tolist()} "
           f"slope(0.75)={s_hi:.4f} R2={fits[0.75].rvalue ** 2:.4f} "
           f"t(0.25)={np.round(t[0.25], 3).tolist()} slope(0.25)={s_lo:.4f} "
           f"slope ratio={s_hi / s_lo:.2f}")


def test_c03_coupling_mixing_log_n(report):
    ns = [64, 128, 256, 512]
    seeds = np.random.SeedSequence(2024).spawn(len(ns))
    est = np.array([tv_mixing_upper_estimate(example_2_1(0.25), n, 0.25, 16, s).time
                    for n, s in zip(ns, seeds)])
    r = est / np.log(ns)
    spread = float(r.max() / r.min())
    report("C3 coupling mixing ~ log n", spread < 2.0,
           f"t_hat={np.round(est, 3).tolist()} t_hat/log n={np.round(r, 3).tolist()} spread={spread:.3f}")


def test_c04_hydrodynamic_limit(report):
    poly = reaction_polynomials(example_2_1(0.25))
    rho0 = lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x)
    times = [0.25, 0.5, 1.0]
    pde = evolve(DensitySlice.from_function(rho0, 256), poly, 1.0, 1e-3)
    pde_bins = {t: bin_average(pde.at(t), 16) for t in times}
    sup_l2 = []
    for n, ss in zip((128, 256, 512), np.random.SeedSequence(4).spawn(3)):
        acc = {t: np.zeros(16) for t in times}
        for rng in spawn_rngs(ss, 8):
            st = SimState.create(example_2_1(0.25), sample_profile_configuration(rho0, n, rng), seed=rng)
            for t in times:
                advance(st, t)
                acc[t] += bin_average(st.eta.astype(float), 16) / 8
        sup_l2.append(max(l2_distance(acc[t], pde_bins[t]) for t in times))
    ok = sup_l2[0] > sup_l2[1] > sup_l2[2] and sup_l2[2] < 0.05
    report("C4 hydrodynamic limit", ok, f"sup_t L2 at n=128,256,512: {np.round(sup_l2, 4).tolist()}")


def test_c05_zero_rate_on_pde_path(report):
    poly = reaction_polynomials(example_2_1(0.25))
    rho0 = DensitySlice.from_function(lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x), 128)
    path = evolve(rho0, poly, 1.0, 1e-3)
    floor = rate_function(path, rho0, poly).value
    shifted = DensityPath(path.times, path.values + 0.05)
    off = rate_function(shifted, shifted.values[0], poly).value
    ok = floor <= 1e-3 and off >= 10 * floor
    report("C5 zero rate on the PDE path", ok,
           f"I(PDE path)={floor:.3e} (floor) I(shifted)={off:.3e} ratio={off / floor:.1f}")


def test_c06_holding_cost(report):
    poly = reaction_polynomials(example_2_1(0.0))
    oracle = holding_cost(poly, 0.25)
    val = rate_function(DensityPath.constant(0.25, 32, 1.0, 100), DensitySlice.constant(0.25, 32), poly).value
    ok = abs(val - 0.13397) <= 0.05 * 0.13397
    report("C6 holding cost", ok, f"I={val:.6f} oracle={oracle:.6f} target 0.13397 +-5%")


def test_c07_quasipotential(report):
    res = quasipotential_homogeneous(reaction_polynomials(example_2_1(0.0)), 0.75, 0.5, steps=400)
    ok = abs(res.value - 0.13081) <= 0.02 * 0.13081
    report("C7 homogeneous quasi-potential", ok,
           f"optimizer={res.value:.6f} oracle={res.oracle:.6f} target 0.13081 +-2%")


def test_c08_exponential_hitting_law(report):
    spec = NeighborhoodSpec(0.5, alpha=0.02, beta=0.05, gamma=0.15)
    samples = hitting_experiment(example_2_1(0.25), 64, spec, Configuration.alternating(64), 500, seed=8)
    rep = exp_law_test(samples)
    report("C8 exponential hitting law", rep.passed,
           f"KS={rep.statistic:.4f} threshold={rep.threshold:.4f} mean H={rep.mean:.4f} m={rep.samples}")


def test_c09_exact_vs_simulated_hitting(report):
    n, rate = 8, example_2_1(0.5)
    spec = NeighborhoodSpec(0.5, alpha=0.06, beta=0.1, gamma=0.3)
    start = Configuration.alternating(n)
    target = StateSet.metric_ball(n, spec.center_slice(), spec.gamma, K=spec.K, outside=True)
    exact = mean_hitting_exact(build_generator(n, rate), target)[start.to_index()]
    H = np.array([hitting_time(rate, spec, start, rng).H for rng in spawn_rngs(9, 2000)])
    rel = abs(H.mean() - exact) / exact
    report("C9 exact vs simulated hitting", rel < 0.05,
           f"MC mean={H.mean():.5f} (se {H.std() / math.sqrt(H.size):.5f}) exact={exact:.5f} rel err={rel:.4f}")


def _smooth_pair(rng, M):
    th = np.arange(M) / M
    out = []
    for _ in range(2):
        v = rng.uniform(0.2, 0.8) + sum(rng.normal(0, 0.1) * np.cos(2 * np.pi * k * th + rng.uniform(0, 7))
                                        for k in range(1, 4))
        out.append(DensitySlice(np.clip(v, 0, 1)))
    return out


def test_c10_metric_and_pde_properties(report):
    rng = np.random.default_rng(10)
    metric_bad = 0
    for _ in range(1000):
        a, b = _smooth_pair(rng, 64)
        m = fourier_metric(a, b)
        metric_bad += m.value > 3 * l2_distance(a, b) + m.tail
    contraction_bad = 0
    for i in range(100):
        poly = reaction_polynomials(example_2_1((0.25, 0.75)[i % 2]))
        C0 = poly.sup_abs_dF() + 1e-3
        a, b = _smooth_pair(rng, 32)
        pa, pb = evolve(a, poly, 5.0, 0.01), evolve(b, poly, 5.0, 0.01)
        d0 = l2_distance(a, b)
        contraction_bad += sum(l2_distance(pa.at(t), pb.at(t)) > math.exp(C0 * t) * d0 for t in (0.1, 1.0, 5.0))
    order_bad = 0
    poly = reaction_polynomials(example_2_1(0.75))
    for _ in range(50):
        lo, _ = _smooth_pair(rng, 32)
        hi = DensitySlice(np.minimum(lo.values + rng.uniform(0, 0.3, 32), 1.0))
        order_bad += int(np.any(evolve(hi, poly, 2.0, 0.01).values < evolve(lo, poly, 2.0, 0.01).values))
    total = metric_bad + contraction_bad + order_bad
    report("C10 metric and PDE property suites", total == 0,
           f"violations: metric bound {metric_bad}/1000, contraction {contraction_bad}/300, "
           f"comparison {order_bad}/50")


def test_c11_stationary_bimodality(report):
    n = 12
    mu = stationary_distribution(build_generator(n, example_2_1(0.75)))
    dens = state_bits(n).sum(axis=1) / n
    tails = float(mu[(dens < 0.2) | (dens > 0.8)].sum())
    middle = float(mu[(dens >= 0.4) & (dens <= 0.6)].sum())
    report("C11 stationary bimodality", tails > middle, f"mu(tails)={tails:.4f} mu(middle)={middle:.4f}")


def test_c12_rate_bound(report):
    checked, bad = 0, 0
    worst = 0.0
    for n in (4, 6, 8, 10, 12):
        for g in (0.0, 0.25, 0.75):
            gen = build_generator(n, example_2_1(g))
            mu = stationary_distribution(gen)
            sets = [StateSet.density_window(n, lo, 1.0) for lo in (0.6, 0.75, 0.9)]
            sets += [StateSet.density_window(n, 0.0, hi) for hi in (0.1, 0.25, 0.4)]
            sets += [StateSet.metric_ball(n, DensitySlice.constant(0.5, 64), r, outside=True) for r in (0.2, 0.35)]
            for A in sets:
                if A.size in (0, gen.size):
                    continue
                res = rate_into_set(gen, mu, A)
                checked += 1
                bad += not res.within_bound
                worst = max(worst, float(res.exact_rate / res.exact_bound))
    report("C12 rate bound", bad == 0 and checked > 0,
           f"{checked} sets, {bad} violations, max r_N / bound = {worst:.4f}")

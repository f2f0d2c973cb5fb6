import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy import stats

from rdlab.errors import DegenerateSet, EmptyTarget, SizeCapExceeded
from rdlab.exact import (
    StateSet, build_generator, mean_hitting_exact, mixing_time_exact, orbit_representatives,
    rate_into_set, stationary_distribution, state_bits, tv_curve,
)
from rdlab.hitting import set_hitting_time
from rdlab.model import Configuration, LocalRate, example_2_1
from rdlab.simulator import SimState, advance

from conftest import random_rate


def test_generator_n2():
    Q = build_generator(2, example_2_1(0.0)).Q.toarray()
    # both torus bonds join the same two sites: exchange rate 2 * (1/2) * 2^2
    want = np.array([[-2, 1, 1, 0], [1, -6, 4, 1], [1, 4, -6, 1], [0, 1, 1, -2]], float)
    assert np.allclose(Q, want)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_row_sums_zero(seed, n):
    Q = build_generator(n, random_rate(np.random.default_rng(seed))).Q
    assert np.max(np.abs(np.asarray(Q.sum(axis=1)).ravel())) < 1e-10


def test_gamma_zero_symmetric_and_uniform():
    gen = build_generator(6, example_2_1(0.0))
    Q = gen.Q.toarray()
    assert np.allclose(Q, Q.T)
    assert np.allclose(stationary_distribution(gen), 1 / 64)


def test_stationary_residual():
    gen = build_generator(8, example_2_1(0.75))
    mu = stationary_distribution(gen)
    assert abs(mu.sum() - 1) < 1e-12 and mu.min() > 0
    assert np.max(np.abs(gen.Q.T @ mu)) < 1e-10


def test_stationary_translation_invariant():
    n = 8
    gen = build_generator(n, example_2_1(0.6))
    mu = stationary_distribution(gen)
    idx = np.arange(2**n)
    rot = ((idx >> 1) | (idx << (n - 1))) & (2**n - 1)
    assert np.allclose(mu[rot], mu, atol=1e-12)


def test_bimodal_density_marginal():
    n = 10
    mu = stationary_distribution(build_generator(n, example_2_1(0.75)))
    counts = state_bits(n).sum(axis=1)
    marg = np.bincount(counts, weights=mu, minlength=n + 1)
    mid = marg[n // 2]
    assert marg[:3].sum() > 3 * mid and marg[-3:].sum() > 3 * mid
    assert np.argmax(marg[: n // 2]) < n // 2 - 1


def test_size_cap():
    with pytest.raises(SizeCapExceeded):
        StateSet.density_window(21, 0.0, 0.5)


def test_tv_at_zero():
    gen = build_generator(6, example_2_1(0.4))
    mu = stationary_distribution(gen)
    c = Configuration.alternating(6)
    assert tv_curve(gen, c, [0.0])[0] == pytest.approx(1 - mu[c.to_index()], abs=1e-12)


def test_tv_monotone():
    gen = build_generator(6, example_2_1(0.75))
    tv = tv_curve(gen, Configuration.zeros(6), np.linspace(0, 20, 41))
    assert np.all(np.diff(tv) <= 1e-12)


def test_tv_law_against_simulation():
    # law of the particle count at t = 0.5 from all zeros, gamma = 0
    n, t, reps = 6, 0.5, 4000
    gen = build_generator(n, example_2_1(0.0))
    row = sla.expm(gen.Q.toarray() * t)[0]
    exact = np.bincount(state_bits(n).sum(axis=1), weights=row, minlength=n + 1)
    counts = np.zeros(n + 1)
    for r in range(reps):
        s = SimState.create(example_2_1(0.0), np.zeros(n, dtype=int), seed=r)
        advance(s, t)
        counts[s.eta.sum()] += 1
    keep = exact * reps > 5
    obs = np.r_[counts[keep], counts[~keep].sum()]
    exp = np.r_[exact[keep], exact[~keep].sum()] * reps
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def _bruteforce_tmix(gen, eps, lo, hi):
    mu = stationary_distribution(gen)
    Q = gen.Q.toarray()

    def d(t):
        return 0.5 * np.abs(sla.expm(Q * t) - mu).sum(axis=1).max()

    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if d(mid) <= eps else (mid, hi)
    return hi


@pytest.mark.parametrize("gamma,lo,hi", [(0.25, 0.1, 5.0), (0.75, 5.0, 40.0)])
def test_mixing_time_matches_bruteforce(gamma, lo, hi):
    gen = build_generator(6, example_2_1(gamma))
    want = _bruteforce_tmix(gen, 0.25, lo, hi)
    got = mixing_time_exact(gen, 0.25)
    assert abs(got - want) / want < 2e-3


def test_mixing_time_monotone_in_eps():
    gen = build_generator(6, example_2_1(0.5))
    ts = [mixing_time_exact(gen, e) for e in (0.05, 0.1, 0.25, 0.4)]
    assert all(a >= b for a, b in zip(ts, ts[1:]))
    assert mixing_time_exact(gen, 1.0) == 0.0


def test_mixing_slower_in_two_phase_regime():
    t_lo = mixing_time_exact(build_generator(8, example_2_1(0.25)), 0.25)
    t_hi = mixing_time_exact(build_generator(8, example_2_1(0.75)), 0.25)
    assert t_hi > 5 * t_lo


def test_symmetry_reduction_matches_full_scan():
    gen = build_generator(6, example_2_1(0.6))
    assert orbit_representatives(gen).size < gen.size
    a = mixing_time_exact(gen, 0.25)
    b = mixing_time_exact(gen, 0.25, symmetry=False)
    assert a == pytest.approx(b, rel=1e-12)


def test_asymmetric_rate_reduces_less():
    rate = random_rate(np.random.default_rng(4))
    gen = build_generator(6, rate)
    reps = orbit_representatives(gen)
    assert reps.size == 14  # necklaces of length 6 over {0, 1}
    a = mixing_time_exact(gen, 0.25)
    b = mixing_time_exact(gen, 0.25, symmetry=False)
    assert a == pytest.approx(b, rel=1e-12)


def test_hitting_zero_on_target():
    gen = build_generator(6, example_2_1(0.3))
    A = StateSet.density_window(6, 0.8, 1.0)
    E = mean_hitting_exact(gen, A)
    assert np.all(E[A.mask] == 0) and np.all(E[~A.mask] > 0)
    with pytest.raises(EmptyTarget):
        mean_hitting_exact(gen, StateSet(6, np.zeros(64, bool)))


def test_hitting_against_simulation():
    n = 6
    gen = build_generator(n, example_2_1(0.0))
    target = StateSet.density_window(n, 1.0, 1.0)
    exact = mean_hitting_exact(gen, target)[0]
    H = np.array([set_hitting_time(example_2_1(0.0), np.zeros(n, dtype=int), target.mask, seed=s)
                  for s in range(3000)])
    assert abs(H.mean() - exact) < 4 * H.std() / math.sqrt(H.size)


def test_rate_into_set_by_hand():
    # gamma = 0, uniform mu, A = {all ones}: the 4 states with three particles
    # enter A by one unit-rate flip; the other 11 outside states cannot
    gen = build_generator(4, example_2_1(0.0))
    mu = stationary_distribution(gen)
    A = StateSet.density_window(4, 1.0, 1.0)
    res = rate_into_set(gen, mu, A)
    assert res.rate == pytest.approx(4 / 15, abs=1e-12)
    assert res.boundary.size == 4 and res.within_bound
    with pytest.raises(DegenerateSet):
        rate_into_set(gen, mu, StateSet(4, np.ones(16, bool)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_boundary_is_outside_and_adjacent(seed):
    rng = np.random.default_rng(seed)
    n = 6
    gen = build_generator(n, random_rate(rng))
    mu = stationary_distribution(gen)
    mask = rng.uniform(size=2**n) < 0.3
    mask[0], mask[-1] = True, False
    A = StateSet(n, mask)
    res = rate_into_set(gen, mu, A)
    assert not np.any(res.boundary.mask & A.mask)
    assert np.array_equal(res.boundary.mask, res.into > 0)
    assert res.within_bound


def test_metric_ball_predicate_recheck():
    from rdlab.hydro import DensitySlice
    ball = StateSet.metric_ball(8, DensitySlice.constant(0.5, 64), 0.3, outside=True)
    assert ball.recheck(rng=0)
    assert Configuration.zeros(8) in ball and Configuration.alternating(8) not in ball

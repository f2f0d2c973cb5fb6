import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdlab.errors import GridMismatch
from rdlab.hydro import (
    DensityPath, DensitySlice, bin_average, evolve, fourier_coefficients, fourier_metric,
    l2_distance, stationary_solutions, sup_distance, tail_bound,
)
from rdlab.model import example_2_1, potential_minima, reaction_polynomials

POLY = {g: reaction_polynomials(example_2_1(g)) for g in (0.0, 0.25, 0.75)}


def _smooth(rng, M, lo=0.1, hi=0.9):
    theta = np.arange(M) / M
    v = 0.5 + sum(rng.normal(0, 0.1) * np.cos(2 * np.pi * k * theta + rng.uniform(0, 6.3)) for k in (1, 2, 3))
    return DensitySlice(np.clip(v, lo, hi))


def test_slice_validation():
    with pytest.raises(ValueError):
        DensitySlice(np.array([0.5, 1.2]))
    with pytest.raises(ValueError):
        DensityPath(np.array([0.0, 0.1, 0.3]), np.full((3, 4), 0.5))


@pytest.mark.parametrize("gamma", [0.25, 0.75])
def test_roots_are_stationary(gamma):
    poly = POLY[gamma]
    for r in potential_minima(poly).minima:
        path = evolve(DensitySlice.constant(r, 32), poly, 10.0, 0.01)
        assert np.max(np.abs(path.values - r)) < 1e-10


def test_flat_ode_gamma_zero():
    path = evolve(DensitySlice.constant(0.2, 16), POLY[0.0], 1.0, 1e-3)
    want = 0.5 - 0.3 * math.exp(-2)
    assert want == pytest.approx(0.4594, abs=1e-4)
    assert np.max(np.abs(path.at(1.0).values - want)) < 1e-6


def test_converges_to_single_well():
    rho0 = DensitySlice.from_function(lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x), 64)
    path = evolve(rho0, POLY[0.25], 10.0, 0.01, save_every=100)
    gaps = np.max(np.abs(path.values - 0.5), axis=1)
    assert gaps[-1] < 1e-3 and np.all(np.diff(gaps) <= 1e-12)


def test_stationary_solutions():
    sols = stationary_solutions(POLY[0.0], M=256, seeds=50, rng=0)
    assert [s.constant for s in sols] == [True]
    assert sols[0].slice.values[0] == pytest.approx(0.5)
    sols = stationary_solutions(POLY[0.75], M=64, seeds=10, rng=0)
    consts = sorted(s.slice.values[0] for s in sols if s.constant)
    assert np.allclose(consts, [0.0286, 0.5, 0.9714], atol=1e-4)
    assert all(s.residual < 1e-8 for s in sols)


def test_metric_examples():
    one, zero = DensitySlice.constant(1.0, 64), DensitySlice.constant(0.0, 64)
    assert fourier_metric(one, one).value == 0
    assert fourier_metric(one, zero).value == pytest.approx(1.0, abs=1e-14)
    assert tail_bound(40) < 6e-12


def test_metric_atomic_measures():
    # alternating configuration on 8 sites against the flat profile 1/2:
    # atoms at 0, 1/4, 1/2, 3/4, so cosine modes k = 0 mod 4 each give sqrt2/2
    bits = np.array([1, 0] * 4)
    d = fourier_metric(bits, DensitySlice.constant(0.5, 64)).value
    assert d == pytest.approx(math.sqrt(2) / 2 * sum(2.0 ** -k for k in range(4, 41, 4)), rel=1e-12)
    rows = np.array([[1, 0] * 4, [0] * 8])
    vals = fourier_metric(rows, DensitySlice.constant(0.5, 64)).value
    assert vals.shape == (2,) and vals[1] == pytest.approx(0.5)


def test_metric_bounded_by_l2():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = _smooth(rng, 64), _smooth(rng, 64)
        m = fourier_metric(a, b)
        assert m.value <= 3 * l2_distance(a, b) + m.tail


def test_distances():
    one, zero = DensitySlice.constant(1.0, 8), DensitySlice.constant(0.0, 8)
    assert l2_distance(one, zero) == 1 and sup_distance(one, zero) == 1
    assert l2_distance(one, one) == 0
    with pytest.raises(GridMismatch):
        l2_distance(one, DensitySlice.constant(0.0, 16))
    assert np.allclose(bin_average(np.arange(8.0), 2), [1.5, 5.5])


def test_parseval():
    rng = np.random.default_rng(1)
    for _ in range(10):
        s = _smooth(rng, 256)
        c, si = fourier_coefficients(s, 40)
        assert abs(np.sum(c**2) + np.sum(si**2) - np.mean(s.values**2)) < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.25, 0.75]))
def test_l2_contraction(seed, gamma):
    rng = np.random.default_rng(seed)
    poly = POLY[gamma]
    C0 = poly.sup_abs_dF() + 1e-3
    a, b = _smooth(rng, 32, 0.0, 1.0), _smooth(rng, 32, 0.0, 1.0)
    pa, pb = evolve(a, poly, 5.0, 0.01), evolve(b, poly, 5.0, 0.01)
    d0 = l2_distance(a, b)
    for t in (0.1, 1.0, 5.0):
        assert l2_distance(pa.at(t), pb.at(t)) <= math.exp(C0 * t) * d0 + 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_comparison_principle(seed):
    rng = np.random.default_rng(seed)
    lo = _smooth(rng, 32, 0.0, 1.0)
    hi = DensitySlice(np.minimum(lo.values + rng.uniform(0, 0.3, 32), 1.0))
    pl, ph = evolve(lo, POLY[0.75], 2.0, 0.01), evolve(hi, POLY[0.75], 2.0, 0.01)
    assert np.all(ph.values >= pl.values - 1e-14)


def test_second_order_in_space():
    f = lambda x: 0.5 + 0.3 * np.sin(2 * np.pi * x) + 0.1 * np.cos(4 * np.pi * x)
    T, dt = 0.05, 2.5e-4
    ref = evolve(DensitySlice.from_function(f, 512), POLY[0.75], T, dt).values[-1]
    errs = []
    for M in (32, 64):
        v = evolve(DensitySlice.from_function(f, M), POLY[0.75], T, dt).values[-1]
        errs.append(np.max(np.abs(v - ref[:: 512 // M])))
    assert 3.0 < errs[0] / errs[1] < 5.0

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from rdlab.errors import DegenerateCritical, WindowTooLarge
from rdlab.model import (
    Configuration, LocalRate, example_2_1, example_2_1_literal, exchange_map, flip_map, flip_rate,
    glauber_kawasaki_rates, is_attractive, potential_minima, reaction_polynomials,
)

from conftest import random_rate

bitstrings = st.lists(st.integers(0, 1), min_size=3, max_size=24).map(
    lambda b: Configuration(np.array(b, dtype=np.uint8)))


def test_cyclic_indexing():
    c = Configuration.from_string("1100")
    assert c[4] == c[0] == 1 and c[-1] == c[3] == 0


def test_configuration_rejects_bad_values():
    with pytest.raises(ValueError):
        Configuration(np.array([0, 2, 1]))


def test_index_round_trip():
    c = Configuration.from_string("0110101")
    assert Configuration.from_index(c.to_index(), 7) == c
    assert Configuration.from_string("1000").to_index() == 1


def test_flip_map_examples():
    assert flip_map(Configuration.zeros(6), 3) == Configuration.from_string("000100")
    assert flip_map(Configuration.from_string("1010"), 0) == Configuration.from_string("0010")


def test_exchange_map_examples():
    assert exchange_map(Configuration.from_string("1100"), 1) == Configuration.from_string("1010")
    assert exchange_map(Configuration.from_string("1100"), 0) == Configuration.from_string("1100")
    # bond (n-1, 0) wraps
    assert exchange_map(Configuration.from_string("1000"), 3) == Configuration.from_string("0001")


@given(bitstrings, st.integers(0, 100))
def test_maps_are_involutions(c, x):
    x %= c.n
    assert flip_map(flip_map(c, x), x) == c
    assert exchange_map(exchange_map(c, x), x) == c
    assert exchange_map(c, x).particles == c.particles


def test_local_rate_validation():
    with pytest.raises(ValueError):
        LocalRate(1, np.ones(4))
    with pytest.raises(ValueError):
        LocalRate(1, np.r_[np.ones(7), 0.0])


def test_local_rate_json_round_trip():
    r = example_2_1(0.3)
    back = LocalRate.from_json(r.dumps())
    assert back == r
    assert json.loads(r.dumps())["radius"] == 1


def test_window_convention():
    # window (eta(-1), eta(0), eta(1)) = (1, 0, 0) has code 4
    table = np.arange(1.0, 9.0)
    r = LocalRate(1, table)
    c = Configuration.from_string("0001")  # site 3 occupied: left neighbour of site 0
    assert flip_rate(r, c, 0) == table[4]
    assert r.window(4) == (1, 0, 0)


def test_flip_rate_gamma_zero_is_one():
    rng = np.random.default_rng(0)
    c = Configuration(rng.integers(0, 2, 12))
    assert all(flip_rate(example_2_1(0.0), c, x) == 1.0 for x in range(12))


def test_flip_rate_printed_formula_examples():
    # the printed formula with coefficient gamma: windows 111 and 000 give 1 - g + g^2
    lit = example_2_1_literal(0.5)
    assert flip_rate(lit, Configuration.ones(5), 2) == pytest.approx(0.75)
    assert flip_rate(lit, Configuration.zeros(5), 2) == pytest.approx(0.75)
    # the preset matching the printed polynomials gives (1 - g)^2
    assert flip_rate(example_2_1(0.5), Configuration.ones(5), 2) == pytest.approx(0.25)


def test_window_too_large():
    r = LocalRate(2, np.linspace(1, 2, 32))
    with pytest.raises(WindowTooLarge):
        flip_rate(r, Configuration.zeros(4), 0)


def test_small_torus_uses_minimal_radius():
    inner = example_2_1(0.3)
    wide = LocalRate(2, inner.table[(np.arange(32) >> 1) & 7])
    assert wide.minimal() == inner
    c = Configuration.from_string("101")
    assert flip_rate(wide, c, 1) == flip_rate(inner, c, 1)


def test_event_rates_gamma_zero_n4():
    er = glauber_kawasaki_rates(Configuration.from_string("0110"), example_2_1(0.0))
    assert er.total_flip == 4 and er.per_bond == 8 and er.total_exchange == 32


def test_event_rates_pure_kawasaki():
    er = glauber_kawasaki_rates(Configuration.from_string("0110"), example_2_1(0.6), flips=False)
    assert er.total_flip == 0


@given(bitstrings, st.floats(0, 0.95))
def test_total_rate_bound(c, g):
    er = glauber_kawasaki_rates(c, example_2_1(g))
    assert er.total <= c.n**3 / 2 + c.n * example_2_1(g).c_max + 1e-9


def _printed(gamma):
    r = np.array([0.0, 1.0])
    one_minus = np.array([1.0, -1.0])
    u = np.array([1.0, -2.0])  # 1 - 2 rho
    B = P.polymul(one_minus, P.polyadd(P.polysub([1.0], 2 * gamma * u), gamma**2 * P.polymul(u, u)))
    D = P.polymul(r, P.polyadd(P.polyadd([1.0], 2 * gamma * u), gamma**2 * P.polymul(u, u)))
    s = np.array([-0.5, 1.0])
    s2 = P.polymul(s, s)
    V = P.polyadd((1 - 2 * gamma) * s2, 2 * gamma**2 * P.polymul(s2, s2))
    return B, D, P.polysub(B, D), V


def _pad(a, k):
    return np.pad(np.asarray(a, float), (0, k - len(a)))


@pytest.mark.parametrize("gamma", [0.0, 0.25, 0.5, 0.75, 0.9])
def test_polynomials_match_printed(gamma):
    poly = reaction_polynomials(example_2_1(gamma))
    for got, want in zip((poly.b, poly.d, poly.f, poly.v), _printed(gamma)):
        assert np.max(np.abs(_pad(got, 6) - _pad(want, 6))) < 1e-12


def test_gamma_zero_polynomials():
    poly = reaction_polynomials(example_2_1(0.0))
    x = np.linspace(0, 1, 11)
    assert np.allclose(poly.B(x), 1 - x) and np.allclose(poly.D(x), x)
    assert np.allclose(poly.V(x), (x - 0.5) ** 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 2))
def test_polynomial_identities_random_tables(seed, radius):
    rng = np.random.default_rng(seed)
    rate = random_rate(rng, radius)
    poly = reaction_polynomials(rate)
    assert np.allclose(_pad(poly.f, 8), _pad(poly.b, 8) - _pad(poly.d, 8), atol=1e-12)
    assert np.allclose(_pad(P.polyder(poly.v), 8), -_pad(poly.f, 8), atol=1e-12)
    assert abs(poly.V(0.5)) < 1e-14
    assert abs(poly.B(1.0)) < 1e-12 and abs(poly.D(0.0)) < 1e-12
    assert poly.F(0.0) > 0 and poly.F(1.0) < 0


def test_polynomials_monte_carlo():
    """Bernoulli expectations of the birth/death parts by direct sampling."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        rate = random_rate(rng)
        poly = reaction_polynomials(rate)
        rho = rng.uniform()
        w = (rng.uniform(size=(20_000, 3)) < rho).astype(int)
        code = w[:, 0] * 4 + w[:, 1] * 2 + w[:, 2]
        birth = (1 - w[:, 1]) * rate.table[code]
        death = w[:, 1] * rate.table[code]
        for sample, exact in ((birth, poly.B(rho)), (death, poly.D(rho))):
            se = sample.std() / np.sqrt(sample.size) + 1e-12
            assert abs(sample.mean() - exact) < 4 * se


def test_minima():
    p = potential_minima(reaction_polynomials(example_2_1(0.25)))
    assert p.minima == pytest.approx((0.5,)) and p.ell == 1
    g = 0.75
    p = potential_minima(reaction_polynomials(example_2_1(g)))
    half = np.sqrt(2 * g - 1) / (2 * g)
    assert np.allclose(p.minima, [0.5 - half, 0.5 + half], atol=1e-10)
    assert np.allclose(p.minima, [0.0286, 0.9714], atol=1e-4)
    poly = reaction_polynomials(example_2_1(g))
    assert all(abs(poly.F(m)) < 1e-10 for m in p.minima)


def test_degenerate_minimum_flagged():
    poly = reaction_polynomials(example_2_1(0.5))
    p = potential_minima(poly)
    assert p.minima == pytest.approx((0.5,)) and any(p.degenerate)
    with pytest.raises(DegenerateCritical):
        potential_minima(poly, strict=True)


@pytest.mark.parametrize("gamma", np.round(np.arange(0, 1.0, 0.1), 1))
def test_example_is_attractive(gamma):
    assert is_attractive(example_2_1(gamma))


def test_crafted_non_attractive():
    table = np.ones(8)
    table[0b010] = 0.5  # lone particle dies slower than one with occupied neighbours
    table[0b111] = 1.5
    assert not is_attractive(LocalRate(1, table))

"""Configurations, local flip rates and the reaction polynomials B, D, F, V.

Conventions
-----------
A configuration is an occupation vector ``eta`` on the discrete torus Z/nZ.
A local rate of radius R is a table with one entry per window
``(eta(-R), ..., eta(R))``; the window is encoded as the integer whose binary
digits, most significant first, are ``eta(-R), ..., eta(R)``.  So for R = 1
the window (1, 0, 0) has code 4 and (1, 1, 1) has code 7.

Polynomials are stored as ascending coefficient arrays (``numpy.polynomial``
power basis).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateCritical, WindowTooLarge

__all__ = [
    "Configuration",
    "LocalRate",
    "ReactionPolynomials",
    "PotentialProfile",
    "example_2_1",
    "example_2_1_literal",
    "PRESETS",
    "flip_map",
    "exchange_map",
    "flip_rate",
    "window_code",
    "window_codes",
    "glauber_kawasaki_rates",
    "EventRates",
    "reaction_polynomials",
    "potential_minima",
    "is_attractive",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Configuration:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1 or b.size == 0:
            raise ValueError("configuration must be a non-empty 1-d occupation vector")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("occupation values must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(b, np.uint8))

    @property
    def n(self) -> int:
        return int(self.bits.size)

    def __getitem__(self, x):
        return int(self.bits[x % self.n])

    def __eq__(self, other):
        return isinstance(other, Configuration) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        return f"Configuration({''.join(map(str, self.bits.tolist()))})"

    @classmethod
    def from_string(cls, s: str) -> "Configuration":
        return cls(np.array([int(ch) for ch in s], dtype=np.uint8))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n, dtype=np.uint8))

    @classmethod
    def alternating(cls, n):
        return cls((np.arange(n) + 1) % 2)

    def to_index(self) -> int:
        """State index used by the exact solvers: bit x of the index is eta(x)."""
        return int(np.dot(self.bits.astype(np.int64), 1 << np.arange(self.n, dtype=np.int64)))

    @classmethod
    def from_index(cls, index: int, n: int) -> "Configuration":
        return cls((index >> np.arange(n)) & 1)

    @property
    def particles(self) -> int:
        return int(self.bits.sum())

    @property
    def density(self) -> float:
        return self.particles / self.n


@dataclass(frozen=True, eq=False)
class LocalRate:
    """Translation-invariant flip rate c(x, eta) = table[code of window at x]."""

    radius: int
    table: np.ndarray
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        t = np.asarray(self.table, dtype=float)
        if t.shape != (2 ** (2 * self.radius + 1),):
            raise ValueError(f"table must have 2^(2R+1) = {2 ** (2 * self.radius + 1)} entries")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ValueError("rate table entries must be finite and strictly positive")
        object.__setattr__(self, "table", _frozen(t, float))

    @property
    def width(self) -> int:
        return 2 * self.radius + 1

    @property
    def c_max(self) -> float:
        return float(self.table.max())

    def window(self, code: int) -> tuple:
        """Occupations (eta(-R), ..., eta(R)) of a window code."""
        w = self.width
        return tuple((code >> (w - 1 - j)) & 1 for j in range(w))

    def minimal(self) -> "LocalRate":
        """Equivalent rate with the smallest radius the table depends on."""
        rate = self
        while rate.radius > 0:
            t = rate.table.reshape(2, -1, 2)
            if np.all(t[0] == t[1]) and np.all(t[:, :, 0] == t[:, :, 1]):
                rate = LocalRate(rate.radius - 1, t[0, :, 0], self.name)
            else:
                break
        return rate

    def to_json(self) -> dict:
        return {"radius": self.radius, "table": self.table.tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj) -> "LocalRate":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(int(obj["radius"]), np.asarray(obj["table"], dtype=float))

    def __eq__(self, other):
        return (
            isinstance(other, LocalRate)
            and self.radius == other.radius
            and np.array_equal(self.table, other.table)
        )

    def __hash__(self):
        return hash((self.radius, self.table.tobytes()))


def _nearest_neighbour_table(gamma, first_order):
    table = np.empty(8)
    for code in range(8):
        a, b, c = (code >> 2) & 1, (code >> 1) & 1, code & 1
        table[code] = (
            1
            + first_order * gamma * (1 - 2 * b) * (a + c - 1)
            + gamma**2 * (2 * a - 1) * (2 * c - 1)
        )
    return table


def example_2_1(gamma: float) -> LocalRate:
    """Ising-type nearest-neighbour rate with a phase transition at gamma = 1/2.

    In spin variables s = 2*eta - 1 this is (1 - g s0 s-1)(1 - g s0 s1), i.e.
    c = 1 + 2g(1 - 2e0)(e1 + e-1 - 1) + g^2 (2e-1 - 1)(2e1 - 1).  Its reaction
    polynomials are B = (1-r)(1 - g(1-2r))^2 and D = r(1 + g(1-2r))^2.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    return LocalRate(1, _nearest_neighbour_table(gamma, 2), name=f"example-2.1(gamma={gamma})")


def example_2_1_literal(gamma: float) -> LocalRate:
    """Variant with first-order coefficient g instead of 2g.

    c = 1 + g(1 - 2e0)(e1 + e-1 - 1) + g^2 (2e-1 - 1)(2e1 - 1).  Here
    F = (1 - 2r)(1 - g + g^2 (1 - 2r)^2) has the single root 1/2 for every
    g < 1, so this rate never produces two wells.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    return LocalRate(
        1, _nearest_neighbour_table(gamma, 1), name=f"example-2.1-literal(gamma={gamma})"
    )


PRESETS = {"example-2.1": example_2_1, "example-2.1-literal": example_2_1_literal}


def flip_map(config: Configuration, x: int) -> Configuration:
    b = config.bits.copy()
    b[x % config.n] ^= 1
    return Configuration(b)


def exchange_map(config: Configuration, x: int) -> Configuration:
    n = config.n
    b = config.bits.copy()
    y = (x + 1) % n
    b[x % n], b[y] = b[y], b[x % n]
    return Configuration(b)


def _check_window(rate: LocalRate, n: int) -> LocalRate:
    if n >= rate.width:
        return rate
    m = rate.minimal()
    if n < m.width:
        raise WindowTooLarge(f"n={n} is smaller than the rate window 2R+1={m.width}")
    return m


def window_code(rate: LocalRate, bits, x: int) -> int:
    n = len(bits)
    code = 0
    for j in range(-rate.radius, rate.radius + 1):
        code = (code << 1) | int(bits[(x + j) % n])
    return code


def window_codes(rate: LocalRate, bits) -> np.ndarray:
    """Window code at every site, vectorised."""
    bits = np.asarray(bits, dtype=np.int64)
    code = np.zeros(bits.shape, dtype=np.int64)
    for j in range(-rate.radius, rate.radius + 1):
        code = (code << 1) | np.roll(bits, -j, axis=-1)
    return code


def flip_rate(rate: LocalRate, config: Configuration, x: int) -> float:
    rate = _check_window(rate, config.n)
    return float(rate.table[window_code(rate, config.bits, x)])


@dataclass(frozen=True)
class EventRates:
    flip: np.ndarray
    exchange: np.ndarray
    total_flip: float
    total_exchange: float

    @property
    def total(self) -> float:
        return self.total_flip + self.total_exchange

    @property
    def per_bond(self) -> float:
        return float(self.exchange.max()) if self.exchange.size else 0.0


def glauber_kawasaki_rates(
    config: Configuration, rate: LocalRate, flips: bool = True, include_idle: bool = True
) -> EventRates:
    """Per-site flip rates and per-bond exchange rates n^2/2 of the generator.

    With ``include_idle=False`` bonds with equal endpoints get rate 0, which is
    what the simulator schedules.
    """
    n = config.n
    rate = _check_window(rate, n)
    if flips:
        flip = rate.table[window_codes(rate, config.bits)]
    else:
        flip = np.zeros(n)
    exch = np.full(n, n * n / 2.0)
    if not include_idle:
        exch = np.where(config.bits != np.roll(config.bits, -1), exch, 0.0)
    return EventRates(flip, exch, float(flip.sum()), float(exch.sum()))


@dataclass(frozen=True, eq=False)
class ReactionPolynomials:
    b: np.ndarray
    d: np.ndarray
    f: np.ndarray
    v: np.ndarray

    def B(self, rho):
        return P.polyval(rho, self.b)

    def D(self, rho):
        return P.polyval(rho, self.d)

    def F(self, rho):
        return P.polyval(rho, self.f)

    def V(self, rho):
        return P.polyval(rho, self.v)

    def dF(self, rho):
        return P.polyval(rho, P.polyder(self.f))

    def dB(self, rho):
        return P.polyval(rho, P.polyder(self.b))

    def dD(self, rho):
        return P.polyval(rho, P.polyder(self.d))

    def sup_abs_dF(self, grid: int = 10001) -> float:
        """sup over [0, 1] of |F'|, from a grid plus the interior critical points of F'."""
        der = P.polyder(self.f)
        pts = list(np.linspace(0.0, 1.0, grid))
        d2 = P.polyder(der)
        if d2.size and np.any(d2 != 0):
            for r in P.polyroots(d2):
                if abs(r.imag) < 1e-12 and 0 <= r.real <= 1:
                    pts.append(r.real)
        return float(np.max(np.abs(P.polyval(np.array(pts), der))))

    def to_json(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("b", "d", "f", "v")}


def _trim(c):
    c = np.asarray(c, dtype=float)
    return P.polytrim(c, tol=1e-15) if c.size else np.zeros(1)


def reaction_polynomials(rate: LocalRate) -> ReactionPolynomials:
    """B and D by exact enumeration of the window marginal of the Bernoulli measure."""
    w = rate.width
    b = np.zeros(w + 1)
    d = np.zeros(w + 1)
    centre = rate.radius
    for code in range(2**w):
        occ = rate.window(code)
        # product of rho^occ (1-rho)^(1-occ)
        weight = np.array([1.0])
        for o in occ:
            weight = P.polymul(weight, [0.0, 1.0] if o else [1.0, -1.0])
        term = rate.table[code] * weight
        if occ[centre]:
            d = P.polyadd(d, term)
        else:
            b = P.polyadd(b, term)
    b, d = _trim(b), _trim(d)
    f = P.polysub(b, d)
    v = P.polyint(-f)
    v = P.polysub(v, [P.polyval(0.5, v)])
    return ReactionPolynomials(b, d, _trim(f), _trim(v))


@dataclass(frozen=True)
class PotentialProfile:
    minima: tuple
    degenerate: tuple
    depths: tuple | None = None

    @property
    def ell(self) -> int:
        return len(self.minima)


def _bisect(fn, lo, hi, tol=1e-12):
    flo = fn(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def potential_minima(
    poly: ReactionPolynomials, tol: float = 1e-8, grid: int = 10001, strict: bool = False
) -> PotentialProfile:
    """Local minima of V in (0, 1): sign changes of F from + to -, refined by bisection.

    Roots with |V''| < tol are flagged as degenerate; with ``strict=True`` they
    raise DegenerateCritical instead.
    """
    xs = np.linspace(0.0, 1.0, grid)
    fs = poly.F(xs)
    minima, flags = [], []
    i = 0
    while i < grid - 1:
        if fs[i] > 0 and fs[i + 1] <= 0:
            j = i + 1
            while j < grid - 1 and fs[j] == 0:
                j += 1
            if fs[j] < 0 or j == grid - 1:
                root = _bisect(poly.F, xs[i], xs[j])
                if 0 < root < 1:
                    vpp = -float(poly.dF(root))
                    degenerate = abs(vpp) < tol
                    if degenerate and strict:
                        raise DegenerateCritical(f"V''({root:.6f}) = {vpp:.3e}")
                    minima.append(float(root))
                    flags.append(bool(degenerate))
            i = j
        else:
            i += 1
    return PotentialProfile(tuple(minima), tuple(flags))


def is_attractive(rate: LocalRate) -> bool:
    """Exhaustive check of the monotonicity conditions over ordered window pairs."""
    w = rate.width
    centre_bit = 1 << rate.radius
    codes = np.arange(2**w)
    t = rate.table
    for eta in codes:
        for xi in codes:
            if eta & xi != xi or eta == xi:  # need eta >= xi pointwise
                continue
            if (eta & centre_bit) != (xi & centre_bit):
                continue
            if eta & centre_bit:
                if t[eta] > t[xi]:
                    return False
            elif t[eta] < t[xi]:
                return False
    return True


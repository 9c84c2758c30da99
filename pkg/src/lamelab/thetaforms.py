"""Closed-form function algebra on theta-monomial sums.

A ThetaSum is a finite sum of terms ``coeff * exp(<k,x>) * prod_j
theta^{(d_j)}[char_j](<g_j,x> + c_j | m_j*tau)``.  The class is closed under
exact differentiation, argument shifts, and linear coordinate changes, which
is what lets every operator in the package be applied without discretization
error.  Terms are deliberately kept unmerged: evaluation dominates cost and
correctness beats compactness.
"""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass

import numpy as np

from .elliptic import MAX_DERIV_ORDER, ODD_CHAR, LatticeParam, ThetaCharacteristic, theta
from .errors import DimensionMismatch, NearPole, NotQuasiPeriodic, OrderOverflow

__all__ = [
    "AffineForm",
    "ThetaFactor",
    "ThetaTerm",
    "ThetaSum",
    "ThetaRatio",
    "odd_theta_factor",
    "evaluate",
    "differentiate",
    "shift",
    "compose_linear",
    "floquet_factor",
    "to_jsonable",
    "from_jsonable",
    "dumps",
    "loads",
]


def _ctuple(seq) -> tuple[complex, ...]:
    return tuple(complex(v) for v in seq)


def _dot(a, b) -> complex:
    return sum(x * y for x, y in zip(a, b))


@dataclass(frozen=True)
class AffineForm:
    """<gradient, x> + offset."""

    gradient: tuple[complex, ...]
    offset: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "gradient", _ctuple(self.gradient))
        object.__setattr__(self, "offset", complex(self.offset))

    def __call__(self, x) -> complex:
        return _dot(self.gradient, x) + self.offset


@dataclass(frozen=True)
class ThetaFactor:
    form: AffineForm
    char: ThetaCharacteristic = ODD_CHAR
    modulus_mult: int = 1
    deriv_order: int = 0

    def __post_init__(self):
        if not 0 <= self.deriv_order <= MAX_DERIV_ORDER:
            raise OrderOverflow(f"factor derivative order {self.deriv_order} outside 0..{MAX_DERIV_ORDER}")


def odd_theta_factor(gradient, offset=0j, deriv_order=0) -> ThetaFactor:
    return ThetaFactor(AffineForm(gradient, offset), deriv_order=deriv_order)


@dataclass(frozen=True)
class ThetaTerm:
    coeff: complex
    exp_covector: tuple[complex, ...]
    factors: tuple[ThetaFactor, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeff", complex(self.coeff))
        object.__setattr__(self, "exp_covector", _ctuple(self.exp_covector))
        object.__setattr__(self, "factors", tuple(self.factors))


@dataclass(frozen=True)
class ThetaSum:
    dim: int
    terms: tuple[ThetaTerm, ...]
    lat: LatticeParam

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.exp_covector) != self.dim:
                raise DimensionMismatch("exp_covector dimension != ThetaSum dimension")
            for f in t.factors:
                if len(f.form.gradient) != self.dim:
                    raise DimensionMismatch("factor gradient dimension != ThetaSum dimension")

    # -- evaluation ------------------------------------------------------

    def eval(self, x, _cache=None) -> complex:
        """Exact term-by-term evaluation.

        Theta values are memoized per call keyed by (argument, char, mult,
        order); repeated factors across the term list collapse to dict hits.
        """
        x = _ctuple(x)
        if len(x) != self.dim:
            raise DimensionMismatch(f"point has dim {len(x)}, ThetaSum has dim {self.dim}")
        cache = {} if _cache is None else _cache
        total = 0j
        for t in self.terms:
            val = t.coeff * cmath.exp(_dot(t.exp_covector, x))
            for f in t.factors:
                arg = f.form(x)
                key = (arg, f.char.alpha, f.char.beta, f.modulus_mult, f.deriv_order)
                th = cache.get(key)
                if th is None:
                    th = theta(arg, self.lat, f.char, f.modulus_mult, f.deriv_order)
                    cache[key] = th
                val *= th
            total += val
        return total

    def abs_scale(self, x) -> float:
        """Sum of term magnitudes at x; the natural residual normalizer."""
        x = _ctuple(x)
        cache = {}
        total = 0.0
        for t in self.terms:
            val = abs(t.coeff) * abs(cmath.exp(_dot(t.exp_covector, x)))
            for f in t.factors:
                arg = f.form(x)
                key = (arg, f.char.alpha, f.char.beta, f.modulus_mult, f.deriv_order)
                th = cache.get(key)
                if th is None:
                    th = theta(arg, self.lat, f.char, f.modulus_mult, f.deriv_order)
                    cache[key] = th
                val *= abs(th)
            total += val
        return total

    # -- algebra ---------------------------------------------------------

    def diff(self, direction) -> "ThetaSum":
        """Exact directional derivative (product rule over factors)."""
        direction = _ctuple(direction)
        if len(direction) != self.dim:
            raise DimensionMismatch("direction dimension != ThetaSum dimension")
        out = []
        for t in self.terms:
            c_exp = t.coeff * _dot(t.exp_covector, direction)
            if c_exp != 0:
                out.append(ThetaTerm(c_exp, t.exp_covector, t.factors))
            for i, f in enumerate(t.factors):
                slope = _dot(f.form.gradient, direction)
                if slope == 0:
                    continue
                if f.deriv_order + 1 > MAX_DERIV_ORDER:
                    raise OrderOverflow("differentiation exceeds the supported theta derivative order")
                bumped = ThetaFactor(f.form, f.char, f.modulus_mult, f.deriv_order + 1)
                out.append(ThetaTerm(t.coeff * slope, t.exp_covector,
                                     t.factors[:i] + (bumped,) + t.factors[i + 1:]))
        return ThetaSum(self.dim, tuple(out), self.lat)

    def shift(self, v) -> "ThetaSum":
        """g with g(x) = f(x+v): offsets absorb <gradient,v>, coeffs absorb e^{<k,v>}."""
        v = _ctuple(v)
        if len(v) != self.dim:
            raise DimensionMismatch("shift vector dimension != ThetaSum dimension")
        out = []
        for t in self.terms:
            factors = tuple(
                ThetaFactor(AffineForm(f.form.gradient, f.form.offset + _dot(f.form.gradient, v)),
                            f.char, f.modulus_mult, f.deriv_order)
                for f in t.factors)
            out.append(ThetaTerm(t.coeff * cmath.exp(_dot(t.exp_covector, v)), t.exp_covector, factors))
        return ThetaSum(self.dim, tuple(out), self.lat)

    def compose_linear(self, w) -> "ThetaSum":
        """g with g(x) = f(Wx) for a dim x dim matrix W (rows index f's coordinates)."""
        w = [tuple(map(complex, row)) for row in w]
        cols = range(self.dim)

        def pull(cov):
            return tuple(sum(cov[i] * w[i][j] for i in range(self.dim)) for j in cols)

        out = []
        for t in self.terms:
            factors = tuple(
                ThetaFactor(AffineForm(pull(f.form.gradient), f.form.offset),
                            f.char, f.modulus_mult, f.deriv_order)
                for f in t.factors)
            out.append(ThetaTerm(t.coeff, pull(t.exp_covector), factors))
        return ThetaSum(self.dim, tuple(out), self.lat)

    def scaled(self, c) -> "ThetaSum":
        return ThetaSum(self.dim, tuple(ThetaTerm(t.coeff * c, t.exp_covector, t.factors)
                                        for t in self.terms), self.lat)

    def __add__(self, other: "ThetaSum") -> "ThetaSum":
        if self.dim != other.dim:
            raise DimensionMismatch("cannot add ThetaSums of different dimension")
        return ThetaSum(self.dim, self.terms + other.terms, self.lat)


@dataclass(frozen=True)
class ThetaRatio:
    num: ThetaSum
    den: ThetaSum

    def __post_init__(self):
        if self.num.dim != self.den.dim:
            raise DimensionMismatch("numerator and denominator dimensions differ")

    @property
    def dim(self):
        return self.num.dim

    @property
    def lat(self):
        return self.num.lat

    def eval(self, x) -> complex:
        cache = {}
        d = self.den.eval(x, cache)
        if abs(d) < 1e-12 * (self.den.abs_scale(x) + 1e-300):
            raise NearPole(f"denominator vanishes near x={x}")
        return self.num.eval(x, cache) / d


# -- functional wrappers (the union-typed operation surface) -------------

def evaluate(f, x) -> complex:
    return f.eval(x)


def differentiate(f: ThetaSum, direction) -> ThetaSum:
    return f.diff(direction)


def shift(f: ThetaSum, v) -> ThetaSum:
    return f.shift(v)


def compose_linear(f: ThetaSum, w) -> ThetaSum:
    return f.compose_linear(w)


def floquet_factor(f, l, x0, n_samples=10, certify_tol=1e-9, fail_tol=1e-6):
    """Multiplier mu = f(x0+l)/f(x0) plus a quasi-periodicity residual.

    The residual is the worst relative defect |f(x+l) - mu f(x)| / |mu f(x)|
    over n_samples further points; mu is certified when it stays below
    certify_tol and NotQuasiPeriodic is raised above fail_tol.
    """
    base = f.eval(x0)
    if base == 0:
        raise NearPole("floquet_factor needs f(x0) != 0")
    mu = f.eval(tuple(a + b for a, b in zip(x0, l))) / base
    rng = np.random.default_rng(0x5EED)
    worst = 0.0
    got = 0
    while got < n_samples:
        x = tuple(complex(a, b) * 0.37 + c
                  for a, b, c in zip(rng.uniform(-1, 1, f.dim), rng.uniform(-1, 1, f.dim), x0))
        try:
            fx = f.eval(x)
            fxl = f.eval(tuple(a + b for a, b in zip(x, l)))
        except NearPole:
            continue
        denom = abs(mu * fx)
        if denom < 1e-12:
            continue
        worst = max(worst, abs(fxl - mu * fx) / denom)
        got += 1
    if worst > fail_tol:
        raise NotQuasiPeriodic(f"residual {worst:.3g} exceeds {fail_tol}")
    return mu, worst


# -- JSON serialization ---------------------------------------------------

def _c(z: complex):
    return [z.real, z.imag]


def to_jsonable(f: ThetaSum) -> dict:
    return {
        "dim": f.dim,
        "lat": {"tau": _c(f.lat.tau), "series_tol": f.lat.series_tol, "max_terms": f.lat.max_terms},
        "terms": [
            {
                "coeff": _c(t.coeff),
                "exp_covector": [_c(v) for v in t.exp_covector],
                "factors": [
                    {
                        "gradient": [_c(g) for g in fac.form.gradient],
                        "offset": _c(fac.form.offset),
                        "char": [fac.char.alpha, fac.char.beta],
                        "modulus_mult": fac.modulus_mult,
                        "deriv_order": fac.deriv_order,
                    }
                    for fac in t.factors
                ],
            }
            for t in f.terms
        ],
    }


def from_jsonable(doc: dict) -> ThetaSum:
    lat = LatticeParam(complex(*doc["lat"]["tau"]),
                       doc["lat"].get("series_tol", 1e-16),
                       doc["lat"].get("max_terms", 200))
    terms = []
    for t in doc["terms"]:
        factors = tuple(
            ThetaFactor(AffineForm(tuple(complex(*g) for g in fac["gradient"]), complex(*fac["offset"])),
                        ThetaCharacteristic(*fac["char"]), fac["modulus_mult"], fac["deriv_order"])
            for fac in t["factors"])
        terms.append(ThetaTerm(complex(*t["coeff"]),
                               tuple(complex(*v) for v in t["exp_covector"]), factors))
    return ThetaSum(doc["dim"], tuple(terms), lat)


def dumps(f: ThetaSum) -> str:
    return json.dumps(to_jsonable(f), sort_keys=True)


def loads(s: str) -> ThetaSum:
    return from_jsonable(json.loads(s))

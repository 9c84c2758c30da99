"""Scalar elliptic special functions.

Jacobi theta with rational characteristics, its z-derivatives, the
log-derivative family zeta(z) = theta'(z)/theta(z), and the Weierstrass
p-function, all over the lattice Z + tau*Z.  Every series is truncated by
the same certified criterion, so downstream modules inherit one accuracy
policy.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import BadModulus, NearPole, NonConvergent, OrderOverflow, ValidationError

PI = math.pi
TWO_PI_I = 2j * PI

# Exact mixed fourth derivatives of the closed-form numerators push single
# theta factors to order 7 (a 4th-power block taking three more derivatives);
# 8 leaves one spare, mirroring the headroom kept for cross-checks.
MAX_DERIV_ORDER = 8
POLE_GUARD = 1e-10

__all__ = [
    "LatticeParam",
    "ThetaCharacteristic",
    "ODD_CHAR",
    "theta",
    "wp",
    "zlog",
    "lambda_tau",
    "lattice_distance",
]


@dataclass(frozen=True)
class LatticeParam:
    """Modulus tau plus the truncation policy used by every theta series."""

    tau: complex
    series_tol: float = 1e-16
    max_terms: int = 200

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if tau.imag <= 0:
            raise BadModulus(f"Im(tau) must be positive, got tau={tau}")
        if self.series_tol <= 0:
            raise ValidationError("series_tol must be positive")
        if self.max_terms < 10:
            raise ValidationError("max_terms must be at least 10")


@dataclass(frozen=True)
class ThetaCharacteristic:
    """Pair (alpha, beta); alpha is 1-periodic, beta periodic up to e^{2 pi i alpha}."""

    alpha: float = 0.5
    beta: float = 0.5


ODD_CHAR = ThetaCharacteristic(0.5, 0.5)


def theta(z: complex,
          lat: LatticeParam,
          char: ThetaCharacteristic = ODD_CHAR,
          modulus_mult: int = 1,
          order: int = 0) -> complex:
    """order-th z-derivative of theta[alpha;beta](z | modulus_mult*tau).

    Series sum_n (2 pi i (n+alpha))^order exp(i pi (n+alpha)^2 tau' +
    2 pi i (n+alpha)(z+beta)), swept symmetrically outward from n=0 and
    truncated when the outermost ring drops below
    series_tol * (|partial sum| + 1).
    """
    if not 0 <= order <= MAX_DERIV_ORDER:
        raise OrderOverflow(f"derivative order {order} outside 0..{MAX_DERIV_ORDER}")
    if modulus_mult < 1:
        raise ValidationError("modulus_mult must be a positive integer")
    tau_eff = modulus_mult * lat.tau
    if tau_eff.imag < 0.05:
        raise BadModulus(
            f"modulus_mult*Im(tau) = {tau_eff.imag:.3g} below the 0.05 convergence floor")

    alpha, beta = char.alpha, char.beta
    w = z + beta
    tol = lat.series_tol

    def term(n: int) -> complex:
        m = n + alpha
        t = cmath.exp(1j * PI * m * m * tau_eff + TWO_PI_I * m * w)
        if order:
            t *= (TWO_PI_I * m) ** order
        return t

    total = term(0)
    for r in range(1, lat.max_terms + 1):
        t_plus = term(r)
        t_minus = term(-r)
        total += t_plus + t_minus
        ring = max(abs(t_plus), abs(t_minus))
        if ring < tol * (abs(total) + 1.0):
            return total
    raise NonConvergent(
        f"theta series did not settle within {lat.max_terms} rings (tau_eff={tau_eff})")


def lattice_distance(z: complex, tau: complex) -> float:
    """Distance from z to the nearest point of Z + tau*Z."""
    b = z.imag / tau.imag
    a = z.real - b * tau.real
    best = math.inf
    for m in (math.floor(a), math.ceil(a)):
        for n in (math.floor(b), math.ceil(b)):
            best = min(best, abs(z - (m + n * tau)))
    return best


def _require_off_lattice(z: complex, lat: LatticeParam, who: str):
    if lattice_distance(z, lat.tau) < POLE_GUARD:
        raise NearPole(f"{who}: z={z} within {POLE_GUARD} of a lattice point")


def zlog(z: complex, lat: LatticeParam, order: int = 0) -> complex:
    """order-th derivative of zeta(z) = theta'(z)/theta(z), order 0..4."""
    if not 0 <= order <= 4:
        raise OrderOverflow("zlog supports derivative orders 0..4")
    _require_off_lattice(z, lat, "zlog")
    th = theta(z, lat)
    g = [theta(z, lat, order=k) / th for k in range(order + 2)]
    # theta^{(n+1)} = sum_j C(n,j) zeta^{(j)} theta^{(n-j)} gives a recurrence
    # for the zeta derivatives in terms of the ratios g_k.
    zets = [g[1]]
    for n in range(1, order + 1):
        acc = g[n + 1]
        for j in range(n):
            acc -= math.comb(n, j) * zets[j] * g[n - j]
        zets.append(acc)
    return zets[order]


def lambda_tau(lat: LatticeParam) -> complex:
    """theta'''(0)/theta'(0); the additive constant calibrating wp."""
    return theta(0.0, lat, order=3) / theta(0.0, lat, order=1)


def wp(z: complex, lat: LatticeParam, order: int = 0) -> complex:
    """Weierstrass p-function (order 0) or its first/second derivative.

    Defined through the theta representation p(z) = -zeta'(z) + lambda/3,
    which makes the Laurent expansion at 0 equal to z^-2 + O(z^2).
    """
    if not 0 <= order <= 2:
        raise OrderOverflow("wp supports derivative orders 0..2")
    _require_off_lattice(z, lat, "wp")
    val = -zlog(z, lat, order=order + 1)
    if order == 0:
        val += lambda_tau(lat) / 3.0
    return val

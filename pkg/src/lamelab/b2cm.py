"""Continuous two-dimensional B2 operator: closed-form Bloch eigenfunctions,
vanishing-condition checks, the degree-13 covering variety, and eigenvalue
verification.

The operator is L = -Laplacian + 2 p(x1) + 2 p(x2) + 4 p(x1-x2) + 4 p(x1+x2).
Eigenfunctions have the form psi = Phi / [theta(x1) theta(x2) theta(x1-x2)
theta(x1+x2)] with Phi an explicit 9-block theta-monomial sum parametrized by
theta-shifts (a1, a2) and quasimomenta (k1, k2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import polysys, quasiinv
from .elliptic import LatticeParam, lambda_tau, lattice_distance, theta, zlog
from .errors import (CountMismatch, DegenerateA, NearPole, NotEigen,
                     VerticalComponent)
from .thetaforms import ThetaRatio, ThetaSum, ThetaTerm, odd_theta_factor

__all__ = [
    "WEYL_B2",
    "BlochPointB2",
    "b2_delta",
    "b2_potential",
    "build_phi",
    "build_psi",
    "vanishing_residuals",
    "variety_G",
    "variety_residual",
    "variety_polys",
    "solve_variety",
    "VarietySolution",
    "apply_L",
    "eigen_check",
    "sample_points",
]

TWO_PI_I = 2j * math.pi

# the eight signed permutations of (x1, x2) with their determinants
WEYL_B2 = tuple(
    (((s1 if not sw else 0, 0 if not sw else s1),
      (0 if not sw else s2, s2 if not sw else 0)),
     (s1 * s2) * (-1 if sw else 1))
    for sw in (False, True) for s1 in (1, -1) for s2 in (1, -1)
)


@dataclass(frozen=True)
class BlochPointB2:
    """Spectral data (a1, a2, k1, k2) of one double-Bloch solution."""

    a1: complex
    a2: complex
    k1: complex
    k2: complex
    lat: LatticeParam

    @property
    def p1(self) -> complex:
        return self.k1 + zlog(self.a1, self.lat)

    @property
    def p2(self) -> complex:
        return self.k2 + zlog(self.a2, self.lat)

    def floquet_multipliers(self):
        """(lambda1, lambda2, mu1, mu2); lambda_j = -e^{K_j} with K_j = k_j - i pi."""
        tau = self.lat.tau
        lams = tuple(-cmath.exp(k - 1j * math.pi) for k in (self.k1, self.k2))
        gammas = (self.a1 + (1 + tau) / 2, self.a2 + (1 + tau) / 2)
        mus = tuple(-cmath.exp(-TWO_PI_I * g + (k - 1j * math.pi) * tau)
                    for g, k in zip(gammas, (self.k1, self.k2)))
        return lams + mus

    def canonical(self) -> "BlochPointB2":
        """Reduce each a_j into the fundamental parallelogram with vertices
        +-(1+tau)/2, adjusting k_j by 2 pi i per tau-step."""
        tau = self.lat.tau
        out_a, out_k = [], []
        for a, k in ((self.a1, self.k1), (self.a2, self.k2)):
            n = round(a.imag / tau.imag)
            a2_ = a - n * tau
            m = round(a2_.real - 0.5 * (1 + tau).real + 0.5)
            out_a.append(a2_ - m)
            out_k.append(k - TWO_PI_I * n)
        return BlochPointB2(out_a[0], out_a[1], out_k[0], out_k[1], self.lat)


def bloch_from_p(a1, a2, p1, p2, lat) -> BlochPointB2:
    return BlochPointB2(a1, a2, p1 - zlog(a1, lat), p2 - zlog(a2, lat), lat)


def b2_delta(lat: LatticeParam) -> ThetaSum:
    """theta(x1) theta(x2) theta(x1-x2) theta(x1+x2)."""
    return ThetaSum(2, (ThetaTerm(1.0, (0, 0), (
        odd_theta_factor((1, 0)), odd_theta_factor((0, 1)),
        odd_theta_factor((1, -1)), odd_theta_factor((1, 1)))),), lat)


def b2_potential(lat: LatticeParam) -> quasiinv.PotentialSpec:
    return quasiinv.builtin("B2_CM", lat)


# -- the closed form ------------------------------------------------------
#
# Coefficient table for the 9 blocks b_ij in formal letters A, B, C, D with
# U = A - B - C and V = A + B - D; a monomial c A^p B^q C^r D^s stands for
# c theta^(p)(x1+a1) theta^(q)(x2+a2) theta^(r)(x1-x2) theta^(s)(x1+x2).

def _pmul(f: dict, g: dict) -> dict:
    out = {}
    for ea, ca in f.items():
        for eb, cb in g.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            out[key] = out.get(key, 0j) + ca * cb
    return out


def _padd(f: dict, g: dict) -> dict:
    out = dict(f)
    for e, c in g.items():
        out[e] = out.get(e, 0j) + c
    return out


def _pscale(f: dict, c) -> dict:
    return {e: v * c for e, v in f.items()}


def _block_table(lam: complex) -> dict:
    one = {(0, 0, 0, 0): 1.0 + 0j}
    U = {(1, 0, 0, 0): 1.0 + 0j, (0, 1, 0, 0): -1.0 + 0j, (0, 0, 1, 0): -1.0 + 0j}
    V = {(1, 0, 0, 0): 1.0 + 0j, (0, 1, 0, 0): 1.0 + 0j, (0, 0, 0, 1): -1.0 + 0j}
    mlam = _pscale(one, -lam)
    u2 = _padd(_pmul(U, U), mlam)   # U^2 - lambda
    v2 = _padd(_pmul(V, V), mlam)
    return {
        (2, 2): one,
        (2, 1): _pscale(U, 2),
        (1, 2): _pscale(V, 2),
        (2, 0): u2,
        (0, 2): v2,
        (1, 1): _pscale(_pmul(U, V), 4),
        (1, 0): _pscale(_pmul(V, u2), 2),
        (0, 1): _pscale(_pmul(U, v2), 2),
        (0, 0): _pmul(u2, v2),
    }


def build_phi(pt: BlochPointB2) -> ThetaSum:
    """The unique (up to scale) numerator satisfying all four vanishing
    conditions, assembled from the 9-block coefficient table."""
    lat = pt.lat
    th_a1 = theta(pt.a1, lat)
    th_a2 = theta(pt.a2, lat)
    if min(abs(th_a1), abs(th_a2)) < 1e-12:
        raise DegenerateA("theta(a_j) = 0; shift parameters off the lattice")
    lam = lambda_tau(lat)
    kp = pt.k1 + pt.k2
    km = pt.k1 - pt.k2
    norm = 1.0 / (th_a1 * th_a2)
    terms = []
    for (i, j), block in _block_table(lam).items():
        kfac = kp**i * km**j
        if kfac == 0 and (i or j):
            continue
        for (p, q, r, s), c in block.items():
            terms.append(ThetaTerm(
                c * kfac * norm, (pt.k1, pt.k2),
                (odd_theta_factor((1, 0), pt.a1, p),
                 odd_theta_factor((0, 1), pt.a2, q),
                 odd_theta_factor((1, -1), 0, r),
                 odd_theta_factor((1, 1), 0, s))))
    return ThetaSum(2, tuple(terms), lat)


def build_psi(pt: BlochPointB2) -> ThetaRatio:
    return ThetaRatio(build_phi(pt), b2_delta(pt.lat))


# -- vanishing conditions --------------------------------------------------

_LINES = (
    ((1, 0), (0, 1), "x1=0"),        # normal derivative direction, line direction
    ((0, 1), (1, 0), "x2=0"),
    ((1, 1), (1, -1), "x1+x2=0"),
    ((1, -1), (1, 1), "x1-x2=0"),
)


def vanishing_residuals(phi: ThetaSum, n_points: int = 8) -> tuple[float, float, float, float]:
    """Max normalized |normal derivative of Phi| over each of the four
    reflection lines (order: x1=0, x2=0, x1+x2=0, x1-x2=0)."""
    out = []
    ts = [0.17 + 0.41 * i + (0.05 + 0.03 * i) * 1j for i in range(n_points)]
    for deriv_dir, line_dir, _name in _LINES:
        dphi = phi.diff(deriv_dir)
        worst = 0.0
        for t in ts:
            x = (t * line_dir[0], t * line_dir[1])
            scale = max(abs(phi.eval((x[0] + 0.31, x[1] + 0.17))),
                        abs(phi.eval((x[0] - 0.23, x[1] + 0.39))), 1e-30)
            worst = max(worst, abs(dphi.eval(x)) / scale)
        out.append(worst)
    return tuple(out)


def variety_G(pt: BlochPointB2):
    """Exact mixed derivatives (d1 d2 Phi, d1 d2^3 Phi) at the origin."""
    phi = build_phi(pt)
    d1 = phi.diff((1, 0))
    g1 = d1.diff((0, 1))
    g2 = g1.diff((0, 1)).diff((0, 1))
    origin = (0, 0)
    return g1.eval(origin), g2.eval(origin)


# -- the covering variety --------------------------------------------------

def _zeta_jet(a, lat):
    return [zlog(a, lat, order=o) for o in range(5)]  # zeta, zeta', .., zeta''''


def _q3_coeffs(jet):
    # p^3 + 3 zeta' p + zeta''
    return {3: 1.0 + 0j, 1: 3 * jet[1], 0: jet[2]}


def _q5_coeffs(jet):
    # p^5 + 10 zeta' p^3 + 10 zeta'' p^2 + (5 zeta''' + 15 zeta'^2) p
    #     + zeta'''' + 10 zeta' zeta''
    return {5: 1.0 + 0j, 3: 10 * jet[1], 2: 10 * jet[2],
            1: 5 * jet[3] + 15 * jet[1] ** 2, 0: jet[4] + 10 * jet[1] * jet[2]}


def variety_residual(a1, a2, p1, p2, lat: LatticeParam):
    """Literal residuals (r1, r2) of the quartic/sextic Bloch-variety pair."""
    j1, j2 = _zeta_jet(a1, lat), _zeta_jet(a2, lat)

    def ev(coeffs, p):
        return sum(c * p**e for e, c in coeffs.items())

    r1 = p1 * ev(_q3_coeffs(j2), p2) - p2 * ev(_q3_coeffs(j1), p1)
    r2 = p1 * ev(_q5_coeffs(j2), p2) - p2 * ev(_q5_coeffs(j1), p1)
    return r1, r2


def variety_polys(a1, a2, lat: LatticeParam):
    """The same pair as bivariate polynomial dicts in (p1, p2)."""
    j1, j2 = _zeta_jet(a1, lat), _zeta_jet(a2, lat)
    e1, e2 = {}, {}
    for e, c in _q3_coeffs(j2).items():
        e1[(1, e)] = e1.get((1, e), 0j) + c
    for e, c in _q3_coeffs(j1).items():
        e1[(e, 1)] = e1.get((e, 1), 0j) - c
    for e, c in _q5_coeffs(j2).items():
        e2[(1, e)] = e2.get((1, e), 0j) + c
    for e, c in _q5_coeffs(j1).items():
        e2[(e, 1)] = e2.get((e, 1), 0j) - c
    return e1, e2


@dataclass(frozen=True)
class VarietySolution:
    p1: complex
    p2: complex
    k1: complex
    k2: complex
    residual: float
    kind: str = "generic"


def solve_variety(a1, a2, lat: LatticeParam, expected: int = 13,
                  newton_tol: float = 1e-11, dedup_tol: float = 1e-8) -> list[VarietySolution]:
    """All nontrivial Bloch-variety points over (a1, a2).

    Resultant elimination of p2, companion roots in p1, back-solve, Newton
    polish, deduplicate, drop the trivial origin and the multiplicity blob at
    infinity.  Raises VerticalComponent when a1 = +-a2 (infinite fiber) and
    CountMismatch when the generic count is not reached.
    """
    a1, a2 = complex(a1), complex(a2)
    tau = lat.tau
    for sgn, label in ((-1, "a1=a2"), (1, "a1=-a2")):
        if lattice_distance(a1 + sgn * a2, tau) < 1e-6:
            raise VerticalComponent(f"{label} mod lattice: fiber is not finite")
    e1, e2 = variety_polys(a1, a2, lat)

    def f(z):
        v1 = polysys.biv_eval(e1, z[0], z[1])
        v2 = polysys.biv_eval(e2, z[0], z[1])
        scale = max(polysys.biv_scale_estimate(e1, z[0], z[1]),
                    polysys.biv_scale_estimate(e2, z[0], z[1]), 1.0)
        return v1, v2, scale

    d11, d12 = polysys.biv_diff(e1, 0), polysys.biv_diff(e1, 1)
    d21, d22 = polysys.biv_diff(e2, 0), polysys.biv_diff(e2, 1)

    def jac(z):
        return [[polysys.biv_eval(d11, z[0], z[1]), polysys.biv_eval(d12, z[0], z[1])],
                [polysys.biv_eval(d21, z[0], z[1]), polysys.biv_eval(d22, z[0], z[1])]]

    found = None
    for radius in (3.0, 1.5, 6.0, 10.0):
        roots = polysys.eliminant_roots(e1, e2, radius=radius)
        roots = [r for r in roots if abs(r) < 1e6]
        cands = polysys.candidate_pairs(e1, e2, roots, q_rel_tol=1e-3)
        polished = []
        for z0 in cands:
            z, res, ok = polysys.newton2(f, jac, z0, tol=newton_tol)
            if ok and max(abs(z[0]), abs(z[1])) < 1e6:
                polished.append((complex(z[0]), complex(z[1]), res))
        pairs = polysys.dedup_pairs([(p1, p2) for p1, p2, _ in polished], tol=dedup_tol)
        pairs = [z for z in pairs if max(abs(z[0]), abs(z[1])) > 1e-6]  # drop p = (0,0)
        if len(pairs) == expected:
            found = pairs
            break
    if found is None:
        raise CountMismatch(expected, len(pairs))

    res_of = {z: r for (z1, z2, r) in polished for z in [(z1, z2)]}
    zeta1, zeta2 = zlog(a1, lat), zlog(a2, lat)
    sols = [VarietySolution(p1, p2, p1 - zeta1, p2 - zeta2,
                            res_of.get((p1, p2), 0.0))
            for p1, p2 in found]
    sols.sort(key=lambda s: (s.p1.real, s.p1.imag, s.p2.real))
    return sols


# -- applying the operator -------------------------------------------------

def _ratio_second_derivative(num_jets, den_jets, x):
    """(value, sum over directions of second derivatives) of num/den at x.

    Jets are (f, [df_i], [d2f_i]) of exact ThetaSum derivatives; the ratio's
    second derivative uses d2(N/D) = (N'' - 2 (N/D)' D' - (N/D) D'')/D.
    """
    n, dn, d2n = num_jets
    d, dd, d2d = den_jets
    nv = n.eval(x)
    dv = d.eval(x)
    if abs(dv) < 1e-12 * (d.abs_scale(x) + 1e-300):
        raise NearPole(f"denominator vanishes near {x}")
    psi = nv / dv
    lap = 0j
    for dni, d2ni, ddi, d2di in zip(dn, d2n, dd, d2d):
        dpsi = (dni.eval(x) - psi * ddi.eval(x)) / dv
        lap += (d2ni.eval(x) - 2 * dpsi * ddi.eval(x) - psi * d2di.eval(x)) / dv
    return psi, lap


class _B2Operator:
    """Pointwise action of -Laplacian + u on a ThetaSum or ThetaRatio."""

    def __init__(self, f, lat):
        self.lat = lat
        self.spec = b2_potential(lat)
        dirs = ((1, 0), (0, 1))
        if isinstance(f, ThetaRatio):
            num, den = f.num, f.den
        else:
            num, den = f, None
        dnum = [num.diff(d) for d in dirs]
        self.num_jets = (num, dnum, [g.diff(d) for g, d in zip(dnum, dirs)])
        if den is None:
            self.den_jets = None
        else:
            dden = [den.diff(d) for d in dirs]
            self.den_jets = (den, dden, [g.diff(d) for g, d in zip(dden, dirs)])
        self.f = f

    def value(self, x):
        return self.f.eval(x)

    def __call__(self, x):
        u = quasiinv.potential_eval(self.spec, x)
        if self.den_jets is None:
            n, dn, d2n = self.num_jets
            return -sum(g.eval(x) for g in d2n) + u * n.eval(x)
        psi, lap = _ratio_second_derivative(self.num_jets, self.den_jets, x)
        return -lap + u * psi


def apply_L(f, lat: LatticeParam) -> _B2Operator:
    """Exact evaluator of (-Laplacian + u) f; call it at points."""
    return _B2Operator(f, lat)


def sample_points(lat: LatticeParam, n: int, seed: int = 0x5EED, margin: float = 0.05,
                  forms=((1, 0), (0, 1), (1, -1), (1, 1))):
    """Deterministic generic complex points keeping every singular form at
    least `margin` away from the lattice."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        x = tuple(complex(rng.uniform(0.08, 0.92), rng.uniform(-0.22, 0.22)) for _ in range(2))
        vals = [sum(g * xi for g, xi in zip(form, x)) for form in forms]
        if all(lattice_distance(v, lat.tau) >= margin for v in vals):
            pts.append(x)
    return pts


def eigen_check(pt: BlochPointB2, n_points: int = 20, fail_tol: float = 1e-6):
    """(E, residual): E estimated at one generic point, residual the max of
    |(L psi)(x) - E psi(x)| / |E psi(x)| over generic samples."""
    psi = build_psi(pt)
    op = apply_L(psi, pt.lat)
    x0 = (0.231 + 0.031j, 0.513 - 0.062j)
    e = op(x0) / psi.eval(x0)
    worst = 0.0
    for x in sample_points(pt.lat, n_points):
        lv = op(x)
        pv = psi.eval(x)
        denom = max(abs(e * pv), 1e-30)
        worst = max(worst, abs(lv - e * pv) / denom)
    if worst > fail_tol:
        raise NotEigen(f"eigen residual {worst:.3g} exceeds {fail_tol}")
    return e, worst

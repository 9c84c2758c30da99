"""Generalized elliptic potentials, their quasi-invariance test, and the
catalog of root-system / deformed-root-system configurations.

A potential is a finite sum of Weierstrass terms c * p(alpha(x)) over affine
covectors alpha, with c = m(m+1)*(alpha0,alpha0) for a declared positive
integer multiplicity m.  Quasi-invariance at a singular hyperplane means the
reflection difference u(x) - u(s x) is divisible by the (2m+1)-st power of
the hyperplane's defining function; it is tested here by coefficient
extraction on a small circle around a generic point of the hyperplane,
together with a check that the second-order pole carries the declared
integer coefficient.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import LatticeParam, lattice_distance, wp, zlog
from .errors import (BadParams, CoincidentPoles, DegenerateSample, NearPole,
                     NoConvergence, ValidationError)
from .thetaforms import AffineForm

__all__ = [
    "PotentialTerm",
    "PotentialSpec",
    "HyperplaneId",
    "QIReport",
    "potential_eval",
    "quasi_invariance_check",
    "hyperplanes",
    "builtin",
    "BUILTIN_NAMES",
    "locus_residual",
    "locus_solve",
]

HALF_PERIOD_INDEX = (0, 1, 2, 3)  # 0, 1/2, tau/2, (1+tau)/2


def _angle(m: int) -> int:
    """<m> = max{m, -1-m}; the multiplicity convention of the deformed catalog."""
    return max(m, -1 - m)


@dataclass(frozen=True)
class PotentialTerm:
    form: AffineForm
    mult: int
    coeff: complex | None = None  # None -> m(m+1)*(grad,grad); override only for perturbation studies

    def gram(self) -> complex:
        return sum(g * g for g in self.form.gradient)

    def coefficient(self) -> complex:
        if self.coeff is not None:
            return complex(self.coeff)
        return self.mult * (self.mult + 1) * self.gram()


@dataclass(frozen=True)
class PotentialSpec:
    dim: int
    terms: tuple[PotentialTerm, ...]
    lat: LatticeParam

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.form.gradient) != self.dim:
                raise ValidationError("potential term dimension mismatch")
            if abs(t.gram()) <= 1e-12:
                raise ValidationError(f"isotropic covector {t.form.gradient} not allowed")
            if t.coeff is None and t.mult < 1:
                raise ValidationError("multiplicities must be positive integers")


@dataclass(frozen=True)
class HyperplaneId:
    term_index: int
    lattice_shift: tuple[int, int] = (0, 0)


@dataclass
class QIReport:
    hyperplane: HyperplaneId
    passed: bool
    odd_coeffs: list[complex]          # Taylor coefficients of u - u o s at odd orders 1..2m-1
    all_coeffs: list[complex]          # orders 0..2m, radius-normalized
    pole_coeff: complex                # fitted t^-2 coefficient of u along the normal, / (grad,grad)
    pole_ok: bool
    divisible_ok: bool
    scale: float


def potential_eval(spec: PotentialSpec, x) -> complex:
    """u(x) = sum over terms of m(m+1)(a0,a0) p(alpha(x))."""
    x = tuple(map(complex, x))
    total = 0j
    for t in spec.terms:
        z = t.form(x)
        if lattice_distance(z, spec.lat.tau) < 1e-6:
            raise NearPole(f"x within 1e-6 of the singular hyperplane of {t.form.gradient}")
        total += t.coefficient() * wp(z, spec.lat)
    return total


def hyperplanes(spec: PotentialSpec) -> list[HyperplaneId]:
    return [HyperplaneId(i) for i in range(len(spec.terms))]


def _tangent_frame(gradient):
    """Vectors spanning ker(alpha0) under the bilinear (not hermitian) pairing."""
    g = np.asarray(gradient, dtype=complex)
    gg = g @ g
    frame = []
    for j in range(len(g)):
        e = np.zeros(len(g), dtype=complex)
        e[j] = 1.0
        v = e - (g[j] / gg) * g
        if np.max(np.abs(v)) > 1e-12:
            frame.append(v)
    return frame, gg


def quasi_invariance_check(spec: PotentialSpec, h: HyperplaneId,
                           radius: float = 1e-2, rel_tol: float = 1e-7,
                           seed: int = 0x5EED) -> QIReport:
    """Divisibility + pole-coefficient test at one singular hyperplane.

    Samples u on a circle |t| = radius around a generic on-hyperplane base
    point along the unit normal, plus the reflected branch.  One DFT yields
    (i) the Laurent t^-2 coefficient of u, which must equal m(m+1) times the
    gram of the covector, and (ii) the Taylor coefficients of
    g(t) = u(x0 + t n) - u(x0 - t n), which must vanish through order 2m.
    """
    term = spec.terms[h.term_index]
    m = term.mult
    g = term.form.gradient
    offs = h.lattice_shift[0] + h.lattice_shift[1] * spec.lat.tau
    frame, gg = _tangent_frame(g)
    s = cmath.sqrt(gg)
    normal = tuple(gi / s for gi in g)
    rng = np.random.default_rng(seed)

    # 4m+4 points resolve the orders being tested; oversampling kills the
    # (r/d)^(j+N) aliasing from hyperplanes a few radii away
    n_pts = max(4 * m + 4, 32)
    roots = [radius * cmath.exp(2j * math.pi * k / n_pts) for k in range(n_pts)]

    def place_base():
        # particular solution of alpha(x) = shift, plus a random tangent drift
        x_p = np.array([(offs - term.form.offset) * gi / gg for gi in g], dtype=complex)
        for v in frame:
            x_p = x_p + complex(rng.uniform(0.15, 0.45) * (1 if rng.uniform() < 0.5 else -1),
                                rng.uniform(-0.2, 0.2)) * v
        return tuple(x_p)

    def circle_clear(x0):
        for t in roots:
            for sign in (1, -1):
                y = tuple(a + sign * t * n for a, n in zip(x0, normal))
                for idx, tt in enumerate(spec.terms):
                    z = tt.form(y)
                    if idx == h.term_index:
                        # skip the hyperplane being probed, keep its other translates
                        zc = z - offs
                        d = min(abs(zc - (mm + nn * spec.lat.tau))
                                for mm in (-1, 0, 1) for nn in (-1, 0, 1)
                                if (mm, nn) != (0, 0))
                        d = min(d, 1.0)  # translates beyond the 3x3 block are farther
                        if d < 1e-2:
                            return False
                    else:
                        if lattice_distance(z, spec.lat.tau) < 1e-2:
                            return False
        return True

    x0 = None
    for _ in range(8):
        cand = place_base()
        if circle_clear(cand):
            x0 = cand
            break
    if x0 is None:
        raise DegenerateSample("no generic base point clear of neighboring hyperplanes")

    u_plus = np.empty(n_pts, dtype=complex)
    u_minus = np.empty(n_pts, dtype=complex)
    for k, t in enumerate(roots):
        u_plus[k] = _potential_eval_unsafe(spec, tuple(a + t * n for a, n in zip(x0, normal)), spec.lat)
        u_minus[k] = _potential_eval_unsafe(spec, tuple(a - t * n for a, n in zip(x0, normal)), spec.lat)

    u_scale = float(np.max(np.abs(u_plus)) + np.max(np.abs(u_minus))) / 2.0
    phase = np.exp(-2j * math.pi * np.outer(np.arange(-2, 2 * m + 1), np.arange(n_pts)) / n_pts)
    lau = phase @ u_plus / n_pts          # radius-normalized coefficients, orders -2..2m
    gdiff = phase[2:] @ (u_plus - u_minus) / n_pts  # orders 0..2m of the reflection difference

    # pole data: u ~ c_alpha (alpha(x)-offs)^-2 and alpha(x0+tn)-offs = t*s
    pole_fit = lau[0] * radius**2 * gg    # recovered c_alpha = coeff * (a0,a0)/(t s)^2 scaling
    pole_target = m * (m + 1) * gg
    pole_ok = abs(pole_fit - pole_target) <= rel_tol * max(abs(pole_target), 1.0) \
        and abs(lau[1]) * radius <= rel_tol * max(abs(lau[0]), 1.0)

    # scale against the difference's own circle magnitude; the floor covers
    # reflection-symmetric potentials where g is pure rounding noise
    g_circle = float(np.max(np.abs(u_plus - u_minus)))
    scale = max(g_circle, float(np.max(np.abs(gdiff))), 1e-7 * max(u_scale, 1.0))
    divisible_ok = bool(np.all(np.abs(gdiff) <= rel_tol * scale))

    odd = [complex(gdiff[j]) for j in range(1, 2 * m, 2)]
    return QIReport(h, pole_ok and divisible_ok, odd, [complex(v) for v in gdiff],
                    complex(pole_fit / gg), pole_ok, divisible_ok, scale)


def _potential_eval_unsafe(spec, x, lat):
    # circle sampling guarantees clearance; skip the per-call pole guard
    return sum(t.coefficient() * wp(t.form(x), lat) for t in spec.terms)


# -- catalog ---------------------------------------------------------------

BUILTIN_NAMES = (
    "A_CM", "B2_CM", "G2_CM", "BCn_Inozemtsev",
    "A_n_1", "C_n_1", "BC_n_deformed", "Hietarinta", "A_n_2",
)


def _half_periods(lat):
    return (0.0, 0.5, lat.tau / 2, (1 + lat.tau) / 2)


def _require_int(name, value):
    if not float(value).is_integer():
        raise BadParams(f"{name} must be an integer, got {value}")
    return int(value)


def builtin(name: str, lat: LatticeParam, **params) -> PotentialSpec:
    """Catalog configurations, with covectors and multiplicities as printed."""
    key = name.replace("-", "_")
    terms: list[PotentialTerm] = []

    def ev(i, dim):
        v = [0.0] * dim
        v[i] = 1.0
        return v

    if key == "A_CM":
        n = _require_int("n", params["n"])
        m = _require_int("m", params["m"])
        if m < 1:
            raise BadParams("A_CM needs m >= 1")
        for i in range(n):
            for j in range(i + 1, n):
                grad = [0.0] * n
                grad[i], grad[j] = 1.0, -1.0
                terms.append(PotentialTerm(AffineForm(grad), m))
        return PotentialSpec(n, tuple(terms), lat)

    if key == "B2_CM":
        for grad in ((1, 0), (0, 1), (1, -1), (1, 1)):
            terms.append(PotentialTerm(AffineForm(grad), 1))
        return PotentialSpec(2, tuple(terms), lat)

    if key == "G2_CM":
        m_long = _require_int("m_long", params.get("m_long", 1))
        m_short = _require_int("m_short", params.get("m_short", 1))
        for (i, j) in ((0, 1), (1, 2), (0, 2)):
            grad = [0.0] * 3
            grad[i], grad[j] = 1.0, -1.0
            terms.append(PotentialTerm(AffineForm(grad), m_long))
        for (i, j, k) in ((0, 1, 2), (1, 0, 2), (2, 0, 1)):
            grad = [0.0] * 3
            grad[i], grad[j], grad[k] = 2.0, -1.0, -1.0
            terms.append(PotentialTerm(AffineForm(grad), m_short))
        return PotentialSpec(3, tuple(terms), lat)

    if key == "BCn_Inozemtsev":
        n = _require_int("n", params["n"])
        m = _require_int("m", params["m"])
        gs = [_require_int(f"g{s}", v) for s, v in enumerate(params["g"])]
        if len(gs) != 4:
            raise BadParams("BCn_Inozemtsev needs four g parameters")
        omega_s = _half_periods(lat)
        for i in range(n):
            for j in range(i + 1, n):
                for sgn in (-1.0, 1.0):
                    grad = [0.0] * n
                    grad[i], grad[j] = 1.0, sgn
                    terms.append(PotentialTerm(AffineForm(grad), m))
        for i in range(n):
            for s in HALF_PERIOD_INDEX:
                if gs[s] >= 1:
                    terms.append(PotentialTerm(AffineForm(ev(i, n), omega_s[s]), gs[s]))
        return PotentialSpec(n, tuple(terms), lat)

    if key == "A_n_1":
        n = _require_int("n", params["n"])
        m = _require_int("m", params["m"])
        dim = n + 1
        sm = cmath.sqrt(m)
        for i in range(n):
            for j in range(i + 1, n):
                grad = [0.0] * dim
                grad[i], grad[j] = 1.0, -1.0
                terms.append(PotentialTerm(AffineForm(grad), _angle(m)))
        for i in range(n):
            grad = [0.0 + 0j] * dim
            grad[i], grad[n] = 1.0, -sm
            terms.append(PotentialTerm(AffineForm(grad), 1))
        return PotentialSpec(dim, tuple(terms), lat)

    if key == "C_n_1":
        n = _require_int("n", params["n"])
        m = _require_int("m", params["m"])
        l = _require_int("l", params["l"])
        k = (2 * m + 1) / (2 * l + 1)
        if n >= 2 and not float(k).is_integer():
            raise BadParams("C_n_1 with n >= 2 needs integer k = (2m+1)/(2l+1)")
        dim = n + 1
        sk = cmath.sqrt(k)
        for i in range(n):
            for j in range(i + 1, n):
                for sgn in (-1.0, 1.0):
                    grad = [0.0] * dim
                    grad[i], grad[j] = 1.0, sgn
                    terms.append(PotentialTerm(AffineForm(grad), _angle(int(k))))
        for i in range(n):
            if _angle(m) >= 1:
                grad = [0.0] * dim
                grad[i] = 2.0
                terms.append(PotentialTerm(AffineForm(grad), _angle(m)))
        for i in range(n):
            for sgn in (-1, 1):
                grad = [0.0 + 0j] * dim
                grad[i], grad[n] = 1.0, sgn * sk
                terms.append(PotentialTerm(AffineForm(grad), 1))
        if _angle(l) >= 1:
            grad = [0.0 + 0j] * dim
            grad[n] = 2.0 * sk
            terms.append(PotentialTerm(AffineForm(grad), _angle(l)))
        return PotentialSpec(dim, tuple(terms), lat)

    if key == "BC_n_deformed":
        n = _require_int("n", params["n"])
        ms = [_require_int(f"m{s}", v) for s, v in enumerate(params["m_s"])]
        ls = [_require_int(f"l{s}", v) for s, v in enumerate(params["l_s"])]
        if len(ms) != 4 or len(ls) != 4:
            raise BadParams("BC_n_deformed needs four m_s and four l_s")
        ks = {(2 * ms[s] + 1) / (2 * ls[s] + 1) for s in HALF_PERIOD_INDEX}
        if len(ks) != 1:
            raise BadParams("k = (2 m_s + 1)/(2 l_s + 1) must agree for all s")
        k = ks.pop()
        if n >= 2 and not float(k).is_integer():
            raise BadParams("BC_n_deformed with n >= 2 needs integer k")
        dim = n + 1
        sk = cmath.sqrt(k)
        omega_s = _half_periods(lat)
        for i in range(n):
            for j in range(i + 1, n):
                for sgn in (-1.0, 1.0):
                    grad = [0.0] * dim
                    grad[i], grad[j] = 1.0, sgn
                    terms.append(PotentialTerm(AffineForm(grad), _angle(int(k))))
        for i in range(n):
            for s in HALF_PERIOD_INDEX:
                if _angle(ms[s]) >= 1:
                    terms.append(PotentialTerm(AffineForm(ev(i, dim), omega_s[s]), _angle(ms[s])))
        for i in range(n):
            for sgn in (-1, 1):
                grad = [0.0 + 0j] * dim
                grad[i], grad[n] = 1.0, sgn * sk
                terms.append(PotentialTerm(AffineForm(grad), 1))
        for s in HALF_PERIOD_INDEX:
            if _angle(ls[s]) >= 1:
                grad = [0.0 + 0j] * dim
                grad[n] = sk
                terms.append(PotentialTerm(AffineForm(grad, omega_s[s]), _angle(ls[s])))
        return PotentialSpec(dim, tuple(terms), lat)

    if key == "Hietarinta":
        a = [complex(v) for v in params["a"]]
        if len(a) != 3:
            raise BadParams("Hietarinta needs three parameters a1, a2, a3")
        if abs(a[0] ** 2 + a[1] ** 2 + a[2] ** 2) > 1e-10:
            raise BadParams("Hietarinta needs a1^2 + a2^2 + a3^2 = 0")
        for (i, j) in ((0, 1), (1, 2), (0, 2)):
            grad = [0j, 0j, 0j]
            grad[i], grad[j] = a[i], -a[j]
            terms.append(PotentialTerm(AffineForm(grad), 1))
        return PotentialSpec(3, tuple(terms), lat)

    if key == "A_n_2":
        n = _require_int("n", params["n"])
        m = _require_int("m", params["m"])
        dim = n + 2
        sm, sneg = cmath.sqrt(m), cmath.sqrt(-1 - m)
        for i in range(n):
            for j in range(i + 1, n):
                grad = [0.0] * dim
                grad[i], grad[j] = 1.0, -1.0
                terms.append(PotentialTerm(AffineForm(grad), m))
        for i in range(n):
            grad = [0.0 + 0j] * dim
            grad[i], grad[n] = 1.0, -sm
            terms.append(PotentialTerm(AffineForm(grad), 1))
        for i in range(n):
            grad = [0.0 + 0j] * dim
            grad[i], grad[n + 1] = 1.0, -sneg
            terms.append(PotentialTerm(AffineForm(grad), 1))
        grad = [0.0 + 0j] * dim
        grad[n], grad[n + 1] = sm, -sneg
        terms.append(PotentialTerm(AffineForm(grad), 1))
        return PotentialSpec(dim, tuple(terms), lat)

    raise BadParams(f"unknown builtin '{name}'; known: {', '.join(BUILTIN_NAMES)}")


# -- one-dimensional pole locus -------------------------------------------

def locus_residual(poles, mults, lat: LatticeParam) -> np.ndarray:
    """Residual vector of the pole-configuration system.

    Row (i, s): sum over j != i of m_j(m_j+1) p^{(2s-1)}(x_i - x_j),
    for s = 1..m_i.  Supports m_i <= 2 (higher odd derivatives of p exceed
    the zeta-derivative order available).
    """
    poles = [complex(p) for p in poles]
    mults = list(mults)
    if any(m > 2 for m in mults):
        raise ValidationError("locus_residual supports multiplicities up to 2")
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            if lattice_distance(poles[i] - poles[j], lat.tau) < 1e-8:
                raise CoincidentPoles(f"poles {i} and {j} coincide mod lattice")
    rows = []
    for i, (xi, mi) in enumerate(zip(poles, mults)):
        for s in range(1, mi + 1):
            acc = 0j
            for j, (xj, mj) in enumerate(zip(poles, mults)):
                if j == i:
                    continue
                if s == 1:
                    acc += mj * (mj + 1) * wp(xi - xj, lat, order=1)
                else:
                    acc += mj * (mj + 1) * (-zlog(xi - xj, lat, order=4))  # p''' = -zeta''''
            rows.append(acc)
    return np.asarray(rows, dtype=complex)


def locus_solve(initial_poles, mults, lat: LatticeParam,
                tol: float = 1e-11, max_iter: int = 50):
    """Damped Gauss-Newton on locus_residual with the first pole pinned at 0."""
    poles = [complex(p) for p in initial_poles]
    mults = list(mults)
    if len(poles) <= 1:
        return list(poles)
    poles = [p - poles[0] for p in poles]

    def resid(free):
        return locus_residual([0j] + list(free), mults, lat)

    free = np.asarray(poles[1:], dtype=complex)
    r = resid(free)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return [0j] + [complex(v) for v in free]
        h = 1e-6
        jac = np.empty((len(r), len(free)), dtype=complex)
        for j in range(len(free)):
            e = np.zeros(len(free), dtype=complex)
            e[j] = h
            jac[:, j] = (resid(free + e) - resid(free - e)) / (2 * h)
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        lam = 1.0
        for _ in range(8):
            cand = free - lam * step
            try:
                r_new = resid(cand)
            except (CoincidentPoles, NearPole):
                lam *= 0.5
                continue
            if np.max(np.abs(r_new)) < np.max(np.abs(r)):
                free, r = cand, r_new
                break
            lam *= 0.5
        else:
            break
    if np.max(np.abs(r)) <= tol:
        return [0j] + [complex(v) for v in free]
    raise NoConvergence(f"locus Newton stalled at residual {np.max(np.abs(r)):.3g}")

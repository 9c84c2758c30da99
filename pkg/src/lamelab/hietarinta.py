"""Three-body deformed operator pair: the continuous second-order operator
with anisotropic kinetic term -sum a_i^2 d_i^2 and its exact one-step
discretization.  Both act on functions of the coordinate differences; Bloch
solutions come from a 3-term theta ansatz whose coefficients and
quasimomenta are fixed by small linear systems plus pole-cancellation
conditions on three reflection planes.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .elliptic import LatticeParam, lattice_distance, theta, wp, zlog
from .errors import (DegenerateKernel, Incompatible, IncompatibleQscon,
                     NearPole, NotConstant, NotEigen, ResonantOmega,
                     ValidationError)
from .thetaforms import ThetaRatio, ThetaSum, ThetaTerm, odd_theta_factor

__all__ = [
    "HietParams",
    "HietBlochPoint",
    "CUBE_ROOT_ASQ",
    "build_phi_h",
    "solve_coeffs_cont",
    "compute_Fi_and_k_cont",
    "build_psi_cont",
    "eigen_check_cont",
    "build_D_q",
    "solve_point_q",
    "eigen_check_q",
    "restriction_plane_map",
]

_J3 = cmath.exp(2j * math.pi / 3)
CUBE_ROOT_ASQ = (1.0 + 0j, _J3, _J3 * _J3)

# difference gradients for (x12, x23, x31)
_DIFF_GRADS = ((1, -1, 0), (0, 1, -1), (-1, 0, 1))

# The 3-term products with offsets summing to a lattice point are linearly
# dependent (they span only 2 of the 3 dimensions), so representatives for
# the basis are drifted off the b-normalization sum(b)=0 by a common 1/6;
# every relation used here depends on the b-differences only, which the
# drift leaves untouched.
_BASIS_DRIFT = 1.0 / 6.0


@dataclass(frozen=True)
class HietParams:
    """Squared anisotropy parameters (a1^2, a2^2, a3^2), summing to zero."""

    a_sq: tuple[complex, complex, complex]
    lat: LatticeParam
    omega: complex = 0.0

    def __post_init__(self):
        asq = tuple(complex(v) for v in self.a_sq)
        object.__setattr__(self, "a_sq", asq)
        object.__setattr__(self, "omega", complex(self.omega))
        if abs(sum(asq)) > 1e-14 * max(1.0, max(abs(v) for v in asq)):
            raise ValidationError("a1^2 + a2^2 + a3^2 must vanish")
        if min(abs(v) for v in asq) < 1e-12:
            raise ValidationError("all a_i^2 must be nonzero")
        if min(abs(asq[i] - asq[j]) for i in range(3) for j in range(i + 1, 3)) < 1e-10:
            raise ValidationError("a_i^2 must be pairwise distinct")


@dataclass(frozen=True)
class HietBlochPoint:
    b: tuple[complex, complex, complex]       # (b12, b23, b31), summing to zero
    c: tuple[complex, complex, complex]       # ansatz coefficients, up to scale
    k: tuple[complex, complex, complex]
    t: complex
    params: HietParams


def _check_b(b):
    b = tuple(complex(v) for v in b)
    if abs(sum(b)) > 1e-12:
        raise ValidationError("b12 + b23 + b31 must vanish")
    return b


def build_phi_h(b, c, lat: LatticeParam) -> ThetaSum:
    """sum_l c_l theta(x12+B12+l tau/3) theta(x23+B23+l tau/3) theta(x31+B31+l tau/3)
    with B_ij = b_ij + 1/6 (the drifted representatives spanning all 3 dims)."""
    b = _check_b(b)
    tau3 = lat.tau / 3
    terms = []
    for l, cl in enumerate(c):
        if cl == 0:
            continue
        terms.append(ThetaTerm(cl, (0, 0, 0), tuple(
            odd_theta_factor(g, bv + _BASIS_DRIFT + l * tau3) for g, bv in zip(_DIFF_GRADS, b))))
    return ThetaSum(3, tuple(terms), lat)


def _tilde_weights(b, lat):
    """T_l = theta(B12 + l tau/3) theta(B23 + l tau/3) theta(B31 + l tau/3)."""
    tau3 = lat.tau / 3
    bb = [v + _BASIS_DRIFT for v in b]
    return [theta(bb[0] + l * tau3, lat) * theta(bb[1] + l * tau3, lat) * theta(bb[2] + l * tau3, lat)
            for l in range(3)]


def _kernel_vector(mat: np.ndarray) -> np.ndarray:
    """Kernel direction of a 2x3 system via SVD; rejects a 2-dimensional
    kernel (second singular value at the numerical noise floor)."""
    _, sv, vh = np.linalg.svd(mat)
    noise = max(sv[0], 1.0) * 1e-15
    if sv[1] < 1e3 * noise:
        raise DegenerateKernel(f"kernel dimension > 1 (singular values {sv})")
    return vh[-1].conj()


def solve_coeffs_cont(b, params: HietParams) -> tuple[complex, complex, complex]:
    """Coefficients killing the value of Phi at the origin and the stray pole
    of the reflection-plane constants."""
    b = _check_b(b)
    lat = params.lat
    asq = params.a_sq
    tau3 = lat.tau / 3
    tw = _tilde_weights(b, lat)
    bb = [v + _BASIS_DRIFT for v in b]
    row0 = np.ones(3, dtype=complex)
    row1 = np.array([asq[0] * zlog(bb[1] + l * tau3, lat)
                     + asq[1] * zlog(bb[2] + l * tau3, lat)
                     + asq[2] * zlog(bb[0] + l * tau3, lat) for l in range(3)])
    ker = _kernel_vector(np.vstack([row0, row1]))
    c = ker / np.asarray(tw)
    c /= c[np.argmax(np.abs(c))]
    return tuple(complex(v) for v in c)


def _plane_point(i: int, z: complex):
    """A point with x_{i-1} = x_{i+1} and x_i - x_{i +- 1} = z (indices mod 3)."""
    x = [0j, 0j, 0j]
    x[i % 3] = z
    return tuple(x)


def compute_Fi_and_k_cont(b, c, params: HietParams, t: complex = 0.0,
                          n_samples: int = 5, const_tol: float = 1e-9,
                          sum_tol: float = 1e-10):
    """Reflection-plane constants and the quasimomentum family.

    Each F_i is sampled along its plane and must be constant (which also
    certifies that both poles cancelled); the three constants must sum to
    zero, after which the rank-2 linear system determines k up to the free
    direction (a1^-2, a2^-2, a3^-2) parametrized by t.
    """
    lat = params.lat
    asq = params.a_sq
    phi = build_phi_h(b, c, lat)
    dphi = [phi.diff(tuple(1.0 if j == i else 0.0 for j in range(3))) for i in range(3)]

    zs = [0.23 + 0.11j, -0.37 + 0.05j, 0.51 - 0.08j, 0.13 + 0.29j, -0.19 - 0.17j]
    fvals = []
    for i in (1, 2, 3):
        im, ip = (i - 2) % 3, i % 3  # zero-based indices of i-1, i+1
        vals = []
        for z in zs[:n_samples]:
            x = _plane_point(i - 1, z)
            pv = phi.eval(x)
            zl = zlog(-z, lat)
            vals.append((asq[im] * dphi[im].eval(x) - asq[ip] * dphi[ip].eval(x)) / pv
                        - asq[im] * zl + asq[ip] * zl)
        vals = np.asarray(vals)
        mean = vals.mean()
        spread = float(np.std(vals)) / max(abs(mean), 1e-12)
        if spread > const_tol:
            raise NotConstant(f"F_{i} varies along its plane (spread {spread:.3g})")
        fvals.append(complex(mean))

    scale = max(max(abs(v) for v in fvals), 1.0)
    if abs(sum(fvals)) > sum_tol * scale:
        raise Incompatible(f"F_1+F_2+F_3 = {sum(fvals):.3g} does not vanish")
    f1, f2, f3 = fvals
    y = np.array([0.0, -f3, f2], dtype=complex) + t
    k = tuple(complex(yv / av) for yv, av in zip(y, asq))
    return (f1, f2, f3), k


def hiet_delta(lat: LatticeParam) -> ThetaSum:
    return ThetaSum(3, (ThetaTerm(1.0, (0, 0, 0), tuple(
        odd_theta_factor(g, 0.0) for g in _DIFF_GRADS)),), lat)


def build_psi_cont(pt: HietBlochPoint) -> ThetaRatio:
    """psi = e^{<k,x>} Phi / [theta(x12) theta(x23) theta(x31)]."""
    lat = pt.params.lat
    phi = build_phi_h(pt.b, pt.c, lat)
    num = ThetaSum(3, tuple(ThetaTerm(tm.coeff, pt.k, tm.factors) for tm in phi.terms), lat)
    return ThetaRatio(num, hiet_delta(lat))


def solve_point_cont(b, params: HietParams, t: complex = 0.0) -> HietBlochPoint:
    c = solve_coeffs_cont(b, params)
    _, k = compute_Fi_and_k_cont(b, c, params, t)
    return HietBlochPoint(_check_b(b), c, k, complex(t), params)


def _potential_h(params: HietParams, x) -> complex:
    asq = params.a_sq
    lat = params.lat
    u = 0j
    pairs = ((0, 1), (1, 2), (2, 0))
    for (i, j), g in zip(pairs, _DIFF_GRADS):
        z = sum(gv * xv for gv, xv in zip(g, x))
        if lattice_distance(z, lat.tau) < 1e-6:
            raise NearPole("difference coordinate on a singular line")
        u += 2 * (asq[i] + asq[j]) * wp(z, lat)
    return u


def _hiet_sample_points(lat, n, seed=0x5EED, margin=0.05, offsets=(0.0,)):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        x = tuple(complex(rng.uniform(0.05, 0.95), rng.uniform(-0.2, 0.2)) for _ in range(3))
        diffs = [sum(g * xv for g, xv in zip(grad, x)) for grad in _DIFF_GRADS]
        if all(lattice_distance(d + off, lat.tau) >= margin for d in diffs for off in offsets):
            pts.append(x)
    return pts


def eigen_check_cont(pt: HietBlochPoint, n_points: int = 20, fail_tol: float = 1e-6):
    """(E, residual) of psi under -sum a_i^2 d_i^2 + u, evaluated exactly."""
    params = pt.params
    lat = params.lat
    psi = build_psi_cont(pt)
    num, den = psi.num, psi.den
    dirs = [tuple(1.0 if j == i else 0.0 for j in range(3)) for i in range(3)]
    dn = [num.diff(d) for d in dirs]
    d2n = [g.diff(d) for g, d in zip(dn, dirs)]
    dd = [den.diff(d) for d in dirs]
    d2d = [g.diff(d) for g, d in zip(dd, dirs)]

    def l_psi(x):
        dv = den.eval(x)
        if abs(dv) < 1e-12 * (den.abs_scale(x) + 1e-300):
            raise NearPole(f"denominator vanishes near {x}")
        pv = num.eval(x) / dv
        acc = 0j
        for a2v, dni, d2ni, ddi, d2di in zip(params.a_sq, dn, d2n, dd, d2d):
            dpsi = (dni.eval(x) - pv * ddi.eval(x)) / dv
            acc -= a2v * (d2ni.eval(x) - 2 * dpsi * ddi.eval(x) - pv * d2di.eval(x)) / dv
        return acc + _potential_h(params, x) * pv

    x0 = (0.217 + 0.041j, 0.523 - 0.037j, -0.148 + 0.022j)
    e = l_psi(x0) / psi.eval(x0)
    worst = 0.0
    for x in _hiet_sample_points(lat, n_points):
        pv = psi.eval(x)
        denom = max(abs(e * pv), 1e-30)
        worst = max(worst, abs(l_psi(x) - e * pv) / denom)
    if worst > fail_tol:
        raise NotEigen(f"eigen residual {worst:.3g} exceeds {fail_tol}")
    return e, worst


# -- discrete version --------------------------------------------------------

def build_D_q(params: HietParams, omega: complex):
    """Three-term shift operator; term i moves x_i by omega * a_i^2."""
    lat = params.lat
    omega = complex(omega)
    asq = params.a_sq
    for a2v in asq:
        if lattice_distance(omega * a2v, lat.tau) < 1e-3:
            raise ResonantOmega("omega a_i^2 too close to the period lattice")
    th_w = theta(omega, lat)
    terms = []
    for i in range(3):
        im, ip = (i - 1) % 3, (i + 1) % 3
        g_prev = tuple(-g for g in _DIFF_GRADS[im])    # x_{i-1,i} = -(x_{i,i-1}) etc.
        # x_{i-1,i} and x_{i,i+1} as gradients
        g1 = tuple({im: 1.0, i: -1.0}.get(j, 0.0) for j in range(3))
        g2 = tuple({i: 1.0, ip: -1.0}.get(j, 0.0) for j in range(3))
        num = ThetaSum(3, (ThetaTerm(th_w / theta(omega * asq[i], lat), (0, 0, 0), (
            odd_theta_factor(g1, omega * asq[i]),
            odd_theta_factor(g2, -omega * asq[i]))),), lat)
        den = ThetaSum(3, (ThetaTerm(1.0, (0, 0, 0), (
            odd_theta_factor(g1, 0.0), odd_theta_factor(g2, 0.0))),), lat)
        shift = tuple(omega * asq[i] if j == i else 0.0 for j in range(3))
        terms.append((ThetaRatio(num, den), shift))
    return terms


def apply_D(terms, f, x) -> complex:
    x = tuple(map(complex, x))
    total = 0j
    for coeff, shift in terms:
        total += coeff.eval(x) * f.eval(tuple(xv + sv for xv, sv in zip(x, shift)))
    return total


def _phi_at(phi: ThetaSum, x):
    return phi.eval(x)


def solve_point_q(b, params: HietParams, omega: complex, t: complex = 0.0,
                  compat_tol: float = 1e-10) -> HietBlochPoint:
    """Coefficients from the two-point vanishing kernel, quasimomenta from the
    three exponential relations (free parameter t/omega along a^-2, principal
    branch), with the telescoping compatibility product checked."""
    b = _check_b(b)
    lat = params.lat
    omega = complex(omega)
    asq = params.a_sq
    tau3 = lat.tau / 3

    bb = [v + _BASIS_DRIFT for v in b]

    def row(x):
        return [theta(x[0] - x[1] + bb[0] + l * tau3, lat)
                * theta(x[1] - x[2] + bb[1] + l * tau3, lat)
                * theta(x[2] - x[0] + bb[2] + l * tau3, lat) for l in range(3)]

    p1 = (omega * asq[0], 0.0, -omega * asq[1])
    p2 = (-omega * asq[1], 0.0, omega * asq[2])
    mat = np.array([row(p1), row(p2)], dtype=complex)
    c = _kernel_vector(mat)
    c = c / c[np.argmax(np.abs(c))]
    phi = build_phi_h(b, tuple(c), lat)

    e1 = tuple(1.0 if j == 0 else 0.0 for j in range(3))
    pts = {
        "x1": (omega * asq[0], 0.0, 0.0),
        "x2": (0.0, omega * asq[1], 0.0),
        "x3": (0.0, 0.0, omega * asq[2]),
    }
    ph = {k: phi.eval(v) for k, v in pts.items()}
    rhs1 = theta(omega * asq[2], lat) / theta(omega * asq[0], lat) * ph["x3"] / ph["x1"]
    rhs2 = theta(omega * asq[0], lat) / theta(omega * asq[1], lat) * ph["x1"] / ph["x2"]
    rhs3 = theta(omega * asq[1], lat) / theta(omega * asq[2], lat) * ph["x2"] / ph["x3"]
    prod = rhs1 * rhs2 * rhs3
    if abs(prod - 1.0) > compat_tol:
        raise IncompatibleQscon(f"product of exponential relations is {prod}")
    # y_i = omega a_i^2 k_i; y1 - y3 = log rhs1, y2 - y1 = log rhs2
    y1 = 0j + t
    y3 = y1 - cmath.log(rhs1)
    y2 = y1 + cmath.log(rhs2)
    k = tuple(complex(y / (omega * a2v)) for y, a2v in zip((y1, y2, y3), asq))
    return HietBlochPoint(b, tuple(complex(v) for v in c), k, complex(t), params)


def build_varphi_q(pt: HietBlochPoint) -> ThetaSum:
    lat = pt.params.lat
    phi = build_phi_h(pt.b, pt.c, lat)
    return ThetaSum(3, tuple(ThetaTerm(tm.coeff, pt.k, tm.factors) for tm in phi.terms), lat)


def vanishing_residuals_q(pt: HietBlochPoint, omega: complex, n_samples: int = 5):
    """Max normalized residual of the three shifted-plane identities."""
    params = pt.params
    lat = params.lat
    asq = params.a_sq
    varphi = build_varphi_q(pt)
    zs = [0.29 + 0.07j, -0.41 + 0.13j, 0.57 - 0.11j, 0.19 + 0.31j, -0.23 - 0.09j]
    out = []
    for i in (1, 2, 3):
        im, ip = (i - 2) % 3, i % 3
        worst = 0.0
        for z in zs[:n_samples]:
            x = list(_plane_point(i - 1, z))
            sh_m = list(x)
            sh_m[im] += omega * asq[im]
            sh_p = list(x)
            sh_p[ip] += omega * asq[ip]
            t1 = theta(x[i - 1] - x[im] + omega * asq[im], lat) * varphi.eval(tuple(sh_m))
            t2 = theta(x[i - 1] - x[ip] + omega * asq[ip], lat) * varphi.eval(tuple(sh_p))
            scale = max(abs(t1), abs(t2), 1e-30)
            worst = max(worst, abs(t1 - t2) / scale)
        out.append(worst)
    return tuple(out)


def more_conditions_residual(pt: HietBlochPoint, omega: complex) -> float:
    """The four extra vanishing points implied by difference-only dependence."""
    params = pt.params
    asq = params.a_sq
    phi = build_phi_h(pt.b, pt.c, params.lat)
    w = omega
    pts = [(0.0, w * asq[1], -w * asq[0]),
           (0.0, -w * asq[0], w * asq[2]),
           (-w * asq[2], w * asq[1], 0.0),
           (w * asq[0], -w * asq[2], 0.0)]
    scale = abs(phi.eval((0.31, 0.12, -0.27))) + 1e-30
    return max(abs(phi.eval(x)) for x in pts) / scale


def eigen_check_q(pt: HietBlochPoint, omega: complex, n_points: int = 20,
                  fail_tol: float = 1e-8):
    """(E, residual) for the discrete operator; pure evaluation."""
    params = pt.params
    lat = params.lat
    terms = build_D_q(params, omega)
    varphi = build_varphi_q(pt)
    x0 = (0.219 + 0.023j, 0.507 - 0.049j, -0.133 + 0.04j)
    e = apply_D(terms, varphi, x0) / varphi.eval(x0)
    offs = []
    for a2v in params.a_sq:
        offs.extend([omega * a2v, -omega * a2v])
    worst = 0.0
    for x in _hiet_sample_points(lat, n_points, offsets=tuple(offs) + (0.0,)):
        pv = varphi.eval(x)
        denom = max((1 + abs(e)) * abs(pv), 1e-30)
        worst = max(worst, abs(apply_D(terms, varphi, x) - e * pv) / denom)
    if worst > fail_tol:
        raise NotEigen(f"discrete eigen residual {worst:.3g} exceeds {fail_tol}")
    return e, worst


def restriction_plane_map(params: HietParams):
    """Documented coordinate section of the plane sum a_i^-1 x_i = 0.

    Returns a 3x2 matrix M with columns spanning the plane, so x = M @ (u, v)
    embeds two-dimensional coordinates into the three-body picture.
    """
    ainv = np.array([1.0 / cmath.sqrt(v) for v in params.a_sq])
    basis = []
    for seed in (np.array([1.0, -1.0, 0.0]), np.array([0.0, 1.0, -1.0])):
        v = seed - ainv * (seed @ ainv) / (ainv @ ainv)
        basis.append(v)
    return np.column_stack(basis)

"""Square-integrable eigenstates of the continuous B2 operator.

Quantize the quasimomenta to k = (i pi m, i pi n) with m, n integers of equal
parity, solve the covering-variety equations for the theta-shifts (a1, a2)
by damped Newton (multistart grid over the fundamental parallelogram, with a
continuation-in-tau warm start), then Weyl-symmetrize the Bloch solution.
Admissible labels n-4 >= m >= 2 give nonzero states with second-order zeros
on the reflection lines; other labels symmetrize to zero.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import b2cm
from .elliptic import LatticeParam, lattice_distance, theta, zlog
from .errors import NoConvergence, ValidationError
from .polysys import biv_scale_estimate

__all__ = [
    "SpectrumLabel",
    "quantize_solve",
    "quantize_solve_all",
    "symmetrize",
    "symmetrized_pair",
    "regularity_check",
    "RegularityReport",
    "admissible_labels_from_weights",
]

I_PI = 1j * math.pi

# half the sum of (mult+1)*root over the positive roots, in the chamber
# 0 <= m <= n used for dominant labels
_RHO = (1, 3)


@dataclass(frozen=True)
class SpectrumLabel:
    m: int
    n: int

    def __post_init__(self):
        if (self.m - self.n) % 2 != 0:
            raise ValidationError("label (m, n) needs m and n of equal parity")

    @property
    def admissible(self) -> bool:
        return self.n - 4 >= self.m >= 2

    @property
    def k(self) -> tuple[complex, complex]:
        return (I_PI * self.m, I_PI * self.n)


def admissible_labels_from_weights(max_n: int) -> set[tuple[int, int]]:
    """Labels with (m, n)/2 = lambda + rho for a dominant weight lambda.

    Dominance in the chamber 0 <= x1 <= x2: 2*lambda1 and lambda2 - lambda1
    nonnegative integers.  Pure integer arithmetic; used to cross-check the
    admissibility inequality.
    """
    out = set()
    for m in range(0, max_n + 1):
        for n in range(0, max_n + 1):
            if (m - n) % 2:
                continue
            two_l1 = m - 2 * _RHO[0]
            l2_minus_l1 = (n - m) // 2 - (_RHO[1] - _RHO[0])
            if two_l1 >= 0 and l2_minus_l1 >= 0:
                out.add((m, n))
    return out


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("LAMELAB_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    w = _workers()
    if w <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))


def _residual_fn(label: SpectrumLabel, lat: LatticeParam):
    km, kn = label.k

    def f(a):
        a1, a2 = a
        if min(lattice_distance(a1, lat.tau), lattice_distance(a2, lat.tau)) < 1e-8:
            raise ValueError("theta-shift on the lattice")
        p1 = km + zlog(a1, lat)
        p2 = kn + zlog(a2, lat)
        r1, r2 = b2cm.variety_residual(a1, a2, p1, p2, lat)
        e1, e2 = b2cm.variety_polys(a1, a2, lat)
        scale = max(biv_scale_estimate(e1, p1, p2), biv_scale_estimate(e2, p1, p2), 1.0)
        return r1, r2, scale

    return f


def _newton(f, a0, tol=1e-11, max_iter=50, damping=0.5):
    a = np.asarray(a0, dtype=complex)
    try:
        r1, r2, scale = f(a)
    except (ValueError, Exception):
        return a, math.inf, False
    res = max(abs(r1), abs(r2)) / scale
    h = 1e-6
    for _ in range(max_iter):
        if res <= tol:
            return a, res, True
        jac = np.empty((2, 2), dtype=complex)
        try:
            for j in range(2):
                e = np.zeros(2, dtype=complex)
                e[j] = h
                rp = f(a + e)
                rm = f(a - e)
                jac[:, j] = [(rp[0] - rm[0]) / (2 * h), (rp[1] - rm[1]) / (2 * h)]
            step = np.linalg.solve(jac, np.array([r1, r2]))
        except Exception:
            return a, res, False
        lam = 1.0
        improved = False
        for _ in range(10):
            cand = a - lam * step
            try:
                c1, c2, cs = f(cand)
            except Exception:
                lam *= damping
                continue
            cres = max(abs(c1), abs(c2)) / cs
            if cres < res:
                a, r1, r2, scale, res = cand, c1, c2, cs, cres
                improved = True
                break
            lam *= damping
        if not improved:
            return a, res, res <= tol
    return a, res, res <= tol


def _reduce_mod_one(a: complex, tau: complex) -> complex:
    v = a.imag / tau.imag
    u = a.real - v * tau.real
    u = (u + 0.5) % 1.0 - 0.5
    return u + v * tau


def _in_parallelogram(a: complex, tau: complex) -> bool:
    v = a.imag / tau.imag
    return -0.5 - 1e-9 <= v < 0.5 + 1e-9


def _grid_starts(lat: LatticeParam):
    us = (-1 / 3, 0.013, 1 / 3)
    vs = (-0.375, -0.125, 0.125, 0.375)
    pts = [u + v * lat.tau for u in us for v in vs]
    return [(x1, x2) for x1 in pts for x2 in pts
            if abs(x1 - x2) > 1e-3 and abs(x1 + x2) > 1e-3]


def quantize_solve_all(label: SpectrumLabel, lat: LatticeParam, initial_a=None,
                       tol: float = 1e-11, use_continuation: bool = True):
    """All in-parallelogram solutions (a1, a2) found for the quantized label.

    Tries tau-continuation from Im(tau)+2 down in 4 steps first (cheap when
    it works), then a 12x12 multistart grid.  Results are deduplicated after
    reduction mod 1.
    """
    if abs(lat.tau.real) > 1e-12:
        raise ValidationError("quantization assumes pure imaginary tau")
    f = _residual_fn(label, lat)

    found = []

    def record(a, res, ok):
        if not ok:
            return
        a1 = _reduce_mod_one(complex(a[0]), lat.tau)
        a2 = _reduce_mod_one(complex(a[1]), lat.tau)
        if not (_in_parallelogram(a1, lat.tau) and _in_parallelogram(a2, lat.tau)):
            return
        for b1, b2, _ in found:
            if abs(a1 - b1) < 1e-8 and abs(a2 - b2) < 1e-8:
                return
        found.append((a1, a2, res))

    if initial_a is not None:
        a, res, ok = _newton(f, initial_a, tol=tol)
        record(a, res, ok)
        if found:
            return found

    if use_continuation:
        tau_far = lat.tau + 2j
        lat_far = LatticeParam(tau_far, lat.series_tol, lat.max_terms)
        far = quantize_solve_all(label, lat_far, tol=tol, use_continuation=False)
        for a1, a2, _ in far:
            a = (a1, a2)
            good = True
            for step in range(1, 5):
                tau_s = lat.tau + 2j * (1 - step / 4)
                lat_s = LatticeParam(tau_s, lat.series_tol, lat.max_terms)
                a_new, res, ok = _newton(_residual_fn(label, lat_s), a, tol=tol)
                if not ok:
                    good = False
                    break
                a = (complex(a_new[0]), complex(a_new[1]))
            if good:
                a_fin, res, ok = _newton(f, a, tol=tol)
                record(a_fin, res, ok)
        if found:
            return found

    results = _pmap(lambda s: _newton(f, s, tol=tol), _grid_starts(lat))
    for a, res, ok in results:
        record(a, res, ok)
    return found


def quantize_solve(label: SpectrumLabel, lat: LatticeParam, initial_a=None,
                   tol: float = 1e-11):
    """First solution of quantize_solve_all, as a BlochPointB2."""
    found = quantize_solve_all(label, lat, initial_a=initial_a, tol=tol)
    if not found:
        raise NoConvergence(f"no (a1, a2) found for label ({label.m}, {label.n})")
    a1, a2, res = found[0]
    km, kn = label.k
    return b2cm.BlochPointB2(a1, a2, km, kn, lat), res


def _apply_weyl(w, x):
    return (w[0][0] * x[0] + w[0][1] * x[1], w[1][0] * x[0] + w[1][1] * x[1])


def symmetrize(pt: b2cm.BlochPointB2, alternating: bool = False):
    """Function handle for the Weyl sum of psi (plain by default).

    With alternating=True each term carries eps(w) * det(w); every reflection
    here has multiplicity 1, so eps coincides with det and the two variants
    agree identically (asserted in tests rather than assumed).
    """
    psi = b2cm.build_psi(pt)

    def handle(x):
        total = 0j
        for w, det in b2cm.WEYL_B2:
            weight = det * det if alternating else 1.0
            total += weight * psi.eval(_apply_weyl(w, x))
        return total

    return handle


def symmetrized_pair(pt: b2cm.BlochPointB2):
    """(Psi, L Psi) evaluators; the operator acts term by term on the orbit."""
    psi = b2cm.build_psi(pt)
    op = b2cm.apply_L(psi, pt.lat)

    def psi_sum(x):
        return sum(psi.eval(_apply_weyl(w, x)) for w, _ in b2cm.WEYL_B2)

    def l_psi_sum(x):
        return sum(op(_apply_weyl(w, x)) for w, _ in b2cm.WEYL_B2)

    return psi_sum, l_psi_sum


_LINE_FAMILIES = (
    ("x1", (1.0, 0.0), (0.0, 0.377)),
    ("x2", (0.0, 1.0), (0.377, 0.0)),
    ("x1+x2", (0.5, 0.5), (0.377, -0.377)),
    ("x1-x2", (0.5, -0.5), (0.377, 0.377)),
)


@dataclass
class RegularityReport:
    gamma: dict
    grid_max: float
    grid_min_abs: float
    reflection_residual: float


def regularity_check(handle, lat: LatticeParam, grid_n: int = 50) -> RegularityReport:
    """Vanishing orders along the four singular line families plus a real-grid
    finiteness scan and the reflection-invariance defect."""
    gamma = {}
    ts = np.geomspace(1e-3, 1e-2, 8)
    for name, normal, base in _LINE_FAMILIES:
        nn = math.hypot(*normal)
        vals = [abs(handle((base[0] + t * normal[0] / nn, base[1] + t * normal[1] / nn)))
                for t in ts]
        slope = np.polyfit(np.log(ts), np.log(np.maximum(vals, 1e-300)), 1)[0]
        gamma[name] = float(slope)

    grid_max, grid_min = 0.0, math.inf
    off = 0.0037
    for i in range(grid_n):
        for j in range(grid_n):
            x = ((i + 0.5) / grid_n, (j + 0.5) / grid_n + off)
            if min(abs(x[0] - round(x[0])), abs(x[1] - round(x[1])),
                   abs(x[0] + x[1] - round(x[0] + x[1])),
                   abs(x[0] - x[1] - round(x[0] - x[1]))) < 1e-3:
                continue
            v = abs(handle(x))
            if not math.isfinite(v):
                return RegularityReport(gamma, math.inf, 0.0, math.inf)
            grid_max = max(grid_max, v)
            grid_min = min(grid_min, v)

    refl = 0.0
    for x in ((0.31, 0.22), (0.17, 0.43)):
        v = handle(x)
        vr = handle((-x[0], x[1]))
        refl = max(refl, abs(v - vr) / max(abs(v), 1e-30))
    return RegularityReport(gamma, grid_max, grid_min, refl)

"""Bivariate polynomial system solving by resultant elimination.

Polynomials live in dicts {(i, j): coeff} over monomials x^i y^j.  The
pipeline: eliminate y through the Sylvester resultant (evaluated on a circle
and interpolated by FFT), take companion-matrix roots of the eliminant,
back-solve y from the lower-degree equation, then let the caller
Newton-polish on its own residual function.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "biv_eval",
    "biv_diff",
    "biv_scale_estimate",
    "biv_affine_subst",
    "eliminant_roots",
    "candidate_pairs",
    "newton2",
    "dedup_pairs",
]


def biv_eval(poly: dict, x: complex, y: complex) -> complex:
    return sum(c * x**i * y**j for (i, j), c in poly.items())


def biv_diff(poly: dict, var: int) -> dict:
    out = {}
    for (i, j), c in poly.items():
        if var == 0 and i > 0:
            out[(i - 1, j)] = out.get((i - 1, j), 0j) + i * c
        elif var == 1 and j > 0:
            out[(i, j - 1)] = out.get((i, j - 1), 0j) + j * c
    return out


def biv_scale_estimate(poly: dict, x: complex, y: complex) -> float:
    """Sum of monomial magnitudes; normalizes residuals to a relative scale."""
    return sum(abs(c) * abs(x) ** i * abs(y) ** j for (i, j), c in poly.items())


def biv_affine_subst(poly: dict, cx: complex, dx: complex, cy: complex, dy: complex) -> dict:
    """Substitute x -> cx*X + dx, y -> cy*Y + dy (recentres clustered roots)."""
    from math import comb

    out = {}
    for (i, j), c in poly.items():
        for a in range(i + 1):
            xa = comb(i, a) * cx**a * dx ** (i - a)
            for b in range(j + 1):
                w = c * xa * comb(j, b) * cy**b * dy ** (j - b)
                if w != 0:
                    out[(a, b)] = out.get((a, b), 0j) + w
    return out


def _y_coeff_polys(poly: dict) -> list[dict]:
    """Coefficients of powers of y, each a dict {i: coeff} in x."""
    degy = max(j for (_, j) in poly)
    cols = [dict() for _ in range(degy + 1)]
    for (i, j), c in poly.items():
        cols[j][i] = cols[j].get(i, 0j) + c
    return cols


def _eval_x(coeffs_in_x: dict, x: complex) -> complex:
    return sum(c * x**i for i, c in coeffs_in_x.items())


def _sylvester_det(p_cols, q_cols, x: complex) -> complex:
    m = len(p_cols) - 1
    n = len(q_cols) - 1
    size = m + n
    mat = np.zeros((size, size), dtype=complex)
    pv = [_eval_x(c, x) for c in p_cols]
    qv = [_eval_x(c, x) for c in q_cols]
    for r in range(n):
        for k, v in enumerate(reversed(pv)):
            mat[r, r + k] = v
    for r in range(m):
        for k, v in enumerate(reversed(qv)):
            mat[n + r, r + k] = v
    return np.linalg.det(mat)


def eliminant_roots(p: dict, q: dict, radius: float = 3.0, n_pts: int = 64,
                    trim_rel: float = 1e-10, center: complex = 0.0) -> np.ndarray:
    """Roots in x of Res_y(p, q), eliminating y.

    The determinant of the Sylvester matrix is sampled on a circle of the
    given radius about `center` and the coefficients of the shifted eliminant
    are recovered by FFT, so the eliminant is never formed symbolically.
    Roots come from the companion matrix of the trimmed coefficient vector
    (numpy.roots).  A nonzero center keeps the companion problem conditioned
    when the roots cluster away from the origin.
    """
    p_cols = _y_coeff_polys(p)
    q_cols = _y_coeff_polys(q)
    ang = np.exp(2j * np.pi * np.arange(n_pts) / n_pts)
    vals = np.array([_sylvester_det(p_cols, q_cols, center + radius * w) for w in ang])
    coeffs = np.fft.fft(vals) / n_pts
    coeffs = coeffs / radius ** np.arange(n_pts)
    mx = np.max(np.abs(coeffs))
    if mx == 0:
        return np.array([], dtype=complex)
    # high-order tail below the noise floor is degree inflation, not signal
    deg = n_pts - 1
    while deg > 0 and abs(coeffs[deg]) < trim_rel * mx:
        deg -= 1
    c = coeffs[: deg + 1][::-1]
    if len(c) < 2:
        return np.array([], dtype=complex)
    return np.roots(c) + center


def resultant_fn(p: dict, q: dict):
    """The resultant as an exactly evaluable function of x (no interpolation)."""
    p_cols = _y_coeff_polys(p)
    q_cols = _y_coeff_polys(q)
    return lambda x: _sylvester_det(p_cols, q_cols, x)


def refine_roots(fn, roots, steps: int = 30):
    """Secant-polish approximate roots of a scalar analytic function.

    Companion-matrix roots of an interpolated eliminant can be several digits
    off when roots cluster; the determinant itself evaluates accurately
    pointwise, so a few secant steps restore full precision for simple roots.
    """
    out = []
    for r in roots:
        x0 = complex(r)
        x1 = x0 * (1 + 1e-7) + 1e-9
        f0, f1 = fn(x0), fn(x1)
        for _ in range(steps):
            if f1 == f0:
                break
            x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
            if not np.isfinite(x2.real) or not np.isfinite(x2.imag):
                break
            x0, f0 = x1, f1
            x1, f1 = x2, fn(x2)
            if abs(x1 - x0) <= 1e-14 * (1 + abs(x1)):
                break
        out.append(x1)
    return out


def candidate_pairs(p: dict, q: dict, x_roots, q_rel_tol: float = 1e-4) -> list[tuple[complex, complex]]:
    """Back-solve y from p(x0, y)=0 at each eliminant root, screened by |q|."""
    p_cols = _y_coeff_polys(p)
    out = []
    for x0 in x_roots:
        cy = [_eval_x(c, x0) for c in p_cols][::-1]
        cy = np.asarray(cy, dtype=complex)
        if np.max(np.abs(cy)) == 0:
            continue
        lead = np.argmax(np.abs(cy) > 1e-13 * np.max(np.abs(cy)))
        cy = cy[lead:]
        if len(cy) < 2:
            continue
        for y0 in np.roots(cy):
            scale = biv_scale_estimate(q, x0, y0) + 1.0
            if abs(biv_eval(q, x0, y0)) <= q_rel_tol * scale:
                out.append((complex(x0), complex(y0)))
    return out


def newton2(f, jac, z0, tol: float = 1e-11, max_iter: int = 50):
    """Damped Newton on a 2-equation complex system.

    f(z) -> (f1, f2, scale) where scale normalizes the residual; jac(z) ->
    2x2 complex matrix.  Returns (z, relative_residual, converged).
    """
    z = np.array(z0, dtype=complex)
    f1, f2, scale = f(z)
    res = max(abs(f1), abs(f2)) / scale
    for _ in range(max_iter):
        if res <= tol:
            return z, res, True
        j = np.asarray(jac(z), dtype=complex)
        try:
            step = np.linalg.solve(j, np.array([f1, f2]))
        except np.linalg.LinAlgError:
            return z, res, False
        lam = 1.0
        for _ in range(8):
            z_new = z - lam * step
            try:
                g1, g2, s_new = f(z_new)
            except Exception:
                lam *= 0.5
                continue
            res_new = max(abs(g1), abs(g2)) / s_new
            if res_new < res:
                z, f1, f2, scale, res = z_new, g1, g2, s_new, res_new
                break
            lam *= 0.5
        else:
            return z, res, res <= tol
    return z, res, res <= tol


def dedup_pairs(pairs, tol: float = 1e-8):
    """Drop near-duplicates in C^2 (absolute tolerance on max coordinate gap)."""
    kept = []
    for z in pairs:
        if not any(max(abs(z[0] - w[0]), abs(z[1] - w[1])) < tol for w in kept):
            kept.append(z)
    return kept

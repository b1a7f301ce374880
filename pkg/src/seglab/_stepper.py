"""Inner time-stepping loops shared by the jitted and reference paths.

The chunk runner advances the two-species system by n_steps of the IMEX step:
backward-Euler diffusion (constant tridiagonal matrix, Thomas solve), explicit
reactions, and the competition coupling subtracted explicitly through a single
shared array C = dt*k*u*v (u side gets C, v side gets alpha*C). Sharing one
array is what makes the coupling contributions to the combination alpha*u - v
cancel exactly in floating point, mirroring the cancellation that defines the
limit dynamics.

The same source is compiled with numba when available; the plain-Python
version doubles as the fallback and as the oracle in tests (identical
operation order, so results agree bit for bit).
"""

from __future__ import annotations

import numpy as np


def _chunk_run_impl(u, v, fc, gc, alpha, k, dt, h, lu, rubc, lv, rvbc, n_steps):
    """Advance (u, v) by n_steps; see module docstring for the scheme.

    fc, gc are descending polynomial coefficients of the reactions. Returns the
    advanced arrays, the state one step before the end (for steady detection),
    per-chunk min/max of both species, the largest coupling cancellation defect
    (identically zero with the shared-array assembly) and a finite-values flag.
    """
    n = u.shape[0]
    r = dt / (h * h)
    b = 1.0 + 2.0 * r

    # Constant-matrix Thomas factorization: cp = modified upper coefficients,
    # inv_den = reciprocals of the forward-elimination denominators.
    cp = np.empty(n)
    inv_den = np.empty(n)
    inv_den[0] = 1.0 / b
    cp[0] = -r * inv_den[0]
    for i in range(1, n):
        inv_den[i] = 1.0 / (b + r * cp[i - 1])
        cp[i] = -r * inv_den[i]

    u = u.copy()
    v = v.copy()
    u_prev = u.copy()
    v_prev = v.copy()
    rhs_u = np.empty(n)
    rhs_v = np.empty(n)

    min_u = np.inf
    max_u = -np.inf
    min_v = np.inf
    max_v = -np.inf
    max_cancel = 0.0
    finite = True

    nf = fc.shape[0]
    ng = gc.shape[0]

    for _ in range(n_steps):
        for i in range(n):
            u_prev[i] = u[i]
            v_prev[i] = v[i]

        for i in range(n):
            ui = u[i]
            vi = v[i]
            fu = fc[0]
            for j in range(1, nf):
                fu = fu * ui + fc[j]
            gv = gc[0]
            for j in range(1, ng):
                gv = gv * vi + gc[j]
            cu = dt * (k * (ui * vi))
            cv = alpha * cu
            defect = abs(alpha * cu - cv)
            if defect > max_cancel:
                max_cancel = defect
            rhs_u[i] = ui + dt * fu - cu
            rhs_v[i] = vi + dt * gv - cv
        rhs_u[0] += r * lu
        rhs_u[n - 1] += r * rubc
        rhs_v[0] += r * lv
        rhs_v[n - 1] += r * rvbc

        # Thomas forward sweeps (reuse rhs arrays for the modified rhs).
        rhs_u[0] = rhs_u[0] * inv_den[0]
        rhs_v[0] = rhs_v[0] * inv_den[0]
        for i in range(1, n):
            rhs_u[i] = (rhs_u[i] + r * rhs_u[i - 1]) * inv_den[i]
            rhs_v[i] = (rhs_v[i] + r * rhs_v[i - 1]) * inv_den[i]
        # Back substitution.
        u[n - 1] = rhs_u[n - 1]
        v[n - 1] = rhs_v[n - 1]
        for i in range(n - 2, -1, -1):
            u[i] = rhs_u[i] - cp[i] * u[i + 1]
            v[i] = rhs_v[i] - cp[i] * v[i + 1]

        for i in range(n):
            ui = u[i]
            vi = v[i]
            if not (np.isfinite(ui) and np.isfinite(vi)):
                finite = False
            if ui < min_u:
                min_u = ui
            if ui > max_u:
                max_u = ui
            if vi < min_v:
                min_v = vi
            if vi > max_v:
                max_v = vi
        if not finite:
            break

    du2 = 0.0
    dv2 = 0.0
    for i in range(n):
        du2 += (u[i] - u_prev[i]) ** 2
        dv2 += (v[i] - v_prev[i]) ** 2
    du_l2 = np.sqrt(h * du2)
    dv_l2 = np.sqrt(h * dv2)

    return (u, v, u_prev, v_prev, min_u, max_u, min_v, max_v,
            max_cancel, du_l2, dv_l2, finite)


def _solve_heat_impl(rhs0, r, lu, rubc):
    """One backward-Euler diffusion solve: (I - r*T) x = rhs0 + boundary lift.

    T is the zero-Dirichlet second-difference matrix (in units of h^2, so
    r = dt/h^2); lu, rubc are the Dirichlet values entering the end stencils.
    """
    n = rhs0.shape[0]
    b = 1.0 + 2.0 * r
    cp = np.empty(n)
    inv_den = np.empty(n)
    inv_den[0] = 1.0 / b
    cp[0] = -r * inv_den[0]
    for i in range(1, n):
        inv_den[i] = 1.0 / (b + r * cp[i - 1])
        cp[i] = -r * inv_den[i]

    rhs = rhs0.copy()
    rhs[0] += r * lu
    rhs[n - 1] += r * rubc
    rhs[0] = rhs[0] * inv_den[0]
    for i in range(1, n):
        rhs[i] = (rhs[i] + r * rhs[i - 1]) * inv_den[i]
    x = np.empty(n)
    x[n - 1] = rhs[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = rhs[i] - cp[i] * x[i + 1]
    return x


def _poly_scalar_impl(c, x):
    """Horner evaluation of descending coefficients at a scalar."""
    acc = 0.0
    for j in range(c.shape[0]):
        acc = acc * x + c[j]
    return acc


def _h_poly_impl(w, fc, gc, alpha):
    """Combined nonlinearity alpha*f(w+/alpha) - g(-w-) for polynomial f, g."""
    if w >= 0.0:
        return alpha * _poly_scalar(fc, w / alpha)
    return -_poly_scalar(gc, -w)


def _rk4_poly_impl(w, s, dx, fc, gc, alpha):
    k1w = s
    k1s = -_h_poly(w, fc, gc, alpha)
    k2w = s + 0.5 * dx * k1s
    k2s = -_h_poly(w + 0.5 * dx * k1w, fc, gc, alpha)
    k3w = s + 0.5 * dx * k2s
    k3s = -_h_poly(w + 0.5 * dx * k2w, fc, gc, alpha)
    k4w = s + dx * k3s
    k4s = -_h_poly(w + dx * k3w, fc, gc, alpha)
    w_new = w + (dx / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    s_new = s + (dx / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    return w_new, s_new


def _orbit_impl(a, slope, n_steps, fc, gc, alpha, escape):
    """RK4 path of w'' = -h(w) from (w, w')(0) = (a, slope) across [0, 1].

    Returns (w_path, s_path) at the n_steps+1 uniform nodes; entries stay NaN
    from the first step whose value leaves [-escape, escape].
    """
    dx = 1.0 / n_steps
    w_path = np.full(n_steps + 1, np.nan)
    s_path = np.full(n_steps + 1, np.nan)
    w = a
    s = slope
    w_path[0] = w
    s_path[0] = s
    for i in range(n_steps):
        w, s = _rk4_poly(w, s, dx, fc, gc, alpha)
        if not (np.abs(w) <= escape):
            break
        w_path[i + 1] = w
        s_path[i + 1] = s
    return w_path, s_path


def _scan_endpoints_impl(a, slopes, n_steps, fc, gc, alpha, escape):
    """Endpoint values w(1) for a batch of initial slopes (NaN once escaped)."""
    out = np.empty(slopes.shape[0])
    dx = 1.0 / n_steps
    for i in range(slopes.shape[0]):
        w = a
        s = slopes[i]
        for _ in range(n_steps):
            w, s = _rk4_poly(w, s, dx, fc, gc, alpha)
            if not (np.abs(w) <= escape):
                w = np.nan
                break
        out[i] = w
    return out


chunk_run_reference = _chunk_run_impl
solve_heat_reference = _solve_heat_impl
orbit_reference = _orbit_impl
scan_endpoints_reference = _scan_endpoints_impl

try:
    from numba import njit

    _poly_scalar = njit(cache=True)(_poly_scalar_impl)
    _h_poly = njit(cache=True)(_h_poly_impl)
    _rk4_poly = njit(cache=True)(_rk4_poly_impl)
    chunk_run = njit(cache=True)(_chunk_run_impl)
    solve_heat = njit(cache=True)(_solve_heat_impl)
    orbit_run = njit(cache=True)(_orbit_impl)
    scan_endpoints = njit(cache=True)(_scan_endpoints_impl)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but degrade gracefully
    _poly_scalar = _poly_scalar_impl
    _h_poly = _h_poly_impl
    _rk4_poly = _rk4_poly_impl
    chunk_run = _chunk_run_impl
    solve_heat = _solve_heat_impl
    orbit_run = _orbit_impl
    scan_endpoints = _scan_endpoints_impl
    HAVE_NUMBA = False

"""Compiled time-stepping kernel for the fixed-bed column model.

Finite volumes on cell averages with a van-Leer-limited upwind
reconstruction for convection and central differences for diffusion; the
inlet face carries the total Danckwerts flux u*h(t), the outlet face has
zero diffusive flux.  The isotherm coupling (I + F dq/dC) dC/dt = S is
eliminated cell-by-cell with the analytic 2x2 Jacobian; a damped
fixed-point treatment of the q-rate is kept as an independent reference.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _flux_divergence(c, u, diff, dx, h_in, s):
    """Total-flux divergence of one species into s; h_in is the inlet feed."""
    n = c.shape[0]
    flux_prev = u * h_in
    for i in range(1, n):
        dcr = c[i] - c[i - 1]
        face = c[i - 1]
        if i >= 2 and dcr != 0.0:
            r = (c[i - 1] - c[i - 2]) / dcr
            if r > 0.0:
                phi = 2.0 * r / (1.0 + r)
                if phi > 2.0:
                    phi = 2.0
                face = c[i - 1] + 0.5 * phi * dcr
        flux = u * face - diff * dcr / dx
        s[i - 1] = -(flux - flux_prev) / dx
        flux_prev = flux
    flux_out = u * c[n - 1]
    s[n - 1] = -(flux_out - flux_prev) / dx


@njit(cache=True)
def _solve_coupled(c1, c2, s1, s2, p, fr, k1, k2):
    """k = (I + F dq/dC)^-1 s at every cell, with the analytic Jacobian."""
    n = c1.shape[0]
    for i in range(n):
        x1 = c1[i]
        x2 = c2[i]
        d_i = 1.0 + p[2] * x1 + p[6] * x2
        d_ii = 1.0 + p[3] * x1 + p[7] * x2
        d_i2 = d_i * d_i
        d_ii2 = d_ii * d_ii
        j11 = p[0] * (d_i - p[2] * x1) / d_i2 + p[1] * (d_ii - p[3] * x1) / d_ii2
        j12 = -(p[0] * x1 * p[6]) / d_i2 - (p[1] * x1 * p[7]) / d_ii2
        j21 = -(p[4] * x2 * p[2]) / d_i2 - (p[5] * x2 * p[3]) / d_ii2
        j22 = p[4] * (d_i - p[6] * x2) / d_i2 + p[5] * (d_ii - p[7] * x2) / d_ii2
        m11 = 1.0 + fr * j11
        m12 = fr * j12
        m21 = fr * j21
        m22 = 1.0 + fr * j22
        det = m11 * m22 - m12 * m21
        # locals first: callers may alias k with s
        v1 = (m22 * s1[i] - m12 * s2[i]) / det
        v2 = (m11 * s2[i] - m21 * s1[i]) / det
        k1[i] = v1
        k2[i] = v2


@njit(cache=True)
def _q_pair(x1, x2, p):
    d_i = 1.0 + p[2] * x1 + p[6] * x2
    d_ii = 1.0 + p[3] * x1 + p[7] * x2
    q1 = p[0] * x1 / d_i + p[1] * x1 / d_ii
    q2 = p[4] * x2 / d_i + p[5] * x2 / d_ii
    return q1, q2


@njit(cache=True)
def advance_column(c1, c2, p, fr, u, diff, dx, dt, n_steps, h1, h2, t_inj,
                   fixed_point, heun, out1, out2):
    """March n_steps; outlet concentrations land in out1/out2 (length n_steps+1).

    Returns 0 on success, 1 when the state went non-finite.
    """
    n = c1.shape[0]
    s1 = np.empty(n)
    s2 = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    t1 = np.empty(n)
    t2 = np.empty(n)
    out1[0] = c1[n - 1]
    out2[0] = c2[n - 1]
    t = 0.0
    for step in range(n_steps):
        inj1 = h1 if t < t_inj else 0.0
        inj2 = h2 if t < t_inj else 0.0
        _flux_divergence(c1, u, diff, dx, inj1, s1)
        _flux_divergence(c2, u, diff, dx, inj2, s2)
        if fixed_point:
            # damped Picard on  x + F q(x) = c + F q(c) + dt s(c)
            for i in range(n):
                q1o, q2o = _q_pair(c1[i], c2[i], p)
                b1 = c1[i] + fr * q1o + dt * s1[i]
                b2 = c2[i] + fr * q2o + dt * s2[i]
                x1 = c1[i] + dt * s1[i]
                x2 = c2[i] + dt * s2[i]
                for _ in range(50):
                    q1n, q2n = _q_pair(x1, x2, p)
                    x1 -= 0.2 * (x1 + fr * q1n - b1)
                    x2 -= 0.2 * (x2 + fr * q2n - b2)
                c1[i] = x1
                c2[i] = x2
        else:
            _solve_coupled(c1, c2, s1, s2, p, fr, k1, k2)
            if heun:
                for i in range(n):
                    t1[i] = c1[i] + dt * k1[i]
                    t2[i] = c2[i] + dt * k2[i]
                inj1b = h1 if t + dt < t_inj else 0.0
                inj2b = h2 if t + dt < t_inj else 0.0
                _flux_divergence(t1, u, diff, dx, inj1b, s1)
                _flux_divergence(t2, u, diff, dx, inj2b, s2)
                _solve_coupled(t1, t2, s1, s2, p, fr, s1, s2)
                for i in range(n):
                    c1[i] += 0.5 * dt * (k1[i] + s1[i])
                    c2[i] += 0.5 * dt * (k2[i] + s2[i])
            else:
                for i in range(n):
                    c1[i] += dt * k1[i]
                    c2[i] += dt * k2[i]
        t += dt
        out1[step + 1] = c1[n - 1]
        out2[step + 1] = c2[n - 1]
        if step % 200 == 0:
            if not (np.isfinite(c1[n - 1]) and np.isfinite(c1[0])
                    and np.isfinite(c2[n - 1]) and np.isfinite(c2[0])):
                return 1
    for i in range(n):
        if not (np.isfinite(c1[i]) and np.isfinite(c2[i])):
            return 1
    return 0

"""Compiled Dormand-Prince 5(4) integrator for the 2x2 Lindblad equation.

The state is an operator flattened row-major as ``[m_gg, m_ge, m_eg, m_ee]``.
The drive is a piecewise-cubic in time given by per-interval polynomial
coefficients for its real and imaginary parts (``scipy.interpolate.CubicSpline.c``
layout); outside the spline range the drive is zero.

Status codes returned by :func:`integrate`: 0 success, 1 step budget exhausted,
2 step size underflow.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
MAX_STEPS = 1
UNDERFLOW = 2

# Dormand-Prince tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# dense-output coefficients (Hairer & Wanner, dopri5 contd5)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0


@njit(cache=True)
def drive_at(t, tg0, dtg, cr, ci):
    n = cr.shape[1]
    s = (t - tg0) / dtg
    # tolerance keeps the last node inside despite roundoff in s
    if s < -1e-6 or s > n + 1e-6:
        return 0j
    i = max(int(s), 0)
    if i >= n:
        i = n - 1
    u = t - (tg0 + i * dtg)
    re = ((cr[0, i] * u + cr[1, i]) * u + cr[2, i]) * u + cr[3, i]
    im = ((ci[0, i] * u + ci[1, i]) * u + ci[2, i]) * u + ci[3, i]
    return re + 1j * im


@njit(cache=True)
def rhs(t, y, out, tg0, dtg, cr, ci, detuning, gamma, gamma_ph):
    om = drive_at(t, tg0, dtg, cr, ci)
    # H = [[a, b], [c, -a]]
    a = 0.5 * detuning
    b = -0.5 * np.conj(om)
    c = -0.5 * om
    m00, m01, m10, m11 = y[0], y[1], y[2], y[3]
    dec = 0.5 * gamma + gamma_ph
    out[0] = -1j * (b * m10 - c * m01) + gamma * m11
    out[1] = -1j * (2.0 * a * m01 + b * (m11 - m00)) - dec * m01
    out[2] = -1j * (-2.0 * a * m10 + c * (m00 - m11)) - dec * m10
    out[3] = -1j * (c * m01 - b * m10) - gamma * m11


@njit(cache=True)
def _err_norm(y0, y1, e, rtol, atol):
    acc = 0.0
    for j in range(4):
        sc = atol + rtol * max(abs(y0[j]), abs(y1[j]))
        r = abs(e[j]) / sc
        acc += r * r
    return np.sqrt(acc / 4.0)


@njit(cache=True)
def integrate(
    cr, ci, tg0, dtg, detuning, gamma, gamma_ph, y0, t_start, t_end, t_out, rtol, atol,
    h_init, h_max, max_steps,
):
    """Integrate from ``t_start`` to ``t_end``, sampling the dense output at ``t_out``.

    ``t_out`` must be sorted and lie in ``[t_start, t_end]``.
    Returns ``(y_out, n_accepted, n_rejected, n_fev, status)``.
    """
    n_out = t_out.shape[0]
    y_out = np.zeros((n_out, 4), dtype=np.complex128)
    y = y0.copy()
    t = t_start
    j_out = 0
    while j_out < n_out and t_out[j_out] <= t:
        y_out[j_out, :] = y
        j_out += 1

    k1 = np.empty(4, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    k5 = np.empty_like(k1)
    k6 = np.empty_like(k1)
    k7 = np.empty_like(k1)
    ys = np.empty_like(k1)
    y_new = np.empty_like(k1)
    err = np.empty_like(k1)
    r5 = np.empty_like(k1)

    rhs(t, y, k1, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
    n_fev = 1
    n_acc = 0
    n_rej = 0
    h = min(h_init, h_max, t_end - t)
    if h <= 0.0:
        return y_out, n_acc, n_rej, n_fev, OK
    h_min = 1e-14 * max(abs(t_start), abs(t_end), dtg)
    status = OK

    while t < t_end:
        if n_acc + n_rej >= max_steps:
            status = MAX_STEPS
            break
        if h < h_min:
            status = UNDERFLOW
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True

        for j in range(4):
            ys[j] = y[j] + h * A21 * k1[j]
        rhs(t + C2 * h, ys, k2, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
        for j in range(4):
            ys[j] = y[j] + h * (A31 * k1[j] + A32 * k2[j])
        rhs(t + C3 * h, ys, k3, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
        for j in range(4):
            ys[j] = y[j] + h * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        rhs(t + C4 * h, ys, k4, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
        for j in range(4):
            ys[j] = y[j] + h * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        rhs(t + C5 * h, ys, k5, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
        for j in range(4):
            ys[j] = y[j] + h * (
                A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j]
            )
        rhs(t + h, ys, k6, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
        for j in range(4):
            y_new[j] = y[j] + h * (
                A71 * k1[j] + A73 * k3[j] + A74 * k4[j] + A75 * k5[j] + A76 * k6[j]
            )
        rhs(t + h, y_new, k7, tg0, dtg, cr, ci, detuning, gamma, gamma_ph)
        n_fev += 6
        for j in range(4):
            err[j] = h * (
                E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]
            )
        en = _err_norm(y, y_new, err, rtol, atol)

        if en <= 1.0:
            t_new = t_end if last else t + h
            if j_out < n_out and t_out[j_out] <= t_new:
                for j in range(4):
                    r5[j] = h * (
                        D1 * k1[j] + D3 * k3[j] + D4 * k4[j] + D5 * k5[j] + D6 * k6[j]
                        + D7 * k7[j]
                    )
                while j_out < n_out and t_out[j_out] <= t_new:
                    th = (t_out[j_out] - t) / h
                    th1 = 1.0 - th
                    for j in range(4):
                        ydiff = y_new[j] - y[j]
                        bspl = h * k1[j] - ydiff
                        c4 = ydiff - h * k7[j] - bspl
                        y_out[j_out, j] = y[j] + th * (
                            ydiff + th1 * (bspl + th * (c4 + th1 * r5[j]))
                        )
                    j_out += 1
            for j in range(4):
                y[j] = y_new[j]
                k1[j] = k7[j]
            t = t_new
            n_acc += 1
            fac = 10.0 if en == 0.0 else min(10.0, max(0.2, 0.9 * en ** (-0.2)))
            h = min(h * fac, h_max)
        else:
            n_rej += 1
            h = h * max(0.2, 0.9 * en ** (-0.2))

    return y_out, n_acc, n_rej, n_fev, status

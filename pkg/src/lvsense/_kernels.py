"""Compiled stepping kernels for the predator-prey integrators.

Everything here is numba-jitted scalar code: the two-species vector field is
inlined so that long fixed-step runs (millions of steps) and the inner loops
of least-squares fitting stay cheap. The public, validated API lives in
``core`` and ``delay``; these kernels assume pre-checked inputs.

Status codes returned by the kernels:
    0  success
    1  state left the positive quadrant by more than NEG_TOL
    2  non-finite state encountered
    3  step limit exceeded
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NEGATIVE = 1
STATUS_NONFINITE = 2
STATUS_STEP_LIMIT = 3

# states in [-NEG_TOL, 0) are clamped to 0; anything below is an error
NEG_TOL = 1e-9


@njit(cache=True)
def _rhs(a, b, g, d, x, y):
    return a * x - b * x * y, -g * y + d * x * y


@njit(cache=True)
def _hermite(t, ta, tb, xa, xb, fa, fb):
    # cubic Hermite on [ta, tb] from endpoint values and slopes
    h = tb - ta
    s = (t - ta) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * xa + h10 * h * fa + h01 * xb + h11 * h * fb


@njit(cache=True)
def _clamp(v):
    # tiny negative excursions are integration dust, larger ones an error
    if v < 0.0:
        if v >= -NEG_TOL:
            return 0.0, False
        return v, True
    return v, False


@njit(cache=True)
def rk4_fixed(a, b, g, d, x0, y0, t0, t1, h, max_steps, t_out, xs, ys):
    """Classical 4th-order Runge-Kutta with fixed step h.

    Fills xs/ys at the requested output times t_out (sorted, inside
    [t0, t1], t_out[0] == t0) using cubic Hermite interpolation inside each
    step. Returns (status, t_fail, n_steps).
    """
    n_out = t_out.shape[0]
    span = t1 - t0
    n_full = int(np.floor(span / h + 1e-12))
    if t0 + n_full * h >= t1 - 1e-12 * span and n_full > 0:
        n_full -= 1  # keep a final step of width >= ~h*1e-12 ending exactly at t1
    if n_full + 1 > max_steps:
        return STATUS_STEP_LIMIT, t0, 0

    x = x0
    y = y0
    fa_x, fa_y = _rhs(a, b, g, d, x, y)
    j = 0
    if n_out > 0 and t_out[0] <= t0:
        xs[0] = x
        ys[0] = y
        j = 1

    n_steps = n_full + 1
    for k in range(n_steps):
        ta = t0 + k * h
        tb = t0 + (k + 1) * h if k < n_full else t1
        hh = tb - ta

        k1x, k1y = fa_x, fa_y
        x2 = x + 0.5 * hh * k1x
        y2 = y + 0.5 * hh * k1y
        k2x, k2y = _rhs(a, b, g, d, x2, y2)
        x3 = x + 0.5 * hh * k2x
        y3 = y + 0.5 * hh * k2y
        k3x, k3y = _rhs(a, b, g, d, x3, y3)
        x4 = x + hh * k3x
        y4 = y + hh * k3y
        k4x, k4y = _rhs(a, b, g, d, x4, y4)
        xn = x + hh / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        yn = y + hh / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)

        if not (np.isfinite(xn) and np.isfinite(yn)):
            return STATUS_NONFINITE, tb, k + 1
        xn, bad_x = _clamp(xn)
        yn, bad_y = _clamp(yn)
        if bad_x or bad_y:
            return STATUS_NEGATIVE, tb, k + 1

        fb_x, fb_y = _rhs(a, b, g, d, xn, yn)
        while j < n_out and t_out[j] <= tb:
            xi = _hermite(t_out[j], ta, tb, x, xn, fa_x, fb_x)
            yi = _hermite(t_out[j], ta, tb, y, yn, fa_y, fb_y)
            xi, bad_x = _clamp(xi)
            yi, bad_y = _clamp(yi)
            if bad_x or bad_y:
                return STATUS_NEGATIVE, t_out[j], k + 1
            xs[j] = xi
            ys[j] = yi
            j += 1

        x, y = xn, yn
        fa_x, fa_y = fb_x, fb_y

    while j < n_out:  # fp dust: remaining samples sit at t1
        xs[j] = x
        ys[j] = y
        j += 1
    return STATUS_OK, t1, n_steps


# Dormand-Prince 5(4) tableau; the 5th-order solution is propagated and the
# embedded 4th-order difference drives step-size control.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0
_A64, _A65 = 49.0 / 176.0, -5103.0 / 18656.0
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4 = 71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0
_E5, _E6, _E7 = -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0

# quartic dense-output polynomial coefficients (theta^1..theta^4 per stage)
_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
])


@njit(cache=True)
def _initial_step(a, b, g, d, x0, y0, f0x, f0y, t0, t1, rtol, atol):
    # Hairer-style starting step: two trial derivative evaluations
    scx = atol + rtol * abs(x0)
    scy = atol + rtol * abs(y0)
    d0 = np.sqrt(0.5 * ((x0 / scx) ** 2 + (y0 / scy) ** 2))
    d1 = np.sqrt(0.5 * ((f0x / scx) ** 2 + (f0y / scy) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    x1 = x0 + h0 * f0x
    y1 = y0 + h0 * f0y
    f1x, f1y = _rhs(a, b, g, d, x1, y1)
    d2 = np.sqrt(0.5 * (((f1x - f0x) / scx) ** 2 + ((f1y - f0y) / scy) ** 2)) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.25
    return min(100.0 * h0, h1, t1 - t0)


@njit(cache=True)
def dopri45(a, b, g, d, x0, y0, t0, t1, rtol, atol, max_steps, t_out, xs, ys):
    """Adaptive embedded 4/5 Runge-Kutta pair (Dormand-Prince).

    Error control is per unit time: a step of size h is accepted when the
    embedded error estimate is below tolerance * h (h in ms), so
    accumulated error over a span scales with the span rather than the
    step count. Dense output at t_out uses the quartic continuous
    extension, keeping sampled values at the order of the accepted steps.
    Returns (status, t_fail, n_steps).
    """
    n_out = t_out.shape[0]
    x = x0
    y = y0
    k1x, k1y = _rhs(a, b, g, d, x, y)
    h = _initial_step(a, b, g, d, x, y, k1x, k1y, t0, t1, rtol, atol)
    t = t0

    j = 0
    if n_out > 0 and t_out[0] <= t0:
        xs[0] = x
        ys[0] = y
        j = 1

    n_steps = 0
    rejected = False
    while t < t1:
        if n_steps >= max_steps:
            return STATUS_STEP_LIMIT, t, n_steps
        n_steps += 1
        if h > t1 - t:
            h = t1 - t

        k2x, k2y = _rhs(a, b, g, d, x + h * _A21 * k1x, y + h * _A21 * k1y)
        k3x, k3y = _rhs(a, b, g, d,
                        x + h * (_A31 * k1x + _A32 * k2x),
                        y + h * (_A31 * k1y + _A32 * k2y))
        k4x, k4y = _rhs(a, b, g, d,
                        x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x),
                        y + h * (_A41 * k1y + _A42 * k2y + _A43 * k3y))
        k5x, k5y = _rhs(a, b, g, d,
                        x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x),
                        y + h * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y))
        k6x, k6y = _rhs(a, b, g, d,
                        x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x),
                        y + h * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y))
        xn = x + h * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
        yn = y + h * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
        k7x, k7y = _rhs(a, b, g, d, xn, yn)

        ex = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
        ey = h * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
        scx = atol + rtol * max(abs(x), abs(xn))
        scy = atol + rtol * max(abs(y), abs(yn))
        # max-norm, 5x headroom: the embedded estimate understates the true
        # local error on spike transits, and invariant drift must stay well
        # inside the requested tolerance even on stiff-ish orbits
        err = 5.0 * max(abs(ex / scx), abs(ey / scy)) / h

        if err <= 1.0:
            if not (np.isfinite(xn) and np.isfinite(yn)):
                return STATUS_NONFINITE, t + h, n_steps
            xn, bad_x = _clamp(xn)
            yn, bad_y = _clamp(yn)
            if bad_x or bad_y:
                return STATUS_NEGATIVE, t + h, n_steps

            tb = t + h
            while j < n_out and t_out[j] <= tb:
                th = (t_out[j] - t) / h
                th2 = th * th
                th3 = th2 * th
                th4 = th2 * th2
                xi = x
                yi = y
                # unrolled K^T @ P @ [th, th^2, th^3, th^4]
                q = _P[0, 0] * th + _P[0, 1] * th2 + _P[0, 2] * th3 + _P[0, 3] * th4
                xi += h * q * k1x
                yi += h * q * k1y
                q = _P[2, 0] * th + _P[2, 1] * th2 + _P[2, 2] * th3 + _P[2, 3] * th4
                xi += h * q * k3x
                yi += h * q * k3y
                q = _P[3, 0] * th + _P[3, 1] * th2 + _P[3, 2] * th3 + _P[3, 3] * th4
                xi += h * q * k4x
                yi += h * q * k4y
                q = _P[4, 0] * th + _P[4, 1] * th2 + _P[4, 2] * th3 + _P[4, 3] * th4
                xi += h * q * k5x
                yi += h * q * k5y
                q = _P[5, 0] * th + _P[5, 1] * th2 + _P[5, 2] * th3 + _P[5, 3] * th4
                xi += h * q * k6x
                yi += h * q * k6y
                q = _P[6, 0] * th + _P[6, 1] * th2 + _P[6, 2] * th3 + _P[6, 3] * th4
                xi += h * q * k7x
                yi += h * q * k7y
                xi, bad_x = _clamp(xi)
                yi, bad_y = _clamp(yi)
                if bad_x or bad_y:
                    return STATUS_NEGATIVE, t_out[j], n_steps
                xs[j] = xi
                ys[j] = yi
                j += 1

            t = tb
            x, y = xn, yn
            k1x, k1y = k7x, k7y  # FSAL
            if err == 0.0:
                factor = 10.0
            else:
                factor = min(10.0, max(0.2, 0.9 * err ** -0.25))
            if rejected:
                factor = min(1.0, factor)
            h *= factor
            rejected = False
        else:
            h *= max(0.2, 0.9 * err ** -0.25)
            rejected = True

    while j < n_out:
        xs[j] = x
        ys[j] = y
        j += 1
    return STATUS_OK, t1, n_steps


@njit(cache=True)
def _history_lookup(td, t0, h, hist_t, hist_x, ts_n, xs_n, dxs_n, filled):
    # prey value at delayed time td <= current node time
    if td <= t0:
        # provided history, linear interpolation on relative time in [-tau, 0]
        tr = td - t0
        n = hist_t.shape[0]
        if n == 1 or tr <= hist_t[0]:
            return hist_x[0]
        if tr >= hist_t[n - 1]:
            return hist_x[n - 1]
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if hist_t[mid] <= tr:
                lo = mid
            else:
                hi = mid
        w = (tr - hist_t[lo]) / (hist_t[hi] - hist_t[lo])
        return (1.0 - w) * hist_x[lo] + w * hist_x[hi]
    i = int((td - t0) / h)
    if i > filled - 2:
        i = filled - 2
    if i < 0:
        i = 0
    return _hermite(td, ts_n[i], ts_n[i + 1], xs_n[i], xs_n[i + 1], dxs_n[i], dxs_n[i + 1])


@njit(cache=True)
def dde_rk4(a, b, g, d, tau, x0, y0, t0, t1, h, hist_t, hist_x, max_steps,
            t_out, xs, ys):
    """Method-of-steps RK4 for the transit-delay model.

    Only the prey factor of the predator growth term is delayed:
        x' = a x - b x y,   y' = -g y + d x(t - tau) y
    h must satisfy tau = m*h for integer m >= 1, so every delayed stage
    lookup lands in already-integrated territory; the stored prey nodes are
    interpolated with cubic Hermite polynomials. Returns
    (status, t_fail, n_steps).
    """
    n_out = t_out.shape[0]
    span = t1 - t0
    n_full = int(np.floor(span / h + 1e-12))
    if t0 + n_full * h >= t1 - 1e-12 * span and n_full > 0:
        n_full -= 1
    n_steps = n_full + 1
    if n_steps + 1 > max_steps:
        return STATUS_STEP_LIMIT, t0, 0

    ts_n = np.empty(n_steps + 1)
    xs_n = np.empty(n_steps + 1)
    ys_n = np.empty(n_steps + 1)
    dxs_n = np.empty(n_steps + 1)
    dys_n = np.empty(n_steps + 1)

    ts_n[0] = t0
    xs_n[0] = x0
    ys_n[0] = y0
    xd0 = _history_lookup(t0 - tau, t0, h, hist_t, hist_x, ts_n, xs_n, dxs_n, 1)
    dxs_n[0] = a * x0 - b * x0 * y0
    dys_n[0] = -g * y0 + d * xd0 * y0
    filled = 1

    j = 0
    if n_out > 0 and t_out[0] <= t0:
        xs[0] = x0
        ys[0] = y0
        j = 1

    for k in range(n_steps):
        ta = t0 + k * h
        tb = t0 + (k + 1) * h if k < n_full else t1
        hh = tb - ta
        x = xs_n[k]
        y = ys_n[k]

        k1x = dxs_n[k]
        k1y = dys_n[k]
        xm = x + 0.5 * hh * k1x
        ym = y + 0.5 * hh * k1y
        xd = _history_lookup(ta + 0.5 * hh - tau, t0, h, hist_t, hist_x, ts_n, xs_n, dxs_n, filled)
        k2x = a * xm - b * xm * ym
        k2y = -g * ym + d * xd * ym
        xm = x + 0.5 * hh * k2x
        ym = y + 0.5 * hh * k2y
        k3x = a * xm - b * xm * ym
        k3y = -g * ym + d * xd * ym
        xm = x + hh * k3x
        ym = y + hh * k3y
        xd = _history_lookup(tb - tau, t0, h, hist_t, hist_x, ts_n, xs_n, dxs_n, filled)
        k4x = a * xm - b * xm * ym
        k4y = -g * ym + d * xd * ym

        xn = x + hh / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        yn = y + hh / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if not (np.isfinite(xn) and np.isfinite(yn)):
            return STATUS_NONFINITE, tb, k + 1
        xn, bad_x = _clamp(xn)
        yn, bad_y = _clamp(yn)
        if bad_x or bad_y:
            return STATUS_NEGATIVE, tb, k + 1

        ts_n[k + 1] = tb
        xs_n[k + 1] = xn
        ys_n[k + 1] = yn
        dxs_n[k + 1] = a * xn - b * xn * yn
        dys_n[k + 1] = -g * yn + d * xd * yn  # xd already at tb - tau
        filled = k + 2

        while j < n_out and t_out[j] <= tb:
            xi = _hermite(t_out[j], ta, tb, x, xn, dxs_n[k], dxs_n[k + 1])
            yi = _hermite(t_out[j], ta, tb, y, yn, dys_n[k], dys_n[k + 1])
            xi, bad_x = _clamp(xi)
            yi, bad_y = _clamp(yi)
            if bad_x or bad_y:
                return STATUS_NEGATIVE, t_out[j], k + 1
            xs[j] = xi
            ys[j] = yi
            j += 1

    while j < n_out:
        xs[j] = xs_n[filled - 1]
        ys[j] = ys_n[filled - 1]
        j += 1
    return STATUS_OK, t1, n_steps

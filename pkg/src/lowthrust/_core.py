"""Compiled numerical core: extremal dynamics, variational equations, and an
adaptive Dormand-Prince 8(5,3) propagator with switching-surface event
location.

Everything here operates on raw float64 arrays and returns integer status
codes instead of raising; the public modules wrap these kernels with typed
errors and friendlier containers.  The state layout throughout is

    y = [rx, ry, rz, vx, vy, vz, m, lrx, lry, lrz, lvx, lvy, lvz, lm]

optionally followed by the 14x14 state-transition matrix in row-major order.
Within one integration segment the throttle branch is locked (the smooth
extension of the active branch), and regime changes happen only at located
switching events, so each segment integrates a smooth right-hand side.
"""

import numba as nb
import numpy as np

from ._dop853_tableau import A, A_EXTRA, B, C, C_EXTRA, D, E3, E5, N_STAGES

# status codes shared with the wrapper layer
STATUS_OK = 0
HALT_PRIMARY_1 = 1
HALT_PRIMARY_2 = 2
HALT_MASS_FLOOR = 3
ERR_MAX_STEPS = 4
ERR_GRAZING_SWITCH = 5
ERR_SINGULARITY = 6
ERR_DEGENERATE_PRIMER = 7
ERR_STEP_UNDERFLOW = 8

# throttle regimes
REG_COAST = 0
REG_MID = 1
REG_FULL = 2

SINGULARITY_RADIUS = 1e-12
DEGENERATE_PRIMER_NORM = 1e-12

_EPS = np.finfo(np.float64).eps
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERR_EXPONENT = -1.0 / 8.0


@nb.njit(cache=True)
def distances(rx, ry, rz, mu):
    d1x = rx + mu
    d2x = rx + mu - 1.0
    r1 = np.sqrt(d1x * d1x + ry * ry + rz * rz)
    r2 = np.sqrt(d2x * d2x + ry * ry + rz * rz)
    return r1, r2


@nb.njit(cache=True)
def gravity(rx, ry, rz, mu, out):
    """Rotating-frame gravity + centrifugal acceleration; returns (r1, r2)."""
    r1, r2 = distances(rx, ry, rz, mu)
    r13 = r1 * r1 * r1
    r23 = r2 * r2 * r2
    om = 1.0 - mu
    out[0] = rx - om * (rx + mu) / r13 - mu * (rx + mu - 1.0) / r23
    out[1] = ry - om * ry / r13 - mu * ry / r23
    out[2] = -om * rz / r13 - mu * rz / r23
    return r1, r2


@nb.njit(cache=True)
def gravity_gradient(rx, ry, rz, mu, G):
    """3x3 Jacobian of the gravity term; returns (r1, r2)."""
    r1, r2 = distances(rx, ry, rz, mu)
    om = 1.0 - mu
    x1 = rx + mu
    x2 = rx + mu - 1.0
    r13 = r1 ** 3
    r15 = r13 * r1 * r1
    r23 = r2 ** 3
    r25 = r23 * r2 * r2
    G[0, 0] = 1.0 - om / r13 + 3.0 * om * x1 * x1 / r15 - mu / r23 + 3.0 * mu * x2 * x2 / r25
    G[1, 1] = 1.0 - om / r13 + 3.0 * om * ry * ry / r15 - mu / r23 + 3.0 * mu * ry * ry / r25
    G[2, 2] = -om / r13 + 3.0 * om * rz * rz / r15 - mu / r23 + 3.0 * mu * rz * rz / r25
    G[0, 1] = 3.0 * om * x1 * ry / r15 + 3.0 * mu * x2 * ry / r25
    G[1, 0] = G[0, 1]
    G[0, 2] = 3.0 * om * x1 * rz / r15 + 3.0 * mu * x2 * rz / r25
    G[2, 0] = G[0, 2]
    G[1, 2] = 3.0 * om * ry * rz / r15 + 3.0 * mu * ry * rz / r25
    G[2, 1] = G[1, 2]
    return r1, r2


@nb.njit(cache=True)
def switching_value(y, c):
    lvn = np.sqrt(y[10] ** 2 + y[11] ** 2 + y[12] ** 2)
    return -(c / y[6]) * lvn - y[13] + 1.0


@nb.njit(cache=True)
def regime_from_switching(s, eps):
    """Throttle regime implied by the switching value.  Surface ties resolve
    to the branch whose throttle is continuous there; S = 0 at eps = 0
    resolves to coast."""
    if eps > 0.0:
        if s > eps:
            return REG_COAST
        if s < -eps:
            return REG_FULL
        return REG_MID
    if s < 0.0:
        return REG_FULL
    return REG_COAST


@nb.njit(cache=True)
def throttle(s, eps, regime):
    """Throttle for a locked regime (smooth extension outside the branch)."""
    if regime == REG_COAST:
        return 0.0
    if regime == REG_FULL:
        return 1.0
    return (eps - s) / (2.0 * eps)


@nb.njit(cache=True)
def rhs14(y, mu, eps, tmax, c, regime, out):
    """Extremal state/co-state rates; writes out[:14], returns a status."""
    r1, r2 = gravity(y[0], y[1], y[2], mu, out[3:6])
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        return ERR_SINGULARITY
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    out[3] += 2.0 * y[4]
    out[4] += -2.0 * y[3]

    m = y[6]
    lvx = y[10]
    lvy = y[11]
    lvz = y[12]
    lvn = np.sqrt(lvx * lvx + lvy * lvy + lvz * lvz)
    s = -(c / m) * lvn - y[13] + 1.0
    u = throttle(s, eps, regime)

    if u != 0.0:
        if lvn < DEGENERATE_PRIMER_NORM:
            return ERR_DEGENERATE_PRIMER
        k = u * tmax / (m * lvn)
        out[3] -= k * lvx
        out[4] -= k * lvy
        out[5] -= k * lvz
        out[6] = -u * tmax / c
        out[13] = -lvn * u * tmax / (m * m)
    else:
        out[6] = 0.0
        out[13] = 0.0

    G = np.empty((3, 3))
    gravity_gradient(y[0], y[1], y[2], mu, G)
    out[7] = -(G[0, 0] * lvx + G[0, 1] * lvy + G[0, 2] * lvz)
    out[8] = -(G[1, 0] * lvx + G[1, 1] * lvy + G[1, 2] * lvz)
    out[9] = -(G[2, 0] * lvx + G[2, 1] * lvy + G[2, 2] * lvz)
    out[10] = -y[7] + 2.0 * lvy
    out[11] = -y[8] - 2.0 * lvx
    out[12] = -y[9]
    return STATUS_OK


@nb.njit(cache=True)
def switching_gradient14(y, c, ds):
    """dS/dy (14,) and S-dot; returns 0.0 S-dot on a degenerate primer so a
    grazing check upstream fires."""
    m = y[6]
    lvx = y[10]
    lvy = y[11]
    lvz = y[12]
    lvn = np.sqrt(lvx * lvx + lvy * lvy + lvz * lvz)
    for i in range(14):
        ds[i] = 0.0
    if lvn < DEGENERATE_PRIMER_NORM:
        return 0.0
    ds[6] = c / (m * m) * lvn
    ds[10] = -(c / m) * lvx / lvn
    ds[11] = -(c / m) * lvy / lvn
    ds[12] = -(c / m) * lvz / lvn
    ds[13] = -1.0
    # S-dot = (c/m) (lr + H^T lv)^T lv/|lv|, with H^T lv = (-2 lvy, 2 lvx, 0)
    return (c / m) * ((y[7] - 2.0 * lvy) * lvx + (y[8] + 2.0 * lvx) * lvy
                      + y[9] * lvz) / lvn


@nb.njit(cache=True)
def fjac14(y, mu, eps, tmax, c, regime, F):
    """14x14 Jacobian of rhs14 for the locked throttle regime."""
    for i in range(14):
        for j in range(14):
            F[i, j] = 0.0
    F[0, 3] = 1.0
    F[1, 4] = 1.0
    F[2, 5] = 1.0

    G = np.empty((3, 3))
    r1, r2 = gravity_gradient(y[0], y[1], y[2], mu, G)
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        return ERR_SINGULARITY
    for i in range(3):
        for j in range(3):
            F[3 + i, j] = G[i, j]
    F[3, 4] = 2.0
    F[4, 3] = -2.0

    m = y[6]
    lv = np.empty(3)
    lv[0] = y[10]
    lv[1] = y[11]
    lv[2] = y[12]
    lvn = np.sqrt(lv[0] ** 2 + lv[1] ** 2 + lv[2] ** 2)

    # d(lr')/dr = -d(G lv)/dr from the two point-mass contributions
    om = 1.0 - mu
    dvec = np.empty(3)
    for kk in range(2):
        if kk == 0:
            mk = om
            dvec[0] = y[0] + mu
        else:
            mk = mu
            dvec[0] = y[0] + mu - 1.0
        dvec[1] = y[1]
        dvec[2] = y[2]
        rk2 = dvec[0] ** 2 + dvec[1] ** 2 + dvec[2] ** 2
        rk = np.sqrt(rk2)
        rk5 = rk2 * rk2 * rk
        coef = 3.0 * mk / rk5
        dw = dvec[0] * lv[0] + dvec[1] * lv[1] + dvec[2] * lv[2]
        for i in range(3):
            for j in range(3):
                t3 = coef * (lv[i] * dvec[j] + dvec[i] * lv[j]
                             - 5.0 * dw * dvec[i] * dvec[j] / rk2)
                if i == j:
                    t3 += coef * dw
                F[7 + i, j] -= t3

    for i in range(3):
        for j in range(3):
            F[7 + i, 10 + j] = -G[i, j]

    F[10, 7] = -1.0
    F[11, 8] = -1.0
    F[12, 9] = -1.0
    F[10, 11] = 2.0
    F[11, 10] = -2.0

    if regime == REG_COAST:
        return STATUS_OK

    if lvn < DEGENERATE_PRIMER_NORM:
        return ERR_DEGENERATE_PRIMER

    s = -(c / m) * lvn - y[13] + 1.0
    u = throttle(s, eps, regime)
    lhat = np.empty(3)
    for i in range(3):
        lhat[i] = lv[i] / lvn

    # du/dy, nonzero only in the intermediate regime
    du_dm = 0.0
    du_dlm = 0.0
    du_dlv = np.zeros(3)
    if regime == REG_MID:
        inv2e = 1.0 / (2.0 * eps)
        du_dm = -inv2e * (c / (m * m)) * lvn
        for i in range(3):
            du_dlv[i] = inv2e * (c / m) * lhat[i]
        du_dlm = inv2e

    km = tmax / m
    ku = u * tmax / (m * lvn)
    for i in range(3):
        F[3 + i, 6] = (u * tmax / (m * m)) * lhat[i] - km * lhat[i] * du_dm
        for j in range(3):
            proj = -lhat[i] * lhat[j]
            if i == j:
                proj += 1.0
            F[3 + i, 10 + j] = -ku * proj - km * lhat[i] * du_dlv[j]
        F[3 + i, 13] = -km * lhat[i] * du_dlm

    F[6, 6] = -(tmax / c) * du_dm
    for j in range(3):
        F[6, 10 + j] = -(tmax / c) * du_dlv[j]
    F[6, 13] = -(tmax / c) * du_dlm

    tm2 = tmax / (m * m)
    F[13, 6] = 2.0 * u * tmax * lvn / (m ** 3) - tm2 * lvn * du_dm
    for j in range(3):
        F[13, 10 + j] = -u * tm2 * lhat[j] - tm2 * lvn * du_dlv[j]
    F[13, 13] = -tm2 * lvn * du_dlm
    return STATUS_OK


@nb.njit(cache=True)
def ode_rhs(y, mu, eps, tmax, c, regime, with_stm, out, Fwork):
    status = rhs14(y, mu, eps, tmax, c, regime, out)
    if status != STATUS_OK:
        return status
    if with_stm:
        status = fjac14(y, mu, eps, tmax, c, regime, Fwork)
        if status != STATUS_OK:
            return status
        for i in range(14):
            base = 14 + i * 14
            for j in range(14):
                acc = 0.0
                for k in range(14):
                    acc += Fwork[i, k] * y[14 + k * 14 + j]
                out[base + j] = acc
    return STATUS_OK


@nb.njit(cache=True)
def interp_eval(Finterp, y_old, h, t_old, t, ncomp, out):
    """Evaluate the 7-term dense-output polynomial for the first ncomp
    components."""
    x = (t - t_old) / h
    for j in range(ncomp):
        out[j] = 0.0
    for i in range(7):
        row = Finterp[6 - i]
        for j in range(ncomp):
            out[j] += row[j]
        if i % 2 == 0:
            for j in range(ncomp):
                out[j] *= x
        else:
            for j in range(ncomp):
                out[j] *= 1.0 - x
    for j in range(ncomp):
        out[j] += y_old[j]


@nb.njit(cache=True)
def _build_interp(K, y_old, y_new, f_old, f_new, h, n, mu, eps, tmax, c,
                  regime, with_stm, Fwork, Finterp):
    """Extra stages 14..16 and the dense-output coefficient rows."""
    ytmp = np.empty(n)
    for s in range(3):
        idx = 13 + s
        for j in range(n):
            acc = 0.0
            for q in range(idx):
                aq = A_EXTRA[s, q]
                if aq != 0.0:
                    acc += aq * K[q, j]
            ytmp[j] = y_old[j] + h * acc
        status = ode_rhs(ytmp, mu, eps, tmax, c, regime, with_stm, K[idx], Fwork)
        if status != STATUS_OK:
            return status
    for j in range(n):
        dy = y_new[j] - y_old[j]
        Finterp[0, j] = dy
        Finterp[1, j] = h * f_old[j] - dy
        Finterp[2, j] = 2.0 * dy - h * (f_new[j] + f_old[j])
    for i in range(4):
        for j in range(n):
            acc = 0.0
            for q in range(16):
                dq = D[i, q]
                if dq != 0.0:
                    acc += dq * K[q, j]
            Finterp[3 + i, j] = h * acc
    return STATUS_OK


@nb.njit(cache=True)
def _initial_step(y0, f0, t0, t_bound, mu, eps, tmax, c, regime, with_stm,
                  atol, rtol, Fwork):
    n = y0.size
    d0 = 0.0
    d1 = 0.0
    for j in range(n):
        sc = atol + rtol * abs(y0[j])
        d0 += (y0[j] / sc) ** 2
        d1 += (f0[j] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    span = abs(t_bound - t0)
    if h0 > span:
        h0 = span
    y1 = np.empty(n)
    f1 = np.empty(n)
    for j in range(n):
        y1[j] = y0[j] + h0 * f0[j]
    status = ode_rhs(y1, mu, eps, tmax, c, regime, with_stm, f1, Fwork)
    if status != STATUS_OK:
        return h0 * 0.1
    d2 = 0.0
    for j in range(n):
        sc = atol + rtol * abs(y0[j])
        d2 += ((f1[j] - f0[j]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.125
    h = min(100.0 * h0, h1)
    if h > span:
        h = span
    return h


@nb.njit(cache=True)
def _surface_count(eps):
    return 2 if eps > 0.0 else 1


@nb.njit(cache=True)
def _surface_level(k, eps):
    # k = 0 -> S = +eps (S = 0 at eps = 0); k = 1 -> S = -eps
    if eps > 0.0:
        return eps if k == 0 else -eps
    return 0.0


@nb.njit(cache=True)
def _regime_signs(regime, eps, signs):
    """Side of each switching surface implied by a regime."""
    if eps > 0.0:
        if regime == REG_COAST:
            signs[0] = 1
            signs[1] = 1
        elif regime == REG_MID:
            signs[0] = -1
            signs[1] = 1
        else:
            signs[0] = -1
            signs[1] = -1
    else:
        signs[0] = 1 if regime == REG_COAST else -1
        signs[1] = signs[0]


@nb.njit(cache=True)
def _regime_after_crossing(surface, new_side, eps):
    if eps > 0.0:
        if surface == 0:
            return REG_COAST if new_side > 0 else REG_MID
        return REG_MID if new_side > 0 else REG_FULL
    return REG_COAST if new_side > 0 else REG_FULL


@nb.njit(cache=True)
def _locate_crossing(Finterp, y_old, h, t_old, a, b, ga, gb, lvl, c,
                     t_tol, ybuf):
    """Bracketed secant/bisection hybrid for S(t) = lvl on [a, b]."""
    for _ in range(200):
        if b - a <= t_tol:
            break
        if ga != gb:
            tm = a - ga * (b - a) / (gb - ga)
        else:
            tm = 0.5 * (a + b)
        lo = a + 0.125 * (b - a)
        hi = b - 0.125 * (b - a)
        if tm < lo or tm > hi:
            tm = 0.5 * (a + b)
        interp_eval(Finterp, y_old, h, t_old, tm, 14, ybuf)
        gm = switching_value(ybuf, c) - lvl
        if gm == 0.0:
            return tm
        if (gm > 0.0) == (gb > 0.0):
            b = tm
            gb = gm
        else:
            a = tm
            ga = gm
    return b


@nb.njit(cache=True)
def _grow_dense(t0a, ha, tva, y0a, Fa, cap):
    new_cap = cap * 2
    t0b = np.empty(new_cap)
    hb = np.empty(new_cap)
    tvb = np.empty(new_cap)
    y0b = np.empty((new_cap, 14))
    Fb = np.empty((new_cap, 7, 14))
    t0b[:cap] = t0a
    hb[:cap] = ha
    tvb[:cap] = tva
    y0b[:cap] = y0a
    Fb[:cap] = Fa
    return t0b, hb, tvb, y0b, Fb, new_cap


@nb.njit(cache=True)
def propagate(y0, t0, tf, mu, eps, tmax, c, atol, rtol, max_steps,
              r1_halt, r2_halt, mass_floor, with_stm, store_dense,
              n_interior, event_tol, grazing_tol):
    """Segmented adaptive propagation of the extremal system.

    Returns (status, t_end, y_end, switch_times, dense_t0, dense_h,
    dense_tval, dense_y0, dense_F, n_steps, n_fev).
    """
    n = y0.size
    y = y0.copy()
    t = t0

    f = np.empty(n)
    Fwork = np.empty((14, 14)) if with_stm else np.empty((1, 1))
    K = np.empty((16, n))
    y_new = np.empty(n)
    f_new = np.empty(n)
    Finterp = np.empty((7, n))
    ysamp = np.empty(14)
    ysamp2 = np.empty(14)
    ystar = np.empty(n)
    ds_buf = np.empty(14)
    ds_scan = np.empty(14)
    dy_minus = np.empty(14)
    dy_plus = np.empty(14)
    signs = np.empty(2, dtype=np.int64)
    psi = np.empty((14, 14))
    phi_new = np.empty((14, 14))

    sw_cap = 128
    switch_times = np.empty(sw_cap)
    n_sw = 0

    d_cap = 4096 if store_dense else 1
    dense_t0 = np.empty(d_cap)
    dense_h = np.empty(d_cap)
    dense_tval = np.empty(d_cap)
    dense_y0 = np.empty((d_cap, 14))
    dense_F = np.empty((d_cap, 7, 14))
    n_dense = 0

    nfev = 0
    nsteps = 0

    if tf == t0:
        return (STATUS_OK, t0, y, switch_times[:0].copy(), dense_t0[:0].copy(),
                dense_h[:0].copy(), dense_tval[:0].copy(), dense_y0[:0].copy(),
                dense_F[:0].copy(), 0, 0)

    s_val = switching_value(y, c)
    regime = regime_from_switching(s_val, eps)
    _regime_signs(regime, eps, signs)

    status = ode_rhs(y, mu, eps, tmax, c, regime, with_stm, f, Fwork)
    nfev += 1
    if status != STATUS_OK:
        return (status, t, y, switch_times[:0].copy(), dense_t0[:0].copy(),
                dense_h[:0].copy(), dense_tval[:0].copy(), dense_y0[:0].copy(),
                dense_F[:0].copy(), 0, nfev)

    h = _initial_step(y, f, t, tf, mu, eps, tmax, c, regime, with_stm,
                      atol, rtol, Fwork)
    nfev += 1

    nsurf = _surface_count(eps)
    n_samples = n_interior + 1
    final_status = STATUS_OK
    rejected_last = False
    at_node = True

    while t < tf:
        min_step = 10.0 * _EPS * abs(t)
        if tf - t <= max(min_step, 4.0 * _EPS * abs(tf)):
            # snap the leftover sliver with one Euler micro-step
            dt_last = tf - t
            for j in range(n):
                y[j] += dt_last * f[j]
            t = tf
            break
        nsteps += 1
        if nsteps > max_steps:
            final_status = ERR_MAX_STEPS
            break
        if min_step > 0.0 and h < min_step:
            final_status = ERR_STEP_UNDERFLOW
            break
        if t + h > tf:
            h = tf - t

        # stages
        step_err = False
        for j in range(n):
            K[0, j] = f[j]
        for i in range(1, N_STAGES):
            for j in range(n):
                acc = 0.0
                for q in range(i):
                    aq = A[i, q]
                    if aq != 0.0:
                        acc += aq * K[q, j]
                y_new[j] = y[j] + h * acc
            st = ode_rhs(y_new, mu, eps, tmax, c, regime, with_stm, K[i], Fwork)
            nfev += 1
            if st != STATUS_OK:
                step_err = True
                break
        if not step_err:
            for j in range(n):
                acc = 0.0
                for q in range(N_STAGES):
                    acc += B[q] * K[q, j]
                y_new[j] = y[j] + h * acc
            st = ode_rhs(y_new, mu, eps, tmax, c, regime, with_stm, f_new, Fwork)
            nfev += 1
            if st != STATUS_OK:
                step_err = True
        if step_err:
            # a stage reached a singular or degenerate region: retry smaller
            h *= 0.25
            rejected_last = True
            continue
        for j in range(n):
            K[12, j] = f_new[j]

        # 5th/3rd-order error estimate, scaled
        err5_2 = 0.0
        err3_2 = 0.0
        for j in range(n):
            sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
            e5 = 0.0
            e3 = 0.0
            for q in range(13):
                e5 += E5[q] * K[q, j]
                e3 += E3[q] * K[q, j]
            e5 /= sc
            e3 /= sc
            err5_2 += e5 * e5
            err3_2 += e3 * e3
        denom = err5_2 + 0.01 * err3_2
        if denom > 0.0:
            err_norm = abs(h) * err5_2 / np.sqrt(denom * n)
        else:
            err_norm = 0.0

        if err_norm >= 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** _ERR_EXPONENT)
            rejected_last = True
            continue

        t_new = t + h
        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * err_norm ** _ERR_EXPONENT)
        if rejected_last:
            factor = min(1.0, factor)
        rejected_last = False

        s_new = switching_value(y_new, c)
        need_interp = store_dense or n_interior > 0
        if not need_interp:
            for k in range(nsurf):
                g_new = s_new - _surface_level(k, eps)
                gs = 1 if g_new > 0.0 else (-1 if g_new < 0.0 else 0)
                if gs != 0 and gs != signs[k]:
                    need_interp = True
        interp_ok = False
        if need_interp:
            st = _build_interp(K, y, y_new, f, f_new, h, n, mu, eps, tmax,
                               c, regime, with_stm, Fwork, Finterp)
            nfev += 3
            interp_ok = st == STATUS_OK
            if not interp_ok:
                # interpolation stages hit a singular/degenerate region:
                # retry the step smaller so events and guards stay locatable
                h *= 0.25
                rejected_last = True
                continue

        # scan samples for the earliest surface crossing and guard violation
        t_tol = max(event_tol, 4.0 * _EPS * max(abs(t), abs(t_new)))
        event_t = np.inf
        event_surface = -1
        event_side = 0
        halt_code = 0
        halt_time = t_new
        found_event = False

        prev_t = t
        prev_s = s_val
        if at_node and interp_ok:
            # shift the left sample off the node the segment restarted from
            prev_t = t + 1e-3 * h
            interp_eval(Finterp, y, h, t, prev_t, 14, ysamp)
            prev_s = switching_value(ysamp, c)
            prev_sd = switching_gradient14(ysamp, c, ds_scan)
        elif interp_ok:
            prev_sd = switching_gradient14(y, c, ds_scan)
        else:
            prev_sd = 0.0
        for si in range(n_samples):
            if si == n_samples - 1:
                ts = t_new
                ss = s_new
                for j in range(14):
                    ysamp[j] = y_new[j]
            elif interp_ok:
                ts = t + h * (si + 1.0) / n_samples
                interp_eval(Finterp, y, h, t, ts, 14, ysamp)
                ss = switching_value(ysamp, c)
            else:
                continue
            sd_s = switching_gradient14(ysamp, c, ds_scan) if interp_ok else 0.0
            r1s, r2s = distances(ysamp[0], ysamp[1], ysamp[2], mu)
            if halt_code == 0:
                if r1s < r1_halt:
                    halt_code = HALT_PRIMARY_1
                    halt_time = ts
                elif r2s < r2_halt:
                    halt_code = HALT_PRIMARY_2
                    halt_time = ts
                elif ysamp[6] < mass_floor:
                    halt_code = HALT_MASS_FLOOR
                    halt_time = ts
            if not found_event:
                # direct endpoint crossings of either surface in this pair
                for k in range(nsurf):
                    lvl = _surface_level(k, eps)
                    ga = prev_s - lvl
                    gb = ss - lvl
                    sa = 1 if ga > 0.0 else (-1 if ga < 0.0 else 0)
                    sb = 1 if gb > 0.0 else (-1 if gb < 0.0 else 0)
                    if sa == 0 or abs(ga) < 1e-12:
                        sa = signs[k]
                    if sb != 0 and sa != 0 and sb != sa and interp_ok:
                        tr = _locate_crossing(Finterp, y, h, t, prev_t, ts,
                                              ga, gb, lvl, c, t_tol, ysamp2)
                        if tr < event_t:
                            event_t = tr
                            event_surface = k
                            event_side = sb
                # a sign change of S-dot marks an interior extremum: a thin
                # throttle-band transit can hide there without flipping the
                # endpoint signs, and it can precede any direct crossing
                if interp_ok and prev_sd * sd_s < 0.0 and prev_sd != 0.0:
                    ea = prev_t
                    eb = ts
                    sda = prev_sd
                    for _ in range(90):
                        if eb - ea <= t_tol:
                            break
                        em = 0.5 * (ea + eb)
                        interp_eval(Finterp, y, h, t, em, 14, ysamp2)
                        sdm = switching_gradient14(ysamp2, c, ds_scan)
                        if sdm == 0.0:
                            ea = em
                            break
                        if (sdm > 0.0) == (sda > 0.0):
                            ea = em
                            sda = sdm
                        else:
                            eb = em
                    t_ext = 0.5 * (ea + eb)
                    interp_eval(Finterp, y, h, t, t_ext, 14, ysamp2)
                    s_ext = switching_value(ysamp2, c)
                    for k in range(nsurf):
                        lvl = _surface_level(k, eps)
                        ga = prev_s - lvl
                        gx = s_ext - lvl
                        sa = 1 if ga > 0.0 else (-1 if ga < 0.0 else 0)
                        sx = 1 if gx > 0.0 else (-1 if gx < 0.0 else 0)
                        if sa == 0 or abs(ga) < 1e-12:
                            sa = signs[k]
                        if sx != 0 and sa != 0 and sx != sa:
                            tr = _locate_crossing(Finterp, y, h, t, prev_t,
                                                  t_ext, ga, gx, lvl, c,
                                                  t_tol, ysamp2)
                            if tr < event_t:
                                event_t = tr
                                event_surface = k
                                event_side = sx
                if event_surface >= 0:
                    found_event = True
            if found_event and halt_code != 0:
                break
            prev_t = ts
            prev_s = ss
            prev_sd = sd_s

        if found_event and (halt_code == 0 or event_t <= halt_time):
            t_star = event_t
            genuine = t_star > t + max(t_tol, 1e-6 * h)

            if genuine:
                interp_eval(Finterp, y, h, t, t_star, n, ystar)
                new_regime = _regime_after_crossing(event_surface, event_side,
                                                    eps)

                if n_sw >= sw_cap:
                    grown = np.empty(sw_cap * 2)
                    grown[:sw_cap] = switch_times
                    switch_times = grown
                    sw_cap *= 2
                switch_times[n_sw] = t_star
                n_sw += 1

                if with_stm and eps == 0.0:
                    sd = switching_gradient14(ystar, c, ds_buf)
                    if abs(sd) < grazing_tol:
                        final_status = ERR_GRAZING_SWITCH
                        t = t_star
                        for j in range(n):
                            y[j] = ystar[j]
                        break
                    st1 = rhs14(ystar, mu, eps, tmax, c, regime, dy_minus)
                    st2 = rhs14(ystar, mu, eps, tmax, c, new_regime, dy_plus)
                    if st1 != STATUS_OK or st2 != STATUS_OK:
                        final_status = st1 if st1 != STATUS_OK else st2
                        break
                    for i in range(14):
                        di = (dy_plus[i] - dy_minus[i]) / sd
                        for j in range(14):
                            psi[i, j] = di * ds_buf[j]
                        psi[i, i] += 1.0
                    for i in range(14):
                        for j in range(14):
                            acc = 0.0
                            for q in range(14):
                                acc += psi[i, q] * ystar[14 + q * 14 + j]
                            phi_new[i, j] = acc
                    for i in range(14):
                        for j in range(14):
                            ystar[14 + i * 14 + j] = phi_new[i, j]

                if store_dense:
                    if n_dense >= d_cap:
                        dense_t0, dense_h, dense_tval, dense_y0, dense_F, d_cap = \
                            _grow_dense(dense_t0, dense_h, dense_tval, dense_y0,
                                        dense_F, d_cap)
                    dense_t0[n_dense] = t
                    dense_h[n_dense] = h
                    dense_tval[n_dense] = t_star
                    for j in range(14):
                        dense_y0[n_dense, j] = y[j]
                    for i in range(7):
                        for j in range(14):
                            dense_F[n_dense, i, j] = Finterp[i, j]
                    n_dense += 1

                t = t_star
                for j in range(n):
                    y[j] = ystar[j]
                regime = new_regime
                _regime_signs(regime, eps, signs)
                s_val = switching_value(y, c)
                status = ode_rhs(y, mu, eps, tmax, c, regime, with_stm, f, Fwork)
                nfev += 1
                if status != STATUS_OK:
                    final_status = status
                    break
                at_node = True
                h *= factor
                continue
            # non-genuine root (the restart node itself): fall through

        if halt_code != 0:
            if interp_ok and halt_time < t_new:
                interp_eval(Finterp, y, h, t, halt_time, n, ystar)
            else:
                halt_time = t_new
                for j in range(n):
                    ystar[j] = y_new[j]
            if store_dense and interp_ok:
                if n_dense >= d_cap:
                    dense_t0, dense_h, dense_tval, dense_y0, dense_F, d_cap = \
                        _grow_dense(dense_t0, dense_h, dense_tval, dense_y0,
                                    dense_F, d_cap)
                dense_t0[n_dense] = t
                dense_h[n_dense] = h
                dense_tval[n_dense] = halt_time
                for j in range(14):
                    dense_y0[n_dense, j] = y[j]
                for i in range(7):
                    for j in range(14):
                        dense_F[n_dense, i, j] = Finterp[i, j]
                n_dense += 1
            t = halt_time
            for j in range(n):
                y[j] = ystar[j]
            final_status = halt_code
            break

        if store_dense and interp_ok:
            if n_dense >= d_cap:
                dense_t0, dense_h, dense_tval, dense_y0, dense_F, d_cap = \
                    _grow_dense(dense_t0, dense_h, dense_tval, dense_y0,
                                dense_F, d_cap)
            dense_t0[n_dense] = t
            dense_h[n_dense] = h
            dense_tval[n_dense] = t_new
            for j in range(14):
                dense_y0[n_dense, j] = y[j]
            for i in range(7):
                for j in range(14):
                    dense_F[n_dense, i, j] = Finterp[i, j]
            n_dense += 1

        t = t_new
        for j in range(n):
            y[j] = y_new[j]
            f[j] = f_new[j]
        s_val = s_new
        for k in range(nsurf):
            g = s_val - _surface_level(k, eps)
            if g > 1e-12:
                signs[k] = 1
            elif g < -1e-12:
                signs[k] = -1
        at_node = False
        h *= factor

    return (final_status, t, y, switch_times[:n_sw].copy(),
            dense_t0[:n_dense].copy(), dense_h[:n_dense].copy(),
            dense_tval[:n_dense].copy(), dense_y0[:n_dense].copy(),
            dense_F[:n_dense].copy(), nsteps, nfev)


@nb.njit(cache=True)
def dense_sample(dense_t0, dense_h, dense_tval, dense_y0, dense_F, tq, out):
    """Evaluate the stored piecewise dense output at time tq (14 components)."""
    n = dense_tval.size
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if dense_tval[mid] < tq:
            lo = mid + 1
        else:
            hi = mid
    interp_eval(dense_F[lo], dense_y0[lo], dense_h[lo], dense_t0[lo], tq, 14,
                out)


@nb.njit(cache=True, parallel=True)
def batch_objective(lam_batch, y_phys, t0, tf, mu, eps, tmax, c, atol, rtol,
                    max_steps, r1_halt, r2_halt, mass_floor, rf, vf, weights,
                    penalty, saturation_guard, out):
    """Weighted squared boundary residual for a batch of initial co-states.

    With saturation_guard, arcs that ride the full-throttle branch end to
    end are penalized like halted ones: on that family the residual
    Jacobian is rank deficient and shooting provably stalls.
    """
    n = lam_batch.shape[0]
    for i in nb.prange(n):
        y0 = np.empty(14)
        for j in range(6):
            y0[j] = y_phys[j]
        y0[6] = 1.0
        for j in range(7):
            y0[7 + j] = lam_batch[i, j]
        s0 = switching_value(y0, c)
        res = propagate(y0, t0, tf, mu, eps, tmax, c, atol, rtol, max_steps,
                        r1_halt, r2_halt, mass_floor, False, False, 2, 0.0,
                        1e-10)
        if res[0] != STATUS_OK:
            out[i] = penalty
        elif saturation_guard and res[3].size == 0 and s0 < -eps:
            out[i] = penalty
        else:
            ye = res[2]
            val = 0.0
            for j in range(3):
                e = ye[j] - rf[j]
                val += weights[j] * e * e
            for j in range(3):
                e = ye[3 + j] - vf[j]
                val += weights[3 + j] * e * e
            e = ye[13]
            val += weights[6] * e * e
            out[i] = val

"""Compiled inner loop of the fixed-step simulator.

Everything here operates on flat float64/int arrays so numba can compile it;
the readable per-agent semantics live in :mod:`etconsensus.runtime` and the
two paths are pinned against each other in the tests.  If numba is
unavailable the same code runs as plain Python (slowly).

Layout of the packed state vector::

    x0 | x (N*n) | xh (N*n) | uh (N*p) | z1 (m*n0) | z2 (nm*n0)
       | ah (nm*n0^2) | phi1 (m) | phi2 (nm) | phi3 (nm)

Step semantics: one classical Runge-Kutta advance with the weight snapshot,
broadcast values and trigger measurement terms frozen at the step start;
then the snapshot is refreshed at the new time, trigger predicates are
evaluated in agent order and fires are committed; recording happens last.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap

STATUS_OK = 0
STATUS_DIVERGED = 1

# trigger parameter vector layout
TP_BETA, TP_GAMMA, TP_TAU, TP_DELTA, TP_SIGMA = 0, 1, 2, 3, 4
TP_TAUH, TP_SIGMAH, TP_OMEGA, TP_THETA = 5, 6, 7, 8


@njit(cache=True)
def _wave(kind, amp, freq, phase, t):
    if kind == 0:
        return amp * np.sin(freq * t + phase)
    elif kind == 1:
        return amp * np.cos(freq * t + phase)
    return amp


@njit(cache=True)
def _fill_snapshot(t, comm_on,
                   a11n, a22n, a12n, a21n, g0n, gln,
                   ch11, ch22, ch12, ch21, chg0, chgl,
                   camp, cfreq, ckind, cphase,
                   sa11, sa22, sa12, sa21, sg0, sgl):
    m = a11n.shape[0]
    nm = a22n.shape[0]
    for i in range(m):
        for j in range(m):
            v = a11n[i, j]
            if comm_on and v > 0.0 and ch11[i, j] >= 0:
                k = ch11[i, j]
                v += _wave(ckind[k], camp[k], cfreq[k], cphase[k], t)
            sa11[i, j] = v
        for j in range(nm):
            v = a12n[i, j]
            if comm_on and v > 0.0 and ch12[i, j] >= 0:
                k = ch12[i, j]
                v += _wave(ckind[k], camp[k], cfreq[k], cphase[k], t)
            sa12[i, j] = v
        v = g0n[i]
        if comm_on and v > 0.0 and chg0[i] >= 0:
            k = chg0[i]
            v += _wave(ckind[k], camp[k], cfreq[k], cphase[k], t)
        sg0[i] = v
        v = gln[i]
        if comm_on and v > 0.0 and chgl[i] >= 0:
            k = chgl[i]
            v += _wave(ckind[k], camp[k], cfreq[k], cphase[k], t)
        sgl[i] = v
    for i in range(nm):
        for j in range(nm):
            v = a22n[i, j]
            if comm_on and v > 0.0 and ch22[i, j] >= 0:
                k = ch22[i, j]
                v += _wave(ckind[k], camp[k], cfreq[k], cphase[k], t)
            sa22[i, j] = v
        for j in range(m):
            v = a21n[i, j]
            if comm_on and v > 0.0 and ch21[i, j] >= 0:
                k = ch21[i, j]
                v += _wave(ckind[k], camp[k], cfreq[k], cphase[k], t)
            sa21[i, j] = v


@njit(cache=True)
def _eval_actuator(t, act_on, aamp, afreq, akind, aphase, out):
    big_n = aamp.shape[0]
    p = aamp.shape[1]
    for i in range(big_n):
        for j in range(p):
            if act_on:
                out[i, j] = _wave(akind[i, j], aamp[i, j], afreq[i, j],
                                  aphase[i, j], t)
            else:
                out[i, j] = 0.0


@njit(cache=True)
def _mat_vec_colstack(ahv, z, out):
    # out = mat(ahv) @ z with column-stacked ahv
    n0 = z.shape[0]
    for r in range(n0):
        acc = 0.0
        for c in range(n0):
            acc += ahv[c * n0 + r] * z[c]
        out[r] = acc


@njit(cache=True)
def _tail(tp, fam, t):
    slow = tp[TP_TAU] * np.exp(-tp[TP_DELTA] / (tp[TP_SIGMA] + t))
    if fam == 2:
        fast = tp[TP_TAUH]
    else:
        fast = tp[TP_TAUH] / (tp[TP_SIGMAH] + t)
    return slow + fast


@njit(cache=True)
def _quad(h, v):
    dim = v.shape[0]
    acc = 0.0
    for r in range(dim):
        hv = 0.0
        for c in range(dim):
            hv += h[r, c] * v[c]
        acc += v[r] * hv
    return acc


@njit(cache=True)
def _rhs(t, y, dy,
         m, nm, n, p, n0, crm_flag,
         a0, ar,
         ag, bg, cg, t1g, t2g, xgg, m3g, wgg, n11g, n12g, n3g, n4g,
         m11m12, m11m1, m11m13, m21m22, m21m23, phi2g, kg, direct_mask,
         sg0, sgl,
         psi1, cross1, psi2b, cross2, dah_frozen,
         q1e, q1p, q2e, q2p, q3e, q3p,
         tp1, tp2, tp3,
         ua):
    big_n = m + nm
    o_x0 = 0
    o_x = o_x0 + n0
    o_xh = o_x + big_n * n
    o_uh = o_xh + big_n * n
    o_z1 = o_uh + big_n * p
    o_z2 = o_z1 + m * n0
    o_ah = o_z2 + nm * n0
    o_p1 = o_ah + nm * n0 * n0
    o_p2 = o_p1 + m
    o_p3 = o_p2 + nm

    x0 = y[o_x0:o_x]
    xs = y[o_x:o_xh].reshape(big_n, n)
    xhs = y[o_xh:o_uh].reshape(big_n, n)
    uhs = y[o_uh:o_z1].reshape(big_n, p)
    z1 = y[o_z1:o_z2].reshape(m, n0)
    z2 = y[o_z2:o_ah].reshape(nm, n0)
    ah = y[o_ah:o_p1].reshape(nm, n0 * n0)
    p1 = y[o_p1:o_p2]
    p2v = y[o_p2:o_p3]
    p3v = y[o_p3:]

    dy[:] = 0.0
    dx0 = dy[o_x0:o_x]
    dxs = dy[o_x:o_xh].reshape(big_n, n)
    dxhs = dy[o_xh:o_uh].reshape(big_n, n)
    duhs = dy[o_uh:o_z1].reshape(big_n, p)
    dz1 = dy[o_z1:o_z2].reshape(m, n0)
    dz2 = dy[o_z2:o_ah].reshape(nm, n0)
    dah = dy[o_ah:o_p1].reshape(nm, n0 * n0)
    dp1 = dy[o_p1:o_p2]
    dp2 = dy[o_p2:o_p3]
    dp3 = dy[o_p3:]

    u = np.empty(p)
    tmp_n = np.empty(n)
    tmp_n0 = np.empty(n0)

    # leader
    for r in range(n0):
        acc = 0.0
        for c in range(n0):
            acc += a0[r, c] * x0[c]
        dx0[r] = acc
    if crm_flag == 1:
        for i in range(m):
            if direct_mask[i] == 1:
                # tmp_n = x_i - X_i x0
                for r in range(n):
                    acc = xs[i, r]
                    for c in range(n0):
                        acc -= xgg[i, r, c] * x0[c]
                    tmp_n[r] = acc
                for r in range(n0):
                    acc = 0.0
                    for c in range(n):
                        acc += kg[i, r, c] * tmp_n[c]
                    dx0[r] += sgl[i] * acc

    # followers
    for gi in range(big_n):
        in_g1 = gi < m
        li = gi if in_g1 else gi - m
        if in_g1:
            zeta = z1[li]
        else:
            zeta = z2[li]
        # u = -uh + T1 xh + T2 zeta + M3 (xh - X zeta) + N3 psi + [N4 (zeta - x0)]
        for r in range(n):
            acc = 0.0
            for c in range(n0):
                acc += xgg[gi, r, c] * zeta[c]
            tmp_n[r] = xhs[gi, r] - acc
        for r in range(p):
            acc = -uhs[gi, r]
            for c in range(n):
                acc += t1g[gi, r, c] * xhs[gi, c] + m3g[gi, r, c] * tmp_n[c]
            for c in range(n0):
                acc += t2g[gi, r, c] * zeta[c]
                if in_g1:
                    acc += n3g[gi, r, c] * psi1[li, c] \
                        + n4g[gi, r, c] * (zeta[c] - x0[c])
                else:
                    acc += n3g[gi, r, c] * psi2b[li, c]
            u[r] = acc
        # plant and observers
        for r in range(n):
            accx = 0.0
            accxh = 0.0
            for c in range(n):
                accx += ag[gi, r, c] * xs[gi, c]
                accxh += ag[gi, r, c] * xhs[gi, c] \
                    + wgg[gi, r, c] * (xs[gi, c] - xhs[gi, c])
            for c in range(p):
                accx += bg[gi, r, c] * (u[c] + ua[gi, c])
                accxh += bg[gi, r, c] * (u[c] + uhs[gi, c])
            dxs[gi, r] = accx
            dxhs[gi, r] = accxh
        for r in range(p):
            acc = 0.0
            for c in range(p):
                acc -= n11g[gi, r, c] * uhs[gi, c]
            for c in range(n):
                acc += n12g[gi, r, c] * (xs[gi, c] - xhs[gi, c])
            duhs[gi, r] = acc
        # leader observers
        if in_g1:
            for r in range(n0):
                acc = 0.0
                for c in range(n0):
                    acc += a0[r, c] * zeta[c] \
                        + m11m12[li, r, c] * psi1[li, c] \
                        + sg0[li] * m11m1[li, r, c] * (x0[c] - zeta[c]) \
                        + m11m13[li, r, c] * cross1[li, c]
                dz1[li, r] = acc
        else:
            _mat_vec_colstack(ah[li], zeta, tmp_n0)
            for r in range(n0):
                acc = tmp_n0[r]
                for c in range(n0):
                    acc += m21m22[li, r, c] * psi2b[li, c] \
                        + m21m23[li, r, c] * cross2[li, c]
                dz2[li, r] = acc
            for r in range(n0 * n0):
                dah[li, r] = dah_frozen[li, r]

    # thresholds: frozen quadratic terms, live decay and tails
    for i in range(m):
        dp1[i] = -tp1[TP_BETA] * p1[i] - q1e[i] + q1p[i] + _tail(tp1, 1, t)
    for j in range(nm):
        dp2[j] = -tp2[TP_BETA] * p2v[j] - q2e[j] + q2p[j] + _tail(tp2, 2, t)
        dp3[j] = -tp3[TP_BETA] * p3v[j] - q3e[j] + q3p[j] + _tail(tp3, 3, t)


@njit(cache=True)
def _frozen_terms(m, nm, n0,
                  sa11, sa22, sa12, sa21, sgl, sd1,
                  z1, z2, ah, z1b, z2b, ahb, ar, phi2g,
                  h1, h3, tp1, tp2, tp3,
                  psi1, cross1, psi2b, cross2, dah_frozen,
                  q1e, q1p, q2e, q2p, q3e, q3p):
    """Broadcast-dependent sums and trigger measurement terms at step start."""
    nsq = n0 * n0
    ev = np.empty(n0)
    ev2 = np.empty(nsq)
    for i in range(m):
        for r in range(n0):
            acc1 = 0.0
            accc = 0.0
            for j in range(m):
                acc1 += sa11[i, j] * (z1b[j, r] - z1b[i, r])
            for j in range(nm):
                accc += sa12[i, j] * (z2b[j, r] - z1b[i, r])
            psi1[i, r] = acc1
            cross1[i, r] = accc
        for r in range(n0):
            ev[r] = z1b[i, r] - z1[i, r]
        q1e[i] = tp1[TP_GAMMA] * _quad(h1, ev)
        acc = 0.0
        for r in range(n0):
            acc += psi1[i, r] * psi1[i, r]
        # family-1 disagreement weight is the perturbed in-degree
        q1p[i] = acc * sd1[i]
    for i in range(nm):
        for r in range(n0):
            acc2 = 0.0
            accc = 0.0
            for j in range(nm):
                acc2 += sa22[i, j] * (z2b[j, r] - z2b[i, r])
            for j in range(m):
                accc += sa21[i, j] * (z1b[j, r] - z2b[i, r])
            psi2b[i, r] = acc2
            cross2[i, r] = accc
        for r in range(n0):
            ev[r] = z2b[i, r] - z2[i, r]
        q3e[i] = tp3[TP_GAMMA] * _quad(h3, ev)
        acc = 0.0
        for r in range(n0):
            acc += psi2b[i, r] * psi2b[i, r]
        q3p[i] = acc / tp3[TP_THETA]

        w21 = 0.0
        for j in range(m):
            w21 += sa21[i, j]
        accp = 0.0
        acce = 0.0
        for r in range(nsq):
            s = 0.0
            for j in range(nm):
                s += sa22[i, j] * (ahb[j, r] - ahb[i, r])
            s += w21 * (ar[r] - ahb[i, r])
            dah_frozen[i, r] = phi2g[i] * s
            accp += s * s
            e = ah[i, r] - ahb[i, r]
            ev2[r] = e
            acce += e * e
        q2e[i] = tp2[TP_GAMMA] * acce
        q2p[i] = accp / tp2[TP_THETA]


@njit(cache=True)
def run_kernel(n_steps, dt, stride, div_cap, crm_flag, comm_on, act_on,
               t0,
               a0, e_dt, ar, c0,
               ag, bg, cg, t1g, t2g, xgg, m3g, wgg, n11g, n12g, n3g, n4g,
               m11m12, m11m1, m11m13, m21m22, m21m23, phi2g, kg, direct_mask,
               a11n, a22n, a12n, a21n, g0n, gln,
               ch11, ch22, ch12, ch21, chg0, chgl,
               camp, cfreq, ckind, cphase,
               aamp, afreq, akind, aphase,
               tp1, tp2, tp3, h1, h3,
               y, z1b, z2b, ahb, tl1, tl2, tl3,
               rec_t, rec_y, rec_u,
               events):
    """Advance ``n_steps`` fixed steps; returns (status, bad_step, n_events, n_rec).

    ``y`` is the packed state (updated in place); ``rec_y`` stores packed
    state rows at the recording stride, ``rec_u`` the commanded inputs
    recomputed at the recorded instants.  ``events`` rows are
    (agent_id, family, time).
    """
    m = a11n.shape[0]
    nm = a22n.shape[0]
    big_n = m + nm
    n = ag.shape[1]
    p = bg.shape[2]
    n0 = a0.shape[0]
    nsq = n0 * n0
    dim = y.shape[0]

    sa11 = np.empty((m, m))
    sa22 = np.empty((nm, nm))
    sa12 = np.empty((m, nm))
    sa21 = np.empty((nm, m))
    sg0 = np.empty(m)
    sgl = np.empty(m)
    sd1 = np.empty(m)

    psi1 = np.empty((m, n0))
    cross1 = np.empty((m, n0))
    psi2b = np.empty((nm, n0))
    cross2 = np.empty((nm, n0))
    dah_frozen = np.empty((nm, nsq))
    q1e = np.empty(m)
    q1p = np.empty(m)
    q2e = np.empty(nm)
    q2p = np.empty(nm)
    q3e = np.empty(nm)
    q3p = np.empty(nm)

    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    ytmp = np.empty(dim)
    ua = np.empty((big_n, p))
    ev = np.empty(n0)
    evq = np.empty(nsq)
    tmp0 = np.empty(n0)

    o_x0 = 0
    o_x = o_x0 + n0
    o_xh = o_x + big_n * n
    o_uh = o_xh + big_n * n
    o_z1 = o_uh + big_n * p
    o_z2 = o_z1 + m * n0
    o_ah = o_z2 + nm * n0
    o_p1 = o_ah + nm * nsq

    n_events = 0
    n_rec = 0

    _fill_snapshot(t0, comm_on, a11n, a22n, a12n, a21n, g0n, gln,
                   ch11, ch22, ch12, ch21, chg0, chgl,
                   camp, cfreq, ckind, cphase,
                   sa11, sa22, sa12, sa21, sg0, sgl)
    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc += sa11[i, j]
        sd1[i] = acc

    # record the initial sample (post initial fires, which the caller set up)
    rec_t[0] = t0
    for r in range(dim):
        rec_y[0, r] = y[r]
    _record_u(y, rec_u, 0, m, nm, n, p, n0,
              t1g, t2g, xgg, m3g, n3g, n4g, uhsO=o_uh, xhsO=o_xh,
              z1O=o_z1, z2O=o_z2,
              sa11=sa11, sa22=sa22, z1b=z1b, z2b=z2b)
    n_rec = 1

    for step in range(n_steps):
        t = t0 + step * dt
        _frozen_terms(m, nm, n0, sa11, sa22, sa12, sa21, sgl, sd1,
                      y[o_z1:o_z2].reshape(m, n0),
                      y[o_z2:o_ah].reshape(nm, n0),
                      y[o_ah:o_p1].reshape(nm, nsq),
                      z1b, z2b, ahb, ar, phi2g,
                      h1, h3, tp1, tp2, tp3,
                      psi1, cross1, psi2b, cross2, dah_frozen,
                      q1e, q1p, q2e, q2p, q3e, q3p)

        # RK4 stages; actuator faults are smooth signals evaluated per stage
        _eval_actuator(t, act_on, aamp, afreq, akind, aphase, ua)
        _rhs(t, y, k1, m, nm, n, p, n0, crm_flag, a0, ar,
             ag, bg, cg, t1g, t2g, xgg, m3g, wgg, n11g, n12g, n3g, n4g,
             m11m12, m11m1, m11m13, m21m22, m21m23, phi2g, kg, direct_mask,
             sg0, sgl, psi1, cross1, psi2b, cross2, dah_frozen,
             q1e, q1p, q2e, q2p, q3e, q3p, tp1, tp2, tp3, ua)
        _eval_actuator(t + 0.5 * dt, act_on, aamp, afreq, akind, aphase, ua)
        for r in range(dim):
            ytmp[r] = y[r] + 0.5 * dt * k1[r]
        _rhs(t + 0.5 * dt, ytmp, k2, m, nm, n, p, n0, crm_flag, a0, ar,
             ag, bg, cg, t1g, t2g, xgg, m3g, wgg, n11g, n12g, n3g, n4g,
             m11m12, m11m1, m11m13, m21m22, m21m23, phi2g, kg, direct_mask,
             sg0, sgl, psi1, cross1, psi2b, cross2, dah_frozen,
             q1e, q1p, q2e, q2p, q3e, q3p, tp1, tp2, tp3, ua)
        for r in range(dim):
            ytmp[r] = y[r] + 0.5 * dt * k2[r]
        _rhs(t + 0.5 * dt, ytmp, k3, m, nm, n, p, n0, crm_flag, a0, ar,
             ag, bg, cg, t1g, t2g, xgg, m3g, wgg, n11g, n12g, n3g, n4g,
             m11m12, m11m1, m11m13, m21m22, m21m23, phi2g, kg, direct_mask,
             sg0, sgl, psi1, cross1, psi2b, cross2, dah_frozen,
             q1e, q1p, q2e, q2p, q3e, q3p, tp1, tp2, tp3, ua)
        _eval_actuator(t + dt, act_on, aamp, afreq, akind, aphase, ua)
        for r in range(dim):
            ytmp[r] = y[r] + dt * k3[r]
        _rhs(t + dt, ytmp, k4, m, nm, n, p, n0, crm_flag, a0, ar,
             ag, bg, cg, t1g, t2g, xgg, m3g, wgg, n11g, n12g, n3g, n4g,
             m11m12, m11m1, m11m13, m21m22, m21m23, phi2g, kg, direct_mask,
             sg0, sgl, psi1, cross1, psi2b, cross2, dah_frozen,
             q1e, q1p, q2e, q2p, q3e, q3p, tp1, tp2, tp3, ua)
        for r in range(dim):
            y[r] = y[r] + (dt / 6.0) * (k1[r] + 2.0 * k2[r]
                                        + 2.0 * k3[r] + k4[r])

        t_next = t0 + (step + 1) * dt

        # divergence guard
        bad = -1
        for r in range(dim):
            v = y[r]
            if not np.isfinite(v) or abs(v) > div_cap:
                bad = r
                break
        if bad >= 0:
            return STATUS_DIVERGED, step + 1, n_events, n_rec

        # flow the group-1 broadcasts with the leader dynamics
        for i in range(m):
            for r in range(n0):
                acc = 0.0
                for c in range(n0):
                    acc += e_dt[r, c] * z1b[i, c]
                tmp0[r] = acc
            for r in range(n0):
                z1b[i, r] = tmp0[r]

        # refresh the weight snapshot
        _fill_snapshot(t_next, comm_on, a11n, a22n, a12n, a21n, g0n, gln,
                       ch11, ch22, ch12, ch21, chg0, chgl,
                       camp, cfreq, ckind, cphase,
                       sa11, sa22, sa12, sa21, sg0, sgl)
        for i in range(m):
            acc = 0.0
            for j in range(m):
                acc += sa11[i, j]
            sd1[i] = acc

        # trigger predicates against pre-commit broadcasts, then ordered commits
        z1 = y[o_z1:o_z2].reshape(m, n0)
        z2 = y[o_z2:o_ah].reshape(nm, n0)
        ahs = y[o_ah:o_p1].reshape(nm, nsq)
        phi1 = y[o_p1:o_p1 + m]
        phi2v = y[o_p1 + m:o_p1 + m + nm]
        phi3v = y[o_p1 + m + nm:o_p1 + m + 2 * nm]

        fire1 = np.zeros(m, dtype=np.int64)
        fire2 = np.zeros(nm, dtype=np.int64)
        fire3 = np.zeros(nm, dtype=np.int64)

        tail1 = _tail(tp1, 1, t_next)
        tail2 = _tail(tp2, 2, t_next)
        tail3 = _tail(tp3, 3, t_next)

        for i in range(m):
            for r in range(n0):
                ev[r] = z1b[i, r] - z1[i, r]
            eq = _quad(h1, ev)
            acc = 0.0
            for r in range(n0):
                s = 0.0
                for j in range(m):
                    s += sa11[i, j] * (z1b[j, r] - z1b[i, r])
                acc += s * s
            lhs = tp1[TP_OMEGA] * (tp1[TP_GAMMA] * eq - sd1[i] * acc - tail1)
            if lhs >= phi1[i]:
                fire1[i] = 1
        for i in range(nm):
            acce = 0.0
            accp = 0.0
            w21 = 0.0
            for j in range(m):
                w21 += sa21[i, j]
            for r in range(nsq):
                e = ahs[i, r] - ahb[i, r]
                acce += e * e
                s = 0.0
                for j in range(nm):
                    s += sa22[i, j] * (ahb[j, r] - ahb[i, r])
                s += w21 * (ar[r] - ahb[i, r])
                accp += s * s
            lhs = tp2[TP_OMEGA] * (tp2[TP_GAMMA] * acce
                                   - accp / tp2[TP_THETA] - tail2)
            if lhs >= phi2v[i]:
                fire2[i] = 1

            for r in range(n0):
                ev[r] = z2b[i, r] - z2[i, r]
            eq = _quad(h3, ev)
            acc = 0.0
            for r in range(n0):
                s = 0.0
                for j in range(nm):
                    s += sa22[i, j] * (z2b[j, r] - z2b[i, r])
                acc += s * s
            lhs = tp3[TP_OMEGA] * (tp3[TP_GAMMA] * eq
                                   - acc / tp3[TP_THETA] - tail3)
            if lhs >= phi3v[i]:
                fire3[i] = 1

        for i in range(m):
            if fire1[i] == 1:
                for r in range(n0):
                    z1b[i, r] = z1[i, r]
                tl1[i] = t_next
                events[n_events, 0] = i + 1
                events[n_events, 1] = 1
                events[n_events, 2] = t_next
                n_events += 1
        for i in range(nm):
            if fire2[i] == 1:
                for r in range(nsq):
                    ahb[i, r] = ahs[i, r]
                tl2[i] = t_next
                events[n_events, 0] = m + i + 1
                events[n_events, 1] = 2
                events[n_events, 2] = t_next
                n_events += 1
        for i in range(nm):
            if fire3[i] == 1:
                for r in range(n0):
                    z2b[i, r] = z2[i, r]
                tl3[i] = t_next
                events[n_events, 0] = m + i + 1
                events[n_events, 1] = 3
                events[n_events, 2] = t_next
                n_events += 1

        if (step + 1) % stride == 0:
            idx = (step + 1) // stride
            rec_t[idx] = t_next
            for r in range(dim):
                rec_y[idx, r] = y[r]
            _record_u(y, rec_u, idx, m, nm, n, p, n0,
                      t1g, t2g, xgg, m3g, n3g, n4g, uhsO=o_uh, xhsO=o_xh,
                      z1O=o_z1, z2O=o_z2,
                      sa11=sa11, sa22=sa22, z1b=z1b, z2b=z2b)
            n_rec = idx + 1

    return STATUS_OK, n_steps, n_events, n_rec


@njit(cache=True)
def _record_u(y, rec_u, idx, m, nm, n, p, n0,
              t1g, t2g, xgg, m3g, n3g, n4g, uhsO, xhsO, z1O, z2O,
              sa11, sa22, z1b, z2b):
    """Commanded input at a recorded instant, with current broadcasts."""
    big_n = m + nm
    x0 = y[0:n0]
    for gi in range(big_n):
        in_g1 = gi < m
        li = gi if in_g1 else gi - m
        if in_g1:
            zeta = y[z1O + li * n0:z1O + (li + 1) * n0]
        else:
            zeta = y[z2O + li * n0:z2O + (li + 1) * n0]
        for r in range(p):
            acc = -y[uhsO + gi * p + r]
            for c in range(n):
                xh_c = y[xhsO + gi * n + c]
                xz = 0.0
                for c2 in range(n0):
                    xz += xgg[gi, c, c2] * zeta[c2]
                acc += t1g[gi, r, c] * xh_c + m3g[gi, r, c] * (xh_c - xz)
            for c in range(n0):
                acc += t2g[gi, r, c] * zeta[c]
                if in_g1:
                    s = 0.0
                    for j in range(m):
                        s += sa11[li, j] * (z1b[j, c] - z1b[li, c])
                    acc += n3g[gi, r, c] * s + n4g[gi, r, c] * (zeta[c] - x0[c])
                else:
                    s = 0.0
                    for j in range(nm):
                        s += sa22[li, j] * (z2b[j, c] - z2b[li, c])
                    acc += n3g[gi, r, c] * s
            rec_u[idx, gi, r] = acc

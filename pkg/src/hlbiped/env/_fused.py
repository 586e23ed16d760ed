"""Compiled high-level tick: gait generation, FL tracking, dynamics and impacts fused.

Mirrors ``GaitGenerator`` + ``fl_controller`` + ``rigid_body.step`` tick for
tick (semi-implicit Euler with manifold projection). The Python path stays
the reference; tests check the two agree.
"""

import math

import numpy as np
from numba import njit

from ..rigid_body import _kernels as K
from ..gait import MIN_STEP_X

OK = 0
SINGULAR_CONSTRAINT = 1
DECOUPLING_SINGULAR = 2
IMPACT_INFEASIBLE = 3
NON_FINITE = 4


@njit(cache=True)
def _min_jerk(p0, pT, tau, T):
    tau = min(max(tau, 0.0), 1.0)
    t2 = tau * tau
    s = t2 * tau * (10.0 - 15.0 * tau + 6.0 * t2)
    ds = 30.0 * t2 * (1.0 - tau) ** 2
    dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau)
    d = pT - p0
    return p0 + s * d, ds * d / T, dds * d / (T * T)


@njit(cache=True)
def _bezier5(b0, b1, b2, b3, b4, b5, tau, T):
    tau = min(max(tau, 0.0), 1.0)
    u = 1.0 - tau
    pos = (u**5 * b0 + 5.0 * tau * u**4 * b1 + 10.0 * tau**2 * u**3 * b2
           + 10.0 * tau**3 * u**2 * b3 + 5.0 * tau**4 * u * b4 + tau**5 * b5)
    d0 = 5.0 * (b1 - b0)
    d1 = 5.0 * (b2 - b1)
    d2 = 5.0 * (b3 - b2)
    d3 = 5.0 * (b4 - b3)
    d4 = 5.0 * (b5 - b4)
    vel = (u**4 * d0 + 4.0 * tau * u**3 * d1 + 6.0 * tau**2 * u**2 * d2
           + 4.0 * tau**3 * u * d3 + tau**4 * d4)
    e0 = 4.0 * (d1 - d0)
    e1 = 4.0 * (d2 - d1)
    e2 = 4.0 * (d3 - d2)
    e3 = 4.0 * (d4 - d3)
    acc = u**3 * e0 + 3.0 * tau * u**2 * e1 + 3.0 * tau**2 * u * e2 + tau**3 * e3
    return pos, vel / T, acc / (T * T)


@njit(cache=True)
def desired(cmd, p0, t_step, H0, alpha, T, zc, reach, descent, zoff, nout):
    """Same construction as ``gait.desired_outputs`` (reach < 0 disables the clip)."""
    px = cmd[0]
    hd = cmd[2]
    ta = math.tan(alpha)
    if reach >= 0.0:
        dz = H0 + hd + zoff - px * ta
        xm = math.sqrt(max(reach * reach - dz * dz, MIN_STEP_X * MIN_STEP_X))
        px = min(max(px, -xm), xm)
    zT = -hd + px * ta - zoff
    tau = t_step / T
    y = np.zeros(nout)
    yd = np.zeros(nout)
    ydd = np.zeros(nout)
    y[0] = cmd[1]
    y[1] = H0 + hd
    y[2], yd[2], ydd[2] = _min_jerk(p0[0], px, tau, T)
    mid = (32.0 * zc - 6.0 * (p0[1] + zT)) / 20.0
    y[3], yd[3], ydd[3] = _bezier5(p0[1], p0[1], mid, mid, zT, zT, tau, T)
    if tau > 1.0:
        y[3] -= descent * (t_step - T)
        yd[3] = -descent
        ydd[3] = 0.0
    if nout == 5:
        y[4] = -alpha
    return y, yd, ydd


@njit(cache=True)
def outputs(q, qd, feet, st, sw, H0, nout, parent, coord, o, vo, phi, om):
    """Actual outputs, Jacobian and drift; ``feet`` rows are (link, sole x, sole z)."""
    n = q.shape[0]
    ps, vs, Js, jds = K.point_kin(int(feet[st, 0]), feet[st, 1], feet[st, 2], n,
                                  parent, coord, o, vo, phi, om)
    pw, vw, Jw, jdw = K.point_kin(int(feet[sw, 0]), feet[sw, 1], feet[sw, 2], n,
                                  parent, coord, o, vo, phi, om)
    ya = np.zeros(nout)
    Jy = np.zeros((nout, n))
    dr = np.zeros(nout)
    ya[0] = q[2]
    Jy[0, 2] = 1.0
    ya[1] = q[1] - ps[1]
    Jy[1] = -Js[1]
    Jy[1, 1] += 1.0
    dr[1] = -jds[1]
    ya[2] = pw[0] - q[0]
    Jy[2] = Jw[0]
    Jy[2, 0] -= 1.0
    dr[2] = jdw[0]
    ya[3] = pw[1] - q[1] + H0
    Jy[3] = Jw[1]
    Jy[3, 1] -= 1.0
    dr[3] = jdw[1]
    if nout == 5:
        link = int(feet[sw, 0])
        ya[4] = phi[link]
        Jy[4] = K.angle_row(link, n, parent, coord)
    return ya, Jy, dr


@njit(cache=True)
def chol(A):
    """Lower Cholesky factor and the smallest pivot (<= 0 when not positive definite)."""
    n = A.shape[0]
    L = np.zeros((n, n))
    piv = np.inf
    for j in range(n):
        d = A[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        piv = min(piv, d)
        if d <= 0.0:
            return L, d
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            v = A[i, j]
            for k in range(j):
                v -= L[i, k] * L[j, k]
            L[i, j] = v / L[j, j]
    return L, piv


@njit(cache=True)
def chol_solve(L, B):
    """Solve (L L^T) X = B for a 2-D right-hand side."""
    n, m = B.shape
    X = B.copy()
    for c in range(m):
        for i in range(n):
            v = X[i, c]
            for k in range(i):
                v -= L[i, k] * X[k, c]
            X[i, c] = v / L[i, i]
        for i in range(n - 1, -1, -1):
            v = X[i, c]
            for k in range(i + 1, n):
                v -= L[k, i] * X[k, c]
            X[i, c] = v / L[i, i]
    return X


@njit(cache=True)
def affine(q, qd, rows, nact, extra, parent, coord, offset, com, mass, inertia, gravity):
    """Constrained ``qdd = a0 + A_u u`` (``extra`` is an added generalized force).

    Returns (a0, A_u, ok); ok is False when the contact Schur complement is
    rank deficient.
    """
    n = q.shape[0]
    M, Hb = K.mass_bias(q, qd, parent, coord, offset, com, mass, inertia, gravity)
    _, J, jd = K.constraint_rows(q, qd, rows, parent, coord, offset)
    c = J.shape[0]
    Lm, _ = chol(M)
    rhs = np.zeros((n, c + nact + 1))
    for i in range(n):
        for r in range(c):
            rhs[i, r] = J[r, i]
        rhs[i, c + nact] = extra[i] - Hb[i]
    for i in range(nact):
        rhs[3 + i, c + i] = 1.0
    X = chol_solve(Lm, rhs)
    MinvJT = np.ascontiguousarray(X[:, :c])
    Xr = np.ascontiguousarray(X[:, c:])
    S = J @ MinvJT
    Ls, piv = chol(S)
    smax = 0.0
    for i in range(c):
        smax = max(smax, S[i, i])
    if piv <= 1e-10 * max(1.0, smax):
        return np.zeros(n), np.zeros((n, nact)), False
    # project every column onto the constraint: x - M^-1 J^T S^-1 (J x + rhs_bot)
    JX = J @ Xr
    for r in range(c):
        JX[r, nact] += jd[r]
    Y = Xr - MinvJT @ chol_solve(Ls, JX)
    return Y[:, nact].copy(), Y[:, :nact].copy(), True


@njit(cache=True)
def fl_from_affine(q, qd, a0, A_u, feet, st, sw, yd, ydd_d, yddd, Kp, Kd, H0, nout, nact,
                   tlim, parent, coord, offset):
    """FL torques (clamped) given the constrained affine map, and a status code."""
    o, vo, phi, om = K.frames(q, qd, parent, coord, offset)
    ya, Jy, dr = outputs(q, qd, feet, st, sw, H0, nout, parent, coord, o, vo, phi, om)
    y = ya - yd
    ydot = Jy @ qd - ydd_d
    v = yddd - Kp * y - Kd * ydot
    A = Jy @ A_u
    b = v - Jy @ a0 - dr
    ev = np.linalg.eigvalsh(A @ A.T)
    if ev[0] <= 0.0 or math.sqrt(ev[-1] / ev[0]) > 1e8:
        return np.zeros(nact), DECOUPLING_SINGULAR
    if nout == nact:
        u = np.linalg.solve(A, b)
    else:
        u = A.T @ np.linalg.solve(A @ A.T, b)
    for i in range(nact):
        u[i] = min(max(u[i], -tlim[i]), tlim[i])
    return u, OK


@njit(cache=True)
def fl_torques(q, qd, rows, feet, st, sw, yd, ydd_d, yddd, Kp, Kd, H0, nout, nact,
               tlim, parent, coord, offset, com, mass, inertia, gravity):
    a0, A_u, ok = affine(q, qd, rows, nact, np.zeros(q.shape[0]), parent, coord, offset, com,
                         mass, inertia, gravity)
    if not ok:
        return np.zeros(nact), SINGULAR_CONSTRAINT
    return fl_from_affine(q, qd, a0, A_u, feet, st, sw, yd, ydd_d, yddd, Kp, Kd, H0, nout, nact,
                          tlim, parent, coord, offset)


@njit(cache=True)
def project(q1, qd1, rows, ref, parent, coord, offset, com, mass, inertia, gravity):
    """One Newton step onto the contact manifold, then M-weighted velocity projection."""
    M, _ = K.mass_bias(q1, qd1, parent, coord, offset, com, mass, inertia, gravity)
    Lm, _ = chol(M)
    pos, J, _ = K.constraint_rows(q1, qd1, rows, parent, coord, offset)
    MinvJT = chol_solve(Lm, np.ascontiguousarray(J.T))
    Ls, _ = chol(J @ MinvJT)
    e = (ref - pos).reshape(-1, 1)
    q1 = q1 + (MinvJT @ chol_solve(Ls, e))[:, 0]
    _, J, _ = K.constraint_rows(q1, qd1, rows, parent, coord, offset)
    MinvJT = chol_solve(Lm, np.ascontiguousarray(J.T))
    Ls, _ = chol(J @ MinvJT)
    qd1 = qd1 - (MinvJT @ chol_solve(Ls, (J @ qd1).reshape(-1, 1)))[:, 0]
    return q1, qd1


@njit(cache=True)
def run_ticks(q, qd, st, t_step, ref, cpt, p0, cmd, target, slew,
              n_ticks, dt, min_swing, T, zc, reach, descent, zoff, H0, alpha,
              Kp, Kd, force_x, nout, nact, tlim, rows_all, feet, ground, thr,
              parent, coord, offset, com, mass, inertia, gravity):
    """Advance ``n_ticks`` LL ticks in place.

    ``rows_all`` is (2, c, 4) contact rows per leg, ``feet`` (2, 3) sole
    points, ``ground`` (2, k, 3) terrain-check points, ``force_x`` the torso
    push per tick. Returns (status, per-tick base vx, per-tick touchdown flag,
    touchdown records, stance, t_step); a touchdown record holds the step
    duration, the momentum about the old contact just before impact, and
    the CoM position and momentum relative to the new contact just after.
    """
    n = q.shape[0]
    vx = np.zeros(n_ticks)
    td = np.zeros(n_ticks, dtype=np.bool_)
    tdi = np.zeros((n_ticks, 4))
    ta = math.tan(alpha)
    torso_c = com[0]
    for k in range(n_ticks):
        for i in range(3):
            lim = slew[i] * dt
            cmd[i] += min(max(target[i] - cmd[i], -lim), lim)
        sw = 1 - st
        yd, ydd_d, yddd = desired(cmd, p0, t_step, H0, alpha, T, zc, reach, descent, zoff, nout)
        rows = rows_all[st]
        ext = np.zeros(n)
        if force_x[k] != 0.0:
            o, vo, phi, om = K.frames(q, np.zeros(n), parent, coord, offset)
            _, _, Jt, _ = K.point_kin(0, torso_c[0], torso_c[1], n, parent, coord, o, vo, phi, om)
            ext = Jt[0] * force_x[k]
        a0, A_u, ok = affine(q, qd, rows, nact, ext, parent, coord, offset, com, mass, inertia,
                             gravity)
        if not ok:
            return SINGULAR_CONSTRAINT, vx, td, tdi, st, t_step
        if force_x[k] != 0.0:
            # the tracker does not know about the push
            a0c, A_uc, ok = affine(q, qd, rows, nact, np.zeros(n), parent, coord, offset, com,
                                   mass, inertia, gravity)
        else:
            a0c = a0
            A_uc = A_u
        u, status = fl_from_affine(q, qd, a0c, A_uc, feet, st, sw, yd, ydd_d, yddd, Kp, Kd, H0,
                                   nout, nact, tlim, parent, coord, offset)
        if status != OK:
            return status, vx, td, tdi, st, t_step
        qdd = a0 + A_u @ u
        qd1 = qd + dt * qdd
        q1 = q + dt * qd1
        q1, qd1 = project(q1, qd1, rows, ref, parent, coord, offset, com, mass, inertia, gravity)
        t_step += dt
        for i in range(n):
            if not (math.isfinite(q1[i]) and math.isfinite(qd1[i])):
                return NON_FINITE, vx, td, tdi, st, t_step
        q[:] = q1
        qd[:] = qd1
        if t_step >= min_swing:
            o, vo, phi, om = K.frames(q, qd, parent, coord, offset)
            hit = False
            for j in range(ground.shape[1]):
                p, v, _, _ = K.point_kin(int(ground[sw, j, 0]), ground[sw, j, 1], ground[sw, j, 2],
                                         n, parent, coord, o, vo, phi, om)
                if p[1] <= ta * p[0] + thr and v[1] < 0.0:
                    hit = True
            if hit:
                Mi, _ = K.mass_bias(q, qd, parent, coord, offset, com, mass, inertia, gravity)
                nrows = rows_all[sw]
                _, Jn, _ = K.constraint_rows(q, qd, nrows, parent, coord, offset)
                qdp, imp, ok = K.kkt_solve(Mi, Jn, Mi @ qd, np.zeros(Jn.shape[0]))
                if not ok:
                    return SINGULAR_CONSTRAINT, vx, td, tdi, st, t_step
                vert = 0.0
                for r in range(nrows.shape[0]):
                    if nrows[r, 3] == 1.0:
                        vert += imp[r]
                if vert < 0.0:
                    return IMPACT_INFEASIBLE, vx, td, tdi, st, t_step
                tdi[k, 0] = t_step
                tdi[k, 1] = K.momentum(q, qd, cpt[0], cpt[1], parent, coord, offset, com, mass,
                                       inertia)
                qd[:] = qdp
                pos, _, _ = K.constraint_rows(q, qd, nrows, parent, coord, offset)
                ref[:] = pos
                o, vo, phi, om = K.frames(q, qd, parent, coord, offset)
                ps, _, _, _ = K.point_kin(int(feet[sw, 0]), feet[sw, 1], feet[sw, 2], n,
                                          parent, coord, o, vo, phi, om)
                cpt[0] = ps[0]
                cpt[1] = ps[1]
                pc, _ = K.com_kin(q, qd, parent, coord, offset, com, mass)
                tdi[k, 2] = pc[0] - cpt[0]
                tdi[k, 3] = K.momentum(q, qd, cpt[0], cpt[1], parent, coord, offset, com, mass,
                                       inertia)
                st = sw
                t_step = 0.0
                td[k] = True
                # new swing start point in output coordinates
                pw, _, _, _ = K.point_kin(int(feet[1 - st, 0]), feet[1 - st, 1], feet[1 - st, 2],
                                          n, parent, coord, o, vo, phi, om)
                p0[0] = pw[0] - q[0]
                p0[1] = pw[1] - q[1] + H0
        vx[k] = qd[0]
    return OK, vx, td, tdi, st, t_step

"""Compiled kinematics/dynamics kernels for planar floating-base trees.

Conventions (shared by every module of the package):

* world frame is x forward, z up; rotations are about +y, so a positive
  angle tilts a link's "up" axis toward +x (torso leans forward) and swings
  a hanging link's tip toward -x.
* ``q = [x, z, pitch, joint_1, ..., joint_k]`` where (x, z) is the hip/base
  point and pitch is the absolute torso angle. Link absolute angles are the
  sum of coordinates along the chain to the root.
* a point with body-frame offset ``c`` on a link with origin ``o`` and
  absolute angle ``phi`` sits at ``o + R(phi) c`` with
  ``R(phi) c = (cx cos phi + cz sin phi, -cx sin phi + cz cos phi)``.
* for a planar rotation rate ``w`` the velocity of ``r`` is ``w * perp(r)``
  with ``perp(r) = (r_z, -r_x)``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def rot(phi, cx, cz):
    c = np.cos(phi)
    s = np.sin(phi)
    return cx * c + cz * s, -cx * s + cz * c


@njit(cache=True)
def frames(q, qd, parent, coord, offset):
    """Link origins, absolute angles, angular rates and origin velocities."""
    nl = parent.shape[0]
    o = np.empty((nl, 2))
    vo = np.empty((nl, 2))
    phi = np.empty(nl)
    om = np.empty(nl)
    for i in range(nl):
        p = parent[i]
        if p < 0:
            o[i, 0] = q[0] + offset[i, 0]
            o[i, 1] = q[1] + offset[i, 1]
            vo[i, 0] = qd[0]
            vo[i, 1] = qd[1]
            phi[i] = q[coord[i]]
            om[i] = qd[coord[i]]
        else:
            dx, dz = rot(phi[p], offset[i, 0], offset[i, 1])
            o[i, 0] = o[p, 0] + dx
            o[i, 1] = o[p, 1] + dz
            vo[i, 0] = vo[p, 0] + om[p] * dz
            vo[i, 1] = vo[p, 1] - om[p] * dx
            phi[i] = phi[p] + q[coord[i]]
            om[i] = om[p] + qd[coord[i]]
    return o, vo, phi, om


@njit(cache=True)
def point_kin(link, cx, cz, n, parent, coord, o, vo, phi, om):
    """Position, velocity, Jacobian (2 x n) and drift term Jdot*qd of a body point."""
    dx, dz = rot(phi[link], cx, cz)
    p = np.empty(2)
    p[0] = o[link, 0] + dx
    p[1] = o[link, 1] + dz
    v = np.empty(2)
    v[0] = vo[link, 0] + om[link] * dz
    v[1] = vo[link, 1] - om[link] * dx
    J = np.zeros((2, n))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    jd = np.zeros(2)
    curx = p[0]
    curz = p[1]
    k = link
    while k >= 0:
        rx = p[0] - o[k, 0]
        rz = p[1] - o[k, 1]
        J[0, coord[k]] += rz
        J[1, coord[k]] -= rx
        w2 = om[k] * om[k]
        jd[0] -= w2 * (curx - o[k, 0])
        jd[1] -= w2 * (curz - o[k, 1])
        curx = o[k, 0]
        curz = o[k, 1]
        k = parent[k]
    return p, v, J, jd


@njit(cache=True)
def angle_row(link, n, parent, coord):
    """Jacobian row of a link's absolute angle."""
    row = np.zeros(n)
    k = link
    while k >= 0:
        row[coord[k]] += 1.0
        k = parent[k]
    return row


@njit(cache=True)
def mass_bias(q, qd, parent, coord, offset, com, mass, inertia, gravity):
    """Mass matrix M(q) and bias vector H(q, qd) = C(q, qd) qd + G(q)."""
    n = q.shape[0]
    nl = parent.shape[0]
    o, vo, phi, om = frames(q, qd, parent, coord, offset)
    M = np.zeros((n, n))
    H = np.zeros(n)
    for i in range(nl):
        p, v, J, jd = point_kin(i, com[i, 0], com[i, 1], n, parent, coord, o, vo, phi, om)
        m = mass[i]
        M += m * (J.T @ J)
        w = angle_row(i, n, parent, coord)
        M += inertia[i] * np.outer(w, w)
        H += m * (J.T @ jd)
        H += m * gravity * J[1]
    return M, H


@njit(cache=True)
def energy(q, qd, parent, coord, offset, com, mass, inertia, gravity):
    n = q.shape[0]
    o, vo, phi, om = frames(q, qd, parent, coord, offset)
    ke = 0.0
    pe = 0.0
    for i in range(parent.shape[0]):
        p, v, J, jd = point_kin(i, com[i, 0], com[i, 1], n, parent, coord, o, vo, phi, om)
        ke += 0.5 * mass[i] * (v[0] * v[0] + v[1] * v[1]) + 0.5 * inertia[i] * om[i] * om[i]
        pe += mass[i] * gravity * p[1]
    return ke, pe


@njit(cache=True)
def momentum(q, qd, ax, az, parent, coord, offset, com, mass, inertia):
    """Planar angular momentum L^y about the world point (ax, az)."""
    n = q.shape[0]
    o, vo, phi, om = frames(q, qd, parent, coord, offset)
    L = 0.0
    for i in range(parent.shape[0]):
        p, v, J, jd = point_kin(i, com[i, 0], com[i, 1], n, parent, coord, o, vo, phi, om)
        L += mass[i] * ((p[1] - az) * v[0] - (p[0] - ax) * v[1]) + inertia[i] * om[i]
    return L


@njit(cache=True)
def com_kin(q, qd, parent, coord, offset, com, mass):
    n = q.shape[0]
    o, vo, phi, om = frames(q, qd, parent, coord, offset)
    pc = np.zeros(2)
    vc = np.zeros(2)
    mt = 0.0
    for i in range(parent.shape[0]):
        p, v, J, jd = point_kin(i, com[i, 0], com[i, 1], n, parent, coord, o, vo, phi, om)
        pc += mass[i] * p
        vc += mass[i] * v
        mt += mass[i]
    return pc / mt, vc / mt


@njit(cache=True)
def constraint_rows(q, qd, rows, parent, coord, offset):
    """Stacked constraint positions, Jacobian and drift for contact rows.

    ``rows`` is (c, 4): link, local x, local z, axis (0 = x, 1 = z).
    """
    n = q.shape[0]
    c = rows.shape[0]
    o, vo, phi, om = frames(q, qd, parent, coord, offset)
    pos = np.empty(c)
    J = np.empty((c, n))
    jd = np.empty(c)
    for r in range(c):
        link = int(rows[r, 0])
        ax = int(rows[r, 3])
        p, v, Jp, jdp = point_kin(link, rows[r, 1], rows[r, 2], n, parent, coord, o, vo, phi, om)
        pos[r] = p[ax]
        J[r] = Jp[ax]
        jd[r] = jdp[ax]
    return pos, J, jd


@njit(cache=True)
def kkt_solve(M, J, rhs_top, rhs_bot):
    """Solve [[M, -J^T], [J, 0]] [a; l] = [rhs_top; rhs_bot] via the Schur complement.

    Returns (a, l, ok); ``ok`` is False when J M^-1 J^T is rank deficient
    beyond 1e-10 relative, i.e. the KKT matrix is singular.
    """
    Minv_t = np.linalg.solve(M, rhs_top)
    MinvJT = np.linalg.solve(M, np.ascontiguousarray(J.T))
    S = J @ MinvJT
    ev = np.linalg.eigvalsh(S)
    ok = ev[0] > 1e-10 * max(1.0, ev[-1])
    if not ok:
        return np.zeros(M.shape[0]), np.zeros(J.shape[0]), False
    lam = np.linalg.solve(S, rhs_bot - J @ Minv_t)
    return Minv_t + MinvJT @ lam, lam, True


@njit(cache=True)
def contact_accel(q, qd, tau, rows, parent, coord, offset, com, mass, inertia, gravity):
    """Constrained accelerations for generalized force ``tau`` (already B u + F_ext)."""
    M, H = mass_bias(q, qd, parent, coord, offset, com, mass, inertia, gravity)
    pos, J, jd = constraint_rows(q, qd, rows, parent, coord, offset)
    return kkt_solve(M, J, tau - H, -jd)

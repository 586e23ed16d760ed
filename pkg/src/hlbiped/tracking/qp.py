"""Dense convex QP with equality constraints and variable bounds.

    minimize    1/2 x^T H x + f^T x
    subject to  A_eq x = b_eq,  lb <= x <= ub

Equalities are eliminated with a null-space basis; the bounds become
general inequalities on the reduced variables, which are handled by the
Goldfarb-Idnani dual active-set method (starts from the unconstrained
minimum, so no feasible initial point is needed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class QPInfeasible(RuntimeError):
    pass


@dataclass
class QPResult:
    x: np.ndarray
    status: str  # "optimal" | "max_iterations"
    iterations: int
    active_lower: np.ndarray
    active_upper: np.ndarray
    mult_lower: np.ndarray
    mult_upper: np.ndarray

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _goldfarb_idnani(G, a, C, d, max_iter, tol):
    """min 1/2 w'Gw + a'w  s.t.  C w >= d. Returns (w, active indices, multipliers, iters, ok)."""
    L = np.linalg.cholesky(G)
    Ginv = scipy.linalg.cho_solve((L, True), np.eye(G.shape[0]))
    w = -Ginv @ a
    active: list[int] = []
    u = np.zeros(0)
    it = 0
    while True:
        s = C @ w - d if C.shape[0] else np.zeros(0)
        cand = [i for i in range(C.shape[0]) if i not in active and s[i] < -tol]
        if not cand:
            return w, active, u, it, True
        p = min(cand, key=lambda i: s[i])
        n_p = C[p]
        u_p = 0.0
        while True:
            it += 1
            if it > max_iter:
                return w, active, u, it, False
            if active:
                N = C[active].T
                GN = Ginv @ N
                Nstar = np.linalg.solve(N.T @ GN, GN.T)
                z = Ginv @ n_p - GN @ (Nstar @ n_p)
                r = Nstar @ n_p
            else:
                z = Ginv @ n_p
                r = np.zeros(0)
            t1, k = np.inf, -1
            for j in range(len(active)):
                if r[j] > tol:
                    tj = u[j] / r[j]
                    if tj < t1:
                        t1, k = tj, j
            zn = z @ n_p
            t2 = np.inf if np.linalg.norm(z) <= 1e-14 or zn <= 0 else -(n_p @ w - d[p]) / zn
            if not np.isfinite(t1) and not np.isfinite(t2):
                raise QPInfeasible("bound constraints are inconsistent with the equalities")
            if not np.isfinite(t2):
                u = u - t1 * r
                u_p += t1
                del active[k]
                u = np.delete(u, k)
                continue
            t = min(t1, t2)
            w = w + t * z
            u = u - t * r
            u_p += t
            if t2 <= t1:
                active.append(p)
                u = np.append(u, u_p)
                break
            del active[k]
            u = np.delete(u, k)


def qp_solve(H, f, A_eq=None, b_eq=None, bounds=None, max_iter: int = 200,
             tol: float = 1e-10) -> QPResult:
    """Solve the QP; ``bounds`` is (lb, ub) with +-inf for free variables.

    Raises ValueError if H is not positive definite on the equality null
    space and QPInfeasible if the constraints are inconsistent.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    n = H.shape[0]
    lb, ub = (np.full(n, -np.inf), np.full(n, np.inf)) if bounds is None else (
        np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float))
    if A_eq is not None and np.size(A_eq):
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.asarray(b_eq, dtype=float)
        x_p, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
        if np.linalg.norm(A_eq @ x_p - b_eq) > 1e-8 * (1 + np.linalg.norm(b_eq)):
            raise QPInfeasible("equality constraints are inconsistent")
        Z = scipy.linalg.null_space(A_eq)
    else:
        x_p = np.zeros(n)
        Z = np.eye(n)
    G = Z.T @ H @ Z
    G = 0.5 * (G + G.T)
    a = Z.T @ (H @ x_p + f)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError("H is not positive definite on the equality null space") from None

    rows, rhs, tags = [], [], []
    for i in range(n):
        zi = Z[i]
        fixed = np.linalg.norm(zi) < 1e-12
        for side, bound in ((1.0, lb[i]), (-1.0, ub[i])):
            if not np.isfinite(bound):
                continue
            slack = side * (x_p[i] - bound)
            if fixed:
                if slack < -1e-9:
                    raise QPInfeasible(f"variable {i} fixed by equalities violates its bound")
                continue
            rows.append(side * zi)
            rhs.append(side * bound - side * x_p[i])
            tags.append((i, side))
    C = np.array(rows).reshape(len(rows), Z.shape[1])
    d = np.array(rhs)
    w, active, u, it, ok = _goldfarb_idnani(G, a, C, d, max_iter, tol)
    x = x_p + Z @ w
    act_lo = np.zeros(n, dtype=bool)
    act_hi = np.zeros(n, dtype=bool)
    mu_lo = np.zeros(n)
    mu_hi = np.zeros(n)
    for j, c in enumerate(active):
        i, side = tags[c]
        if side > 0:
            act_lo[i] = True
            mu_lo[i] = u[j]
            x[i] = lb[i]
        else:
            act_hi[i] = True
            mu_hi[i] = u[j]
            x[i] = ub[i]
    return QPResult(x, "optimal" if ok else "max_iterations", it, act_lo, act_hi, mu_lo, mu_hi)


def kkt_residual(H, f, A_eq, b_eq, bounds, res: QPResult) -> float:
    """Max of stationarity, primal feasibility and complementarity residuals."""
    H = np.asarray(H, float)
    g = H @ res.x + np.asarray(f, float) - res.mult_lower + res.mult_upper
    prim = 0.0
    if A_eq is not None and np.size(A_eq):
        y, *_ = np.linalg.lstsq(np.asarray(A_eq).T, g, rcond=None)
        g = g - np.asarray(A_eq).T @ y
        prim = np.abs(np.asarray(A_eq) @ res.x - b_eq).max()
    lb, ub = bounds
    viol = max(np.max(np.maximum(lb - res.x, 0.0)), np.max(np.maximum(res.x - ub, 0.0)))
    return float(max(np.abs(g).max(), prim, viol))

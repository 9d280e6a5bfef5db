"""Pure-NumPy reference implementations of the hot-path kernels.

Semantics match `quadmmpc._core` exactly; this module is the import-time
fallback and the ground truth the compiled kernels are tested against.

Kernels raise plain ``ArithmeticError`` on gimbal proximity so the
calling layer can re-raise domain-specific exceptions without the
backends depending on package internals.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

GIMBAL_EPS = 1e-3
_ZERO_STEP = 1e-11
_FEAS_TOL = 1e-10


def rigid_body_derivative(x, thrust, tau, m, jx, jy, jz, g):
    """Time derivative of the 12-state rigid-body model.

    State layout: position (3), inertial velocity (3), Euler angles
    roll/pitch/yaw (3), body rates (3).  Thrust acts along the body z
    axis; gravity points down the inertial z axis.
    """
    phi, theta, psi = x[6], x[7], x[8]
    p, q, r = x[9], x[10], x[11]
    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    if abs(cth) < np.cos(np.pi / 2 - GIMBAL_EPS):
        raise ArithmeticError("pitch within gimbal guard of +/-pi/2")
    cpsi, spsi = np.cos(psi), np.sin(psi)

    dx = np.empty(12)
    dx[0:3] = x[3:6]
    # translational acceleration: -g + R @ [0, 0, T] / m
    dx[3] = (cphi * sth * cpsi + sphi * spsi) * thrust / m
    dx[4] = (cphi * sth * spsi - sphi * cpsi) * thrust / m
    dx[5] = -g + (cphi * cth) * thrust / m
    # Euler kinematics
    tth = sth / cth
    dx[6] = p + sphi * tth * q + cphi * tth * r
    dx[7] = cphi * q - sphi * r
    dx[8] = (sphi * q + cphi * r) / cth
    # rotational dynamics with diagonal inertia
    dx[9] = ((jy - jz) * q * r + tau[0]) / jx
    dx[10] = ((jz - jx) * p * r + tau[1]) / jy
    dx[11] = ((jx - jy) * p * q + tau[2]) / jz
    return dx


def rk4_step(x, thrust, tau, m, jx, jy, jz, g, dt):
    """One classical Runge-Kutta step with the wrench held constant."""
    x = np.asarray(x, dtype=float)
    k1 = rigid_body_derivative(x, thrust, tau, m, jx, jy, jz, g)
    k2 = rigid_body_derivative(x + 0.5 * dt * k1, thrust, tau, m, jx, jy, jz, g)
    k3 = rigid_body_derivative(x + 0.5 * dt * k2, thrust, tau, m, jx, jy, jz, g)
    k4 = rigid_body_derivative(x + dt * k3, thrust, tau, m, jx, jy, jz, g)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def qp_solve_gi(L, f, M, d, warm=None, max_iter=200):
    """Dual active-set solve of ``min 0.5 x'Hx + f'x  s.t.  M x <= d``.

    ``L`` is the lower Cholesky factor of the (positive definite)
    Hessian.  Starts from the unconstrained optimum and adds violated
    constraints one at a time, preferring members of ``warm`` (the
    previous step's active set) among the violated so a repeating active
    set converges in few iterations.

    Returns ``(x, lam, active, n_iter, feasible)``; ``feasible=False``
    flags dual unboundedness (primal infeasibility), in which case the
    returned point is the best iterate (callers re-solve with a reduced
    row set).
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    x = -sla.cho_solve((L, True), f)
    nrows = M.shape[0] if M is not None else 0
    lam = np.zeros(nrows)
    if nrows == 0:
        return x, lam, np.empty(0, dtype=np.intp), 0, True

    M = np.asarray(M, dtype=float)
    d = np.asarray(d, dtype=float)
    warm_mask = np.zeros(nrows, dtype=bool)
    if warm is not None:
        warm_mask[np.asarray(warm, dtype=np.intp)] = True

    active: list[int] = []
    scale = 1.0 + float(np.abs(d).max())

    for it in range(1, max_iter + 1):
        viol = M @ x - d
        viol[active] = 0.0
        cand = np.flatnonzero(viol > _FEAS_TOL * scale)
        if cand.size == 0:
            return x, lam, np.asarray(active, dtype=np.intp), it, True
        warm_cand = cand[warm_mask[cand]]
        pool = warm_cand if warm_cand.size else cand
        p = int(pool[np.argmax(viol[pool])])
        np_row = M[p]
        lam_p = 0.0

        while True:
            if active:
                Mw = M[active]
                Hin = sla.cho_solve((L, True), np_row)
                HiMw = sla.cho_solve((L, True), Mw.T)
                S = Mw @ HiMw
                try:
                    r = sla.solve(S, Mw @ Hin, assume_a="sym")
                except sla.LinAlgError:
                    r = np.linalg.lstsq(S, Mw @ Hin, rcond=None)[0]
                z = Hin - HiMw @ r
            else:
                r = np.zeros(0)
                z = sla.cho_solve((L, True), np_row)

            znorm = float(np.linalg.norm(z))
            step_den = float(np_row @ z)
            if znorm <= _ZERO_STEP * (1.0 + float(np.linalg.norm(np_row))) \
                    or step_den <= _ZERO_STEP:
                # no primal movement possible along this constraint
                pos = np.flatnonzero(r > _ZERO_STEP)
                if pos.size == 0:
                    return (x, lam, np.asarray(active, dtype=np.intp), it,
                            False)
                lam_act = np.array([lam[a] for a in active])
                t1_idx = pos[np.argmin(lam_act[pos] / r[pos])]
                t1 = lam_act[t1_idx] / r[t1_idx]
                for k, a in enumerate(active):
                    lam[a] -= t1 * r[k]
                lam_p += t1
                del active[int(t1_idx)]
                continue

            t2 = float(M[p] @ x - d[p]) / step_den
            t1 = np.inf
            t1_idx = -1
            if active:
                lam_act = np.array([lam[a] for a in active])
                pos = np.flatnonzero(r > _ZERO_STEP)
                if pos.size:
                    ratios = lam_act[pos] / r[pos]
                    kmin = int(np.argmin(ratios))
                    t1 = float(ratios[kmin])
                    t1_idx = int(pos[kmin])
            t = min(t1, t2)
            x = x - t * z
            for k, a in enumerate(active):
                lam[a] -= t * r[k]
            lam_p += t
            if t2 <= t1:
                active.append(p)
                lam[p] = lam_p
                break
            del active[t1_idx]

    raise ArithmeticError("active-set iteration limit exceeded")

"""Numba inner loops for the chain integrator.

State is carried in absolute segment angles ``phi`` (cumulative joint
angles plus mount orientation) because the serial-chain mass matrix has
a compact closed form there:

    M[a, b] = B[a, b] * cos(phi_a - phi_b) + I_a * delta_ab
    M phidd + B[a, b] * sin(phi_a - phi_b) * phid_b^2 = Q

``B`` and the gravity coefficients ``cg`` are constant for a given model
and tip mass and are assembled once outside the loop (see dynamics).

Joint damping is folded into the velocity update implicitly:
``(M + dt D^T C D) phid' = M phid + dt Q`` with ``D`` the relative-angle
difference operator; this keeps the semi-implicit scheme stable for the
damping magnitudes the calibration search explores.
"""

import numpy as np
from numba import njit

OMEGA_LIMIT = 1e7  # rad/s guard against runaway states


@njit(cache=True)
def _forces(phi, phid, B, cg, Lv, Iabs, gx, gy, k, c, alpha, rest, pressure,
            mount, plane_on, plane_y, base_y, kp, dp, include_damping):
    """Mass matrix and generalized force (absolute coordinates)."""
    n = phi.shape[0]
    cphi = np.cos(phi)
    sphi = np.sin(phi)

    M = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            M[a, b] = B[a, b] * (cphi[a] * cphi[b] + sphi[a] * sphi[b])
        M[a, a] += Iabs[a]

    Q = np.empty(n)
    for a in range(n):
        s = 0.0
        for b in range(n):
            s += B[a, b] * (sphi[a] * cphi[b] - cphi[a] * sphi[b]) * phid[b] * phid[b]
        Q[a] = -s + cg[a] * (-gx * sphi[a] + gy * cphi[a])

    # spring + motor (+ optionally damping) torques on the relative angles
    tau = np.empty(n)
    prev = mount
    prevd = 0.0
    for i in range(n):
        th = phi[i] - prev
        tau[i] = -k[i] * (th - rest[i]) + alpha[i] * pressure
        if include_damping:
            tau[i] -= c[i] * (phid[i] - prevd)
        prev = phi[i]
        prevd = phid[i]
    for a in range(n):
        Q[a] += tau[a] - (tau[a + 1] if a + 1 < n else 0.0)

    # unilateral penalty contact at the tip against a horizontal plane
    if plane_on:
        tip_y = base_y
        tip_vy = 0.0
        for b in range(n):
            tip_y += Lv[b] * sphi[b]
            tip_vy += Lv[b] * cphi[b] * phid[b]
        pen = tip_y - plane_y
        if pen > 0.0:
            fn = kp * pen + dp * tip_vy
            if fn > 0.0:
                for a in range(n):
                    Q[a] -= fn * Lv[a] * cphi[a]
    return M, Q


@njit(cache=True)
def _check(phi, phid, mount):
    """Return True if the state is still inside the validity region."""
    n = phi.shape[0]
    prev = mount
    for i in range(n):
        th = phi[i] - prev
        if not (-np.pi <= th <= np.pi):
            return False
        if not (np.abs(phid[i]) < OMEGA_LIMIT):
            return False
        prev = phi[i]
    return True


@njit(cache=True)
def simulate_si(phi0, phid0, n_steps, stride, dt, B, cg, Lv, Iabs, gx, gy,
                k, c, alpha, rest, pressure, mount,
                plane_on, plane_y, base_y, kp, dp):
    """Semi-implicit Euler with implicit joint damping.

    Records every ``stride``-th state (sample 0 is the initial state).
    Returns (phi_samples, phid_samples, fail_step); fail_step is -1 on
    success, else the 1-based step index at which the state left the
    validity region.
    """
    n = phi0.shape[0]
    n_samples = n_steps // stride + 1
    out_phi = np.empty((n_samples, n))
    out_phid = np.empty((n_samples, n))
    phi = phi0.copy()
    phid = phid0.copy()
    out_phi[0] = phi
    out_phid[0] = phid
    si = 1
    for step in range(1, n_steps + 1):
        M, Q = _forces(phi, phid, B, cg, Lv, Iabs, gx, gy, k, c, alpha, rest,
                       pressure, mount, plane_on, plane_y, base_y, kp, dp, False)
        rhs = M @ phid + dt * Q
        # A = M + dt * D^T diag(c) D (tridiagonal in absolute coordinates)
        for a in range(n):
            M[a, a] += dt * (c[a] + (c[a + 1] if a + 1 < n else 0.0))
            if a + 1 < n:
                M[a, a + 1] -= dt * c[a + 1]
                M[a + 1, a] -= dt * c[a + 1]
        phid = np.linalg.solve(M, rhs)
        phi = phi + dt * phid
        if not _check(phi, phid, mount):
            return out_phi[:si], out_phid[:si], step
        if step % stride == 0:
            out_phi[si] = phi
            out_phid[si] = phid
            si += 1
    return out_phi, out_phid, -1


@njit(cache=True)
def _accel(phi, phid, B, cg, Lv, Iabs, gx, gy, k, c, alpha, rest, pressure,
           mount, plane_on, plane_y, base_y, kp, dp):
    M, Q = _forces(phi, phid, B, cg, Lv, Iabs, gx, gy, k, c, alpha, rest,
                   pressure, mount, plane_on, plane_y, base_y, kp, dp, True)
    return np.linalg.solve(M, Q)


@njit(cache=True)
def simulate_rk4(phi0, phid0, n_steps, stride, dt, B, cg, Lv, Iabs, gx, gy,
                 k, c, alpha, rest, pressure, mount,
                 plane_on, plane_y, base_y, kp, dp):
    """Classic RK4 with explicit joint damping; same contract as simulate_si."""
    n = phi0.shape[0]
    n_samples = n_steps // stride + 1
    out_phi = np.empty((n_samples, n))
    out_phid = np.empty((n_samples, n))
    phi = phi0.copy()
    phid = phid0.copy()
    out_phi[0] = phi
    out_phid[0] = phid
    si = 1
    for step in range(1, n_steps + 1):
        a1 = _accel(phi, phid, B, cg, Lv, Iabs, gx, gy, k, c, alpha, rest,
                    pressure, mount, plane_on, plane_y, base_y, kp, dp)
        v1 = phid
        a2 = _accel(phi + 0.5 * dt * v1, phid + 0.5 * dt * a1, B, cg, Lv, Iabs,
                    gx, gy, k, c, alpha, rest, pressure, mount,
                    plane_on, plane_y, base_y, kp, dp)
        v2 = phid + 0.5 * dt * a1
        a3 = _accel(phi + 0.5 * dt * v2, phid + 0.5 * dt * a2, B, cg, Lv, Iabs,
                    gx, gy, k, c, alpha, rest, pressure, mount,
                    plane_on, plane_y, base_y, kp, dp)
        v3 = phid + 0.5 * dt * a2
        a4 = _accel(phi + dt * v3, phid + dt * a3, B, cg, Lv, Iabs,
                    gx, gy, k, c, alpha, rest, pressure, mount,
                    plane_on, plane_y, base_y, kp, dp)
        v4 = phid + dt * a3
        phi = phi + (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
        phid = phid + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not _check(phi, phid, mount):
            return out_phi[:si], out_phid[:si], step
        if step % stride == 0:
            out_phi[si] = phi
            out_phid[si] = phid
            si += 1
    return out_phi, out_phid, -1

"""Planar multibody simulation of the segmented gripper.

Covers forward kinematics, the inverse angle map used by the measurement
pipeline, time stepping (semi-implicit Euler by default, RK4 optional),
static equilibrium under tip loads, release experiments, and quasi-static
tip-force measurement against a scale plane.

Dynamics formulation: segment 0 is fixed; the remaining segments form a
serial pendulum chain anchored at the first joint. The equations of motion
are assembled in absolute segment angles, where the kinetic energy of an
open chain gives the mass matrix in closed form (see _kernels). An optional
point mass rides on the distal tip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConvergenceError, IntegrationError, ModelError, ValidityError
from .model import GripperModel, LoadCondition, SimState
from .signal_metrics import TimeSeries

# Penalty contact used by the dynamic cross-check of the static force solve.
PENALTY_STIFFNESS = 1e4  # N/m
STATIC_RESIDUAL_TOL = 1e-12  # N*m, safely below the 1e-9 contract
STATIC_MAX_ITER = 200
STATIC_ANGLE_LIMIT = np.pi / 2  # measurement model validity region


def forward_kinematics(model: GripperModel, theta) -> np.ndarray:
    """Chain points (base, each joint, tip) for the given joint angles.

    Returns an ``(n_segments + 1, 2)`` array in meters, y up. Consecutive
    point distances equal the segment lengths.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_joints,):
        raise ModelError(
            f"theta must have {model.n_joints} entries, got shape {theta.shape}")
    phi = np.empty(model.n_segments)
    phi[0] = model.mount_orientation
    phi[1:] = model.mount_orientation + np.cumsum(theta)
    steps = model.segment_length[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    points = np.empty((model.n_segments + 1, 2))
    points[0] = model.mount_position
    points[1:] = model.mount_position + np.cumsum(steps, axis=0)
    return points


def joint_angles_from_positions(points) -> np.ndarray:
    """Relative joint angles from ordered chain points (image convention).

    Expects points with y increasing downward (image coordinates); the
    first angle is measured against the horizontal, each further angle
    against the previous link direction:

        angle_1 = arctan(-dy_1 / dx_1)
        angle_i = arctan(-dy_i / dx_i) - sum(angle_1 .. angle_{i-1})

    Every returned angle must lie within [-pi/2, pi/2]; poses outside that
    range cannot be represented by this measurement model.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ModelError("need an (N, 2) array with N >= 2 points")
    deltas = np.diff(pts, axis=0)
    dist = np.hypot(deltas[:, 0], deltas[:, 1])
    if np.any(dist < 1e-12):
        raise ValidityError("consecutive points coincide")
    if np.any(np.abs(deltas[:, 0]) < 1e-12):
        raise ValidityError("vertical link (dx = 0) is outside the angle model")
    heading = np.arctan(-deltas[:, 1] / deltas[:, 0])
    angles = np.empty(len(heading))
    angles[0] = heading[0]
    angles[1:] = np.diff(heading)
    if np.any(np.abs(angles) > np.pi / 2 + 1e-12):
        raise ValidityError("joint angle outside [-pi/2, pi/2]")
    return angles


# ---------------------------------------------------------------------------
# chain constants shared by the integrator, statics, and energy audit

@dataclass(frozen=True)
class _ChainArrays:
    Lv: np.ndarray      # moving segment lengths
    B: np.ndarray       # kinetic coupling matrix (includes tip mass)
    cg: np.ndarray      # first mass moments per absolute angle
    Iabs: np.ndarray    # central inertias of the moving segments
    anchor: np.ndarray  # world position of the first joint
    moving_mass: float  # total moving mass including the tip


def _chain_arrays(model: GripperModel, tip_mass: float) -> _ChainArrays:
    n = model.n_joints
    Lv = np.ascontiguousarray(model.segment_length[1:])
    masses = model.segment_mass[1:]
    coms = model.segment_com_offset[1:]
    Iabs = np.ascontiguousarray(model.segment_inertia[1:])
    # w[k, b]: sensitivity of body k's center (or the tip point, row n) to
    # absolute angle b.
    w = np.zeros((n + 1, n))
    for k in range(n):
        w[k, :k] = Lv[:k]
        w[k, k] = coms[k]
    w[n] = Lv
    mvec = np.concatenate([masses, [tip_mass]])
    B = np.einsum("k,ka,kb->ab", mvec, w, w)
    cg = mvec @ w
    u0 = np.array([np.cos(model.mount_orientation), np.sin(model.mount_orientation)])
    anchor = model.mount_position + model.segment_length[0] * u0
    return _ChainArrays(Lv, B, cg, Iabs, anchor, float(mvec.sum()))


def _phi_from_theta(model, theta):
    return model.mount_orientation + np.cumsum(theta)


def _theta_from_phi(model, phi):
    theta = np.empty_like(phi)
    theta[..., 0] = phi[..., 0] - model.mount_orientation
    theta[..., 1:] = np.diff(phi, axis=-1)
    return theta


# ---------------------------------------------------------------------------
# time stepping

@dataclass
class Trajectory:
    """Uniformly sampled joint-space trajectory."""

    times: np.ndarray
    theta: np.ndarray
    omega: np.ndarray


def _run_kernel(model, state, load, n_steps, stride, dt):
    arr = _chain_arrays(model, load.tip_mass)
    phi0 = _phi_from_theta(model, state.theta)
    phid0 = np.cumsum(state.omega)
    plane_on = load.contact_plane is not None
    plane_y = float(load.contact_plane) if plane_on else 0.0
    dp = 2.0 * np.sqrt(PENALTY_STIFFNESS * arr.moving_mass) if plane_on else 0.0
    kernel = _kernels.simulate_rk4 if model.integrator == "rk4" else _kernels.simulate_si
    phi_s, phid_s, fail = kernel(
        phi0, phid0, n_steps, stride, dt, arr.B, arr.cg, arr.Lv, arr.Iabs,
        model.gravity[0], model.gravity[1], model.joint_k, model.joint_c,
        model.joint_alpha, model.rest_angle, float(load.pressure),
        model.mount_orientation, plane_on, plane_y, float(arr.anchor[1]),
        PENALTY_STIFFNESS, dp)
    if fail >= 0:
        raise IntegrationError(
            f"integration diverged at t = {state.t + fail * dt:.6g} s",
            t=state.t + fail * dt)
    theta_s = _theta_from_phi(model, phi_s)
    omega_s = np.empty_like(phid_s)
    omega_s[:, 0] = phid_s[:, 0]
    omega_s[:, 1:] = np.diff(phid_s, axis=1)
    times = state.t + dt * stride * np.arange(phi_s.shape[0])
    return Trajectory(times, theta_s, omega_s)


def step(model: GripperModel, state: SimState, load: LoadCondition, dt: float) -> SimState:
    """Advance the state by one integrator step of length ``dt``.

    Deterministic: identical inputs always produce identical outputs.
    """
    if not 0.0 < dt <= 1e-3:
        raise ModelError("dt must be in (0, 1e-3] s")
    traj = _run_kernel(model, state, load, 1, 1, float(dt))
    return SimState(t=state.t + dt, theta=traj.theta[-1], omega=traj.omega[-1])


def simulate(model: GripperModel, state: SimState, load: LoadCondition,
             duration: float, record_stride: int = 1, dt: float | None = None) -> Trajectory:
    """Integrate for ``duration`` seconds, recording every ``record_stride`` steps."""
    dt = model.dt if dt is None else float(dt)
    if not 0.0 < dt <= 1e-3:
        raise ModelError("dt must be in (0, 1e-3] s")
    if duration <= 0:
        raise ModelError("duration must be positive")
    n_steps = max(1, int(round(duration / dt)))
    return _run_kernel(model, state, load, n_steps, int(record_stride), dt)


def tip_heights(model: GripperModel, theta_samples: np.ndarray) -> np.ndarray:
    """Vertical tip position for each row of joint angles."""
    theta_samples = np.atleast_2d(np.asarray(theta_samples, dtype=float))
    phi = model.mount_orientation + np.cumsum(theta_samples, axis=1)
    arr = _chain_arrays(model, 0.0)
    return arr.anchor[1] + np.sin(phi) @ arr.Lv


def mechanical_energy(model: GripperModel, state: SimState, load: LoadCondition) -> float:
    """Kinetic + gravitational + spring energy of the moving chain.

    Gravitational potential is referenced to the world origin; the fixed
    base segment is excluded (constant offset).
    """
    arr = _chain_arrays(model, load.tip_mass)
    phi = _phi_from_theta(model, state.theta)
    phid = np.cumsum(state.omega)
    cphi, sphi = np.cos(phi), np.sin(phi)
    M = arr.B * (np.outer(cphi, cphi) + np.outer(sphi, sphi)) + np.diag(arr.Iabs)
    kinetic = 0.5 * phid @ M @ phid
    com_sum = arr.moving_mass * arr.anchor + np.stack([arr.cg @ cphi, arr.cg @ sphi])
    v_grav = -float(model.gravity @ com_sum)
    v_spring = 0.5 * float(model.joint_k @ (state.theta - model.rest_angle) ** 2)
    return float(kinetic + v_grav + v_spring)


# ---------------------------------------------------------------------------
# statics

def _static_terms(model, arr, theta, pressure, tip_force_y):
    """Residual torque and its Jacobian at zero velocity.

    ``tip_force_y`` is a vertical force applied at the tip (negative =
    pressing down on the chain, as a scale plane does).
    """
    n = model.n_joints
    phi = _phi_from_theta(model, theta)
    cphi, sphi = np.cos(phi), np.sin(phi)
    gx, gy = model.gravity
    q_abs = arr.cg * (-gx * sphi + gy * cphi) + tip_force_y * arr.Lv * cphi
    q_rel = np.cumsum(q_abs[::-1])[::-1]
    residual = -model.joint_k * (theta - model.rest_angle) \
        + model.joint_alpha * pressure + q_rel
    d_abs = arr.cg * (-gx * cphi - gy * sphi) - tip_force_y * arr.Lv * sphi
    suffix = np.cumsum(d_abs[::-1])[::-1]
    idx = np.maximum.outer(np.arange(n), np.arange(n))
    jac = suffix[idx] - np.diag(model.joint_k)
    # tip height and its gradient, for the contact-augmented system
    tip_y = arr.anchor[1] + arr.Lv @ sphi
    dtip = np.cumsum((arr.Lv * cphi)[::-1])[::-1]
    return residual, jac, tip_y, dtip


def _newton(fun, x0, max_iter=STATIC_MAX_ITER, tol=STATIC_RESIDUAL_TOL):
    """Damped Newton with halving line search on the residual norm."""
    x = x0.copy()
    res, jac = fun(x)
    for _ in range(max_iter):
        norm = np.abs(res).max()
        if norm < tol:
            return x
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian in static solve: {exc}") from exc
        lam = 1.0
        while lam > 2**-40:
            cand = x + lam * delta
            res_c, jac_c = fun(cand)
            if np.abs(res_c).max() < norm:
                x, res, jac = cand, res_c, jac_c
                break
            lam *= 0.5
        else:
            raise ConvergenceError("static solve line search stalled")
    raise ConvergenceError(f"static solve did not reach {tol} in {max_iter} iterations")


def static_equilibrium(model: GripperModel, load: LoadCondition) -> np.ndarray:
    """Joint angles at which spring torques balance gravity and the tip load.

    Solved by damped Newton from the rest angles; the converged residual
    torque is below 1e-9 N*m per joint. Requires strictly positive joint
    stiffness and an equilibrium inside |theta| <= pi/2.
    """
    if np.any(model.joint_k <= 0):
        raise ModelError("static equilibrium requires joint_k > 0 at every joint")
    arr = _chain_arrays(model, load.tip_mass)

    def fun(theta):
        res, jac, _, _ = _static_terms(model, arr, theta, load.pressure, 0.0)
        return res, jac

    theta = _newton(fun, model.rest_angle)
    if np.any(np.abs(theta) > STATIC_ANGLE_LIMIT + 1e-9):
        raise ValidityError("equilibrium outside the |theta| <= pi/2 validity range")
    return theta


def simulate_release(model: GripperModel, initial_load_mass: float,
                     duration: float, sample_rate: float = 1000.0) -> TimeSeries:
    """Tip height over time after instantly removing a tip load.

    The initial state is the static equilibrium under ``initial_load_mass``;
    the dynamics then evolve with the mass removed. Returns the vertical tip
    position sampled uniformly at ``sample_rate``.
    """
    if duration <= 0:
        raise ModelError("duration must be positive")
    if not 100.0 <= sample_rate <= 10000.0:
        raise ModelError("sample_rate must be within [100, 10000] Hz")
    theta0 = static_equilibrium(model, LoadCondition(tip_mass=initial_load_mass))
    period = 1.0 / sample_rate
    # integer sub-steps per sample keep samples exactly on the grid, with
    # the effective dt never above the model's configured dt
    stride = max(1, int(np.ceil(period / model.dt - 1e-12)))
    dt = period / stride
    n_samples = int(np.floor(duration * sample_rate)) + 1
    n_steps = (n_samples - 1) * stride
    state0 = SimState(t=0.0, theta=theta0, omega=np.zeros(model.n_joints))
    traj = _run_kernel(model, state0, LoadCondition(), n_steps, stride, dt)
    return TimeSeries(sample_rate=sample_rate, values=tip_heights(model, traj.theta), t0=0.0)


@dataclass(frozen=True)
class TipForceResult:
    """Outcome of a quasi-static tip force measurement."""

    force: float            # normal force on the plane, N (>= 0)
    liftoff: bool           # True if the tip left the plane (force reported 0)
    theta: np.ndarray       # equilibrium joint angles
    plane_height: float     # plane used, m


def measure_tip_force(model: GripperModel, pressure: float,
                      plane_height: float | None = None) -> TipForceResult:
    """Normal force the actuated tip presses onto a horizontal scale plane.

    The plane defaults to the unactuated resting tip height, so the force at
    zero pressure is the passive resting contact force (zero for the default
    mount). Solves the joint torque balance together with the tip-on-plane
    constraint; if the tip would pull away from the plane the result is
    flagged as liftoff with zero force.
    """
    if pressure < 0:
        raise ModelError("pressure must be >= 0")
    if np.any(model.joint_k <= 0):
        raise ModelError("tip force measurement requires joint_k > 0")
    theta_rest = static_equilibrium(model, LoadCondition())
    if plane_height is None:
        plane_height = float(tip_heights(model, theta_rest)[0])
    arr = _chain_arrays(model, 0.0)
    n = model.n_joints

    def fun(x):
        theta, force = x[:n], x[n]
        res_t, jac_t, tip_y, dtip = _static_terms(model, arr, theta, pressure, -force)
        res = np.concatenate([res_t, [tip_y - plane_height]])
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = jac_t
        jac[:n, n] = -dtip
        jac[n, :n] = dtip
        return res, jac

    x0 = np.concatenate([theta_rest, [0.0]])
    x = _newton(fun, x0)
    theta, force = x[:n], float(x[n])
    if np.any(np.abs(theta) > STATIC_ANGLE_LIMIT + 1e-9):
        raise ValidityError("contact equilibrium outside the |theta| <= pi/2 range")
    if force < -1e-9:
        theta_free = static_equilibrium(model, LoadCondition(pressure=pressure))
        return TipForceResult(0.0, True, theta_free, plane_height)
    return TipForceResult(max(force, 0.0), False, theta, plane_height)

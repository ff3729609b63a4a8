import numpy as np
import pytest

from gripper_twin import dynamics as dyn
from gripper_twin.errors import (ConvergenceError, IntegrationError, ModelError,
                                 ValidityError)
from gripper_twin.model import GripperModel, LoadCondition, SimState, default_model
from gripper_twin.signal_metrics import find_extrema

# ---------------------------------------------------------------------------
# forward kinematics


def fk_rotation_oracle(model, theta):
    """Independent forward kinematics: compose 2x2 rotation matrices."""
    def rot(a):
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, -s], [s, c]])

    R = rot(model.mount_orientation)
    p = model.mount_position.astype(float).copy()
    pts = [p.copy()]
    for i in range(model.n_segments):
        if i > 0:
            R = R @ rot(theta[i - 1])
        p = p + R @ np.array([model.segment_length[i], 0.0])
        pts.append(p.copy())
    return np.array(pts)


def test_fk_straight_chain():
    m = default_model()
    pts = dyn.forward_kinematics(m, np.zeros(7))
    assert pts.shape == (9, 2)
    assert pts[-1] == pytest.approx([0.068, 0.0], abs=1e-15)


def test_fk_right_angle_bend():
    m = default_model()
    theta = np.zeros(7)
    theta[0] = np.pi / 2
    tip = dyn.forward_kinematics(m, theta)[-1]
    assert tip == pytest.approx([0.0085, 0.0595], abs=1e-12)


def test_fk_matches_rotation_matrix_oracle():
    rng = np.random.default_rng(42)
    m = default_model(mount_position=[0.01, -0.02], mount_orientation=0.2)
    for _ in range(50):
        theta = rng.uniform(-0.8, 0.8, 7)
        pts = dyn.forward_kinematics(m, theta)
        assert np.abs(pts - fk_rotation_oracle(m, theta)).max() < 1e-12


def test_fk_segment_lengths_preserved():
    m = default_model()
    theta = np.linspace(-0.3, 0.3, 7)
    pts = dyn.forward_kinematics(m, theta)
    dists = np.hypot(*np.diff(pts, axis=0).T)
    assert np.allclose(dists, m.segment_length, atol=1e-15)


def test_fk_dimension_mismatch():
    with pytest.raises(ModelError):
        dyn.forward_kinematics(default_model(), np.zeros(6))


# ---------------------------------------------------------------------------
# angle extraction (image convention: y down)


def test_angles_collinear_horizontal():
    pts = np.column_stack([np.arange(5.0), np.zeros(5)])
    assert np.allclose(dyn.joint_angles_from_positions(pts), 0.0)


def test_angles_constant_slope():
    pts = np.array([[0.0, 0.0], [1.0, -1.0], [2.0, -2.0]])
    angles = dyn.joint_angles_from_positions(pts)
    assert angles == pytest.approx([np.pi / 4, 0.0], abs=1e-15)


def test_angles_round_trip_through_fk():
    m = default_model()
    rng = np.random.default_rng(7)
    for _ in range(200):
        theta = rng.uniform(-0.18, 0.18, 7)
        pts = dyn.forward_kinematics(m, theta)[1:]  # joints + tip
        img_pts = pts * [1.0, -1.0]
        rec = dyn.joint_angles_from_positions(img_pts)
        assert np.abs(rec - theta).max() < 1e-12


def test_angles_error_paths():
    with pytest.raises(ValidityError):  # coincident
        dyn.joint_angles_from_positions([[0, 0], [0, 0], [1, 1]])
    with pytest.raises(ValidityError):  # vertical link
        dyn.joint_angles_from_positions([[0, 0], [0, 1]])
    with pytest.raises(ValidityError):  # relative angle beyond pi/2
        dyn.joint_angles_from_positions([[0, 0], [1, -1.2], [2, 0.0]])
    with pytest.raises(ModelError):  # not enough points
        dyn.joint_angles_from_positions([[0, 0]])


# ---------------------------------------------------------------------------
# stepping


def test_step_fixed_point():
    m = default_model(gravity=[0.0, 0.0])
    s = SimState.rest(m)
    s2 = dyn.step(m, s, LoadCondition(), 1e-4)
    assert np.array_equal(s2.theta, s.theta)
    assert np.array_equal(s2.omega, s.omega)
    assert s2.t == pytest.approx(1e-4)


def test_step_dt_validation():
    m = default_model()
    s = SimState.rest(m)
    for dt in (0.0, -1e-4, 2e-3):
        with pytest.raises(ModelError):
            dyn.step(m, s, LoadCondition(), dt)


def test_trajectory_determinism():
    m = default_model()
    s = SimState(0.0, np.full(7, -0.05), np.zeros(7))
    t1 = dyn.simulate(m, s, LoadCondition(tip_mass=0.02), 0.2)
    t2 = dyn.simulate(m, s, LoadCondition(tip_mass=0.02), 0.2)
    assert np.array_equal(t1.theta, t2.theta)
    assert np.array_equal(t1.omega, t2.omega)


def _pendulum_model(length=0.06, mass=0.01):
    # single moving segment hanging from a short fixed stub, pointing down
    return GripperModel(
        n_segments=2,
        segment_length=[0.005, length],
        segment_mass=[0.001, mass],
        segment_inertia=[1e-9, mass * length**2 / 12],
        segment_com_offset=[0.0025, length / 2],
        joint_k=[0.0], joint_c=[0.0], joint_alpha=[0.0], rest_angle=[0.0],
        mount_orientation=-np.pi / 2,
        dt=1e-5,
    )


def test_compound_pendulum_period():
    m = _pendulum_model()
    length, mass = 0.06, 0.01
    d = length / 2
    inertia_pivot = mass * length**2 / 12 + mass * d**2
    period_pred = 2 * np.pi * np.sqrt(inertia_pivot / (mass * 9.81 * d))

    s = SimState(0.0, np.array([0.05]), np.zeros(1))
    traj = dyn.simulate(m, s, LoadCondition(), 2.0, record_stride=10)
    th = traj.theta[:, 0]
    sign = np.sign(th)
    up = np.flatnonzero((sign[:-1] < 0) & (sign[1:] >= 0))
    periods = np.diff(traj.times[up])
    assert abs(periods.mean() - period_pred) / period_pred < 0.01


def test_energy_conserved_without_damping():
    m = default_model(joint_c=np.zeros(7), dt=1e-5)
    theta0 = dyn.static_equilibrium(default_model(), LoadCondition(tip_mass=0.040))
    s = SimState(0.0, theta0, np.zeros(7))
    traj = dyn.simulate(m, s, LoadCondition(), 1.0, record_stride=100)
    energies = np.array([
        dyn.mechanical_energy(m, SimState(0, traj.theta[i], traj.omega[i]), LoadCondition())
        for i in range(len(traj.times))])
    kin_model = m.with_params(gravity=[0.0, 0.0], joint_k=np.zeros(7))
    kinetic = np.array([
        dyn.mechanical_energy(kin_model, SimState(0, traj.theta[i], traj.omega[i]),
                              LoadCondition())
        for i in range(len(traj.times))])
    scale = max(abs(energies[0]), kinetic.max())
    assert np.abs(energies - energies[0]).max() / scale < 1e-3


def test_energy_nonincreasing_with_damping():
    m = default_model()
    theta0 = dyn.static_equilibrium(m, LoadCondition(tip_mass=0.040))
    s = SimState(0.0, theta0, np.zeros(7))
    traj = dyn.simulate(m, s, LoadCondition(), 0.3, record_stride=1)
    energies = np.array([
        dyn.mechanical_energy(m, SimState(0, traj.theta[i], traj.omega[i]), LoadCondition())
        for i in range(len(traj.times))])
    assert np.diff(energies).max() <= 1e-9


def test_rk4_agrees_with_semi_implicit():
    m_si = default_model(dt=1e-5)
    m_rk = default_model(integrator="rk4", dt=1e-5)
    theta0 = dyn.static_equilibrium(m_si, LoadCondition(tip_mass=0.020))
    s = SimState(0.0, theta0, np.zeros(7))
    t_si = dyn.simulate(m_si, s, LoadCondition(), 0.1, record_stride=100)
    t_rk = dyn.simulate(m_rk, s, LoadCondition(), 0.1, record_stride=100)
    assert np.abs(t_si.theta - t_rk.theta).max() < 1e-3


def test_integration_divergence_detected():
    # spring frequency beyond the semi-implicit stability limit at this dt
    m = default_model(joint_k=np.full(7, 400.0), joint_c=np.zeros(7), dt=1e-3)
    s = SimState(0.0, np.full(7, 0.3), np.zeros(7))
    with pytest.raises(IntegrationError) as err:
        dyn.simulate(m, s, LoadCondition(), 1.0)
    assert err.value.t is not None


# ---------------------------------------------------------------------------
# statics


def test_static_zero_gravity_returns_rest():
    m = default_model(gravity=[0.0, 0.0], rest_angle=np.full(7, 0.1))
    theta = dyn.static_equilibrium(m, LoadCondition())
    assert np.abs(theta - 0.1).max() < 1e-12


def test_static_single_joint_matches_bisection():
    length, mass, k = 0.06, 0.01, 0.05
    m = GripperModel(
        n_segments=2,
        segment_length=[0.005, length],
        segment_mass=[0.001, mass],
        segment_inertia=[1e-9, mass * length**2 / 12],
        segment_com_offset=[0.0025, length / 2],
        joint_k=[k], joint_c=[0.0], joint_alpha=[0.0], rest_angle=[0.0],
    )
    tip_mass = 0.010
    theta = dyn.static_equilibrium(m, LoadCondition(tip_mass=tip_mass))[0]

    # independent 1-D bisection on  -k t - g (m r + m_tip L) cos(t) = 0
    moment = 9.81 * (mass * length / 2 + tip_mass * length)

    def residual(t):
        return -k * t - moment * np.cos(t)

    lo, hi = -np.pi / 2, 0.0  # residual(lo) > 0 > residual(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0:
            lo = mid
        else:
            hi = mid
    assert abs(theta - 0.5 * (lo + hi)) < 1e-9


def test_static_residual_below_contract():
    m = default_model()
    load = LoadCondition(tip_mass=0.040)
    theta = dyn.static_equilibrium(m, load)
    arrays = dyn._chain_arrays(m, load.tip_mass)
    residual, _, _, _ = dyn._static_terms(m, arrays, theta, 0.0, 0.0)
    assert np.abs(residual).max() < 1e-9


def test_static_jacobian_matches_finite_differences():
    m = default_model()
    arrays = dyn._chain_arrays(m, 0.02)
    rng = np.random.default_rng(1)
    theta = rng.uniform(-0.3, 0.3, 7)
    res0, jac, tip_y, dtip = dyn._static_terms(m, arrays, theta, 5e4, -0.1)
    eps = 1e-7
    for j in range(7):
        tp = theta.copy()
        tp[j] += eps
        res1, _, tip1, _ = dyn._static_terms(m, arrays, tp, 5e4, -0.1)
        assert np.abs((res1 - res0) / eps - jac[:, j]).max() < 1e-4
        assert abs((tip1 - tip_y) / eps - dtip[j]) < 1e-5


def test_static_matches_dynamic_relaxation():
    m = default_model()
    load = LoadCondition(tip_mass=0.040)
    theta_static = dyn.static_equilibrium(m, load)
    m_damped = m.with_params(joint_c=m.joint_c * 30)
    s = SimState.rest(m)
    traj = dyn.simulate(m_damped, s, load, 3.0, record_stride=30000)
    assert np.abs(traj.theta[-1] - theta_static).max() < 1e-4


def test_static_scaling_law():
    m = default_model()
    load = LoadCondition(tip_mass=0.002)  # small-deflection regime
    th1 = dyn.static_equilibrium(m, load)
    th2 = dyn.static_equilibrium(m.with_params(joint_k=2 * m.joint_k), load)
    assert np.abs(dyn.tip_heights(m, th1)[0]) < np.sin(np.radians(5)) * m.total_length
    ratio = th1 / th2
    assert np.all(np.abs(ratio - 2.0) < 0.1)  # 5% of the factor 2


def test_static_requires_positive_stiffness():
    m = default_model(joint_k=np.zeros(7))
    with pytest.raises(ModelError):
        dyn.static_equilibrium(m, LoadCondition())


def test_static_outside_validity_detected():
    m = default_model(joint_k=np.full(7, 0.01))
    with pytest.raises((ValidityError, ConvergenceError)):
        dyn.static_equilibrium(m, LoadCondition(tip_mass=0.040))


# ---------------------------------------------------------------------------
# release


def test_release_zero_mass_is_flat():
    m = default_model()
    series = dyn.simulate_release(m, 0.0, 0.3, sample_rate=1000)
    theta_eq = dyn.static_equilibrium(m, LoadCondition())
    tip_eq = dyn.tip_heights(m, theta_eq)[0]
    assert np.abs(series.values - tip_eq).max() < 1e-9


def test_release_overdamped_is_monotone():
    m = default_model()
    m_od = m.with_params(joint_c=m.joint_c * 100)
    series = dyn.simulate_release(m_od, 0.040, 1.0, sample_rate=1000)
    assert not find_extrema(series)  # no interior extrema at all
    assert series.values[-1] > series.values[0]


def test_release_default_twin_oscillates_and_settles():
    # the calibrated defaults give a decaying oscillation that settles fast
    m = default_model()
    series = dyn.simulate_release(m, 0.040, 2.0, sample_rate=1000)
    from gripper_twin.signal_metrics import settling_metrics
    report = settling_metrics(series)
    assert report.overshoot_count >= 1
    assert 0.0 < report.settling_time < 1.0
    theta_eq = dyn.static_equilibrium(m, LoadCondition())
    assert report.final_value == pytest.approx(dyn.tip_heights(m, theta_eq)[0], abs=1e-4)


def test_release_determinism_and_sampling():
    m = default_model()
    s1 = dyn.simulate_release(m, 0.040, 0.5, sample_rate=1000)
    s2 = dyn.simulate_release(m, 0.040, 0.5, sample_rate=1000)
    assert np.array_equal(s1.values, s2.values)
    assert s1.values.size == 501
    assert s1.sample_rate == 1000


def test_release_argument_validation():
    m = default_model()
    with pytest.raises(ModelError):
        dyn.simulate_release(m, 0.040, 0.0)
    with pytest.raises(ModelError):
        dyn.simulate_release(m, 0.040, 1.0, sample_rate=50)
    with pytest.raises(ModelError):
        dyn.simulate_release(m, 0.040, 1.0, sample_rate=20000)


# ---------------------------------------------------------------------------
# tip force


def test_tip_force_zero_pressure_weightless():
    m = default_model(gravity=[0.0, 0.0])
    result = dyn.measure_tip_force(m, 0.0)
    assert result.force == pytest.approx(0.0, abs=1e-9)


def test_tip_force_zero_at_resting_plane():
    result = dyn.measure_tip_force(default_model(), 0.0)
    assert result.force == pytest.approx(0.0, abs=1e-9)
    assert not result.liftoff


def test_tip_force_matches_penalty_dynamics():
    m = default_model()
    pressure = 60e3
    static = dyn.measure_tip_force(m, pressure)

    plane = static.plane_height
    theta0 = dyn.static_equilibrium(m, LoadCondition())
    s = SimState(0.0, theta0, np.zeros(7))
    load = LoadCondition(pressure=pressure, contact_plane=plane)
    m_damped = m.with_params(joint_c=m.joint_c * 20)  # settle fast
    traj = dyn.simulate(m_damped, s, load, 2.0, record_stride=1000)
    tip_final = dyn.tip_heights(m, traj.theta[-1])[0]
    force_dyn = dyn.PENALTY_STIFFNESS * max(0.0, tip_final - plane)
    assert force_dyn == pytest.approx(static.force, rel=0.02)


def test_tip_force_pressure_linearity():
    m = default_model()
    pressures = np.arange(0.0, 100001.0, 10000.0)
    forces = np.array([dyn.measure_tip_force(m, p).force for p in pressures])
    design = np.column_stack([pressures, np.ones_like(pressures)])
    coef, *_ = np.linalg.lstsq(design, forces, rcond=None)
    pred = design @ coef
    ss_res = ((forces - pred) ** 2).sum()
    ss_tot = ((forces - forces.mean()) ** 2).sum()
    assert 1 - ss_res / ss_tot >= 0.99
    assert np.all(forces >= 0)
    assert np.all(np.diff(forces) > 0)


def test_tip_force_liftoff():
    m = default_model()
    theta0 = dyn.static_equilibrium(m, LoadCondition())
    plane = dyn.tip_heights(m, theta0)[0] + 0.01  # plane above the resting tip
    result = dyn.measure_tip_force(m, 0.0, plane_height=plane)
    assert result.liftoff
    assert result.force == 0.0

import numpy as np
import pytest

from gripper_twin.errors import ModelError
from gripper_twin.model import GripperModel, LoadCondition, SimState, default_model


def test_default_totals():
    m = default_model()
    assert m.n_segments == 8
    assert m.n_joints == 7
    assert m.total_mass == pytest.approx(0.020, abs=1e-12)
    assert m.total_length == pytest.approx(0.068, abs=1e-12)


def test_default_joint_parameters_match_reference_table():
    m = default_model()
    assert np.allclose(m.joint_k, [0.190, 0.176, 0.311, 0.517, 0.103, 0.484, 0.401])
    assert np.allclose(m.joint_c * 1e3, [0.511, 0.405, 1.217, 0.791, 0.227, 0.248, 0.281])
    assert np.allclose(m.joint_alpha * 1e6, [0.279, 0.375, 0.372, 0.507, 0.486, 0.421, 0.482])


@pytest.mark.parametrize("field,value", [
    ("segment_length", [0.01] * 7),           # wrong length
    ("segment_mass", [-1e-3] + [2.5e-3] * 7),  # negative mass
    ("segment_inertia", [0.0] * 8),            # zero inertia
    ("joint_k", [-0.1] * 7),                   # negative stiffness
    ("joint_c", [-1e-4] * 7),                  # negative damping
])
def test_invalid_models_rejected(field, value):
    with pytest.raises(ModelError):
        default_model(**{field: value})


def test_integrator_and_dt_validation():
    with pytest.raises(ModelError):
        default_model(integrator="euler")
    with pytest.raises(ModelError):
        default_model(dt=0.0)
    with pytest.raises(ModelError):
        default_model(dt=2e-3)
    default_model(dt=1e-3)  # boundary is allowed


def test_json_round_trip(tmp_path):
    m = default_model(mount_orientation=0.3, gravity=[0.1, -9.0], integrator="rk4")
    path = tmp_path / "model.json"
    m.save(path)
    m2 = GripperModel.load(path)
    assert m2.n_segments == m.n_segments
    assert np.array_equal(m2.joint_k, m.joint_k)
    assert np.array_equal(m2.gravity, m.gravity)
    assert m2.mount_orientation == m.mount_orientation
    assert m2.integrator == "rk4"
    assert m2.dt == m.dt


def test_model_from_malformed_dict():
    with pytest.raises(ModelError):
        GripperModel.from_dict({"n_segments": "eight"})
    with pytest.raises(ModelError):
        GripperModel.from_dict({"segment_length": "not-a-list"})


def test_with_params_copies():
    m = default_model()
    m2 = m.with_params(joint_k=np.ones(7))
    assert np.all(m2.joint_k == 1.0)
    assert not np.all(m.joint_k == 1.0)


def test_sim_state_validation():
    with pytest.raises(ModelError):
        SimState(0.0, np.zeros(7), np.zeros(6))
    with pytest.raises(ModelError):
        SimState(0.0, np.array([np.nan] * 7), np.zeros(7))
    with pytest.raises(ModelError):
        SimState(0.0, np.array([3.2] + [0.0] * 6), np.zeros(7))  # beyond pi
    s = SimState.rest(default_model())
    assert s.theta.shape == (7,)


def test_load_condition_ranges():
    LoadCondition(tip_mass=0.2, pressure=1e5)
    with pytest.raises(ModelError):
        LoadCondition(tip_mass=0.25)
    with pytest.raises(ModelError):
        LoadCondition(pressure=-1.0)
    with pytest.raises(ModelError):
        LoadCondition(pressure=2e5)

"""Gripper model definition, simulation state, and load conditions.

The gripper is discretized as a chain of rigid segments connected by
single-axis hinge joints. Segment 0 is rigidly attached to the mount;
every following segment hangs off a joint carrying a torsional spring,
a viscous damper, and a pressure-driven motor torque.

Conventions
-----------
* Plane coordinates are x/y in meters, y pointing up, angles
  counterclockwise-positive.
* ``theta[i]`` is the relative angle of joint ``i`` (between segment ``i``
  and segment ``i+1``); the absolute angle of segment ``i`` is the mount
  orientation plus the sum of the first ``i`` joint angles.
* All quantities are SI: meters, kilograms, seconds, newtons, pascals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ModelError

# Reference gripper: 68 x 20 x 22 mm, 20 g, seven hinge gaps -> eight segments.
DEFAULT_N_SEGMENTS = 8
DEFAULT_SEGMENT_LENGTH = 0.068 / 8
DEFAULT_SEGMENT_MASS = 0.020 / 8
DEFAULT_BEAM_HEIGHT = 0.020  # in-plane cross-section height used for inertia

# Calibrated per-joint defaults of the reference gripper (joints 1..7).
DEFAULT_JOINT_K = (0.190, 0.176, 0.311, 0.517, 0.103, 0.484, 0.401)
DEFAULT_JOINT_C = tuple(1e-3 * v for v in (0.511, 0.405, 1.217, 0.791, 0.227, 0.248, 0.281))
DEFAULT_JOINT_ALPHA = tuple(1e-6 * v for v in (0.279, 0.375, 0.372, 0.507, 0.486, 0.421, 0.482))

GRAVITY = 9.81

INTEGRATORS = ("semi_implicit", "rk4")


def _as_array(name, values, length):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (length,):
        raise ModelError(f"{name} must have {length} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} contains non-finite values")
    return arr


@dataclass
class GripperModel:
    """Geometry, mass properties, and per-joint parameters of the chain."""

    n_segments: int = DEFAULT_N_SEGMENTS
    segment_length: np.ndarray = None
    segment_mass: np.ndarray = None
    segment_inertia: np.ndarray = None
    segment_com_offset: np.ndarray = None
    joint_k: np.ndarray = None
    joint_c: np.ndarray = None
    joint_alpha: np.ndarray = None
    rest_angle: np.ndarray = None
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, -GRAVITY]))
    mount_position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    mount_orientation: float = 0.0
    integrator: str = "semi_implicit"
    dt: float = 1e-4

    def __post_init__(self):
        ns = int(self.n_segments)
        if ns < 2:
            raise ModelError("need at least 2 segments (one joint)")
        self.n_segments = ns
        nj = self.n_joints

        if self.segment_length is None:
            self.segment_length = np.full(ns, DEFAULT_SEGMENT_LENGTH)
        if self.segment_mass is None:
            self.segment_mass = np.full(ns, DEFAULT_SEGMENT_MASS)
        self.segment_length = _as_array("segment_length", self.segment_length, ns)
        self.segment_mass = _as_array("segment_mass", self.segment_mass, ns)
        if self.segment_com_offset is None:
            self.segment_com_offset = self.segment_length / 2.0
        if self.segment_inertia is None:
            # Uniform cuboid about its center: m (l^2 + h^2) / 12.
            self.segment_inertia = (self.segment_mass
                                    * (self.segment_length**2 + DEFAULT_BEAM_HEIGHT**2) / 12.0)
        if self.joint_k is None:
            self.joint_k = self._default_joint(DEFAULT_JOINT_K, nj)
        if self.joint_c is None:
            self.joint_c = self._default_joint(DEFAULT_JOINT_C, nj)
        if self.joint_alpha is None:
            self.joint_alpha = self._default_joint(DEFAULT_JOINT_ALPHA, nj)
        if self.rest_angle is None:
            self.rest_angle = np.zeros(nj)

        self.segment_inertia = _as_array("segment_inertia", self.segment_inertia, ns)
        self.segment_com_offset = _as_array("segment_com_offset", self.segment_com_offset, ns)
        self.joint_k = _as_array("joint_k", self.joint_k, nj)
        self.joint_c = _as_array("joint_c", self.joint_c, nj)
        self.joint_alpha = _as_array("joint_alpha", self.joint_alpha, nj)
        self.rest_angle = _as_array("rest_angle", self.rest_angle, nj)
        self.gravity = _as_array("gravity", self.gravity, 2)
        self.mount_position = _as_array("mount_position", self.mount_position, 2)
        self.mount_orientation = float(self.mount_orientation)

        if np.any(self.segment_length <= 0):
            raise ModelError("segment lengths must be strictly positive")
        if np.any(self.segment_mass <= 0):
            raise ModelError("segment masses must be strictly positive")
        if np.any(self.segment_inertia <= 0):
            raise ModelError("segment inertias must be strictly positive")
        if np.any(self.joint_k < 0) or np.any(self.joint_c < 0):
            raise ModelError("joint stiffness and damping must be >= 0")
        if self.integrator not in INTEGRATORS:
            raise ModelError(f"integrator must be one of {INTEGRATORS}")
        self.dt = float(self.dt)
        if not 0 < self.dt <= 1e-3:
            raise ModelError("dt must be in (0, 1e-3] s")

    @staticmethod
    def _default_joint(values, nj):
        if nj == len(values):
            return np.asarray(values, dtype=float)
        # Non-default joint counts fall back to the mean of the reference set.
        return np.full(nj, float(np.mean(values)))

    @property
    def n_joints(self) -> int:
        return self.n_segments - 1

    @property
    def total_length(self) -> float:
        return float(self.segment_length.sum())

    @property
    def total_mass(self) -> float:
        return float(self.segment_mass.sum())

    def with_params(self, **overrides) -> "GripperModel":
        """Copy of this model with selected fields replaced."""
        return replace(self, **overrides)

    def to_dict(self) -> dict:
        return {
            "n_segments": self.n_segments,
            "segment_length": self.segment_length.tolist(),
            "segment_mass": self.segment_mass.tolist(),
            "segment_inertia": self.segment_inertia.tolist(),
            "segment_com_offset": self.segment_com_offset.tolist(),
            "joint_k": self.joint_k.tolist(),
            "joint_c": self.joint_c.tolist(),
            "joint_alpha": self.joint_alpha.tolist(),
            "rest_angle": self.rest_angle.tolist(),
            "gravity": self.gravity.tolist(),
            "mount": {
                "position": self.mount_position.tolist(),
                "orientation": self.mount_orientation,
            },
            "integrator": {"method": self.integrator, "dt": self.dt},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GripperModel":
        try:
            mount = data.get("mount", {})
            integ = data.get("integrator", {})
            return cls(
                n_segments=data.get("n_segments", DEFAULT_N_SEGMENTS),
                segment_length=data.get("segment_length"),
                segment_mass=data.get("segment_mass"),
                segment_inertia=data.get("segment_inertia"),
                segment_com_offset=data.get("segment_com_offset"),
                joint_k=data.get("joint_k"),
                joint_c=data.get("joint_c"),
                joint_alpha=data.get("joint_alpha"),
                rest_angle=data.get("rest_angle"),
                gravity=data.get("gravity", [0.0, -GRAVITY]),
                mount_position=mount.get("position", [0.0, 0.0]),
                mount_orientation=mount.get("orientation", 0.0),
                integrator=integ.get("method", "semi_implicit"),
                dt=integ.get("dt", 1e-4),
            )
        except ModelError:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ModelError(f"malformed model document: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "GripperModel":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelError(f"cannot read model file {path}: {exc}") from exc
        return cls.from_dict(data)


def default_model(**overrides) -> GripperModel:
    """The reference gripper with its calibrated per-joint parameters."""
    return GripperModel(**overrides)


@dataclass
class SimState:
    """Joint angles and angular velocities at a time instant."""

    t: float
    theta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.t = float(self.t)
        if self.theta.ndim != 1 or self.theta.shape != self.omega.shape:
            raise ModelError("theta and omega must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.omega))):
            raise ModelError("state contains non-finite values")
        if np.any(np.abs(self.theta) > np.pi):
            raise ModelError("|theta| > pi: fold-over is outside the model's validity")

    @classmethod
    def rest(cls, model: GripperModel, t: float = 0.0) -> "SimState":
        return cls(t=t, theta=model.rest_angle.copy(), omega=np.zeros(model.n_joints))


@dataclass(frozen=True)
class LoadCondition:
    """External loading of one experiment.

    ``tip_mass`` is a point mass attached at the distal tip, ``pressure`` the
    pneumatic actuation pressure, and ``contact_plane`` an optional horizontal
    scale plane (height in meters) the tip may press against.
    """

    tip_mass: float = 0.0
    pressure: float = 0.0
    contact_plane: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.tip_mass <= 0.2:
            raise ModelError("tip_mass must be within [0, 0.2] kg")
        if not 0.0 <= self.pressure <= 1e5:
            raise ModelError("pressure must be within [0, 1e5] Pa")

"""Digital-twin toolkit for pneumatically actuated beam-like soft grippers.

A planar rigid-link chain with per-joint springs, dampers, and pressure-
driven motor torques stands in for the soft finger; the toolkit simulates
it, extracts measurements from images of the real device, and identifies
the per-joint parameters by particle swarm search.
"""

from .calibration import (Actuation, CalibrationCampaign, ExperimentSpec,
                          MetricConfig, NoiseSpec, Observation, Release,
                          StaticLoad, default_specs, load_campaign,
                          run_campaign, spring_fitness, damping_fitness,
                          torque_fitness, synthesize_observations, validate)
from .dynamics import (Trajectory, forward_kinematics,
                       joint_angles_from_positions, measure_tip_force,
                       mechanical_energy, simulate, simulate_release,
                       static_equilibrium, step, tip_heights)
from .errors import (ConvergenceError, GripperTwinError, IntegrationError,
                     ModelError, ObjectiveError, StageOrderError,
                     ValidityError, VisionError)
from .model import GripperModel, LoadCondition, SimState, default_model
from .pso import PsoConfig, PsoResult, SwarmState, init_swarm, optimize, pso_step
from .render import render_chain, render_sequence
from .signal_metrics import (SettlingReport, TimeSeries, find_extrema,
                             gaussian_smooth, settling_metrics)
from .vision import (Contour, MaskSpec, RasterImage, angles_from_image,
                     extract_contour, find_joint_peaks, hsv_mask, morphology,
                     read_image, split_contour, to_grayscale_mask, track_tip,
                     write_image)

__version__ = "0.1.0"

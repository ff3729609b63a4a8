"""Three-stage parameter identification: spring, damping, torque.

Each stage fits one 7-vector of per-joint parameters by particle swarm
search against observed experiment outcomes:

* spring: static tip-load experiments, mean squared joint-angle error
* damping: release experiments, |settling gap| * (1 + |overshoot gap|)
* torque: pneumatic actuation experiments, |tip force gap|

Stages are ordered; damping runs with the calibrated spring constants
fixed, torque with spring and damping fixed. Observations can come from
real measurements (CSV) or be synthesized from a known twin model, which
is how the self-consistency acceptance runs work.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import measure_tip_force, simulate_release, static_equilibrium
from .errors import (ConvergenceError, GripperTwinError, IntegrationError,
                     ModelError, StageOrderError, ValidityError)
from .model import GripperModel, LoadCondition, default_model
from .pso import PsoConfig, PsoResult, optimize
from .signal_metrics import gaussian_smooth, settling_metrics

STAGES = ("spring", "damping", "torque")
STAGE_PREREQS = {"spring": (), "damping": ("k",), "torque": ("k", "c")}
STAGE_BOUNDS = {
    "spring": (0.01, 1.0),      # N*m/rad
    "damping": (1e-5, 5e-3),    # N*m*s/rad
    "torque": (1e-8, 2e-6),     # torque per pascal
}
PENALTY_FITNESS = 1e6  # objective value for candidates outside the model's validity

# default experiment protocol
TRAIN_WEIGHTS_KG = (0.0, 0.020, 0.040)
VALIDATION_WEIGHTS_KG = (0.030, 0.050, 0.070)
DAMPING_WEIGHTS_KG = (0.020, 0.040)
PRESSURE_GRID_PA = tuple(float(p) for p in range(0, 100001, 10000))
VALIDATION_PRESSURES_PA = (15e3, 35e3, 55e3, 75e3, 95e3)
RELEASE_DURATION_S = 2.0


# ---------------------------------------------------------------------------
# experiment specs and observations

@dataclass(frozen=True)
class StaticLoad:
    tip_mass: float  # kg

    def __post_init__(self):
        if not 0.0 <= self.tip_mass <= 0.1:
            raise ModelError("static load mass must be within [0, 0.1] kg")


@dataclass(frozen=True)
class Release:
    initial_mass: float  # kg
    duration: float = RELEASE_DURATION_S  # s

    def __post_init__(self):
        if not 0.0 <= self.initial_mass <= 0.1:
            raise ModelError("release mass must be within [0, 0.1] kg")
        if self.duration <= 0:
            raise ModelError("release duration must be positive")


@dataclass(frozen=True)
class Actuation:
    pressure: float  # Pa

    def __post_init__(self):
        if not 0.0 <= self.pressure <= 1e5:
            raise ModelError("pressure must be within [0, 1e5] Pa")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: StaticLoad | Release | Actuation
    repetitions: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ModelError("repetitions must be >= 1")


@dataclass(frozen=True)
class JointAngles:
    theta: tuple

    @property
    def values(self):
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class SettlingData:
    settling_time: float
    overshoots: int


@dataclass(frozen=True)
class TipForce:
    force: float


_PAYLOAD_FOR_KIND = {StaticLoad: JointAngles, Release: SettlingData, Actuation: TipForce}


@dataclass(frozen=True)
class Observation:
    payload: JointAngles | SettlingData | TipForce
    source: str = "real"  # "real" | "synthetic"

    def __post_init__(self):
        if self.source not in ("real", "synthetic"):
            raise ModelError("observation source must be 'real' or 'synthetic'")


@dataclass
class MetricConfig:
    """How release trajectories are reduced and compared."""

    sample_rate: float = 1000.0
    smoothing_sigma: float = 0.0  # samples; simulated traces are clean
    overshoot_threshold: float = 1e-3
    band: float = 1e-3
    overshoot_weight: float = 0.0  # regularized damping fitness, off by default


@dataclass
class NoiseSpec:
    """Additive observation noise for robustness studies."""

    angle_sigma: float = 0.005     # rad
    settling_sigma: float = 0.005  # s
    force_sigma: float = 0.02      # N
    seed: int = 0


# ---------------------------------------------------------------------------
# fitness functions

def spring_fitness(sim_angles, real_angles) -> float:
    """Mean squared per-joint angle error."""
    sim = np.asarray(sim_angles, dtype=float)
    real = np.asarray(real_angles, dtype=float)
    if sim.shape != real.shape:
        raise ModelError(f"angle vectors differ in shape: {sim.shape} vs {real.shape}")
    return float(np.mean((sim - real) ** 2))


def damping_fitness(sim: SettlingData, real: SettlingData,
                    overshoot_weight: float = 0.0) -> float:
    """|settling time gap| scaled by (1 + |overshoot count gap|).

    Zero whenever the settling times coincide, even if the overshoot
    counts differ (the count term only multiplies). A nonzero
    ``overshoot_weight`` adds that degenerate direction back as
    ``weight * |count gap|`` seconds; it is off by default to keep the
    measure in its standard form.
    """
    gap = abs(sim.overshoots - real.overshoots)
    return float(abs(sim.settling_time - real.settling_time) * (1 + gap)
                 + overshoot_weight * gap)


def torque_fitness(sim_force: float, real_force: float) -> float:
    """Absolute tip-force gap."""
    if not (np.isfinite(sim_force) and np.isfinite(real_force)):
        raise ModelError("forces must be finite")
    return float(abs(sim_force - real_force))


def _payload_fitness(sim, obs, overshoot_weight: float = 0.0) -> float:
    if isinstance(sim, JointAngles):
        return spring_fitness(sim.values, obs.values)
    if isinstance(sim, SettlingData):
        return damping_fitness(sim, obs, overshoot_weight=overshoot_weight)
    return torque_fitness(sim.force, obs.force)


# ---------------------------------------------------------------------------
# running experiments on a model

def simulate_spec(model: GripperModel, spec: ExperimentSpec,
                  metrics: MetricConfig) -> JointAngles | SettlingData | TipForce:
    """Run one experiment on ``model`` and reduce it to its observed payload."""
    kind = spec.kind
    if isinstance(kind, StaticLoad):
        theta = static_equilibrium(model, LoadCondition(tip_mass=kind.tip_mass))
        return JointAngles(tuple(theta))
    if isinstance(kind, Release):
        series = simulate_release(model, kind.initial_mass, kind.duration,
                                  sample_rate=metrics.sample_rate)
        if metrics.smoothing_sigma > 0:
            series = gaussian_smooth(series, metrics.smoothing_sigma)
        report = settling_metrics(series, overshoot_threshold=metrics.overshoot_threshold,
                                  band=metrics.band)
        return SettlingData(report.settling_time, report.overshoot_count)
    if isinstance(kind, Actuation):
        return TipForce(measure_tip_force(model, kind.pressure).force)
    raise ModelError(f"unknown experiment kind {kind!r}")


def synthesize_observations(model: GripperModel, specs, noise: NoiseSpec | None = None,
                            metrics: MetricConfig | None = None) -> list[list[Observation]]:
    """Observations a perfect sensor would record on ``model``.

    Returns one observation list per spec (``repetitions`` entries each).
    With a NoiseSpec, additive Gaussian noise perturbs angles, settling
    times, and forces (overshoot counts stay integral); without one the
    result is deterministic and bit-identical across runs.
    """
    metrics = metrics or MetricConfig()
    rng = np.random.default_rng(noise.seed) if noise is not None else None
    out = []
    for spec in specs:
        clean = simulate_spec(model, spec, metrics)
        obs_list = []
        for _ in range(spec.repetitions):
            payload = clean
            if rng is not None:
                if isinstance(clean, JointAngles):
                    payload = JointAngles(tuple(
                        clean.values + rng.normal(0.0, noise.angle_sigma, len(clean.theta))))
                elif isinstance(clean, SettlingData):
                    payload = SettlingData(
                        max(0.0, clean.settling_time + rng.normal(0.0, noise.settling_sigma)),
                        clean.overshoots)
                else:
                    payload = TipForce(clean.force + rng.normal(0.0, noise.force_sigma))
            obs_list.append(Observation(payload, source="synthetic"))
        out.append(obs_list)
    return out


# ---------------------------------------------------------------------------
# campaigns

def stage_bounds(stage: str, n_joints: int) -> np.ndarray:
    lo, hi = STAGE_BOUNDS[stage]
    return np.tile([lo, hi], (n_joints, 1))


def default_specs(stage: str):
    """Standard train/validation protocol of the calibration campaign."""
    if stage == "spring":
        train = [ExperimentSpec(StaticLoad(m)) for m in TRAIN_WEIGHTS_KG]
        val = [ExperimentSpec(StaticLoad(m)) for m in VALIDATION_WEIGHTS_KG]
    elif stage == "damping":
        train = [ExperimentSpec(Release(m)) for m in DAMPING_WEIGHTS_KG]
        val = [ExperimentSpec(Release(m)) for m in VALIDATION_WEIGHTS_KG]
    elif stage == "torque":
        train = [ExperimentSpec(Actuation(p)) for p in PRESSURE_GRID_PA]
        val = [ExperimentSpec(Actuation(p)) for p in VALIDATION_PRESSURES_PA]
    else:
        raise ModelError(f"unknown stage {stage!r}")
    return train, val


@dataclass
class CalibrationCampaign:
    stage: str
    pso: PsoConfig
    train_specs: list
    train_observations: list
    validation_specs: list = field(default_factory=list)
    validation_observations: list = field(default_factory=list)
    base_model: GripperModel = field(default_factory=default_model)
    fixed_params: dict = field(default_factory=dict)
    metrics: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ModelError(f"stage must be one of {STAGES}")
        if len(self.train_specs) != len(self.train_observations):
            raise ModelError("need one observation list per training spec")
        if len(self.validation_specs) != len(self.validation_observations):
            raise ModelError("need one observation list per validation spec")
        expected = _PAYLOAD_FOR_KIND
        for spec, obs_list in zip(self.train_specs + self.validation_specs,
                                  self.train_observations + self.validation_observations):
            if not obs_list:
                raise ModelError("every spec needs at least one observation")
            want = expected[type(spec.kind)]
            for obs in obs_list:
                if not isinstance(obs.payload, want):
                    raise ModelError(
                        f"observation payload {type(obs.payload).__name__} does not "
                        f"match spec kind {type(spec.kind).__name__}")


def _stage_model(campaign: CalibrationCampaign, params: np.ndarray) -> GripperModel:
    fixed = campaign.fixed_params
    overrides = {}
    if campaign.stage == "spring":
        overrides["joint_k"] = params
    elif campaign.stage == "damping":
        overrides["joint_k"] = fixed["k"]
        overrides["joint_c"] = params
    else:
        overrides["joint_k"] = fixed["k"]
        overrides["joint_c"] = fixed["c"]
        overrides["joint_alpha"] = params
    return campaign.base_model.with_params(**overrides)


def campaign_objective(campaign: CalibrationCampaign):
    """Mean stage fitness over the training specs as a function of the 7-vector.

    Candidates that push the simulation outside its validity region (no
    static solution, fold-over, divergence) receive a large finite penalty
    so the swarm steers away instead of aborting; genuine programming
    errors still propagate.
    """
    def objective(params):
        model = _stage_model(campaign, np.asarray(params, dtype=float))
        total = 0.0
        for spec, obs_list in zip(campaign.train_specs, campaign.train_observations):
            try:
                sim = simulate_spec(model, spec, campaign.metrics)
            except (ValidityError, ConvergenceError, IntegrationError):
                return PENALTY_FITNESS
            total += float(np.mean([
                _payload_fitness(sim, o.payload, campaign.metrics.overshoot_weight)
                for o in obs_list]))
        return total / len(campaign.train_specs)

    return objective


def summarize_particles(pbest_log: np.ndarray, group: int = 10) -> list[dict]:
    """Per-joint distribution of personal bests, pooled over iteration groups.

    Mirrors the convergence box plots: every ``group`` iterations the
    personal-best positions of all particles are pooled and summarized.
    """
    iters = pbest_log.shape[0]
    rows = []
    for g0 in range(0, iters, group):
        block = pbest_log[g0:g0 + group].reshape(-1, pbest_log.shape[2])
        q = np.quantile(block, [0.0, 0.25, 0.5, 0.75, 1.0], axis=0)
        mean = block.mean(axis=0)
        for j in range(pbest_log.shape[2]):
            rows.append({
                "iteration_start": g0 + 1,
                "iteration_end": min(g0 + group, iters),
                "joint": j + 1,
                "min": float(q[0, j]), "q1": float(q[1, j]), "median": float(q[2, j]),
                "q3": float(q[3, j]), "max": float(q[4, j]), "mean": float(mean[j]),
            })
    return rows


@dataclass
class ValidationReport:
    """Side-by-side simulated vs observed outcomes."""

    rows: list            # dicts: kind, condition, metric, observed, simulated
    spec_fitness: list    # one fitness per validation spec
    mean_fitness: float
    chain_overlays: dict  # condition -> (sim_points, obs_points) for static specs

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("kind,condition,metric,observed,simulated\n")
            for r in self.rows:
                fh.write(f"{r['kind']},{r['condition']:.10g},{r['metric']},"
                         f"{r['observed']:.10g},{r['simulated']:.10g}\n")


def _spec_condition(spec: ExperimentSpec) -> float:
    kind = spec.kind
    if isinstance(kind, StaticLoad):
        return kind.tip_mass
    if isinstance(kind, Release):
        return kind.initial_mass
    return kind.pressure


def validate(model: GripperModel, specs, observations,
             metrics: MetricConfig | None = None) -> ValidationReport:
    """Evaluate ``model`` against held-out observations.

    For static specs the report also carries chain-shape overlays (the
    simulated and observed joint polylines) ready for contour comparison
    plots; actuation rows double as the force-pressure table.
    """
    from .dynamics import forward_kinematics  # local to avoid cycle at import time

    metrics = metrics or MetricConfig()
    rows, fitnesses, overlays = [], [], {}
    for spec, obs_list in zip(specs, observations):
        sim = simulate_spec(model, spec, metrics)
        cond = _spec_condition(spec)
        fit = float(np.mean([
            _payload_fitness(sim, o.payload, metrics.overshoot_weight)
            for o in obs_list]))
        fitnesses.append(fit)
        kind_name = type(spec.kind).__name__
        if isinstance(sim, JointAngles):
            obs_mean = np.mean([o.payload.values for o in obs_list], axis=0)
            for j in range(len(sim.theta)):
                rows.append({"kind": kind_name, "condition": cond,
                             "metric": f"joint{j + 1}_angle_rad",
                             "observed": float(obs_mean[j]),
                             "simulated": float(sim.theta[j])})
            overlays[cond] = (forward_kinematics(model, sim.values),
                              forward_kinematics(model, obs_mean))
        elif isinstance(sim, SettlingData):
            obs_ts = float(np.mean([o.payload.settling_time for o in obs_list]))
            obs_no = float(np.mean([o.payload.overshoots for o in obs_list]))
            rows.append({"kind": kind_name, "condition": cond, "metric": "settling_time_s",
                         "observed": obs_ts, "simulated": sim.settling_time})
            rows.append({"kind": kind_name, "condition": cond, "metric": "overshoots",
                         "observed": obs_no, "simulated": float(sim.overshoots)})
        else:
            obs_f = float(np.mean([o.payload.force for o in obs_list]))
            rows.append({"kind": kind_name, "condition": cond, "metric": "force_n",
                         "observed": obs_f, "simulated": sim.force})
        rows.append({"kind": kind_name, "condition": cond, "metric": "fitness",
                     "observed": 0.0, "simulated": fit})
    mean_fit = float(np.mean(fitnesses)) if fitnesses else 0.0
    return ValidationReport(rows, fitnesses, mean_fit, overlays)


@dataclass
class CampaignResult:
    stage: str
    best_params: np.ndarray
    parameters: dict          # full {"k","c","alpha"} with fixed + calibrated
    train_fitness: float
    history: np.ndarray
    particle_summaries: list
    validation: ValidationReport | None
    pso_result: PsoResult

    def parameters_to_json(self, path) -> None:
        save_parameters(path, self.parameters)

    def summaries_to_csv(self, path) -> None:
        cols = ["iteration_start", "iteration_end", "joint",
                "min", "q1", "median", "q3", "max", "mean"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.particle_summaries:
                fh.write(",".join(f"{r[c]:.10g}" if isinstance(r[c], float) else str(r[c])
                                  for c in cols) + "\n")

    def particles_to_csv(self, path) -> None:
        log = self.pso_result.pbest_positions_log
        fit = self.pso_result.pbest_fitness_log
        n_joints = log.shape[2]
        with open(path, "w") as fh:
            fh.write("iteration,particle,pbest_fitness,"
                     + ",".join(f"p{j + 1}" for j in range(n_joints)) + "\n")
            for it in range(log.shape[0]):
                for p in range(log.shape[1]):
                    vals = ",".join(f"{v:.10g}" for v in log[it, p])
                    fh.write(f"{it + 1},{p},{fit[it, p]:.10g},{vals}\n")


def run_campaign(campaign: CalibrationCampaign, workers: int = 0) -> CampaignResult:
    """Optimize the stage's per-joint parameters and validate the result."""
    for prereq in STAGE_PREREQS[campaign.stage]:
        if prereq not in campaign.fixed_params or campaign.fixed_params[prereq] is None:
            raise StageOrderError(
                f"stage '{campaign.stage}' requires previously calibrated "
                f"'{prereq}' parameters; run the earlier stage first")
    n = campaign.base_model.n_joints
    if campaign.pso.dimension != n:
        raise ModelError(f"optimizer bounds must cover {n} joints")

    result = optimize(campaign_objective(campaign), campaign.pso,
                      workers=workers, record_particles=True)

    best = result.best_position
    parameters = {"k": None, "c": None, "alpha": None}
    for name in ("k", "c", "alpha"):
        if name in campaign.fixed_params and campaign.fixed_params[name] is not None:
            parameters[name] = np.asarray(campaign.fixed_params[name], dtype=float)
    parameters[{"spring": "k", "damping": "c", "torque": "alpha"}[campaign.stage]] = best

    validation = None
    if campaign.validation_specs:
        model_best = _stage_model(campaign, best)
        validation = validate(model_best, campaign.validation_specs,
                              campaign.validation_observations, campaign.metrics)

    return CampaignResult(
        stage=campaign.stage,
        best_params=best,
        parameters=parameters,
        train_fitness=result.best_fitness,
        history=result.history,
        particle_summaries=summarize_particles(result.pbest_positions_log),
        validation=validation,
        pso_result=result,
    )


# ---------------------------------------------------------------------------
# file formats

def save_parameters(path, parameters: dict) -> None:
    """Parameter table JSON: per-joint k, c, alpha arrays (null if unknown)."""
    doc = {}
    for name in ("k", "c", "alpha"):
        val = parameters.get(name)
        doc[name] = None if val is None else np.asarray(val, dtype=float).tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load_parameters(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read parameters {path}: {exc}") from exc
    out = {}
    for name in ("k", "c", "alpha"):
        val = doc.get(name)
        out[name] = None if val is None else np.asarray(val, dtype=float)
    return out


def save_observations_csv(path, specs, observations) -> None:
    """Observation CSV, one schema per experiment kind."""
    kinds = {type(s.kind) for s in specs}
    if len(kinds) != 1:
        raise ModelError("cannot mix experiment kinds in one observation file")
    kind = kinds.pop()
    with open(path, "w") as fh:
        if kind is StaticLoad:
            fh.write("tip_mass_kg,repetition,joint,angle_rad\n")
            for spec, obs_list in zip(specs, observations):
                for rep, obs in enumerate(obs_list):
                    for j, ang in enumerate(obs.payload.values):
                        fh.write(f"{spec.kind.tip_mass:.10g},{rep},{j + 1},{ang:.12g}\n")
        elif kind is Release:
            fh.write("initial_mass_kg,duration_s,repetition,settling_time_s,overshoots\n")
            for spec, obs_list in zip(specs, observations):
                for rep, obs in enumerate(obs_list):
                    fh.write(f"{spec.kind.initial_mass:.10g},{spec.kind.duration:.10g},"
                             f"{rep},{obs.payload.settling_time:.12g},{obs.payload.overshoots}\n")
        else:
            fh.write("pressure_pa,repetition,force_n\n")
            for spec, obs_list in zip(specs, observations):
                for rep, obs in enumerate(obs_list):
                    fh.write(f"{spec.kind.pressure:.10g},{rep},{obs.payload.force:.12g}\n")


def load_observations_csv(path, specs, source: str = "real") -> list[list[Observation]]:
    """Read an observation CSV and align its rows with ``specs`` by condition."""
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            body = [line.strip().split(",") for line in fh if line.strip()]
    except OSError as exc:
        raise ModelError(f"cannot read observations {path}: {exc}") from exc

    out = []
    for spec in specs:
        cond = _spec_condition(spec)
        if isinstance(spec.kind, StaticLoad):
            if header != ["tip_mass_kg", "repetition", "joint", "angle_rad"]:
                raise ModelError(f"{path}: unexpected header for static observations")
            rows = [r for r in body if np.isclose(float(r[0]), cond, rtol=1e-9, atol=1e-12)]
            reps = sorted({int(r[1]) for r in rows})
            obs_list = []
            for rep in reps:
                sub = sorted((r for r in rows if int(r[1]) == rep), key=lambda r: int(r[2]))
                obs_list.append(Observation(
                    JointAngles(tuple(float(r[3]) for r in sub)), source=source))
        elif isinstance(spec.kind, Release):
            if header != ["initial_mass_kg", "duration_s", "repetition",
                          "settling_time_s", "overshoots"]:
                raise ModelError(f"{path}: unexpected header for release observations")
            rows = [r for r in body if np.isclose(float(r[0]), cond, rtol=1e-9, atol=1e-12)]
            obs_list = [Observation(SettlingData(float(r[3]), int(r[4])), source=source)
                        for r in sorted(rows, key=lambda r: int(r[2]))]
        else:
            if header != ["pressure_pa", "repetition", "force_n"]:
                raise ModelError(f"{path}: unexpected header for force observations")
            rows = [r for r in body if np.isclose(float(r[0]), cond, rtol=1e-9, atol=1e-12)]
            obs_list = [Observation(TipForce(float(r[2])), source=source)
                        for r in sorted(rows, key=lambda r: int(r[1]))]
        if not obs_list:
            raise ModelError(f"{path}: no observations for condition {cond:.6g}")
        out.append(obs_list)
    return out


def _spec_from_json(stage: str, entry: dict) -> ExperimentSpec:
    reps = int(entry.get("repetitions", 1))
    if stage == "spring":
        return ExperimentSpec(StaticLoad(float(entry["tip_mass_g"]) / 1000.0), reps)
    if stage == "damping":
        return ExperimentSpec(Release(float(entry["initial_mass_g"]) / 1000.0,
                                      float(entry.get("duration_s", RELEASE_DURATION_S))), reps)
    return ExperimentSpec(Actuation(float(entry["pressure_kpa"]) * 1000.0), reps)


def load_campaign(path, seed: int | None = None) -> CalibrationCampaign:
    """Campaign definition JSON -> CalibrationCampaign.

    The document names the calibration stage, optimizer settings, the
    train/validation experiment lists, and where their observations come
    from: a CSV reference or a ``synthesize`` block naming a twin model.
    Relative paths resolve against the campaign file's directory.
    ``seed`` overrides the optimizer seed (the CLI requires it explicitly).
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read campaign {path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    try:
        stage = doc["stage"]
        if stage not in STAGES:
            raise ModelError(f"stage must be one of {STAGES}, got {stage!r}")
        base_model = (GripperModel.load(resolve(doc["model"]))
                      if doc.get("model") else default_model())
        fixed = {}
        if doc.get("fixed_parameters"):
            loaded = load_parameters(resolve(doc["fixed_parameters"]))
            fixed = {k: v for k, v in loaded.items() if v is not None}

        opt = dict(doc.get("optimizer", {}))
        if "bounds" not in opt:
            opt["bounds"] = stage_bounds(stage, base_model.n_joints).tolist()
        if seed is not None:
            opt["seed"] = seed
        pso_cfg = PsoConfig.from_dict(opt)

        metrics = MetricConfig(**doc.get("metrics", {}))

        def load_block(block):
            specs = [_spec_from_json(stage, e) for e in block["specs"]]
            obs_src = block.get("observations")
            if obs_src is None:
                raise ModelError("each spec block needs an 'observations' entry")
            if isinstance(obs_src, str):
                observations = load_observations_csv(resolve(obs_src), specs)
            else:
                syn = obs_src.get("synthesize", {})
                twin = (GripperModel.load(resolve(syn["model"]))
                        if syn.get("model") else default_model())
                noise = NoiseSpec(**syn["noise"]) if syn.get("noise") else None
                observations = synthesize_observations(twin, specs, noise=noise,
                                                       metrics=metrics)
            return specs, observations

        train_specs, train_obs = load_block(doc["train"])
        val_specs, val_obs = ([], [])
        if doc.get("validation"):
            val_specs, val_obs = load_block(doc["validation"])
    except GripperTwinError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed campaign {path}: {exc}") from exc

    return CalibrationCampaign(
        stage=stage, pso=pso_cfg,
        train_specs=train_specs, train_observations=train_obs,
        validation_specs=val_specs, validation_observations=val_obs,
        base_model=base_model, fixed_params=fixed, metrics=metrics,
    )

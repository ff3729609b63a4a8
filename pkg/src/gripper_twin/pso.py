"""Global-best particle swarm optimization with bounded search.

Velocity and position updates follow the classic form

    v <- omega * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)
    x <- x + v

with fresh uniform r1, r2 per particle and dimension each iteration.
Randomness comes from a counter-based generator keyed on
(seed, stream, iteration, particle), so results are bit-identical no
matter how fitness evaluations are scheduled.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, ObjectiveError

_STREAM_POSITION = 0
_STREAM_VELOCITY = 1
_STREAM_STEP = 2


@dataclass
class PsoConfig:
    """Optimizer hyperparameters; bounds are one (low, high) pair per dimension."""

    bounds: np.ndarray
    omega: float = 0.9
    c1: float = 0.5
    c2: float = 0.3
    swarm_size: int = 30
    iterations: int = 100
    seed: int = 0

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if self.bounds.ndim != 2 or self.bounds.shape[1] != 2:
            raise ModelError("bounds must be an (n_dims, 2) array of [low, high]")
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ModelError("each bound must satisfy low < high")
        if not 0.0 <= self.omega <= 1.0:
            raise ModelError("omega must be within [0, 1]")
        if self.c1 < 0 or self.c2 < 0:
            raise ModelError("c1 and c2 must be >= 0")
        if self.swarm_size < 2:
            raise ModelError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ModelError("iterations must be >= 1")
        self.seed = int(self.seed)

    @property
    def dimension(self) -> int:
        return self.bounds.shape[0]

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "c1": self.c1,
            "c2": self.c2,
            "swarm_size": self.swarm_size,
            "iterations": self.iterations,
            "seed": self.seed,
            "bounds": self.bounds.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PsoConfig":
        return cls(
            bounds=data["bounds"],
            omega=data.get("omega", 0.9),
            c1=data.get("c1", 0.5),
            c2=data.get("c2", 0.3),
            swarm_size=data.get("swarm_size", 30),
            iterations=data.get("iterations", 100),
            seed=data.get("seed", 0),
        )

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _rng(seed: int, stream: int, iteration: int, particle: int) -> np.random.Generator:
    """Counter-based stream: independent of evaluation order and threading."""
    key = np.array(
        [np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF),
         (np.uint64(stream) << np.uint64(56))
         | (np.uint64(iteration) << np.uint64(28))
         | np.uint64(particle)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class SwarmState:
    """Particle positions/velocities plus personal and global bests."""

    positions: np.ndarray
    velocities: np.ndarray
    pbest_positions: np.ndarray
    pbest_fitness: np.ndarray
    gbest_position: np.ndarray
    gbest_fitness: float
    iteration: int = 0


def init_swarm(config: PsoConfig, dimension: int) -> SwarmState:
    """Uniform positions inside the bounds, velocities in +-(high - low).

    Personal bests start at the initial positions with unknown (infinite)
    fitness; the first step fills them in.
    """
    if dimension < 1:
        raise ModelError("dimension must be >= 1")
    if dimension != config.dimension:
        raise ModelError(
            f"config bounds describe {config.dimension} dims, requested {dimension}")
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    span = hi - lo
    positions = np.empty((config.swarm_size, dimension))
    velocities = np.empty_like(positions)
    for i in range(config.swarm_size):
        positions[i] = _rng(config.seed, _STREAM_POSITION, 0, i).uniform(lo, hi)
        velocities[i] = _rng(config.seed, _STREAM_VELOCITY, 0, i).uniform(-span, span)
    return SwarmState(
        positions=positions,
        velocities=velocities,
        pbest_positions=positions.copy(),
        pbest_fitness=np.full(config.swarm_size, np.inf),
        gbest_position=positions[0].copy(),
        gbest_fitness=np.inf,
        iteration=0,
    )


def pso_step(state: SwarmState, config: PsoConfig, fitness_values) -> SwarmState:
    """Apply one iteration given the fitness of the current positions.

    Personal/global bests update on strict improvement (ties keep the
    incumbent), then every particle moves; positions are clamped to the
    bounds with the velocity zeroed on any clamped dimension.
    """
    fitness = np.asarray(fitness_values, dtype=float)
    if fitness.shape != (config.swarm_size,):
        raise ModelError(
            f"need one fitness per particle ({config.swarm_size}), got {fitness.shape}")
    if np.any(np.isnan(fitness)):
        bad = np.flatnonzero(np.isnan(fitness))
        raise ObjectiveError(f"NaN fitness for particle(s) {bad.tolist()}",
                             particle=int(bad[0]), iteration=state.iteration)

    pbest_pos = state.pbest_positions.copy()
    pbest_fit = state.pbest_fitness.copy()
    gbest_pos = state.gbest_position.copy()
    gbest_fit = state.gbest_fitness
    for i in range(config.swarm_size):
        if fitness[i] < pbest_fit[i]:
            pbest_fit[i] = fitness[i]
            pbest_pos[i] = state.positions[i]
        if fitness[i] < gbest_fit:
            gbest_fit = float(fitness[i])
            gbest_pos = state.positions[i].copy()

    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    dim = config.dimension
    positions = np.empty_like(state.positions)
    velocities = np.empty_like(state.velocities)
    for i in range(config.swarm_size):
        rng = _rng(config.seed, _STREAM_STEP, state.iteration + 1, i)
        r1 = rng.uniform(size=dim)
        r2 = rng.uniform(size=dim)
        v = (config.omega * state.velocities[i]
             + config.c1 * r1 * (pbest_pos[i] - state.positions[i])
             + config.c2 * r2 * (gbest_pos - state.positions[i]))
        x = state.positions[i] + v
        low = x < lo
        high = x > hi
        x[low] = lo[low]
        x[high] = hi[high]
        v[low | high] = 0.0
        positions[i] = x
        velocities[i] = v

    return SwarmState(
        positions=positions,
        velocities=velocities,
        pbest_positions=pbest_pos,
        pbest_fitness=pbest_fit,
        gbest_position=gbest_pos,
        gbest_fitness=gbest_fit,
        iteration=state.iteration + 1,
    )


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_fitness: float
    history: np.ndarray  # global-best fitness per iteration (non-increasing)
    pbest_positions_log: np.ndarray | None = None  # (iters, swarm, dim)
    pbest_fitness_log: np.ndarray | None = None    # (iters, swarm)

    def history_to_csv(self, path) -> None:
        data = np.column_stack([np.arange(1, self.history.size + 1), self.history])
        np.savetxt(path, data, delimiter=",", header="iteration,best_fitness",
                   comments="", fmt=["%d", "%.12g"])


def _evaluate(objective, positions, iteration, workers):
    def run_one(i):
        try:
            return float(objective(positions[i]))
        except Exception as exc:
            raise ObjectiveError(
                f"objective failed for particle {i} at iteration {iteration}: {exc}",
                particle=i, iteration=iteration) from exc

    idx = range(positions.shape[0])
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_one, idx))
    return [run_one(i) for i in idx]


def optimize(objective, config: PsoConfig, workers: int = 0,
             record_particles: bool = False) -> PsoResult:
    """Run the configured number of full iterations and return the best point.

    ``objective`` must be a pure function of the position. Evaluations within
    an iteration may run on a thread pool (``workers`` > 1) but results are
    applied in particle-index order, so the outcome does not depend on the
    evaluation schedule.
    """
    dim = config.dimension
    state = init_swarm(config, dim)
    history = np.empty(config.iterations)
    pbest_log = np.empty((config.iterations, config.swarm_size, dim)) if record_particles else None
    pfit_log = np.empty((config.iterations, config.swarm_size)) if record_particles else None
    for it in range(config.iterations):
        fitness = _evaluate(objective, state.positions, it, workers)
        state = pso_step(state, config, fitness)
        history[it] = state.gbest_fitness
        if record_particles:
            pbest_log[it] = state.pbest_positions
            pfit_log[it] = state.pbest_fitness
    return PsoResult(
        best_position=state.gbest_position.copy(),
        best_fitness=float(state.gbest_fitness),
        history=history,
        pbest_positions_log=pbest_log,
        pbest_fitness_log=pfit_log,
    )

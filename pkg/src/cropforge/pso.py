"""Particle swarm optimization over the unit box [0, 1]^D.

Global-best topology with clamped positions and velocities; fully
deterministic for a given seed. Non-finite objective values are treated as
+inf so a particle keeps its previous personal best.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PsoConfig:
    swarm_size: int = 30
    iterations: int = 150
    inertia: float = 0.72  # Clerc constriction defaults
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 0
    velocity_clamp: float = 0.5

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.inertia < 1.0:
            raise ValueError("inertia must lie in [0, 1)")
        if self.cognitive <= 0 or self.social <= 0:
            raise ValueError("cognitive and social factors must be > 0")
        if self.velocity_clamp <= 0:
            raise ValueError("velocity_clamp must be > 0")


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_cost: float
    history: list[float] = field(default_factory=list)  # best cost per iteration


def _evaluate(objective, positions: np.ndarray) -> np.ndarray:
    costs = np.empty(positions.shape[0])
    for i, x in enumerate(positions):
        c = objective(x)
        costs[i] = c if (c is not None and math.isfinite(c)) else math.inf
    return costs


def pso_minimize(objective, dim: int, config: PsoConfig) -> PsoResult:
    """Minimize ``objective`` over [0, 1]^dim.

    The first iteration evaluates the initial swarm; each further iteration
    applies the velocity update
    v <- inertia*v + cognitive*r1*(pbest - x) + social*r2*(gbest - x)
    with per-dimension uniform r1, r2, then clamps positions to the box.
    ``history`` holds the running best cost, one entry per iteration.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n = config.swarm_size
    x = rng.uniform(0.0, 1.0, size=(n, dim))
    v = rng.uniform(-config.velocity_clamp / 2, config.velocity_clamp / 2, size=(n, dim))

    costs = _evaluate(objective, x)
    if not np.isfinite(costs).any():
        raise ValueError("objective returned no finite value on the initial swarm")
    pbest = x.copy()
    pbest_cost = costs.copy()
    g = int(np.argmin(pbest_cost))
    gbest = pbest[g].copy()
    gbest_cost = float(pbest_cost[g])
    history = [gbest_cost]

    for _ in range(config.iterations - 1):
        r1 = rng.uniform(size=(n, dim))
        r2 = rng.uniform(size=(n, dim))
        v = (config.inertia * v
             + config.cognitive * r1 * (pbest - x)
             + config.social * r2 * (gbest - x))
        np.clip(v, -config.velocity_clamp, config.velocity_clamp, out=v)
        x = np.clip(x + v, 0.0, 1.0)
        costs = _evaluate(objective, x)
        improved = costs < pbest_cost
        pbest[improved] = x[improved]
        pbest_cost[improved] = costs[improved]
        g = int(np.argmin(pbest_cost))
        if pbest_cost[g] < gbest_cost:
            gbest = pbest[g].copy()
            gbest_cost = float(pbest_cost[g])
        history.append(gbest_cost)

    return PsoResult(best_position=gbest, best_cost=gbest_cost, history=history)

"""Particle-swarm search over feature subsets and classifier settings.

Positions live in the unit cube.  The leading coordinates decode to a
feature mask (>= 0.5 means the feature is kept); any remaining
coordinates map affinely onto declared hyperparameter ranges.  Fitness
is whatever callable the caller supplies; the feature-selection wrapper
in :mod:`eegfusion.evaluate` plugs in inner-fold validation accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SearchError


@dataclass(frozen=True)
class HyperparamSpec:
    """Affine decode of one position coordinate onto [low, high]."""

    name: str
    low: float
    high: float
    integer: bool = False
    log_scale: bool = False

    def decode(self, u: float):
        if self.log_scale:
            value = self.low * (self.high / self.low) ** u
        else:
            value = self.low + (self.high - self.low) * u
        return int(round(value)) if self.integer else float(value)


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 10
    iterations: int = 20
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 0

    def __post_init__(self):
        if self.particles < 1 or self.iterations < 1:
            raise ParameterError("particles and iterations must be >= 1")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float


@dataclass(frozen=True)
class Candidate:
    """A decoded particle: feature mask plus named hyperparameters."""

    mask: np.ndarray
    hyperparams: dict

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())


@dataclass
class SwarmResult:
    candidate: Candidate
    fitness: float
    position: np.ndarray
    trace: list  # (iteration, best_fitness, mean_fitness)


def decode(position: np.ndarray, n_features: int, hyperparams=()) -> Candidate:
    """Pure function of the position: threshold mask + affine ranges."""
    mask = position[:n_features] >= 0.5
    hp = {
        spec.name: spec.decode(float(position[n_features + k]))
        for k, spec in enumerate(hyperparams)
    }
    return Candidate(mask=mask, hyperparams=hp)


class Swarm:
    """Canonical velocity/position PSO clamped to the unit cube."""

    def __init__(self, n_features: int, fitness_fn, config: SwarmConfig, hyperparams=()):
        if n_features < 1:
            raise ParameterError("need at least one feature dimension")
        self.n_features = n_features
        self.hyperparams = tuple(hyperparams)
        self.dim = n_features + len(self.hyperparams)
        self.fitness_fn = fitness_fn
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.particles = []
        self.global_best_position = None
        self.global_best_fitness = -np.inf
        self.trace = []
        for _ in range(config.particles):
            pos = self.rng.uniform(0.0, 1.0, size=self.dim)
            fit = self._evaluate(pos)
            p = Particle(
                position=pos,
                velocity=np.zeros(self.dim),
                best_position=pos.copy(),
                best_fitness=fit,
            )
            self.particles.append(p)
            if fit > self.global_best_fitness:
                self.global_best_fitness = fit
                self.global_best_position = pos.copy()

    def _evaluate(self, position) -> float:
        cand = decode(position, self.n_features, self.hyperparams)
        if cand.n_active == 0:
            return 0.0  # dominated by convention, not an error
        return float(self.fitness_fn(cand))

    def step(self):
        """One synchronous velocity/position update with best-keeping.

        Returns the fitness of every particle at its new position.
        """
        cfg = self.config
        fits = []
        for p in self.particles:
            r1 = self.rng.uniform(size=self.dim)
            r2 = self.rng.uniform(size=self.dim)
            p.velocity = (
                cfg.inertia * p.velocity
                + cfg.cognitive * r1 * (p.best_position - p.position)
                + cfg.social * r2 * (self.global_best_position - p.position)
            )
            p.position = np.clip(p.position + p.velocity, 0.0, 1.0)
            fit = self._evaluate(p.position)
            fits.append(fit)
            if fit > p.best_fitness:
                p.best_fitness = fit
                p.best_position = p.position.copy()
            if fit > self.global_best_fitness:
                self.global_best_fitness = fit
                self.global_best_position = p.position.copy()
        return fits

    def run(self) -> SwarmResult:
        for iteration in range(self.config.iterations):
            fits = self.step()
            self.trace.append(
                (iteration, self.global_best_fitness, float(np.mean(fits)))
            )
        best = decode(self.global_best_position, self.n_features, self.hyperparams)
        if best.n_active == 0 and self.global_best_fitness <= 0.0:
            raise SearchError(
                "swarm budget exhausted without any candidate holding at least "
                "one feature"
            )
        return SwarmResult(
            candidate=best,
            fitness=self.global_best_fitness,
            position=self.global_best_position.copy(),
            trace=list(self.trace),
        )


def run_selection(n_features, fitness_fn, config: SwarmConfig, hyperparams=()) -> SwarmResult:
    """Initialize a swarm, run the full budget, return the global best."""
    return Swarm(n_features, fitness_fn, config, hyperparams).run()


def trace_csv(result: SwarmResult) -> str:
    lines = ["iteration,best_fitness,mean_fitness"]
    for iteration, best, mean in result.trace:
        lines.append(f"{iteration},{float(best)!r},{float(mean)!r}")
    return "\n".join(lines) + "\n"

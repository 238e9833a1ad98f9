"""Fitness evaluation for the three attack-optimization problems.

All objectives are folded into canonical minimization form; the raw
(reporting) orientation is kept alongside. One evaluator instance pins one
plant seed, so every fitness evaluation in an evolution run sees identical
process noise, and repeated evaluations of a genome hit a cache instead of
re-simulating.

Objectives (canonical minimization / raw):

* shutdown: (plant run time after the first attack start, effort)
* opcost:   (-operating cost, effort) / (operating cost, effort)
* evasion:  (-damage, detection probability[, effort]) with damage the
  cost increase over the same-seed attack-free baseline, floored at 0; a
  run that trips a shutdown constraint is penalized with raw damage -1 and
  detection probability 1, which every live run dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import AttackKind, Genome, Problem, decode_genome
from .detection import AlarmPolicy, DetectorModel, detection_probability
from .emo import ObjectiveVector
from .errors import ConfigurationError
from .plant import PlantConfig, simulate

EFFORT_REF = 26.0   # one above the 25-channel maximum

# Fixed per-problem reference points (canonical minimization) used for the
# per-generation archive hypervolume series.
REFERENCE_POINTS = {
    (Problem.SHUTDOWN, 2): (73.0, EFFORT_REF),
    (Problem.OPCOST, 2): (0.0, EFFORT_REF),
    (Problem.EVASION, 2): (1.0, 1.01),
    (Problem.EVASION, 3): (1.0, 1.01, EFFORT_REF),
}

PENALTY_DAMAGE_RAW = -1.0
PENALTY_DETECTION = 1.0


@dataclass(frozen=True)
class DetectorBundle:
    name: str
    model: DetectorModel
    policy: AlarmPolicy


class FitnessEvaluator:
    """Maps genomes to objective vectors via plant simulation.

    Results are cached per genome; cache hits return the identical
    ObjectiveVector instance.
    """

    def __init__(self, problem: Problem, plant_config: PlantConfig,
                 signal_ranges: np.ndarray, detector: DetectorBundle | None = None,
                 n_objectives: int | None = None):
        if problem == Problem.EVASION and detector is None:
            raise ConfigurationError("evasion fitness needs a trained detector")
        if problem != Problem.EVASION and detector is not None:
            raise ConfigurationError("detector is only used by the evasion problem")
        self.problem = problem
        self.config = plant_config
        self.signal_ranges = signal_ranges
        self.detector = detector
        if n_objectives is None:
            n_objectives = 3 if problem == Problem.EVASION else 2
        if problem == Problem.EVASION:
            if n_objectives not in (2, 3):
                raise ConfigurationError("evasion runs with 2 or 3 objectives")
        elif n_objectives != 2:
            raise ConfigurationError(f"{problem.value} is a 2-objective problem")
        self.n_objectives = n_objectives
        self._cache: dict[tuple, ObjectiveVector] = {}
        self._baseline_cost: float | None = None
        self.n_simulations = 0
        self.n_cache_hits = 0

    @property
    def eval_seed(self) -> int:
        return self.config.seed

    @property
    def reference_point(self) -> tuple[float, ...]:
        return REFERENCE_POINTS[(self.problem, self.n_objectives)]

    @property
    def baseline_cost(self) -> float:
        """Operating cost of the attack-free run under the evaluator's seed."""
        if self._baseline_cost is None:
            self._baseline_cost = simulate(None, self.config).operating_cost
            self.n_simulations += 1
        return self._baseline_cost

    def evaluate(self, genome: Genome) -> ObjectiveVector:
        if genome.problem != self.problem:
            raise ConfigurationError(
                f"genome is for {genome.problem.value}, evaluator for {self.problem.value}")
        key = genome.genes
        hit = self._cache.get(key)
        if hit is not None:
            self.n_cache_hits += 1
            return hit
        schedule = decode_genome(genome, self.signal_ranges,
                                 horizon=self.config.horizon_hours)
        trace = simulate(schedule, self.config)
        self.n_simulations += 1
        result = self._objectives(genome, schedule, trace)
        self._cache[key] = result
        return result

    def _objectives(self, genome, schedule, trace) -> ObjectiveVector:
        eff = float(genome.n_active)
        horizon = self.config.horizon_hours
        if self.problem == Problem.SHUTDOWN:
            # Time-to-kill from the first attack start; strategies that never
            # bring the plant down score the full horizon, so a late start
            # cannot fake a fast shutdown.
            if trace.shutdown_time is not None:
                starts = [d.window[0] for d in schedule.directives
                          if d.kind != AttackKind.NONE]
                epoch = min(starts) if starts else 0.0
                run_time = max(trace.shutdown_time - epoch, 0.0)
            else:
                run_time = horizon
            return ObjectiveVector((run_time, eff), (run_time, eff))
        if self.problem == Problem.OPCOST:
            cost = trace.operating_cost
            return ObjectiveVector((-cost, eff), (cost, eff))
        if trace.shutdown_time is not None:
            damage = PENALTY_DAMAGE_RAW
            det = PENALTY_DETECTION
        else:
            damage = max(trace.operating_cost - self.baseline_cost, 0.0)
            det = detection_probability(trace, self.detector.model,
                                        self.detector.policy)
        values = (-damage, det) if self.n_objectives == 2 else (-damage, det, eff)
        raw = (damage, det) if self.n_objectives == 2 else (damage, det, eff)
        return ObjectiveVector(values, raw)

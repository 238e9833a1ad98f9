"""Evolving multiobjective attacks against a surrogate plant, plus detection."""

from .attacks import (AttackDirective, AttackKind, AttackSchedule, Genome,
                      Problem, decode_genome, effort, encode_schedule)
from .emo import (EvolutionConfig, Individual, ObjectiveVector, ParetoArchive,
                  dominates, run_evolution)
from .plant import (PlantConfig, PlantState, SignalFrame, SimulationTrace,
                    check_constraints, operating_cost, record_signal_ranges,
                    simulate, step)
from .problems import DetectorBundle, FitnessEvaluator

__version__ = "0.1.0"

__all__ = [
    "AttackDirective", "AttackKind", "AttackSchedule", "Genome", "Problem",
    "decode_genome", "effort", "encode_schedule",
    "EvolutionConfig", "Individual", "ObjectiveVector", "ParetoArchive",
    "dominates", "run_evolution",
    "PlantConfig", "PlantState", "SignalFrame", "SimulationTrace",
    "check_constraints", "operating_cost", "record_signal_ranges", "simulate",
    "step",
    "DetectorBundle", "FitnessEvaluator",
]

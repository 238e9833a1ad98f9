"""Experiment orchestration: baselines, sweeps, campaigns, persistence.

A campaign executes N replicates of one (problem, algorithm) setting with
paired seeds: replicate i of any algorithm under the same master seed starts
from the identical initial population and plant seed, so algorithm
comparisons are seed-matched. Every run is persisted as a re-executable
snapshot; re-running a snapshot reproduces archives, metrics, and exports
bit-for-bit.

Campaign directory layout::

    config.json        master configuration snapshot
    archive.jsonl      one line per archive member, tagged with run_id
    metrics.csv        run_id,algorithm,hypervolume,spread,igd
    convergence.csv    run_id,generation,hypervolume
    plots/             plot-ready CSV exports
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .attacks import (AttackDirective, AttackKind, AttackSchedule, Genome,
                      Problem, decode_genome, random_genome, encoding_table)
from .detection import AlarmPolicy, DetectorModel
from .emo import EvolutionConfig, Individual, ParetoArchive, run_evolution
from .errors import ConfigurationError, EvaluationError
from .metrics import (Front, aggregate_reference_front, hypervolume, igd,
                      kruskal_wallis, reference_point_for, spread)
from .plant import PlantConfig, record_signal_ranges, simulate
from .problems import DetectorBundle, FitnessEvaluator
from . import metrics as _metrics_mod

PROBLEM_SPECS = {
    "shutdown": (Problem.SHUTDOWN, 2),
    "opcost": (Problem.OPCOST, 2),
    "evasion2": (Problem.EVASION, 2),
    "evasion3": (Problem.EVASION, 3),
}

ALGORITHMS = ("NSGA2", "SPEA2", "Random")

# Per-problem defaults for population size and generations follow the
# experiment protocols; any field is overridable.
PROBLEM_DEFAULTS = {
    "shutdown": dict(mu=100, ngens=500, cxpb=0.9, mutpb=0.05, gene_mut_p=0.05),
    "opcost": dict(mu=400, ngens=1000, cxpb=0.85, mutpb=0.10, gene_mut_p=0.08),
    "evasion2": dict(mu=200, ngens=1000, cxpb=0.8, mutpb=0.15, gene_mut_p=0.08),
    "evasion3": dict(mu=200, ngens=1000, cxpb=0.8, mutpb=0.15, gene_mut_p=0.08),
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "shutdown"
    algorithm: str = "SPEA2"
    replicates: int = 1
    master_seed: int = 0
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    plant: PlantConfig = field(default_factory=PlantConfig)
    ranges_runs: int = 50              # attack-free runs behind integrity ranges
    detector_path: str | None = None   # model json; required for evasion
    policy_path: str | None = None
    seed_file: str | None = None       # archive.jsonl used to seed populations
    seed_count: int = 0                # members taken from seed_file
    output_dir: str = "campaign"
    workers: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEM_SPECS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.problem.startswith("evasion") and self.detector_path is None:
            raise ConfigurationError("evasion experiments need --detector")
        if self.seed_count > self.evolution.mu:
            raise ConfigurationError("seed_count cannot exceed mu")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "evolution" in d and isinstance(d["evolution"], dict):
            d["evolution"] = EvolutionConfig(**d["evolution"])
        if "plant" in d and isinstance(d["plant"], dict):
            p = dict(d["plant"])
            for key in ("setpoints", "cost_coefficients"):
                if key in p:
                    p[key] = tuple(p[key])
            if "shutdown_limits" in p:
                p["shutdown_limits"] = tuple(tuple(x) for x in p["shutdown_limits"])
            d["plant"] = PlantConfig(**p)
        return cls(**d)


@dataclass
class RunRecord:
    """One run's snapshot: enough to re-execute and compare bit-for-bit."""

    run_id: int
    algorithm: str
    problem: str
    rng_seed: int
    plant_seed: int
    members: list            # (genes tuple, raw objectives tuple, eval_seed)
    hv_series: list[float]
    metric_hv: float = float("nan")
    metric_spread: float = float("nan")
    metric_igd: float = float("nan")
    wall_clock: float = 0.0
    failed: bool = False
    error: str = ""

    def archive_lines(self) -> list[str]:
        lines = []
        for genes, raw, eval_seed in self.members:
            lines.append(json.dumps({
                "run_id": self.run_id, "genome": list(genes),
                "problem": self.problem, "objectives_raw": list(raw),
                "eval_seed": eval_seed}, sort_keys=True))
        return lines

    def front(self, n_obj: int) -> np.ndarray:
        problem = PROBLEM_SPECS[self.problem][0]
        pts = [canonical_from_raw(problem, raw) for _, raw, _ in self.members]
        return _metrics_mod.pareto_filter(np.asarray(pts, dtype=float).reshape(-1, n_obj))


def canonical_from_raw(problem: Problem, raw) -> tuple[float, ...]:
    """Reporting orientation back to canonical minimization."""
    raw = tuple(float(v) for v in raw)
    if problem == Problem.SHUTDOWN:
        return raw
    if problem == Problem.OPCOST:
        return (-raw[0], raw[1])
    return (-raw[0],) + raw[1:]


def replicate_seeds(master_seed: int, replicate: int) -> tuple[int, int]:
    """(rng_seed, plant_seed) for one replicate; identical across algorithms."""
    ss = np.random.SeedSequence([int(master_seed), int(replicate)])
    a, b = ss.generate_state(2)
    return int(a), int(b)


def load_detector(model_path: str, policy_path: str) -> DetectorBundle:
    with open(model_path) as fh:
        model = DetectorModel.from_json(fh.read())
    with open(policy_path) as fh:
        rec = json.load(fh)
    policy = AlarmPolicy(window=int(rec["window"]), threshold=float(rec["threshold"]),
                         percentile=float(rec["percentile"]), n_calibration_runs=int(rec["runs"]))
    return DetectorBundle(rec.get("detector", model.kind), model, policy)


def _build_evaluator(cfg: ExperimentConfig, plant_seed: int,
                     signal_ranges: np.ndarray) -> FitnessEvaluator:
    problem, n_obj = PROBLEM_SPECS[cfg.problem]
    detector = None
    if problem == Problem.EVASION:
        detector = load_detector(cfg.detector_path, cfg.policy_path)
    return FitnessEvaluator(problem, cfg.plant.with_seed(plant_seed),
                            signal_ranges, detector, n_objectives=n_obj)


def run_random_search(evaluator: FitnessEvaluator, mu: int, ngens: int,
                      rng_seed: int):
    """Archive-based random search with the same evaluation cadence as EMO.

    Evaluates mu * (ngens + 1) uniformly drawn genomes and logs the archive
    hypervolume after every block of mu, matching one EMO generation.
    """
    rng = np.random.default_rng(rng_seed)
    archive = ParetoArchive()
    hv_series = []
    ref = np.asarray(evaluator.reference_point, dtype=float)
    for _ in range(ngens + 1):
        block = [Individual(random_genome(evaluator.problem, rng))
                 for _ in range(mu)]
        for ind in block:
            ind.objectives = evaluator.evaluate(ind.genome)
            ind.eval_seed = evaluator.eval_seed
        archive.update(block)
        hv_series.append(hypervolume(archive.front(), ref))
    return archive, hv_series


def seed_population(archive_file: str, k: int, cfg: ExperimentConfig,
                    rng: np.random.Generator) -> list[Genome]:
    """Initial population: k best archive members + (mu - k) random genomes.

    Best is by the first canonical-minimization objective. Raises OSError
    subclasses with the offending path in the message.
    """
    problem, _ = PROBLEM_SPECS[cfg.problem]
    if k > cfg.evolution.mu:
        raise ConfigurationError("k cannot exceed mu")
    entries = []
    try:
        with open(archive_file) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(json.loads(line))
    except OSError as exc:
        raise OSError(f"cannot read seed archive {archive_file!r}: {exc}") from exc
    scored = []
    for rec in entries:
        genes = tuple(int(g) for g in rec["genome"])
        raw = tuple(float(v) for v in rec["objectives_raw"])
        scored.append((canonical_from_raw(problem, raw)[0], genes))
    scored.sort(key=lambda t: t[0])
    genomes = [Genome(genes, problem) for _, genes in scored[:k]]
    while len(genomes) < cfg.evolution.mu:
        genomes.append(random_genome(problem, rng))
    return genomes


def _execute_replicate(cfg: ExperimentConfig, replicate: int,
                       signal_ranges: np.ndarray) -> RunRecord:
    rng_seed, plant_seed = replicate_seeds(cfg.master_seed, replicate)
    evaluator = _build_evaluator(cfg, plant_seed, signal_ranges)
    evo = replace(cfg.evolution, rng_seed=rng_seed, algorithm=cfg.algorithm
                  if cfg.algorithm != "Random" else cfg.evolution.algorithm)
    t0 = time.time()
    record = RunRecord(run_id=replicate, algorithm=cfg.algorithm,
                       problem=cfg.problem, rng_seed=rng_seed,
                       plant_seed=plant_seed, members=[], hv_series=[])
    try:
        if cfg.algorithm == "Random":
            archive, hv_series = run_random_search(
                evaluator, evo.mu, evo.ngens, rng_seed)
        else:
            initial = None
            if cfg.seed_file and cfg.seed_count > 0:
                rng = np.random.default_rng(rng_seed)
                initial = seed_population(cfg.seed_file, cfg.seed_count, cfg, rng)
            archive, hv_series = run_evolution(evo, evaluator, initial_genomes=initial)
        record.members = [(m.genome.genes, m.objectives.raw, m.eval_seed)
                          for m in archive.members]
        record.hv_series = [float(h) for h in hv_series]
    except EvaluationError as exc:
        record.failed = True
        record.error = str(exc)
        if exc.partial is not None:
            partial_archive, partial_series = exc.partial
            record.members = [(m.genome.genes, m.objectives.raw, m.eval_seed)
                              for m in partial_archive.members]
            record.hv_series = [float(h) for h in partial_series]
    record.wall_clock = time.time() - t0
    return record


def compute_campaign_metrics(records: list[RunRecord], n_obj: int) -> dict:
    """Fill each record's metrics against the campaign reference front."""
    fronts = [r.front(n_obj) for r in records if len(r.members)]
    if not fronts:
        return {}
    ref_front = aggregate_reference_front(fronts)
    ref_point = reference_point_for(fronts)
    for r in records:
        if not len(r.members):
            continue
        front = r.front(n_obj)
        r.metric_hv = float(hypervolume(front, ref_point))
        try:
            r.metric_spread = float(spread(front, ref_front))
        except Exception:
            r.metric_spread = float("nan")
        r.metric_igd = float(igd(front, ref_front))
    return {"reference_point": ref_point.tolist(),
            "reference_front_size": int(len(ref_front.points))}


def run_campaign(cfg: ExperimentConfig, signal_ranges: np.ndarray | None = None,
                 persist: bool = True) -> list[RunRecord]:
    """Execute all replicates, compute metrics, optionally persist."""
    if signal_ranges is None:
        signal_ranges = record_signal_ranges(cfg.ranges_runs, cfg.plant)
    _, n_obj = PROBLEM_SPECS[cfg.problem]
    if cfg.workers > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_execute_replicate, cfg, i, signal_ranges)
                       for i in range(cfg.replicates)]
            records = [f.result() for f in futures]
    else:
        records = [_execute_replicate(cfg, i, signal_ranges)
                   for i in range(cfg.replicates)]
    compute_campaign_metrics(records, n_obj)
    if persist:
        persist_campaign(cfg, records)
    return records


def persist_campaign(cfg: ExperimentConfig, records: list[RunRecord]) -> str:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "plots"), exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
    with open(os.path.join(out, "archive.jsonl"), "w") as fh:
        for r in records:
            for line in r.archive_lines():
                fh.write(line + "\n")
    with open(os.path.join(out, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "algorithm", "hypervolume", "spread", "igd"])
        for r in records:
            w.writerow([r.run_id, r.algorithm, repr(r.metric_hv),
                        repr(r.metric_spread), repr(r.metric_igd)])
    with open(os.path.join(out, "convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "generation", "hypervolume"])
        for r in records:
            for gen, hv in enumerate(r.hv_series):
                w.writerow([r.run_id, gen, repr(hv)])
    export_plots(records, os.path.join(out, "plots"),
                 n_obj=PROBLEM_SPECS[cfg.problem][1])
    return out


def load_campaign(path: str) -> tuple[ExperimentConfig, list[RunRecord]]:
    with open(os.path.join(path, "config.json")) as fh:
        cfg = ExperimentConfig.from_dict(json.load(fh))
    by_run: dict[int, RunRecord] = {}
    with open(os.path.join(path, "archive.jsonl")) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            rid = int(rec["run_id"])
            if rid not in by_run:
                rng_seed, plant_seed = replicate_seeds(cfg.master_seed, rid)
                by_run[rid] = RunRecord(run_id=rid, algorithm=cfg.algorithm,
                                        problem=cfg.problem, rng_seed=rng_seed,
                                        plant_seed=plant_seed, members=[],
                                        hv_series=[])
            by_run[rid].members.append((
                tuple(int(g) for g in rec["genome"]),
                tuple(float(v) for v in rec["objectives_raw"]),
                int(rec["eval_seed"])))
    with open(os.path.join(path, "convergence.csv")) as fh:
        for row in csv.DictReader(fh):
            rid = int(row["run_id"])
            if rid in by_run:
                by_run[rid].hv_series.append(float(row["hypervolume"]))
    with open(os.path.join(path, "metrics.csv")) as fh:
        for row in csv.DictReader(fh):
            rid = int(row["run_id"])
            if rid in by_run:
                by_run[rid].metric_hv = float(row["hypervolume"])
                by_run[rid].metric_spread = float(row["spread"])
                by_run[rid].metric_igd = float(row["igd"])
    return cfg, [by_run[k] for k in sorted(by_run)]


def replay_run(cfg: ExperimentConfig, run_id: int,
               signal_ranges: np.ndarray | None = None) -> RunRecord:
    """Re-execute one persisted run from its snapshot."""
    if signal_ranges is None:
        signal_ranges = record_signal_ranges(cfg.ranges_runs, cfg.plant)
    return _execute_replicate(cfg, run_id, signal_ranges)


def export_plots(records: list[RunRecord], out_dir: str, n_obj: int = 2) -> list[str]:
    """Plot-ready CSVs: Pareto scatters, hypervolume series, metric boxes."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    obj_cols = [f"f{i + 1}" for i in range(n_obj)]
    for r in records:
        path = os.path.join(out_dir, f"pareto_{r.run_id:03d}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(obj_cols)
            for _, raw, _ in r.members:
                w.writerow([repr(float(v)) for v in raw[:n_obj]])
        written.append(path)
    path = os.path.join(out_dir, "hypervolume_series.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "generation", "hypervolume"])
        for r in records:
            for gen, hv in enumerate(r.hv_series):
                w.writerow([r.run_id, gen, repr(hv)])
    written.append(path)
    path = os.path.join(out_dir, "metric_box.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "metric", "value"])
        for r in records:
            for name, v in (("hypervolume", r.metric_hv),
                            ("spread", r.metric_spread), ("igd", r.metric_igd)):
                w.writerow([r.algorithm, name, repr(v)])
    written.append(path)
    return written


# --- baseline and random-attack studies ---------------------------------------------

def run_baseline(n_runs: int = 1000, config: PlantConfig | None = None) -> dict:
    """Attack-free cost statistics plus per-channel signal ranges."""
    config = config or PlantConfig()
    costs = []
    shutdowns = 0
    lo = np.full(25, np.inf)
    hi = np.full(25, -np.inf)
    for i in range(n_runs):
        trace = simulate(None, config.with_seed(config.seed + i))
        costs.append(trace.operating_cost)
        if trace.shutdown_time is not None:
            shutdowns += 1
        feats = trace.features()
        lo = np.minimum(lo, feats.min(axis=0))
        hi = np.maximum(hi, feats.max(axis=0))
    costs = np.asarray(costs)
    return {
        "n_runs": n_runs,
        "shutdowns": shutdowns,
        "cost_mean": float(costs.mean()),
        "cost_max": float(costs.max()),
        "cost_min": float(costs.min()),
        "signal_ranges": np.stack([lo, hi], axis=1).tolist(),
    }


def run_single_attack_sweep(per_cell_runs: int = 500,
                            config: PlantConfig | None = None,
                            signal_ranges: np.ndarray | None = None,
                            start_hour: float = 2.0) -> list[dict]:
    """Impact table: every (channel, attack kind) run per_cell_runs times.

    Attacks start at start_hour and run to the horizon; each cell reports
    cost extremes, shutdown count, and the shutdown-time range.
    """
    config = config or PlantConfig()
    if signal_ranges is None:
        signal_ranges = record_signal_ranges(50, config)
    baseline_costs = [
        simulate(None, config.with_seed(config.seed + 10_000 + i)).operating_cost
        for i in range(per_cell_runs)]

    def cell(ch, kind, costs, sd_times):
        return {
            "channel": ch, "kind": kind.name,
            "max_cost": float(np.max(costs)), "mean_cost": float(np.mean(costs)),
            "shutdowns": len(sd_times),
            "shutdown_min": float(np.min(sd_times)) if sd_times else None,
            "shutdown_max": float(np.max(sd_times)) if sd_times else None,
        }

    rows = []
    for ch in range(25):
        rows.append(cell(ch, AttackKind.NONE, baseline_costs, []))
        for kind in (AttackKind.INTEGRITY_MAX, AttackKind.INTEGRITY_MIN,
                     AttackKind.DOS, AttackKind.REPLAY):
            replay_src = (max(start_hour - 2.0, 0.0), start_hour) \
                if kind == AttackKind.REPLAY else None
            sched = AttackSchedule((AttackDirective(
                ch, kind, (start_hour, config.horizon_hours), replay_src),),
                signal_ranges)
            costs, sd_times = [], []
            for i in range(per_cell_runs):
                trace = simulate(sched, config.with_seed(config.seed + 10_000 + i))
                costs.append(trace.operating_cost)
                if trace.shutdown_time is not None:
                    sd_times.append(trace.shutdown_time - start_hour)
            rows.append(cell(ch, kind, costs, sd_times))
    return rows


def run_random_combined(sets: int = 10, per_set: int = 50_000,
                        max_active: int = 7,
                        config: PlantConfig | None = None,
                        signal_ranges: np.ndarray | None = None,
                        master_seed: int = 0) -> dict:
    """Uniformly sampled combined shutdown attacks, deduplicated.

    Each strategy attacks at most max_active channels, starting at hour 2
    and running to the horizon. Each set uses a fresh plant seed. Returns a
    shutdown-time histogram and the best strategy found.
    """
    config = config or PlantConfig()
    if signal_ranges is None:
        signal_ranges = record_signal_ranges(50, config)
    table = encoding_table(Problem.SHUTDOWN)
    seen = set()
    shutdown_times = []
    best = None
    rng = np.random.default_rng(master_seed)
    for s in range(sets):
        plant_seed = int(np.random.SeedSequence([master_seed, s, 99]).generate_state(1)[0])
        cfg = config.with_seed(plant_seed)
        for _ in range(per_set):
            n_active = int(rng.integers(0, max_active + 1))
            genes = [0] * 25
            targets = rng.choice(25, size=n_active, replace=False)
            for t in targets:
                kind_idx = int(rng.integers(0, 4))
                genes[t] = 1 + kind_idx * 35   # start hour 2, run to horizon
            key = tuple(genes)
            if key in seen:
                continue
            seen.add(key)
            genome = Genome(key, Problem.SHUTDOWN)
            sched = decode_genome(genome, signal_ranges, config.horizon_hours)
            trace = simulate(sched, cfg)
            if trace.shutdown_time is not None:
                t_kill = trace.shutdown_time - 2.0
                shutdown_times.append(t_kill)
                if best is None or t_kill < best[0]:
                    best = (t_kill, key, genome.n_active)
    hist, edges = np.histogram(shutdown_times, bins=24) if shutdown_times \
        else (np.zeros(1, dtype=int), np.array([0.0, 1.0]))
    return {
        "unique_strategies": len(seen),
        "shutdowns": len(shutdown_times),
        "under_one_hour": int(sum(1 for t in shutdown_times if t < 1.0)),
        "best_time": None if best is None else best[0],
        "best_genes": None if best is None else list(best[1]),
        "best_effort": None if best is None else best[2],
        "histogram_counts": hist.tolist(),
        "histogram_edges": edges.tolist(),
    }


def compare_campaigns(dir_a: str, dir_b: str) -> list[dict]:
    """Kruskal-Wallis on per-run metrics of two campaigns (95% confidence)."""
    _, recs_a = load_campaign(dir_a)
    _, recs_b = load_campaign(dir_b)
    out = []
    for name, attr in (("hypervolume", "metric_hv"), ("spread", "metric_spread"),
                       ("igd", "metric_igd")):
        a = [getattr(r, attr) for r in recs_a if np.isfinite(getattr(r, attr))]
        b = [getattr(r, attr) for r in recs_b if np.isfinite(getattr(r, attr))]
        if len(a) < 1 or len(b) < 1:
            continue
        try:
            h, p = kruskal_wallis(a, b)
        except Exception:
            h, p = float("nan"), float("nan")
        out.append({"metric": name, "H": h, "p": p, "significant_95": bool(p < 0.05)})
    return out

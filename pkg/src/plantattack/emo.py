"""Evolutionary multiobjective engine: NSGA-II and SPEA2 over attack genomes.

Both algorithms share the (parents + offspring) environmental-selection
structure and a persistent unbounded archive of non-dominated individuals.
NSGA-II varies a tournament-cloned population with two-point crossover and
uniform mutation; SPEA2 uses a per-slot choice between crossover, mutation,
and reproduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import Genome, Problem, encoding_table, random_genome
from .errors import ContractError, EvaluationError


@dataclass(frozen=True)
class ObjectiveVector:
    """Fitness in canonical minimization orientation plus reporting values."""

    values: tuple[float, ...]
    raw: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) not in (2, 3):
            raise ContractError("objective vectors have 2 or 3 entries")
        if not all(np.isfinite(v) for v in self.values):
            raise ContractError("objective values must be finite")


@dataclass
class Individual:
    genome: Genome
    objectives: ObjectiveVector | None = None
    eval_seed: int = 0
    rank: int = 0
    crowding: float = 0.0


@dataclass(frozen=True)
class EvolutionConfig:
    mu: int = 100
    ngens: int = 500
    cxpb: float = 0.9
    mutpb: float = 0.05
    gene_mut_p: float = 0.05
    tournament_size: int = 2
    algorithm: str = "SPEA2"            # or "NSGA2"
    rng_seed: int = 0
    two_child_crossover: bool = False   # SPEA2 vary: append both children

    def __post_init__(self):
        if self.mu < 2:
            raise ContractError("mu must be >= 2")
        if not 0 <= self.cxpb <= 1 or not 0 <= self.mutpb <= 1:
            raise ContractError("probabilities must lie in [0, 1]")
        if self.cxpb + self.mutpb > 1:
            raise ContractError("cxpb + mutpb must not exceed 1")
        if self.algorithm not in ("NSGA2", "SPEA2"):
            raise ContractError(f"unknown algorithm {self.algorithm!r}")
        if self.tournament_size < 1:
            raise ContractError("tournament_size must be >= 1")


def dominates(a, b) -> bool:
    """Pareto dominance under minimization: a <= b everywhere, < somewhere."""
    av = a.values if isinstance(a, ObjectiveVector) else tuple(a)
    bv = b.values if isinstance(b, ObjectiveVector) else tuple(b)
    if len(av) != len(bv):
        raise ContractError("objective length mismatch")
    not_worse = all(x <= y for x, y in zip(av, bv))
    strictly_better = any(x < y for x, y in zip(av, bv))
    return not_worse and strictly_better


def _domination_matrix(values: np.ndarray) -> np.ndarray:
    le = np.all(values[:, None, :] <= values[None, :, :], axis=2)
    lt = np.any(values[:, None, :] < values[None, :, :], axis=2)
    return le & lt


def non_dominated_sort(values: np.ndarray) -> list[np.ndarray]:
    """Partition row indices into Pareto fronts F1, F2, ... (minimization)."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        raise ContractError("population is empty")
    dom = _domination_matrix(values)
    n_dominators = dom.sum(axis=0)
    fronts = []
    remaining = np.ones(n, dtype=bool)
    while remaining.any():
        current = remaining & (n_dominators == 0)
        if not current.any():
            raise AssertionError("dominance relation is cyclic")
        idx = np.flatnonzero(current)
        fronts.append(idx)
        remaining[idx] = False
        n_dominators = n_dominators - dom[idx].sum(axis=0)
    return fronts


def crowding_distance(values: np.ndarray) -> np.ndarray:
    """NSGA-II crowding distance within one front.

    Boundary members of each objective get +inf; interior members accumulate
    neighbor gaps normalized by the objective range. A zero-range objective
    contributes nothing. Ties are resolved by stable input order.
    """
    values = np.asarray(values, dtype=float)
    m = len(values)
    dist = np.zeros(m)
    if m <= 2:
        return np.full(m, np.inf)
    for j in range(values.shape[1]):
        order = np.argsort(values[:, j], kind="stable")
        col = values[order, j]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span == 0:
            continue
        interior = order[1:-1]
        gaps = (col[2:] - col[:-2]) / span
        for pos, i in enumerate(interior):
            if not np.isinf(dist[i]):
                dist[i] += gaps[pos]
    return dist


def _objective_matrix(individuals) -> np.ndarray:
    return np.array([ind.objectives.values for ind in individuals], dtype=float)


def assign_rank_and_crowding(individuals) -> None:
    """Attach front rank and in-front crowding to each individual."""
    values = _objective_matrix(individuals)
    for rank, front in enumerate(non_dominated_sort(values)):
        crowd = crowding_distance(values[front])
        for pos, i in enumerate(front):
            individuals[i].rank = rank
            individuals[i].crowding = float(crowd[pos])


def select_nsga2(individuals, mu: int):
    """Environmental selection by ascending rank, crowding on the split front."""
    if len(individuals) < mu:
        raise ContractError("combined population smaller than mu")
    values = _objective_matrix(individuals)
    fronts = non_dominated_sort(values)
    chosen: list = []
    for rank, front in enumerate(fronts):
        crowd = crowding_distance(values[front])
        for pos, i in enumerate(front):
            individuals[i].rank = rank
            individuals[i].crowding = float(crowd[pos])
        if len(chosen) + len(front) <= mu:
            chosen.extend(individuals[i] for i in front)
        else:
            order = np.argsort(-crowd, kind="stable")
            need = mu - len(chosen)
            chosen.extend(individuals[front[i]] for i in order[:need])
        if len(chosen) == mu:
            break
    return chosen


def spea2_fitness(values: np.ndarray) -> np.ndarray:
    """Strength-based fitness R + density D; non-dominated members have R = 0.

    D = 1 / (sigma_k + 2) with sigma_k the k-th nearest objective-space
    distance, k = floor(sqrt(N)); a singleton set uses sigma_k = 0.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        raise ContractError("population is empty")
    dom = _domination_matrix(values)
    strength = dom.sum(axis=1).astype(float)
    raw = np.array([strength[dom[:, i]].sum() for i in range(n)])
    if n == 1:
        sigma_k = np.zeros(1)
    else:
        d = np.sqrt(((values[:, None, :] - values[None, :, :]) ** 2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        d.sort(axis=1)
        k = min(max(int(np.sqrt(n)), 1), n - 1)
        sigma_k = d[:, k - 1]
    density = 1.0 / (sigma_k + 2.0)
    return raw + density


def select_spea2(individuals, mu: int):
    """SPEA2 environmental selection over parents + offspring.

    Keeps the non-dominated members (fitness < 1); truncates by iteratively
    dropping the member with the lexicographically smallest distance profile,
    or fills with the best dominated members by ascending fitness.
    """
    if len(individuals) < mu:
        raise ContractError("combined population smaller than mu")
    values = _objective_matrix(individuals)
    fitness = spea2_fitness(values)
    nd_idx = [i for i in range(len(individuals)) if fitness[i] < 1.0]
    if len(nd_idx) == mu:
        return [individuals[i] for i in nd_idx]
    if len(nd_idx) < mu:
        dominated = [i for i in range(len(individuals)) if fitness[i] >= 1.0]
        dominated.sort(key=lambda i: (fitness[i], i))
        fill = dominated[:mu - len(nd_idx)]
        return [individuals[i] for i in nd_idx + fill]
    alive = list(nd_idx)
    pts = values[alive]
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    mask = np.ones(len(alive), dtype=bool)
    while mask.sum() > mu:
        live = np.flatnonzero(mask)
        sub = d[np.ix_(live, live)]
        profiles = np.sort(sub, axis=1)
        # Lexicographically smallest row = most crowded member.
        best = 0
        for cand in range(1, len(live)):
            a, b = profiles[cand], profiles[best]
            comp = np.flatnonzero(a != b)
            if len(comp) and a[comp[0]] < b[comp[0]]:
                best = cand
        mask[live[best]] = False
    return [individuals[nd_idx[i]] for i in np.flatnonzero(mask)]


def tournament_select(pop, k: int, rng: np.random.Generator, key):
    """Best of k uniform draws with replacement; earlier draw wins ties."""
    if not pop:
        raise ContractError("population is empty")
    best = None
    best_key = None
    for _ in range(k):
        ind = pop[int(rng.integers(0, len(pop)))]
        ind_key = key(ind)
        if best is None or ind_key < best_key:
            best, best_key = ind, ind_key
    return best


def two_point_crossover(a: Genome, b: Genome, rng: np.random.Generator):
    """Exchange the gene segment between two uniform cut points."""
    if len(a.genes) != len(b.genes):
        raise ContractError("genome length mismatch")
    n = len(a.genes)
    p = int(rng.integers(0, n + 1))
    q = int(rng.integers(0, n + 1))
    if p > q:
        p, q = q, p
    ga = a.genes[:p] + b.genes[p:q] + a.genes[q:]
    gb = b.genes[:p] + a.genes[p:q] + b.genes[q:]
    return Genome(ga, a.problem), Genome(gb, b.problem)


def uniform_mutate(g: Genome, gene_mut_p: float, rng: np.random.Generator) -> Genome:
    """Resample each gene uniformly from the alphabet with probability gene_mut_p."""
    if not 0 <= gene_mut_p <= 1:
        raise ContractError("gene_mut_p must lie in [0, 1]")
    n_codes = encoding_table(g.problem).n_codes
    genes = list(g.genes)
    for i in range(len(genes)):
        if rng.random() < gene_mut_p:
            genes[i] = int(rng.integers(0, n_codes))
    return Genome(tuple(genes), g.problem)


def vary(pop, mu: int, mutpb: float, cxpb: float, gene_mut_p: float,
         rng: np.random.Generator, select_parent, two_child: bool = False,
         stats: dict | None = None):
    """Produce mu offspring; each slot draws crossover, mutation, or copy.

    u < cxpb: two-point crossover of two tournament-selected parents (one
    child kept unless two_child); u < cxpb + mutpb: uniform mutation of one
    parent; otherwise an unchanged copy of one parent. stats, if given,
    accumulates per-branch counts under "crossover"/"mutation"/"copy".
    """
    offspring = []
    while len(offspring) < mu:
        u = rng.random()
        if u < cxpb:
            if stats is not None:
                stats["crossover"] = stats.get("crossover", 0) + 1
            p1 = select_parent(rng)
            p2 = select_parent(rng)
            c1, c2 = two_point_crossover(p1.genome, p2.genome, rng)
            offspring.append(Individual(c1))
            if two_child and len(offspring) < mu:
                offspring.append(Individual(c2))
        elif u < cxpb + mutpb:
            if stats is not None:
                stats["mutation"] = stats.get("mutation", 0) + 1
            parent = select_parent(rng)
            offspring.append(Individual(uniform_mutate(parent.genome, gene_mut_p, rng)))
        else:
            if stats is not None:
                stats["copy"] = stats.get("copy", 0) + 1
            parent = select_parent(rng)
            offspring.append(Individual(Genome(parent.genome.genes, parent.genome.problem)))
    return offspring


class ParetoArchive:
    """Unbounded archive of mutually non-dominated, genome-unique individuals."""

    def __init__(self):
        self.members: list[Individual] = []
        self._genomes: set = set()

    def __len__(self) -> int:
        return len(self.members)

    def update(self, individuals) -> None:
        for ind in individuals:
            self.insert(ind)

    def insert(self, ind: Individual) -> bool:
        key = (ind.genome.problem, ind.genome.genes)
        if key in self._genomes:
            return False
        for m in self.members:
            if dominates(m.objectives, ind.objectives):
                return False
        survivors = [m for m in self.members
                     if not dominates(ind.objectives, m.objectives)]
        if len(survivors) != len(self.members):
            self._genomes = {(m.genome.problem, m.genome.genes) for m in survivors}
        self.members = survivors
        self.members.append(ind)
        self._genomes.add(key)
        return True

    def front(self) -> np.ndarray:
        """(n, dim) canonical-minimization objective matrix of the archive."""
        return _objective_matrix(self.members)


def run_evolution(cfg: EvolutionConfig, evaluator, initial_genomes=None,
                  hv_reference=None):
    """Execute one evolution run; returns (archive, hypervolume series).

    Fully deterministic given cfg.rng_seed, the evaluator's plant seed, and
    the optional seeded initial genomes. The hypervolume series has
    ngens + 1 entries (generation 0 included) and is computed on the archive
    against a fixed reference point, so it never decreases.
    """
    from .metrics import hypervolume

    rng = np.random.default_rng(cfg.rng_seed)
    ref = np.asarray(hv_reference if hv_reference is not None
                     else evaluator.reference_point, dtype=float)

    pop = []
    if initial_genomes:
        pop.extend(Individual(g) for g in initial_genomes[:cfg.mu])
    while len(pop) < cfg.mu:
        pop.append(Individual(random_genome(evaluator.problem, rng)))

    def evaluate_all(inds):
        for ind in inds:
            if ind.objectives is None:
                try:
                    ind.objectives = evaluator.evaluate(ind.genome)
                except Exception as exc:
                    raise EvaluationError(
                        f"fitness evaluation failed: {exc}",
                        partial=(archive, hv_series)) from exc
                ind.eval_seed = evaluator.eval_seed

    archive = ParetoArchive()
    hv_series: list[float] = []
    evaluate_all(pop)
    archive.update(pop)
    hv_series.append(hypervolume(archive.front(), ref))

    for _ in range(cfg.ngens):
        if cfg.algorithm == "NSGA2":
            assign_rank_and_crowding(pop)
            key = lambda ind: (ind.rank, -ind.crowding)
            offspring = [Individual(tournament_select(
                pop, cfg.tournament_size, rng, key).genome) for _ in range(cfg.mu)]
            for i in range(0, cfg.mu - 1, 2):
                if rng.random() < cfg.cxpb:
                    c1, c2 = two_point_crossover(
                        offspring[i].genome, offspring[i + 1].genome, rng)
                    offspring[i] = Individual(c1)
                    offspring[i + 1] = Individual(c2)
            for i in range(cfg.mu):
                if rng.random() < cfg.mutpb:
                    offspring[i] = Individual(uniform_mutate(
                        offspring[i].genome, cfg.gene_mut_p, rng))
            evaluate_all(offspring)
            pop = select_nsga2(offspring + pop, cfg.mu)
        else:
            fit = spea2_fitness(_objective_matrix(pop))
            order = {id(ind): fit[i] for i, ind in enumerate(pop)}
            key = lambda ind: order[id(ind)]
            select_parent = lambda r: tournament_select(
                pop, cfg.tournament_size, r, key)
            offspring = vary(pop, cfg.mu, cfg.mutpb, cfg.cxpb, cfg.gene_mut_p,
                             rng, select_parent, cfg.two_child_crossover)
            evaluate_all(offspring)
            pop = select_spea2(offspring + pop, cfg.mu)
        archive.update(pop)
        hv_series.append(hypervolume(archive.front(), ref))
    return archive, hv_series

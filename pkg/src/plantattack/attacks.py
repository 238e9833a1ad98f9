"""Attack directives, signal transforms, and genome <-> schedule codecs.

A schedule holds at most one directive per signal channel (0..15 sensors,
16..24 actuators). Four interception transforms are supported:

* DoS: freeze the channel at its last pre-attack transmitted value.
* IntegrityMin / IntegrityMax: pin the channel at its recorded extreme.
* Replay: cyclically re-transmit a previously recorded window of the channel.

Genomes are integer vectors of length 25, one gene per channel; gene 0 always
means "do not attack". Each optimization problem has its own gene alphabet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .errors import ConfigurationError, GenomeDecodeError, ScheduleError
from .plant import N_SIGNALS

GENOME_LENGTH = N_SIGNALS
REPLAY_RECORD_HOURS = 2.0   # replay source: the window just before the attack
EVASION_DURATION = 2.0      # fixed duration of evasion-problem attacks, hours


class AttackKind(IntEnum):
    NONE = 0
    DOS = 1
    INTEGRITY_MIN = 2
    INTEGRITY_MAX = 3
    REPLAY = 4


class Problem(str, Enum):
    SHUTDOWN = "shutdown"
    OPCOST = "opcost"
    EVASION = "evasion"


@dataclass(frozen=True)
class AttackDirective:
    """One attack on one channel over one time window (hours)."""

    target: int
    kind: AttackKind
    window: tuple[float, float]
    replay_src: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0 <= self.target < N_SIGNALS:
            raise ScheduleError(f"target {self.target} out of range 0..{N_SIGNALS - 1}")
        t0, t1 = self.window
        if self.kind != AttackKind.NONE and not t0 < t1:
            raise ScheduleError(f"window ({t0}, {t1}) needs t_start < t_end")
        if t0 < 0:
            raise ScheduleError("attack window cannot start before t=0")
        if self.kind == AttackKind.REPLAY:
            if self.replay_src is None:
                raise ScheduleError("replay directive needs replay_src")
            r0, r1 = self.replay_src
            if not (0 <= r0 < r1 <= t0):
                raise ScheduleError("replay_src must satisfy 0 <= r_start < r_end <= t_start")


@dataclass(frozen=True)
class AttackSchedule:
    """Immutable set of directives, at most one per channel."""

    directives: tuple[AttackDirective, ...]
    signal_ranges: np.ndarray | None = None   # (25, 2) used by integrity attacks

    def __post_init__(self):
        targets = [d.target for d in self.directives if d.kind != AttackKind.NONE]
        if len(targets) != len(set(targets)):
            raise ScheduleError("duplicate directive target")

    def to_json(self) -> str:
        items = []
        for d in self.directives:
            rec = {"target": d.target, "kind": d.kind.name,
                   "t_start": d.window[0], "t_end": d.window[1]}
            if d.replay_src is not None:
                rec["replay_src"] = list(d.replay_src)
            items.append(rec)
        return json.dumps(items)

    @classmethod
    def from_json(cls, text: str, signal_ranges: np.ndarray | None = None) -> "AttackSchedule":
        items = json.loads(text)
        directives = tuple(
            AttackDirective(
                target=int(r["target"]), kind=AttackKind[r["kind"]],
                window=(float(r["t_start"]), float(r["t_end"])),
                replay_src=tuple(r["replay_src"]) if "replay_src" in r else None)
            for r in items)
        return cls(directives, signal_ranges)


def effort(schedule: AttackSchedule) -> int:
    """Number of channels attacked: the minimized effort objective."""
    return sum(1 for d in schedule.directives if d.kind != AttackKind.NONE)


# --- reference transforms -----------------------------------------------------
# The simulation kernel applies the same semantics in-loop; these standalone
# forms are the testable definitions.

def apply_dos(stream_so_far: np.ndarray, attack_start_idx: int,
              initial_value: float | None = None) -> float:
    """Value a DoS'd channel transmits: the last sample before the window.

    For an attack starting at sample 0 the channel's initial condition value
    is used; it must then be supplied by the caller.
    """
    if attack_start_idx > 0:
        return float(stream_so_far[attack_start_idx - 1])
    if initial_value is None:
        raise ScheduleError("DoS at t=0 needs the channel's initial value")
    return float(initial_value)


def apply_integrity(kind: AttackKind, ranges: np.ndarray, target: int) -> float:
    """Recorded extreme substituted for every attacked sample."""
    if ranges is None or target >= len(ranges):
        raise ConfigurationError(f"no recorded range for channel {target}")
    lo, hi = ranges[target]
    if kind == AttackKind.INTEGRITY_MIN:
        return float(lo)
    if kind == AttackKind.INTEGRITY_MAX:
        return float(hi)
    raise ConfigurationError(f"{kind} is not an integrity kind")


def apply_replay(recorded: np.ndarray, offset: int) -> float:
    """Sample transmitted `offset` steps into the attack window (cyclic)."""
    if len(recorded) == 0:
        raise ScheduleError("replay recording is empty")
    return float(recorded[offset % len(recorded)])


# --- genome encodings ----------------------------------------------------------

# Operating-cost problem: 9 (start, duration) pairs; with 4 kinds that is the
# 36 nonzero codes. The pairs cover start hours {2, 10, 20, 30, 50} and
# durations {10, 12, 20, 42, 50, 52, 62, 70}, all within a 72 h horizon.
OPCOST_WINDOWS = (
    (2.0, 70.0), (10.0, 62.0), (10.0, 20.0), (20.0, 52.0), (20.0, 50.0),
    (30.0, 42.0), (30.0, 10.0), (50.0, 12.0), (50.0, 10.0),
)

SHUTDOWN_STARTS = tuple(float(h) for h in range(2, 71, 2))   # 35 values
EVASION_STARTS = tuple(2.0 + i * (68.0 / 69.0) for i in range(70))


@dataclass(frozen=True)
class EncodingTable:
    """Per-problem gene alphabet and its decode rules."""

    problem: Problem
    n_codes: int          # alphabet size including 0

    def decode_gene(self, target: int, gene: int, horizon: float) -> AttackDirective | None:
        if not 0 <= gene < self.n_codes:
            raise GenomeDecodeError(
                f"gene {gene} outside alphabet 0..{self.n_codes - 1} for {self.problem.value}")
        if gene == 0:
            return None
        v = gene - 1
        if self.problem == Problem.SHUTDOWN:
            kind = AttackKind(1 + v // len(SHUTDOWN_STARTS))
            t0 = SHUTDOWN_STARTS[v % len(SHUTDOWN_STARTS)]
            t1 = horizon
            replay_src = _replay_window(t0) if kind == AttackKind.REPLAY else None
            return AttackDirective(target, kind, (t0, t1), replay_src)
        if self.problem == Problem.OPCOST:
            kind = AttackKind(1 + v // len(OPCOST_WINDOWS))
            t0, dur = OPCOST_WINDOWS[v % len(OPCOST_WINDOWS)]
            t1 = min(t0 + dur, horizon)
            replay_src = _replay_window(t0) if kind == AttackKind.REPLAY else None
            return AttackDirective(target, kind, (t0, t1), replay_src)
        # Evasion: codes 1..70 DoS, 71..140 replay; fixed 2 h duration.
        kind = AttackKind.DOS if v < len(EVASION_STARTS) else AttackKind.REPLAY
        t0 = EVASION_STARTS[v % len(EVASION_STARTS)]
        t1 = min(t0 + EVASION_DURATION, horizon)
        replay_src = _replay_window(t0) if kind == AttackKind.REPLAY else None
        return AttackDirective(target, kind, (t0, t1), replay_src)

    def encode_directive(self, d: AttackDirective) -> int:
        """Inverse of decode_gene for canonically decoded directives."""
        if d.kind == AttackKind.NONE:
            return 0
        t0 = d.window[0]
        if self.problem == Problem.SHUTDOWN:
            idx = SHUTDOWN_STARTS.index(t0)
            return 1 + (d.kind.value - 1) * len(SHUTDOWN_STARTS) + idx
        if self.problem == Problem.OPCOST:
            dur = d.window[1] - d.window[0]
            idx = OPCOST_WINDOWS.index((t0, dur))
            return 1 + (d.kind.value - 1) * len(OPCOST_WINDOWS) + idx
        if d.kind == AttackKind.DOS:
            return 1 + EVASION_STARTS.index(t0)
        return 1 + len(EVASION_STARTS) + EVASION_STARTS.index(t0)


_TABLES = {
    Problem.SHUTDOWN: EncodingTable(Problem.SHUTDOWN, 1 + 4 * len(SHUTDOWN_STARTS)),
    Problem.OPCOST: EncodingTable(Problem.OPCOST, 1 + 4 * len(OPCOST_WINDOWS)),
    Problem.EVASION: EncodingTable(Problem.EVASION, 1 + 2 * len(EVASION_STARTS)),
}


def encoding_table(problem: Problem) -> EncodingTable:
    return _TABLES[problem]


def _replay_window(t_start: float) -> tuple[float, float]:
    """Replay source: the legitimate window immediately before the attack."""
    d = min(REPLAY_RECORD_HOURS, t_start)
    return (t_start - d, t_start)


@dataclass(frozen=True)
class Genome:
    """Fixed-length integer chromosome; one gene per attackable channel."""

    genes: tuple[int, ...]
    problem: Problem

    def __post_init__(self):
        if len(self.genes) != GENOME_LENGTH:
            raise GenomeDecodeError(f"genome needs {GENOME_LENGTH} genes")
        table = encoding_table(self.problem)
        for g in self.genes:
            if not 0 <= g < table.n_codes:
                raise GenomeDecodeError(
                    f"gene {g} outside alphabet 0..{table.n_codes - 1} for {self.problem.value}")

    @property
    def n_active(self) -> int:
        return sum(1 for g in self.genes if g != 0)

    def to_json(self) -> str:
        return json.dumps({"problem": self.problem.value, "genes": list(self.genes)})

    @classmethod
    def from_json(cls, text: str) -> "Genome":
        rec = json.loads(text)
        return cls(tuple(int(g) for g in rec["genes"]), Problem(rec["problem"]))


def random_genome(problem: Problem, rng: np.random.Generator) -> Genome:
    """Random genome, stratified by attack count.

    Draws how many channels to attack uniformly from 0..25, then picks the
    channels and their nonzero codes uniformly. A per-gene-uniform draw would
    make nearly every genome attack ~25 channels, leaving the low-effort
    region of the search space unsampled at initialization.
    """
    table = encoding_table(problem)
    n_active = int(rng.integers(0, GENOME_LENGTH + 1))
    genes = [0] * GENOME_LENGTH
    positions = rng.choice(GENOME_LENGTH, size=n_active, replace=False)
    for pos in positions:
        genes[pos] = int(rng.integers(1, table.n_codes))
    return Genome(tuple(genes), problem)


def decode_genome(genome: Genome, signal_ranges: np.ndarray | None = None,
                  horizon: float = 72.0,
                  table: EncodingTable | None = None) -> AttackSchedule:
    """Expand a genome into an attack schedule.

    Position i targets channel i; gene 0 decodes to no attack. signal_ranges
    must be provided when any gene decodes to an integrity attack.
    """
    table = table or encoding_table(genome.problem)
    directives = []
    for target, gene in enumerate(genome.genes):
        d = table.decode_gene(target, gene, horizon)
        if d is not None:
            directives.append(d)
    return AttackSchedule(tuple(directives), signal_ranges)


def encode_schedule(schedule: AttackSchedule, problem: Problem) -> Genome:
    """Inverse of decode_genome for canonically decoded schedules."""
    table = encoding_table(problem)
    genes = [0] * GENOME_LENGTH
    for d in schedule.directives:
        if d.kind != AttackKind.NONE:
            genes[d.target] = table.encode_directive(d)
    return Genome(tuple(genes), problem)

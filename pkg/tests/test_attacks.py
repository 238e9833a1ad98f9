import json

import numpy as np
import pytest

from plantattack.attacks import (EVASION_STARTS, GENOME_LENGTH,
                                 OPCOST_WINDOWS, SHUTDOWN_STARTS,
                                 AttackDirective, AttackKind, AttackSchedule,
                                 EncodingTable, Genome, Problem, apply_dos,
                                 apply_integrity, apply_replay, decode_genome,
                                 effort, encode_schedule, encoding_table,
                                 random_genome)
from plantattack.errors import (ConfigurationError, GenomeDecodeError,
                                ScheduleError)
from plantattack.plant import PlantConfig, simulate


class TestTransforms:
    def test_dos_holds_last_pre_attack_sample(self):
        stream = np.arange(10.0)
        assert apply_dos(stream, 4) == 3.0

    def test_dos_constant_stream(self):
        stream = np.full(10, 2.5)
        assert apply_dos(stream, 5) == 2.5

    def test_dos_at_time_zero_uses_initial_value(self):
        assert apply_dos(np.array([]), 0, initial_value=9.0) == 9.0
        with pytest.raises(ScheduleError):
            apply_dos(np.array([]), 0)

    def test_integrity_extremes(self):
        ranges = np.array([[0.0, 1.0], [3.0, 3.0]])
        assert apply_integrity(AttackKind.INTEGRITY_MAX, ranges, 0) == 1.0
        assert apply_integrity(AttackKind.INTEGRITY_MIN, ranges, 0) == 0.0
        # Degenerate range: both kinds emit the same value.
        assert apply_integrity(AttackKind.INTEGRITY_MIN, ranges, 1) == \
            apply_integrity(AttackKind.INTEGRITY_MAX, ranges, 1) == 3.0

    def test_integrity_missing_range(self):
        with pytest.raises(ConfigurationError):
            apply_integrity(AttackKind.INTEGRITY_MIN, np.zeros((2, 2)), 5)
        with pytest.raises(ConfigurationError):
            apply_integrity(AttackKind.DOS, np.zeros((2, 2)), 0)

    def test_replay_cycles(self):
        rec = np.array([10.0, 20.0, 30.0])
        got = [apply_replay(rec, k) for k in range(7)]
        assert got == [10.0, 20.0, 30.0, 10.0, 20.0, 30.0, 10.0]

    def test_replay_length_one_degenerates_to_hold(self):
        rec = np.array([5.0])
        assert all(apply_replay(rec, k) == 5.0 for k in range(5))

    def test_replay_short_window_is_prefix(self):
        rec = np.arange(10.0)
        assert [apply_replay(rec, k) for k in range(3)] == [0.0, 1.0, 2.0]

    def test_replay_empty_recording(self):
        with pytest.raises(ScheduleError):
            apply_replay(np.array([]), 0)


class TestTransformsOnTraces:
    """The kernel applies the same semantics in-loop; check on real traces."""

    def test_dos_constancy_and_window_confinement(self, signal_ranges, base_config):
        # Channel 0 feeds no control loop, so only its own recorded values
        # change; everything else matches the clean run exactly.
        cfg = base_config.with_seed(21)
        sched = AttackSchedule(
            (AttackDirective(0, AttackKind.DOS, (3.0, 5.0)),), signal_ranges)
        clean = simulate(None, cfg)
        attacked = simulate(sched, cfg)
        sph = cfg.samples_per_hour
        w = slice(3 * sph, 5 * sph)
        held = attacked.sensors[w, 0]
        assert (held == clean.sensors[3 * sph - 1, 0]).all()
        outside = np.ones(attacked.n_frames, dtype=bool)
        outside[w] = False
        assert (attacked.sensors[outside, 0] == clean.sensors[outside, 0]).all()
        other = np.arange(1, 16)
        assert (attacked.sensors[:, other] == clean.sensors[:, other]).all()
        assert (attacked.actuators == clean.actuators).all()

    def test_integrity_pins_exact_extreme(self, signal_ranges, base_config):
        cfg = base_config.with_seed(22)
        sched = AttackSchedule(
            (AttackDirective(2, AttackKind.INTEGRITY_MAX, (1.0, 2.0)),),
            signal_ranges)
        trace = simulate(sched, cfg)
        sph = cfg.samples_per_hour
        w = slice(1 * sph, 2 * sph)
        assert (trace.sensors[w, 2] == signal_ranges[2, 1]).all()

    def test_replay_periodicity_in_window(self, signal_ranges, base_config):
        cfg = base_config.with_seed(23)
        sched = AttackSchedule(
            (AttackDirective(0, AttackKind.REPLAY, (4.0, 8.0),
                             replay_src=(3.0, 4.0)),), signal_ranges)
        clean = simulate(None, cfg)
        attacked = simulate(sched, cfg)
        sph = cfg.samples_per_hour
        period = sph  # one-hour recording
        w0 = 4 * sph
        seg = attacked.sensors[w0:w0 + 4 * period, 0]
        assert (seg[:period] == seg[period:2 * period]).all()
        assert (seg[:period] == clean.sensors[3 * sph:4 * sph, 0]).all()

    def test_actuator_dos_holds_command(self, signal_ranges, base_config):
        cfg = base_config.with_seed(24)
        sched = AttackSchedule(
            (AttackDirective(16 + 5, AttackKind.DOS, (3.0, 6.0)),),
            signal_ranges)
        clean = simulate(None, cfg)
        attacked = simulate(sched, cfg)
        sph = cfg.samples_per_hour
        held = attacked.actuators[3 * sph:6 * sph, 5]
        assert (held == clean.actuators[3 * sph - 1, 5]).all()


class TestDirectiveValidation:
    def test_duplicate_targets_rejected(self):
        d1 = AttackDirective(4, AttackKind.DOS, (1.0, 2.0))
        d2 = AttackDirective(4, AttackKind.DOS, (3.0, 4.0))
        with pytest.raises(ScheduleError):
            AttackSchedule((d1, d2))

    def test_none_directives_do_not_conflict(self):
        ds = tuple(AttackDirective(0, AttackKind.NONE, (0.0, 1.0)) for _ in range(2))
        assert effort(AttackSchedule(ds)) == 0

    def test_window_ordering(self):
        with pytest.raises(ScheduleError):
            AttackDirective(1, AttackKind.DOS, (5.0, 5.0))
        with pytest.raises(ScheduleError):
            AttackDirective(1, AttackKind.DOS, (-1.0, 5.0))

    def test_replay_needs_source_before_window(self):
        with pytest.raises(ScheduleError):
            AttackDirective(1, AttackKind.REPLAY, (5.0, 6.0))
        with pytest.raises(ScheduleError):
            AttackDirective(1, AttackKind.REPLAY, (5.0, 6.0), replay_src=(4.0, 5.5))
        AttackDirective(1, AttackKind.REPLAY, (5.0, 6.0), replay_src=(3.0, 5.0))

    def test_target_bounds(self):
        with pytest.raises(ScheduleError):
            AttackDirective(25, AttackKind.DOS, (1.0, 2.0))


class TestEffort:
    def test_empty(self):
        assert effort(AttackSchedule(())) == 0

    def test_single(self):
        sched = AttackSchedule((AttackDirective(3, AttackKind.DOS, (1.0, 2.0)),))
        assert effort(sched) == 1

    def test_all_25(self, signal_ranges):
        ds = tuple(AttackDirective(i, AttackKind.INTEGRITY_MIN, (1.0, 2.0))
                   for i in range(25))
        assert effort(AttackSchedule(ds, signal_ranges)) == 25

    def test_matches_active_gene_count(self):
        rng = np.random.default_rng(0)
        for problem in Problem:
            for _ in range(20):
                g = random_genome(problem, rng)
                sched = decode_genome(g)
                assert effort(sched) == g.n_active


class TestGenome:
    def test_length_enforced(self):
        with pytest.raises(GenomeDecodeError):
            Genome((0,) * 24, Problem.SHUTDOWN)

    def test_alphabet_enforced(self):
        table = encoding_table(Problem.OPCOST)
        bad = (table.n_codes,) + (0,) * 24
        with pytest.raises(GenomeDecodeError):
            Genome(bad, Problem.OPCOST)

    def test_alphabet_sizes(self):
        assert encoding_table(Problem.SHUTDOWN).n_codes == 141
        assert encoding_table(Problem.OPCOST).n_codes == 37
        assert encoding_table(Problem.EVASION).n_codes == 141

    def test_json_round_trip(self):
        g = Genome((1, 0, 36) + (0,) * 22, Problem.OPCOST)
        assert Genome.from_json(g.to_json()) == g


class TestDecode:
    def test_all_zero_decodes_empty(self):
        for problem in Problem:
            g = Genome((0,) * GENOME_LENGTH, problem)
            assert decode_genome(g).directives == ()

    def test_position_maps_to_target(self):
        g = Genome((0,) * 7 + (1,) + (0,) * 17, Problem.SHUTDOWN)
        (d,) = decode_genome(g).directives
        assert d.target == 7

    @pytest.mark.parametrize("problem", list(Problem))
    def test_injective_per_position(self, problem):
        table = encoding_table(problem)
        seen = set()
        for code in range(1, table.n_codes):
            d = table.decode_gene(0, code, 72.0)
            key = (d.kind, d.window, d.replay_src)
            assert key not in seen
            seen.add(key)

    @pytest.mark.parametrize("problem", list(Problem))
    def test_round_trip_exhaustive(self, problem):
        table = encoding_table(problem)
        for code in range(table.n_codes):
            genes = [0] * GENOME_LENGTH
            genes[11] = code
            g = Genome(tuple(genes), problem)
            sched = decode_genome(g)
            assert encode_schedule(sched, problem) == g

    def test_out_of_alphabet_decode_error(self):
        table = encoding_table(Problem.SHUTDOWN)
        with pytest.raises(GenomeDecodeError):
            table.decode_gene(0, 141, 72.0)

    def test_shutdown_codes_run_to_horizon(self):
        table = encoding_table(Problem.SHUTDOWN)
        d = table.decode_gene(0, 1, 72.0)
        assert d.kind == AttackKind.DOS
        assert d.window == (2.0, 72.0)
        d = table.decode_gene(0, 36, 72.0)   # second kind block starts
        assert d.kind == AttackKind.INTEGRITY_MIN
        assert d.window[0] == 2.0
        assert set(SHUTDOWN_STARTS) == {float(h) for h in range(2, 71, 2)}

    def test_opcost_windows_match_observed_pairs(self):
        # Pairs that appear in reported strategies must be encodable.
        for pair in [(2.0, 70.0), (10.0, 62.0), (10.0, 20.0), (30.0, 42.0),
                     (50.0, 12.0)]:
            assert pair in OPCOST_WINDOWS
        assert len(OPCOST_WINDOWS) == 9
        for t0, dur in OPCOST_WINDOWS:
            assert t0 + dur <= 72.0
        starts = {p[0] for p in OPCOST_WINDOWS}
        assert starts == {2.0, 10.0, 20.0, 30.0, 50.0}

    def test_evasion_pool_structure(self):
        table = encoding_table(Problem.EVASION)
        assert len(EVASION_STARTS) == 70
        assert EVASION_STARTS[0] == 2.0
        assert EVASION_STARTS[-1] == pytest.approx(70.0)
        dos = table.decode_gene(0, 1, 72.0)
        assert dos.kind == AttackKind.DOS
        assert dos.window[1] - dos.window[0] == pytest.approx(2.0)
        rep = table.decode_gene(0, 71, 72.0)
        assert rep.kind == AttackKind.REPLAY
        assert rep.window[0] == dos.window[0]

    def test_replay_source_rule(self):
        table = encoding_table(Problem.SHUTDOWN)
        replay_code = 1 + 3 * len(SHUTDOWN_STARTS)   # replay block, start hour 2
        d = table.decode_gene(0, replay_code, 72.0)
        assert d.kind == AttackKind.REPLAY
        assert d.replay_src == (0.0, 2.0)
        late = table.decode_gene(0, replay_code + 10, 72.0)
        assert late.replay_src == (late.window[0] - 2.0, late.window[0])


class TestScheduleSerialization:
    def test_json_round_trip(self, signal_ranges):
        sched = AttackSchedule((
            AttackDirective(3, AttackKind.DOS, (1.0, 4.0)),
            AttackDirective(8, AttackKind.REPLAY, (5.0, 7.0), replay_src=(3.0, 5.0)),
        ), signal_ranges)
        text = sched.to_json()
        parsed = json.loads(text)
        assert parsed[0]["kind"] == "DOS"
        back = AttackSchedule.from_json(text, signal_ranges)
        assert back.directives == sched.directives

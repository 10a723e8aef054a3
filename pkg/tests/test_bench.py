"""Suite harness: strategy mapping, scoring, cactus data, resumable runs."""

import csv
import dataclasses

import pytest

from wardroster import (
    STRATEGY_NAMES,
    BenchRecord,
    SolveOutcome,
    emit_cactus,
    load_records,
    run_suite,
    scalarize,
    score_vectors,
    write_cactus,
    write_records,
)
from wardroster.bench import strategy_config
from wardroster.constraints import ConfigError

from helpers import load_toy3


def record(
    instance_id="A",
    scenario_kind="entire_retained",
    strategy="LNPS-10",
    time_limit_seconds=60.0,
    rep=1,
    status="ok",
    cause="",
    penalties=(),
    modification_rate=None,
    scalarized=None,
    trace_ref="",
):
    return BenchRecord(
        instance_id=instance_id,
        scenario_kind=scenario_kind,
        strategy=strategy,
        time_limit_seconds=time_limit_seconds,
        rep=rep,
        status=status,
        cause=cause,
        penalties=penalties,
        modification_rate=modification_rate,
        scalarized=scalarized,
        trace_ref=trace_ref,
    )


class TestStrategyConfig:
    def test_closed_set_is_the_nine_variants(self):
        assert STRATEGY_NAMES == (
            "LNPS-10",
            "LNPS-30",
            "LNPS-60",
            "MP-High",
            "MP-Mid",
            "MP-Low",
            "MP+IS-High",
            "MP+IS-Mid",
            "MP+IS-Low",
        )

    def test_lnps_names_carry_the_restart_interval(self):
        for seconds in (10, 30, 60):
            cfg = strategy_config(f"LNPS-{seconds}", 5.0, random_seed=1)
            assert cfg.strategy == "LNPS"
            assert cfg.restart_interval_seconds == float(seconds)

    def test_mp_names_carry_the_priority_slot(self):
        for label, slot in (("High", "highest"), ("Mid", "middle"), ("Low", "lowest")):
            plain = strategy_config(f"MP-{label}", 5.0, random_seed=1)
            guided = strategy_config(f"MP+IS-{label}", 5.0, random_seed=1)
            assert (plain.strategy, plain.mp_priority) == ("MP", slot)
            assert (guided.strategy, guided.mp_priority) == ("MP_IS", slot)

    def test_unknown_name_rejected(self):
        with pytest.raises(ConfigError, match="unknown strategy"):
            strategy_config("LNPS-15", 5.0, random_seed=1)


class TestScoring:
    def test_weights_for_four_tiers_at_base_ten(self):
        scores = score_vectors([((4, 1),), ((4, 2),)], beta=10, n=4)
        assert scores[0].weights == (1000.0, 100.0, 10.0, 1.0)

    def test_identical_vectors_all_score_zero(self):
        vector = ((4, 7), (3, 2), (1, 5))
        scores = score_vectors([vector, vector, vector])
        assert all(s.aggregate == 0.0 for s in scores)

    def test_top_tier_endpoints_score_zero_and_thousand(self):
        # shared lower tiers have no spread, so only tier 1 contributes
        a = ((4, 5), (3, 9), (2, 1))
        b = ((4, 10), (3, 9), (2, 1))
        scores = score_vectors([a, b])
        assert [s.aggregate for s in scores] == [0.0, 1000.0]

    def test_normalized_values_stay_in_the_unit_interval(self):
        group = [((4, 3), (2, 8)), ((4, 9), (2, 2)), ((4, 6), (2, 5))]
        for score in score_vectors(group):
            assert all(0.0 <= f <= 1.0 for f in score.normalized)

    def test_common_tier_shift_cancels(self):
        group = [((4, 3), (3, 5)), ((4, 9), (3, 2))]
        shifted = [((4, 3 + 11), (3, 5)), ((4, 9 + 11), (3, 2))]
        before = [s.aggregate for s in score_vectors(group)]
        after = [s.aggregate for s in score_vectors(shifted)]
        assert before == after

    def test_raising_a_tier_never_lowers_the_score(self):
        base = [((4, 3), (3, 5)), ((4, 9), (3, 2))]
        bumped = [((4, 6), (3, 5)), ((4, 9), (3, 2))]
        assert (
            score_vectors(bumped)[0].aggregate
            >= score_vectors(base)[0].aggregate
        )

    def test_absent_tiers_read_zero(self):
        scores = score_vectors([((4, 5),), ()])
        assert scores[0].raw == (5.0, 0.0, 0.0, 0.0)
        assert scores[1].raw == (0.0, 0.0, 0.0, 0.0)
        assert scores[0].aggregate == 1000.0

    def test_more_levels_than_tiers_rejected(self):
        crowded = ((5, 1), (4, 1), (3, 1), (2, 1), (1, 1))
        with pytest.raises(ConfigError, match="exceed"):
            score_vectors([crowded], n=4)


class TestScalarize:
    def test_groups_normalize_per_instance_and_limit(self):
        records = [
            record(instance_id="A", strategy="LNPS-10", penalties=((4, 5),)),
            record(instance_id="A", strategy="MP-Low", penalties=((4, 10),)),
            record(instance_id="B", strategy="LNPS-10", penalties=((4, 70),)),
            record(instance_id="B", strategy="MP-Low", penalties=((4, 20),)),
        ]
        scored = scalarize(records)
        assert [r.scalarized for r in scored] == [0.0, 1000.0, 1000.0, 0.0]

    def test_time_limits_normalize_separately(self):
        records = [
            record(time_limit_seconds=60.0, strategy="LNPS-10", penalties=((4, 5),)),
            record(time_limit_seconds=60.0, strategy="MP-Low", penalties=((4, 9),)),
            record(time_limit_seconds=3600.0, strategy="LNPS-10", penalties=((4, 1),)),
            record(time_limit_seconds=3600.0, strategy="MP-Low", penalties=((4, 2),)),
        ]
        scored = scalarize(records)
        assert [r.scalarized for r in scored] == [0.0, 1000.0, 0.0, 1000.0]

    def test_skipped_records_pass_through_unscored(self):
        records = [
            record(strategy="LNPS-10", penalties=((4, 5),)),
            record(strategy="MP-Low", status="skipped", cause="no initial solution"),
        ]
        scored = scalarize(records)
        assert scored[0].scalarized == 0.0
        assert scored[1].scalarized is None
        assert scored[1] == records[1]


class TestCactus:
    def test_values_sort_ascending_with_ranks(self):
        records = [
            record(rep=1, scalarized=3.0),
            record(rep=2, scalarized=1.0),
            record(rep=3, scalarized=2.0),
        ]
        data = emit_cactus(records, "F")
        assert data.rows == (
            ("LNPS-10", 1, 1.0),
            ("LNPS-10", 2, 2.0),
            ("LNPS-10", 3, 3.0),
        )
        assert data.omitted == 0

    def test_each_strategy_series_is_monotone(self):
        records = [
            record(strategy="LNPS-10", rep=r, scalarized=v)
            for r, v in ((1, 9.0), (2, 4.0))
        ] + [
            record(strategy="MP-Low", rep=r, scalarized=v)
            for r, v in ((1, 7.0), (2, 8.0))
        ]
        data = emit_cactus(records, "F")
        series = {}
        for strategy, rank, value in data.rows:
            series.setdefault(strategy, []).append((rank, value))
        assert set(series) == {"LNPS-10", "MP-Low"}
        for rows in series.values():
            values = [v for _, v in rows]
            assert values == sorted(values)
            assert [r for r, _ in rows] == list(range(1, len(rows) + 1))

    def test_absent_rates_are_omitted_and_counted(self):
        records = [
            record(rep=1, modification_rate=0.25),
            record(rep=2, scenario_kind="entire_reconstructed", modification_rate=None),
            record(rep=3, status="skipped", cause="no initial solution"),
        ]
        data = emit_cactus(records, "modification_rate")
        assert data.rows == (("LNPS-10", 1, 0.25),)
        assert data.omitted == 2

    def test_unknown_axis_rejected(self):
        with pytest.raises(ConfigError, match="axis"):
            emit_cactus([record()], "wall_clock")

    def test_cactus_csv_shape(self, tmp_path):
        data = emit_cactus([record(scalarized=2.5)], "F")
        path = write_cactus(tmp_path, data)
        assert path.name == "cactus_F.csv"
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["strategy", "rank", "value"]
        assert rows[1] == ["LNPS-10", "1", "2.5"]


class TestRecordsIO:
    def test_round_trip_preserves_every_field(self, tmp_path):
        records = [
            record(
                penalties=((4, 12), (2, 3)),
                modification_rate=0.125,
                scalarized=110.0,
                trace_ref="trace_A.csv",
            ),
            record(rep=2, status="skipped", cause="no initial solution"),
        ]
        path = tmp_path / "records.csv"
        write_records(path, records)
        assert load_records(path) == records

    def test_missing_file_reads_empty(self, tmp_path):
        assert load_records(tmp_path / "records.csv") == []


class TestRunSuite:
    def test_product_count(self, tmp_path):
        toy3 = load_toy3()
        records = run_suite(
            {"A": toy3, "B": toy3},
            ("entire_reconstructed", "first_half_retained", "entire_retained"),
            ("LNPS-10", "MP-High"),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=5.0,
            base_seed=3,
        )
        assert len(records) == 12
        assert all(r.status == "ok" for r in records)
        assert len(load_records(tmp_path / "records.csv")) == 12

    def test_retained_scenarios_report_rates_reconstructed_does_not(self, tmp_path):
        toy3 = load_toy3()
        records = run_suite(
            {"A": toy3},
            ("entire_reconstructed", "entire_retained"),
            ("LNPS-10",),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=5.0,
            base_seed=3,
        )
        by_kind = {r.scenario_kind: r for r in records}
        assert by_kind["entire_reconstructed"].modification_rate is None
        assert by_kind["entire_retained"].modification_rate is not None
        assert 0.0 <= by_kind["entire_retained"].modification_rate <= 1.0

    def test_trace_files_carry_the_incumbent_series(self, tmp_path):
        toy3 = load_toy3()
        records = run_suite(
            {"A": toy3},
            ("entire_retained",),
            ("LNPS-10",),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=5.0,
            base_seed=3,
        )
        trace = tmp_path / records[0].trace_ref
        rows = list(csv.reader(trace.open()))
        header = rows[0]
        assert header[0] == "sequence"
        assert header[1] == "wall_time_seconds"
        assert header[-1] == "modification_count"
        assert all(name.startswith("penalty_l") for name in header[2:-1])
        sequences = [int(row[0]) for row in rows[1:]]
        assert sequences == sorted(sequences) and len(sequences) >= 1

    def test_rerun_executes_only_the_missing_cells(self, tmp_path):
        toy3 = load_toy3()
        first = run_suite(
            {"A": toy3},
            ("entire_retained",),
            ("LNPS-10", "MP-High"),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=5.0,
            base_seed=3,
        )
        assert len(first) == 2
        # widen the suite: the two existing cells must not be re-executed
        widened = run_suite(
            {"A": toy3},
            ("entire_retained", "first_half_retained"),
            ("LNPS-10", "MP-High"),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=5.0,
            base_seed=3,
        )
        assert len(widened) == 4
        assert widened[:2] == first
        stored = load_records(tmp_path / "records.csv")
        assert len(stored) == 4
        # identical rerun touches nothing further
        again = run_suite(
            {"A": toy3},
            ("entire_retained", "first_half_retained"),
            ("LNPS-10", "MP-High"),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=5.0,
            base_seed=3,
        )
        assert again == widened
        assert len(load_records(tmp_path / "records.csv")) == 4

    def test_unknown_strategy_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown strategy"):
            run_suite({"A": load_toy3()}, ("entire_retained",), ("LNPS-15",), (1.0,), 1, tmp_path)

    def test_unknown_scenario_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="scenario"):
            run_suite({"A": load_toy3()}, ("half",), ("LNPS-10",), (1.0,), 1, tmp_path)

    def test_missing_initial_solution_skips_with_cause(self, tmp_path, monkeypatch):
        import wardroster.bench as bench_module

        def no_incumbents(instance, config, directives=None, **kwargs):
            return SolveOutcome(
                status="unsat_or_timeout",
                reason="time_limit",
                incumbents=(),
                best_hard_violations=99,
                restarts=0,
                steps=0,
                elapsed_seconds=0.0,
            )

        monkeypatch.setattr(bench_module, "solve", no_incumbents)
        records = run_suite(
            {"A": load_toy3()},
            ("entire_retained",),
            ("LNPS-10",),
            (1.0,),
            1,
            tmp_path,
            initial_time_limit=0.5,
        )
        assert [r.status for r in records] == ["skipped"]
        assert records[0].cause == "no initial solution"
        assert records[0].penalties == ()
        assert records[0].trace_ref == ""

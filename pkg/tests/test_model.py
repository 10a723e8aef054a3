"""Document parsing, validation, canonical serialization, domains, completion."""

import json
import random

import pytest

from wardroster import (
    CompletionError,
    ParseError,
    Roster,
    ValidationError,
    cell_domain,
    complete_roster,
    instance_digest,
    parse_instance,
    parse_roster,
    roster_to_document,
    serialize_instance,
    serialize_roster,
)

from helpers import load_toy3, mk_roster, mutate_doc, toy3_doc, workbench, workbench_doc
from tiny import tiny_family

# Canonical digest of the three-nurse week fixture.  Pinned on purpose: the
# serialized form is a versioned wire format and must not drift.
TOY3_DIGEST = "ea59b13a2646afe686a2904626b59c90708a82a3f68064d2169270f427525a65"


class TestParsing:
    def test_toy3_parses(self):
        inst = load_toy3()
        assert inst.nurse_ids() == ("n1", "n2", "n3")
        assert inst.work_codes() == ("D", "N")
        assert inst.calendar.horizon_days == 7
        assert list(inst.calendar.days()) == list(range(7))

    def test_accepts_json_text_and_mapping(self):
        doc = toy3_doc()
        a = parse_instance(doc)
        b = parse_instance(json.dumps(doc))
        assert instance_digest(a) == instance_digest(b)

    def test_nurses_sorted_canonically(self):
        doc = workbench_doc()
        doc["nurses"] = list(reversed(doc["nurses"]))
        inst = parse_instance(doc)
        assert inst.nurse_ids() == ("a", "b", "c")

    def test_digest_ignores_document_list_order(self):
        doc = workbench_doc()
        doc["bounds"]["work_days"] = [
            {"nurse": "b", "lb": 1, "ub": 4},
            {"nurse": "a", "lb": 2, "ub": 5},
        ]
        base = instance_digest(parse_instance(doc))
        shuffled = json.loads(json.dumps(doc))
        rng = random.Random(7)
        for key in ("nurses", "shifts", "priorities"):
            rng.shuffle(shuffled[key])
        rng.shuffle(shuffled["bounds"]["work_days"])
        assert instance_digest(parse_instance(shuffled)) == base

    def test_toy3_digest_frozen(self):
        assert instance_digest(load_toy3()) == TOY3_DIGEST

    def test_serialize_parse_round_trip_byte_identical(self):
        for inst in (load_toy3(), workbench(), tiny_family(0)):
            text = serialize_instance(inst)
            again = serialize_instance(parse_instance(text))
            assert again == text

    def test_missing_required_key_names_path(self):
        doc = toy3_doc()
        del doc["priorities"]
        with pytest.raises(ParseError, match=r"\$\.priorities"):
            parse_instance(doc)

    def test_wrong_scalar_type_names_path(self):
        doc = mutate_doc(toy3_doc(), "calendar.horizon_days", "seven")
        with pytest.raises(ParseError, match=r"calendar\.horizon_days"):
            parse_instance(doc)

    def test_malformed_json_text(self):
        with pytest.raises(ParseError):
            parse_instance("{not json")


class TestValidation:
    def test_duplicate_nurse_id(self):
        doc = workbench_doc()
        doc["nurses"].append({"id": "a", "point": 1})
        with pytest.raises(ValidationError, match="duplicate nurse id"):
            parse_instance(doc)

    def test_duplicate_shift_code(self):
        doc = workbench_doc()
        doc["shifts"].append({"code": "D", "klass": "work", "start": 0, "end": 1})
        with pytest.raises(ValidationError, match="duplicate shift code"):
            parse_instance(doc)

    def test_work_shift_requires_clock_times(self):
        doc = workbench_doc()
        doc["shifts"].append({"code": "X1", "klass": "work"})
        with pytest.raises(ValidationError, match="needs start and end"):
            parse_instance(doc)

    def test_rest_shift_rejects_clock_times(self):
        doc = workbench_doc()
        doc["shifts"].append({"code": "X1", "klass": "rest", "start": 0, "end": 1})
        with pytest.raises(ValidationError, match="must not carry clock times"):
            parse_instance(doc)

    def test_dangling_group_member(self):
        doc = workbench_doc()
        doc["nurse_groups"]["all"].append("ghost")
        with pytest.raises(ValidationError, match="unknown nurse 'ghost'"):
            parse_instance(doc)

    def test_dangling_shift_group_member(self):
        doc = workbench_doc()
        doc["shift_groups"]["NIGHT"].append("ZZ")
        with pytest.raises(ValidationError, match="unknown shift 'ZZ'"):
            parse_instance(doc)

    def test_work_days_lb_above_ub(self):
        doc = workbench_doc()
        doc["bounds"]["work_days"] = [{"nurse": "a", "lb": 5, "ub": 3}]
        with pytest.raises(ValidationError, match="LB 5 > UB 3"):
            parse_instance(doc)

    def test_past_assignment_on_current_day(self):
        doc = workbench_doc()
        doc["past_assignments"] = [{"nurse": "a", "day": 0, "shift": "D"}]
        with pytest.raises(ValidationError, match="non-history day 0"):
            parse_instance(doc)

    def test_past_assignment_before_window(self):
        doc = workbench_doc()
        doc["past_assignments"] = [{"nurse": "a", "day": -3, "shift": "D"}]
        with pytest.raises(ValidationError, match="non-history day -3"):
            parse_instance(doc)

    def test_request_day_outside_window(self):
        doc = workbench_doc()
        doc["pos_requests"] = [{"nurse": "a", "day": 99, "shift": "D"}]
        with pytest.raises(ValidationError, match="day 99 outside"):
            parse_instance(doc)

    def test_manual_request_must_be_duty_or_leave(self):
        doc = workbench_doc()
        doc["manual_requests"] = [{"nurse": "a", "day": 0, "shift": "D"}]
        with pytest.raises(ValidationError, match="non-duty/leave shift 'D'"):
            parse_instance(doc)

    def test_manual_request_accepts_duty_and_leave(self):
        doc = workbench_doc()
        doc["manual_requests"] = [
            {"nurse": "a", "day": 0, "shift": "TR"},
            {"nurse": "b", "day": 1, "shift": "AL"},
        ]
        inst = parse_instance(doc)
        assert inst.manual_requests[("a", 0)] == ("TR",)

    def test_duplicate_staffing_rule_rejected(self):
        doc = workbench_doc()
        row = {"kind": "hard", "nurse_group": "all", "shift_group": "DAY", "day": 0, "which": "lb", "bound": 1}
        doc["bounds"]["staff"] = [dict(row), dict(row, bound=2)]
        with pytest.raises(ValidationError, match="duplicate rule"):
            parse_instance(doc)

    def test_staffing_lb_above_ub_rejected(self):
        doc = workbench_doc()
        doc["bounds"]["staff"] = [
            {"kind": "hard", "nurse_group": "all", "shift_group": "DAY", "day": 0, "which": "lb", "bound": 3},
            {"kind": "hard", "nurse_group": "all", "shift_group": "DAY", "day": 0, "which": "ub", "bound": 1},
        ]
        with pytest.raises(ValidationError, match="LB 3 > UB 1"):
            parse_instance(doc)

    def test_pattern_sequence_must_name_shift_groups(self):
        doc = workbench_doc()
        doc["pattern_rules"] = [
            {"kind": "soft", "nurse_group": "all", "sequence": ["NIGHT", "NOPE"], "max": 0}
        ]
        with pytest.raises(ValidationError, match="unknown shift group 'NOPE'"):
            parse_instance(doc)

    def test_pair_rule_same_nurse_rejected(self):
        doc = workbench_doc()
        doc["pair_rules"] = [
            {"kind": "soft", "nurse_a": "a", "nurse_b": "a", "mode": "prohibited"}
        ]
        with pytest.raises(ValidationError, match="same nurse twice"):
            parse_instance(doc)

    def test_pair_rule_normalizes_order(self):
        doc = workbench_doc()
        doc["pair_rules"] = [
            {"kind": "soft", "nurse_a": "b", "nurse_b": "a", "mode": "prohibited"}
        ]
        inst = parse_instance(doc)
        assert (inst.pair_rules[0].nurse_a, inst.pair_rules[0].nurse_b) == ("a", "b")

    def test_missing_priority_for_active_family(self):
        doc = workbench_doc()
        doc["priorities"] = [
            row for row in doc["priorities"] if row["family"] != "isolated_work_day"
        ]
        with pytest.raises(ValidationError, match=r"\(soft,isolated_work_day\)"):
            parse_instance(doc)

    def test_weekly_rest_shift_must_exist(self):
        doc = workbench_doc()
        doc["shifts"] = [s for s in doc["shifts"] if s["code"] != "WR"]
        doc["shift_groups"]["REST"] = ["PH"]
        with pytest.raises(ValidationError, match="must declare rest shift 'WR'"):
            parse_instance(doc)

    def test_holiday_shift_required_when_holidays_declared(self):
        doc = workbench_doc()
        doc["shifts"] = [s for s in doc["shifts"] if s["code"] != "PH"]
        doc["shift_groups"]["REST"] = ["WR"]
        with pytest.raises(ValidationError, match="lacks 'PH'"):
            parse_instance(doc)

    def test_balance_metric_requires_group(self):
        doc = workbench_doc()
        doc["balance_rules"] = [
            {"nurse_group": "all", "metric": "shift_group", "allowed_spread": 1}
        ]
        with pytest.raises(ParseError, match="shift_group"):
            parse_instance(doc)


class TestCellDomain:
    def test_ordinary_day_offers_work_plus_rest(self):
        inst = workbench()
        assert cell_domain(inst, "a", 0) == ("D", "E", "EM", "LD", "N", "SE", "WR")

    def test_holiday_swaps_rest_code(self):
        inst = workbench()
        assert cell_domain(inst, "a", 5)[-1] == "PH"
        assert "WR" not in cell_domain(inst, "a", 5)

    def test_lookahead_days_share_the_rule(self):
        inst = workbench()
        assert cell_domain(inst, "a", 8) == ("D", "E", "EM", "LD", "N", "SE", "WR")

    def test_recorded_history_is_singleton(self):
        inst = workbench(past_assignments=[{"nurse": "a", "day": -1, "shift": "N"}])
        assert cell_domain(inst, "a", -1) == ("N",)

    def test_unrecorded_history_is_rest_singleton(self):
        inst = workbench()
        assert cell_domain(inst, "a", -2) == ("WR",)

    def test_manual_request_pins_domain(self):
        inst = workbench(manual_requests=[{"nurse": "a", "day": 3, "shift": "AL"}])
        assert cell_domain(inst, "a", 3) == ("AL",)

    def test_outside_window_raises(self):
        inst = workbench()
        with pytest.raises(ValidationError):
            cell_domain(inst, "a", 9)
        with pytest.raises(ValidationError):
            cell_domain(inst, "ghost", 0)


class TestCompletion:
    def test_empty_core_fills_rest(self):
        inst = load_toy3()
        full = complete_roster(Roster({}), inst)
        assert len(full.cells) == 21
        assert full.cells[("n1", 0)] == "WR"
        assert full.cells[("n1", 5)] == "PH"

    def test_core_cells_preserved(self):
        inst = load_toy3()
        core = {("n1", 0): "D", ("n2", 1): "N"}
        full = complete_roster(core, inst)
        assert full.cells[("n1", 0)] == "D"
        assert full.cells[("n2", 1)] == "N"

    def test_completion_idempotent(self):
        inst = tiny_family(0)
        free = [
            (n, d)
            for n in inst.nurse_ids()
            for d in inst.calendar.decision_days()
            if (n, d) not in inst.manual_requests
        ]
        core = {cell: "D" for cell in free[:3]}
        first = complete_roster(core, inst)
        again = complete_roster(first.core_cells(inst), inst)
        assert again.cells == first.cells

    def test_manual_requests_fill_their_cells(self):
        inst = workbench(manual_requests=[{"nurse": "b", "day": 2, "shift": "AL"}])
        full = complete_roster(Roster({}), inst)
        assert full.cells[("b", 2)] == "AL"

    def test_conflicting_manual_requests_block_completion(self):
        inst = workbench(
            manual_requests=[
                {"nurse": "b", "day": 2, "shift": "AL"},
                {"nurse": "b", "day": 2, "shift": "TR"},
            ]
        )
        with pytest.raises(CompletionError, match=r"\(b, 2\)"):
            complete_roster(Roster({}), inst)

    def test_core_rejects_history_days(self):
        inst = workbench()
        with pytest.raises(CompletionError, match="history"):
            complete_roster({("a", -1): "D"}, inst)

    def test_core_rejects_rest_codes(self):
        inst = workbench()
        with pytest.raises(CompletionError, match="non-work code 'WR'"):
            complete_roster({("a", 0): "WR"}, inst)

    def test_core_rejects_value_outside_domain(self):
        inst = workbench(manual_requests=[{"nurse": "a", "day": 0, "shift": "AL"}])
        with pytest.raises(CompletionError, match="not in domain"):
            complete_roster({("a", 0): "D"}, inst)

    def test_core_rejects_unknown_nurse(self):
        inst = workbench()
        with pytest.raises(CompletionError, match="outside the instance"):
            complete_roster({("ghost", 0): "D"}, inst)

    def test_completed_cells_always_in_domain(self):
        rng = random.Random(11)
        inst = tiny_family(1)
        work = inst.work_codes()
        free = [
            (n, d)
            for n in inst.nurse_ids()
            for d in inst.calendar.decision_days()
            if (n, d) not in inst.manual_requests
        ]
        for _ in range(25):
            core = {c: rng.choice(work) for c in rng.sample(free, rng.randint(0, len(free)))}
            full = complete_roster(core, inst)
            for (n, d), code in full.cells.items():
                assert code in cell_domain(inst, n, d)


class TestRosterDocuments:
    def test_round_trip(self):
        inst = load_toy3()
        full = complete_roster({("n1", 0): "D"}, inst)
        text = serialize_roster(full)
        back = parse_roster(text, inst)
        assert back.cells == full.cells
        assert serialize_roster(back) == text

    def test_document_shape(self):
        inst = load_toy3()
        doc = roster_to_document(complete_roster(Roster({}), inst))
        assert doc["format_version"] == 1
        assert doc["cells"][0] == {"nurse": "n1", "day": 0, "shift": "WR"}

    def test_parse_rejects_missing_cell(self):
        inst = load_toy3()
        doc = roster_to_document(complete_roster(Roster({}), inst))
        doc["cells"] = doc["cells"][1:]
        with pytest.raises(ValidationError, match="n1"):
            parse_roster(doc, inst)

    def test_parse_rejects_unknown_code(self):
        inst = load_toy3()
        doc = roster_to_document(complete_roster(Roster({}), inst))
        doc["cells"][0]["shift"] = "ZZ"
        with pytest.raises(ValidationError, match="'ZZ'"):
            parse_roster(doc, inst)

    def test_parse_rejects_stray_cell(self):
        inst = load_toy3()
        doc = roster_to_document(complete_roster(Roster({}), inst))
        doc["cells"].append({"nurse": "ghost", "day": 0, "shift": "D"})
        with pytest.raises(ValidationError, match="ghost"):
            parse_roster(doc, inst)


class TestRequestMutation:
    def test_with_requests_replaces_tables(self):
        inst = workbench()
        grown = inst.with_requests(
            pos={("a", 0): frozenset({"D"})},
            neg={("b", 1): frozenset({"N"})},
        )
        assert grown.pos_requests[("a", 0)] == frozenset({"D"})
        assert grown.neg_requests[("b", 1)] == frozenset({"N"})
        assert ("a", 0) not in inst.pos_requests

    def test_with_requests_keeps_digest_of_rest(self):
        inst = workbench()
        grown = inst.with_requests(pos={("a", 0): frozenset({"D"})}, neg={})
        shrunk = grown.with_requests(pos={}, neg={})
        assert instance_digest(shrunk) == instance_digest(inst)

    def test_with_requests_revalidates(self):
        inst = workbench()
        with pytest.raises(ValidationError):
            inst.with_requests(pos={("ghost", 0): frozenset({"D"})}, neg={})

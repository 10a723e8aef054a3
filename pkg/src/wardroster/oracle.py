"""Exhaustive ground-truth enumeration for desk-scale instances.

Walks the full cross product of every cell's domain (pruned only by fixed
cell directives), evaluates each completion with the constraint engine, and
returns the lexicographically best penalty vector with capped witnesses.
Deliberately free of search heuristics so it can referee the search engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from .constraints import HARD, PenaltyVector, context_for, evaluate, penalty_weight
from .model import Instance, Roster, ValidationError, cell_domain

GUARD_LIMIT = 10**8


class SearchSpaceError(ValueError):
    """The domain product is too large to enumerate; carries the size."""


@dataclass(frozen=True)
class OracleResult:
    optimum: PenaltyVector | None
    optimal_rosters: tuple[Roster, ...]
    optimal_count: int
    explored: int
    feasible_found: bool


def enumerate_optimal(
    inst: Instance,
    soften_hard: bool = False,
    fixed: Mapping[tuple[str, int], str] | None = None,
    witness_cap: int = 10,
    guard: int = GUARD_LIMIT,
) -> OracleResult:
    """Enumerate every completion and return the optimum penalty vector.

    With soften_hard off, only hard-consistent completions compete; if none
    exists the result carries optimum=None and feasible_found=False.  Raises
    SearchSpaceError when the domain product exceeds the guard.
    """
    fixed = dict(fixed or {})
    ctx = context_for(inst)
    cell_keys: list[tuple[str, int]] = []
    domains: list[tuple[str, ...]] = []
    size = 1
    for nurse in ctx.nurse_ids:
        for day in ctx.all_days:
            cell = (nurse, day)
            domain = cell_domain(inst, nurse, day)
            pinned = fixed.get(cell)
            if pinned is not None:
                if pinned not in domain:
                    raise ValidationError(
                        f"fixed value {pinned!r} for cell {cell} not in its domain"
                    )
                domain = (pinned,)
            cell_keys.append(cell)
            domains.append(domain)
            size *= len(domain)
            if size > guard:
                raise SearchSpaceError(
                    f"domain product {size}+ exceeds the enumeration guard {guard}"
                )

    priority = ctx.effective_priority
    explored = 0
    best_key: tuple | None = None
    best_count = 0
    witnesses: list[dict] = []
    feasible_found = False

    for combo in itertools.product(*domains):
        explored += 1
        cells = dict(zip(cell_keys, combo))
        violations = ctx.all_violations(cells)
        hard_hit = any(v.kind == HARD for v in violations)
        if hard_hit:
            if not soften_hard:
                continue
        else:
            feasible_found = True
        totals: dict[int, int] = {}
        for violation in violations:
            level = priority(violation.kind, violation.family)
            totals[level] = totals.get(level, 0) + penalty_weight(violation)
        key = tuple(sorted(((l, w) for l, w in totals.items() if w), reverse=True))
        if best_key is None or key < best_key:
            best_key = key
            best_count = 1
            witnesses = [cells]
        elif key == best_key:
            best_count += 1
            if len(witnesses) < witness_cap:
                witnesses.append(cells)

    if best_key is None:
        return OracleResult(None, (), 0, explored, False)
    optimum = evaluate(Roster(witnesses[0]), inst, soften_hard).vector
    if optimum.levels != best_key:
        raise AssertionError(
            f"oracle key {best_key} disagrees with engine vector {optimum.levels}"
        )
    return OracleResult(
        optimum=optimum,
        optimal_rosters=tuple(Roster(dict(w)) for w in witnesses[:witness_cap]),
        optimal_count=best_count,
        explored=explored,
        feasible_found=feasible_found,
    )

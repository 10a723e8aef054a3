"""Constraint evaluation: violations, penalty terms, and penalty vectors.

Every rule family evaluates a total roster to a set of Violations.  A
violation is either *bounded* (carries the breached limit and the attained
value; its penalty weight is the squared deviation) or *unit* (weight 1).
Weights aggregate per priority level into a PenaltyVector compared
lexicographically from the highest level down.

Hard families always map to lifted levels (declared priority plus the largest
declared priority), keeping them strictly above every soft family while
preserving their relative order.  The soften_hard flag does not change the
vector; it only decides whether a roster with hard violations counts as
feasible.

Counting windows: workday/rest/request/balance counts use the current period
only; run-shaped rules (consecutive work, patterns, succession, isolated
days, leave adjacency) use the period extended by the one-week flanks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .model import (
    HARD,
    HOLIDAY_CODE,
    Instance,
    KLASS_DUTY,
    KLASS_LEAVE,
    KLASS_REST,
    KLASS_WORK,
    LONG_DAY_CODE,
    Roster,
    SHORT_EVENING_CODE,
    SOFT,
    WEEKLY_REST_CODE,
)

Cells = Mapping[tuple[str, int], str]


class ConfigError(ValueError):
    """A configuration problem: a violation without a priority entry to map
    it to a level, or a search setting that is missing, extraneous, or out
    of range."""


@dataclass(frozen=True)
class Violation:
    """One breached rule: reason family plus identifying params.

    limit/value are set for bounded violations and None for unit violations.
    """

    kind: str
    family: str
    params: tuple
    limit: int | None = None
    value: int | None = None

    @property
    def reason(self) -> str:
        return f"{self.family}({','.join(str(p) for p in self.params)})"

    def sort_key(self) -> tuple:
        return (self.family, self.kind, repr(self.params), repr(self.limit), repr(self.value))


@dataclass(frozen=True)
class PenaltyTerm:
    violation: Violation
    weight: int
    priority: int


@dataclass(frozen=True)
class PenaltyVector:
    """Per-level weight totals, compared lexicographically from the top level.

    Stored as nonzero (level, total) pairs sorted by level descending; with
    non-negative totals, plain tuple comparison of that canonical form equals
    level-by-level comparison with absent levels read as zero.
    """

    levels: tuple[tuple[int, int], ...] = ()

    @staticmethod
    def from_terms(terms: Iterable[PenaltyTerm]) -> "PenaltyVector":
        totals: dict[int, int] = {}
        for term in terms:
            totals[term.priority] = totals.get(term.priority, 0) + term.weight
        return PenaltyVector(
            tuple(sorted(((l, w) for l, w in totals.items() if w), reverse=True))
        )

    def total_at(self, level: int) -> int:
        for l, w in self.levels:
            if l == level:
                return w
        return 0

    def total(self) -> int:
        return sum(w for _, w in self.levels)

    def is_zero(self) -> bool:
        return not self.levels

    def as_rows(self) -> list[dict[str, int]]:
        return [{"priority": l, "total": w} for l, w in self.levels]

    def __lt__(self, other: "PenaltyVector") -> bool:
        return self.levels < other.levels

    def __le__(self, other: "PenaltyVector") -> bool:
        return self.levels <= other.levels

    def __gt__(self, other: "PenaltyVector") -> bool:
        return self.levels > other.levels

    def __ge__(self, other: "PenaltyVector") -> bool:
        return self.levels >= other.levels


@dataclass(frozen=True)
class EvalResult:
    violations: tuple[Violation, ...]
    terms: tuple[PenaltyTerm, ...]
    vector: PenaltyVector
    feasible: bool
    hard_weight: int


def penalty_weight(violation: Violation) -> int:
    """Squared deviation for bounded violations, 1 for unit violations."""
    if violation.limit is None:
        return 1
    return (violation.limit - violation.value) ** 2


class EvalContext:
    """Precompiled lookup tables for one instance; build once, reuse."""

    def __init__(self, inst: Instance):
        self.instance = inst
        cal = inst.calendar
        self.first_day = cal.first_day
        self.last_day = cal.last_day
        self.all_days = list(cal.days())
        self.current_days = list(cal.current_days())
        self.decision_days = list(cal.decision_days())
        flanked = cal.flanked_days()
        self.flank_lo = flanked.start
        self.flank_hi = flanked.stop - 1
        self.holidays = cal.holidays
        self.offday = {d: (d in cal.weekends or d in cal.holidays) for d in self.all_days}

        self.nurse_ids = [n.id for n in inst.nurses]
        self.points = {n.id: n.point for n in inst.nurses}
        self.klass = {s.code: s.klass for s in inst.shifts}
        self.working = {
            s.code for s in inst.shifts if s.klass in (KLASS_WORK, KLASS_DUTY)
        }
        self.rest_codes = {s.code for s in inst.shifts if s.klass == KLASS_REST}
        self.leave_codes = {s.code for s in inst.shifts if s.klass == KLASS_LEAVE}
        self.work_starts = {
            s.code: s.start_minute for s in inst.shifts if s.klass == KLASS_WORK
        }
        self.sgroup = {g: frozenset(m) for g, m in inst.shift_groups.items()}
        self.ngroup = {g: sorted(m) for g, m in inst.nurse_groups.items()}

        self.eq_shifts_on = LONG_DAY_CODE in self.klass or SHORT_EVENING_CODE in self.klass

        self.pos_by_nurse: dict[str, list[tuple[int, frozenset[str]]]] = {}
        for (nurse, day), codes in inst.pos_requests.items():
            self.pos_by_nurse.setdefault(nurse, []).append((day, codes))
        self.neg_by_nurse: dict[str, list[tuple[int, frozenset[str]]]] = {}
        for (nurse, day), codes in inst.neg_requests.items():
            self.neg_by_nurse.setdefault(nurse, []).append((day, codes))
        for table in (self.pos_by_nurse, self.neg_by_nurse):
            for rows in table.values():
                rows.sort()

        self.consec_by_nurse: dict[str, list] = {n: [] for n in self.nurse_ids}
        for rule in inst.consecutive_rules:
            for member in self.ngroup.get(rule.nurse_group, []):
                self.consec_by_nurse[member].append(rule)

        self.freq_by_nurse: dict[str, list] = {n: [] for n in self.nurse_ids}
        for rule in inst.shift_freq_rules:
            self.freq_by_nurse.setdefault(rule.nurse, []).append(rule)

        self.patterns_by_nurse: dict[str, list] = {n: [] for n in self.nurse_ids}
        for idx, rule in enumerate(inst.pattern_rules):
            members = self.ngroup.get(rule.nurse_group, [])
            slots = tuple(self.sgroup[s] for s in rule.sequence)
            for member in members:
                self.patterns_by_nurse[member].append((idx, rule, slots))

        self.succession = [
            (idx, rule, self.sgroup[rule.prev_group], self.sgroup[rule.next_group])
            for idx, rule in enumerate(inst.succession_rules)
        ]
        self.rest_gaps = list(enumerate(inst.rest_gap_rules))

        # Staffing rows grouped so headcount/point rules over the same scope
        # and direction pair up into the combined either-suffices mode.
        self.staffing_by_day: dict[int, list] = {}
        grouped: dict[tuple, dict[str, int]] = {}
        for rule in inst.staff_rules:
            key = (rule.kind, rule.nurse_group, rule.shift_group, rule.day, rule.which)
            grouped.setdefault(key, {})["staff"] = rule.bound
        for rule in inst.point_rules:
            key = (rule.kind, rule.nurse_group, rule.shift_group, rule.day, rule.which)
            grouped.setdefault(key, {})["point"] = rule.bound
        for (kind, ng, sg, day, which), bounds in sorted(grouped.items()):
            self.staffing_by_day.setdefault(day, []).append(
                (
                    kind,
                    ng,
                    self.ngroup.get(ng, []),
                    sg,
                    self.sgroup[sg],
                    which,
                    bounds.get("staff"),
                    bounds.get("point"),
                )
            )

        self.pair_rules = list(enumerate(inst.pair_rules))
        self.balance_rules = list(enumerate(inst.balance_rules))

        declared = inst.priorities
        self._lift = max(declared.values(), default=0)
        self._priority = dict(declared)

    def effective_priority(self, kind: str, family: str) -> int:
        declared = self._priority.get((kind, family))
        if declared is None:
            raise ConfigError(f"no priority entry for ({kind}, {family})")
        return declared + self._lift if kind == HARD else declared

    @property
    def lift(self) -> int:
        return self._lift

    # -- row scope ----------------------------------------------------------

    def row_violations(self, cells: Cells, nurse: str) -> list[Violation]:
        inst = self.instance
        klass = self.klass
        out: list[Violation] = []
        first = self.first_day
        vals = [cells[(nurse, d)] for d in self.all_days]

        def code_at(day: int) -> str | None:
            if self.first_day <= day <= self.last_day:
                return vals[day - first]
            return None

        work_current = 0
        wr_current = 0
        ld = 0
        se = 0
        for d in self.current_days:
            code = vals[d - first]
            if klass[code] == KLASS_WORK:
                work_current += 1
            if code == WEEKLY_REST_CODE:
                wr_current += 1
            if code == LONG_DAY_CODE:
                ld += 1
            elif code == SHORT_EVENING_CODE:
                se += 1

        bounds = inst.work_days_bounds.get(nurse)
        if bounds:
            lb, ub = bounds
            if work_current < lb:
                out.append(Violation(HARD, "work_days_lb", (nurse,), lb, work_current))
            if work_current > ub:
                out.append(Violation(HARD, "work_days_ub", (nurse,), ub, work_current))
        bounds = inst.weekly_rest_bounds.get(nurse)
        if bounds:
            lb, ub = bounds
            if wr_current < lb:
                out.append(Violation(HARD, "weekly_rest_lb", (nurse,), lb, wr_current))
            if wr_current > ub:
                out.append(Violation(HARD, "weekly_rest_ub", (nurse,), ub, wr_current))

        for day, wanted in self.pos_by_nurse.get(nurse, ()):
            if code_at(day) not in wanted:
                out.append(Violation(HARD, "pos_request", (nurse, day)))
        for day, unwanted in self.neg_by_nurse.get(nurse, ()):
            if code_at(day) in unwanted:
                out.append(Violation(HARD, "neg_request", (nurse, day)))

        if self.eq_shifts_on and ld != se:
            out.append(Violation(HARD, "eq_shifts", (nurse,)))

        working = self.working
        consec = self.consec_by_nurse.get(nurse, ())
        if consec:
            # Maximal runs of work/duty days; one violation per over-length
            # window start inside the flanked region ending at day -1 or later.
            run_start = None
            for d in range(first, self.last_day + 2):
                on = d <= self.last_day and vals[d - first] in working
                if on and run_start is None:
                    run_start = d
                elif not on and run_start is not None:
                    run_end = d - 1
                    for rule in consec:
                        ub = rule.ub
                        for bd in range(run_start, run_end - ub + 1):
                            ed = bd + ub
                            if bd >= self.flank_lo and ed <= self.flank_hi and ed >= -1:
                                out.append(
                                    Violation(
                                        rule.kind,
                                        "consecutive_work_days",
                                        (nurse, bd),
                                        ub,
                                        ub + 1,
                                    )
                                )
                    run_start = None

        for rule in self.freq_by_nurse.get(nurse, ()):
            members = self.sgroup[rule.shift_group]
            count = sum(1 for d in self.current_days if vals[d - first] in members)
            if rule.which == "lb" and count < rule.bound:
                out.append(
                    Violation(rule.kind, "shift_lb", (nurse, rule.shift_group), rule.bound, count)
                )
            elif rule.which == "ub" and count > rule.bound:
                out.append(
                    Violation(rule.kind, "shift_ub", (nurse, rule.shift_group), rule.bound, count)
                )

        for idx, rule, slots in self.patterns_by_nurse.get(nurse, ()):
            span = len(slots)
            count = 0
            for d in range(self.flank_lo, self.flank_hi - span + 2):
                if all(vals[d + i - first] in slots[i] for i in range(span)):
                    count += 1
            if count < rule.min_count:
                out.append(
                    Violation(rule.kind, "pattern", (nurse, idx), rule.min_count, count)
                )
            elif count > rule.max_count:
                out.append(
                    Violation(rule.kind, "pattern", (nurse, idx), rule.max_count, count)
                )

        if self.succession:
            for d in range(self.flank_lo, self.flank_hi):
                prev_code = vals[d - first]
                next_code = vals[d + 1 - first]
                for idx, rule, prev_set, next_set in self.succession:
                    if prev_code in prev_set:
                        hit = next_code in next_set
                        if (rule.mode == "required" and not hit) or (
                            rule.mode == "forbidden" and hit
                        ):
                            out.append(Violation(rule.kind, "succession", (nurse, d, idx)))

        if self.rest_gaps:
            starts = self.work_starts
            for d in range(self.flank_lo, self.flank_hi):
                s0 = starts.get(vals[d - first])
                if s0 is None:
                    continue
                s1 = starts.get(vals[d + 1 - first])
                if s1 is None:
                    continue
                gap = s1 + 24 * 60 - s0
                for idx, rule in self.rest_gaps:
                    if gap < rule.min_gap_minutes:
                        out.append(Violation(rule.kind, "rest_gap", (nurse, d, idx)))

        for d in range(self.flank_lo, self.flank_hi + 1):
            if vals[d - first] not in working:
                continue
            before = code_at(d - 1)
            after = code_at(d + 1)
            if (before is None or before not in working) and (
                after is None or after not in working
            ):
                out.append(Violation(SOFT, "isolated_work_day", (nurse, d)))

        if self.leave_codes:
            leave = self.leave_codes
            rest = self.rest_codes
            d = self.first_day
            while d <= self.last_day:
                if vals[d - first] in leave:
                    start = d
                    while d + 1 <= self.last_day and vals[d + 1 - first] in leave:
                        d += 1
                    end = d
                    if start <= self.flank_hi and end >= self.flank_lo:
                        before = code_at(start - 1)
                        after = code_at(end + 1)
                        before_ok = before is not None and (before in rest or before in leave)
                        after_ok = after is not None and (after in rest or after in leave)
                        if not before_ok and not after_ok:
                            out.append(Violation(SOFT, "leave_adjacent_rest", (nurse, start)))
                d += 1

        return out

    # -- day scope ----------------------------------------------------------

    def day_violations(self, cells: Cells, day: int) -> list[Violation]:
        out: list[Violation] = []
        klass = self.klass
        for kind, ng, members, sg, codes, which, staff_bound, point_bound in self.staffing_by_day.get(
            day, ()
        ):
            heads = 0
            points = 0
            for member in members:
                if cells[(member, day)] in codes:
                    heads += 1
                    points += self.points[member]
            if which == "lb":
                head_breach = staff_bound is not None and heads < staff_bound
                point_breach = point_bound is not None and points < point_bound
            else:
                head_breach = staff_bound is not None and heads > staff_bound
                point_breach = point_bound is not None and points > point_bound
            if staff_bound is not None and point_bound is not None:
                # Combined mode: meeting either bound suffices.
                if head_breach and point_breach:
                    out.append(
                        Violation(kind, f"staff_{which}", (ng, sg, day), staff_bound, heads)
                    )
            else:
                if head_breach:
                    out.append(
                        Violation(kind, f"staff_{which}", (ng, sg, day), staff_bound, heads)
                    )
                if point_breach:
                    out.append(
                        Violation(kind, f"point_{which}", (ng, sg, day), point_bound, points)
                    )

        if self.pair_rules and day in self._decision_set:
            for _, rule in self.pair_rules:
                a = cells[(rule.nurse_a, day)]
                b = cells[(rule.nurse_b, day)]
                if rule.mode == "prohibited":
                    if a == b and klass[a] == KLASS_WORK:
                        out.append(
                            Violation(rule.kind, "pair", (rule.nurse_a, rule.nurse_b, day))
                        )
                else:
                    if a != b and klass[a] == KLASS_WORK and klass[b] == KLASS_WORK:
                        out.append(
                            Violation(rule.kind, "pair", (rule.nurse_a, rule.nurse_b, day))
                        )
        return out

    @property
    def _decision_set(self) -> frozenset[int]:
        cached = self.__dict__.get("_decision_cache")
        if cached is None:
            cached = frozenset(self.decision_days)
            self.__dict__["_decision_cache"] = cached
        return cached

    # -- balance scope ------------------------------------------------------

    def balance_violations(self, cells: Cells, idx: int) -> list[Violation]:
        _, rule = self.balance_rules[idx]
        members = self.ngroup.get(rule.nurse_group, [])
        if not members:
            return []
        values = []
        if rule.metric == "shift_group":
            codes = self.sgroup[rule.shift_group]
            for member in members:
                values.append(
                    sum(1 for d in self.current_days if cells[(member, d)] in codes)
                )
        else:
            rest = self.rest_codes
            offdays = [d for d in self.current_days if self.offday[d]]
            for member in members:
                values.append(sum(1 for d in offdays if cells[(member, d)] in rest))
        spread = max(values) - min(values)
        if spread > rule.allowed_spread:
            return [
                Violation(
                    SOFT,
                    "balance",
                    (rule.nurse_group, idx),
                    rule.allowed_spread,
                    spread,
                )
            ]
        return []

    def all_violations(self, cells: Cells) -> set[Violation]:
        found: set[Violation] = set()
        for nurse in self.nurse_ids:
            found.update(self.row_violations(cells, nurse))
        for day in self.staffing_by_day:
            found.update(self.day_violations(cells, day))
        if self.pair_rules:
            for day in self.decision_days:
                if day not in self.staffing_by_day:
                    found.update(self.day_violations(cells, day))
        for idx in range(len(self.balance_rules)):
            found.update(self.balance_violations(cells, idx))
        return found


_CTX_ATTR = "_eval_context_cache"


def context_for(inst: Instance) -> EvalContext:
    ctx = inst.__dict__.get(_CTX_ATTR)
    if ctx is None:
        ctx = EvalContext(inst)
        object.__setattr__(inst, _CTX_ATTR, ctx)
    return ctx


def _assemble(
    ctx: EvalContext, violations: Iterable[Violation], soften_hard: bool
) -> EvalResult:
    ordered = tuple(sorted(set(violations), key=Violation.sort_key))
    terms = tuple(
        PenaltyTerm(
            violation=v,
            weight=penalty_weight(v),
            priority=ctx.effective_priority(v.kind, v.family),
        )
        for v in ordered
    )
    vector = PenaltyVector.from_terms(terms)
    hard_weight = sum(t.weight for t in terms if t.violation.kind == HARD)
    feasible = soften_hard or hard_weight == 0
    return EvalResult(
        violations=ordered,
        terms=terms,
        vector=vector,
        feasible=feasible,
        hard_weight=hard_weight,
    )


def evaluate(roster: Roster | Cells, inst: Instance, soften_hard: bool = False) -> EvalResult:
    """Evaluate a total roster against every rule family."""
    cells = roster.cells if isinstance(roster, Roster) else roster
    ctx = context_for(inst)
    return _assemble(ctx, ctx.all_violations(cells), soften_hard)


# Spec'd per-family entry points; each returns that family's violations only.


def _filtered(roster: Roster, inst: Instance, families: tuple[str, ...]) -> list[Violation]:
    ctx = context_for(inst)
    return sorted(
        (v for v in ctx.all_violations(roster.cells) if v.family in families),
        key=Violation.sort_key,
    )


def eval_workdays(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("work_days_lb", "work_days_ub"))


def eval_weekly_rest(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("weekly_rest_lb", "weekly_rest_ub"))


def eval_requests(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("pos_request", "neg_request"))


def eval_ld_se_balance(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("eq_shifts",))


def eval_consecutive_work(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("consecutive_work_days",))


def eval_daily_staffing(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("staff_lb", "staff_ub", "point_lb", "point_ub"))


def eval_shift_frequency(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("shift_lb", "shift_ub"))


def eval_shift_patterns(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("pattern",))


def eval_inter_shift(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("succession", "rest_gap"))


def eval_pairing(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("pair",))


def eval_isolated_workdays(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("isolated_work_day",))


def eval_leave_adjacent_rest(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("leave_adjacent_rest",))


def eval_workload_balance(roster: Roster, inst: Instance) -> list[Violation]:
    return _filtered(roster, inst, ("balance",))


# ---------------------------------------------------------------------------
# Incremental evaluation


class DeltaEvaluator:
    """Scope-cached evaluator: recomputes only what changed cells can touch.

    Violations cache under three scope kinds: one per nurse row, one per day
    (staffing and pairing), one per balance rule.  A cell change invalidates
    its row, its day, and every balance rule whose group contains the nurse.
    Results are bit-exact with a full evaluate().
    """

    def __init__(self, inst: Instance, cells: dict[tuple[str, int], str]):
        self.instance = inst
        self.ctx = context_for(inst)
        self.cells = cells
        self._balance_touch: dict[str, list[int]] = {n: [] for n in self.ctx.nurse_ids}
        for idx, rule in self.ctx.balance_rules:
            for member in self.ctx.ngroup.get(rule.nurse_group, []):
                self._balance_touch[member].append(idx)
        self._day_scoped = set(self.ctx.staffing_by_day)
        if self.ctx.pair_rules:
            self._day_scoped.update(self.ctx.decision_days)
        self.refresh()

    def refresh(self) -> None:
        """Full recompute of every scope (also the stale-cache fallback)."""
        ctx = self.ctx
        cells = self.cells
        self._rows = {n: ctx.row_violations(cells, n) for n in ctx.nurse_ids}
        self._days = {d: ctx.day_violations(cells, d) for d in self._day_scoped}
        self._balance = {
            idx: ctx.balance_violations(cells, idx) for idx in range(len(ctx.balance_rules))
        }

    def update(self, changed_cells: Iterable[tuple[str, int]]) -> None:
        ctx = self.ctx
        cells = self.cells
        rows = set()
        days = set()
        balances = set()
        for nurse, day in changed_cells:
            rows.add(nurse)
            if day in self._day_scoped:
                days.add(day)
            balances.update(self._balance_touch.get(nurse, ()))
        for nurse in rows:
            self._rows[nurse] = ctx.row_violations(cells, nurse)
        for day in days:
            self._days[day] = ctx.day_violations(cells, day)
        for idx in balances:
            self._balance[idx] = ctx.balance_violations(cells, idx)

    def violations(self) -> set[Violation]:
        found: set[Violation] = set()
        for group in self._rows.values():
            found.update(group)
        for group in self._days.values():
            found.update(group)
        for group in self._balance.values():
            found.update(group)
        return found

    def result(self, soften_hard: bool = False) -> EvalResult:
        return _assemble(self.ctx, self.violations(), soften_hard)


def evaluate_delta(
    roster: Roster,
    inst: Instance,
    changed_cells: Iterable[tuple[str, int]],
    cache: DeltaEvaluator | None = None,
    soften_hard: bool = False,
) -> tuple[EvalResult, DeltaEvaluator]:
    """Re-evaluate after changed_cells, reusing a cache when it is fresh.

    The cache is fresh when it was built for this instance and its recorded
    cells differ from the roster only at changed_cells; anything else falls
    back to a full re-evaluation.
    """
    changed = list(changed_cells)
    if cache is None or cache.instance is not inst:
        cache = DeltaEvaluator(inst, dict(roster.cells))
        return cache.result(soften_hard), cache
    stale = False
    changed_set = set(changed)
    if len(cache.cells) != len(roster.cells):
        stale = True
    else:
        for cell, code in roster.cells.items():
            if cache.cells.get(cell) != code and cell not in changed_set:
                stale = True
                break
    for cell in changed:
        cache.cells[cell] = roster.cells[cell]
    if stale:
        cache.cells = dict(roster.cells)
        cache.refresh()
    else:
        cache.update(changed)
    return cache.result(soften_hard), cache


# ---------------------------------------------------------------------------
# Reporting


def violation_report(result: EvalResult) -> dict[str, Any]:
    """JSON-shaped report: one row per violation plus the level totals."""
    rows = []
    for term in result.terms:
        v = term.violation
        row: dict[str, Any] = {
            "kind": v.kind,
            "reason": v.reason,
            "params": list(v.params),
            "weight": term.weight,
            "priority": term.priority,
        }
        if v.limit is not None:
            row["limit"] = v.limit
            row["value"] = v.value
        rows.append(row)
    return {
        "violations": rows,
        "penalties": result.vector.as_rows(),
        "feasible": result.feasible,
    }

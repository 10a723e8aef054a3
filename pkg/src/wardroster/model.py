"""Domain model for ward rosters: instances, calendars, rosters, completion.

An Instance bundles everything a ward hands the engine: the staff list with
skill points, the shift catalogue, the scheduling calendar, carried-over
history, per-cell requests, and the rule tables that the constraint engine
evaluates.  Instances parse from a canonical JSON document and serialize back
byte-identically, so equal instances have equal documents and a stable digest.

Cells are (nurse_id, day) pairs.  Day indices are integers: negative days are
history, days 0..horizon-1 are the period being scheduled, and the days above
that are the lookahead week kept for cross-boundary rules.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

FORMAT_VERSION = 1

KLASS_WORK = "work"
KLASS_REST = "rest"
KLASS_DUTY = "duty"
KLASS_LEAVE = "leave"
SHIFT_KLASSES = (KLASS_WORK, KLASS_REST, KLASS_DUTY, KLASS_LEAVE)

# Rest codes the completion rules key on: a free cell completes to WR on a
# plain day and to PH on a public holiday.
WEEKLY_REST_CODE = "WR"
HOLIDAY_CODE = "PH"

# Long-day / short-evening codes balanced by the eq-shifts rule.
LONG_DAY_CODE = "LD"
SHORT_EVENING_CODE = "SE"

HARD = "hard"
SOFT = "soft"
KINDS = (HARD, SOFT)

# How far workload rules look past the period edges (one week each side).
FLANK_DAYS = 7


class InstanceError(ValueError):
    """Base class for instance document problems."""


class ParseError(InstanceError):
    """Document structure does not match the schema; message names the path."""


class ValidationError(InstanceError):
    """Document is well-formed but internally inconsistent."""


class CompletionError(ValueError):
    """A roster cell has no admissible completion; message names the cell."""


@dataclass(frozen=True)
class Nurse:
    """A staff member with a skill point used by point-based staffing rules."""

    id: str
    point: int


@dataclass(frozen=True)
class ShiftDef:
    """A shift code with its klass and, for work shifts, clock times.

    start_minute/end_minute are minutes from midnight on the shift's own day;
    an end at or before the start means the shift wraps past midnight.
    """

    code: str
    klass: str
    start_minute: int | None = None
    end_minute: int | None = None


@dataclass(frozen=True)
class Calendar:
    """The scheduling window: history, current period, and lookahead.

    Day indices run -past_days .. horizon_days + lookahead_days - 1.
    holidays/weekends are day-index sets inside that window.
    """

    past_days: int
    horizon_days: int
    lookahead_days: int
    holidays: frozenset[int] = frozenset()
    weekends: frozenset[int] = frozenset()

    @property
    def first_day(self) -> int:
        return -self.past_days

    @property
    def last_day(self) -> int:
        return self.horizon_days + self.lookahead_days - 1

    def days(self) -> range:
        """Every day in the window, history and lookahead included."""
        return range(self.first_day, self.last_day + 1)

    def current_days(self) -> range:
        """The period being scheduled (day 0 .. horizon-1)."""
        return range(0, self.horizon_days)

    def decision_days(self) -> range:
        """Days the engine may assign: current period plus lookahead."""
        return range(0, self.last_day + 1) if self.horizon_days + self.lookahead_days else range(0, 0)

    def flanked_days(self) -> range:
        """Current period extended one week each side, clipped to the window."""
        lo = max(self.first_day, -FLANK_DAYS)
        hi = min(self.last_day, self.horizon_days + FLANK_DAYS - 1)
        return range(lo, hi + 1)

    def contains(self, day: int) -> bool:
        return self.first_day <= day <= self.last_day


@dataclass(frozen=True)
class ConsecutiveRule:
    """Upper bound on consecutive work days for a nurse group."""

    kind: str
    nurse_group: str
    ub: int


@dataclass(frozen=True)
class StaffRule:
    """Daily staffing bound: headcount or skill-point sum, per day and group."""

    kind: str
    nurse_group: str
    shift_group: str
    day: int
    which: str  # "lb" | "ub"
    bound: int


@dataclass(frozen=True)
class ShiftFreqRule:
    """Bound on how often one nurse takes shifts from a group this period."""

    kind: str
    nurse: str
    shift_group: str
    which: str  # "lb" | "ub"
    bound: int


@dataclass(frozen=True)
class PatternRule:
    """Occurrence bounds for a fixed-length sequence of shift-group slots."""

    kind: str
    nurse_group: str
    sequence: tuple[str, ...]
    min_count: int
    max_count: int


@dataclass(frozen=True)
class SuccessionRule:
    """Next-day succession rule between two shift groups."""

    kind: str
    prev_group: str
    mode: str  # "required" | "forbidden"
    next_group: str


@dataclass(frozen=True)
class RestGapRule:
    """Minimum gap between consecutive work-shift start times."""

    kind: str
    min_gap_minutes: int


@dataclass(frozen=True)
class PairRule:
    """Two nurses who should or must not share a shift."""

    kind: str
    nurse_a: str
    nurse_b: str
    mode: str  # "recommended" | "prohibited"


@dataclass(frozen=True)
class BalanceRule:
    """Soft spread bound on a per-nurse count within a group.

    metric "shift_group" counts cells in shift_group; metric
    "weekend_holiday_rest" counts rest-class cells on weekend/holiday days.
    """

    nurse_group: str
    metric: str
    shift_group: str | None
    allowed_spread: int


BALANCE_METRICS = ("shift_group", "weekend_holiday_rest")


@dataclass(frozen=True)
class Instance:
    """A complete rostering problem; treat as immutable once parsed."""

    nurses: tuple[Nurse, ...]
    nurse_groups: Mapping[str, frozenset[str]]
    shifts: tuple[ShiftDef, ...]
    shift_groups: Mapping[str, frozenset[str]]
    calendar: Calendar
    past_assignments: Mapping[tuple[str, int], str]
    pos_requests: Mapping[tuple[str, int], frozenset[str]]
    neg_requests: Mapping[tuple[str, int], frozenset[str]]
    manual_requests: Mapping[tuple[str, int], tuple[str, ...]]
    work_days_bounds: Mapping[str, tuple[int, int]]
    weekly_rest_bounds: Mapping[str, tuple[int, int]]
    consecutive_rules: tuple[ConsecutiveRule, ...]
    staff_rules: tuple[StaffRule, ...]
    point_rules: tuple[StaffRule, ...]
    shift_freq_rules: tuple[ShiftFreqRule, ...]
    pattern_rules: tuple[PatternRule, ...]
    succession_rules: tuple[SuccessionRule, ...]
    rest_gap_rules: tuple[RestGapRule, ...]
    pair_rules: tuple[PairRule, ...]
    balance_rules: tuple[BalanceRule, ...]
    priorities: Mapping[tuple[str, str], int]

    def shift(self, code: str) -> ShiftDef:
        return self._shift_index[code]

    def klass(self, code: str) -> str:
        return self._shift_index[code].klass

    def nurse_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nurses)

    @property
    def _shift_index(self) -> dict[str, ShiftDef]:
        idx = self.__dict__.get("_shift_index_cache")
        if idx is None:
            idx = {s.code: s for s in self.shifts}
            object.__setattr__(self, "_shift_index_cache", idx)
        return idx

    def work_codes(self) -> tuple[str, ...]:
        return tuple(s.code for s in self.shifts if s.klass == KLASS_WORK)

    def _nurse_ids_set(self) -> frozenset[str]:
        cached = self.__dict__.get("_nurse_ids_cache")
        if cached is None:
            cached = frozenset(n.id for n in self.nurses)
            object.__setattr__(self, "_nurse_ids_cache", cached)
        return cached

    def with_requests(
        self,
        pos: Mapping[tuple[str, int], frozenset[str]],
        neg: Mapping[tuple[str, int], frozenset[str]],
    ) -> "Instance":
        """Copy of this instance with replaced request tables (live edits)."""
        doc = instance_to_document(self)
        doc["pos_requests"] = _request_rows(pos)
        doc["neg_requests"] = _request_rows(neg)
        return parse_instance(doc)


@dataclass(frozen=True)
class Roster:
    """A total assignment of one shift code to every cell in the window."""

    cells: Mapping[tuple[str, int], str]

    def value(self, nurse: str, day: int) -> str:
        return self.cells[(nurse, day)]

    def core_cells(self, instance: Instance) -> dict[tuple[str, int], str]:
        """The decision part: work-class cells on non-history days."""
        return {
            cell: code
            for cell, code in self.cells.items()
            if cell[1] >= 0 and instance.klass(code) == KLASS_WORK
        }

    def with_cells(self, changes: Mapping[tuple[str, int], str]) -> "Roster":
        merged = dict(self.cells)
        merged.update(changes)
        return Roster(merged)


# ---------------------------------------------------------------------------
# Parsing


def _fail(path: str, message: str) -> None:
    raise ParseError(f"{path}: {message}")


def _expect_dict(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, f"expected object, got {type(value).__name__}")
    return value


def _expect_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        _fail(path, f"expected array, got {type(value).__name__}")
    return value


def _expect_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected string, got {type(value).__name__}")
    return value


def _expect_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected integer, got {type(value).__name__}")
    return value


def _get(doc: dict, key: str, path: str) -> Any:
    if key not in doc:
        _fail(f"{path}.{key}", "missing key")
    return doc[key]


def _opt_time(row: dict, key: str, path: str) -> int | None:
    if key not in row or row[key] is None:
        return None
    minute = _expect_int(row[key], f"{path}.{key}")
    if not 0 <= minute < 24 * 60:
        _fail(f"{path}.{key}", "minutes from midnight must be in [0, 1440)")
    return minute


def _cell_rows(
    value: Any, path: str, *, value_key: str | None = "shift"
) -> list[tuple[str, int, str | None]]:
    rows = []
    for i, raw in enumerate(_expect_list(value, path)):
        row = _expect_dict(raw, f"{path}[{i}]")
        nurse = _expect_str(_get(row, "nurse", f"{path}[{i}]"), f"{path}[{i}].nurse")
        day = _expect_int(_get(row, "day", f"{path}[{i}]"), f"{path}[{i}].day")
        shift = None
        if value_key is not None:
            shift = _expect_str(_get(row, value_key, f"{path}[{i}]"), f"{path}[{i}].{value_key}")
        rows.append((nurse, day, shift))
    return rows


def _expect_kind(value: Any, path: str) -> str:
    kind = _expect_str(value, path)
    if kind not in KINDS:
        _fail(path, f"kind must be one of {KINDS}")
    return kind


def _expect_which(value: Any, path: str) -> str:
    which = _expect_str(value, path)
    if which not in ("lb", "ub"):
        _fail(path, "must be 'lb' or 'ub'")
    return which


def parse_instance(document: str | Mapping[str, Any]) -> Instance:
    """Parse and validate an instance document (JSON text or dict).

    Raises ParseError naming the offending path for structural problems and
    ValidationError for consistency problems (dangling ids, inverted bounds,
    unknown klasses, missing priority entries).
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"$: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    doc = _expect_dict(document, "$")

    version = _expect_int(_get(doc, "format_version", "$"), "$.format_version")
    if version != FORMAT_VERSION:
        _fail("$.format_version", f"unsupported version {version} (expected {FORMAT_VERSION})")

    nurses = []
    for i, raw in enumerate(_expect_list(_get(doc, "nurses", "$"), "$.nurses")):
        row = _expect_dict(raw, f"$.nurses[{i}]")
        nurses.append(
            Nurse(
                id=_expect_str(_get(row, "id", f"$.nurses[{i}]"), f"$.nurses[{i}].id"),
                point=_expect_int(_get(row, "point", f"$.nurses[{i}]"), f"$.nurses[{i}].point"),
            )
        )
    nurses.sort(key=lambda n: n.id)

    shifts = []
    for i, raw in enumerate(_expect_list(_get(doc, "shifts", "$"), "$.shifts")):
        row = _expect_dict(raw, f"$.shifts[{i}]")
        path = f"$.shifts[{i}]"
        klass = _expect_str(_get(row, "klass", path), f"{path}.klass")
        if klass not in SHIFT_KLASSES:
            raise ValidationError(f"{path}.klass: unknown shift klass {klass!r}")
        shifts.append(
            ShiftDef(
                code=_expect_str(_get(row, "code", path), f"{path}.code"),
                klass=klass,
                start_minute=_opt_time(row, "start", path),
                end_minute=_opt_time(row, "end", path),
            )
        )
    shifts.sort(key=lambda s: s.code)

    def group_map(key: str) -> dict[str, frozenset[str]]:
        raw = _expect_dict(_get(doc, key, "$"), f"$.{key}")
        out = {}
        for gid, members in raw.items():
            out[gid] = frozenset(
                _expect_str(m, f"$.{key}.{gid}[{j}]")
                for j, m in enumerate(_expect_list(members, f"$.{key}.{gid}"))
            )
        return out

    nurse_groups = group_map("nurse_groups")
    shift_groups = group_map("shift_groups")

    cal_doc = _expect_dict(_get(doc, "calendar", "$"), "$.calendar")
    calendar = Calendar(
        past_days=_expect_int(_get(cal_doc, "past_days", "$.calendar"), "$.calendar.past_days"),
        horizon_days=_expect_int(
            _get(cal_doc, "horizon_days", "$.calendar"), "$.calendar.horizon_days"
        ),
        lookahead_days=_expect_int(
            _get(cal_doc, "lookahead_days", "$.calendar"), "$.calendar.lookahead_days"
        ),
        holidays=frozenset(
            _expect_int(d, f"$.calendar.holidays[{i}]")
            for i, d in enumerate(_expect_list(cal_doc.get("holidays", []), "$.calendar.holidays"))
        ),
        weekends=frozenset(
            _expect_int(d, f"$.calendar.weekends[{i}]")
            for i, d in enumerate(_expect_list(cal_doc.get("weekends", []), "$.calendar.weekends"))
        ),
    )

    past_assignments: dict[tuple[str, int], str] = {}
    for nurse, day, shift in _cell_rows(doc.get("past_assignments", []), "$.past_assignments"):
        past_assignments[(nurse, day)] = shift  # type: ignore[assignment]

    def request_map(key: str) -> dict[tuple[str, int], frozenset[str]]:
        out: dict[tuple[str, int], set[str]] = {}
        for nurse, day, shift in _cell_rows(doc.get(key, []), f"$.{key}"):
            out.setdefault((nurse, day), set()).add(shift)  # type: ignore[arg-type]
        return {cell: frozenset(codes) for cell, codes in out.items()}

    pos_requests = request_map("pos_requests")
    neg_requests = request_map("neg_requests")
    manual_raw = request_map("manual_requests")
    manual_requests = {cell: tuple(sorted(codes)) for cell, codes in manual_raw.items()}

    bounds = _expect_dict(doc.get("bounds", {}), "$.bounds")

    def nurse_bounds(key: str) -> dict[str, tuple[int, int]]:
        out = {}
        for i, raw in enumerate(_expect_list(bounds.get(key, []), f"$.bounds.{key}")):
            row = _expect_dict(raw, f"$.bounds.{key}[{i}]")
            path = f"$.bounds.{key}[{i}]"
            out[_expect_str(_get(row, "nurse", path), f"{path}.nurse")] = (
                _expect_int(_get(row, "lb", path), f"{path}.lb"),
                _expect_int(_get(row, "ub", path), f"{path}.ub"),
            )
        return out

    work_days_bounds = nurse_bounds("work_days")
    weekly_rest_bounds = nurse_bounds("weekly_rest")

    consecutive_rules = []
    for i, raw in enumerate(
        _expect_list(bounds.get("consecutive_work", []), "$.bounds.consecutive_work")
    ):
        row = _expect_dict(raw, f"$.bounds.consecutive_work[{i}]")
        path = f"$.bounds.consecutive_work[{i}]"
        consecutive_rules.append(
            ConsecutiveRule(
                kind=_expect_kind(_get(row, "kind", path), f"{path}.kind"),
                nurse_group=_expect_str(_get(row, "nurse_group", path), f"{path}.nurse_group"),
                ub=_expect_int(_get(row, "ub", path), f"{path}.ub"),
            )
        )
    consecutive_rules.sort(key=lambda r: (r.kind, r.nurse_group, r.ub))

    def staff_like(key: str) -> list[StaffRule]:
        out = []
        for i, raw in enumerate(_expect_list(bounds.get(key, []), f"$.bounds.{key}")):
            row = _expect_dict(raw, f"$.bounds.{key}[{i}]")
            path = f"$.bounds.{key}[{i}]"
            out.append(
                StaffRule(
                    kind=_expect_kind(_get(row, "kind", path), f"{path}.kind"),
                    nurse_group=_expect_str(_get(row, "nurse_group", path), f"{path}.nurse_group"),
                    shift_group=_expect_str(_get(row, "shift_group", path), f"{path}.shift_group"),
                    day=_expect_int(_get(row, "day", path), f"{path}.day"),
                    which=_expect_which(_get(row, "which", path), f"{path}.which"),
                    bound=_expect_int(_get(row, "bound", path), f"{path}.bound"),
                )
            )
        out.sort(key=lambda r: (r.kind, r.nurse_group, r.shift_group, r.day, r.which, r.bound))
        return out

    staff_rules = staff_like("staff")
    point_rules = staff_like("point")

    shift_freq_rules = []
    for i, raw in enumerate(_expect_list(bounds.get("shift_freq", []), "$.bounds.shift_freq")):
        row = _expect_dict(raw, f"$.bounds.shift_freq[{i}]")
        path = f"$.bounds.shift_freq[{i}]"
        shift_freq_rules.append(
            ShiftFreqRule(
                kind=_expect_kind(_get(row, "kind", path), f"{path}.kind"),
                nurse=_expect_str(_get(row, "nurse", path), f"{path}.nurse"),
                shift_group=_expect_str(_get(row, "shift_group", path), f"{path}.shift_group"),
                which=_expect_which(_get(row, "which", path), f"{path}.which"),
                bound=_expect_int(_get(row, "bound", path), f"{path}.bound"),
            )
        )
    shift_freq_rules.sort(key=lambda r: (r.kind, r.nurse, r.shift_group, r.which, r.bound))

    pattern_rules = []
    for i, raw in enumerate(_expect_list(doc.get("pattern_rules", []), "$.pattern_rules")):
        row = _expect_dict(raw, f"$.pattern_rules[{i}]")
        path = f"$.pattern_rules[{i}]"
        sequence = tuple(
            _expect_str(s, f"{path}.sequence[{j}]")
            for j, s in enumerate(_expect_list(_get(row, "sequence", path), f"{path}.sequence"))
        )
        if not sequence:
            _fail(f"{path}.sequence", "pattern sequence must be non-empty")
        pattern_rules.append(
            PatternRule(
                kind=_expect_kind(_get(row, "kind", path), f"{path}.kind"),
                nurse_group=_expect_str(_get(row, "nurse_group", path), f"{path}.nurse_group"),
                sequence=sequence,
                min_count=_expect_int(row.get("min", 0), f"{path}.min"),
                max_count=_expect_int(_get(row, "max", path), f"{path}.max"),
            )
        )
    pattern_rules.sort(
        key=lambda r: (r.kind, r.nurse_group, r.sequence, r.min_count, r.max_count)
    )

    succession_rules = []
    rest_gap_rules = []
    for i, raw in enumerate(_expect_list(doc.get("inter_shift_rules", []), "$.inter_shift_rules")):
        row = _expect_dict(raw, f"$.inter_shift_rules[{i}]")
        path = f"$.inter_shift_rules[{i}]"
        form = _expect_str(_get(row, "form", path), f"{path}.form")
        kind = _expect_kind(_get(row, "kind", path), f"{path}.kind")
        if form == "succession":
            mode = _expect_str(_get(row, "mode", path), f"{path}.mode")
            if mode not in ("required", "forbidden"):
                _fail(f"{path}.mode", "must be 'required' or 'forbidden'")
            succession_rules.append(
                SuccessionRule(
                    kind=kind,
                    prev_group=_expect_str(_get(row, "prev_group", path), f"{path}.prev_group"),
                    mode=mode,
                    next_group=_expect_str(_get(row, "next_group", path), f"{path}.next_group"),
                )
            )
        elif form == "rest_gap":
            gap = _expect_int(_get(row, "min_gap_minutes", path), f"{path}.min_gap_minutes")
            if gap <= 0:
                _fail(f"{path}.min_gap_minutes", "gap must be positive")
            rest_gap_rules.append(RestGapRule(kind=kind, min_gap_minutes=gap))
        else:
            _fail(f"{path}.form", f"unknown form {form!r}")
    succession_rules.sort(key=lambda r: (r.kind, r.prev_group, r.mode, r.next_group))
    rest_gap_rules.sort(key=lambda r: (r.kind, r.min_gap_minutes))

    pair_rules = []
    for i, raw in enumerate(_expect_list(doc.get("pair_rules", []), "$.pair_rules")):
        row = _expect_dict(raw, f"$.pair_rules[{i}]")
        path = f"$.pair_rules[{i}]"
        mode = _expect_str(_get(row, "mode", path), f"{path}.mode")
        if mode not in ("recommended", "prohibited"):
            _fail(f"{path}.mode", "must be 'recommended' or 'prohibited'")
        a = _expect_str(_get(row, "nurse_a", path), f"{path}.nurse_a")
        b = _expect_str(_get(row, "nurse_b", path), f"{path}.nurse_b")
        if a == b:
            raise ValidationError(f"{path}: pair rule names the same nurse twice ({a})")
        if b < a:
            a, b = b, a
        pair_rules.append(
            PairRule(
                kind=_expect_kind(_get(row, "kind", path), f"{path}.kind"),
                nurse_a=a,
                nurse_b=b,
                mode=mode,
            )
        )
    pair_rules.sort(key=lambda r: (r.kind, r.nurse_a, r.nurse_b, r.mode))

    balance_rules = []
    for i, raw in enumerate(_expect_list(doc.get("balance_rules", []), "$.balance_rules")):
        row = _expect_dict(raw, f"$.balance_rules[{i}]")
        path = f"$.balance_rules[{i}]"
        metric = _expect_str(_get(row, "metric", path), f"{path}.metric")
        if metric not in BALANCE_METRICS:
            _fail(f"{path}.metric", f"must be one of {BALANCE_METRICS}")
        shift_group = None
        if metric == "shift_group":
            shift_group = _expect_str(_get(row, "shift_group", path), f"{path}.shift_group")
        balance_rules.append(
            BalanceRule(
                nurse_group=_expect_str(_get(row, "nurse_group", path), f"{path}.nurse_group"),
                metric=metric,
                shift_group=shift_group,
                allowed_spread=_expect_int(
                    _get(row, "allowed_spread", path), f"{path}.allowed_spread"
                ),
            )
        )
    balance_rules.sort(
        key=lambda r: (r.nurse_group, r.metric, r.shift_group or "", r.allowed_spread)
    )

    priorities: dict[tuple[str, str], int] = {}
    for i, raw in enumerate(_expect_list(_get(doc, "priorities", "$"), "$.priorities")):
        row = _expect_dict(raw, f"$.priorities[{i}]")
        path = f"$.priorities[{i}]"
        kind = _expect_kind(_get(row, "kind", path), f"{path}.kind")
        family = _expect_str(_get(row, "family", path), f"{path}.family")
        level = _expect_int(_get(row, "priority", path), f"{path}.priority")
        if level < 1:
            _fail(f"{path}.priority", "priority must be a positive integer")
        priorities[(kind, family)] = level

    instance = Instance(
        nurses=tuple(nurses),
        nurse_groups=nurse_groups,
        shifts=tuple(shifts),
        shift_groups=shift_groups,
        calendar=calendar,
        past_assignments=past_assignments,
        pos_requests=pos_requests,
        neg_requests=neg_requests,
        manual_requests=manual_requests,
        work_days_bounds=work_days_bounds,
        weekly_rest_bounds=weekly_rest_bounds,
        consecutive_rules=tuple(consecutive_rules),
        staff_rules=tuple(staff_rules),
        point_rules=tuple(point_rules),
        shift_freq_rules=tuple(shift_freq_rules),
        pattern_rules=tuple(pattern_rules),
        succession_rules=tuple(succession_rules),
        rest_gap_rules=tuple(rest_gap_rules),
        pair_rules=tuple(pair_rules),
        balance_rules=tuple(balance_rules),
        priorities=priorities,
    )
    _validate(instance)
    return instance


def _validate(inst: Instance) -> None:
    cal = inst.calendar
    if cal.past_days < 0 or cal.horizon_days < 0 or cal.lookahead_days < 0:
        raise ValidationError("calendar spans must be non-negative")

    nurse_ids = set()
    for n in inst.nurses:
        if n.id in nurse_ids:
            raise ValidationError(f"duplicate nurse id {n.id!r}")
        nurse_ids.add(n.id)
        if n.point < 0:
            raise ValidationError(f"nurse {n.id!r} has negative skill point")

    codes = set()
    for s in inst.shifts:
        if s.code in codes:
            raise ValidationError(f"duplicate shift code {s.code!r}")
        codes.add(s.code)
        if s.klass == KLASS_WORK and (s.start_minute is None or s.end_minute is None):
            raise ValidationError(f"work shift {s.code!r} needs start and end minutes")
        if s.klass == KLASS_REST and (s.start_minute is not None or s.end_minute is not None):
            raise ValidationError(f"rest shift {s.code!r} must not carry clock times")

    dangling: list[str] = []

    def need_nurse(nid: str, where: str) -> None:
        if nid not in nurse_ids:
            dangling.append(f"{where}: unknown nurse {nid!r}")

    def need_code(code: str, where: str) -> None:
        if code not in codes:
            dangling.append(f"{where}: unknown shift {code!r}")

    def need_ngroup(gid: str, where: str) -> None:
        if gid not in inst.nurse_groups:
            dangling.append(f"{where}: unknown nurse group {gid!r}")

    def need_sgroup(gid: str, where: str) -> None:
        if gid not in inst.shift_groups:
            dangling.append(f"{where}: unknown shift group {gid!r}")

    for gid, members in inst.nurse_groups.items():
        for m in members:
            need_nurse(m, f"nurse_groups.{gid}")
    for gid, members in inst.shift_groups.items():
        for m in members:
            need_code(m, f"shift_groups.{gid}")

    for day in list(cal.holidays) + list(cal.weekends):
        if not cal.contains(day):
            raise ValidationError(f"calendar marks day {day} outside the window")

    for (nid, day), code in inst.past_assignments.items():
        need_nurse(nid, "past_assignments")
        need_code(code, "past_assignments")
        if not (cal.first_day <= day <= -1):
            raise ValidationError(f"past assignment for {nid!r} on non-history day {day}")

    for label, table in (("pos_requests", inst.pos_requests), ("neg_requests", inst.neg_requests)):
        for (nid, day), shift_set in table.items():
            need_nurse(nid, label)
            for code in shift_set:
                need_code(code, label)
            if not cal.contains(day):
                raise ValidationError(f"{label}: day {day} outside the window")

    for (nid, day), requested in inst.manual_requests.items():
        need_nurse(nid, "manual_requests")
        if not cal.contains(day):
            raise ValidationError(f"manual_requests: day {day} outside the window")
        for code in requested:
            need_code(code, "manual_requests")
            if code in codes and inst.klass(code) not in (KLASS_DUTY, KLASS_LEAVE):
                raise ValidationError(
                    f"manual request for {nid!r} day {day} names non-duty/leave shift {code!r}"
                )

    for label, table in (
        ("work_days", inst.work_days_bounds),
        ("weekly_rest", inst.weekly_rest_bounds),
    ):
        for nid, (lb, ub) in table.items():
            need_nurse(nid, f"bounds.{label}")
            if lb > ub:
                raise ValidationError(f"bounds.{label}: nurse {nid!r} has LB {lb} > UB {ub}")
            if lb < 0:
                raise ValidationError(f"bounds.{label}: nurse {nid!r} has negative LB")

    for rule in inst.consecutive_rules:
        need_ngroup(rule.nurse_group, "bounds.consecutive_work")
        if rule.ub < 1:
            raise ValidationError("bounds.consecutive_work: UB must be at least 1")

    for label, rules in (("staff", inst.staff_rules), ("point", inst.point_rules)):
        sided: dict[tuple, int] = {}
        for rule in rules:
            need_ngroup(rule.nurse_group, f"bounds.{label}")
            need_sgroup(rule.shift_group, f"bounds.{label}")
            if not cal.contains(rule.day):
                raise ValidationError(f"bounds.{label}: day {rule.day} outside the window")
            if rule.bound < 0:
                raise ValidationError(f"bounds.{label}: negative bound")
            key = (rule.kind, rule.nurse_group, rule.shift_group, rule.day, rule.which)
            if key in sided:
                raise ValidationError(
                    f"bounds.{label}: duplicate rule for ({rule.nurse_group},"
                    f"{rule.shift_group},day {rule.day},{rule.which})"
                )
            sided[key] = rule.bound
        for (kind, ng, sg, day, which), bound in sided.items():
            if which == "lb":
                ub = sided.get((kind, ng, sg, day, "ub"))
                if ub is not None and bound > ub:
                    raise ValidationError(
                        f"bounds.{label}: LB {bound} > UB {ub} for ({ng},{sg},day {day})"
                    )

    for rule in inst.shift_freq_rules:
        need_nurse(rule.nurse, "bounds.shift_freq")
        need_sgroup(rule.shift_group, "bounds.shift_freq")
        if rule.bound < 0:
            raise ValidationError("bounds.shift_freq: negative bound")

    for rule in inst.pattern_rules:
        need_ngroup(rule.nurse_group, "pattern_rules")
        for slot in rule.sequence:
            need_sgroup(slot, "pattern_rules")
        if not 0 <= rule.min_count <= rule.max_count:
            raise ValidationError(
                f"pattern_rules: need 0 <= min <= max, got ({rule.min_count}, {rule.max_count})"
            )

    for rule in inst.succession_rules:
        need_sgroup(rule.prev_group, "inter_shift_rules")
        need_sgroup(rule.next_group, "inter_shift_rules")

    for rule in inst.pair_rules:
        need_nurse(rule.nurse_a, "pair_rules")
        need_nurse(rule.nurse_b, "pair_rules")

    for rule in inst.balance_rules:
        need_ngroup(rule.nurse_group, "balance_rules")
        if rule.shift_group is not None:
            need_sgroup(rule.shift_group, "balance_rules")
        if rule.allowed_spread < 0:
            raise ValidationError("balance_rules: negative allowed_spread")

    if dangling:
        raise ValidationError("dangling references: " + "; ".join(sorted(dangling)))

    if WEEKLY_REST_CODE not in codes and (cal.horizon_days + cal.lookahead_days + cal.past_days):
        non_holiday = any(d not in cal.holidays for d in cal.days())
        if non_holiday:
            raise ValidationError(f"shift catalogue must declare rest shift {WEEKLY_REST_CODE!r}")
    if cal.holidays and HOLIDAY_CODE not in codes:
        raise ValidationError(
            f"calendar declares holidays but shift catalogue lacks {HOLIDAY_CODE!r}"
        )

    missing = [
        f"({kind},{family})"
        for kind, family in sorted(required_priority_families(inst))
        if (kind, family) not in inst.priorities
    ]
    if missing:
        raise ValidationError("priorities table missing entries for: " + ", ".join(missing))


def required_priority_families(inst: Instance) -> set[tuple[str, str]]:
    """(kind, family) pairs the evaluators could emit for this instance."""
    required: set[tuple[str, str]] = set()
    if inst.work_days_bounds:
        required.update({(HARD, "work_days_lb"), (HARD, "work_days_ub")})
    if inst.weekly_rest_bounds:
        required.update({(HARD, "weekly_rest_lb"), (HARD, "weekly_rest_ub")})
    if inst.pos_requests:
        required.add((HARD, "pos_request"))
    if inst.neg_requests:
        required.add((HARD, "neg_request"))
    shift_codes = {s.code for s in inst.shifts}
    if LONG_DAY_CODE in shift_codes or SHORT_EVENING_CODE in shift_codes:
        required.add((HARD, "eq_shifts"))
    for rule in inst.consecutive_rules:
        required.add((rule.kind, "consecutive_work_days"))
    for rule in inst.staff_rules:
        required.add((rule.kind, f"staff_{rule.which}"))
    for rule in inst.point_rules:
        required.add((rule.kind, f"point_{rule.which}"))
    for rule in inst.shift_freq_rules:
        required.add((rule.kind, f"shift_{rule.which}"))
    for rule in inst.pattern_rules:
        required.add((rule.kind, "pattern"))
    for rule in inst.succession_rules:
        required.add((rule.kind, "succession"))
    for rule in inst.rest_gap_rules:
        required.add((rule.kind, "rest_gap"))
    for rule in inst.pair_rules:
        required.add((rule.kind, "pair"))
    if inst.balance_rules:
        required.add((SOFT, "balance"))
    if inst.nurses and inst.calendar.horizon_days + inst.calendar.lookahead_days:
        required.add((SOFT, "isolated_work_day"))
    if any(s.klass == KLASS_LEAVE for s in inst.shifts):
        required.add((SOFT, "leave_adjacent_rest"))
    return required


# ---------------------------------------------------------------------------
# Canonical serialization


def _request_rows(table: Mapping[tuple[str, int], Iterable[str]]) -> list[dict]:
    rows = []
    for (nurse, day), shift_set in table.items():
        for code in shift_set:
            rows.append({"nurse": nurse, "day": day, "shift": code})
    rows.sort(key=lambda r: (r["nurse"], r["day"], r["shift"]))
    return rows


def instance_to_document(inst: Instance) -> dict[str, Any]:
    """Canonical document: equal instances produce identical dicts."""
    shifts = []
    for s in sorted(inst.shifts, key=lambda s: s.code):
        row: dict[str, Any] = {"code": s.code, "klass": s.klass}
        if s.start_minute is not None:
            row["start"] = s.start_minute
        if s.end_minute is not None:
            row["end"] = s.end_minute
        shifts.append(row)

    doc: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "nurses": [
            {"id": n.id, "point": n.point} for n in sorted(inst.nurses, key=lambda n: n.id)
        ],
        "nurse_groups": {g: sorted(m) for g, m in sorted(inst.nurse_groups.items())},
        "shifts": shifts,
        "shift_groups": {g: sorted(m) for g, m in sorted(inst.shift_groups.items())},
        "calendar": {
            "past_days": inst.calendar.past_days,
            "horizon_days": inst.calendar.horizon_days,
            "lookahead_days": inst.calendar.lookahead_days,
            "holidays": sorted(inst.calendar.holidays),
            "weekends": sorted(inst.calendar.weekends),
        },
        "past_assignments": [
            {"nurse": n, "day": d, "shift": s}
            for (n, d), s in sorted(inst.past_assignments.items())
        ],
        "pos_requests": _request_rows(inst.pos_requests),
        "neg_requests": _request_rows(inst.neg_requests),
        "manual_requests": _request_rows(inst.manual_requests),
        "bounds": {
            "work_days": [
                {"nurse": n, "lb": lb, "ub": ub}
                for n, (lb, ub) in sorted(inst.work_days_bounds.items())
            ],
            "weekly_rest": [
                {"nurse": n, "lb": lb, "ub": ub}
                for n, (lb, ub) in sorted(inst.weekly_rest_bounds.items())
            ],
            "consecutive_work": [
                {"kind": r.kind, "nurse_group": r.nurse_group, "ub": r.ub}
                for r in inst.consecutive_rules
            ],
            "staff": [
                {
                    "kind": r.kind,
                    "nurse_group": r.nurse_group,
                    "shift_group": r.shift_group,
                    "day": r.day,
                    "which": r.which,
                    "bound": r.bound,
                }
                for r in inst.staff_rules
            ],
            "point": [
                {
                    "kind": r.kind,
                    "nurse_group": r.nurse_group,
                    "shift_group": r.shift_group,
                    "day": r.day,
                    "which": r.which,
                    "bound": r.bound,
                }
                for r in inst.point_rules
            ],
            "shift_freq": [
                {
                    "kind": r.kind,
                    "nurse": r.nurse,
                    "shift_group": r.shift_group,
                    "which": r.which,
                    "bound": r.bound,
                }
                for r in inst.shift_freq_rules
            ],
        },
        "pattern_rules": [
            {
                "kind": r.kind,
                "nurse_group": r.nurse_group,
                "sequence": list(r.sequence),
                "min": r.min_count,
                "max": r.max_count,
            }
            for r in inst.pattern_rules
        ],
        "inter_shift_rules": [
            {
                "form": "rest_gap",
                "kind": r.kind,
                "min_gap_minutes": r.min_gap_minutes,
            }
            for r in inst.rest_gap_rules
        ]
        + [
            {
                "form": "succession",
                "kind": r.kind,
                "prev_group": r.prev_group,
                "mode": r.mode,
                "next_group": r.next_group,
            }
            for r in inst.succession_rules
        ],
        "pair_rules": [
            {"kind": r.kind, "nurse_a": r.nurse_a, "nurse_b": r.nurse_b, "mode": r.mode}
            for r in inst.pair_rules
        ],
        "balance_rules": [
            {
                "nurse_group": r.nurse_group,
                "metric": r.metric,
                **({"shift_group": r.shift_group} if r.shift_group is not None else {}),
                "allowed_spread": r.allowed_spread,
            }
            for r in inst.balance_rules
        ],
        "priorities": [
            {"kind": kind, "family": family, "priority": level}
            for (kind, family), level in sorted(inst.priorities.items())
        ],
    }
    return doc


def serialize_instance(inst: Instance) -> str:
    """Canonical JSON text; equal instances serialize byte-identically."""
    return json.dumps(instance_to_document(inst), sort_keys=True, indent=2) + "\n"


def instance_digest(inst: Instance) -> str:
    return hashlib.sha256(serialize_instance(inst).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Cell domains and completion


def cell_domain(inst: Instance, nurse: str, day: int) -> tuple[str, ...]:
    """Admissible codes for a cell, in canonical order.

    History cells are pinned to their recorded value.  A cell with manual
    duty/leave requests admits exactly those codes.  Any other cell admits
    every work shift plus the one rest code the day completes to.
    """
    if not inst.calendar.contains(day):
        raise ValidationError(f"day {day} outside the calendar window")
    if nurse not in inst._nurse_ids_set():
        raise ValidationError(f"unknown nurse {nurse!r}")
    if day < 0:
        past = inst.past_assignments.get((nurse, day))
        if past is not None:
            return (past,)
    manual = inst.manual_requests.get((nurse, day))
    if manual:
        return manual
    rest = HOLIDAY_CODE if day in inst.calendar.holidays else WEEKLY_REST_CODE
    if day < 0:
        return (rest,)
    return inst.work_codes() + (rest,)


def complete_roster(
    core: "Roster | Mapping[tuple[str, int], str]", inst: Instance
) -> Roster:
    """Extend a core work-shift assignment to a total roster.

    Non-core cells complete to the recorded history value, the unique manual
    duty/leave request, or the day's rest code.  Raises CompletionError naming
    the cell when a core value is inadmissible or a cell has no single
    completion (for example two conflicting manual requests).
    """
    core_cells = core.cells if isinstance(core, Roster) else core
    cells: dict[tuple[str, int], str] = {}
    known = {n.id for n in inst.nurses}
    for (nurse, day), code in core_cells.items():
        if nurse not in known or not inst.calendar.contains(day):
            raise CompletionError(f"core cell ({nurse}, {day}) outside the instance")
        if day < 0:
            raise CompletionError(f"core cell ({nurse}, {day}) lies in history")
        if code not in inst._shift_index or inst.klass(code) != KLASS_WORK:
            raise CompletionError(f"core cell ({nurse}, {day}) carries non-work code {code!r}")
        if code not in cell_domain(inst, nurse, day):
            raise CompletionError(f"core cell ({nurse}, {day}) value {code!r} not in domain")
        cells[(nurse, day)] = code

    for nurse in known:
        for day in inst.calendar.days():
            cell = (nurse, day)
            if cell in cells:
                continue
            if day < 0 and cell in inst.past_assignments:
                cells[cell] = inst.past_assignments[cell]
                continue
            requested = inst.manual_requests.get(cell, ())
            if len(requested) == 1:
                cells[cell] = requested[0]
            elif len(requested) > 1:
                raise CompletionError(
                    f"cell ({nurse}, {day}) has {len(requested)} manual requests; completion "
                    "needs exactly one"
                )
            else:
                cells[cell] = (
                    HOLIDAY_CODE if day in inst.calendar.holidays else WEEKLY_REST_CODE
                )
    return Roster(cells)


# ---------------------------------------------------------------------------
# Roster documents


def roster_to_document(roster: Roster) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "cells": [
            {"nurse": n, "day": d, "shift": s} for (n, d), s in sorted(roster.cells.items())
        ],
    }


def serialize_roster(roster: Roster) -> str:
    return json.dumps(roster_to_document(roster), sort_keys=True, indent=2) + "\n"


def parse_roster(document: str | Mapping[str, Any], inst: Instance) -> Roster:
    """Parse a roster document and check it is a total, in-catalogue map."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"$: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    doc = _expect_dict(document, "$")
    version = _expect_int(_get(doc, "format_version", "$"), "$.format_version")
    if version != FORMAT_VERSION:
        _fail("$.format_version", f"unsupported version {version}")
    cells: dict[tuple[str, int], str] = {}
    for nurse, day, shift in _cell_rows(_get(doc, "cells", "$"), "$.cells"):
        cells[(nurse, day)] = shift  # type: ignore[assignment]
    expected = {(n.id, d) for n in inst.nurses for d in inst.calendar.days()}
    got = set(cells)
    if got != expected:
        missing = sorted(expected - got)[:3]
        extra = sorted(got - expected)[:3]
        raise ValidationError(f"roster cells mismatch (missing {missing}, extra {extra})")
    catalogue = {s.code for s in inst.shifts}
    for cell, code in cells.items():
        if code not in catalogue:
            raise ValidationError(f"roster cell {cell} carries unknown shift {code!r}")
    return Roster(cells)

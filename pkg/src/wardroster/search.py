"""Anytime roster search with live control.

Greedy feasibility-directed construction followed by neighborhood local
search (single-cell reassignment, two-nurse same-day swaps, horizontal block
rotations) under simulated-annealing acceptance.  The published incumbent
only ever improves: a candidate replaces it when its composite ordering key
is strictly smaller.  Three interaction strategies share the machinery:

* LNPS: prioritized values seed construction and bias tie-breaks; they add
  no penalty terms.  Stagnation triggers an automatic restart that
  re-centers the internal prioritization on the incumbent.
* MP: the count of prioritized cells whose value changed joins the penalty
  vector at a configured slot (highest, middle, or lowest).
* MP_IS: MP plus initial-value guidance; construction starts from the
  prioritized values, after which the guidance decays.

Control messages (pause, resume, stop, soften toggle, directive updates)
arrive through a mailbox and are honored at iteration boundaries.  Directive
updates require a paused search and perform a manual restart; the soften
toggle applies live without re-ingesting the instance.  Both reset the
strict-improvement baseline to the current state; automatic restarts never
relax it.
"""

from __future__ import annotations

import json
import math
import queue
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .constraints import (
    ConfigError,
    DeltaEvaluator,
    EvalContext,
    EvalResult,
    PenaltyVector,
    context_for,
)
from .model import (
    HARD,
    HOLIDAY_CODE,
    Instance,
    KLASS_REST,
    KLASS_WORK,
    Roster,
    ValidationError,
    WEEKLY_REST_CODE,
    cell_domain,
)

Cell = tuple[str, int]

STRATEGIES = ("LNPS", "MP", "MP_IS")
MP_SLOTS = ("highest", "middle", "lowest")

# Integer scalarization: each occupied level gets a power-of-base rank, so a
# single integer ranks candidates the same way as the lexicographic key as
# long as per-level totals stay below the base.
SCORE_BASE = 10 ** 6

# Levels are doubled inside composite keys so the modification-count slot can
# sit between two declared tiers.  The middle slot is a documented constant:
# immediately above the third tier of the standard four-tier ladder, i.e.
# between declared levels 2 and 3.
MP_MID_SCALED = 5

# Soft deadline: the clock is checked at iteration boundaries only, so a run
# may overshoot its limit by at most this much.
DEADLINE_SLACK_SECONDS = 0.1

# Restart jitter shakes the bottom priority tier only.  Tiers sit a factor of
# SCORE_BASE apart, so a small constant keeps the hard part and every higher
# tier greedy while the cheap structure diversifies; anything score-scaled
# would be dominated by the hard part and turn restarts into pure noise.
RESTART_TEMPERATURE = 200.0


class DirectiveError(ValueError):
    """A cell directive cannot be honored (conflict, unknown cell, bad value)."""


class ControlError(RuntimeError):
    """A control message is not legal in the search's current state."""


# ---------------------------------------------------------------------------
# Directives and run records


@dataclass(frozen=True)
class CellDirectives:
    """Fixed, prioritized, and cleared cells steering one search run.

    fixed holds one value per cell and is honored by every emitted roster.
    prioritized values are preferred but negotiable; cleared cells carry no
    prioritization at all.  fixed and cleared must not overlap, and a cell
    carries at most one directive value: prioritized entries on fixed or
    cleared cells are dropped (the stronger directive wins).
    """

    fixed: Mapping[Cell, str] = field(default_factory=dict)
    prioritized: Mapping[Cell, str] = field(default_factory=dict)
    cleared: frozenset[Cell] = frozenset()

    def __post_init__(self) -> None:
        fixed = dict(self.fixed)
        cleared = frozenset(self.cleared)
        overlap = sorted(set(fixed) & cleared)
        if overlap:
            raise DirectiveError(f"cells both fixed and cleared: {overlap[:3]}")
        prioritized = {
            cell: code
            for cell, code in self.prioritized.items()
            if cell not in cleared and cell not in fixed
        }
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "prioritized", prioritized)
        object.__setattr__(self, "cleared", cleared)

    @staticmethod
    def empty() -> "CellDirectives":
        return CellDirectives()

    def validate(self, inst: Instance) -> None:
        """Reject directives this instance cannot honor.

        Every referenced cell must be a decision cell of a known nurse.
        Fixed values must lie in their cell's domain.  Prioritized values
        must name a declared shift; one outside its cell's domain is allowed
        and simply never wins.
        """
        known = inst._nurse_ids_set()
        window = inst.calendar.decision_days()

        def need_cell(cell: Cell, role: str) -> None:
            nurse, day = cell
            if nurse not in known:
                raise DirectiveError(f"{role} cell {cell} names unknown nurse {nurse!r}")
            if day not in window:
                raise DirectiveError(f"{role} cell {cell} lies outside the decision window")

        for cell in sorted(self.cleared):
            need_cell(cell, "cleared")
        codes = {s.code for s in inst.shifts}
        for cell, code in sorted(self.prioritized.items()):
            need_cell(cell, "prioritized")
            if code not in codes:
                raise DirectiveError(f"prioritized cell {cell} names unknown shift {code!r}")
        for cell, code in sorted(self.fixed.items()):
            need_cell(cell, "fixed")
            try:
                domain = cell_domain(inst, cell[0], cell[1])
            except ValidationError as exc:
                raise DirectiveError(str(exc)) from exc
            if code not in domain:
                raise DirectiveError(f"fixed cell {cell} value {code!r} is not in its domain")


def directives_to_document(directives: CellDirectives) -> dict[str, list[dict]]:
    """Canonical wire form shared by the command line and the service."""
    return {
        "fixed": [
            {"nurse": nurse, "day": day, "shift": code}
            for (nurse, day), code in sorted(directives.fixed.items())
        ],
        "prioritized": [
            {"nurse": nurse, "day": day, "shift": code}
            for (nurse, day), code in sorted(directives.prioritized.items())
        ],
        "cleared": [
            {"nurse": nurse, "day": day} for nurse, day in sorted(directives.cleared)
        ],
    }


def parse_directives(doc: Any) -> CellDirectives:
    """Read the wire form back; accepts a JSON string or a mapping."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, dict):
        raise DirectiveError("directives document must be a JSON object")

    def read_cell(row: Any, section: str, want_shift: bool) -> tuple[Cell, str | None]:
        if not isinstance(row, dict):
            raise DirectiveError(f"{section} rows must be objects")
        try:
            nurse, day = row["nurse"], row["day"]
        except KeyError as exc:
            raise DirectiveError(f"{section} row is missing {exc.args[0]!r}") from exc
        if not isinstance(nurse, str) or not isinstance(day, int) or isinstance(day, bool):
            raise DirectiveError(f"{section} rows need a nurse string and an integer day")
        code = None
        if want_shift:
            code = row.get("shift")
            if not isinstance(code, str):
                raise DirectiveError(f"{section} rows need a shift code")
        return (nurse, day), code

    unknown = set(doc) - {"fixed", "prioritized", "cleared"}
    if unknown:
        raise DirectiveError(f"unknown directives sections: {sorted(unknown)}")
    fixed: dict[Cell, str] = {}
    prioritized: dict[Cell, str] = {}
    for section, table in (("fixed", fixed), ("prioritized", prioritized)):
        for row in doc.get(section, ()):
            cell, code = read_cell(row, section, want_shift=True)
            if cell in table:
                raise DirectiveError(f"{section} lists cell {cell} twice")
            table[cell] = code
    cleared = set()
    for row in doc.get("cleared", ()):
        cell, _ = read_cell(row, "cleared", want_shift=False)
        cleared.add(cell)
    return CellDirectives(fixed=fixed, prioritized=prioritized, cleared=frozenset(cleared))


@dataclass(frozen=True)
class Incumbent:
    """One published roster: the best found at its discovery time."""

    roster: Roster
    penalties: PenaltyVector
    modification_count: int
    wall_time_seconds: float
    sequence: int


@dataclass(frozen=True)
class SolveOutcome:
    """How a run ended and everything it published on the way.

    status is "completed" when at least one incumbent was emitted and
    "unsat_or_timeout" when a strict run found no hard-consistent completion;
    best_hard_violations then reports the closest the run came.
    """

    status: str
    reason: str
    incumbents: tuple[Incumbent, ...]
    best_hard_violations: int
    restarts: int
    steps: int
    elapsed_seconds: float

    @property
    def final(self) -> Incumbent | None:
        return self.incumbents[-1] if self.incumbents else None


@dataclass
class Control:
    """One mailbox message; processed at an iteration boundary.

    command is one of pause/resume/stop/soften/directives.  reply, when set,
    is a queue-like object receiving ("ok", state) or ("error", exception).
    """

    command: str
    flag: bool | None = None
    directives: CellDirectives | None = None
    reply: Any = None


# ---------------------------------------------------------------------------
# Strategy helpers


def mp_objective(roster: Roster | Mapping[Cell, str], prioritized: Mapping[Cell, str]) -> int:
    """Count prioritized cells whose roster value differs from the directive."""
    cells = roster.cells if isinstance(roster, Roster) else roster
    return sum(1 for cell, code in prioritized.items() if cells.get(cell) != code)


def modification_rate(
    incumbent: "Incumbent | Roster | Mapping[Cell, str]",
    prioritized: Mapping[Cell, str],
) -> float | None:
    """Changed fraction of the prioritized set; None (absent) when it is empty."""
    if not prioritized:
        return None
    roster = incumbent.roster if isinstance(incumbent, Incumbent) else incumbent
    return mp_objective(roster, prioritized) / len(prioritized)


def initial_value_guidance(prioritized: Mapping[Cell, str]) -> dict[Cell, str]:
    """Construction seeds: each prioritized cell starts at its directive value.

    The guidance decays by design: it biases the constructive phase only and
    places no constraint on later moves.
    """
    return dict(prioritized)


def incumbent_record(inc: Incumbent, roster_ref: str) -> dict[str, Any]:
    """The incumbent event record shared by the command line and the service."""
    return {
        "sequence": inc.sequence,
        "wall_time_seconds": inc.wall_time_seconds,
        "penalty_vector": inc.penalties.as_rows(),
        "modification_count": inc.modification_count,
        "roster_ref": roster_ref,
    }


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SearchConfig:
    """Strategy, limits, and seed for one search run.

    Strategy-specific knobs must be present exactly when relevant:
    restart_interval_seconds only under LNPS, mp_priority only under the MP
    variants.  max_steps and stall_stop_seconds are optional extra stopping
    rules on top of the wall-clock limit.
    """

    strategy: str
    time_limit_seconds: float
    random_seed: int = 0
    soften_hard: bool = False
    restart_interval_seconds: float | None = None
    mp_priority: str | None = None
    max_steps: int | None = None
    stall_stop_seconds: float | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not isinstance(self.random_seed, int):
            raise ConfigError("random_seed must be an integer")
        if not self.time_limit_seconds > 0:
            raise ConfigError("time_limit_seconds must be positive")
        if self.strategy == "LNPS":
            if self.restart_interval_seconds is None:
                raise ConfigError("LNPS requires restart_interval_seconds")
            if self.mp_priority is not None:
                raise ConfigError("mp_priority applies to the MP strategies only")
        else:
            if self.mp_priority not in MP_SLOTS:
                raise ConfigError(f"{self.strategy} requires mp_priority from {MP_SLOTS}")
            if self.restart_interval_seconds is not None:
                raise ConfigError("restart_interval_seconds applies to LNPS only")
        if self.restart_interval_seconds is not None and not self.restart_interval_seconds > 0:
            raise ConfigError("restart_interval_seconds must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if self.stall_stop_seconds is not None and not self.stall_stop_seconds > 0:
            raise ConfigError("stall_stop_seconds must be positive")


class _Scorer:
    """Maps evaluation results to composite keys and integer scores.

    A key is (hard part, merged rows): the hard part is the hard-violation
    weight under a strict run and constant 0 under a softened one, so
    feasibility improvements always dominate.  Merged rows are the penalty
    vector's (level, total) pairs on doubled levels, with the modification
    count spliced in at the configured slot under the MP strategies.
    """

    def __init__(self, inst: Instance, ctx: EvalContext, strategy: str, mp_priority: str | None):
        effective = sorted(
            {2 * ctx.effective_priority(kind, family) for (kind, family) in inst.priorities}
        )
        self.mp_scaled: int | None = None
        if strategy in ("MP", "MP_IS"):
            if mp_priority == "highest":
                self.mp_scaled = effective[-1] + 1 if effective else 1
            elif mp_priority == "middle":
                self.mp_scaled = MP_MID_SCALED
            else:
                self.mp_scaled = effective[0] - 1 if effective else -1
        levels = set(effective)
        if self.mp_scaled is not None:
            levels.add(self.mp_scaled)
        ordered = sorted(levels)
        self.rank_mult = {level: SCORE_BASE ** i for i, level in enumerate(ordered)}
        self.hard_mult = SCORE_BASE ** len(ordered)

    def merged_rows(self, vector: PenaltyVector, mp_count: int) -> tuple[tuple[int, int], ...]:
        rows = [(2 * level, total) for level, total in vector.levels]
        if self.mp_scaled is not None and mp_count:
            for i, (level, _) in enumerate(rows):
                if self.mp_scaled > level:
                    rows.insert(i, (self.mp_scaled, mp_count))
                    break
            else:
                rows.append((self.mp_scaled, mp_count))
        return tuple(rows)

    def key(self, result: EvalResult, mp_count: int, soften: bool) -> tuple:
        hard_part = 0 if soften else result.hard_weight
        return (hard_part, self.merged_rows(result.vector, mp_count))

    def score(self, key: tuple) -> int:
        hard_part, rows = key
        return hard_part * self.hard_mult + sum(
            total * self.rank_mult[level] for level, total in rows
        )


_FLOOR_KEY = (0, ())


# ---------------------------------------------------------------------------
# The run


class _Run:
    """All mutable state of one solve call; strictly single-threaded."""

    def __init__(
        self,
        inst: Instance,
        config: SearchConfig,
        directives: CellDirectives,
        control: Any = None,
        on_incumbent: Callable[[Incumbent], None] | None = None,
        on_event: Callable[[str, dict], None] | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        directives.validate(inst)
        self.inst = inst
        self.ctx = context_for(inst)
        self.config = config
        self.control = control
        self.on_incumbent = on_incumbent
        self.on_event = on_event
        self.clock = clock

        self.soften = config.soften_hard
        self.scorer = _Scorer(inst, self.ctx, config.strategy, config.mp_priority)
        self._seed_idx = 0
        self.rng = random.Random(f"{config.random_seed}:0")

        self.cells: dict[Cell, str] = {}
        self.de: DeltaEvaluator | None = None
        self.mismatch = 0

        self.steps = 0
        self.restarts = 0
        self.sequence = 0
        self.incumbents: list[Incumbent] = []
        self.best_key: tuple | None = None
        self.best_cells: dict[Cell, str] | None = None
        self.best_hard_count: int | None = None
        self.cur_key: tuple = _FLOOR_KEY
        self.cur_score = 0
        self.temperature = 1.0

        self.paused = False
        self.stop_requested = False
        self.paused_total = 0.0
        self.pause_started: float | None = None
        self.last_emit_active = 0.0
        self.last_restart_active = 0.0
        self._poll_index = 0
        self.t0 = 0.0

        self._adopt_directives(directives)

    # -- directive bookkeeping ------------------------------------------------

    def _adopt_directives(self, directives: CellDirectives) -> None:
        self.user = directives
        self.fixed = dict(directives.fixed)
        self.cleared = set(directives.cleared)
        self.user_prioritized = dict(directives.prioritized)
        self.search_prioritized = dict(directives.prioritized)

        variable: list[Cell] = []
        domains: dict[Cell, tuple[str, ...]] = {}
        pinned: dict[Cell, str] = {}
        for nurse in self.ctx.nurse_ids:
            for day in self.ctx.decision_days:
                cell = (nurse, day)
                if cell in self.fixed:
                    continue
                domain = cell_domain(self.inst, nurse, day)
                if len(domain) > 1:
                    variable.append(cell)
                    domains[cell] = domain
                else:
                    pinned[cell] = domain[0]
        self.variable = variable
        self.domains = domains
        self.pinned = pinned

        by_day: dict[int, list[Cell]] = {}
        by_nurse: dict[str, list[int]] = {}
        for nurse, day in variable:
            by_day.setdefault(day, []).append((nurse, day))
            by_nurse.setdefault(nurse, []).append(day)
        self.day_cells = {day: sorted(cells) for day, cells in by_day.items() if len(cells) >= 2}
        self.swap_days = sorted(self.day_cells)
        runs: list[tuple[str, list[int]]] = []
        for nurse in sorted(by_nurse):
            days = sorted(by_nurse[nurse])
            run = [days[0]]
            for day in days[1:]:
                if day == run[-1] + 1:
                    run.append(day)
                    continue
                if len(run) >= 2:
                    runs.append((nurse, run))
                run = [day]
            if len(run) >= 2:
                runs.append((nurse, run))
        self.block_runs = runs
        self._cool_every = max(16, len(variable) // 2)

    # -- clocks ----------------------------------------------------------------

    def _active(self) -> float:
        """Wall time spent searching: paused stretches do not count."""
        now = self.clock()
        paused = self.paused_total
        if self.pause_started is not None:
            paused += now - self.pause_started
        return now - self.t0 - paused

    # -- construction ------------------------------------------------------------

    def _rest_of(self, day: int) -> str:
        return HOLIDAY_CODE if day in self.ctx.holidays else WEEKLY_REST_CODE

    def _construct(self) -> None:
        """Greedy feasibility-directed start: seeds, then hard-bound repair."""
        inst = self.inst
        ctx = self.ctx
        cells = self.cells
        cells.clear()
        for nurse in ctx.nurse_ids:
            for day in ctx.all_days:
                cell = (nurse, day)
                if day < 0:
                    cells[cell] = inst.past_assignments.get(cell, self._rest_of(day))
                elif cell in self.fixed:
                    cells[cell] = self.fixed[cell]
                elif cell in self.pinned:
                    cells[cell] = self.pinned[cell]
                else:
                    rest = self._rest_of(day)
                    domain = self.domains[cell]
                    cells[cell] = rest if rest in domain else domain[0]

        if self.config.strategy != "MP":
            seeds = initial_value_guidance(self.search_prioritized)
            for cell, code in sorted(seeds.items()):
                domain = self.domains.get(cell)
                if domain is not None and code in domain:
                    cells[cell] = code

        self._fill_staffing_lower_bounds()
        self._fill_work_day_bounds()
        self.de = DeltaEvaluator(inst, cells)
        self._hard_repair()

    def _fill_staffing_lower_bounds(self) -> None:
        ctx = self.ctx
        cells = self.cells
        for day in ctx.decision_days:
            for kind, _ng, members, _sg, codes, which, staff_b, point_b in ctx.staffing_by_day.get(
                day, []
            ):
                if kind != HARD or which != "lb":
                    continue
                while True:
                    count = sum(1 for n in members if cells[(n, day)] in codes)
                    points = sum(ctx.points[n] for n in members if cells[(n, day)] in codes)
                    # combined rows: meeting either bound suffices
                    if staff_b is not None and count >= staff_b:
                        break
                    if point_b is not None and points >= point_b:
                        break
                    candidates = [
                        n
                        for n in members
                        if (n, day) in self.domains
                        and cells[(n, day)] not in codes
                        and any(c in codes for c in self.domains[(n, day)])
                    ]
                    if not candidates:
                        break
                    nurse = self.rng.choice(candidates)
                    options = [c for c in self.domains[(nurse, day)] if c in codes]
                    cells[(nurse, day)] = self.rng.choice(options)

    def _fill_work_day_bounds(self) -> None:
        ctx = self.ctx
        cells = self.cells
        for nurse in ctx.nurse_ids:
            bounds = self.inst.work_days_bounds.get(nurse)
            if bounds is None:
                continue
            lb, ub = bounds
            count = sum(
                1 for day in ctx.current_days if ctx.klass[cells[(nurse, day)]] == KLASS_WORK
            )
            while count < lb:
                candidates = [
                    (nurse, day)
                    for day in ctx.current_days
                    if (nurse, day) in self.domains
                    and ctx.klass[cells[(nurse, day)]] != KLASS_WORK
                ]
                if not candidates:
                    break
                cell = self.rng.choice(candidates)
                options = [c for c in self.domains[cell] if ctx.klass[c] == KLASS_WORK]
                if not options:
                    break
                cells[cell] = self.rng.choice(options)
                count += 1
            while count > ub:
                candidates = [
                    (nurse, day)
                    for day in ctx.current_days
                    if (nurse, day) in self.domains
                    and ctx.klass[cells[(nurse, day)]] == KLASS_WORK
                    and self._rest_of(day) in self.domains[(nurse, day)]
                ]
                if not candidates:
                    break
                cell = self.rng.choice(candidates)
                cells[cell] = self._rest_of(cell[1])
                count -= 1

    def _hard_repair(self) -> None:
        """First-improvement sweeps pushing the hard-violation weight down.

        Bounded by an evaluation budget so construction stays a small slice
        of the run; whatever remains is the local search's problem.
        """
        de = self.de
        hard = de.result(self.soften).hard_weight
        budget = 6 * max(1, len(self.variable))
        sweeps = 0
        while hard > 0 and budget > 0 and sweeps < 8:
            improved = False
            order = list(self.variable)
            self.rng.shuffle(order)
            for cell in order:
                if hard == 0 or budget <= 0:
                    break
                current = self.cells[cell]
                for code in self.domains[cell]:
                    if code == current:
                        continue
                    budget -= 1
                    self.cells[cell] = code
                    de.update((cell,))
                    weight = de.result(self.soften).hard_weight
                    if weight < hard:
                        hard = weight
                        improved = True
                        break
                    self.cells[cell] = current
                    de.update((cell,))
                    if budget <= 0:
                        break
            sweeps += 1
            if not improved:
                break

    # -- scoring and emission ----------------------------------------------------

    def _mp_count(self) -> int:
        return self.mismatch if self.scorer.mp_scaled is not None else 0

    def _eligible(self, result: EvalResult) -> bool:
        return self.soften or result.hard_weight == 0

    def _note_hard(self, result: EvalResult) -> None:
        count = sum(1 for v in result.violations if v.kind == HARD)
        if self.best_hard_count is None or count < self.best_hard_count:
            self.best_hard_count = count

    def _reheat(self) -> None:
        self.temperature = RESTART_TEMPERATURE

    def _emit(self, result: EvalResult) -> None:
        self.sequence += 1
        inc = Incumbent(
            roster=Roster(dict(self.cells)),
            penalties=result.vector,
            modification_count=mp_objective(self.cells, self.user_prioritized),
            wall_time_seconds=self._active(),
            sequence=self.sequence,
        )
        self.incumbents.append(inc)
        self.last_emit_active = inc.wall_time_seconds
        if self.on_incumbent is not None:
            self.on_incumbent(inc)
        self._notify("incumbent", incumbent=inc)

    def _notify(self, kind: str, **payload: Any) -> None:
        if self.on_event is not None:
            self.on_event(kind, payload)

    # -- control -------------------------------------------------------------

    def _poll_messages(self, block: bool) -> list[Control]:
        source = self.control
        if source is None:
            if block:
                time.sleep(0.005)
            return []
        if callable(source):
            index = self._poll_index
            self._poll_index += 1
            messages = list(source(index) or ())
            if block and not messages:
                time.sleep(0.002)
            return messages
        messages = []
        try:
            if block:
                messages.append(source.get(timeout=0.05))
            while True:
                messages.append(source.get_nowait())
        except queue.Empty:
            pass
        return messages

    def _process_control(self) -> None:
        while True:
            for message in self._poll_messages(block=self.paused):
                self._handle(message)
            if not self.paused or self.stop_requested:
                return

    def _handle(self, message: Control) -> None:
        command = message.command
        try:
            if command == "pause":
                self._do_pause()
            elif command == "resume":
                self._do_resume()
            elif command == "stop":
                if self.paused:
                    self.paused_total += self.clock() - self.pause_started
                    self.pause_started = None
                    self.paused = False
                self.stop_requested = True
            elif command == "soften":
                if message.flag is None:
                    raise ControlError("soften message carries no flag")
                self._toggle_soften(bool(message.flag))
            elif command == "directives":
                if not self.paused:
                    raise ControlError("directive updates require a paused search")
                if message.directives is None:
                    raise ControlError("directives message carries no directives")
                self._manual_restart(message.directives)
            else:
                raise ControlError(f"unknown control command {command!r}")
        except (ControlError, DirectiveError) as exc:
            self._reply(message, "error", exc)
            return
        self._reply(message, "ok", "paused" if self.paused else "running")

    @staticmethod
    def _reply(message: Control, status: str, payload: Any) -> None:
        box = getattr(message, "reply", None)
        if box is not None:
            box.put((status, payload))

    def _do_pause(self) -> None:
        if self.paused:
            return
        self.paused = True
        self.pause_started = self.clock()
        self._notify("state", state="paused")

    def _do_resume(self) -> None:
        if not self.paused:
            return
        self.paused_total += self.clock() - self.pause_started
        self.pause_started = None
        self.paused = False
        self._notify("state", state="running")

    def _toggle_soften(self, flag: bool) -> None:
        if flag == self.soften:
            return
        self.soften = flag
        result = self.de.result(self.soften)
        key = self.scorer.key(result, self._mp_count(), self.soften)
        # a mode change resets the improvement baseline to the current state
        self.best_key = key
        self.best_cells = dict(self.cells)
        self.cur_key = key
        self.cur_score = self.scorer.score(key)
        self._notify("soften", value=flag)
        if self.sequence == 0 and self._eligible(result):
            self._emit(result)

    def _manual_restart(self, directives: CellDirectives) -> None:
        # validate before touching anything: a rejected update leaves the
        # search state unchanged
        directives.validate(self.inst)
        self._adopt_directives(directives)
        changes = {
            cell: code for cell, code in self.fixed.items() if self.cells.get(cell) != code
        }
        if changes:
            self.cells.update(changes)
            self.de.update(changes)
        self.mismatch = mp_objective(self.cells, self.user_prioritized)
        result = self.de.result(self.soften)
        self._note_hard(result)
        key = self.scorer.key(result, self._mp_count(), self.soften)
        self.best_key = key
        self.best_cells = dict(self.cells)
        self.cur_key = key
        self.cur_score = self.scorer.score(key)
        self._seed_idx += 1
        self.rng = random.Random(f"{self.config.random_seed}:{self._seed_idx}")
        self._reheat()
        self._notify("restart", mode="manual")
        if changes and self._eligible(result):
            self._emit(result)

    def _automatic_restart(self) -> None:
        """Re-center prioritization on the incumbent; acceptance stays strict.

        Fixed and cleared sets are untouched and no cell is destroyed: the
        walk keeps its current position, so progress along equal-key plateaus
        survives the restart.  Until a first incumbent exists there is nothing
        to re-center on, and planting guidance early would turn the tie walk
        into a pull toward an arbitrary infeasible snapshot; those restarts
        reseed and jitter only.  The user-visible prioritized set (the
        modification-count reference) keeps its original meaning throughout;
        only the internal guidance moves.
        """
        if self.sequence > 0 and self.best_cells is not None:
            base = self.best_cells
            self.search_prioritized = {
                cell: base[cell] for cell in self.variable if cell not in self.cleared
            }
        self.restarts += 1
        self._seed_idx += 1
        self.rng = random.Random(f"{self.config.random_seed}:{self._seed_idx}")
        self._reheat()
        self.last_restart_active = self._active()
        self._notify("restart", mode="automatic", restarts=self.restarts)

    # -- moves ---------------------------------------------------------------

    def _propose(self) -> tuple[dict[Cell, str], dict[Cell, str]] | None:
        if not self.variable:
            return None
        draw = self.rng.random()
        if self.config.strategy == "LNPS" and self.search_prioritized and draw < 0.15:
            move = self._guided_move()
            if move is not None:
                return move
            draw = self.rng.random()
        if draw < 0.70:
            return self._single_move()
        if draw < 0.85:
            return self._swap_move()
        return self._block_move()

    def _guided_move(self) -> tuple[dict[Cell, str], dict[Cell, str]] | None:
        mismatched = [
            cell
            for cell, code in sorted(self.search_prioritized.items())
            if cell in self.domains and self.cells[cell] != code and code in self.domains[cell]
        ]
        if not mismatched:
            return None
        cell = self.rng.choice(mismatched)
        return ({cell: self.search_prioritized[cell]}, {cell: self.cells[cell]})

    def _single_move(self) -> tuple[dict[Cell, str], dict[Cell, str]]:
        cell = self.rng.choice(self.variable)
        current = self.cells[cell]
        options = [c for c in self.domains[cell] if c != current]
        return ({cell: self.rng.choice(options)}, {cell: current})

    def _swap_move(self) -> tuple[dict[Cell, str], dict[Cell, str]] | None:
        if not self.swap_days:
            return self._single_move()
        day = self.rng.choice(self.swap_days)
        a, b = self.rng.sample(self.day_cells[day], 2)
        va, vb = self.cells[a], self.cells[b]
        if va == vb or vb not in self.domains[a] or va not in self.domains[b]:
            return None
        return ({a: vb, b: va}, {a: va, b: vb})

    def _block_move(self) -> tuple[dict[Cell, str], dict[Cell, str]] | None:
        if not self.block_runs:
            return self._single_move()
        nurse, run = self.rng.choice(self.block_runs)
        length = min(self.rng.choice((2, 3)), len(run))
        start = self.rng.randrange(0, len(run) - length + 1)
        days = run[start : start + length]
        values = [self.cells[(nurse, day)] for day in days]
        if self.rng.random() < 0.5:
            rotated = values[1:] + values[:1]
        else:
            rotated = values[-1:] + values[:-1]
        changes: dict[Cell, str] = {}
        old: dict[Cell, str] = {}
        for day, code in zip(days, rotated):
            # rest travels as the destination day's own rest code
            if self.ctx.klass[code] == KLASS_REST:
                code = self._rest_of(day)
            cell = (nurse, day)
            if code == self.cells[cell]:
                continue
            if code not in self.domains[cell]:
                return None
            changes[cell] = code
            old[cell] = self.cells[cell]
        if not changes:
            return None
        return (changes, old)

    def _mismatch_delta(
        self,
        changes: dict[Cell, str],
        old: dict[Cell, str],
        table: Mapping[Cell, str],
    ) -> int:
        delta = 0
        for cell, new in changes.items():
            want = table.get(cell)
            if want is None:
                continue
            delta += (new != want) - (old[cell] != want)
        return delta

    def _tie_break(self, changes: dict[Cell, str], old: dict[Cell, str]) -> bool:
        # LNPS prefers sideways moves that agree with the prioritized values
        if self.config.strategy == "LNPS" and self.search_prioritized:
            delta = self._mismatch_delta(changes, old, self.search_prioritized)
            if delta:
                return delta < 0
        return self.rng.random() < 0.5

    def _step(self) -> None:
        self.steps += 1
        move = self._propose()
        if move is None:
            if not self.variable:
                time.sleep(0.001)
            return
        changes, old = move
        self.cells.update(changes)
        self.de.update(changes)
        result = self.de.result(self.soften)
        mismatch = self.mismatch + self._mismatch_delta(changes, old, self.user_prioritized)
        mp_count = mismatch if self.scorer.mp_scaled is not None else 0
        key = self.scorer.key(result, mp_count, self.soften)
        score = self.scorer.score(key)

        improved = key < self.best_key
        if improved:
            accept = True
        else:
            delta = score - self.cur_score
            if delta < 0:
                accept = True
            elif delta == 0:
                accept = self._tie_break(changes, old)
            else:
                try:
                    threshold = math.exp(-delta / self.temperature)
                except OverflowError:
                    threshold = 0.0
                accept = self.rng.random() < threshold
        if accept:
            self.cur_key = key
            self.cur_score = score
            self.mismatch = mismatch
            self._note_hard(result)
            if improved:
                self.best_key = key
                self.best_cells = dict(self.cells)
                if self._eligible(result):
                    self._emit(result)
        else:
            self.cells.update(old)
            self.de.update(changes)
        if self.steps % self._cool_every == 0:
            self.temperature = max(self.temperature * 0.9, 1e-9)

    # -- main loop -------------------------------------------------------------

    def execute(self) -> SolveOutcome:
        self.t0 = self.clock()
        degenerate = not self.ctx.nurse_ids or not self.ctx.decision_days
        self._construct()
        result = self.de.result(self.soften)
        self.mismatch = mp_objective(self.cells, self.user_prioritized)
        self._note_hard(result)
        self.best_key = self.scorer.key(result, self._mp_count(), self.soften)
        self.best_cells = dict(self.cells)
        self.cur_key = self.best_key
        self.cur_score = self.scorer.score(self.cur_key)
        self._reheat()
        if degenerate:
            # a shell of an instance still yields its one trivial roster
            self._emit(result)
            return self._outcome("completed", "degenerate")
        if self._eligible(result):
            self._emit(result)
        reason = self._loop()
        status = "completed" if self.incumbents else "unsat_or_timeout"
        return self._outcome(status, reason)

    def _loop(self) -> str:
        config = self.config
        while True:
            self._process_control()
            if self.stop_requested:
                return "stopped"
            if self.best_key == _FLOOR_KEY:
                return "zero_penalty"
            active = self._active()
            if active >= config.time_limit_seconds:
                return "time_limit"
            if config.max_steps is not None and self.steps >= config.max_steps:
                return "max_steps"
            if (
                config.stall_stop_seconds is not None
                and active - self.last_emit_active >= config.stall_stop_seconds
            ):
                return "stalled"
            if (
                config.strategy == "LNPS"
                and active - max(self.last_emit_active, self.last_restart_active)
                >= config.restart_interval_seconds
            ):
                self._automatic_restart()
            self._step()

    def _outcome(self, status: str, reason: str) -> SolveOutcome:
        return SolveOutcome(
            status=status,
            reason=reason,
            incumbents=tuple(self.incumbents),
            best_hard_violations=self.best_hard_count or 0,
            restarts=self.restarts,
            steps=self.steps,
            elapsed_seconds=self._active(),
        )


# ---------------------------------------------------------------------------
# Entry points


def solve(
    instance: Instance,
    config: SearchConfig,
    directives: CellDirectives | None = None,
    control: Any = None,
    on_incumbent: Callable[[Incumbent], None] | None = None,
    on_event: Callable[[str, dict], None] | None = None,
) -> SolveOutcome:
    """Run one search to completion on the calling thread.

    control is an optional message source: either queue-like (get/get_nowait
    of Control objects) or a callable polled with a monotone index returning
    an iterable of Control messages.  Inconsistent fixed directives raise
    DirectiveError before any search work happens.
    """
    run = _Run(
        instance,
        config,
        directives or CellDirectives(),
        control=control,
        on_incumbent=on_incumbent,
        on_event=on_event,
    )
    return run.execute()


class SearchWorker:
    """One search on a background thread, controlled through a mailbox.

    Control calls enqueue a message and wait for the worker to acknowledge it
    at an iteration boundary.  Incumbents publish through an atomic latest
    slot plus an append-only event list that observers may read concurrently;
    state-changing calls on a finished worker raise ControlError (stop
    degrades to a no-op).
    """

    def __init__(
        self,
        instance: Instance,
        config: SearchConfig,
        directives: CellDirectives | None = None,
        on_event: Callable[[str, dict], None] | None = None,
    ):
        directives = directives or CellDirectives()
        directives.validate(instance)
        self._args = (instance, config, directives)
        self._mailbox: queue.SimpleQueue = queue.SimpleQueue()
        self._events: list[tuple[int, str, dict]] = []
        self._lock = threading.Lock()
        self._latest: Incumbent | None = None
        self._result: SolveOutcome | None = None
        self._error: BaseException | None = None
        self._state = "pending"
        self._finished = threading.Event()
        self._user_on_event = on_event
        self._thread = threading.Thread(
            target=self._main, name="wardroster-search", daemon=True
        )

    def start(self) -> "SearchWorker":
        self._state = "running"
        self._thread.start()
        return self

    def _main(self) -> None:
        instance, config, directives = self._args
        try:
            run = _Run(instance, config, directives, control=self._mailbox, on_event=self._record)
            self._result = run.execute()
        except BaseException as exc:
            self._error = exc
        finally:
            self._state = "finished"
            self._finished.set()
            self._drain_pending()

    def _record(self, kind: str, payload: dict) -> None:
        with self._lock:
            self._events.append((len(self._events) + 1, kind, payload))
        if kind == "incumbent":
            self._latest = payload["incumbent"]
        elif kind == "state":
            self._state = payload["state"]
        if self._user_on_event is not None:
            self._user_on_event(kind, payload)

    def _drain_pending(self) -> None:
        # nobody may block on a mailbox the worker will never read again
        while True:
            try:
                message = self._mailbox.get_nowait()
            except queue.Empty:
                return
            if message.command == "stop":
                _Run._reply(message, "ok", "finished")
            else:
                _Run._reply(message, "error", ControlError("search already finished"))

    # -- control calls -----------------------------------------------------------

    def _call(self, message: Control, timeout: float = 30.0) -> Any:
        if self._finished.is_set():
            raise ControlError("search already finished")
        box: queue.SimpleQueue = queue.SimpleQueue()
        message.reply = box
        self._mailbox.put(message)
        try:
            status, payload = box.get(timeout=timeout)
        except queue.Empty:
            raise ControlError(f"no acknowledgement for {message.command!r}") from None
        if status == "error":
            raise payload
        return payload

    def pause(self) -> str:
        return self._call(Control("pause"))

    def resume(self) -> str:
        return self._call(Control("resume"))

    def stop(self) -> str:
        if self._finished.is_set():
            return "finished"
        try:
            return self._call(Control("stop"))
        except ControlError:
            return "finished"

    def set_soften(self, flag: bool) -> str:
        return self._call(Control("soften", flag=bool(flag)))

    def update_directives(self, directives: CellDirectives) -> str:
        return self._call(Control("directives", directives=directives))

    # -- observers ---------------------------------------------------------------

    def state(self) -> str:
        return "finished" if self._finished.is_set() else self._state

    def latest(self) -> Incumbent | None:
        return self._latest

    def events(self, from_sequence: int = 0) -> list[tuple[int, str, dict]]:
        with self._lock:
            return [e for e in self._events if e[0] > from_sequence]

    def incumbents(self) -> list[Incumbent]:
        with self._lock:
            return [p["incumbent"] for _, kind, p in self._events if kind == "incumbent"]

    def join(self, timeout: float | None = None) -> None:
        self._thread.join(timeout)

    def outcome(self, wait: bool = True, timeout: float | None = None) -> SolveOutcome | None:
        if wait:
            self._finished.wait(timeout)
        if self._error is not None:
            raise self._error
        return self._result

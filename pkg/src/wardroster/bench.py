"""Strategy-comparison harness: suite runs, scalarized scores, cactus data.

A suite is the Cartesian product of instances, rescheduling scenarios,
strategy variants, time limits, and repetitions.  Each cell reschedules the
same precomputed initial solution under one strategy and yields one record:
final penalty vector, modification rate, and a reference to the incumbent
trace file.  Records append to `records.csv` as they finish, so an
interrupted suite picks up where it stopped.

Scores follow the weighted min-max scheme: per (instance, time limit) group
the raw per-tier objectives are normalized to [0, 1] across the group's
records and combined as F = sum of beta^(n-i) * f'_i with tier 1 the highest
priority.  A tier with no spread in its group normalizes to 0.  Cactus data
lists each strategy's values in ascending order with a rank index.
"""

from __future__ import annotations

import csv
import dataclasses
import re
import threading
import zlib
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .constraints import ConfigError
from .generator import SCENARIO_KINDS, make_scenario
from .model import Instance, Roster, parse_roster, serialize_roster
from .search import (
    CellDirectives,
    Incumbent,
    SearchConfig,
    SolveOutcome,
    modification_rate,
    solve,
)

__all__ = [
    "STRATEGY_NAMES",
    "BenchRecord",
    "CactusData",
    "ScalarizedScore",
    "emit_cactus",
    "load_records",
    "run_suite",
    "scalarize",
    "score_vectors",
    "strategy_config",
    "write_trace",
    "write_cactus",
    "write_records",
]

# The closed set of strategy variants: restart interval in seconds for the
# prioritized-search family, perturbation priority slot for the others.
STRATEGY_NAMES = (
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

_MP_SLOT = {"High": "highest", "Mid": "middle", "Low": "lowest"}

# Suite preparation solves each instance once; a full hour by default,
# configurable down for desk-scale runs.
INITIAL_TIME_LIMIT_SECONDS = 3600.0


def strategy_config(
    name: str,
    time_limit_seconds: float,
    random_seed: int,
    soften_hard: bool = False,
) -> SearchConfig:
    """Map one closed-set variant name onto an engine configuration."""
    if name not in STRATEGY_NAMES:
        raise ConfigError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
    family, _, knob = name.partition("-")
    if family == "LNPS":
        return SearchConfig(
            "LNPS",
            time_limit_seconds=time_limit_seconds,
            random_seed=random_seed,
            soften_hard=soften_hard,
            restart_interval_seconds=float(knob),
        )
    return SearchConfig(
        "MP_IS" if family == "MP+IS" else "MP",
        time_limit_seconds=time_limit_seconds,
        random_seed=random_seed,
        soften_hard=soften_hard,
        mp_priority=_MP_SLOT[knob],
    )


@dataclass(frozen=True)
class BenchRecord:
    """One suite cell: where it ran, how it ended, and what it scored.

    scalarized holds the aggregate F and stays None until scalarize fills
    it; modification_rate is None when the scenario prioritizes nothing.
    Skipped cells carry the cause and empty result fields.
    """

    instance_id: str
    scenario_kind: str
    strategy: str
    time_limit_seconds: float
    rep: int
    status: str
    cause: str
    penalties: tuple[tuple[int, int], ...]
    modification_rate: float | None
    scalarized: float | None
    trace_ref: str


@dataclass(frozen=True)
class ScalarizedScore:
    """Weighted min-max score of one record within its normalization group."""

    raw: tuple[float, ...]
    normalized: tuple[float, ...]
    weights: tuple[float, ...]
    aggregate: float


@dataclass(frozen=True)
class CactusData:
    """Ascending per-strategy series plus the count of valueless records."""

    axis: str
    rows: tuple[tuple[str, int, float], ...]
    omitted: int


# ---------------------------------------------------------------------------
# Record persistence

_CSV_FIELDS = (
    "instance_id",
    "scenario_kind",
    "strategy",
    "time_limit_seconds",
    "rep",
    "status",
    "cause",
    "penalties",
    "modification_rate",
    "F",
    "trace_ref",
)


def _encode_penalties(levels: tuple[tuple[int, int], ...]) -> str:
    return " ".join(f"{level}:{total}" for level, total in levels)


def _decode_penalties(text: str) -> tuple[tuple[int, int], ...]:
    if not text:
        return ()
    pairs = []
    for chunk in text.split():
        level, _, total = chunk.partition(":")
        pairs.append((int(level), int(total)))
    return tuple(pairs)


def _record_row(record: BenchRecord) -> dict[str, str]:
    return {
        "instance_id": record.instance_id,
        "scenario_kind": record.scenario_kind,
        "strategy": record.strategy,
        "time_limit_seconds": repr(record.time_limit_seconds),
        "rep": str(record.rep),
        "status": record.status,
        "cause": record.cause,
        "penalties": _encode_penalties(record.penalties),
        "modification_rate": "" if record.modification_rate is None else repr(record.modification_rate),
        "F": "" if record.scalarized is None else repr(record.scalarized),
        "trace_ref": record.trace_ref,
    }


def _row_record(row: Mapping[str, str]) -> BenchRecord:
    return BenchRecord(
        instance_id=row["instance_id"],
        scenario_kind=row["scenario_kind"],
        strategy=row["strategy"],
        time_limit_seconds=float(row["time_limit_seconds"]),
        rep=int(row["rep"]),
        status=row["status"],
        cause=row["cause"],
        penalties=_decode_penalties(row["penalties"]),
        modification_rate=float(row["modification_rate"]) if row["modification_rate"] else None,
        scalarized=float(row["F"]) if row["F"] else None,
        trace_ref=row["trace_ref"],
    )


def load_records(path: str | Path) -> list[BenchRecord]:
    """Read a records file back; missing file means no records yet."""
    path = Path(path)
    if not path.exists():
        return []
    with path.open(newline="") as handle:
        return [_row_record(row) for row in csv.DictReader(handle)]


def write_records(path: str | Path, records: Iterable[BenchRecord]) -> None:
    """Rewrite a records file in full (used after scoring fills F)."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow(_record_row(record))


class _RecordSink:
    """Single appending writer; safe against concurrent cell workers."""

    def __init__(self, path: Path):
        self.path = path
        self.lock = threading.Lock()
        if not path.exists():
            with path.open("w", newline="") as handle:
                csv.DictWriter(handle, fieldnames=_CSV_FIELDS).writeheader()

    def append(self, record: BenchRecord) -> None:
        with self.lock:
            with self.path.open("a", newline="") as handle:
                csv.DictWriter(handle, fieldnames=_CSV_FIELDS).writerow(_record_row(record))


# ---------------------------------------------------------------------------
# Suite execution


def _slug(*parts: object) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", "_".join(str(p) for p in parts))


def _derive_seed(*parts: object) -> int:
    return zlib.crc32(":".join(str(p) for p in parts).encode())


def _format_limit(limit: float) -> str:
    return f"{limit:g}"


def write_trace(path: Path, ladder: Sequence[int], incumbents: Iterable[Incumbent]) -> None:
    fields = ["sequence", "wall_time_seconds"]
    fields += [f"penalty_l{level}" for level in ladder]
    fields.append("modification_count")
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(fields)
        for inc in incumbents:
            row: list[object] = [inc.sequence, f"{inc.wall_time_seconds:.3f}"]
            row += [inc.penalties.total_at(level) for level in ladder]
            row.append(inc.modification_count)
            writer.writerow(row)


@dataclass(frozen=True)
class _Initial:
    """Prepared start state of one instance, reused by every suite cell."""

    roster: Roster | None
    softened: bool
    cause: str


def _prepare_initial(
    instance_id: str,
    instance: Instance,
    out_dir: Path,
    time_limit: float,
    base_seed: int,
) -> _Initial:
    """Solve (or reload) the initial roster one suite cell reschedules from.

    Strict first; a seed whose leave layout admits no hard-feasible roster
    falls back to a softened solve, and every cell of that instance then
    reschedules in softened mode too.
    """
    roster_path = out_dir / f"initial_{_slug(instance_id)}.json"
    flag_path = out_dir / f"initial_{_slug(instance_id)}.softened"
    if roster_path.exists():
        roster = parse_roster(roster_path.read_text(), instance)
        return _Initial(roster=roster, softened=flag_path.exists(), cause="")

    seed = _derive_seed(base_seed, "initial", instance_id)
    strict = strategy_config("LNPS-10", time_limit, seed)
    outcome = solve(instance, strict)
    softened = False
    if outcome.final is None:
        softened = True
        relaxed = dataclasses.replace(strict, soften_hard=True)
        outcome = solve(instance, relaxed)
    if outcome.final is None:
        return _Initial(roster=None, softened=softened, cause="no initial solution")

    roster = outcome.final.roster
    roster_path.write_text(serialize_roster(roster))
    if softened:
        flag_path.write_text("softened initial solve\n")
    return _Initial(roster=roster, softened=softened, cause="")


def _run_cell(
    key: tuple[str, str, str, float, int],
    instance: Instance,
    directives: CellDirectives,
    initial: _Initial,
    out_dir: Path,
    base_seed: int,
) -> BenchRecord:
    instance_id, kind, strategy, limit, rep = key
    if initial.roster is None:
        return BenchRecord(
            instance_id=instance_id,
            scenario_kind=kind,
            strategy=strategy,
            time_limit_seconds=limit,
            rep=rep,
            status="skipped",
            cause=initial.cause,
            penalties=(),
            modification_rate=None,
            scalarized=None,
            trace_ref="",
        )

    seed = _derive_seed(base_seed, "run", *key)
    config = strategy_config(strategy, limit, seed, soften_hard=initial.softened)
    outcome: SolveOutcome = solve(instance, config, directives)
    if outcome.final is None:
        return BenchRecord(
            instance_id=instance_id,
            scenario_kind=kind,
            strategy=strategy,
            time_limit_seconds=limit,
            rep=rep,
            status="skipped",
            cause="no incumbent within the time limit",
            penalties=(),
            modification_rate=None,
            scalarized=None,
            trace_ref="",
        )

    trace_name = f"trace_{_slug(instance_id, kind, strategy, _format_limit(limit), rep)}.csv"
    ladder = sorted(set(instance.priorities.values()), reverse=True)
    write_trace(out_dir / trace_name, ladder, outcome.incumbents)
    return BenchRecord(
        instance_id=instance_id,
        scenario_kind=kind,
        strategy=strategy,
        time_limit_seconds=limit,
        rep=rep,
        status="ok",
        cause="",
        penalties=outcome.final.penalties.levels,
        modification_rate=modification_rate(outcome.final, directives.prioritized),
        scalarized=None,
        trace_ref=trace_name,
    )


def run_suite(
    instances: Mapping[str, Instance],
    scenarios: Sequence[str],
    strategies: Sequence[str],
    time_limits: Sequence[float],
    reps: int,
    out_dir: str | Path,
    *,
    initial_time_limit: float = INITIAL_TIME_LIMIT_SECONDS,
    base_seed: int = 0,
    workers: int = 1,
) -> list[BenchRecord]:
    """Execute the suite product, appending records so reruns resume.

    Every cell of one instance reschedules the same initial roster under the
    same amended scenario instance, so differences across strategies come
    from the strategy alone.  Cells already present in `records.csv` are not
    re-executed; the returned list covers the full configured product in
    product order.
    """
    for kind in scenarios:
        if kind not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario kind {kind!r}")
    for name in strategies:
        if name not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
    for limit in time_limits:
        if not limit > 0:
            raise ConfigError("time limits must be positive")
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    if workers < 1:
        raise ConfigError("workers must be at least 1")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.csv"
    existing = {
        (r.instance_id, r.scenario_kind, r.strategy, r.time_limit_seconds, r.rep): r
        for r in load_records(records_path)
    }
    sink = _RecordSink(records_path)

    keys = [
        (instance_id, kind, strategy, float(limit), rep)
        for instance_id in instances
        for kind in scenarios
        for strategy in strategies
        for limit in time_limits
        for rep in range(1, reps + 1)
    ]
    pending = [key for key in keys if key not in existing]

    initials: dict[str, _Initial] = {}
    scenario_cache: dict[tuple[str, str], tuple[Instance, CellDirectives]] = {}
    for instance_id, kind, *_ in pending:
        if instance_id not in initials:
            initials[instance_id] = _prepare_initial(
                instance_id, instances[instance_id], out_dir, initial_time_limit, base_seed
            )
        initial = initials[instance_id]
        if initial.roster is not None and (instance_id, kind) not in scenario_cache:
            scenario_cache[(instance_id, kind)] = make_scenario(
                instances[instance_id],
                initial.roster,
                kind,
                seed=_derive_seed(base_seed, "scenario", instance_id, kind),
            )

    def execute(key: tuple[str, str, str, float, int]) -> BenchRecord:
        instance_id, kind = key[0], key[1]
        initial = initials[instance_id]
        if initial.roster is None:
            amended, directives = instances[instance_id], CellDirectives.empty()
        else:
            amended, directives = scenario_cache[(instance_id, kind)]
        record = _run_cell(key, amended, directives, initial, out_dir, base_seed)
        sink.append(record)
        return record

    fresh: dict[tuple[str, str, str, float, int], BenchRecord] = {}
    if pending:
        if workers == 1:
            for key in pending:
                fresh[key] = execute(key)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for key, record in zip(pending, pool.map(execute, pending)):
                    fresh[key] = record

    return [existing[key] if key in existing else fresh[key] for key in keys]


# ---------------------------------------------------------------------------
# Scoring


def score_vectors(
    vectors: Sequence[tuple[tuple[int, int], ...]],
    beta: float = 10.0,
    n: int = 4,
) -> list[ScalarizedScore]:
    """Score one normalization group of penalty vectors.

    Tier 1 is the highest priority level present anywhere in the group;
    tiers beyond the present levels read as raw 0.  Normalization is per
    tier across the group, and a spread-free tier contributes 0.
    """
    ladder = sorted({level for vector in vectors for level, _ in vector}, reverse=True)
    if len(ladder) > n:
        raise ConfigError(f"{len(ladder)} distinct priority levels exceed n={n}")
    totals = {
        level: [dict(vector).get(level, 0) for vector in vectors] for level in ladder
    }
    weights = tuple(float(beta) ** (n - i) for i in range(1, n + 1))
    scores = []
    for vector in vectors:
        present = dict(vector)
        raw = []
        normalized = []
        for i in range(n):
            if i < len(ladder):
                level = ladder[i]
                value = float(present.get(level, 0))
                lo, hi = min(totals[level]), max(totals[level])
                span = hi - lo
                normalized.append((value - lo) / span if span else 0.0)
            else:
                value = 0.0
                normalized.append(0.0)
            raw.append(value)
        aggregate = sum(w * f for w, f in zip(weights, normalized))
        scores.append(
            ScalarizedScore(
                raw=tuple(raw),
                normalized=tuple(normalized),
                weights=weights,
                aggregate=aggregate,
            )
        )
    return scores


def scalarize(
    records: Sequence[BenchRecord],
    beta: float = 10.0,
    n: int = 4,
) -> list[BenchRecord]:
    """Fill F on completed records, normalizing per (instance, time limit)."""
    groups: dict[tuple[str, float], list[int]] = {}
    for idx, record in enumerate(records):
        if record.status == "ok":
            groups.setdefault((record.instance_id, record.time_limit_seconds), []).append(idx)
    scored = list(records)
    for indexes in groups.values():
        vectors = [records[idx].penalties for idx in indexes]
        for idx, score in zip(indexes, score_vectors(vectors, beta, n)):
            scored[idx] = dataclasses.replace(records[idx], scalarized=score.aggregate)
    return scored


# ---------------------------------------------------------------------------
# Cactus data

_AXES = ("F", "modification_rate")


def emit_cactus(records: Sequence[BenchRecord], axis: str) -> CactusData:
    """Sort each strategy's values ascending; valueless records are counted."""
    if axis not in _AXES:
        raise ConfigError(f"unknown axis {axis!r}; expected one of {_AXES}")
    by_strategy: dict[str, list[float]] = {}
    omitted = 0
    for record in records:
        value = record.scalarized if axis == "F" else record.modification_rate
        if record.status != "ok" or value is None:
            omitted += 1
            continue
        by_strategy.setdefault(record.strategy, []).append(value)

    def strategy_order(name: str) -> tuple[int, str]:
        known = STRATEGY_NAMES.index(name) if name in STRATEGY_NAMES else len(STRATEGY_NAMES)
        return (known, name)

    rows = []
    for name in sorted(by_strategy, key=strategy_order):
        for rank, value in enumerate(sorted(by_strategy[name]), start=1):
            rows.append((name, rank, value))
    return CactusData(axis=axis, rows=tuple(rows), omitted=omitted)


def write_cactus(out_dir: str | Path, data: CactusData) -> Path:
    """Write cactus_<axis>.csv with (strategy, rank, value) rows."""
    path = Path(out_dir) / f"cactus_{data.axis}.csv"
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["strategy", "rank", "value"])
        for strategy, rank, value in data.rows:
            writer.writerow([strategy, rank, repr(value)])
    return path

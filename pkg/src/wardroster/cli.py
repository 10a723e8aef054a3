"""Batch front end: solve to files, evaluate rosters, drive the harness.

Every subcommand reads and writes plain JSON and CSV files; stdout carries a
short human summary, or one machine-readable JSON object under `--json`, so
the artifact files stay the stable interface.  Exit codes: 0 on success, 1
when a strict solve ends without any hard-consistent roster, 2 on usage or
schema problems.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

from .bench import (
    STRATEGY_NAMES,
    emit_cactus,
    load_records,
    run_suite,
    scalarize,
    write_cactus,
    write_records,
    write_trace,
)
from .constraints import ConfigError, evaluate, violation_report
from .generator import SCENARIO_KINDS, GeneratorConfig, generate, make_scenario
from .model import (
    instance_digest,
    parse_instance,
    parse_roster,
    serialize_instance,
    serialize_roster,
)
from .oracle import enumerate_optimal
from .search import ControlError, SearchConfig, directives_to_document, solve

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2

# Default wall-clock budget when --limit is absent; the environment variable
# lets batch jobs set one globally.
TIME_LIMIT_ENV = "WARDROSTER_TIME_LIMIT"
FALLBACK_TIME_LIMIT = 60.0

_STRATEGY_FLAG = {"lnps": "LNPS", "mp": "MP", "mp-is": "MP_IS"}
_AXIS_FLAG = {"penalty": "F", "modrate": "modification_rate"}


def _default_time_limit() -> float:
    raw = os.environ.get(TIME_LIMIT_ENV)
    if raw is None:
        return FALLBACK_TIME_LIMIT
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigError(f"{TIME_LIMIT_ENV} must be a number, got {raw!r}") from exc
    if not value > 0:
        raise ConfigError(f"{TIME_LIMIT_ENV} must be positive, got {raw!r}")
    return value


def _read_instance(path: str):
    return parse_instance(Path(path).read_text())


def _emit(args: argparse.Namespace, payload: dict[str, Any], human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human)


# ---------------------------------------------------------------------------
# solve


def _search_config(args: argparse.Namespace) -> SearchConfig:
    strategy = _STRATEGY_FLAG[args.strategy]
    limit = args.limit if args.limit is not None else _default_time_limit()
    if strategy == "LNPS":
        return SearchConfig(
            strategy,
            time_limit_seconds=limit,
            random_seed=args.seed,
            soften_hard=args.soften,
            restart_interval_seconds=args.t,
        )
    return SearchConfig(
        strategy,
        time_limit_seconds=limit,
        random_seed=args.seed,
        soften_hard=args.soften,
        mp_priority=args.mp_priority,
    )


def _cmd_solve(args: argparse.Namespace) -> int:
    inst = _read_instance(args.instance)
    config = _search_config(args)
    outcome = solve(inst, config)
    if outcome.final is None:
        message = (
            "no hard-consistent roster found within the time limit; "
            f"closest attempt had {outcome.best_hard_violations} hard violations "
            "(rerun with --soften to accept hard-level penalties)"
        )
        if args.json:
            print(json.dumps({"status": "infeasible", "message": message}, indent=2))
        else:
            print(message, file=sys.stderr)
        return EXIT_INFEASIBLE

    stem = Path(args.instance)
    roster_path = Path(args.out) if args.out else stem.with_suffix(".roster.json")
    trace_path = Path(args.trace) if args.trace else stem.with_suffix(".trace.csv")
    roster_path.write_text(serialize_roster(outcome.final.roster))
    ladder = sorted(set(inst.priorities.values()), reverse=True)
    write_trace(trace_path, ladder, outcome.incumbents)

    final = outcome.final
    payload = {
        "status": outcome.status,
        "reason": outcome.reason,
        "roster_path": str(roster_path),
        "trace_path": str(trace_path),
        "penalties": final.penalties.as_rows(),
        "incumbents": len(outcome.incumbents),
        "steps": outcome.steps,
        "restarts": outcome.restarts,
        "elapsed_seconds": round(outcome.elapsed_seconds, 3),
    }
    _emit(
        args,
        payload,
        f"solved: {roster_path} (trace {trace_path}), "
        f"{len(outcome.incumbents)} incumbents, final penalties {final.penalties.levels}",
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _cmd_eval(args: argparse.Namespace) -> int:
    inst = _read_instance(args.instance)
    roster = parse_roster(Path(args.roster).read_text(), inst)
    result = evaluate(roster, inst, soften_hard=args.soften)
    report = violation_report(result)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"feasible: {report['feasible']}")
    print("penalties:", " ".join(f"{row['priority']}:{row['total']}" for row in report["penalties"]) or "none")
    for row in report["violations"]:
        where = " ".join(str(p) for p in row["params"])
        bound = f" ({row['value']} vs {row['limit']})" if "limit" in row else ""
        print(f"  {row['kind']} {row['reason']} {where} weight={row['weight']}{bound}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen / scenario


def _cmd_gen(args: argparse.Namespace) -> int:
    config = GeneratorConfig(
        nurse_count=args.nurses,
        horizon_days=args.horizon,
        request_density=args.density,
        extra_request_density=args.extra_density,
        seed=args.seed,
    )
    inst = generate(config)
    out = Path(args.out) if args.out else Path(f"ward_n{args.nurses}_s{args.seed}.json")
    out.write_text(serialize_instance(inst))
    payload = {"path": str(out), "digest": instance_digest(inst)}
    _emit(args, payload, f"generated {out} (digest {payload['digest'][:12]})")
    return EXIT_OK


def _cmd_scenario(args: argparse.Namespace) -> int:
    inst = _read_instance(args.instance)
    roster = parse_roster(Path(args.roster).read_text(), inst)
    amended, directives = make_scenario(
        inst, roster, args.kind, seed=args.seed, extra_request_density=args.extra_density
    )
    stem = Path(args.instance)
    inst_path = Path(args.out_instance) if args.out_instance else stem.with_suffix(f".{args.kind}.json")
    dir_path = (
        Path(args.out_directives)
        if args.out_directives
        else stem.with_suffix(f".{args.kind}.directives.json")
    )
    inst_path.write_text(serialize_instance(amended))
    dir_path.write_text(json.dumps(directives_to_document(directives), indent=2) + "\n")
    payload = {
        "instance_path": str(inst_path),
        "directives_path": str(dir_path),
        "kind": args.kind,
        "prioritized": len(directives.prioritized),
        "cleared": len(directives.cleared),
    }
    _emit(
        args,
        payload,
        f"scenario {args.kind}: instance {inst_path}, directives {dir_path} "
        f"({len(directives.prioritized)} prioritized, {len(directives.cleared)} cleared)",
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _load_suite(path: Path) -> dict[str, Any]:
    suite = json.loads(path.read_text())
    if not isinstance(suite, dict):
        raise ConfigError("suite file must hold a JSON object")
    return suite


def _suite_instances(suite: dict[str, Any], root: Path) -> dict[str, Any]:
    rows = suite.get("instances")
    if not isinstance(rows, list) or not rows:
        raise ConfigError("suite file needs a non-empty 'instances' list")
    instances = {}
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or "id" not in row:
            raise ConfigError(f"instances[{i}] needs an 'id'")
        iid = row["id"]
        if iid in instances:
            raise ConfigError(f"duplicate instance id {iid!r}")
        if "path" in row:
            instances[iid] = parse_instance((root / row["path"]).read_text())
        elif "generator" in row:
            instances[iid] = generate(GeneratorConfig(**row["generator"]))
        else:
            raise ConfigError(f"instances[{i}] needs either 'path' or 'generator'")
    return instances


def _cmd_bench_run(args: argparse.Namespace) -> int:
    suite_path = Path(args.suite)
    suite = _load_suite(suite_path)
    root = suite_path.parent
    instances = _suite_instances(suite, root)
    out_dir = root / suite.get("out_dir", "bench_out")
    records = run_suite(
        instances,
        tuple(suite.get("scenarios", SCENARIO_KINDS)),
        tuple(suite.get("strategies", STRATEGY_NAMES)),
        tuple(suite.get("time_limits", (60.0,))),
        int(suite.get("reps", 3)),
        out_dir,
        initial_time_limit=float(suite.get("initial_time_limit", 3600.0)),
        base_seed=int(suite.get("base_seed", 0)),
        workers=int(suite.get("workers", 1)),
    )
    scored = scalarize(
        records, beta=float(suite.get("beta", 10.0)), n=int(suite.get("tiers", 4))
    )
    write_records(out_dir / "records.csv", scored)
    done = sum(1 for r in scored if r.status == "ok")
    skipped = len(scored) - done
    payload = {
        "records_path": str(out_dir / "records.csv"),
        "records": len(scored),
        "ok": done,
        "skipped": skipped,
    }
    _emit(args, payload, f"suite complete: {done} ok, {skipped} skipped -> {payload['records_path']}")
    return EXIT_OK


def _cmd_bench_cactus(args: argparse.Namespace) -> int:
    records_path = Path(args.records)
    records = load_records(records_path)
    if not records:
        raise ConfigError(f"no records found at {records_path}")
    data = emit_cactus(records, _AXIS_FLAG[args.axis])
    path = write_cactus(records_path.parent, data)
    payload = {"path": str(path), "rows": len(data.rows), "omitted": data.omitted}
    _emit(args, payload, f"cactus data: {path} ({len(data.rows)} rows, {data.omitted} omitted)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle / serve


def _cmd_oracle(args: argparse.Namespace) -> int:
    inst = _read_instance(args.instance)
    result = enumerate_optimal(inst, soften_hard=args.soften)
    payload = {
        "optimum": result.optimum.as_rows() if result.optimum is not None else None,
        "optimal_count": result.optimal_count,
        "explored": result.explored,
        "feasible_found": result.feasible_found,
    }
    if result.optimum is None:
        human = f"infeasible: no hard-consistent completion ({result.explored} explored)"
    else:
        human = (
            f"optimum {result.optimum.levels} shared by {result.optimal_count} "
            f"rosters ({result.explored} explored)"
        )
    _emit(args, payload, human)
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service.app import run_server

    run_server(host=args.host, port=args.port, db_path=args.db, token=args.token)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wardroster", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="solve an instance to roster and trace files")
    solve_p.add_argument("--instance", required=True)
    solve_p.add_argument("--strategy", choices=sorted(_STRATEGY_FLAG), default="lnps")
    solve_p.add_argument("--t", type=float, default=10.0, help="restart interval seconds (lnps)")
    solve_p.add_argument(
        "--mp-priority", choices=("highest", "middle", "lowest"), default="highest"
    )
    solve_p.add_argument("--limit", type=float, default=None, help="time limit seconds")
    solve_p.add_argument("--seed", type=int, default=0)
    solve_p.add_argument("--soften", action="store_true")
    solve_p.add_argument("--out", help="roster output path")
    solve_p.add_argument("--trace", help="trace output path")
    solve_p.add_argument("--json", action="store_true")
    solve_p.set_defaults(handler=_cmd_solve)

    eval_p = sub.add_parser("eval", help="evaluate a roster against an instance")
    eval_p.add_argument("--instance", required=True)
    eval_p.add_argument("--roster", required=True)
    eval_p.add_argument("--soften", action="store_true")
    eval_p.add_argument("--json", action="store_true")
    eval_p.set_defaults(handler=_cmd_eval)

    gen_p = sub.add_parser("gen", help="generate a seeded ward instance")
    gen_p.add_argument("--nurses", type=int, required=True)
    gen_p.add_argument("--horizon", type=int, default=28)
    gen_p.add_argument("--density", type=float, default=0.10)
    gen_p.add_argument("--extra-density", type=float, default=0.05)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--out")
    gen_p.add_argument("--json", action="store_true")
    gen_p.set_defaults(handler=_cmd_gen)

    scen_p = sub.add_parser("scenario", help="amend an instance into a rescheduling scenario")
    scen_p.add_argument("--instance", required=True)
    scen_p.add_argument("--roster", required=True, help="initial solution roster")
    scen_p.add_argument("--kind", choices=SCENARIO_KINDS, required=True)
    scen_p.add_argument("--seed", type=int, default=0)
    scen_p.add_argument("--extra-density", type=float, default=0.05)
    scen_p.add_argument("--out-instance")
    scen_p.add_argument("--out-directives")
    scen_p.add_argument("--json", action="store_true")
    scen_p.set_defaults(handler=_cmd_scenario)

    bench_p = sub.add_parser("bench", help="strategy comparison harness")
    bench_sub = bench_p.add_subparsers(dest="bench_command", required=True)
    run_p = bench_sub.add_parser("run", help="execute a suite file")
    run_p.add_argument("--suite", required=True)
    run_p.add_argument("--json", action="store_true")
    run_p.set_defaults(handler=_cmd_bench_run)
    cactus_p = bench_sub.add_parser("cactus", help="emit cactus-plot data from records")
    cactus_p.add_argument("--axis", choices=sorted(_AXIS_FLAG), required=True)
    cactus_p.add_argument("--records", default="records.csv")
    cactus_p.add_argument("--json", action="store_true")
    cactus_p.set_defaults(handler=_cmd_bench_cactus)

    oracle_p = sub.add_parser("oracle", help="exhaustively enumerate a desk-scale instance")
    oracle_p.add_argument("--instance", required=True)
    oracle_p.add_argument("--soften", action="store_true")
    oracle_p.add_argument("--json", action="store_true")
    oracle_p.set_defaults(handler=_cmd_oracle)

    serve_p = sub.add_parser("serve", help="run the scheduling service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--db", default="wardroster.sqlite3")
    serve_p.add_argument("--token", default=None, help="require this bearer token")
    serve_p.set_defaults(handler=_cmd_serve)

    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse argv and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else EXIT_USAGE
    try:
        return args.handler(args)
    except (ValueError, ControlError, OSError) as exc:
        # every schema, config, and directive error in the package derives
        # from ValueError; ControlError is the lone RuntimeError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

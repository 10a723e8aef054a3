"""Ward rostering: constraint engine, anytime search, and scheduling service."""

from .constraints import (
    ConfigError,
    DeltaEvaluator,
    EvalResult,
    PenaltyTerm,
    PenaltyVector,
    Violation,
    evaluate,
    evaluate_delta,
    violation_report,
)
from .bench import (
    STRATEGY_NAMES,
    BenchRecord,
    CactusData,
    ScalarizedScore,
    emit_cactus,
    load_records,
    run_suite,
    scalarize,
    score_vectors,
    strategy_config,
    write_cactus,
    write_records,
    write_trace,
)
from .generator import SCENARIO_KINDS, GeneratorConfig, generate, make_scenario
from .oracle import GUARD_LIMIT, OracleResult, SearchSpaceError, enumerate_optimal
from .search import (
    CellDirectives,
    Control,
    ControlError,
    DirectiveError,
    Incumbent,
    SearchConfig,
    SearchWorker,
    SolveOutcome,
    directives_to_document,
    incumbent_record,
    initial_value_guidance,
    modification_rate,
    mp_objective,
    parse_directives,
    solve,
)
from .model import (
    Calendar,
    CompletionError,
    Instance,
    InstanceError,
    Nurse,
    ParseError,
    Roster,
    ShiftDef,
    ValidationError,
    cell_domain,
    complete_roster,
    instance_digest,
    instance_to_document,
    parse_instance,
    parse_roster,
    roster_to_document,
    serialize_instance,
    serialize_roster,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

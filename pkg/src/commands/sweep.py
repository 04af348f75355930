"""κ_a(a) curve over a range of aspect ratios."""

from typing import List

from ..analysis.critical_value import kappa_a_curve, parse_sweep
from ..artifacts import dumps_csv, dumps_json, emit
from ..logging_config import get_logger, log_solver_event

logger = get_logger(__name__)

SWEEP_HEADER = ("a", "kappa_a", "bound", "oracle")


def emit_sweep(sweep: str, args, config, run) -> List[str]:
    values = parse_sweep(sweep)
    workers = args.workers if args.workers is not None else config.run.workers
    tol = args.tol if args.tol is not None else config.critical_value.tol
    results = kappa_a_curve(values, tol=tol, workers=workers)
    rows = [(r.a, r.kappa_a, r.bound, r.oracle_kappa) for r in results]

    if args.json:
        text = dumps_json({"rows": [r.to_dict() for r in results]}, run.config_hash)
    else:
        text = dumps_csv(SWEEP_HEADER, rows, run.config_hash)
    path = emit(text, args.out)

    log_solver_event(
        logger, "sweep", "complete", "success", points=len(rows), workers=workers
    )
    return [str(path)] if path else []


def run_sweep(args, config, run) -> List[str]:
    return emit_sweep(args.range, args, config, run)

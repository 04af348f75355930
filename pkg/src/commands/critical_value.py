"""critical-value: κ_a for one aspect ratio, or a sweep."""

from typing import List

from ..analysis.critical_value import solve_kappa_a
from ..artifacts import dumps_json, emit
from .sweep import emit_sweep


def run_critical_value(args, config, run) -> List[str]:
    if args.sweep:
        return emit_sweep(args.sweep, args, config, run)

    a = args.a if args.a is not None else config.problem.a
    result = solve_kappa_a(
        a,
        tol=args.tol if args.tol is not None else config.critical_value.tol,
        max_depth=config.critical_value.max_depth,
        oracle_tol=config.critical_value.oracle_tol,
    )
    path = emit(dumps_json(result.to_dict(), run.config_hash), args.out)
    return [str(path)] if path else []

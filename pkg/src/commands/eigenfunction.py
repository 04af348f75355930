"""eigenfunction: coefficient table of the critical eigenfunction."""

from typing import List

from ..analysis.critical_value import solve_kappa_a
from ..analysis.linear_operator import build_eigenfunction, simplicity_check
from ..artifacts import dumps_csv, dumps_json, emit

TABLE_HEADER = ("n", "b_n", "gamma_n")


def run_eigenfunction(args, config, run) -> List[str]:
    a = args.a if args.a is not None else config.problem.a
    critical = solve_kappa_a(
        a,
        tol=config.critical_value.tol,
        max_depth=config.critical_value.max_depth,
        oracle_tol=config.critical_value.oracle_tol,
    )
    eig = build_eigenfunction(a, critical.kappa_a, c=args.c, N=args.N)
    rows = eig.table()
    artifacts: List[str] = []

    if args.json:
        checks = simplicity_check(a, critical.kappa_a)
        payload = {
            "a": eig.field.a,
            "kappa_a": critical.kappa_a,
            "c": eig.c,
            "N": args.N,
            "recurrence_residual": eig.recurrence_residual(),
            "gamma_tail_error": eig.gammas.tail_error,
            "kernel_dimension": [check.dimension for check in checks],
            "simple": all(
                check.dimension == 1 and check.rank == check.rank_squared
                for check in checks
            ),
            "rows": [{"n": n, "b": b, "gamma": g} for n, b, g in rows],
        }
        path = emit(dumps_json(payload, run.config_hash), args.out)
    else:
        path = emit(dumps_csv(TABLE_HEADER, rows, run.config_hash), args.out)
    if path:
        artifacts.append(str(path))

    if args.field_out:
        artifacts.append(str(eig.field.save(args.field_out, run.config_hash)))
    return artifacts

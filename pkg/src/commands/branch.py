"""branch: trivial branch, bifurcation point and the switched branches."""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..analysis.critical_value import CriticalValueResult, solve_kappa_a
from ..analysis.lagrangian_flow import verification_gate
from ..analysis.linear_operator import build_eigenfunction
from ..analysis.steady_solver import (
    Branch,
    SwitchResult,
    locate_bifurcation,
    switch_branches,
    trace_trivial_branch,
)
from ..artifacts import dumps_csv, dumps_json, emit, write_bifurcation_svg
from ..errors import SolverFailure
from ..logging_config import get_logger, log_solver_event
from .verify import lagrangian_check

logger = get_logger(__name__)

BRANCH_HEADER = ("s", "kappa", "amplitude", "residual_norm")
LOCATION_AGREEMENT = 1e-6


@dataclass(eq=False)
class BifurcationStudy:
    critical: CriticalValueResult
    trivial: Branch
    kappa_c: float
    switch: SwitchResult

    def summary(self) -> Dict[str, Any]:
        return {
            "a": self.critical.a,
            "kappa_a": self.critical.kappa_a,
            "trivial_points": len(self.trivial),
            **self.switch.summary(),
        }


def trace_bifurcation(
    a: float,
    config,
    steps: Optional[int] = None,
    kappa_min: Optional[float] = None,
) -> BifurcationStudy:
    """
    κ_a from the continued fraction, then the trivial branch from above
    until the Jacobian determinant changes sign, Brent refinement of the
    crossing and continuation along ±eigenfunction, all at the branch
    truncation (M, branch_N).
    """
    critical = solve_kappa_a(
        a,
        tol=config.critical_value.tol,
        max_depth=config.critical_value.max_depth,
        oracle_tol=config.critical_value.oracle_tol,
    )
    cfg = config.residual_config(a, N=config.problem.branch_N)
    cont_settings = config.continuation

    trivial_cont = config.continuation_config(
        ds=cont_settings.trivial_ds,
        ds_max=max(cont_settings.trivial_ds, cont_settings.ds_max),
    )
    trivial = trace_trivial_branch(
        cont_settings.trivial_start_factor * critical.kappa_a, cfg, trivial_cont
    )
    bracket = trivial.bifurcation_bracket()
    if bracket is None:
        raise SolverFailure(
            "no bifurcation detected on the trivial branch",
            kappa_start=trivial.points[0].kappa,
            kappa_end=trivial.points[-1].kappa,
        )
    kappa_c = locate_bifurcation(bracket[0], bracket[1], cfg)
    gap = abs(kappa_c - critical.kappa_a)
    if gap > LOCATION_AGREEMENT:
        logger.warning(
            "Bifurcation point disagrees with kappa_a",
            extra={"kappa_c": kappa_c, "kappa_a": critical.kappa_a, "gap": gap},
        )

    cont = config.continuation_config()
    if steps is not None:
        cont = replace(cont, max_steps=steps)
    if kappa_min is not None:
        cont = replace(cont, kappa_min=kappa_min)
    eig = build_eigenfunction(a, critical.kappa_a, N=cfg.N, M=1)
    switch = switch_branches(kappa_c, eig, cfg, cont)

    study = BifurcationStudy(critical, trivial, kappa_c, switch)
    log_solver_event(logger, "branch", "complete", "success", **study.summary())
    return study


def run_branch(args, config, run) -> List[str]:
    a = args.a if args.a is not None else config.problem.a
    study = trace_bifurcation(a, config, steps=args.steps, kappa_min=args.kappa_min)
    plus = study.switch.plus
    artifacts: List[str] = []

    if args.verify:
        tol = args.tol if args.tol is not None else config.lagrangian.gate_tol
        for point in plus.points[1:]:
            verification_gate(lagrangian_check(point.field, point.kappa, config), tol)

    rows = [point.row() for point in plus.points]
    if args.json:
        payload = {
            **study.summary(),
            "branches": {
                branch.label: {
                    "rows": [dict(zip(BRANCH_HEADER, p.row())) for p in branch.points],
                    "events": branch.events,
                    "terminated": branch.terminated,
                    "termination_reason": branch.termination_reason,
                }
                for branch in (study.trivial, plus, study.switch.minus)
            },
        }
        path = emit(dumps_json(payload, run.config_hash), args.out)
    else:
        path = emit(dumps_csv(BRANCH_HEADER, rows, run.config_hash), args.out)
    if path:
        artifacts.append(str(path))

    if args.dump_fields:
        directory = Path(args.dump_fields)
        for index, point in enumerate(plus.points):
            target = directory / f"{plus.label}-{index:03d}.json"
            artifacts.append(str(point.field.save(target, run.config_hash)))

    if args.svg:
        branches = {
            "trivial": [(p.kappa, p.amplitude) for p in study.trivial.points],
            "plus": [(p.kappa, p.amplitude) for p in plus.points],
            "minus": [(p.kappa, p.amplitude) for p in study.switch.minus.points],
        }
        svg = write_bifurcation_svg(
            args.svg, branches, kappa_c=study.kappa_c, title=f"a = {a:g}"
        )
        artifacts.append(str(svg))
    return artifacts

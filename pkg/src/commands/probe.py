"""probe: random Newton starts in the uniqueness regime."""

import sys
from pathlib import Path
from typing import List

from ..analysis.steady_solver import uniqueness_probe
from ..artifacts import dumps_csv, dumps_json, emit
from ..logging_config import get_logger

logger = get_logger(__name__)

PROBE_HEADER = ("trial", "outcome", "start_hessian", "amplitude", "iterations", "residual_norm")


def run_probe(args, config, run) -> List[str]:
    a = args.a if args.a is not None else config.problem.a
    trials = args.trials if args.trials is not None else config.probe.trials
    output_dir = args.output_dir or config.run.output_dir
    dump_dir = args.dump_dir or Path(output_dir) / f"probe-{run.config_hash[:12]}"

    report = uniqueness_probe(
        a,
        args.kappa,
        trials,
        config.residual_config(a),
        seed=run.seed,
        radius_fraction=config.probe.radius_fraction,
        decay=config.probe.decay,
        dump_dir=dump_dir,
        config_hash=run.config_hash,
    )
    if not report.all_basic:
        logger.warning(
            "Probe found states other than psi*",
            extra={"counts": report.counts, "artifacts": report.artifacts},
        )

    if args.json:
        payload = {
            "a": a,
            "kappa": args.kappa,
            "seed": report.seed,
            "summary": report.summary(),
            "counts": report.counts,
            "outcomes": report.outcomes,
            "artifacts": report.artifacts,
        }
        text = dumps_json(payload, run.config_hash)
    else:
        rows = [
            tuple(outcome.get(key) for key in PROBE_HEADER) for outcome in report.outcomes
        ]
        text = dumps_csv(PROBE_HEADER, rows, run.config_hash)
    path = emit(text, args.out)
    print(report.summary(), file=sys.stderr)
    return ([str(path)] if path else []) + report.artifacts

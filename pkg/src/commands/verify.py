"""verify: cross-check a steady state through both formulations."""

from typing import List

from ..analysis.lagrangian_flow import (
    LagrangianReport,
    TpsiQuadrature,
    flow_gradient,
    lagrangian_residual,
    sample_points,
    trajectory_sign,
    verification_gate,
)
from ..analysis.spectral_domain import SpectralField
from ..analysis.steady_solver import steady_residual
from ..artifacts import dumps_json, emit


def lagrangian_check(field: SpectralField, kappa: float, config) -> LagrangianReport:
    """Lagrangian residual with the quadrature and sampling settings from config."""
    settings = config.lagrangian
    quad = TpsiQuadrature.for_tolerance(
        kappa,
        settings.quadrature_tol,
        order=settings.quadrature_order,
        max_panel=settings.max_panel,
    )
    return lagrangian_residual(
        field,
        kappa,
        quad,
        sample_points(field.a, settings.sample_grid),
        dt=settings.dt,
        sign=trajectory_sign(settings.trajectory_sign),
    )


def run_verify(args, config, run) -> List[str]:
    field = SpectralField.load(args.field)
    kappa = args.kappa
    settings = config.lagrangian

    euler = steady_residual(field, kappa).norm()
    report = lagrangian_check(field, kappa, config)
    flow = flow_gradient(
        field,
        sample_points(field.a, settings.sample_grid),
        settings.flow_t_end,
        settings.flow_dt,
        sign=trajectory_sign(settings.trajectory_sign),
    )

    payload = report.to_dict()
    payload.update(euler_residual=euler, det_err_max=flow.det_err_max, field=args.field)
    path = emit(dumps_json(payload, run.config_hash), args.out)

    verification_gate(report, args.tol if args.tol is not None else settings.gate_tol)
    return [str(path)] if path else []

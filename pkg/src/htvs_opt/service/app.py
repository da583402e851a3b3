"""FastAPI application wrapping the core package.

Run with: uvicorn htvs_opt.service.app:app
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from ..configs import DEFAULT_SEED_GRID, EmConfig, IntegrationConfig, OptConfig
from ..errors import ScreeningError
from ..gmm import GmmComponent, GmmModel, bic_table, fit_gmm, log_likelihood, select_components
from ..objective import PipelineSpec, Policy, Stage
from ..optimizer import (
    BudgetSpec,
    OptimizationResult,
    budget_sweep,
    optimize_budgeted,
    optimize_joint,
)
from ..simulator import SimReport, attach_empirical, run_baseline, run_policy
from ..synthetic import generate_synthetic
from ..tables import ScoreTable
from . import schemas as s


def _table_from_payload(payload: s.TablePayload) -> ScoreTable:
    return ScoreTable(
        tuple(payload.columns),
        np.array(payload.rows, dtype=np.float64),
        labels=np.array(payload.labels, dtype=np.int8) if payload.labels else None,
        ids=tuple(payload.ids) if payload.ids else None,
    )


def _table_to_payload(table: ScoreTable) -> s.TablePayload:
    return s.TablePayload(
        columns=list(table.column_names),
        rows=table.rows.tolist(),
        ids=list(table.ids) if table.ids else None,
        labels=table.labels.tolist() if table.labels is not None else None,
    )


def _model_from_payload(payload: s.ModelPayload) -> GmmModel:
    comps = tuple(
        GmmComponent(c.weight, np.array(c.mean), np.array(c.cov))
        for c in payload.components
    )
    return GmmModel(comps, tuple(payload.columns))


def _model_to_payload(model: GmmModel) -> s.ModelPayload:
    return s.ModelPayload(
        dim=model.dim,
        columns=list(model.column_names),
        components=[
            s.ComponentPayload(
                weight=c.weight, mean=c.mean.tolist(), cov=c.covariance.tolist()
            )
            for c in model.components
        ],
    )


def _pipeline_from_payload(payload: s.PipelinePayload) -> PipelineSpec:
    return PipelineSpec(
        tuple(Stage(st.name, st.cost, st.column) for st in payload.stages),
        payload.final_threshold,
        payload.population,
    )


def _integration_config(payload: s.IntegrationPayload) -> IntegrationConfig:
    return IntegrationConfig(payload.n_points, payload.n_randomizations, payload.seed)


def _opt_config(payload: s.OptimizerPayload) -> OptConfig:
    return OptConfig(
        seed_grid=tuple(payload.seed_grid) if payload.seed_grid else DEFAULT_SEED_GRID,
        polish_iters=payload.polish_iters,
        penalty_mu=payload.penalty_mu,
        seed=payload.seed,
    )


def _policy_from_wire(values) -> Policy:
    return Policy(tuple(s.threshold_in(v) for v in values))


def _policy_to_wire(policy: Policy) -> list:
    return [s.threshold_out(t) for t in policy.thresholds]


def _optimize_response(result: OptimizationResult) -> s.OptimizeResponse:
    return s.OptimizeResponse(
        policy=_policy_to_wire(result.policy),
        report=s.ObjectiveReportPayload(**result.report.to_json_dict()),
        feasible=result.feasible,
        evaluations=result.evaluations,
    )


def _simulate_response(report: SimReport) -> s.SimulateResponse:
    if isinstance(report.policy_used, Policy):
        used = {"policy": _policy_to_wire(report.policy_used)}
    else:
        used = {"baseline_top_fraction": report.policy_used}
    return s.SimulateResponse(
        survivors_per_stage=list(report.survivors_per_stage),
        detected=report.detected,
        total_cost=report.total_cost,
        effective_cost=report.effective_cost,
        savings_vs_reference=report.savings_vs_reference,
        metrics=s.MetricsPayload(**report.metrics.to_json_dict()) if report.metrics else None,
        policy_used=used,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="htvs-opt",
        description="Optimal threshold policies for multi-stage screening pipelines",
        version="0.1.0",
    )

    @app.exception_handler(ScreeningError)
    async def domain_error(_, exc: ScreeningError):
        return JSONResponse(
            status_code=400, content={"detail": f"{type(exc).__name__}: {exc}"}
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/generate", response_model=s.TablePayload)
    def generate(req: s.GenerateRequest):
        if not -1.0 < req.rho < 1.0:
            raise HTTPException(status_code=422, detail="rho must be in (-1, 1)")
        return _table_to_payload(generate_synthetic(req.rho, req.n, req.seed))

    @app.post("/fit", response_model=s.FitResponse)
    def fit(req: s.FitRequest):
        table = _table_from_payload(req.table)
        config = EmConfig(seed=req.seed)
        if req.k is None:
            k, model = select_components(table, req.k_max, config)
            scores = bic_table(table, req.k_max, config)
        else:
            k, model = req.k, fit_gmm(table, req.k, config)
            scores = None
        return s.FitResponse(
            model=_model_to_payload(model),
            k=k,
            log_likelihood=log_likelihood(model, table),
            bic=scores,
        )

    @app.post("/optimize", response_model=s.OptimizeResponse)
    def optimize(req: s.OptimizeRequest):
        model = _model_from_payload(req.model)
        pipeline = _pipeline_from_payload(req.pipeline)
        integ = _integration_config(req.integration)
        opt = _opt_config(req.optimizer)
        if req.mode.budgeted is not None:
            result = optimize_budgeted(
                model, pipeline, BudgetSpec(req.mode.budgeted.budget), opt, integ
            )
        else:
            result = optimize_joint(
                model, pipeline, req.mode.joint.alpha, opt, integ
            )
        return _optimize_response(result)

    @app.post("/simulate", response_model=s.SimulateResponse)
    def simulate(req: s.SimulateRequest):
        table = _table_from_payload(req.table)
        pipeline = _pipeline_from_payload(req.pipeline)
        if req.policy is not None:
            report = run_policy(table, pipeline, _policy_from_wire(req.policy))
        else:
            report = run_baseline(table, pipeline, req.baseline)
        return _simulate_response(report)

    @app.post("/sweep", response_model=s.SweepResponse)
    def sweep(req: s.SweepRequest):
        model = _model_from_payload(req.model)
        pipeline = _pipeline_from_payload(req.pipeline)
        curve = budget_sweep(
            model,
            pipeline,
            req.budgets,
            _opt_config(req.optimizer),
            _integration_config(req.integration),
        )
        if req.table is not None:
            curve = attach_empirical(curve, _table_from_payload(req.table), pipeline)
        return s.SweepResponse(
            points=[
                s.BudgetPointPayload(
                    budget=p.budget,
                    expected_detected=p.expected_detected,
                    policy=_policy_to_wire(p.policy),
                    empirical_detected=p.empirical_detected,
                )
                for p in curve.points
            ]
        )

    return app


app = create_app()

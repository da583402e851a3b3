"""Command-line front end.

Thin wrappers over the library: every subcommand reads files/flags, calls
one or two library functions, prints a human summary plus the effective
resolved configuration to stdout, and writes machine artifacts only to
``--out`` paths. Exit codes: 0 success, 2 validation/usage error, 3 numeric
failure. Re-running a command reproduces byte-identical output files.
"""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import io as hio
from .campaign import (
    BudgetedMode,
    effective_config_dict,
    load_campaign,
    resolve_distribution,
)
from .configs import EmConfig
from .errors import (
    DegenerateCovariance,
    NotPositiveDefinite,
    ScreeningError,
    ZeroTail,
)
from .gmm import bic_table, fit_gmm, log_likelihood
from .objective import Policy
from .optimizer import BudgetSpec, budget_sweep, optimize_budgeted, optimize_joint
from .simulator import attach_empirical, run_baseline, run_policy
from .synthetic import generate_synthetic

_NUMERIC_ERRORS = (NotPositiveDefinite, DegenerateCovariance, ZeroTail)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _NUMERIC_ERRORS as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(3)
        except (ScreeningError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _echo_config(payload: dict) -> None:
    click.echo("resolved config:")
    click.echo(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _threads_option(fn):
    return click.option(
        "--threads",
        type=click.IntRange(min=1),
        default=1,
        envvar="HTVS_OPT_THREADS",
        show_default=True,
        help="Worker-thread cap for the policy search (results are invariant).",
    )(fn)


@click.group()
@click.version_option()
def main():
    """Screening-pipeline policy optimization and simulation."""


@main.command()
@click.option("--rho", type=click.FloatRange(-1.0, 1.0, min_open=True, max_open=True), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def gen(rho, n, seed, out):
    """Generate a synthetic benchmark population CSV."""
    _echo_config({"command": "gen", "rho": rho, "n": n, "seed": seed, "out": str(out)})
    table = generate_synthetic(rho, n, seed)
    hio.write_score_table(table, out)
    click.echo(f"wrote {table.n_rows} rows x {table.dim} stages to {out}")


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--k", type=click.IntRange(min=1), default=None, help="Fixed component count.")
@click.option("--auto-k", is_flag=True, help="Pick the component count by BIC.")
@click.option("--k-max", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def fit(in_path, k, auto_k, k_max, seed, out):
    """Fit a Gaussian mixture to a score table and save it as JSON."""
    if (k is None) == (not auto_k):
        raise click.UsageError("exactly one of --k or --auto-k is required")
    _echo_config(
        {
            "command": "fit",
            "in": str(in_path),
            "k": k if k is not None else "auto",
            "k_max": k_max,
            "seed": seed,
            "out": str(out),
        }
    )
    table = hio.load_score_table(in_path)
    config = EmConfig(seed=seed)
    if auto_k:
        scores = bic_table(table, k_max, config)
        chosen = min(scores, key=lambda kv: (kv[1], kv[0]))[0]
        model = fit_gmm(table, chosen, config)
        click.echo("k  BIC")
        for kk, score in scores:
            marker = " *" if kk == chosen else ""
            click.echo(f"{kk}  {score:.6f}{marker}")
        click.echo(f"selected k={chosen}")
    else:
        model = fit_gmm(table, k, config)
    hio.save_model(model, out)
    click.echo(
        f"fit {model.n_components}-component model, "
        f"log-likelihood {log_likelihood(model, table):.6f}, saved to {out}"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_threads_option
@_handle_errors
def optimize(config_path, out, threads):
    """Solve the configured policy-design problem and save the result."""
    config = load_campaign(config_path)
    config = replace(config, optimizer=replace(config.optimizer, threads=threads))
    _echo_config(effective_config_dict(config))
    model, _ = resolve_distribution(config)
    if isinstance(config.mode, BudgetedMode):
        result = optimize_budgeted(
            model, config.pipeline, BudgetSpec(config.mode.budget),
            config.optimizer, config.integration,
        )
    else:
        result = optimize_joint(
            model, config.pipeline, config.mode.alpha,
            config.optimizer, config.integration,
        )
    hio.write_report(result, out, "json")
    if not result.feasible:
        click.echo("warning: budget infeasible (stage 1 alone exceeds it)", err=True)
    r = result.report
    click.echo(
        f"policy {['-inf' if t == float('-inf') else f'{t:.4f}' for t in result.policy.thresholds]}"
        f" reward {r.reward:.6g} expected cost {r.expected_total_cost:.6g}"
        f" feasible {result.feasible} ({result.evaluations} evaluations)"
    )
    click.echo(f"wrote {out}")


def _parse_policy_argument(text: str) -> Policy:
    candidate = Path(text)
    if candidate.exists():
        data = json.loads(candidate.read_text(encoding="utf-8"))
        values = data["policy"] if isinstance(data, dict) else data
    else:
        values = [v.strip() for v in text.split(",") if v.strip()]
    if not values:
        raise click.UsageError("--policy needs at least one threshold")
    try:
        return Policy(tuple(float(v) for v in values))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad --policy value: {exc}") from exc


@main.command()
@click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--policy", "policy_arg", type=str, default=None,
              help="Comma-separated thresholds (-inf allowed) or a result JSON path.")
@click.option("--baseline", "baseline_rs", type=click.FloatRange(0.0, 1.0, min_open=True), default=None,
              help="Top-fraction kept per stage.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def simulate(table_path, policy_arg, baseline_rs, config_path, out):
    """Run a policy or the top-fraction baseline over a score table."""
    if (policy_arg is None) == (baseline_rs is None):
        raise click.UsageError("exactly one of --policy or --baseline is required")
    config = load_campaign(config_path)
    _echo_config(
        {
            "command": "simulate",
            "table": str(table_path),
            "policy": policy_arg,
            "baseline": baseline_rs,
            "pipeline": effective_config_dict(config)["pipeline"],
        }
    )
    table = hio.load_score_table(table_path)
    if policy_arg is not None:
        report = run_policy(table, config.pipeline, _parse_policy_argument(policy_arg))
    else:
        report = run_baseline(table, config.pipeline, baseline_rs)
    hio.write_report(report, out, "json")
    savings = (
        f"{100 * report.savings_vs_reference:.2f}%"
        if report.savings_vs_reference is not None
        else "n/a"
    )
    click.echo(
        f"detected {report.detected} total cost {report.total_cost:.6g} savings {savings}"
    )
    click.echo(f"wrote {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--budgets", type=str, required=True, help="Comma-separated ascending budgets.")
@click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Optional table for empirical detection counts per budget.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@_threads_option
@_handle_errors
def sweep(config_path, budgets, table_path, out, fmt, threads):
    """Optimize across a ladder of budgets and save the performance curve."""
    values = [float(b) for b in budgets.split(",") if b.strip()]
    if not values:
        raise click.UsageError("--budgets must name at least one budget")
    config = load_campaign(config_path)
    config = replace(config, optimizer=replace(config.optimizer, threads=threads))
    payload = effective_config_dict(config)
    payload["budgets"] = values
    _echo_config(payload)
    model, _ = resolve_distribution(config)
    curve = budget_sweep(model, config.pipeline, values, config.optimizer, config.integration)
    if table_path is not None:
        curve = attach_empirical(curve, hio.load_score_table(table_path), config.pipeline)
    hio.write_report(curve, out, fmt)
    for p in curve.points:
        click.echo(f"budget {p.budget:.6g}: expected detected {p.expected_detected:.2f}")
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()

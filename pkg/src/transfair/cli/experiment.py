"""Experiment pipeline commands."""

from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import typer
from loguru import logger
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from ..config import EXPERIMENT_MODES, TrainConfig, load_config
from ..errors import TransfairError
from ..evalkit.report import EvalReport, compare_reports
from ..pipeline import (
    REPORT_FILE,
    attack,
    evaluate,
    load_prepared,
    prepare_split,
    run_experiment,
    train_source,
    transfer,
)
from ..settings import settings

console = Console()

MODES_HELP = ", ".join(EXPERIMENT_MODES)

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Experiment config file (key = value lines)")
SET_OPTION = typer.Option([], "--set", "-s", help="Override a config key, e.g. --set step1.lambda_a=5 (repeatable)")
SEED_OPTION = typer.Option(None, "--seed", help="Global seed (overrides the config file)")
MODE_OPTION = typer.Option(None, "--mode", help=f"Experiment mode: {MODES_HELP}")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory for artifacts")


@contextmanager
def handle_errors() -> Iterator[None]:
    """Report package errors on the console and exit with their code."""
    try:
        yield
    except TransfairError as e:
        logger.debug(f"{type(e).__name__}: {e}")
        console.print(f"[red]✗ {type(e).__name__}: {escape(str(e))}[/red]")
        raise typer.Exit(e.exit_code) from None


def _load(
    config_file: Path | None,
    overrides: list[str],
    seed: int | None,
    mode: str | None,
    out: Path | None,
) -> TrainConfig:
    return load_config(config_file, overrides, {"seed": seed, "mode": mode, "output_dir": out})


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.{settings.report_precision}f}"


def print_report(report: EvalReport) -> None:
    table = Table(title=f"{report.mode or 'report'} (seed {report.seed}, {len(report.users)} users)")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="green")
    for name in sorted(report.metrics):
        table.add_row(name, _fmt(report.metrics[name]))
    if report.attacker_auc is not None:
        table.add_row("attacker_auc", _fmt(report.attacker_auc))
    console.print(table)
    if report.skipped_users:
        console.print(f"[yellow]{report.skipped_users} users without a held-out item were skipped[/yellow]")


def split_command(
    config_file: Path | None = CONFIG_OPTION,
    overrides: list[str] = SET_OPTION,
    seed: int | None = SEED_OPTION,
    mode: str | None = MODE_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Cold-start split plus leave-one-out hold-out, written to split.tsv."""
    with handle_errors():
        config = _load(config_file, overrides, seed, mode, out)
        ds, split = prepare_split(config)

    table = Table(title=f"Split (seed {config.seed})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Count", justify="right", style="green")
    table.add_row("users", str(ds.n_users))
    table.add_row("items", str(ds.n_items))
    table.add_row("interactions", str(ds.n_interactions))
    table.add_row("source users", str(split.source_users.size))
    table.add_row("target users", str(split.target_users.size))
    table.add_row("dropped target users", str(len(split.dropped_users)))
    table.add_row("source catalog", str(split.catalog.size))
    console.print(table)
    console.print(f"[green]✓ Split written to {config.output_dir}[/green]")


def train_source_command(
    config_file: Path | None = CONFIG_OPTION,
    overrides: list[str] = SET_OPTION,
    seed: int | None = SEED_OPTION,
    mode: str | None = MODE_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Step 1: fair model on the source users, or the base model of a baseline mode."""
    with handle_errors():
        config = _load(config_file, overrides, seed, mode, out)
        result = train_source(config, load_prepared(config))

    history = result.history
    console.print(
        f"[green]✓ {config.mode}: {history.epochs_run} epochs, best epoch {history.best_epoch}[/green]"
    )
    if history.validation:
        best = max(ndcg for _, ndcg in history.validation)
        console.print(f"  best validation NDCG@{config.step1.eval_n}: {_fmt(best)}")


def transfer_command(
    config_file: Path | None = CONFIG_OPTION,
    overrides: list[str] = SET_OPTION,
    seed: int | None = SEED_OPTION,
    mode: str | None = MODE_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Step 2: target-user embeddings through the adversarially aligned mapping."""
    with handle_errors():
        config = _load(config_file, overrides, seed, mode, out)
        result = transfer(config, load_prepared(config))

    if result is None:
        console.print(f"[yellow]Mode {config.mode} has no transfer step; nothing to do[/yellow]")
        return
    history = result.history
    status = "converged" if history.converged else "did not converge"
    console.print(f"[green]✓ {config.step2.mode} transfer: {history.rounds_run} rounds, {status}[/green]")
    accuracies = [r.accuracy for r in history.rounds if r.accuracy is not None]
    if accuracies:
        console.print(f"  final domain accuracy: {_fmt(accuracies[-1])}")


def evaluate_command(
    config_file: Path | None = CONFIG_OPTION,
    overrides: list[str] = SET_OPTION,
    seed: int | None = SEED_OPTION,
    mode: str | None = MODE_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Sampled NDCG@N and Hit@N on the target users' test items."""
    with handle_errors():
        config = _load(config_file, overrides, seed, mode, out)
        report = evaluate(config, load_prepared(config))
    print_report(report)


def attack_command(
    config_file: Path | None = CONFIG_OPTION,
    overrides: list[str] = SET_OPTION,
    seed: int | None = SEED_OPTION,
    mode: str | None = MODE_OPTION,
    out: Path | None = OUT_OPTION,
) -> None:
    """Sensitive-attribute attacker AUC on the target users' embeddings."""
    with handle_errors():
        config = _load(config_file, overrides, seed, mode, out)
        report = attack(config, load_prepared(config))
    print_report(report)


def run_command(
    seed: int = typer.Option(..., "--seed", help="Global seed"),
    mode: str = typer.Option(..., "--mode", help=f"Experiment mode: {MODES_HELP}"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory for artifacts"),
    config_file: Path | None = CONFIG_OPTION,
    overrides: list[str] = SET_OPTION,
) -> None:
    """Run every stage in order: split, train-source, transfer, evaluate, attack.

    Examples:
        # Synthetic planted-attribute benchmark
        transfair run --seed 1 --mode tfr_unsupervised --out runs/syn --set dataset.synthetic=true

        # MovieLens-1M with a config file
        transfair run -c configs/ml1m.conf --seed 1 --mode tfr_supervised --out runs/ml1m-sup
    """
    with handle_errors():
        config = _load(config_file, overrides, seed, mode, out)
        report = run_experiment(config)
    print_report(report)
    console.print(f"[green]✓ Report written to {Path(config.output_dir) / REPORT_FILE}[/green]")


def report_diff(
    first: Path = typer.Argument(..., help="Report A (report.json)"),
    second: Path = typer.Argument(..., help="Report B (report.json)"),
    metric: str = typer.Option("ndcg@10", "--metric", "-m", help="Per-user metric to compare"),
    alpha: float = typer.Option(0.05, "--alpha", help="Significance level"),
) -> None:
    """Paired t-test of A - B on a per-user metric over the users both reports share."""
    with handle_errors():
        a = EvalReport.read(first)
        b = EvalReport.read(second)
        result = compare_reports(a, b, metric, alpha)

    table = Table(title=f"{metric}: {first} vs {second}")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right", style="green")
    table.add_row("shared users", str(result.n))
    table.add_row("mean A", _fmt(a.metrics.get(metric)))
    table.add_row("mean B", _fmt(b.metrics.get(metric)))
    table.add_row("mean difference", _fmt(result.mean_difference))
    table.add_row("t statistic", "undefined" if result.degenerate else _fmt(result.statistic))
    table.add_row("p-value", "undefined" if result.degenerate else _fmt(result.p_value))
    table.add_row(f"significant (alpha={alpha})", "yes" if result.significant else "no")
    console.print(table)

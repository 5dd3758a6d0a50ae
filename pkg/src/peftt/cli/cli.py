"""peftt command line."""

import importlib.metadata
import sys
from collections.abc import Sequence
from functools import partial
from pathlib import Path
from typing import Annotated, Any

import anyio
import click
import typer
from pydantic import ValidationError
from rich.console import Console

from peftt.accounting import accounting_table, ratio_report, render_rows
from peftt.cli.runs import RunConfig, SplitName, check_run, evaluate_run, load_config_file, run_single
from peftt.cli.sweep import run_repeats
from peftt.data.corpus import write_tncc
from peftt.data.synthetic import SyntheticSpec, synthesize_corpus
from peftt.exceptions import PefttError
from peftt.model.config import get_catalog_entry
from peftt.settings import Settings
from peftt.training.scenarios import Mode
from peftt.utilities.logging import LogLevel, configure_logging, get_logger

if sys.version_info < (3, 11):
    from exceptiongroup import BaseExceptionGroup

logger = get_logger("cli")

app = typer.Typer(
    name="peftt",
    help="Parameter-efficient fine-tuning of a desk-scale encoder",
    add_completion=False,
    no_args_is_help=True,
)


def _console() -> Console:
    return Console(width=200, color_system=None)


def _setup_logging(log_level: str | None) -> Settings:
    settings = Settings()
    level: LogLevel = log_level.upper() if log_level else settings.log_level  # type: ignore[assignment]
    configure_logging(level)
    return settings


@app.command()
def version() -> None:
    """Show the peftt version."""
    try:
        print(f"peftt version {importlib.metadata.version('peftt')}")
    except importlib.metadata.PackageNotFoundError:
        print("peftt version unknown (package not installed)")


@app.command()
def train(
    scenario: Annotated[str | None, typer.Option("--scenario", "-s", help="Scenario such as TBAP-desk")] = None,
    model: Annotated[str | None, typer.Option(help="'desk' or a catalog key with a -desk suffix")] = None,
    mode: Annotated[str | None, typer.Option(help="full, prompt, adapter or adapter_prompt")] = None,
    rank: Annotated[int | None, typer.Option(help="Adapter rank")] = None,
    lr: Annotated[float | None, typer.Option(help="Learning rate; defaults depend on family and mode")] = None,
    batch_size: Annotated[int | None, typer.Option(help="Training batch size")] = None,
    epochs: Annotated[int | None, typer.Option(help="Training epochs")] = None,
    max_len: Annotated[int | None, typer.Option(help="Padded input length")] = None,
    seed: Annotated[int | None, typer.Option(help="Seed for splits, initialisation and shuffling")] = None,
    corpus: Annotated[
        str | None, typer.Option(help="Labelled file, three comma-separated files, or synthetic:CxN[xM]")
    ] = None,
    template: Annotated[Path | None, typer.Option(help="Template file containing {mask} and {text}")] = None,
    verbalizer: Annotated[Path | None, typer.Option(help="Label words file: label<TAB>word,word")] = None,
    delimiter: Annotated[str | None, typer.Option(help="Field delimiter of corpus files")] = None,
    label_map: Annotated[Path | None, typer.Option(help="File with one label per line fixing the label order")] = None,
    out: Annotated[Path, typer.Option(help="Output directory")] = Path("runs/latest"),
    repeats: Annotated[int | None, typer.Option(help="Independent runs with consecutive seeds")] = None,
    adapter_mode: Annotated[str | None, typer.Option(help="parallel_lora or sequential")] = None,
    warmup_epochs: Annotated[
        int | None, typer.Option(help="MLM warm-up epochs of the base on the training titles; 0 disables it")
    ] = None,
    warmup_lr: Annotated[float | None, typer.Option(help="Learning rate of the MLM warm-up")] = None,
    config: Annotated[Path | None, typer.Option(help="TOML file with any of these options")] = None,
    log_level: Annotated[str | None, typer.Option(help="DEBUG, INFO, WARNING or ERROR")] = None,
) -> None:
    """Fine-tune one scenario and write report, vocabulary and checkpoint."""
    settings = _setup_logging(log_level)
    values: dict[str, Any] = load_config_file(config) if config else {}
    if "max_len" not in values:
        values["max_len"] = settings.default_max_len
    flags = {
        "scenario": scenario,
        "model": model,
        "mode": mode,
        "rank": rank,
        "lr": lr,
        "batch_size": batch_size,
        "epochs": epochs,
        "max_len": max_len,
        "seed": seed,
        "corpus": corpus,
        "template": template,
        "verbalizer": verbalizer,
        "delimiter": delimiter.replace("\\t", "\t") if delimiter else None,
        "label_map": label_map,
        "repeats": repeats,
        "adapter_mode": adapter_mode,
        "warmup_epochs": warmup_epochs,
        "warmup_lr": warmup_lr,
    }
    values.update({key: value for key, value in flags.items() if value is not None})
    run_config = RunConfig.model_validate(values)
    logger.debug("Starting training", extra={"config": run_config.model_dump(mode="json"), "out": str(out)})

    if run_config.repeats > 1:
        check_run(run_config)
        summary = anyio.run(partial(run_repeats, threads=settings.threads), run_config, out, run_config.repeats)
        for name, stats in summary.metrics.items():
            spread = " ".join(f"{key}={value:.5f}" for key, value in stats.items())
            print(f"{name}: {spread}")
        return

    report = run_single(run_config, out)
    _console().print(report.to_table())


@app.command(name="eval")
def evaluate_command(
    run_dir: Annotated[Path, typer.Option(help="Directory written by train", exists=True, file_okay=False)],
    split: Annotated[str, typer.Option(help="train, validation or test")] = "test",
    checkpoint: Annotated[Path | None, typer.Option(help="Checkpoint to use instead of the run's own")] = None,
    log_level: Annotated[str | None, typer.Option(help="DEBUG, INFO, WARNING or ERROR")] = None,
) -> None:
    """Re-evaluate a trained run on one split."""
    _setup_logging(log_level)
    if split not in ("train", "validation", "test"):
        raise typer.BadParameter(f"unknown split {split!r}", param_hint="--split")
    split_name: SplitName = split  # type: ignore[assignment]
    acc, f1 = evaluate_run(run_dir, split_name, checkpoint)
    print(f"{split}_acc={acc:.6f} {split}_macro_f1={f1:.6f}")


@app.command()
def account(
    model: Annotated[str | None, typer.Option(help="Catalog key; omit to list every model and mode")] = None,
    rank: Annotated[int, typer.Option(help="Adapter rank", min=0)] = 8,
    mode: Annotated[str, typer.Option(help="full, prompt, adapter or adapter_prompt")] = "adapter",
    notes: Annotated[bool, typer.Option(help="Show notes on published counts")] = True,
) -> None:
    """Print trainable-parameter counts and ratios."""
    if mode not in ("full", "prompt", "adapter", "adapter_prompt"):
        raise typer.BadParameter(f"unknown mode {mode!r}", param_hint="--mode")
    run_mode: Mode = mode  # type: ignore[assignment]
    if model is None:
        rows = accounting_table(rank)
    else:
        get_catalog_entry(model)
        rows = [ratio_report(model, rank, run_mode)]
    print(render_rows(rows, show_notes=notes), end="")


@app.command()
def synth(
    out: Annotated[Path, typer.Option(help="Corpus file to write")],
    classes: Annotated[int, typer.Option(help="Number of classes", min=2)] = 12,
    per_class: Annotated[int, typer.Option(help="Titles per class", min=1)] = 50,
    seed: Annotated[int, typer.Option(help="Generator seed")] = 0,
    weights: Annotated[str | None, typer.Option(help="Comma-separated relative class sizes")] = None,
    delimiter: Annotated[str, typer.Option(help="Field delimiter")] = "\t",
) -> None:
    """Write a synthetic labelled corpus."""
    spec = SyntheticSpec(class_weights=[float(w) for w in weights.split(",")] if weights else None)
    examples, names = synthesize_corpus(classes, per_class, spec, seed=seed)
    write_tncc(out, examples, names, delimiter=delimiter.replace("\\t", "\t"))
    print(f"wrote {len(examples)} titles in {len(names)} classes to {out}")


def _single_error(group: BaseExceptionGroup) -> BaseException:
    """The lone exception inside nested single-member groups, or `group` itself."""
    error: BaseException = group
    while isinstance(error, BaseExceptionGroup) and len(error.exceptions) == 1:
        error = error.exceptions[0]
    return error


def run(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code.

    Usage errors exit with 2; domain, validation and I/O errors print a
    one-line diagnostic to stderr and exit with 1.
    Errors raised inside a task group, as repeated runs do, are unwrapped first.
    """
    try:
        try:
            result = app(args=list(argv) if argv is not None else None, standalone_mode=False)
        except BaseExceptionGroup as group:
            error = _single_error(group)
            if error is group:
                raise
            raise error from group
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        print("Aborted!", file=sys.stderr)
        return 1
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        print(f"error: invalid {location or 'value'}: {first['msg']}", file=sys.stderr)
        return 1
    except (PefttError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())

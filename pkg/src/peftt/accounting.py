"""Closed-form trainable-parameter accounting for the published encoders.

Parallel adapters on the attention-output projection (d x d) and the second
feed-forward projection (d x d_ff) add, per layer, 2dr and r(d_ff + d)
parameters. With the standard hidden sizes of the catalog, r = 8 is the only
rank that reproduces every published adapter count
(258048, 516096 three times, 1376256); `solve_rank` performs that inversion.
"""

from __future__ import annotations

from io import StringIO

from pydantic import BaseModel, Field
from rich.console import Console
from rich.table import Table

from peftt.exceptions import AccountingError
from peftt.model.config import MODEL_CATALOG, EncoderConfig, get_catalog_entry
from peftt.model.encoder import ClassifierHead, MlmHead, count_parameters
from peftt.training.scenarios import MODE_SUFFIXES, MODEL_PREFIXES, Mode

PUBLISHED_CLASSES = 12


class PublishedCounts(BaseModel):
    """Full and prompt-mode trainable counts as printed for one encoder."""

    full: int
    prompt: int
    ratio_denominator: int | None = Field(
        default=None, description="Denominator that reproduces the printed adapter ratios, when it is not `full`"
    )
    note: str | None = None


PUBLISHED_COUNTS: dict[str, PublishedCounts] = {
    "cino-small": PublishedCounts(full=147737868, prompt=147865535),
    "cino-base": PublishedCounts(full=190523148, prompt=190650815),
    "cino-large": PublishedCounts(full=443884556, prompt=444009663),
    "tibert": PublishedCounts(full=109610508, prompt=109632821),
    "tibetan-bert": PublishedCounts(
        full=11347724,
        prompt=11372299,
        ratio_denominator=111347724,
        note=(
            "the full count is printed as 11347724, but the printed adapter ratio 0.463499% "
            "only holds against 111347724, which also matches a BERT-base-sized encoder; "
            "adapter ratios here use 111347724"
        ),
    ),
}


class AccountingRow(BaseModel):
    """One row of a parameter table; `ratio` is exactly trainable / full."""

    scenario: str
    mode: Mode
    trainable: int = Field(ge=0)
    full: int = Field(gt=0)
    ratio: float
    ratio_text: str
    notes: list[str] = Field(default_factory=list)


def adapter_count(config: EncoderConfig, rank: int) -> int:
    """Parameters of parallel adapters of rank `rank` on every layer."""
    if rank < 0:
        raise AccountingError(f"rank must be non-negative, got {rank}")
    d, d_ff, layers = config.d_model, config.d_ff, config.n_layers
    return layers * (2 * d * rank) + layers * (rank * d_ff + rank * d)


def solve_rank(config: EncoderConfig, target: int) -> int | None:
    """The rank whose adapter count is exactly `target`, or None."""
    if target < 0:
        raise AccountingError(f"target count must be non-negative, got {target}")
    per_rank = adapter_count(config, 1)
    if per_rank == 0:
        return 0 if target == 0 else None
    rank, remainder = divmod(target, per_rank)
    return rank if remainder == 0 else None


def format_ratio(ratio: float, mode: Mode) -> str:
    """Adapter ratios as a percentage, full as 1, prompt as a plain number; 6 significant digits."""
    if mode == "full":
        return "1"
    if mode == "prompt":
        return f"{ratio:.6g}"
    return f"{ratio * 100:.6g}%"


def _computed_note(key: str, config: EncoderConfig, published: int) -> str:
    computed = count_parameters(config, ClassifierHead(n_classes=PUBLISHED_CLASSES))
    return (
        f"computed full count for {key} with a {PUBLISHED_CLASSES}-class head: {computed} "
        f"(published {published}, difference {computed - published:+d})"
    )


def ratio_report(model: str | EncoderConfig, rank: int = 8, mode: Mode = "adapter") -> AccountingRow:
    """Trainable count and ratio for a catalog model or a custom config."""
    if isinstance(model, EncoderConfig):
        classifier_full = count_parameters(model, ClassifierHead(n_classes=PUBLISHED_CLASSES))
        if mode == "full":
            trainable = full = classifier_full
        elif mode == "prompt":
            trainable = full = count_parameters(model, MlmHead())
        else:
            trainable, full = adapter_count(model, rank), classifier_full
        ratio = trainable / full
        return AccountingRow(
            scenario=f"custom-{mode}",
            mode=mode,
            trainable=trainable,
            full=full,
            ratio=ratio,
            ratio_text=format_ratio(ratio, mode),
        )

    entry = get_catalog_entry(model)
    published = PUBLISHED_COUNTS[model]
    notes = [_computed_note(model, entry.config, published.full)]
    full = published.full
    if mode == "full":
        trainable = published.full
    elif mode == "prompt":
        trainable = published.prompt
        notes.append("prompt-mode count reproduced as published")
    else:
        trainable = adapter_count(entry.config, rank)
        if published.ratio_denominator is not None:
            full = published.ratio_denominator
    if published.note is not None:
        notes.append(published.note)
    if entry.config.inferred_dims:
        notes.append("hidden sizes inferred from the model family")
    ratio = trainable / full
    return AccountingRow(
        scenario=f"{MODEL_PREFIXES[model]}{MODE_SUFFIXES[mode]}",
        mode=mode,
        trainable=trainable,
        full=full,
        ratio=ratio,
        ratio_text=format_ratio(ratio, mode),
        notes=notes,
    )


def accounting_table(rank: int = 8) -> list[AccountingRow]:
    """Every model in every mode, in catalog order."""
    return [ratio_report(key, rank, mode) for key in MODEL_CATALOG for mode in MODE_SUFFIXES]


def rows_table(rows: list[AccountingRow], *, show_notes: bool = True) -> Table:
    table = Table(title="Trainable parameters")
    table.add_column("Situation", no_wrap=True)
    table.add_column("Training Parameters", justify="right", no_wrap=True)
    table.add_column("Full Parameters", justify="right", no_wrap=True)
    table.add_column("Training Parameters Ratio", justify="right", no_wrap=True)
    if show_notes:
        table.add_column("Notes")
    for row in rows:
        cells = [row.scenario, str(row.trainable), str(row.full), row.ratio_text]
        if show_notes:
            cells.append("; ".join(row.notes))
        table.add_row(*cells)
    return table


def render_rows(rows: list[AccountingRow], *, show_notes: bool = True, width: int = 200) -> str:
    buffer = StringIO()
    Console(file=buffer, width=width, color_system=None).print(rows_table(rows, show_notes=show_notes))
    return buffer.getvalue()

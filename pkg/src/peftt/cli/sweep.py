"""Repeated runs over consecutive seeds, one worker process per run."""

from __future__ import annotations

from pathlib import Path

import anyio
import anyio.to_process
from pydantic import BaseModel

from peftt.cli.runs import RunConfig, run_single_json
from peftt.metrics import summarize
from peftt.training.trainer import TrainReport
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

SUMMARY_FILE = "summary.json"
SUMMARY_METRICS = ("val_acc", "val_macro_f1", "test_acc", "test_macro_f1")


class SweepSummary(BaseModel):
    scenario: str
    seeds: list[int]
    metrics: dict[str, dict[str, float]]
    reports: list[TrainReport]


async def run_repeats(config: RunConfig, out_dir: Path, repeats: int, *, threads: int = 1) -> SweepSummary:
    """Train `repeats` times with seeds seed, seed+1, ... into `out_dir/run-<i>`.

    At most `threads` runs execute at once. The summary is also written to
    `out_dir/summary.json`.
    """
    limiter = anyio.CapacityLimiter(max(1, threads))
    reports: dict[int, TrainReport] = {}

    async def one(index: int) -> None:
        run_config = config.model_copy(update={"seed": config.seed + index, "repeats": 1})
        payload = await anyio.to_process.run_sync(
            run_single_json, run_config.model_dump_json(), str(out_dir / f"run-{index}"), limiter=limiter
        )
        reports[index] = TrainReport.model_validate_json(payload)
        logger.info(f"Repeat {index + 1}/{repeats} finished (seed {run_config.seed})")

    async with anyio.create_task_group() as tg:
        for index in range(repeats):
            tg.start_soon(one, index)

    ordered = [reports[i] for i in range(repeats)]
    summary = SweepSummary(
        scenario=ordered[0].scenario,
        seeds=[report.seed for report in ordered],
        metrics={name: summarize([getattr(report, name) for report in ordered]) for name in SUMMARY_METRICS},
        reports=ordered,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / SUMMARY_FILE).write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    return summary

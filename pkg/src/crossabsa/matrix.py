"""Multi-seed transfer-matrix and generation-count sweep runners.

A matrix cell is one transfer pair run once per seed; cells fail independently
without aborting the matrix. Results render both as structured dicts and as an
aligned text table with one column per pair plus the row average.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .core import Split, Task, TransferPair
from .pipeline import Mode, PipelineConfig, PipelineError, run_pipeline

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class DataLayout:
    """Directory convention mapping (task, domain, split) to corpus files."""

    root: Path
    task: Task

    def path(self, domain: str, split: Split) -> Path:
        return Path(self.root) / f"{self.task.value}_{domain}_{split.value}.jsonl"


@dataclass(frozen=True)
class CellResult:
    pair: TransferPair
    seed_f1: tuple[float, ...]
    error: str | None = None

    @property
    def mean_f1(self) -> float | None:
        if self.error is not None or not self.seed_f1:
            return None
        return sum(self.seed_f1) / len(self.seed_f1)


@dataclass(frozen=True)
class MatrixResult:
    task: Task
    mode: Mode
    seeds: tuple[int, ...]
    cells: tuple[CellResult, ...]

    @property
    def average(self) -> float | None:
        means = [c.mean_f1 for c in self.cells if c.mean_f1 is not None]
        return sum(means) / len(means) if means else None

    @property
    def complete(self) -> bool:
        return all(c.error is None for c in self.cells)

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "mode": self.mode.value,
            "seeds": list(self.seeds),
            "cells": [
                {
                    "pair": str(c.pair),
                    "seed_f1": list(c.seed_f1),
                    "mean_f1": c.mean_f1,
                    "error": c.error,
                }
                for c in self.cells
            ],
            "average": self.average,
            "complete": self.complete,
        }

    def to_text_table(self) -> str:
        headers = [str(c.pair) for c in self.cells] + ["Avg."]
        values = [
            "failed" if c.mean_f1 is None else f"{100 * c.mean_f1:.2f}" for c in self.cells
        ]
        values.append("n/a" if self.average is None else f"{100 * self.average:.2f}")
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        body = "  ".join(v.rjust(w) for v, w in zip(values, widths))
        title = f"{self.task.value} / {self.mode.value} (mean F1 over {len(self.seeds)} seeds, %)"
        return "\n".join([title, head, body])


def config_for_pair(
    base: PipelineConfig, pair: TransferPair, layout: DataLayout
) -> PipelineConfig:
    """Point a config template at one transfer pair's corpus files."""
    dev_path = layout.path(pair.source, Split.DEV)
    return replace(
        base,
        task=layout.task,
        source_train=layout.path(pair.source, Split.TRAIN),
        source_dev=dev_path if dev_path.exists() else None,
        target_unlabeled=layout.path(pair.target, Split.TRAIN),
        target_test=layout.path(pair.target, Split.TEST),
    )


def run_transfer_matrix(
    task: Task,
    pairs: Sequence[TransferPair],
    base_cfg: PipelineConfig,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    make_cfg: Callable[[TransferPair], PipelineConfig] | None = None,
) -> MatrixResult:
    """Mean target-test F1 per transfer pair over the given seeds.

    ``make_cfg`` resolves the per-pair config (defaults to treating base_cfg's
    corpus refs as a DataLayout is not available; pass one built from
    :func:`config_for_pair` for file-based layouts). A failing cell is recorded
    with its error and the matrix continues.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    cells = []
    for pair in pairs:
        cfg = make_cfg(pair) if make_cfg is not None else base_cfg
        scores: list[float] = []
        error = None
        for seed in seeds:
            try:
                _, report = run_pipeline(cfg.reseeded(seed))
                evaluation = report.evaluation or {}
                test = evaluation.get("test")
                if test is None:
                    raise PipelineError(f"no target test corpus for {pair}")
                scores.append(test["f1"])
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                logger.warning("matrix cell %s seed %d failed: %s", pair, seed, exc)
                error = f"seed {seed}: {exc}"
                break
        cells.append(
            CellResult(pair, tuple(scores) if error is None else (), error=error)
        )
    return MatrixResult(task=task, mode=base_cfg.mode, seeds=tuple(seeds), cells=tuple(cells))


@dataclass(frozen=True)
class SweepRow:
    generation_count: int
    f1: float
    retained: int
    candidates: int

    def to_dict(self) -> dict:
        return {
            "generation_count": self.generation_count,
            "f1": self.f1,
            "retained": self.retained,
            "candidates": self.candidates,
        }


def run_generation_sweep(
    base_cfg: PipelineConfig,
    counts: Sequence[int],
    include_source: bool = False,
) -> list[SweepRow]:
    """Vary the pseudo-label cap and report final F1 for each count.

    Mirrors the generated-sample analysis protocol: by default the source data
    is excluded from final training so only generated pairs drive the model.
    """
    if not counts:
        raise ValueError("at least one generation count is required")
    rows = []
    for count in counts:
        cfg = replace(
            base_cfg,
            mode=Mode.BGCA,
            generation_count=count,
            include_source_in_final=include_source,
        )
        _, report = run_pipeline(cfg)
        test = (report.evaluation or {}).get("test")
        if test is None:
            raise PipelineError("sweep requires a target test corpus")
        rows.append(
            SweepRow(
                generation_count=count,
                f1=test["f1"],
                retained=report.filter["retained"],
                candidates=report.generation["candidates"],
            )
        )
    return rows

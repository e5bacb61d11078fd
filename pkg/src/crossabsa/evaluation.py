"""Exact-match micro-F1 and sentence-group accuracy.

A predicted tuple counts only if every element matches a gold tuple exactly
(after the same lowercase/whitespace normalization used everywhere else).
Duplicates on either side collapse before counting; all metrics are micro over
the whole corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import SchemaViolationError, SentimentTuple, Task, tuple_conforms

TupleSets = Sequence[Iterable[SentimentTuple]]


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    true_positives: int
    predicted_count: int
    gold_count: int

    def __post_init__(self) -> None:
        if self.true_positives > min(self.predicted_count, self.gold_count):
            raise ValueError("true positives exceed prediction or gold counts")


@dataclass(frozen=True)
class GroupStat:
    correct: int
    total: int

    @property
    def accuracy(self) -> float | None:
        return None if self.total == 0 else self.correct / self.total


@dataclass(frozen=True)
class GroupAccuracy:
    """Sentence-level accuracy split by gold aspect count: zero, one, many."""

    zero: GroupStat
    single: GroupStat
    multiple: GroupStat


def _dedupe(tuples: Iterable[SentimentTuple]) -> set[SentimentTuple]:
    return set(tuples)


def micro_f1(
    predictions: TupleSets, golds: TupleSets, task: Task | None = None
) -> EvalResult:
    """Corpus-level exact-match precision, recall and F1.

    F1 is zero when precision and recall are both zero. When ``task`` is
    given, gold tuples must conform to its element shape.
    """
    if len(predictions) != len(golds):
        raise ValueError(
            f"prediction and gold counts differ: {len(predictions)} vs {len(golds)}"
        )
    tp = pred_count = gold_count = 0
    for pred, gold in zip(predictions, golds):
        pred_set = _dedupe(pred)
        gold_set = _dedupe(gold)
        if task is not None:
            for t in gold_set:
                if not tuple_conforms(t, task):
                    raise SchemaViolationError(
                        f"gold tuple {t!r} does not match {task.value}"
                    )
        tp += len(pred_set & gold_set)
        pred_count += len(pred_set)
        gold_count += len(gold_set)
    precision = tp / pred_count if pred_count else 0.0
    recall = tp / gold_count if gold_count else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalResult(precision, recall, f1, tp, pred_count, gold_count)


def sentence_group_accuracy(predictions: TupleSets, golds: TupleSets) -> GroupAccuracy:
    """Fraction of sentences whose predicted set equals gold exactly, per group.

    A sentence is correct only when the two sets match; an empty prediction on
    an aspect-free sentence counts as correct in the zero group.
    """
    if len(predictions) != len(golds):
        raise ValueError(
            f"prediction and gold counts differ: {len(predictions)} vs {len(golds)}"
        )
    correct = {"zero": 0, "single": 0, "multiple": 0}
    total = {"zero": 0, "single": 0, "multiple": 0}
    for pred, gold in zip(predictions, golds):
        pred_set = _dedupe(pred)
        gold_set = _dedupe(gold)
        if len(gold_set) == 0:
            group = "zero"
        elif len(gold_set) == 1:
            group = "single"
        else:
            group = "multiple"
        total[group] += 1
        if pred_set == gold_set:
            correct[group] += 1
    return GroupAccuracy(
        zero=GroupStat(correct["zero"], total["zero"]),
        single=GroupStat(correct["single"], total["single"]),
        multiple=GroupStat(correct["multiple"], total["multiple"]),
    )

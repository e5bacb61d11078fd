"""Bidirectional augmentation pipeline and its ablation modes.

The full run trains text-to-label on labeled source data, pseudo-labels the
unlabeled target sentences under constrained decoding, continues training the
same parameters label-to-text, regenerates a sentence for each pseudo label,
keeps only pairs that survive three consistency checks, and trains text-to-label
one last time on source plus the retained pairs. Ablation modes swap the
regeneration step for plain self-training, skip augmentation entirely, or
re-initialize parameters between stages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from .core import Corpus, SentimentTuple, Task, normalize_text, tuple_conforms
from .data import load_corpus, split_dev
from .decoding import LABEL_MAX_LEN, SENTENCE_MAX_LEN, constrained_generate, free_generate
from .evaluation import micro_f1, sentence_group_accuracy
from .model import (
    Seq2SeqModel,
    ToyBackbone,
    ToyBackboneConfig,
    TrainConfig,
    Vocabulary,
    create_backbone,
)
from .tagging import FormatError, TaggedSequence, parse, serialize, tagger_vocabulary

logger = logging.getLogger(__name__)

CorpusRef = "Corpus | str | Path"


class PipelineError(RuntimeError):
    """A stage failed; carries the report of the stages completed so far."""

    def __init__(self, message: str, partial_report: dict | None = None):
        super().__init__(message)
        self.partial_report = partial_report or {}


class Mode(Enum):
    """Pipeline variants: the full bidirectional run and its ablations."""

    BGCA = "bgca"
    TEXT_TO_LABEL_ONLY = "text-to-label"
    SELF_TRAINING = "self-training"
    NO_SHARING = "no-sharing"


class FilterStatus(Enum):
    RETAINED = "retained"
    BAD_FORMAT = "bad_format"
    MISSING_WORDS = "missing_words"
    ROUNDTRIP_MISMATCH = "roundtrip_mismatch"


@dataclass(frozen=True)
class PseudoLabeled:
    """An unlabeled target sentence with its constrained-decoded label."""

    sentence: tuple[str, ...]
    label: TaggedSequence
    tuples: tuple[SentimentTuple, ...] | None  # None when the label does not parse

    @property
    def parseable(self) -> bool:
        return self.tuples is not None

    @property
    def is_empty(self) -> bool:
        return self.tuples == ()


@dataclass(frozen=True)
class GeneratedPair:
    """A candidate augmentation pair: pseudo label plus regenerated sentence."""

    label: TaggedSequence
    sentence: tuple[str, ...]
    status: FilterStatus | None = None
    roundtrip_tuple_match: bool | None = None


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to run one transfer: data refs, mode, hyperparameters.

    Corpus refs may be in-memory corpora or paths to canonical corpus files.
    ``seed`` drives model initialization; per-stage shuffling seeds live in the
    stage TrainConfigs (see :meth:`reseeded` for the convention the CLI uses).
    """

    task: Task
    mode: Mode
    source_train: object
    target_unlabeled: object
    source_dev: object | None = None
    target_test: object | None = None
    backbone_kind: str = "toy"
    backbone: ToyBackboneConfig = ToyBackboneConfig()
    stage1: TrainConfig = TrainConfig()
    stage2: TrainConfig = TrainConfig()
    final: TrainConfig = TrainConfig()
    epoch_grid: tuple[int, ...] | None = None
    generation_count: int | None = None
    include_source_in_final: bool = True
    reinit_before_final: bool = False
    label_max_len: int = LABEL_MAX_LEN
    sentence_max_len: int = SENTENCE_MAX_LEN
    seed: int = 0

    def __post_init__(self) -> None:
        if self.generation_count is not None and self.generation_count < 0:
            raise ValueError("generation_count must be non-negative")

    def reseeded(self, seed: int) -> PipelineConfig:
        """Rewrite all seeds from one run seed: init uses it, stages offset it."""
        return replace(
            self,
            seed=seed,
            backbone=replace(self.backbone, seed=seed),
            stage1=replace(self.stage1, seed=seed + 1),
            stage2=replace(self.stage2, seed=seed + 2),
            final=replace(self.final, seed=seed + 3),
        )


@dataclass(frozen=True)
class StageRecord:
    name: str
    epochs: int
    final_loss: float
    loss_curve: tuple[float, ...]
    selected_epochs: int | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "epochs": self.epochs,
            "final_loss": self.final_loss,
            "loss_curve": list(self.loss_curve),
            "selected_epochs": self.selected_epochs,
        }


@dataclass
class RunReport:
    """Deterministic record of one pipeline run (no wall-clock fields)."""

    mode: str
    task: str
    source_domain: str
    target_domain: str
    seed: int
    stage_seeds: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    pseudo: dict | None = None
    generation: dict | None = None
    filter: dict | None = None
    evaluation: dict | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "task": self.task,
            "source_domain": self.source_domain,
            "target_domain": self.target_domain,
            "seed": self.seed,
            "stage_seeds": self.stage_seeds,
            "counts": self.counts,
            "stages": [s.to_dict() for s in self.stages],
            "pseudo": self.pseudo,
            "generation": self.generation,
            "filter": self.filter,
            "evaluation": self.evaluation,
        }


# -- stage operations ----------------------------------------------------------


def training_pairs(corpus: Corpus, task: Task, reverse: bool = False) -> list[tuple]:
    """(sentence, label) token pairs for a labeled corpus; reversed for label-to-text."""
    pairs = []
    for ex in corpus:
        label = serialize(ex.tuples, task).tokens
        pairs.append((label, ex.sentence) if reverse else (ex.sentence, label))
    return pairs


def _fit_with_grid(
    model: Seq2SeqModel,
    pairs: Sequence[tuple],
    cfg: TrainConfig,
    grid: Sequence[int] | None,
    scorer,
    stage_name: str,
) -> tuple[Seq2SeqModel, StageRecord]:
    """Fit once, or once per grid entry keeping the best-scoring epoch count."""
    if not grid:
        result = model.fit(pairs, cfg)
        record = StageRecord(stage_name, cfg.epochs, result.final_loss, result.epoch_losses)
        return model, record
    best = None
    for epochs in grid:
        candidate = model.clone()
        result = candidate.fit(pairs, replace(cfg, epochs=epochs))
        score = scorer(candidate)
        logger.info("%s: epochs=%d score=%.4f", stage_name, epochs, score)
        if best is None or score > best[0]:
            best = (score, epochs, candidate, result)
    _, epochs, chosen, result = best
    record = StageRecord(
        stage_name, epochs, result.final_loss, result.epoch_losses, selected_epochs=epochs
    )
    return chosen, record


def stage1_text_to_label(
    model: Seq2SeqModel,
    source: Corpus,
    task: Task,
    cfg: TrainConfig,
    dev: Corpus | None = None,
    epoch_grid: Sequence[int] | None = None,
    max_label_len: int = LABEL_MAX_LEN,
) -> tuple[Seq2SeqModel, StageRecord]:
    """Fit sentence -> label on labeled source data."""
    if len(source) == 0:
        raise ValueError("source corpus is empty")
    pairs = training_pairs(source, task)
    scorer = None
    if epoch_grid:
        if dev is None:
            raise ValueError("epoch-grid selection needs a dev corpus")
        scorer = lambda m: _dev_f1(m, dev, task, max_label_len)
    return _fit_with_grid(model, pairs, cfg, epoch_grid, scorer, "text_to_label")


def stage2_label_to_text(
    model: Seq2SeqModel,
    source: Corpus,
    task: Task,
    cfg: TrainConfig,
    dev: Corpus | None = None,
    epoch_grid: Sequence[int] | None = None,
) -> tuple[Seq2SeqModel, StageRecord]:
    """Continue fitting the given model on reversed (label -> sentence) pairs.

    Callers pick the parameter state: the shared model for the full run, or a
    freshly initialized one for the no-sharing ablation.
    """
    if len(source) == 0:
        raise ValueError("source corpus is empty")
    pairs = training_pairs(source, task, reverse=True)
    scorer = None
    if epoch_grid:
        if dev is None:
            raise ValueError("epoch-grid selection needs a dev corpus")
        dev_pairs = training_pairs(dev, task, reverse=True)
        scorer = lambda m: -m.mean_nll(dev_pairs)
    return _fit_with_grid(model, pairs, cfg, epoch_grid, scorer, "label_to_text")


def pseudo_label(
    model: Seq2SeqModel,
    target: Corpus,
    task: Task,
    max_label_len: int = LABEL_MAX_LEN,
) -> list[PseudoLabeled]:
    """Constrained-decode one label per target sentence; keep unparseable ones flagged."""
    out = []
    for ex in target:
        label = constrained_generate(model, ex.sentence, task, max_label_len)
        try:
            tuples: tuple[SentimentTuple, ...] | None = parse(label, task)
        except FormatError:
            tuples = None
        out.append(PseudoLabeled(ex.sentence, label, tuples))
    return out


def generate_candidates(
    model: Seq2SeqModel,
    pseudo: Sequence[PseudoLabeled],
    generation_count: int | None = None,
    max_sentence_len: int = SENTENCE_MAX_LEN,
) -> list[GeneratedPair]:
    """Regenerate a sentence for each usable pseudo label.

    Unparseable labels and empty-label sentinels are skipped: the former cannot
    be mapped back to tuples, the latter describe nothing to regenerate.
    ``generation_count`` caps how many pseudo-labeled inputs are used, in
    corpus order.
    """
    usable = [p for p in pseudo if p.parseable and not p.is_empty]
    if generation_count is not None:
        usable = usable[:generation_count]
    return [
        GeneratedPair(p.label, free_generate(model, p.label, max_sentence_len))
        for p in usable
    ]


def _label_words(label: TaggedSequence, task: Task) -> list[str]:
    markers = tagger_vocabulary(task)
    return [tok for tok in label.tokens if tok not in markers]


def filter_candidates(
    pairs: Sequence[GeneratedPair],
    checker_model: Seq2SeqModel,
    task: Task,
    max_label_len: int = LABEL_MAX_LEN,
) -> list[GeneratedPair]:
    """Apply the three retention checks and stamp each pair with its status.

    1. the label parses under the task grammar;
    2. every non-marker label word occurs in the generated sentence;
    3. the checker model's constrained prediction on the generated sentence
       token-equals the label. Tuple-set equality of the two parses is kept
       as a diagnostic alongside the stricter token-exact rule.
    """
    out = []
    for pair in pairs:
        try:
            label_tuples = parse(pair.label, task)
        except FormatError:
            out.append(replace(pair, status=FilterStatus.BAD_FORMAT))
            continue
        sentence_words = {normalize_text(tok) for tok in pair.sentence}
        missing = [
            w for w in _label_words(pair.label, task) if normalize_text(w) not in sentence_words
        ]
        if missing:
            out.append(replace(pair, status=FilterStatus.MISSING_WORDS))
            continue
        reprediction = constrained_generate(checker_model, pair.sentence, task, max_label_len)
        try:
            tuple_match = parse(reprediction, task) == label_tuples
        except FormatError:
            tuple_match = False
        if reprediction.tokens != pair.label.tokens:
            out.append(
                replace(
                    pair,
                    status=FilterStatus.ROUNDTRIP_MISMATCH,
                    roundtrip_tuple_match=tuple_match,
                )
            )
            continue
        out.append(
            replace(pair, status=FilterStatus.RETAINED, roundtrip_tuple_match=tuple_match)
        )
    return out


def final_train(
    model: Seq2SeqModel,
    source: Corpus,
    augmented: Sequence[tuple],
    task: Task,
    cfg: TrainConfig,
    include_source: bool = True,
    dev: Corpus | None = None,
    epoch_grid: Sequence[int] | None = None,
    max_label_len: int = LABEL_MAX_LEN,
) -> tuple[Seq2SeqModel, StageRecord]:
    """Text-to-label fit on source plus augmented pairs (or augmented only)."""
    pairs = assemble_final_pairs(source, augmented, task, include_source)
    if not pairs:
        raise ValueError("final training set is empty")
    scorer = None
    if epoch_grid:
        if dev is None:
            raise ValueError("epoch-grid selection needs a dev corpus")
        scorer = lambda m: _dev_f1(m, dev, task, max_label_len)
    return _fit_with_grid(model, pairs, cfg, epoch_grid, scorer, "final_train")


def assemble_final_pairs(
    source: Corpus,
    augmented: Sequence[tuple],
    task: Task,
    include_source: bool = True,
) -> list[tuple]:
    """The final-stage training set: source pairs (unless excluded) plus augmented."""
    pairs = training_pairs(source, task) if include_source else []
    pairs.extend((tuple(src), tuple(tgt)) for src, tgt in augmented)
    return pairs


def predict_corpus(
    model: Seq2SeqModel,
    corpus: Corpus,
    task: Task,
    max_label_len: int = LABEL_MAX_LEN,
) -> tuple[list[tuple[SentimentTuple, ...]], int]:
    """Constrained predictions for every sentence; unparseable outputs count
    as empty predictions and are tallied separately."""
    predictions = []
    invalid = 0
    for ex in corpus:
        label = constrained_generate(model, ex.sentence, task, max_label_len)
        try:
            predictions.append(parse(label, task))
        except FormatError:
            invalid += 1
            predictions.append(())
    return predictions, invalid


def _dev_f1(model: Seq2SeqModel, dev: Corpus, task: Task, max_label_len: int) -> float:
    predictions, _ = predict_corpus(model, dev, task, max_label_len)
    golds = [ex.tuples for ex in dev]
    return micro_f1(predictions, golds, task).f1


def evaluate_model(
    model: Seq2SeqModel,
    test: Corpus,
    task: Task,
    max_label_len: int = LABEL_MAX_LEN,
) -> dict:
    """Micro-F1 plus sentence-group accuracy on a labeled test corpus."""
    predictions, invalid = predict_corpus(model, test, task, max_label_len)
    golds = [ex.tuples for ex in test]
    result = micro_f1(predictions, golds, task)
    groups = sentence_group_accuracy(predictions, golds)
    return {
        "precision": result.precision,
        "recall": result.recall,
        "f1": result.f1,
        "true_positives": result.true_positives,
        "predicted": result.predicted_count,
        "gold": result.gold_count,
        "invalid_predictions": invalid,
        "groups": {
            name: {"correct": stat.correct, "total": stat.total, "accuracy": stat.accuracy}
            for name, stat in (
                ("zero", groups.zero),
                ("single", groups.single),
                ("multiple", groups.multiple),
            )
        },
    }


# -- full pipeline ---------------------------------------------------------------


def _resolve_corpus(ref, task: Task | None) -> Corpus:
    if isinstance(ref, Corpus):
        return ref
    return load_corpus(Path(ref), task)


def _check_conformance(corpus: Corpus, task: Task, what: str) -> None:
    for ex in corpus:
        for t in ex.tuples:
            if not tuple_conforms(t, task):
                raise PipelineError(
                    f"{what} corpus tuple {t!r} does not match {task.value}; "
                    "project it with data.project_corpus first"
                )


def run_pipeline(cfg: PipelineConfig) -> tuple[Seq2SeqModel, RunReport]:
    """Execute the configured mode's stage sequence and report every stage.

    Any stage failure raises :class:`PipelineError` carrying the report of the
    stages that completed.
    """
    source = _resolve_corpus(cfg.source_train, cfg.task)
    if not source.labeled:
        raise PipelineError("source corpus must be labeled")
    target = _resolve_corpus(cfg.target_unlabeled, cfg.task).strip_labels()
    _check_conformance(source, cfg.task, "source")

    dev = None
    if cfg.source_dev is not None:
        dev = _resolve_corpus(cfg.source_dev, cfg.task)
        _check_conformance(dev, cfg.task, "dev")
    elif cfg.epoch_grid:
        source, dev = split_dev(source, seed=cfg.seed)

    test = None
    if cfg.target_test is not None:
        test = _resolve_corpus(cfg.target_test, cfg.task)
        _check_conformance(test, cfg.task, "test")

    generation_count = cfg.generation_count
    if generation_count is not None and generation_count > len(target):
        logger.warning(
            "generation_count %d exceeds the %d unlabeled target sentences; clamping",
            generation_count,
            len(target),
        )
        generation_count = len(target)

    vocab = Vocabulary.from_corpora([source, target])
    if cfg.backbone_kind == "toy":
        model: Seq2SeqModel = ToyBackbone(vocab, replace(cfg.backbone, seed=cfg.seed))
    else:
        model = create_backbone(cfg.backbone_kind, vocab, cfg.seed)

    report = RunReport(
        mode=cfg.mode.value,
        task=cfg.task.value,
        source_domain=source.domain,
        target_domain=target.domain,
        seed=cfg.seed,
        stage_seeds={
            "stage1": cfg.stage1.seed,
            "stage2": cfg.stage2.seed,
            "final": cfg.final.seed,
        },
        counts={
            "source_train": len(source),
            "source_dev": None if dev is None else len(dev),
            "target_unlabeled": len(target),
            "target_test": None if test is None else len(test),
            "vocabulary": len(vocab),
        },
    )

    try:
        model, record = stage1_text_to_label(
            model, source, cfg.task, cfg.stage1, dev, cfg.epoch_grid, cfg.label_max_len
        )
        report.stages.append(record)

        augmented: list[tuple] | None = None
        if cfg.mode is not Mode.TEXT_TO_LABEL_ONLY:
            checker = model if cfg.mode is Mode.NO_SHARING else model.clone()
            pseudo = pseudo_label(model, target, cfg.task, cfg.label_max_len)
            report.pseudo = {
                "total": len(pseudo),
                "parseable": sum(p.parseable for p in pseudo),
                "empty_label": sum(p.is_empty for p in pseudo),
                "bad_format": sum(not p.parseable for p in pseudo),
            }

            if cfg.mode is Mode.SELF_TRAINING:
                augmented = [(p.sentence, p.label.tokens) for p in pseudo]
                final_model = model
            else:
                gen_model = model if cfg.mode is Mode.BGCA else model.fresh(cfg.seed + 1)
                gen_model, record = stage2_label_to_text(
                    gen_model, source, cfg.task, cfg.stage2, dev, cfg.epoch_grid
                )
                report.stages.append(record)

                candidates = generate_candidates(
                    gen_model, pseudo, generation_count, cfg.sentence_max_len
                )
                report.generation = {
                    "candidates": len(candidates),
                    "generation_count": generation_count,
                }
                filtered = filter_candidates(candidates, checker, cfg.task, cfg.label_max_len)
                retained = [p for p in filtered if p.status is FilterStatus.RETAINED]
                report.filter = {
                    status.value: sum(p.status is status for p in filtered)
                    for status in FilterStatus
                }
                report.filter["roundtrip_tuple_match_only"] = sum(
                    p.status is FilterStatus.ROUNDTRIP_MISMATCH and p.roundtrip_tuple_match
                    for p in filtered
                )
                augmented = [(p.sentence, p.label.tokens) for p in retained]
                if cfg.mode is Mode.BGCA:
                    final_model = gen_model
                else:
                    final_model = model.fresh(cfg.seed + 2)
            if cfg.reinit_before_final:
                final_model = final_model.fresh(cfg.seed + 2)

            final_model, record = final_train(
                final_model,
                source,
                augmented,
                cfg.task,
                cfg.final,
                cfg.include_source_in_final,
                dev,
                cfg.epoch_grid,
                cfg.label_max_len,
            )
            report.stages.append(record)
            model = final_model

        if test is not None:
            report.evaluation = {"test": evaluate_model(model, test, cfg.task, cfg.label_max_len)}
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(str(exc), partial_report=report.to_dict()) from exc

    return model, report

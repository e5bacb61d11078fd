"""Corpus file format, loaders, transfer-pair enumeration, synthetic corpora.

The canonical on-disk corpus format is line-delimited JSON:

  line 1:  manifest object
           {"format": "absa-corpus", "version": 1, "domain": ..., "task": ...,
            "split": "train"|"dev"|"test", "labeled": true|false, "count": N}
  line 2+: one record per example
           {"sentence": "<space-joined tokens>",
            "tuples": [{"aspect": ..., "opinion": ..., "polarity": "pos"|"neu"|"neg"}]}

``opinion``/``polarity`` keys are present only when the task uses them. Records
are serialized with sorted keys and no trailing whitespace, so saved corpora
are byte-stable.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .core import (
    Corpus,
    Example,
    Polarity,
    SentimentTuple,
    Split,
    Task,
    TransferPair,
    tokenize,
)

logger = logging.getLogger(__name__)

CORPUS_FORMAT = "absa-corpus"
CORPUS_VERSION = 1


class CorpusFormatError(ValueError):
    """A corpus file violates the canonical format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


# Published split sizes of the benchmark corpora, keyed by task, domain, split.
# ATE and UABSA share one set of domains and counts.
_ATE_UABSA_COUNTS = {
    "L": {Split.TRAIN: 3045, Split.DEV: 304, Split.TEST: 800},
    "R": {Split.TRAIN: 3877, Split.DEV: 387, Split.TEST: 2158},
    "D": {Split.TRAIN: 2557, Split.DEV: 255, Split.TEST: 1279},
    "S": {Split.TRAIN: 1492, Split.DEV: 149, Split.TEST: 747},
}
BENCHMARK_SPLIT_COUNTS: dict[Task, dict[str, dict[Split, int]]] = {
    Task.ATE: _ATE_UABSA_COUNTS,
    Task.UABSA: _ATE_UABSA_COUNTS,
    Task.AOPE: {
        "L14": {Split.TRAIN: 1035, Split.DEV: 116, Split.TEST: 343},
        "R14": {Split.TRAIN: 1462, Split.DEV: 163, Split.TEST: 500},
        "R15": {Split.TRAIN: 678, Split.DEV: 76, Split.TEST: 325},
        "R16": {Split.TRAIN: 971, Split.DEV: 108, Split.TEST: 328},
    },
    Task.ASTE: {
        "L14": {Split.TRAIN: 906, Split.DEV: 219, Split.TEST: 328},
        "R14": {Split.TRAIN: 1266, Split.DEV: 310, Split.TEST: 492},
        "R15": {Split.TRAIN: 605, Split.DEV: 148, Split.TEST: 322},
        "R16": {Split.TRAIN: 857, Split.DEV: 210, Split.TEST: 326},
    },
}


def _tuple_to_record(t: SentimentTuple) -> dict:
    record: dict = {"aspect": t.aspect}
    if t.opinion is not None:
        record["opinion"] = t.opinion
    if t.polarity is not None:
        record["polarity"] = t.polarity.value
    return record


def _tuple_from_record(record: dict, line: int) -> SentimentTuple:
    try:
        polarity = record.get("polarity")
        return SentimentTuple(
            aspect=record["aspect"],
            opinion=record.get("opinion"),
            polarity=None if polarity is None else Polarity(polarity),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorpusFormatError(f"bad tuple record {record!r}: {exc}", line) from exc


def save_corpus(corpus: Corpus, path: str | Path, task: Task | None = None) -> Path:
    """Write a corpus in the canonical line-delimited format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        "domain": corpus.domain,
        "task": None if task is None else task.value,
        "split": corpus.split.value,
        "labeled": corpus.labeled,
        "count": len(corpus),
    }
    lines = [json.dumps(manifest, sort_keys=True)]
    for ex in corpus:
        record = {
            "sentence": ex.text,
            "tuples": [_tuple_to_record(t) for t in ex.tuples],
        }
        lines.append(json.dumps(record, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_corpus(path: str | Path, task: Task | None = None) -> Corpus:
    """Load and validate a corpus file.

    Raises :class:`CorpusFormatError` with a line number on malformed input;
    logs a warning when the record count disagrees with the manifest or with
    the published benchmark split sizes.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        logger.warning("corpus file %s is empty; returning an empty corpus", path)
        return Corpus(domain="unknown", split=Split.TRAIN, examples=(), labeled=False)

    try:
        manifest = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"manifest is not valid JSON: {exc}", 1) from exc
    if not isinstance(manifest, dict) or manifest.get("format") != CORPUS_FORMAT:
        raise CorpusFormatError(f"not a {CORPUS_FORMAT} file", 1)
    if manifest.get("version") != CORPUS_VERSION:
        raise CorpusFormatError(f"unsupported version {manifest.get('version')!r}", 1)

    file_task = manifest.get("task")
    if task is not None and file_task is not None and file_task != task.value:
        raise CorpusFormatError(
            f"manifest task {file_task!r} does not match expected {task.value!r}", 1
        )

    try:
        domain = manifest["domain"]
        split = Split(manifest["split"])
        labeled = bool(manifest["labeled"])
        declared = int(manifest["count"])
    except (KeyError, ValueError) as exc:
        raise CorpusFormatError(f"bad manifest field: {exc}", 1) from exc

    examples: list[Example] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"record is not valid JSON: {exc}", lineno) from exc
        try:
            sentence = tokenize(record["sentence"])
            tuples = tuple(
                _tuple_from_record(t, lineno) for t in record.get("tuples", [])
            )
            examples.append(Example(sentence, tuples))
        except CorpusFormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"bad example record: {exc}", lineno) from exc

    if len(examples) != declared:
        logger.warning(
            "corpus %s declares %d records but contains %d", path, declared, len(examples)
        )
    _check_benchmark_count(path, task, file_task, domain, split, len(examples))
    return Corpus(domain=domain, split=split, examples=tuple(examples), labeled=labeled)


def _check_benchmark_count(
    path: Path,
    task: Task | None,
    file_task: str | None,
    domain: str,
    split: Split,
    count: int,
) -> None:
    effective = task
    if effective is None and file_task is not None:
        try:
            effective = Task(file_task)
        except ValueError:
            return
    if effective is None:
        return
    expected = BENCHMARK_SPLIT_COUNTS.get(effective, {}).get(domain, {}).get(split)
    if expected is not None and expected != count:
        logger.warning(
            "corpus %s has %d examples; the published %s %s %s split has %d",
            path,
            count,
            effective.value,
            domain,
            split.value,
            expected,
        )


def project_corpus(corpus: Corpus, task: Task) -> Corpus:
    """Project every example's tuples onto the task's element shape."""
    examples = tuple(
        Example(ex.sentence, tuple(t.project(task) for t in ex.tuples)) for ex in corpus
    )
    return Corpus(corpus.domain, corpus.split, examples, corpus.labeled)


def split_dev(corpus: Corpus, fraction: float = 0.1, seed: int = 0) -> tuple[Corpus, Corpus]:
    """Deterministically carve a dev split out of a training corpus."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    if len(corpus) < 2:
        raise ValueError("corpus too small to split")
    indices = list(range(len(corpus)))
    random.Random(seed).shuffle(indices)
    n_dev = max(1, round(fraction * len(corpus)))
    dev_idx = set(indices[:n_dev])
    train = tuple(ex for i, ex in enumerate(corpus) if i not in dev_idx)
    dev = tuple(ex for i, ex in enumerate(corpus) if i in dev_idx)
    logger.info(
        "derived dev split for %s: %d train / %d dev (seed %d)",
        corpus.domain,
        len(train),
        len(dev),
        seed,
    )
    return (
        Corpus(corpus.domain, corpus.split, train, corpus.labeled),
        Corpus(corpus.domain, Split.DEV, dev, corpus.labeled),
    )


# -- transfer-pair enumeration ------------------------------------------------

# Benchmark column order of the cross-domain result tables.
_ATE_UABSA_PAIRS = (
    ("S", "R"),
    ("L", "R"),
    ("D", "R"),
    ("R", "S"),
    ("L", "S"),
    ("D", "S"),
    ("R", "L"),
    ("S", "L"),
    ("R", "D"),
    ("S", "D"),
)
_AOPE_ASTE_PAIRS = (
    ("R14", "L14"),
    ("R15", "L14"),
    ("R16", "L14"),
    ("L14", "R14"),
    ("L14", "R15"),
    ("L14", "R16"),
)


def enumerate_pairs(task: Task) -> tuple[TransferPair, ...]:
    """The admissible benchmark transfer pairs for a task, in table order.

    ATE/UABSA cover all ordered pairs over L, R, D, S except the overly
    similar D<->L; AOPE/ASTE pair L14 with each restaurant year but never
    restaurant years with each other.
    """
    raw = _ATE_UABSA_PAIRS if task in (Task.ATE, Task.UABSA) else _AOPE_ASTE_PAIRS
    return tuple(TransferPair(src, tgt, task) for src, tgt in raw)


# -- synthetic corpora ---------------------------------------------------------


@dataclass(frozen=True)
class DomainProfile:
    """Lexicons and sentence templates describing one synthetic review domain.

    ``opinions`` maps each opinion word to its polarity. ``templates`` contain
    ``{a}`` and ``{o}`` slots; ``fillers`` are complete aspect-free sentences.
    """

    name: str
    aspects: tuple[str, ...]
    opinions: tuple[tuple[str, Polarity], ...]
    templates: tuple[str, ...]
    fillers: tuple[str, ...]
    zero_aspect_rate: float = 0.15
    multi_aspect_rate: float = 0.35

    def __post_init__(self) -> None:
        if not (self.aspects and self.opinions and self.templates):
            raise ValueError("profile needs aspects, opinions and templates")
        if not 0 <= self.zero_aspect_rate < 1 or not 0 <= self.multi_aspect_rate <= 1:
            raise ValueError("rates must lie in [0, 1)")
        if self.zero_aspect_rate > 0 and not self.fillers:
            raise ValueError("a nonzero zero_aspect_rate needs filler sentences")
        opinion_words = {w for w, _ in self.opinions}
        aspect_words = {w for a in self.aspects for w in a.split()}
        if opinion_words & aspect_words:
            raise ValueError("aspect and opinion lexicons must not overlap")
        for tpl in self.templates:
            if "{a}" not in tpl or "{o}" not in tpl:
                raise ValueError(f"template {tpl!r} must contain {{a}} and {{o}}")


def synth_corpus(
    profile: DomainProfile,
    size: int,
    seed: int,
    split: Split = Split.TRAIN,
) -> Corpus:
    """Deterministically generate a labeled corpus from a domain profile.

    Every example carries full (aspect, opinion, polarity) triples; project
    with :func:`project_corpus` before using it for a specific task.
    """
    if size <= 0:
        raise ValueError("size must be positive")
    rng = random.Random(seed)
    examples = []
    for _ in range(size):
        if rng.random() < profile.zero_aspect_rate:
            examples.append(Example(tokenize(rng.choice(profile.fillers)), ()))
            continue
        n_tuples = 2 if rng.random() < profile.multi_aspect_rate else 1
        n_tuples = min(n_tuples, len(profile.aspects))
        aspects = rng.sample(profile.aspects, n_tuples)
        clauses = []
        tuples = []
        for aspect in aspects:
            opinion, polarity = rng.choice(profile.opinions)
            clauses.append(rng.choice(profile.templates).format(a=aspect, o=opinion))
            tuples.append(SentimentTuple(aspect, opinion, polarity))
        examples.append(Example(tokenize(" and ".join(clauses)), tuple(tuples)))
    return Corpus(domain=profile.name, split=split, examples=tuple(examples), labeled=True)


_SHARED_TEMPLATES = (
    "the {a} was {o}",
    "i thought the {a} was really {o}",
    "honestly the {a} seemed {o}",
    "{a} is {o} here",
)

_CAFE = DomainProfile(
    name="cafe",
    aspects=(
        "coffee",
        "latte",
        "croissant",
        "berry tart",
        "barista",
        "wifi",
        "seating",
        "oat milk",
        "playlist",
        "espresso",
    ),
    opinions=(
        ("delicious", Polarity.POS),
        ("friendly", Polarity.POS),
        ("cozy", Polarity.POS),
        ("stale", Polarity.NEG),
        ("bitter", Polarity.NEG),
        ("slow", Polarity.NEG),
        ("average", Polarity.NEU),
        ("ordinary", Polarity.NEU),
    ),
    templates=_SHARED_TEMPLATES + ("we ordered the {a} and found it {o}",),
    fillers=(
        "we stopped by on a rainy tuesday afternoon",
        "my friend arrived a few minutes late",
        "parking nearby took us a while",
        "we sat upstairs near the window",
        "i had been meaning to visit for months",
    ),
)

_GARAGE = DomainProfile(
    name="garage",
    aspects=(
        "engine",
        "brakes",
        "oil change",
        "mechanic",
        "invoice",
        "front desk",
        "alignment",
        "battery",
        "waiting room",
        "estimate",
    ),
    opinions=(
        ("smooth", Polarity.POS),
        ("quick", Polarity.POS),
        ("honest", Polarity.POS),
        ("noisy", Polarity.NEG),
        ("rude", Polarity.NEG),
        ("overpriced", Polarity.NEG),
        ("fair", Polarity.NEU),
        ("standard", Polarity.NEU),
    ),
    templates=_SHARED_TEMPLATES + ("they said the {a} looked {o} after the inspection",),
    fillers=(
        "i dropped the car off before work",
        "the shop sits just off the highway",
        "my appointment was rescheduled twice",
        "i waited around the corner at a diner",
        "the place opens early on weekdays",
    ),
)


def demo_profiles(
    shared_aspects: int = 0,
    zero_aspect_rate: float | None = None,
    multi_aspect_rate: float | None = None,
) -> tuple[DomainProfile, DomainProfile]:
    """Two synthetic domains with disjoint lexicons and partially shared templates.

    ``shared_aspects`` copies that many aspect terms from the first profile
    into the second to dial the domain gap down from fully disjoint.
    """
    first, second = _CAFE, _GARAGE
    if shared_aspects:
        if shared_aspects > len(first.aspects):
            raise ValueError("not enough aspects to share")
        second = replace(
            second, aspects=second.aspects + first.aspects[:shared_aspects]
        )
    overrides: dict = {}
    if zero_aspect_rate is not None:
        overrides["zero_aspect_rate"] = zero_aspect_rate
    if multi_aspect_rate is not None:
        overrides["multi_aspect_rate"] = multi_aspect_rate
    if overrides:
        first = replace(first, **overrides)
        second = replace(second, **overrides)
    return first, second

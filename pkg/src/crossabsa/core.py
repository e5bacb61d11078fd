"""Core domain vocabulary: tasks, polarities, tuples, sentences, corpora, transfer pairs.

Everything here is an immutable value object, safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"


class SchemaViolationError(ValueError):
    """A tuple's element shape does not match the task it is used with."""


class SpanAlignmentError(ValueError):
    """A tuple span does not occur as a contiguous subsequence of its sentence."""


def is_reserved_token(token: str) -> bool:
    """Angle-bracketed tokens are reserved for markers and special symbols."""
    return len(token) >= 3 and token.startswith("<") and token.endswith(">")


def normalize_text(text: str) -> str:
    """Lowercase, whitespace-collapsed comparison form for spans and words."""
    return " ".join(text.split()).lower()


def tokenize(text: str) -> tuple[str, ...]:
    """Whitespace tokenization; the only tokenizer used anywhere in the package."""
    return tuple(text.split())


class Polarity(Enum):
    POS = "pos"
    NEU = "neu"
    NEG = "neg"


_POLARITY_RANK = {p: i for i, p in enumerate(Polarity)}


class Task(Enum):
    """The four tuple-extraction tasks; each fixes which tuple elements exist.

    ATE extracts bare aspects, UABSA aspect+polarity pairs, AOPE aspect+opinion
    pairs, and ASTE full aspect+opinion+polarity triples.
    """

    ATE = "ate"
    UABSA = "uabsa"
    AOPE = "aope"
    ASTE = "aste"

    @property
    def requires_opinion(self) -> bool:
        return self in (Task.AOPE, Task.ASTE)

    @property
    def requires_polarity(self) -> bool:
        return self in (Task.UABSA, Task.ASTE)


def _clean_span(text: str, what: str) -> str:
    cleaned = " ".join(text.split())
    if not cleaned:
        raise ValueError(f"{what} span is empty after whitespace trimming")
    for word in cleaned.split():
        if is_reserved_token(word):
            raise ValueError(f"{what} span contains reserved token {word!r}")
    return cleaned


@dataclass(frozen=True, eq=False)
class SentimentTuple:
    """One extracted tuple: aspect span plus optional opinion span and polarity.

    Spans are stored as surface text (single-space joined words). Equality and
    hashing use the lowercased form, so case variants collapse to one tuple.
    """

    aspect: str
    opinion: str | None = None
    polarity: Polarity | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "aspect", _clean_span(self.aspect, "aspect"))
        if self.opinion is not None:
            object.__setattr__(self, "opinion", _clean_span(self.opinion, "opinion"))
        if self.polarity is not None and not isinstance(self.polarity, Polarity):
            raise TypeError(f"polarity must be a Polarity, got {self.polarity!r}")

    def key(self) -> tuple[str, str | None, Polarity | None]:
        """Normalized identity used for equality, hashing and deduplication."""
        opinion = None if self.opinion is None else normalize_text(self.opinion)
        return (normalize_text(self.aspect), opinion, self.polarity)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SentimentTuple):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def project(self, task: Task) -> SentimentTuple:
        """Drop elements the task does not use; error if a required one is missing."""
        opinion = self.opinion if task.requires_opinion else None
        polarity = self.polarity if task.requires_polarity else None
        if task.requires_opinion and opinion is None:
            raise SchemaViolationError(f"{task.value} requires an opinion span: {self!r}")
        if task.requires_polarity and polarity is None:
            raise SchemaViolationError(f"{task.value} requires a polarity: {self!r}")
        return SentimentTuple(self.aspect, opinion, polarity)


def tuple_conforms(t: SentimentTuple, task: Task) -> bool:
    """True iff opinion/polarity presence matches exactly what the task defines."""
    return (t.opinion is not None) == task.requires_opinion and (
        t.polarity is not None
    ) == task.requires_polarity


def find_span(sentence: Sequence[str], span: str) -> int:
    """Index of the first occurrence of ``span`` as a contiguous token run, else -1.

    Matching is on normalized words, so occurrences are indistinguishable up to
    case and spacing.
    """
    words = tuple(normalize_text(span).split())
    tokens = tuple(normalize_text(tok) for tok in sentence)
    n, m = len(tokens), len(words)
    for start in range(n - m + 1):
        if tokens[start : start + m] == words:
            return start
    return -1


@dataclass(frozen=True)
class Example:
    """A tokenized sentence with its (possibly empty) set of gold tuples.

    Construction validates that every span occurs contiguously in the sentence,
    collapses duplicate tuples, and stores tuples in canonical order: by aspect
    position, then opinion position, then polarity.
    """

    sentence: tuple[str, ...]
    tuples: tuple[SentimentTuple, ...] = ()

    def __post_init__(self) -> None:
        sentence = tuple(self.sentence)
        if not sentence:
            raise ValueError("sentence must contain at least one token")
        for tok in sentence:
            if not tok or len(tok.split()) != 1:
                raise ValueError(f"sentence token {tok!r} is empty or contains whitespace")
            if is_reserved_token(tok):
                raise ValueError(f"sentence token {tok!r} collides with a reserved token")
        object.__setattr__(self, "sentence", sentence)
        object.__setattr__(self, "tuples", _canonicalize(sentence, self.tuples))

    @classmethod
    def from_text(cls, text: str, tuples: Sequence[SentimentTuple] = ()) -> Example:
        return cls(tokenize(text), tuple(tuples))

    @property
    def text(self) -> str:
        return " ".join(self.sentence)


def _canonicalize(
    sentence: tuple[str, ...], tuples: Sequence[SentimentTuple]
) -> tuple[SentimentTuple, ...]:
    seen: dict[tuple, SentimentTuple] = {}
    keyed = []
    for t in tuples:
        aspect_pos = find_span(sentence, t.aspect)
        if aspect_pos < 0:
            raise SpanAlignmentError(
                f"aspect {t.aspect!r} is not a contiguous subsequence of {' '.join(sentence)!r}"
            )
        opinion_pos = -1
        if t.opinion is not None:
            opinion_pos = find_span(sentence, t.opinion)
            if opinion_pos < 0:
                raise SpanAlignmentError(
                    f"opinion {t.opinion!r} is not a contiguous subsequence of "
                    f"{' '.join(sentence)!r}"
                )
        if t.key() in seen:
            continue
        seen[t.key()] = t
        rank = -1 if t.polarity is None else _POLARITY_RANK[t.polarity]
        keyed.append(((aspect_pos, opinion_pos, rank), t))
    keyed.sort(key=lambda item: item[0])
    return tuple(t for _, t in keyed)


class Split(Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class Corpus:
    """A domain-labeled split of examples; unlabeled corpora carry no tuples."""

    domain: str
    split: Split
    examples: tuple[Example, ...]
    labeled: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.labeled:
            for ex in self.examples:
                if ex.tuples:
                    raise ValueError(
                        f"unlabeled corpus {self.domain!r} contains a labeled example: {ex.text!r}"
                    )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def strip_labels(self) -> Corpus:
        """An unlabeled view of this corpus (gold tuples dropped)."""
        examples = tuple(Example(ex.sentence, ()) for ex in self.examples)
        return Corpus(self.domain, self.split, examples, labeled=False)


@dataclass(frozen=True)
class TransferPair:
    """An ordered source-to-target evaluation configuration for one task."""

    source: str
    target: str
    task: Task

    def __post_init__(self) -> None:
        if self.source == self.target:
            raise ValueError(f"transfer pair must cross domains, got {self.source!r} twice")

    def __str__(self) -> str:
        return f"{self.source}->{self.target}"

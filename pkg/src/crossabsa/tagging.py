"""Bidirectional conversion between tuple sets and linearized marker-tagged sequences.

Each task has a fixed output grammar built from atomic marker tokens:

    ATE:    <aspect> a ...
    UABSA:  <pos|neu|neg> a ...
    AOPE:   <aspect> a <opinion> o ...
    ASTE:   <pos|neu|neg> a <opinion> o ...

repeated once per tuple, with ``<none>`` as the sentinel for an empty tuple set.
Parsing is a single left-to-right pass over this regular grammar.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

from .core import (
    EOS_TOKEN,
    Polarity,
    SchemaViolationError,
    SentimentTuple,
    Task,
    is_reserved_token,
    tuple_conforms,
)


class FormatError(ValueError):
    """A raw sequence violates the task's tagging grammar."""


class TaggerToken(str, Enum):
    """Atomic marker tokens; each is a single vocabulary item in every tokenizer."""

    ASPECT = "<aspect>"
    OPINION = "<opinion>"
    POS = "<pos>"
    NEU = "<neu>"
    NEG = "<neg>"


EMPTY_LABEL = "<none>"

POLARITY_MARKERS: dict[Polarity, str] = {
    Polarity.POS: TaggerToken.POS.value,
    Polarity.NEU: TaggerToken.NEU.value,
    Polarity.NEG: TaggerToken.NEG.value,
}
MARKER_POLARITIES = {marker: pol for pol, marker in POLARITY_MARKERS.items()}


def aspect_markers(task: Task) -> tuple[str, ...]:
    """Markers that open a tuple: polarity markers double as aspect markers
    in the tasks that predict polarity."""
    if task.requires_polarity:
        return (TaggerToken.POS.value, TaggerToken.NEU.value, TaggerToken.NEG.value)
    return (TaggerToken.ASPECT.value,)


def tagger_vocabulary(task: Task) -> frozenset[str]:
    """All non-word tokens the task's decoder may emit, incl. sentinel and EOS."""
    markers = set(aspect_markers(task))
    if task.requires_opinion:
        markers.add(TaggerToken.OPINION.value)
    markers.add(EMPTY_LABEL)
    markers.add(EOS_TOKEN)
    return frozenset(markers)


@dataclass(frozen=True)
class TaggedSequence:
    """A linearized label: marker tokens interleaved with span words.

    Instances produced by :func:`serialize` are always grammatical; instances
    wrapping raw model output may not be — check with :func:`validate`.
    """

    tokens: tuple[str, ...]
    task: Task

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


def serialize(tuples: Sequence[SentimentTuple], task: Task) -> TaggedSequence:
    """Linearize an ordered tuple set into the task's tagged sequence.

    Callers are expected to pass tuples in canonical order (as stored on
    ``Example``); the order is preserved verbatim. An empty set serializes to
    the ``<none>`` sentinel.
    """
    items = list(tuples)
    if not items:
        return TaggedSequence((EMPTY_LABEL,), task)
    out: list[str] = []
    for t in items:
        if not tuple_conforms(t, task):
            raise SchemaViolationError(
                f"tuple {t!r} does not match the {task.value} element shape"
            )
        if task.requires_polarity:
            assert t.polarity is not None
            out.append(POLARITY_MARKERS[t.polarity])
        else:
            out.append(TaggerToken.ASPECT.value)
        out.extend(t.aspect.split())
        if task.requires_opinion:
            assert t.opinion is not None
            out.append(TaggerToken.OPINION.value)
            out.extend(t.opinion.split())
    return TaggedSequence(tuple(out), task)


def _sequence_tokens(sequence: str | Sequence[str] | TaggedSequence) -> tuple[str, ...]:
    if isinstance(sequence, TaggedSequence):
        return sequence.tokens
    if isinstance(sequence, str):
        return tuple(sequence.split())
    return tuple(sequence)


def parse(sequence: str | Sequence[str] | TaggedSequence, task: Task) -> tuple[SentimentTuple, ...]:
    """Recover the ordered tuple set from a tagged sequence.

    Inverse of :func:`serialize` on well-formed input; duplicates collapse to
    the first occurrence. Raises :class:`FormatError` on any grammar violation.
    """
    tokens = _sequence_tokens(sequence)
    if not tokens:
        raise FormatError("empty sequence")
    if EMPTY_LABEL in tokens:
        if tokens == (EMPTY_LABEL,):
            return ()
        raise FormatError("empty-label sentinel must be the entire sequence")

    leads = aspect_markers(task)
    opinion_marker = TaggerToken.OPINION.value

    tuples: list[SentimentTuple] = []
    state: str | None = None  # None | "aspect" | "opinion"
    lead: str | None = None
    aspect_words: list[str] = []
    opinion_words: list[str] = []

    def close() -> None:
        if state is None:
            return
        if not aspect_words:
            raise FormatError("empty aspect span")
        if task.requires_opinion:
            if state != "opinion":
                raise FormatError("aspect segment without an opinion segment")
            if not opinion_words:
                raise FormatError("empty opinion span")
        polarity = MARKER_POLARITIES.get(lead) if task.requires_polarity else None
        opinion = " ".join(opinion_words) if task.requires_opinion else None
        tuples.append(SentimentTuple(" ".join(aspect_words), opinion, polarity))

    for tok in tokens:
        if tok in leads:
            close()
            state = "aspect"
            lead = tok
            aspect_words = []
            opinion_words = []
        elif tok == opinion_marker:
            if not task.requires_opinion:
                raise FormatError(f"{tok} is not part of the {task.value} grammar")
            if state != "aspect":
                raise FormatError("opinion marker without a preceding aspect segment")
            if not aspect_words:
                raise FormatError("empty aspect span")
            state = "opinion"
        elif is_reserved_token(tok):
            raise FormatError(f"token {tok!r} is not part of the {task.value} grammar")
        else:
            if state is None:
                raise FormatError(f"word {tok!r} before the first marker token")
            if state == "aspect":
                aspect_words.append(tok)
            else:
                opinion_words.append(tok)
    close()

    deduped: list[SentimentTuple] = []
    seen = set()
    for t in tuples:
        if t.key() not in seen:
            seen.add(t.key())
            deduped.append(t)
    return tuple(deduped)


def validate(sequence: str | Sequence[str] | TaggedSequence, task: Task) -> bool:
    """True iff the sequence parses under the task grammar."""
    try:
        parse(sequence, task)
    except FormatError:
        return False
    return True

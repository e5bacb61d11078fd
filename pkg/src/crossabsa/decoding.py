"""Greedy decoding in two regimes: restricted to input words plus markers, or open.

Label prediction restricts every emitted token to the union of the (OOV-mapped)
input sentence words and the task's marker tokens; sentence generation decodes
the whole vocabulary. Both are greedy argmax with ties broken toward the lowest
vocabulary index, so outputs are deterministic given a model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Task
from .model import Seq2SeqModel, TokenSeq, Vocabulary
from .tagging import TaggedSequence, tagger_vocabulary

LABEL_MAX_LEN = 64
SENTENCE_MAX_LEN = 128


@dataclass(frozen=True)
class ConstraintSet:
    """Allowed output tokens for one input sentence: its words plus markers."""

    tokens: frozenset[str]
    ids: tuple[int, ...]

    @classmethod
    def for_sentence(cls, sentence: TokenSeq, task: Task, vocab: Vocabulary) -> ConstraintSet:
        allowed = set(vocab.sanitize(sentence)) | tagger_vocabulary(task)
        if not allowed:
            raise ValueError("constraint set is empty")
        ids = tuple(sorted(vocab.token_to_id(tok) for tok in allowed))
        if vocab.eos_id not in ids:
            raise ValueError("constraint set must contain the end-of-sequence token")
        return cls(frozenset(allowed), ids)


def _greedy(
    model: Seq2SeqModel,
    source: TokenSeq,
    allowed_ids: Sequence[int] | None,
    max_len: int,
) -> list[int]:
    session = model.start_session(source)
    eos = model.vocab.eos_id
    out: list[int] = []
    restricted = None if allowed_ids is None else np.asarray(allowed_ids, dtype=np.int64)
    for _ in range(max_len):
        probs = session.probs()
        if restricted is None:
            token = int(np.argmax(probs))
        else:
            # argmax over sorted candidate ids; np.argmax takes the first
            # maximum, which is the lowest vocabulary index
            token = int(restricted[int(np.argmax(probs[restricted]))])
        if token == eos:
            break
        out.append(token)
        session.advance(token)
    return out


def constrained_generate(
    model: Seq2SeqModel, sentence: TokenSeq, task: Task, max_len: int = LABEL_MAX_LEN
) -> TaggedSequence:
    """Greedily decode a label whose every token comes from the constraint set.

    The output may still be ungrammatical for the task (the restriction is on
    the token alphabet, not the grammar); callers parse or validate it.
    """
    source = model.vocab.sanitize(sentence)
    constraint = ConstraintSet.for_sentence(source, task, model.vocab)
    ids = _greedy(model, source, constraint.ids, max_len)
    return TaggedSequence(model.vocab.decode(ids), task)


def free_generate(
    model: Seq2SeqModel,
    label: TaggedSequence | TokenSeq,
    max_len: int = SENTENCE_MAX_LEN,
) -> tuple[str, ...]:
    """Greedily decode a sentence over the full vocabulary."""
    tokens = label.tokens if isinstance(label, TaggedSequence) else tuple(label)
    ids = _greedy(model, model.vocab.sanitize(tokens), None, max_len)
    return model.vocab.decode(ids)

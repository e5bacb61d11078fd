"""Shared sequence-to-sequence backbone: vocabulary, training, stepwise decoding.

One parameter state serves both the text-to-label and label-to-text directions;
direction lives entirely in the training pairs. The bundled toy backbone is a
small GRU encoder-decoder with dot-product attention, trainable from scratch on
desk-scale corpora; pretrained encoder-decoder adapters plug in by subclassing
:class:`Seq2SeqModel`.
"""

from __future__ import annotations

import copy
import json
import logging
import random
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import torch
from torch import nn

from .core import BOS_TOKEN, EOS_TOKEN, PAD_TOKEN, UNK_TOKEN, Corpus, is_reserved_token
from .tagging import EMPTY_LABEL, TaggerToken

logger = logging.getLogger(__name__)

SPECIAL_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)
MARKER_TOKENS = (EMPTY_LABEL,) + tuple(m.value for m in TaggerToken)

# Default per-stage training-epoch search grid.
DEFAULT_EPOCH_GRID = (15, 20, 25, 30)

CHECKPOINT_FORMAT_VERSION = 1

TokenSeq = Sequence[str]
Pair = tuple[Sequence[str], Sequence[str]]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters for one fit."""

    learning_rate: float = 3e-4
    batch_size: int = 16
    grad_accumulation: int = 2
    epochs: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for name in ("batch_size", "grad_accumulation", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class FitResult:
    """Per-epoch mean token negative log-likelihood."""

    epoch_losses: tuple[float, ...]

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]


class Vocabulary:
    """Ordered closed token set: specials, then markers, then sorted words.

    Words unseen at construction map to the unknown token, so every lookup is
    total. Word order is sorted, making the vocabulary independent of corpus
    ordering.
    """

    def __init__(self, words: Iterable[str]):
        word_list = sorted({w for w in words if not is_reserved_token(w)})
        self._tokens: tuple[str, ...] = SPECIAL_TOKENS + MARKER_TOKENS + tuple(word_list)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        self.pad_id = self._ids[PAD_TOKEN]
        self.bos_id = self._ids[BOS_TOKEN]
        self.eos_id = self._ids[EOS_TOKEN]
        self.unk_id = self._ids[UNK_TOKEN]

    @classmethod
    def from_corpora(cls, corpora: Iterable[Corpus]) -> Vocabulary:
        words: set[str] = set()
        for corpus in corpora:
            for ex in corpus:
                words.update(ex.sentence)
        return cls(words)

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def token_to_id(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def id_to_token(self, index: int) -> str:
        return self._tokens[index]

    def encode(self, tokens: TokenSeq) -> list[int]:
        return [self._ids.get(tok, self.unk_id) for tok in tokens]

    def decode(self, ids: Sequence[int]) -> tuple[str, ...]:
        return tuple(self._tokens[i] for i in ids)

    def sanitize(self, tokens: TokenSeq) -> tuple[str, ...]:
        """Map out-of-vocabulary words to the unknown token."""
        return tuple(tok if tok in self._ids else UNK_TOKEN for tok in tokens)

    def to_dict(self) -> dict:
        return {"tokens": list(self._tokens)}

    @classmethod
    def from_dict(cls, data: dict) -> Vocabulary:
        vocab = cls.__new__(cls)
        vocab._tokens = tuple(data["tokens"])
        vocab._ids = {tok: i for i, tok in enumerate(vocab._tokens)}
        vocab.pad_id = vocab._ids[PAD_TOKEN]
        vocab.bos_id = vocab._ids[BOS_TOKEN]
        vocab.eos_id = vocab._ids[EOS_TOKEN]
        vocab.unk_id = vocab._ids[UNK_TOKEN]
        return vocab


class DecodeSession(ABC):
    """Incremental left-to-right decoding over one source sequence."""

    @abstractmethod
    def probs(self) -> np.ndarray:
        """Distribution over the vocabulary for the next position."""

    @abstractmethod
    def advance(self, token_id: int) -> None:
        """Commit a token and move to the next position."""


class _PrefixSession(DecodeSession):
    """Fallback session that re-queries next_token_distribution per step."""

    def __init__(self, model: Seq2SeqModel, source: TokenSeq):
        self._model = model
        self._source = tuple(source)
        self._prefix: list[str] = []

    def probs(self) -> np.ndarray:
        return self._model.next_token_distribution(self._source, self._prefix)

    def advance(self, token_id: int) -> None:
        self._prefix.append(self._model.vocab.id_to_token(token_id))


class Seq2SeqModel(ABC):
    """Contract shared by the toy backbone and any pretrained adapter.

    Implementations hold a single parameter state that serves both generation
    directions. ``fit`` mutates that state in place; snapshots are taken with
    ``clone`` and re-initializations with ``fresh``.
    """

    vocab: Vocabulary

    @abstractmethod
    def fit(self, pairs: Sequence[Pair], cfg: TrainConfig) -> FitResult:
        """Minimize token-level NLL of targets given sources."""

    @abstractmethod
    def next_token_distribution(self, source: TokenSeq, prefix: TokenSeq) -> np.ndarray:
        """Probability vector over the vocabulary, normalized to sum to one."""

    @abstractmethod
    def clone(self) -> Seq2SeqModel:
        """Deep copy of the current parameter state."""

    @abstractmethod
    def fresh(self, seed: int) -> Seq2SeqModel:
        """A newly initialized model with the same shape and vocabulary."""

    @abstractmethod
    def save(self, directory: str | Path) -> None:
        """Write parameters, vocabulary and a versioned config manifest."""

    def start_session(self, source: TokenSeq) -> DecodeSession:
        return _PrefixSession(self, source)

    def continue_pretrain(self, sentences: Sequence[TokenSeq], cfg: TrainConfig) -> FitResult:
        """Hook for unlabeled-corpus span-reconstruction pretraining.

        Only meaningful for pretrained adapters; the toy backbone does not
        implement it.
        """
        raise NotImplementedError(
            "span-reconstruction pretraining requires a pretrained backbone adapter"
        )


@dataclass(frozen=True)
class ToyBackboneConfig:
    """Shape and initialization of the toy backbone."""

    embed_dim: int = 64
    hidden_dim: int = 128
    max_len: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embed_dim < 1 or self.hidden_dim < 1 or self.max_len < 2:
            raise ValueError("embed_dim, hidden_dim must be >= 1 and max_len >= 2")


class _ToyNet(nn.Module):
    """GRU encoder-decoder with dot-product attention over encoder states."""

    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int, pad_id: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=pad_id)
        self.encoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.decoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.out = nn.Linear(2 * hidden_dim, vocab_size)
        # Zero output projection: the untrained model is exactly uniform.
        with torch.no_grad():
            self.out.weight.zero_()
            self.out.bias.zero_()

    def encode(self, src: torch.Tensor, lengths: torch.Tensor):
        emb = self.embedding(src)
        packed = nn.utils.rnn.pack_padded_sequence(
            emb, lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        outs, hidden = self.encoder(packed)
        outs, _ = nn.utils.rnn.pad_packed_sequence(outs, batch_first=True)
        mask = torch.arange(outs.size(1))[None, :] < lengths[:, None]
        return outs, mask, hidden

    def decode(self, enc_outs, enc_mask, hidden, dec_in: torch.Tensor):
        emb = self.embedding(dec_in)
        dec_outs, hidden = self.decoder(emb, hidden)
        scores = torch.bmm(dec_outs, enc_outs.transpose(1, 2))
        scores = scores.masked_fill(~enc_mask[:, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        context = torch.bmm(attn, enc_outs)
        logits = self.out(torch.cat([dec_outs, context], dim=-1))
        return logits, hidden


class ToyBackbone(Seq2SeqModel):
    """Desk-scale trainable encoder-decoder, deterministic under a fixed seed.

    Sized to overfit corpora of a few thousand pairs to near-perfect token
    accuracy, which the test harness relies on.
    """

    def __init__(self, vocab: Vocabulary, config: ToyBackboneConfig = ToyBackboneConfig()):
        self.vocab = vocab
        self.config = config
        torch.manual_seed(config.seed)
        self._net = _ToyNet(len(vocab), config.embed_dim, config.hidden_dim, vocab.pad_id)
        self._net.eval()

    # -- encoding helpers -------------------------------------------------

    def _source_ids(self, source: TokenSeq) -> list[int]:
        ids = self.vocab.encode(source) + [self.vocab.eos_id]
        return self._truncate(ids, "source")

    def _target_ids(self, target: TokenSeq) -> list[int]:
        ids = self.vocab.encode(target) + [self.vocab.eos_id]
        return self._truncate(ids, "target")

    def _truncate(self, ids: list[int], what: str) -> list[int]:
        limit = self.config.max_len
        if len(ids) > limit:
            logger.warning("truncating %s sequence from %d to %d tokens", what, len(ids), limit)
            ids = ids[: limit - 1] + [self.vocab.eos_id]
        return ids

    def _batch(self, seqs: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
        lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long)
        width = int(lengths.max())
        padded = torch.full((len(seqs), width), self.vocab.pad_id, dtype=torch.long)
        for i, s in enumerate(seqs):
            padded[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        return padded, lengths

    # -- training ----------------------------------------------------------

    def fit(self, pairs: Sequence[Pair], cfg: TrainConfig) -> FitResult:
        if not pairs:
            raise ValueError("cannot fit on an empty pair list")
        encoded = [
            (self._source_ids(src), self._target_ids(tgt)) for src, tgt in pairs
        ]
        torch.manual_seed(cfg.seed)
        rng = random.Random(cfg.seed)
        optimizer = torch.optim.Adam(self._net.parameters(), lr=cfg.learning_rate)
        self._net.train()
        losses: list[float] = []
        order = list(range(len(encoded)))
        for _ in range(cfg.epochs):
            rng.shuffle(order)
            batches = [
                order[i : i + cfg.batch_size]
                for i in range(0, len(order), cfg.batch_size)
            ]
            epoch_nll = 0.0
            epoch_tokens = 0
            optimizer.zero_grad()
            for b, batch in enumerate(batches):
                src, lengths = self._batch([encoded[i][0] for i in batch])
                tgt, _ = self._batch([encoded[i][1] for i in batch])
                bos = torch.full((tgt.size(0), 1), self.vocab.bos_id, dtype=torch.long)
                dec_in = torch.cat([bos, tgt[:, :-1]], dim=1)
                enc_outs, mask, hidden = self._net.encode(src, lengths)
                logits, _ = self._net.decode(enc_outs, mask, hidden, dec_in)
                nll = nn.functional.cross_entropy(
                    logits.reshape(-1, len(self.vocab)),
                    tgt.reshape(-1),
                    ignore_index=self.vocab.pad_id,
                    reduction="sum",
                )
                n_tokens = int((tgt != self.vocab.pad_id).sum())
                loss = nll / n_tokens / cfg.grad_accumulation
                loss.backward()
                if (b + 1) % cfg.grad_accumulation == 0 or b == len(batches) - 1:
                    optimizer.step()
                    optimizer.zero_grad()
                epoch_nll += float(nll.detach())
                epoch_tokens += n_tokens
            losses.append(epoch_nll / epoch_tokens)
        self._net.eval()
        return FitResult(tuple(losses))

    def token_accuracy(self, pairs: Sequence[Pair]) -> float:
        """Teacher-forced next-token accuracy over all target positions."""
        if not pairs:
            raise ValueError("cannot score an empty pair list")
        correct = 0
        total = 0
        with torch.no_grad():
            for src_toks, tgt_toks in pairs:
                src, lengths = self._batch([self._source_ids(src_toks)])
                tgt, _ = self._batch([self._target_ids(tgt_toks)])
                bos = torch.full((1, 1), self.vocab.bos_id, dtype=torch.long)
                dec_in = torch.cat([bos, tgt[:, :-1]], dim=1)
                enc_outs, mask, hidden = self._net.encode(src, lengths)
                logits, _ = self._net.decode(enc_outs, mask, hidden, dec_in)
                pred = logits.argmax(dim=-1)
                keep = tgt != self.vocab.pad_id
                correct += int((pred[keep] == tgt[keep]).sum())
                total += int(keep.sum())
        return correct / total

    def mean_nll(self, pairs: Sequence[Pair]) -> float:
        """Teacher-forced mean token NLL, without updating parameters."""
        if not pairs:
            raise ValueError("cannot score an empty pair list")
        nll_sum = 0.0
        total = 0
        with torch.no_grad():
            for src_toks, tgt_toks in pairs:
                src, lengths = self._batch([self._source_ids(src_toks)])
                tgt, _ = self._batch([self._target_ids(tgt_toks)])
                bos = torch.full((1, 1), self.vocab.bos_id, dtype=torch.long)
                dec_in = torch.cat([bos, tgt[:, :-1]], dim=1)
                enc_outs, mask, hidden = self._net.encode(src, lengths)
                logits, _ = self._net.decode(enc_outs, mask, hidden, dec_in)
                nll = nn.functional.cross_entropy(
                    logits.reshape(-1, len(self.vocab)),
                    tgt.reshape(-1),
                    ignore_index=self.vocab.pad_id,
                    reduction="sum",
                )
                nll_sum += float(nll)
                total += int((tgt != self.vocab.pad_id).sum())
        return nll_sum / total

    # -- inference ---------------------------------------------------------

    def next_token_distribution(self, source: TokenSeq, prefix: TokenSeq) -> np.ndarray:
        with torch.no_grad():
            src, lengths = self._batch([self._source_ids(source)])
            dec_in = torch.tensor(
                [[self.vocab.bos_id] + self.vocab.encode(prefix)], dtype=torch.long
            )
            enc_outs, mask, hidden = self._net.encode(src, lengths)
            logits, _ = self._net.decode(enc_outs, mask, hidden, dec_in)
            probs = torch.softmax(logits[0, -1], dim=-1).double().numpy()
        return probs / probs.sum()

    def start_session(self, source: TokenSeq) -> DecodeSession:
        return _ToySession(self, source)

    # -- lifecycle ---------------------------------------------------------

    def clone(self) -> ToyBackbone:
        return copy.deepcopy(self)

    def fresh(self, seed: int) -> ToyBackbone:
        return ToyBackbone(self.vocab, replace(self.config, seed=seed))

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "backbone": "toy",
            "config": asdict(self.config),
        }
        (directory / "config.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        (directory / "vocab.json").write_text(json.dumps(self.vocab.to_dict()))
        torch.save(self._net.state_dict(), directory / "weights.pt")

    @classmethod
    def load(cls, directory: str | Path) -> ToyBackbone:
        directory = Path(directory)
        manifest = json.loads((directory / "config.json").read_text())
        if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format: {manifest.get('format_version')}")
        if manifest.get("backbone") != "toy":
            raise ValueError(f"not a toy-backbone checkpoint: {manifest.get('backbone')}")
        vocab = Vocabulary.from_dict(json.loads((directory / "vocab.json").read_text()))
        model = cls(vocab, ToyBackboneConfig(**manifest["config"]))
        model._net.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        model._net.eval()
        return model


class _ToySession(DecodeSession):
    """Incremental decoder state for the toy backbone (single example)."""

    def __init__(self, model: ToyBackbone, source: TokenSeq):
        self._model = model
        with torch.no_grad():
            src, lengths = model._batch([model._source_ids(source)])
            self._enc_outs, self._mask, self._hidden = model._net.encode(src, lengths)
        self._logits: torch.Tensor | None = None
        self._feed(model.vocab.bos_id)

    def _feed(self, token_id: int) -> None:
        with torch.no_grad():
            dec_in = torch.tensor([[token_id]], dtype=torch.long)
            logits, self._hidden = self._model._net.decode(
                self._enc_outs, self._mask, self._hidden, dec_in
            )
        self._logits = logits[0, -1]

    def probs(self) -> np.ndarray:
        probs = torch.softmax(self._logits, dim=-1).double().numpy()
        return probs / probs.sum()

    def advance(self, token_id: int) -> None:
        self._feed(token_id)


BackboneFactory = Callable[[Vocabulary, int], Seq2SeqModel]

BACKBONES: dict[str, BackboneFactory] = {
    "toy": lambda vocab, seed: ToyBackbone(vocab, ToyBackboneConfig(seed=seed)),
}


def create_backbone(kind: str, vocab: Vocabulary, seed: int = 0) -> Seq2SeqModel:
    """Instantiate a registered backbone; adapters register themselves here."""
    try:
        factory = BACKBONES[kind]
    except KeyError:
        raise ValueError(f"unknown backbone {kind!r}; registered: {sorted(BACKBONES)}") from None
    return factory(vocab, seed)

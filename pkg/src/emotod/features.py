"""Feature extraction: dialogue-state vectors and hashed text encodings.

A user turn is encoded from two sources. The dialogue history text goes
through a hashed n-gram featurizer (unigrams and bigrams of speaker-tagged
tokens, recency-decayed per turn, L2-normalized). The semantic dialogue
state is binarized per slot and concatenated over a three-turn window, then
projected through a trainable tanh layer. The two encodings are fused by
concatenation, text part first.

Two modes exist: ERC includes the current user turn (text and state window
[V_t, V_t-1, V_t-2]); satisfaction-prediction withholds it (history stops at
the previous system turn, window shifts to [V_t-1, V_t-2, V_t-3]).
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .data import Corpus, DialogueSample, SlotSchema
from .hashgrams import ngram_buckets
from .taxonomy import ASPECT_INDEX, EmotionLabel

__all__ = [
    "Mode",
    "FeaturizerConfig",
    "vectorize_state",
    "state_vector_sequence",
    "contextual_state",
    "project_state",
    "tokenize_turn",
    "build_history",
    "featurize_text",
    "fuse",
    "EncodedDataset",
    "encode_corpus",
    "encode_pairs",
]

CONTEXT_WINDOW = 3
UNFILLED_MARKERS = ("", "none")


class Mode(str, enum.Enum):
    ERC = "erc"
    SATISFACTION = "satisfaction"


@dataclass(frozen=True)
class FeaturizerConfig:
    """Hashed n-gram featurizer settings."""

    dim: int = 4096
    bigrams: bool = True
    decay: float = 0.7

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("featurizer dim must be >= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")


def vectorize_state(state: Mapping[str, str] | None, schema: SlotSchema) -> np.ndarray:
    """0/1 fill-status bits, one per schema slot in schema order.

    A slot counts as filled when its value is non-empty and not the literal
    "none". Unknown slot names raise KeyError.
    """
    bits = np.zeros(schema.size)
    if state:
        for slot, value in state.items():
            i = schema.index(slot)
            if value is not None and value.strip().lower() not in UNFILLED_MARKERS:
                bits[i] = 1.0
    return bits


def state_vector_sequence(sample: DialogueSample, schema: SlotSchema) -> list[np.ndarray]:
    """State vector at each user turn, in turn order."""
    return [vectorize_state(sample.turns[i].state, schema) for i in sample.user_turns()]


def contextual_state(states: Sequence[np.ndarray], t: int, mode: Mode) -> np.ndarray:
    """Concatenation of a three-turn state window, most recent first.

    t is the 1-based user-turn index. ERC mode reads [V_t, V_t-1, V_t-2];
    satisfaction mode reads [V_t-1, V_t-2, V_t-3]. Positions before the
    dialogue start contribute zero vectors.
    """
    if not states:
        raise ValueError("contextual_state needs at least one state vector")
    size = states[0].shape[0]
    start = t if mode is Mode.ERC else t - 1
    parts = []
    for k in range(CONTEXT_WINDOW):
        idx = start - k
        parts.append(states[idx - 1] if idx >= 1 else np.zeros(size))
    return np.concatenate(parts)


def project_state(v: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Trainable projection tanh(v @ W + b); output entries lie in (-1, 1)."""
    if v.shape[-1] != weight.shape[0]:
        raise ValueError(f"state vector of length {v.shape[-1]} does not match projection input {weight.shape[0]}")
    return np.tanh(v @ weight + bias)


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize_turn(speaker: str, text: str) -> list[bytes]:
    """Lowercase alphanumeric tokens, each prefixed with its speaker tag."""
    prefix = b"u:" if speaker == "user" else b"s:"
    return [prefix + w.encode() for w in _TOKEN_RE.findall(text.lower())]


def build_history(sample: DialogueSample, t: int, mode: Mode) -> list[tuple[str, str]]:
    """(speaker, text) pairs, most recent first, for user turn t per mode.

    ERC history starts at u_t; satisfaction history starts at the system
    turn before it (the current user turn is withheld).
    """
    last = sample.user_turns()[t - 1]
    if mode is Mode.SATISFACTION:
        last -= 1
    return [(sample.turns[i].speaker, sample.turns[i].text) for i in range(last, -1, -1)]


def _accumulate(turns: list[tuple[np.ndarray, np.ndarray]], weights: list[float], dim: int) -> np.ndarray:
    if not turns:
        return np.zeros(dim)
    buckets = np.concatenate([b for b, _ in turns])
    values = np.concatenate([v * w for (_, v), w in zip(turns, weights)])
    return np.bincount(buckets, weights=values, minlength=dim)


def _turn_grams(speaker: str, text: str, config: FeaturizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unique buckets and L2-normalized counts for one turn's grams.

    Per-turn normalization keeps every turn's contribution comparable, so
    the current turn is not drowned by a long history.
    """
    tokens = tokenize_turn(speaker, text)
    buckets = ngram_buckets(tokens, config.dim)
    if not config.bigrams:
        buckets = buckets[::2]  # unigram positions only
    if not len(buckets):
        return buckets, np.empty(0)
    unique, counts = np.unique(buckets, return_counts=True)
    values = counts / np.sqrt(np.square(counts).sum())
    return unique, values


def featurize_text(history: Sequence[tuple[str, str]], config: FeaturizerConfig) -> np.ndarray:
    """Hashed n-gram encoding of a dialogue history.

    Turn k back from the most recent contributes its L2-normalized gram
    vector with weight decay**k; the sum is L2-normalized again. An empty
    history encodes to the zero vector.
    """
    turns, weights = [], []
    w = 1.0
    for speaker, text in history:
        grams = _turn_grams(speaker, text, config)
        if len(grams[0]):
            turns.append(grams)
            weights.append(w)
        w *= config.decay
    vec = _accumulate(turns, weights, config.dim)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def fuse(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Concatenate text and state encodings, text part first."""
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(s))):
        raise ValueError("encodings must be finite")
    return np.concatenate([r, s])


@dataclass
class EncodedDataset:
    """Batched features for a set of (dialogue, user-turn) samples."""

    text: sp.csr_matrix  # (n, featurizer dim), L2-normalized rows
    state_ctx: np.ndarray  # (n, 3 * |schema|)
    emotion: np.ndarray  # int64, -1 where unlabeled
    valence: np.ndarray
    elicitor: np.ndarray
    conduct: np.ndarray
    elicitor_mask: np.ndarray  # True where the elicitor loss is ignored
    rating: np.ndarray  # int64, -1 where absent
    refs: list[tuple[DialogueSample, int]]

    def __len__(self) -> int:
        return self.text.shape[0]


def encode_pairs(
    pairs: Sequence[tuple[DialogueSample, int]],
    schema: SlotSchema,
    config: FeaturizerConfig,
    mode: Mode,
) -> EncodedDataset:
    """Encode explicit (sample, user-turn) pairs.

    Per-dialogue turn grams are hashed once and reused across that
    dialogue's samples, which matches featurize_text exactly.
    """
    turn_cache: dict[int, list[np.ndarray]] = {}
    state_cache: dict[int, list[np.ndarray]] = {}

    rows_idx, rows_val, indptr = [], [], [0]
    ctx = np.empty((len(pairs), CONTEXT_WINDOW * schema.size))
    emotion = np.full(len(pairs), -1, dtype=np.int64)
    valence = np.full(len(pairs), -1, dtype=np.int64)
    elicitor = np.full(len(pairs), -1, dtype=np.int64)
    conduct = np.full(len(pairs), -1, dtype=np.int64)
    eli_mask = np.zeros(len(pairs), dtype=bool)
    rating = np.full(len(pairs), -1, dtype=np.int64)

    for n, (sample, t) in enumerate(pairs):
        key = id(sample)
        if key not in turn_cache:
            turn_cache[key] = [_turn_grams(turn.speaker, turn.text, config) for turn in sample.turns]
            state_cache[key] = state_vector_sequence(sample, schema)
        grams = turn_cache[key]

        last = sample.user_turns()[t - 1]
        if mode is Mode.SATISFACTION:
            last -= 1
        turns, weights = [], []
        w = 1.0
        for i in range(last, -1, -1):
            if len(grams[i][0]):
                turns.append(grams[i])
                weights.append(w)
            w *= config.decay
        vec = _accumulate(turns, weights, config.dim)
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        nz = np.nonzero(vec)[0]
        rows_idx.append(nz)
        rows_val.append(vec[nz])
        indptr.append(indptr[-1] + len(nz))

        ctx[n] = contextual_state(state_cache[key], t, mode)

        turn = sample.turns[sample.user_turns()[t - 1]]
        if turn.label is not None:
            emotion[n] = int(turn.label)
            valence[n], elicitor[n], conduct[n] = ASPECT_INDEX[turn.label]
            eli_mask[n] = turn.label is EmotionLabel.NEUTRAL  # elicitor undefined there
        if turn.rating is not None:
            rating[n] = turn.rating

    text = sp.csr_matrix(
        (
            np.concatenate(rows_val) if rows_val else np.empty(0),
            np.concatenate(rows_idx) if rows_idx else np.empty(0, dtype=np.int64),
            np.asarray(indptr),
        ),
        shape=(len(pairs), config.dim),
    )
    return EncodedDataset(
        text=text,
        state_ctx=ctx,
        emotion=emotion,
        valence=valence,
        elicitor=elicitor,
        conduct=conduct,
        elicitor_mask=eli_mask,
        rating=rating,
        refs=list(pairs),
    )


def encode_corpus(
    corpus: Corpus,
    config: FeaturizerConfig,
    mode: Mode,
    labeled_only: bool = True,
) -> EncodedDataset:
    """Encode every (labeled) user turn of a corpus."""
    pairs = []
    for sample in corpus.samples:
        for t in range(1, sample.num_user_turns + 1):
            if labeled_only and sample.user_turn(t).label is None:
                continue
            pairs.append((sample, t))
    return encode_pairs(pairs, corpus.schema, config, mode)

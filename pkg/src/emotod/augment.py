"""Data augmentation for rare emotions.

Two strategies. Context-independent emotions (abuse, by default) are
augmented by swapping the current user utterance for one with the same label
drawn from a donor pool, keeping the surrounding context intact.
Context-dependent emotions are mined from unlabeled candidate dialogues: an
ensemble of seed-varied models votes on each candidate's last user turn, and
candidates whose plurality vote reaches the confidence threshold are adopted
with the voted label. Selection is capped per emotion and fully
deterministic for fixed inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol, Sequence

import numpy as np

from .data import Corpus, DialogueSample, Turn
from .features import Mode
from .model import EmotionModel, TrainConfig, train
from .taxonomy import NUM_EMOTIONS, DistanceMatrix, EmotionLabel

__all__ = [
    "PoolUtterance",
    "ReplacementPool",
    "build_replacement_pool",
    "target_contexts",
    "replace_context_independent",
    "augment_replacement",
    "Candidate",
    "candidates_from_corpus",
    "EnsembleVote",
    "ensemble_confidence",
    "AugmentConfig",
    "select_candidates",
    "train_ensemble",
]

RARE_EMOTIONS = (
    EmotionLabel.EXCITED,
    EmotionLabel.APOLOGETIC,
    EmotionLabel.FEARFUL,
    EmotionLabel.ABUSIVE,
)


@dataclass(frozen=True)
class PoolUtterance:
    text: str
    source: str = ""


@dataclass
class ReplacementPool:
    """Donor utterances for one context-independent target emotion."""

    target: EmotionLabel
    utterances: list[PoolUtterance]


def build_replacement_pool(corpus: Corpus, target: EmotionLabel, source: str = "") -> ReplacementPool:
    """Collect the text of every user turn labeled with the target emotion."""
    utterances = [
        PoolUtterance(text=sample.turns[i].text, source=source or sample.dialogue_id)
        for sample in corpus.samples
        for i in sample.user_turns()
        if sample.turns[i].label is target
    ]
    return ReplacementPool(target=target, utterances=utterances)


def target_contexts(corpus: Corpus, target: EmotionLabel) -> list[tuple[DialogueSample, int]]:
    """(sample, user-turn) pairs whose label matches the target emotion."""
    out = []
    for sample in corpus.samples:
        for t in range(1, sample.num_user_turns + 1):
            if sample.user_turn(t).label is target:
                out.append((sample, t))
    return out


def _truncate_at_user_turn(sample: DialogueSample, t: int) -> list[Turn]:
    return [replace(turn) for turn in sample.turns[: sample.user_turns()[t - 1] + 1]]


def replace_context_independent(
    sample: DialogueSample,
    t: int,
    pool: ReplacementPool,
    rng: np.random.Generator,
) -> DialogueSample:
    """Swap user turn t's text for a pool utterance; context, state
    annotations and the label stay untouched."""
    if not pool.utterances:
        raise ValueError("replacement pool is empty")
    turn = sample.user_turn(t)
    if turn.label is not pool.target:
        raise ValueError(
            f"sample turn is labeled {turn.label and turn.label.label_name}, "
            f"pool targets {pool.target.label_name}"
        )
    drawn = pool.utterances[int(rng.integers(len(pool.utterances)))]
    turns = _truncate_at_user_turn(sample, t)
    turns[-1] = replace(turns[-1], text=drawn.text)
    return DialogueSample(
        dialogue_id=f"{sample.dialogue_id}-aug",
        domain=sample.domain,
        turns=turns,
        provenance={
            "strategy": "replacement",
            "source": drawn.source,
            "context_id": sample.dialogue_id,
            "context_turn": t,
        },
    )


def augment_replacement(
    pool: ReplacementPool,
    contexts: Sequence[tuple[DialogueSample, int]],
    rng: np.random.Generator,
    cap: int | None = None,
) -> list[DialogueSample]:
    """Pair each pool utterance with one uniformly drawn context.

    Yields min(len(pool), cap) samples; each keeps its context's turns,
    states and label, with only the final user utterance swapped.
    """
    if not contexts:
        raise ValueError("no context samples carry the pool's target emotion")
    budget = len(pool.utterances) if cap is None else min(len(pool.utterances), cap)
    out = []
    for i in range(budget):
        sample, t = contexts[int(rng.integers(len(contexts)))]
        one_shot = ReplacementPool(target=pool.target, utterances=[pool.utterances[i]])
        aug = replace_context_independent(sample, t, one_shot, rng)
        aug.dialogue_id = f"{sample.dialogue_id}-aug{i:04d}"
        out.append(aug)
    return out


@dataclass(frozen=True)
class Candidate:
    """An unlabeled dialogue prefix whose final user turn is to be labeled."""

    sample: DialogueSample
    turn: int

    @property
    def domain(self) -> str:
        return self.sample.domain


def candidates_from_corpus(corpus: Corpus) -> list[Candidate]:
    """One candidate per dialogue, at its last user turn."""
    return [Candidate(sample=s, turn=s.num_user_turns) for s in corpus.samples if s.num_user_turns]


class Predictor(Protocol):
    def predict_probs(self, sample: DialogueSample, t: int, mode: Mode | str | None = ...) -> np.ndarray: ...


@dataclass
class EnsembleVote:
    """Outcome of polling the ensemble on one candidate."""

    votes: np.ndarray  # per-model predicted label indices
    mean_probs: np.ndarray
    label: EmotionLabel | None  # None when the vote is unresolvably tied
    confidence: float

    @property
    def usable(self) -> bool:
        return self.label is not None


def resolve_votes(votes: np.ndarray, mean_probs: np.ndarray) -> EnsembleVote:
    """Plurality label and vote-fraction confidence.

    Vote ties break toward the higher mean probability; a remaining exact
    tie marks the candidate unusable.
    """
    counts = np.bincount(votes, minlength=NUM_EMOTIONS)
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) > 1:
        best = mean_probs[tied].max()
        tied = tied[mean_probs[tied] == best]
    label = EmotionLabel(int(tied[0])) if len(tied) == 1 else None
    return EnsembleVote(
        votes=votes,
        mean_probs=mean_probs,
        label=label,
        confidence=float(top) / len(votes),
    )


def ensemble_confidence(candidate: Candidate, predictors: Sequence[Predictor]) -> EnsembleVote:
    """Poll every model on the candidate's final user turn (ERC mode)."""
    if not predictors:
        raise ValueError("ensemble is empty")
    probs = np.stack([p.predict_probs(candidate.sample, candidate.turn, Mode.ERC) for p in predictors])
    votes = np.argmax(probs, axis=1)
    return resolve_votes(votes, probs.mean(axis=0))


@dataclass
class AugmentConfig:
    theta: float = 0.7
    cap: int = 1000
    targets: tuple[EmotionLabel, ...] = RARE_EMOTIONS
    domains: tuple[str, ...] | None = None  # None = no domain filter

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if self.cap < 0:
            raise ValueError("cap must be >= 0")


def select_candidates(
    candidates: Sequence[Candidate],
    predictors: Sequence[Predictor],
    config: AugmentConfig,
    source: str = "",
) -> list[DialogueSample]:
    """Adopt candidates whose ensemble vote clears the threshold.

    A candidate is kept when its domain passes the filter, its voted label
    is a configured target, and its confidence is >= theta. Per emotion, the
    keepers are ordered by (confidence desc, mean target probability desc,
    input order) and truncated to the cap.
    """
    kept: dict[EmotionLabel, list[tuple[float, float, int, Candidate, EnsembleVote]]] = {
        t: [] for t in config.targets
    }
    for i, cand in enumerate(candidates):
        if config.domains is not None and cand.domain not in config.domains:
            continue
        vote = ensemble_confidence(cand, predictors)
        if not vote.usable or vote.label not in config.targets:
            continue
        if vote.confidence < config.theta:
            continue
        kept[vote.label].append((-vote.confidence, -vote.mean_probs[int(vote.label)], i, cand, vote))

    out: list[DialogueSample] = []
    for label in config.targets:
        group = sorted(kept[label], key=lambda item: item[:3])[: config.cap]
        for _, neg_prob, i, cand, vote in group:
            turns = _truncate_at_user_turn(cand.sample, cand.turn)
            turns[-1] = replace(turns[-1], label=label)
            out.append(
                DialogueSample(
                    dialogue_id=f"{cand.sample.dialogue_id}-aug",
                    domain=cand.sample.domain,
                    turns=turns,
                    provenance={
                        "strategy": "ensemble",
                        "source": source or cand.sample.dialogue_id,
                        "confidence": vote.confidence,
                        "mean_prob": -neg_prob,
                    },
                )
            )
    return out


def train_ensemble(
    corpus: Corpus,
    config: TrainConfig,
    dm: DistanceMatrix,
    dev_corpus: Corpus | None = None,
    featurizer=None,
    size: int = 10,
    base_seed: int = 1000,
    dropout: float = 0.3,
) -> list[EmotionModel]:
    """Seed-diversified ensemble, trained with trunk dropout."""
    models = []
    for k in range(size):
        cfg = replace(config, seed=base_seed + k, dropout=dropout)
        model, _ = train(corpus, cfg, dm, dev_corpus=dev_corpus, featurizer=featurizer)
        models.append(model)
    return models

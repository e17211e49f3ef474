"""Emotion taxonomy for task-oriented dialogues.

Seven user-emotion classes, each described by three aspects: the valence of
the reaction, what elicited it, and the conduct of its expression. The
pairwise aspect distances induce a 7x7 inter-emotion distance matrix used by
the distance-weighted loss and the average-emotion-distance metric.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Valence",
    "Elicitor",
    "Conduct",
    "EmotionLabel",
    "AspectProfile",
    "PROFILES",
    "ASPECT_INDEX",
    "HEAD_SIZES",
    "NUM_EMOTIONS",
    "aspect_distance_valence",
    "aspect_distance_elicitor",
    "aspect_distance_conduct",
    "DistanceMatrix",
    "build_distance_matrix",
]


class Valence(enum.Enum):
    NEUTRAL = "neutral"
    POSITIVE = "positive"
    NEGATIVE = "negative"


class Elicitor(enum.Enum):
    DONT_CARE = "dont_care"
    OPERATOR = "operator"
    USER = "user"
    EVENT_FACT = "event_fact"


class Conduct(enum.Enum):
    POLITE = "polite"
    IMPOLITE = "impolite"


class EmotionLabel(enum.IntEnum):
    """The seven classes, in canonical index order 0..6.

    This ordering is the index space for every vector, matrix and serialized
    output in the package.
    """

    NEUTRAL = 0
    SATISFIED = 1
    DISSATISFIED = 2
    EXCITED = 3
    APOLOGETIC = 4
    FEARFUL = 5
    ABUSIVE = 6

    @property
    def label_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "EmotionLabel":
        try:
            return cls[name.upper()]
        except KeyError:
            valid = ", ".join(label.label_name for label in cls)
            raise ValueError(f"unknown emotion label {name!r}; expected one of: {valid}") from None


NUM_EMOTIONS = len(EmotionLabel)


@dataclass(frozen=True)
class AspectProfile:
    """The (valence, elicitor, conduct) triple describing one emotion class."""

    valence: Valence
    elicitor: Elicitor
    conduct: Conduct


PROFILES: dict[EmotionLabel, AspectProfile] = {
    EmotionLabel.NEUTRAL: AspectProfile(Valence.NEUTRAL, Elicitor.DONT_CARE, Conduct.POLITE),
    EmotionLabel.SATISFIED: AspectProfile(Valence.POSITIVE, Elicitor.OPERATOR, Conduct.POLITE),
    EmotionLabel.DISSATISFIED: AspectProfile(Valence.NEGATIVE, Elicitor.OPERATOR, Conduct.POLITE),
    EmotionLabel.EXCITED: AspectProfile(Valence.POSITIVE, Elicitor.EVENT_FACT, Conduct.POLITE),
    EmotionLabel.APOLOGETIC: AspectProfile(Valence.NEGATIVE, Elicitor.USER, Conduct.POLITE),
    EmotionLabel.FEARFUL: AspectProfile(Valence.NEGATIVE, Elicitor.EVENT_FACT, Conduct.POLITE),
    EmotionLabel.ABUSIVE: AspectProfile(Valence.NEGATIVE, Elicitor.OPERATOR, Conduct.IMPOLITE),
}


# Per-aspect class indices (enum declaration order) for the three MTL heads.
ASPECT_INDEX: dict[EmotionLabel, tuple[int, int, int]] = {
    label: (
        list(Valence).index(profile.valence),
        list(Elicitor).index(profile.elicitor),
        list(Conduct).index(profile.conduct),
    )
    for label, profile in PROFILES.items()
}

HEAD_SIZES = {
    "emotion": NUM_EMOTIONS,
    "valence": len(Valence),
    "elicitor": len(Elicitor),
    "conduct": len(Conduct),
}


def aspect_distance_valence(a: Valence, b: Valence) -> float:
    """2 between the two polarities, 1 between neutral and either polarity."""
    if a is b:
        return 0.0
    if Valence.NEUTRAL in (a, b):
        return 1.0
    return 2.0


def aspect_distance_elicitor(a: Elicitor, b: Elicitor) -> float:
    """0.5 between don't-care and any specific elicitor, 1 between distinct
    specific elicitors."""
    if a is b:
        return 0.0
    if Elicitor.DONT_CARE in (a, b):
        return 0.5
    return 1.0


def aspect_distance_conduct(a: Conduct, b: Conduct) -> float:
    """Unit distance between polite and impolite."""
    return 0.0 if a is b else 1.0


@dataclass(frozen=True)
class DistanceMatrix:
    """Inter-emotion distances.

    raw[i, j] is the sum of the three per-aspect distances between the
    profiles of classes i and j; smoothed[i, j] = ln(raw[i, j] + 1), so the
    diagonal stays zero. Both matrices are symmetric and immutable.
    """

    raw: np.ndarray
    smoothed: np.ndarray

    def __post_init__(self) -> None:
        self.raw.setflags(write=False)
        self.smoothed.setflags(write=False)

    def to_csv(self) -> str:
        """7x7 smoothed-distance table with a label header row/column."""
        names = [label.label_name for label in EmotionLabel]
        lines = ["," + ",".join(names)]
        for i, name in enumerate(names):
            row = ",".join(f"{self.smoothed[i, j]:.12f}" for j in range(NUM_EMOTIONS))
            lines.append(f"{name},{row}")
        return "\n".join(lines) + "\n"


def build_distance_matrix() -> DistanceMatrix:
    """Derive the 7x7 distance matrix from the aspect profiles."""
    raw = np.zeros((NUM_EMOTIONS, NUM_EMOTIONS))
    for i in EmotionLabel:
        for j in EmotionLabel:
            pi, pj = PROFILES[i], PROFILES[j]
            raw[i, j] = (
                aspect_distance_valence(pi.valence, pj.valence)
                + aspect_distance_elicitor(pi.elicitor, pj.elicitor)
                + aspect_distance_conduct(pi.conduct, pj.conduct)
            )
    return DistanceMatrix(raw=raw, smoothed=np.log1p(raw))

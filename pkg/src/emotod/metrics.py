"""Evaluation harness.

Per-class precision/recall/F1 from a confusion matrix, macro and weighted
averages over the six non-neutral classes, the average emotion distance
(mean smoothed distance between the true label and the prediction, per true
class; lower is better), and the binary satisfaction view: emotions map to
positive/negative satisfaction, gold 1..5 ratings collapse to negative for
{1,2} and positive for {3,4,5}.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .taxonomy import NUM_EMOTIONS, DistanceMatrix, EmotionLabel

__all__ = [
    "confusion_matrix",
    "ClassMetrics",
    "EvalReport",
    "f1_scores",
    "aed",
    "evaluate",
    "Satisfaction",
    "DEFAULT_SATISFACTION_MAPPING",
    "map_to_satisfaction",
    "ratings_to_binary",
    "binary_f1",
]

NON_NEUTRAL = [label for label in EmotionLabel if label is not EmotionLabel.NEUTRAL]


def confusion_matrix(true: Sequence[int], pred: Sequence[int], n: int = NUM_EMOTIONS) -> np.ndarray:
    """Counts with rows = true label, columns = predicted label."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise ValueError("true and predicted label sequences differ in length")
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    aed: float | None = None


@dataclass
class EvalReport:
    """Per-class scores plus averages over the six non-neutral classes."""

    per_class: dict[EmotionLabel, ClassMetrics]
    macro_f1: float
    weighted_f1: float
    macro_aed: float | None = None
    weighted_aed: float | None = None

    def to_dict(self) -> dict:
        return {
            "per_class": {
                label.label_name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "aed": m.aed,
                }
                for label, m in self.per_class.items()
            },
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "macro_aed": self.macro_aed,
            "weighted_aed": self.weighted_aed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        """Fixed-width grid: one row per class, F1 and AED columns."""
        lines = [f"{'class':<14}{'prec':>8}{'recall':>8}{'f1':>8}{'aed':>8}{'support':>9}"]
        for label, m in self.per_class.items():
            aed_s = f"{m.aed:.3f}" if m.aed is not None else "-"
            lines.append(
                f"{label.label_name:<14}{m.precision:>8.3f}{m.recall:>8.3f}{m.f1:>8.3f}{aed_s:>8}{m.support:>9}"
            )
        lines.append(f"{'macro (non-neutral)':<30}f1={self.macro_f1:.4f}" + (f" aed={self.macro_aed:.4f}" if self.macro_aed is not None else ""))
        lines.append(f"{'weighted (non-neutral)':<30}f1={self.weighted_f1:.4f}" + (f" aed={self.weighted_aed:.4f}" if self.weighted_aed is not None else ""))
        return "\n".join(lines) + "\n"


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def f1_scores(cm: np.ndarray) -> EvalReport:
    """Per-class P/R/F1 with the zero convention on empty denominators.

    Macro F1 is the unweighted mean over the six non-neutral classes
    (zero-support classes enter at 0); weighted F1 weights each of those
    classes by its share of the non-neutral true-label counts.
    """
    cm = np.asarray(cm)
    per_class: dict[EmotionLabel, ClassMetrics] = {}
    for label in EmotionLabel:
        i = int(label)
        tp = float(cm[i, i])
        precision = _safe_div(tp, float(cm[:, i].sum()))
        recall = _safe_div(tp, float(cm[i, :].sum()))
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        per_class[label] = ClassMetrics(precision, recall, f1, int(cm[i, :].sum()))
    f1s = np.array([per_class[label].f1 for label in NON_NEUTRAL])
    supports = np.array([per_class[label].support for label in NON_NEUTRAL], dtype=np.float64)
    macro = float(f1s.mean())
    weighted = float((f1s * supports).sum() / supports.sum()) if supports.sum() > 0 else 0.0
    return EvalReport(per_class=per_class, macro_f1=macro, weighted_f1=weighted)


def aed(
    true: Sequence[int] | np.ndarray,
    pred: Sequence[int] | np.ndarray | None,
    dm: DistanceMatrix,
) -> tuple[dict[EmotionLabel, float], float | None, float | None]:
    """Average emotion distance per true class, with macro/weighted averages.

    Accepts either paired (true, pred) label sequences or a confusion matrix
    as `true` with pred=None. Zero-support classes are absent from the
    per-class map; averages run over the non-neutral classes present.
    """
    if pred is None:
        cm = np.asarray(true)
    else:
        cm = confusion_matrix(true, pred)
    per_class: dict[EmotionLabel, float] = {}
    for label in EmotionLabel:
        i = int(label)
        support = cm[i, :].sum()
        if support > 0:
            per_class[label] = float(cm[i, :] @ dm.smoothed[i] / support)
    present = [label for label in NON_NEUTRAL if label in per_class]
    if not present:
        return per_class, None, None
    vals = np.array([per_class[label] for label in present])
    supports = np.array([cm[int(label), :].sum() for label in present], dtype=np.float64)
    return per_class, float(vals.mean()), float((vals * supports).sum() / supports.sum())


def evaluate(true: Sequence[int], pred: Sequence[int], dm: DistanceMatrix) -> EvalReport:
    """Full report: F1 block plus AED block from paired labels."""
    cm = confusion_matrix(true, pred)
    report = f1_scores(cm)
    per_aed, macro_aed, weighted_aed = aed(cm, None, dm)
    for label, value in per_aed.items():
        report.per_class[label].aed = value
    report.macro_aed = macro_aed
    report.weighted_aed = weighted_aed
    return report


class Satisfaction(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


DEFAULT_SATISFACTION_MAPPING: dict[EmotionLabel, Satisfaction] = {
    EmotionLabel.NEUTRAL: Satisfaction.POSITIVE,
    EmotionLabel.SATISFIED: Satisfaction.POSITIVE,
    EmotionLabel.EXCITED: Satisfaction.POSITIVE,
    EmotionLabel.APOLOGETIC: Satisfaction.POSITIVE,
    EmotionLabel.DISSATISFIED: Satisfaction.NEGATIVE,
    EmotionLabel.FEARFUL: Satisfaction.NEGATIVE,
    EmotionLabel.ABUSIVE: Satisfaction.NEGATIVE,
}


def map_to_satisfaction(
    pred: EmotionLabel, mapping: Mapping[EmotionLabel, Satisfaction] = DEFAULT_SATISFACTION_MAPPING
) -> Satisfaction:
    """Binary satisfaction image of an emotion prediction."""
    return mapping[pred]


def ratings_to_binary(ratings: Sequence[int]) -> list[Satisfaction]:
    """Collapse 1..5 ratings: {1,2} negative, {3,4,5} positive."""
    out = []
    for r in ratings:
        if not 1 <= int(r) <= 5:
            raise ValueError(f"satisfaction rating out of range 1..5: {r}")
        out.append(Satisfaction.NEGATIVE if r <= 2 else Satisfaction.POSITIVE)
    return out


def binary_f1(gold: Sequence[Satisfaction], pred: Sequence[Satisfaction]) -> dict[str, float]:
    """F1 of each binary class; the negative-class F1 (dissatisfaction
    detection) is the headline number."""
    if len(gold) != len(pred):
        raise ValueError("gold and predicted sequences differ in length")
    out = {}
    for cls, key in ((Satisfaction.NEGATIVE, "negative_f1"), (Satisfaction.POSITIVE, "positive_f1")):
        tp = sum(1 for g, p in zip(gold, pred) if g is cls and p is cls)
        fp = sum(1 for g, p in zip(gold, pred) if g is not cls and p is cls)
        fn = sum(1 for g, p in zip(gold, pred) if g is cls and p is not cls)
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        out[key] = _safe_div(2.0 * precision * recall, precision + recall)
    return out

"""Training objectives.

The emotion head is trained with a distance-weighted loss: the probability
mass a prediction puts on each *incorrect* class is penalised in proportion
to that class's smoothed distance from the true label. The three aspect
heads (valence, elicitor, conduct) use softmax cross-entropy, with the
elicitor loss masked out on neutral samples. A weighted combiner merges the
four head losses into the joint objective.

All gradients are returned with respect to the pre-softmax logits, so the
per-sample operations here are the single source of truth that the batched
trainer and the finite-difference checks both reference.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .taxonomy import NUM_EMOTIONS, DistanceMatrix, EmotionLabel

__all__ = [
    "PROB_CLAMP",
    "LossResult",
    "MtlWeights",
    "softmax",
    "emotion_distance_weights",
    "emotion_distance_loss",
    "cross_entropy_loss",
    "mtl_combine",
    "emotion_distance_loss_batch",
    "cross_entropy_loss_batch",
]

# Keeps ln(1 - p) finite when a wrong class soaks up nearly all mass.
PROB_CLAMP = 1e-7


@dataclass
class LossResult:
    """Scalar loss value plus its gradient w.r.t. the head logits."""

    value: float
    grad_wrt_logits: np.ndarray


@dataclass(frozen=True)
class MtlWeights:
    """Head weighting for the joint objective.

    The emotion head gets weight alpha, each aspect head (1 - alpha) / 3,
    so the four weights always sum to 1.
    """

    alpha: float = 0.4
    aspect: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        object.__setattr__(self, "aspect", (1.0 - self.alpha) / 3.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _check_probs(p: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (n,):
        raise ValueError(f"expected a length-{n} probability vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector contains non-finite entries")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probability vector is not normalized")
    return p


def emotion_distance_weights(label: EmotionLabel, dm: DistanceMatrix) -> np.ndarray:
    """Normalize the label's smoothed-distance row into misclassification weights.

    The entry at the label itself is 0 (zero self-distance) and the rest sum
    to 1, so each incorrect class is weighted by how far it is from the truth.
    """
    row = dm.smoothed[int(label)]
    return row / row.sum()


def emotion_distance_loss(
    p: np.ndarray, label: EmotionLabel, dm: DistanceMatrix, clamp: float = PROB_CLAMP
) -> LossResult:
    """Distance-weighted penalty on incorrect-class probability mass.

    value = -sum_i w_i * ln(1 - p_i), with w from emotion_distance_weights.
    Since w is 0 at the true label, the correct-class probability never
    enters the value directly; a perfectly correct one-hot prediction costs 0.
    Probabilities are clamped to <= 1 - clamp before the log.
    """
    p = _check_probs(p, NUM_EMOTIONS)
    w = emotion_distance_weights(label, dm)
    clamped = p > 1.0 - clamp
    p_safe = np.where(clamped, 1.0 - clamp, p)
    value = -float(np.dot(w, np.log1p(-p_safe)))
    # dL/dp_i = w_i / (1 - p_i), zero where the clamp is active; pulled back
    # through the softmax Jacobian: dL/dz_k = p_k * (g_k - g.p).
    g = np.where(clamped, 0.0, w / (1.0 - p_safe))
    grad = p * (g - np.dot(g, p))
    return LossResult(value=value, grad_wrt_logits=grad)


def cross_entropy_loss(p: np.ndarray, label_index: int, mask: bool = False) -> LossResult:
    """Softmax cross-entropy for one aspect head.

    With mask=True the sample contributes nothing: zero value, zero gradient
    (used for the elicitor head on neutral samples, whose elicitor is
    undefined). Probabilities from a softmax are strictly positive, so the
    log needs no clamp.
    """
    n = np.asarray(p).shape[-1]
    p = _check_probs(p, n)
    if not 0 <= label_index < n:
        raise ValueError(f"label index {label_index} out of range for {n} classes")
    if mask:
        return LossResult(value=0.0, grad_wrt_logits=np.zeros(n))
    value = -float(np.log(p[label_index]))
    grad = p.copy()
    grad[label_index] -= 1.0
    return LossResult(value=value, grad_wrt_logits=grad)


def mtl_combine(
    l_emo: LossResult,
    l_val: LossResult,
    l_eli: LossResult,
    l_con: LossResult,
    w: MtlWeights,
) -> LossResult:
    """Affine combination of the four head losses.

    The combined gradient is the same combination applied blockwise; it is
    returned as the concatenation [emotion | valence | elicitor | conduct]
    over the stacked head logits.
    """
    value = w.alpha * l_emo.value + w.aspect * (l_val.value + l_eli.value + l_con.value)
    grad = np.concatenate(
        [
            w.alpha * l_emo.grad_wrt_logits,
            w.aspect * l_val.grad_wrt_logits,
            w.aspect * l_eli.grad_wrt_logits,
            w.aspect * l_con.grad_wrt_logits,
        ]
    )
    return LossResult(value=value, grad_wrt_logits=grad)


def emotion_distance_loss_batch(
    probs: np.ndarray,
    labels: np.ndarray,
    dm: DistanceMatrix,
    clamp: float = PROB_CLAMP,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized emotion_distance_loss over a batch.

    probs: (n, 7) softmax outputs; labels: (n,) int indices.
    Returns (values (n,), grads_wrt_logits (n, 7)).
    """
    weights = dm.smoothed / dm.smoothed.sum(axis=1, keepdims=True)
    w = weights[labels]
    clamped = probs > 1.0 - clamp
    p_safe = np.where(clamped, 1.0 - clamp, probs)
    values = -np.sum(w * np.log1p(-p_safe), axis=1)
    g = np.where(clamped, 0.0, w / (1.0 - p_safe))
    grads = probs * (g - np.sum(g * probs, axis=1, keepdims=True))
    return values, grads


def cross_entropy_loss_batch(
    probs: np.ndarray, labels: np.ndarray, mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cross_entropy_loss; mask rows contribute zero loss/gradient."""
    n = probs.shape[0]
    rows = np.arange(n)
    values = -np.log(probs[rows, labels])
    grads = probs.copy()
    grads[rows, labels] -= 1.0
    if mask is not None:
        values = np.where(mask, 0.0, values)
        grads[mask] = 0.0
    return values, grads

"""Trainable multi-head emotion classifier.

Fused features feed a one-hidden-layer tanh trunk with four softmax heads:
emotion (7-way), valence (3-way), elicitor (4-way, don't-care included) and
conduct (2-way). Training minimises the combined objective — the
distance-weighted loss (or plain cross-entropy, for ablations) on the
emotion head plus cross-entropy on the aspect heads, mixed by alpha — with
mini-batch Adam, seed-deterministic shuffling, and early stopping on dev
macro F1 over the non-neutral classes.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import metrics
from .data import Corpus, DialogueSample, SlotSchema
from .features import (
    EncodedDataset,
    FeaturizerConfig,
    Mode,
    build_history,
    contextual_state,
    encode_corpus,
    featurize_text,
    fuse,
    project_state,
    state_vector_sequence,
)
from .losses import (
    MtlWeights,
    cross_entropy_loss_batch,
    emotion_distance_loss_batch,
    softmax,
)
from .taxonomy import HEAD_SIZES, DistanceMatrix, EmotionLabel, build_distance_matrix

__all__ = [
    "NumericError",
    "TrainConfig",
    "ModelParameters",
    "PredictionOutput",
    "init_parameters",
    "forward",
    "train",
    "EmotionModel",
]

CHECKPOINT_FORMAT = "emotod-checkpoint"
CHECKPOINT_VERSION = 1

HEAD_NAMES = ("emotion", "valence", "elicitor", "conduct")


class NumericError(Exception):
    """Raised when training hits a non-finite loss."""


@dataclass
class TrainConfig:
    alpha: float = 0.4
    seed: int = 0
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    hidden: int = 128
    d_state: int = 256
    clamp: float = 1e-7
    dropout: float = 0.0
    weight_decay: float = 0.0
    use_state: bool = True
    loss: str = "emodist"  # "emodist" | "ce"
    mode: str = Mode.ERC.value

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in ("emodist", "ce"):
            raise ValueError(f"loss must be 'emodist' or 'ce', got {self.loss!r}")
        Mode(self.mode)


@dataclass
class ModelParameters:
    """All trainable blocks. state_w/state_b are None when state features
    are disabled."""

    state_w: np.ndarray | None
    state_b: np.ndarray | None
    trunk_w: np.ndarray
    trunk_b: np.ndarray
    heads_w: dict[str, np.ndarray]
    heads_b: dict[str, np.ndarray]

    def blocks(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        if self.state_w is not None:
            out["state_w"], out["state_b"] = self.state_w, self.state_b
        out["trunk_w"], out["trunk_b"] = self.trunk_w, self.trunk_b
        for name in HEAD_NAMES:
            out[f"{name}_w"] = self.heads_w[name]
            out[f"{name}_b"] = self.heads_b[name]
        return out

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            state_w=None if self.state_w is None else self.state_w.copy(),
            state_b=None if self.state_b is None else self.state_b.copy(),
            trunk_w=self.trunk_w.copy(),
            trunk_b=self.trunk_b.copy(),
            heads_w={k: v.copy() for k, v in self.heads_w.items()},
            heads_b={k: v.copy() for k, v in self.heads_b.items()},
        )

    @property
    def d_text(self) -> int:
        d_in = self.trunk_w.shape[0]
        return d_in - (self.state_b.shape[0] if self.state_b is not None else 0)


@dataclass
class PredictionOutput:
    emotion_probs: np.ndarray
    valence_probs: np.ndarray
    elicitor_probs: np.ndarray
    conduct_probs: np.ndarray

    @property
    def emotion(self) -> EmotionLabel:
        # np.argmax takes the first maximum, i.e. lowest-index tie-break
        return EmotionLabel(int(np.argmax(self.emotion_probs)))

    @property
    def argmax(self) -> dict[str, int]:
        return {
            "emotion": int(np.argmax(self.emotion_probs)),
            "valence": int(np.argmax(self.valence_probs)),
            "elicitor": int(np.argmax(self.elicitor_probs)),
            "conduct": int(np.argmax(self.conduct_probs)),
        }


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_parameters(d_text: int, schema_size: int, config: TrainConfig, rng: np.random.Generator) -> ModelParameters:
    """Glorot-uniform weights from the seeded generator, zero biases."""
    if config.use_state:
        state_in = 3 * schema_size
        state_w = _glorot(rng, state_in, config.d_state)
        state_b = np.zeros(config.d_state)
        d_in = d_text + config.d_state
    else:
        state_w = state_b = None
        d_in = d_text
    trunk_w = _glorot(rng, d_in, config.hidden)
    trunk_b = np.zeros(config.hidden)
    heads_w = {name: _glorot(rng, config.hidden, size) for name, size in HEAD_SIZES.items()}
    heads_b = {name: np.zeros(size) for name, size in HEAD_SIZES.items()}
    return ModelParameters(state_w, state_b, trunk_w, trunk_b, heads_w, heads_b)


def forward(fused: np.ndarray, params: ModelParameters) -> PredictionOutput:
    """Deterministic forward pass on one fused feature vector."""
    fused = np.asarray(fused, dtype=np.float64)
    if fused.shape != (params.trunk_w.shape[0],):
        raise ValueError(f"fused vector of length {fused.shape} does not match trunk input {params.trunk_w.shape[0]}")
    if not np.all(np.isfinite(fused)):
        raise ValueError("fused features contain non-finite values")
    hidden = np.tanh(fused @ params.trunk_w + params.trunk_b)
    probs = {name: softmax(hidden @ params.heads_w[name] + params.heads_b[name]) for name in HEAD_NAMES}
    return PredictionOutput(probs["emotion"], probs["valence"], probs["elicitor"], probs["conduct"])


def _batch_forward(
    text: sp.csr_matrix | np.ndarray,
    ctx: np.ndarray,
    params: ModelParameters,
    dropout_mask: np.ndarray | None = None,
) -> dict:
    """Shared forward over a batch; returns activations needed by backward."""
    d_text = params.d_text
    if params.state_w is not None:
        s = np.tanh(ctx @ params.state_w + params.state_b)
        h_pre = text @ params.trunk_w[:d_text] + s @ params.trunk_w[d_text:] + params.trunk_b
    else:
        s = None
        h_pre = text @ params.trunk_w + params.trunk_b
    hidden = np.tanh(h_pre)
    hidden_out = hidden * dropout_mask if dropout_mask is not None else hidden
    probs = {name: softmax(hidden_out @ params.heads_w[name] + params.heads_b[name]) for name in HEAD_NAMES}
    return {"state": s, "hidden": hidden, "hidden_out": hidden_out, "probs": probs}


def _batch_objective(
    batch: dict,
    params: ModelParameters,
    config: TrainConfig,
    dm: DistanceMatrix,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean combined loss over a batch and its gradients per parameter block."""
    text, ctx = batch["text"], batch["ctx"]
    n = ctx.shape[0]
    acts = _batch_forward(text, ctx, params, dropout_mask)
    probs = acts["probs"]

    if config.loss == "emodist":
        emo_vals, emo_grads = emotion_distance_loss_batch(probs["emotion"], batch["emotion"], dm, config.clamp)
    else:
        emo_vals, emo_grads = cross_entropy_loss_batch(probs["emotion"], batch["emotion"])
    val_vals, val_grads = cross_entropy_loss_batch(probs["valence"], batch["valence"])
    eli_vals, eli_grads = cross_entropy_loss_batch(probs["elicitor"], batch["elicitor"], batch["elicitor_mask"])
    con_vals, con_grads = cross_entropy_loss_batch(probs["conduct"], batch["conduct"])

    w = MtlWeights(config.alpha)
    value = float(
        w.alpha * emo_vals.mean() + w.aspect * (val_vals.mean() + eli_vals.mean() + con_vals.mean())
    )

    dlogits = {
        "emotion": (w.alpha / n) * emo_grads,
        "valence": (w.aspect / n) * val_grads,
        "elicitor": (w.aspect / n) * eli_grads,
        "conduct": (w.aspect / n) * con_grads,
    }
    hidden, hidden_out = acts["hidden"], acts["hidden_out"]
    grads: dict[str, np.ndarray] = {}
    d_hidden_out = np.zeros_like(hidden)
    for name in HEAD_NAMES:
        grads[f"{name}_w"] = hidden_out.T @ dlogits[name]
        grads[f"{name}_b"] = dlogits[name].sum(axis=0)
        d_hidden_out += dlogits[name] @ params.heads_w[name].T
    d_hidden = d_hidden_out * dropout_mask if dropout_mask is not None else d_hidden_out
    d_hpre = d_hidden * (1.0 - hidden**2)

    d_text = params.d_text
    grads["trunk_b"] = d_hpre.sum(axis=0)
    if params.state_w is not None:
        s = acts["state"]
        trunk_grad = np.empty_like(params.trunk_w)
        trunk_grad[:d_text] = text.T @ d_hpre
        trunk_grad[d_text:] = s.T @ d_hpre
        grads["trunk_w"] = trunk_grad
        d_s = d_hpre @ params.trunk_w[d_text:].T
        d_spre = d_s * (1.0 - s**2)
        grads["state_w"] = ctx.T @ d_spre
        grads["state_b"] = d_spre.sum(axis=0)
    else:
        grads["trunk_w"] = text.T @ d_hpre
    return value, grads


class _Adam:
    """Adaptive-moment gradient descent with decoupled weight decay."""

    def __init__(
        self,
        blocks: dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(v) for k, v in blocks.items()}
        self.v = {k: np.zeros_like(v) for k, v in blocks.items()}
        self.t = 0

    def step(self, blocks: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in blocks.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            if self.weight_decay and not k.endswith("_b"):
                p -= self.lr * self.weight_decay * p


def _dataset_batch(ds: EncodedDataset, idx: np.ndarray) -> dict:
    return {
        "text": ds.text[idx],
        "ctx": ds.state_ctx[idx],
        "emotion": ds.emotion[idx],
        "valence": ds.valence[idx],
        "elicitor": ds.elicitor[idx],
        "conduct": ds.conduct[idx],
        "elicitor_mask": ds.elicitor_mask[idx],
    }


def _dev_macro_f1(ds: EncodedDataset, params: ModelParameters, dm: DistanceMatrix) -> float:
    acts = _batch_forward(ds.text, ds.state_ctx, params)
    preds = np.argmax(acts["probs"]["emotion"], axis=1)
    cm = metrics.confusion_matrix(ds.emotion, preds)
    return metrics.f1_scores(cm).macro_f1


def train(
    corpus: Corpus,
    config: TrainConfig,
    dm: DistanceMatrix | None = None,
    dev_corpus: Corpus | None = None,
    featurizer: FeaturizerConfig | None = None,
) -> tuple["EmotionModel", list[dict]]:
    """Train on every labeled user turn of the corpus.

    With a dev corpus, logs per-epoch dev macro F1 (neutral excluded) and
    returns the best-dev checkpoint under the configured patience; without
    one, runs the full epoch budget and returns the final parameters.
    """
    dm = dm or build_distance_matrix()
    featurizer = featurizer or FeaturizerConfig()
    mode = Mode(config.mode)
    ds = encode_corpus(corpus, featurizer, mode)
    if len(ds) == 0:
        raise ValueError("training corpus has no labeled user turns")
    dev_ds = encode_corpus(dev_corpus, featurizer, mode) if dev_corpus is not None else None

    rng = np.random.default_rng(config.seed)
    params = init_parameters(featurizer.dim, corpus.schema.size, config, rng)
    adam = _Adam(params.blocks(), config.learning_rate, weight_decay=config.weight_decay)

    best_params = params.copy()
    best_f1 = -1.0
    since_best = 0
    log: list[dict] = []
    n = len(ds)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = _dataset_batch(ds, idx)
            mask = None
            if config.dropout > 0.0:
                keep = 1.0 - config.dropout
                mask = (rng.random((len(idx), config.hidden)) < keep) / keep
            value, grads = _batch_objective(batch, params, config, dm, mask)
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            epoch_loss += value * len(idx)
            adam.step(params.blocks(), grads)
        entry = {"epoch": epoch, "train_loss": epoch_loss / n}
        if dev_ds is not None:
            f1 = _dev_macro_f1(dev_ds, params, dm)
            entry["dev_macro_f1"] = f1
            if f1 > best_f1:
                best_f1, best_params, since_best = f1, params.copy(), 0
            else:
                since_best += 1
        log.append(entry)
        if dev_ds is not None and since_best >= config.patience:
            break

    final = best_params if dev_ds is not None else params
    model = EmotionModel(params=final, config=config, featurizer=featurizer, schema=corpus.schema)
    return model, log


@dataclass
class EmotionModel:
    """Frozen parameters plus everything needed to featurize new samples."""

    params: ModelParameters
    config: TrainConfig
    featurizer: FeaturizerConfig
    schema: SlotSchema

    def _fused(self, sample: DialogueSample, t: int, mode: Mode) -> np.ndarray:
        text = featurize_text(build_history(sample, t, mode), self.featurizer)
        if not self.config.use_state:
            return text
        states = state_vector_sequence(sample, self.schema)
        ctx = contextual_state(states, t, mode)
        s = project_state(ctx, self.params.state_w, self.params.state_b)
        return fuse(text, s)

    def predict(self, sample: DialogueSample, t: int, mode: Mode | str | None = None) -> PredictionOutput:
        """Featurize -> fuse -> forward for user turn t (1-based)."""
        mode = Mode(mode) if mode is not None else Mode(self.config.mode)
        return forward(self._fused(sample, t, mode), self.params)

    def predict_probs(self, sample: DialogueSample, t: int, mode: Mode | str | None = None) -> np.ndarray:
        return self.predict(sample, t, mode).emotion_probs

    def predict_dataset(self, ds: EncodedDataset) -> np.ndarray:
        """Argmax emotion indices for a pre-encoded dataset."""
        acts = _batch_forward(ds.text, ds.state_ctx, self.params)
        return np.argmax(acts["probs"]["emotion"], axis=1)

    def save(self, path: str) -> None:
        """Write the versioned checkpoint container (see README for layout)."""
        meta = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "train_config": asdict(self.config),
            "featurizer": asdict(self.featurizer),
            "slots": list(self.schema.slots),
            "labels": [label.label_name for label in EmotionLabel],
        }
        with open(path, "wb") as fh:
            np.savez(fh, meta=json.dumps(meta), **self.params.blocks())

    @classmethod
    def load(cls, path: str) -> "EmotionModel":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} file")
            config = TrainConfig(**meta["train_config"])
            featurizer = FeaturizerConfig(**meta["featurizer"])
            schema = SlotSchema(tuple(meta["slots"]))
            arrays = {k: data[k] for k in data.files if k != "meta"}
        params = ModelParameters(
            state_w=arrays.get("state_w"),
            state_b=arrays.get("state_b"),
            trunk_w=arrays["trunk_w"],
            trunk_b=arrays["trunk_b"],
            heads_w={name: arrays[f"{name}_w"] for name in HEAD_NAMES},
            heads_b={name: arrays[f"{name}_b"] for name in HEAD_NAMES},
        )
        return cls(params=params, config=config, featurizer=featurizer, schema=schema)

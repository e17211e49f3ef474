"""Emotion recognition for task-oriented dialogues.

A structured seven-class emotion taxonomy with a derived inter-class
distance matrix, a distance-weighted training loss, multi-task aspect heads,
dialogue-state feature fusion, two data-augmentation strategies, and an
evaluation harness including the average-emotion-distance metric and a
zero-shot satisfaction mapping.
"""
from .taxonomy import (
    AspectProfile,
    Conduct,
    DistanceMatrix,
    Elicitor,
    EmotionLabel,
    PROFILES,
    Valence,
    build_distance_matrix,
)
from .losses import (
    LossResult,
    MtlWeights,
    cross_entropy_loss,
    emotion_distance_loss,
    emotion_distance_weights,
    mtl_combine,
    softmax,
)
from .data import (
    Corpus,
    CorpusFormatError,
    DialogueSample,
    SlotSchema,
    SynthConfig,
    Turn,
    generate_synthetic,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .features import (
    FeaturizerConfig,
    Mode,
    build_history,
    contextual_state,
    encode_corpus,
    featurize_text,
    fuse,
    project_state,
    vectorize_state,
)
from .model import EmotionModel, ModelParameters, NumericError, PredictionOutput, TrainConfig, forward, train
from .metrics import (
    EvalReport,
    Satisfaction,
    aed,
    binary_f1,
    confusion_matrix,
    evaluate,
    f1_scores,
    map_to_satisfaction,
    ratings_to_binary,
)
from .augment import (
    AugmentConfig,
    Candidate,
    EnsembleVote,
    ReplacementPool,
    augment_replacement,
    build_replacement_pool,
    candidates_from_corpus,
    ensemble_confidence,
    replace_context_independent,
    select_candidates,
    train_ensemble,
)

__version__ = "0.1.0"

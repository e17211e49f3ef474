"""Corpus model, line-delimited JSON I/O, and the synthetic dialogue generator.

A corpus file is UTF-8 JSON-lines: one header record declaring the slot
schema and turn-order convention, then one record per dialogue. The synthetic
generator emits task-oriented dialogues with per-turn emotion labels drawn
from a configurable class-proportion vector, lexical cue tokens, and optional
dialogue-state fill/unfill events correlated with the labels, so learning and
evaluation can be validated end to end without any external dataset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .taxonomy import NUM_EMOTIONS, EmotionLabel

__all__ = [
    "CorpusFormatError",
    "SlotSchema",
    "Turn",
    "DialogueSample",
    "Corpus",
    "load_corpus",
    "save_corpus",
    "SynthConfig",
    "generate_synthetic",
    "split_corpus",
    "strip_annotations",
]

FORMAT_NAME = "emotod-corpus"
FORMAT_VERSION = 1


class CorpusFormatError(Exception):
    """Raised for malformed corpus files; messages carry the line number."""


@dataclass(frozen=True)
class SlotSchema:
    """Ordered slot names; the order fixes each slot's state-vector index."""

    slots: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.slots:
            raise ValueError("slot schema must declare at least one slot")
        if len(set(self.slots)) != len(self.slots):
            raise ValueError("slot schema contains duplicate slot names")

    @property
    def size(self) -> int:
        return len(self.slots)

    def index(self, slot: str) -> int:
        try:
            return self.slots.index(slot)
        except ValueError:
            raise KeyError(f"unknown slot {slot!r}") from None


@dataclass
class Turn:
    speaker: str  # "user" | "system"
    text: str
    state: dict[str, str] | None = None  # user turns: dialogue state after the turn
    label: EmotionLabel | None = None
    rating: int | None = None  # satisfaction rating 1..5


@dataclass
class DialogueSample:
    dialogue_id: str
    domain: str
    turns: list[Turn]
    provenance: dict | None = None

    def user_turns(self) -> list[int]:
        """Indices into self.turns of the user turns, in order."""
        return [i for i, t in enumerate(self.turns) if t.speaker == "user"]

    def user_turn(self, t: int) -> Turn:
        """The t-th user turn, 1-based."""
        return self.turns[self.user_turns()[t - 1]]

    @property
    def num_user_turns(self) -> int:
        return len(self.user_turns())


@dataclass
class Corpus:
    schema: SlotSchema
    samples: list[DialogueSample]
    first_speaker: str = "user"
    split: str | None = None

    def __len__(self) -> int:
        return len(self.samples)


def _turn_to_record(turn: Turn) -> dict:
    rec: dict = {"speaker": turn.speaker, "text": turn.text}
    if turn.state is not None:
        rec["state"] = turn.state
    if turn.label is not None:
        rec["label"] = turn.label.label_name
    if turn.rating is not None:
        rec["rating"] = turn.rating
    return rec


def save_corpus(corpus: Corpus, path: str) -> None:
    header = {
        "record": "header",
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "slots": list(corpus.schema.slots),
        "first_speaker": corpus.first_speaker,
    }
    if corpus.split is not None:
        header["split"] = corpus.split
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for sample in corpus.samples:
            rec = {
                "record": "dialogue",
                "id": sample.dialogue_id,
                "domain": sample.domain,
                "turns": [_turn_to_record(t) for t in sample.turns],
            }
            if sample.provenance is not None:
                rec["provenance"] = sample.provenance
            fh.write(json.dumps(rec) + "\n")


def _parse_turn(rec: dict, schema: SlotSchema, lineno: int, turn_index: int) -> Turn:
    where = f"line {lineno}, turn {turn_index}"
    speaker = rec.get("speaker")
    if speaker not in ("user", "system"):
        raise CorpusFormatError(f"{where}: speaker must be 'user' or 'system', got {speaker!r}")
    text = rec.get("text")
    if not isinstance(text, str):
        raise CorpusFormatError(f"{where}: missing or non-string 'text'")
    state = rec.get("state")
    if state is not None:
        if not isinstance(state, dict):
            raise CorpusFormatError(f"{where}: 'state' must be an object")
        for slot in state:
            if slot not in schema.slots:
                raise CorpusFormatError(
                    f"{where}: unknown slot {slot!r}; schema declares {list(schema.slots)}"
                )
    label = None
    if "label" in rec:
        try:
            label = EmotionLabel.from_name(rec["label"])
        except (ValueError, AttributeError) as exc:
            raise CorpusFormatError(f"{where}: {exc}") from None
    rating = rec.get("rating")
    if rating is not None and (not isinstance(rating, int) or not 1 <= rating <= 5):
        raise CorpusFormatError(f"{where}: rating must be an integer in 1..5, got {rating!r}")
    return Turn(speaker=speaker, text=text, state=state, label=label, rating=rating)


def load_corpus(path: str) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorpusFormatError("line 1: empty file, expected a header record")

    def parse_json(lineno: int) -> dict:
        try:
            rec = json.loads(lines[lineno - 1])
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise CorpusFormatError(f"line {lineno}: expected a JSON object")
        return rec

    header = parse_json(1)
    if header.get("record") != "header" or header.get("format") != FORMAT_NAME:
        raise CorpusFormatError(f"line 1: expected a {FORMAT_NAME} header record")
    if header.get("version") != FORMAT_VERSION:
        raise CorpusFormatError(f"line 1: unsupported format version {header.get('version')!r}")
    first_speaker = header.get("first_speaker", "user")
    if first_speaker not in ("user", "system"):
        raise CorpusFormatError(f"line 1: first_speaker must be 'user' or 'system'")
    try:
        schema = SlotSchema(tuple(header.get("slots", ())))
    except ValueError as exc:
        raise CorpusFormatError(f"line 1: {exc}") from None

    samples = []
    for lineno in range(2, len(lines) + 1):
        if not lines[lineno - 1].strip():
            continue
        rec = parse_json(lineno)
        if rec.get("record") != "dialogue":
            raise CorpusFormatError(f"line {lineno}: expected a dialogue record")
        turns_rec = rec.get("turns")
        if not isinstance(turns_rec, list) or not turns_rec:
            raise CorpusFormatError(f"line {lineno}: dialogue has no turns")
        turns = [_parse_turn(t, schema, lineno, i) for i, t in enumerate(turns_rec)]
        for i, turn in enumerate(turns):
            expected = first_speaker if i % 2 == 0 else ("system" if first_speaker == "user" else "user")
            if turn.speaker != expected:
                raise CorpusFormatError(
                    f"line {lineno}, turn {i}: expected speaker {expected!r} "
                    f"(turns alternate starting with {first_speaker!r})"
                )
        samples.append(
            DialogueSample(
                dialogue_id=str(rec.get("id", f"dlg-{lineno}")),
                domain=str(rec.get("domain", "")),
                turns=turns,
                provenance=rec.get("provenance"),
            )
        )
    return Corpus(schema=schema, samples=samples, first_speaker=first_speaker, split=header.get("split"))


# --- Synthetic corpus generation -------------------------------------------

# Table-style class proportions (percent); normalized at use.
DEFAULT_PROPORTIONS = (70.1, 21.0, 6.1, 1.2, 1.0, 0.5, 0.2)

CUE_TOKENS: dict[EmotionLabel, tuple[str, ...]] = {
    EmotionLabel.NEUTRAL: ("looking", "need", "want"),
    EmotionLabel.SATISFIED: ("great", "perfect", "wonderful"),
    EmotionLabel.DISSATISFIED: ("wrong", "unacceptable", "disappointing"),
    EmotionLabel.EXCITED: ("amazing", "thrilled", "fantastic"),
    EmotionLabel.APOLOGETIC: ("sorry", "apologies", "mixup"),
    EmotionLabel.FEARFUL: ("worried", "afraid", "nervous"),
    EmotionLabel.ABUSIVE: ("stupid", "useless", "hopeless"),
}

DISTRACTOR_TOKENS = (
    "the", "a", "to", "for", "in", "on", "at", "is", "it", "you",
    "i", "we", "me", "my", "book", "find", "restaurant", "hotel", "train", "taxi",
    "table", "room", "ticket", "place", "town", "north", "south", "east", "west", "centre",
    "cheap", "moderate", "expensive", "food", "italian", "chinese", "indian", "british", "price", "range",
    "area", "stars", "people", "night", "monday", "friday", "time", "leave", "arrive", "phone",
)

DEFAULT_SLOTS = ("area", "food", "price", "stars", "day", "people", "time", "name")

SLOT_VALUES: dict[str, tuple[str, ...]] = {
    "area": ("north", "south", "centre"),
    "food": ("italian", "chinese", "indian"),
    "price": ("cheap", "moderate", "expensive"),
    "stars": ("3", "4", "5"),
    "day": ("monday", "friday", "sunday"),
    "people": ("2", "4", "6"),
    "time": ("12:00", "18:00", "19:30"),
    "name": ("acorn", "gonville", "avalon"),
}

DEFAULT_DOMAINS = ("restaurant", "hotel", "train", "taxi", "attraction")

# Rating a turn's label would plausibly receive on a 1..5 satisfaction scale.
LABEL_RATING: dict[EmotionLabel, int] = {
    EmotionLabel.NEUTRAL: 3,
    EmotionLabel.SATISFIED: 4,
    EmotionLabel.DISSATISFIED: 2,
    EmotionLabel.EXCITED: 5,
    EmotionLabel.APOLOGETIC: 3,
    EmotionLabel.FEARFUL: 2,
    EmotionLabel.ABUSIVE: 1,
}


@dataclass
class SynthConfig:
    seed: int = 0
    dialogues: int = 100
    proportions: tuple[float, ...] = DEFAULT_PROPORTIONS
    cue_strength: float = 0.9
    state_signal: bool = True
    min_user_turns: int = 4
    max_user_turns: int = 10
    slots: tuple[str, ...] = DEFAULT_SLOTS
    domains: tuple[str, ...] = DEFAULT_DOMAINS
    with_ratings: bool = True

    def __post_init__(self) -> None:
        if len(self.proportions) != NUM_EMOTIONS:
            raise ValueError(f"proportions must have {NUM_EMOTIONS} entries")
        if not 0.0 <= self.cue_strength <= 1.0:
            raise ValueError("cue_strength must be in [0, 1]")

    @property
    def normalized_proportions(self) -> np.ndarray:
        p = np.asarray(self.proportions, dtype=np.float64)
        if np.any(p < 0) or p.sum() <= 0:
            raise ValueError("proportions must be nonnegative with a positive sum")
        return p / p.sum()


def _user_text(label: EmotionLabel, cfg: SynthConfig, rng: np.random.Generator) -> str:
    words = list(rng.choice(DISTRACTOR_TOKENS, size=rng.integers(3, 6)))
    if rng.random() < cfg.cue_strength:
        cues = CUE_TOKENS[label]
        for cue in rng.choice(cues, size=rng.integers(2, 4), replace=False):
            words.insert(int(rng.integers(0, len(words) + 1)), cue)
    return " ".join(words)


def _system_text(rng: np.random.Generator) -> str:
    return " ".join(rng.choice(DISTRACTOR_TOKENS, size=rng.integers(2, 5)))


def generate_synthetic(config: SynthConfig) -> Corpus:
    """Seed-deterministic synthetic corpus.

    Each user turn's label is drawn from the (normalized) proportion vector;
    its text contains label-specific cue tokens with probability
    cue_strength, over a bed of shared distractor tokens. With state_signal
    on, a dissatisfied turn unfills a previously filled slot and a satisfied
    turn fills a new one, so dialogue-state features carry signal for those
    classes.
    """
    rng = np.random.default_rng(config.seed)
    schema = SlotSchema(config.slots)
    probs = config.normalized_proportions
    labels_arr = np.array([label for label in EmotionLabel])

    samples = []
    for d in range(config.dialogues):
        domain = str(rng.choice(config.domains))
        n_user = int(rng.integers(config.min_user_turns, config.max_user_turns + 1))
        state: dict[str, str] = {}
        turns: list[Turn] = []
        for t in range(1, n_user + 1):
            label = EmotionLabel(int(rng.choice(labels_arr, p=probs)))
            unfilled = [s for s in config.slots if s not in state]
            filled = sorted(state)
            if config.state_signal and label is EmotionLabel.DISSATISFIED and filled:
                del state[str(rng.choice(filled))]
            elif config.state_signal and label is EmotionLabel.SATISFIED and unfilled:
                slot = str(rng.choice(unfilled))
                state[slot] = str(rng.choice(SLOT_VALUES.get(slot, ("yes",))))
            elif unfilled and (t == 1 or rng.random() < 0.5):
                slot = str(rng.choice(unfilled))
                state[slot] = str(rng.choice(SLOT_VALUES.get(slot, ("yes",))))
            turns.append(
                Turn(
                    speaker="user",
                    text=_user_text(label, config, rng),
                    state=dict(state),
                    label=label,
                    rating=LABEL_RATING[label] if config.with_ratings else None,
                )
            )
            if t < n_user:
                turns.append(Turn(speaker="system", text=_system_text(rng)))
        samples.append(DialogueSample(dialogue_id=f"synth-{config.seed}-{d:05d}", domain=domain, turns=turns))
    return Corpus(schema=schema, samples=samples, first_speaker="user")


def split_corpus(
    corpus: Corpus, ratios: tuple[float, float, float], seed: int
) -> tuple[Corpus, Corpus, Corpus]:
    """Dialogue-level train/dev/test partition; no dialogue straddles splits."""
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be positive and sum to 1, got {ratios}")
    n = len(corpus.samples)
    order = np.random.default_rng(seed).permutation(n)
    bounds = [int(round(sum(ratios[: i + 1]) * n)) for i in range(3)]
    pieces = []
    start = 0
    for tag, stop in zip(("train", "dev", "test"), bounds):
        picked = [corpus.samples[i] for i in order[start:stop]]
        if not picked and n >= 3:
            raise ValueError(f"split ratios {ratios} leave the {tag} split empty")
        pieces.append(
            Corpus(schema=corpus.schema, samples=picked, first_speaker=corpus.first_speaker, split=tag)
        )
        start = stop
    return pieces[0], pieces[1], pieces[2]


def strip_annotations(corpus: Corpus) -> Corpus:
    """Copy of the corpus with labels and ratings removed (candidate pools)."""
    samples = []
    for s in corpus.samples:
        turns = [replace(t, label=None, rating=None) for t in s.turns]
        samples.append(replace(s, turns=turns))
    return Corpus(schema=corpus.schema, samples=samples, first_speaker=corpus.first_speaker, split=corpus.split)

"""Command-line entry point.

Subcommands: gen-synth (synthetic corpus), train, eval, augment, and
export-distances (the 7x7 smoothed distance table as CSV). Options may come
from flags or a JSON config file; flags override config-file values, which
override defaults. Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import augment as aug
from .data import (
    Corpus,
    CorpusFormatError,
    SynthConfig,
    generate_synthetic,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .features import FeaturizerConfig, Mode
from .metrics import (
    DEFAULT_SATISFACTION_MAPPING,
    binary_f1,
    evaluate,
    map_to_satisfaction,
    ratings_to_binary,
)
from .model import EmotionModel, NumericError, TrainConfig, train
from .taxonomy import EmotionLabel, build_distance_matrix

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: invalid JSON ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config file {path}: expected a JSON object")
    return cfg


def _build(cls, section: dict, overrides: dict):
    """Dataclass from config-file section plus non-None flag overrides."""
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise UsageError(f"unknown {cls.__name__} config keys: {sorted(unknown)}")
    merged = dict(section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad {cls.__name__} settings: {exc}") from None


def _read_corpus(path: str) -> Corpus:
    try:
        return load_corpus(path)
    except FileNotFoundError:
        raise CorpusFormatError(f"corpus file not found: {path}") from None


def cmd_gen_synth(args: argparse.Namespace) -> int:
    cfg_file = _load_config_file(args.config)
    overrides = {
        "seed": args.seed,
        "dialogues": args.dialogues,
        "cue_strength": args.cue_strength,
        "state_signal": None if args.state_signal is None else args.state_signal == "on",
    }
    config = _build(SynthConfig, cfg_file.get("synth", {}), overrides)
    corpus = generate_synthetic(config)
    if args.split:
        try:
            ratios = tuple(float(r) for r in args.split.split(","))
            if len(ratios) != 3:
                raise ValueError
        except ValueError:
            raise UsageError(f"--split expects three comma-separated ratios, got {args.split!r}")
        parts = split_corpus(corpus, ratios, seed=config.seed)
        for part in parts:
            path = f"{args.out}.{part.split}.jsonl"
            save_corpus(part, path)
            print(f"wrote {len(part)} dialogues to {path}")
    else:
        save_corpus(corpus, args.out)
        print(f"wrote {len(corpus)} dialogues to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg_file = _load_config_file(args.config)
    overrides = {
        "alpha": args.alpha,
        "seed": args.seed,
        "loss": args.loss,
        "mode": args.mode,
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
        "max_epochs": args.epochs,
        "hidden": args.hidden,
        "d_state": args.d_state,
        "dropout": args.dropout,
        "use_state": False if args.no_state else None,
    }
    config = _build(TrainConfig, cfg_file.get("train", {}), overrides)
    featurizer = _build(
        FeaturizerConfig, cfg_file.get("featurizer", {}), {"dim": args.hash_dim, "decay": args.decay}
    )
    corpus = _read_corpus(args.corpus)
    dev = _read_corpus(args.dev) if args.dev else None
    if config.alpha == 1.0:
        print("alpha=1.0: aspect heads receive zero weight in the combined gradient")
    model, log = train(corpus, config, build_distance_matrix(), dev_corpus=dev, featurizer=featurizer)
    for entry in log:
        line = f"epoch {entry['epoch']:3d}  train_loss {entry['train_loss']:.6f}"
        if "dev_macro_f1" in entry:
            line += f"  dev_macro_f1 {entry['dev_macro_f1']:.4f}"
        print(line)
    model.save(args.checkpoint)
    print(f"wrote checkpoint to {args.checkpoint}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    model = EmotionModel.load(args.checkpoint)
    corpus = _read_corpus(args.corpus)
    mode = Mode(args.mode) if args.mode else Mode(model.config.mode)
    if tuple(corpus.schema.slots) != tuple(model.schema.slots):
        raise CorpusFormatError(
            "corpus slot schema does not match the checkpoint "
            f"({list(corpus.schema.slots)} vs {list(model.schema.slots)})"
        )
    from .features import encode_corpus

    ds = encode_corpus(corpus, model.featurizer, mode)
    if len(ds) == 0:
        raise CorpusFormatError(f"{args.corpus}: no labeled user turns to evaluate")
    preds = model.predict_dataset(ds)
    report = evaluate(ds.emotion, preds, build_distance_matrix())
    print(report.to_text())

    payload = report.to_dict()
    payload["mode"] = mode.value
    payload["checkpoint_mode"] = model.config.mode
    payload["samples"] = int(len(ds))
    if mode is Mode.SATISFACTION and np.any(ds.rating > 0):
        have = ds.rating > 0
        gold = ratings_to_binary(ds.rating[have])
        mapped = [map_to_satisfaction(EmotionLabel(int(p)), DEFAULT_SATISFACTION_MAPPING) for p in preds[have]]
        payload["binary_satisfaction"] = binary_f1(gold, mapped)
        print(
            "binary satisfaction: negative_f1 {negative_f1:.4f}  positive_f1 {positive_f1:.4f}".format(
                **payload["binary_satisfaction"]
            )
        )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote report to {args.report}")
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    cfg_file = _load_config_file(args.config)
    corpus = _read_corpus(args.corpus)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    added: list = []
    if args.strategy == "replace":
        if not args.pool:
            raise UsageError("--strategy replace requires --pool")
        target = EmotionLabel.from_name(args.target[0]) if args.target else EmotionLabel.ABUSIVE
        donor = _read_corpus(args.pool)
        pool = aug.build_replacement_pool(donor, target, source=args.pool)
        if not pool.utterances:
            raise CorpusFormatError(f"{args.pool}: no user turns labeled {target.label_name}")
        contexts = aug.target_contexts(corpus, target)
        if not contexts:
            raise CorpusFormatError(f"{args.corpus}: no context turns labeled {target.label_name}")
        added = aug.augment_replacement(pool, contexts, rng, cap=args.cap)
        print(f"{target.label_name}: kept {len(added)} of {len(pool.utterances)} pool utterances")
    else:
        if not args.ensemble:
            raise UsageError("--strategy ensemble requires --ensemble checkpoint paths")
        if not args.candidates:
            raise UsageError("--strategy ensemble requires --candidates")
        models = [EmotionModel.load(p) for p in args.ensemble]
        candidates = aug.candidates_from_corpus(_read_corpus(args.candidates))
        overrides = {
            "theta": args.theta,
            "cap": args.cap,
            "targets": tuple(EmotionLabel.from_name(n) for n in args.target) if args.target else None,
            "domains": tuple(args.domains) if args.domains else None,
        }
        config = _build(aug.AugmentConfig, cfg_file.get("augment", {}), overrides)
        added = aug.select_candidates(candidates, models, config, source=args.candidates)
        counts = {t.label_name: 0 for t in config.targets}
        for s in added:
            counts[s.turns[-1].label.label_name] += 1
        for name, count in counts.items():
            print(f"{name}: kept {count}")
        print(f"rejected {len(candidates) - len(added)} of {len(candidates)} candidates")
    out = Corpus(
        schema=corpus.schema,
        samples=corpus.samples + added,
        first_speaker=corpus.first_speaker,
        split=corpus.split,
    )
    save_corpus(out, args.out)
    print(f"wrote {len(out)} dialogues ({len(added)} augmented) to {args.out}")
    return EXIT_OK


def cmd_export_distances(args: argparse.Namespace) -> int:
    dm = build_distance_matrix()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dm.to_csv())
    print(f"wrote distance table to {args.out}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emotod", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--dialogues", type=int)
    p.add_argument("--cue-strength", dest="cue_strength", type=float)
    p.add_argument("--state-signal", dest="state_signal", choices=["on", "off"])
    p.add_argument("--split", help="train/dev/test ratios, e.g. 0.8,0.1,0.1 (treats --out as a prefix)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--loss", choices=["emodist", "ce"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--d-state", dest="d_state", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--no-state", dest="no_state", action="store_true")
    p.add_argument("--hash-dim", dest="hash_dim", type=int)
    p.add_argument("--decay", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment", help="augment a corpus with rare-emotion samples")
    p.add_argument("--strategy", choices=["replace", "ensemble"], required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pool", help="donor corpus for --strategy replace")
    p.add_argument("--candidates", help="unlabeled candidate corpus for --strategy ensemble")
    p.add_argument("--ensemble", nargs="+", help="ensemble checkpoint paths")
    p.add_argument("--theta", type=float)
    p.add_argument("--cap", type=int)
    p.add_argument("--target", action="append", help="target emotion name (repeatable)")
    p.add_argument("--domains", nargs="+")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("export-distances", help="write the smoothed distance matrix as CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_distances)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

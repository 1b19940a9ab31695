"""Command-line entry point: ``nestmention <subcommand> ...``.

Exit codes: 0 success, 1 data or validation failure, 2 usage error,
3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .corpus import CorpusError, Vocabulary, corpus_stats, load_corpus, load_embeddings, save_corpus
from .evaluation import bench_decode, evaluation_report, format_report
from .forest import NestingError, forest_to_mentions, mentions_to_forest
from .model import GoldActionError, ModelConfig, ParserModel
from .nn import CheckpointError
from .training import TrainConfig, TrainingError, train
from .transitions import TransitionError, format_actions, oracle_actions, replay

log = logging.getLogger("nestmention")

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


# ---------------------------------------------------------------------------
# run configuration

PATH_KEYS = {
    "train": None,
    "dev": None,
    "model": None,
    "log": None,
    "embeddings": None,
    "drop_conflicts": False,
}
_MODEL_KEYS = {f.name: f.default for f in dataclasses.fields(ModelConfig)}
_TRAIN_KEYS = {f.name: f.default for f in dataclasses.fields(TrainConfig) if f.name not in ("checkpoint", "log_path")}
RUN_DEFAULTS = {**PATH_KEYS, **_MODEL_KEYS, **_TRAIN_KEYS}
RUN_DEFAULTS["seed"] = None  # mandatory for training


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_run_config(path, overrides=()) -> dict:
    cfg = dict(RUN_DEFAULTS)
    if path is not None:
        try:
            given = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file {path} not found") from None
        except json.JSONDecodeError as err:
            raise UsageError(f"{path}: invalid JSON ({err.msg})") from None
        if not isinstance(given, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        cfg.update(_checked(given))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"override {item!r} is not KEY=VALUE")
        cfg.update(_checked({key: _parse_value(value)}))
    return cfg


def _checked(d: dict) -> dict:
    unknown = sorted(set(d) - set(RUN_DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return d


def split_run_config(cfg: dict) -> tuple[ModelConfig, TrainConfig]:
    try:
        model_cfg = ModelConfig(**{k: cfg[k] for k in _MODEL_KEYS})
        train_cfg = TrainConfig(
            **{k: cfg[k] for k in _TRAIN_KEYS},
            checkpoint=cfg["model"],
            log_path=cfg["log"],
        )
    except (TypeError, ValueError) as err:
        raise UsageError(f"invalid configuration: {err}") from None
    return model_cfg, train_cfg


# ---------------------------------------------------------------------------
# subcommands


def _load(path, *, strict=True, drop_conflicts=False):
    try:
        return load_corpus(path, strict=strict, drop_conflicts=drop_conflicts)
    except FileNotFoundError:
        raise FileNotFoundError(f"corpus {path} not found") from None


def cmd_validate(args) -> int:
    sentences, report = _load(args.corpus, strict=False, drop_conflicts=args.drop_conflicts)
    for line, msg in report.errors:
        print(f"{args.corpus}:{line}: {msg}")
    for line, m in report.dropped:
        print(f"{args.corpus}:{line}: dropped conflicting mention {m}")
    print(f"{len(sentences)} valid records, {len(report.errors)} invalid")
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_stats(args) -> int:
    sentences, _ = _load(args.corpus, drop_conflicts=args.drop_conflicts)
    print(json.dumps(corpus_stats(sentences), indent=2))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    sentences, _ = _load(args.corpus, drop_conflicts=args.drop_conflicts)
    lengths, ratios = [], []
    out = open(args.actions, "w", encoding="utf-8") if args.actions else None
    try:
        for k, s in enumerate(sentences):
            forest = mentions_to_forest(s)
            actions = oracle_actions(forest)
            try:
                rebuilt = replay(actions, len(s))
            except TransitionError as err:
                raise InvariantError(f"sentence {k}: oracle sequence rejected: {err}") from None
            if rebuilt != forest or forest_to_mentions(rebuilt) != s.mentions:
                raise InvariantError(f"sentence {k}: round trip mismatch")
            if len(actions) > 3 * len(s):
                raise InvariantError(f"sentence {k}: {len(actions)} actions exceed 3n = {3 * len(s)}")
            lengths.append(len(actions))
            ratios.append(len(actions) / len(s))
            if out:
                out.write(format_actions(actions) + "\n")
    finally:
        if out:
            out.close()
    summary = {
        "sentences": len(sentences),
        "round_trip_ok": True,
        "max_length": max(lengths, default=0),
        "mean_length": sum(lengths) / len(lengths) if lengths else 0.0,
        "max_length_over_n": max(ratios, default=0.0),
        "bound_3n_ok": True,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, args.set)
    for key in sorted(cfg):
        log.info("config %s = %r", key, cfg[key])
    if cfg["seed"] is None:
        raise UsageError("training needs an explicit seed")
    if not cfg["train"] or not cfg["model"]:
        raise UsageError("training needs 'train' and 'model' paths")
    model_cfg, train_cfg = split_run_config(cfg)
    train_set, _ = _load(cfg["train"], drop_conflicts=cfg["drop_conflicts"])
    dev_set = _load(cfg["dev"], drop_conflicts=cfg["drop_conflicts"])[0] if cfg["dev"] else train_set
    model = ParserModel(model_cfg, Vocabulary.build(train_set))
    if cfg["embeddings"]:
        coverage = model.load_pretrained(load_embeddings(cfg["embeddings"], model_cfg.word_dim))
        log.info("pretrained embeddings cover %.1f%% of the vocabulary", coverage)
    model, history = train(model, train_set, dev_set, train_cfg)
    model.save(cfg["model"])
    print(json.dumps({"best_epoch": history.best_epoch, "best_dev_f1": round(100 * history.best_f1, 1), "epochs": len(history.epochs)}))
    return EXIT_OK


def _load_model(path) -> ParserModel:
    try:
        return ParserModel.load(path)
    except FileNotFoundError:
        raise FileNotFoundError(f"model checkpoint {path} not found") from None


def cmd_decode(args) -> int:
    model = _load_model(args.model)
    sentences, _ = _load(args.corpus)
    threads = max(1, args.threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        predicted = list(pool.map(lambda s: model.greedy_decode(s)[0], sentences))
    save_corpus([s.with_mentions(p) for s, p in zip(sentences, predicted)], args.output)
    log.info("decoded %d sentences into %s", len(sentences), args.output)
    return EXIT_OK


def cmd_eval(args) -> int:
    gold, _ = _load(args.gold)
    pred, _ = _load(args.pred)
    if len(gold) != len(pred):
        print(f"{len(gold)} gold sentences but {len(pred)} predicted", file=sys.stderr)
        return EXIT_DATA
    report = evaluation_report(gold, pred, split=args.split_nested)
    print(json.dumps(report, indent=2) if args.json else format_report(report))
    return EXIT_OK


def cmd_bench(args) -> int:
    model = _load_model(args.model)
    sentences, _ = _load(args.corpus)
    result = bench_decode(model, sentences, repetitions=args.repetitions)
    log.info("min %.1f w/s, max %.1f w/s", result.min_wps, result.max_wps)
    print(json.dumps(result.as_dict(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nestmention", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus file")
    p.add_argument("corpus")
    p.add_argument("--drop-conflicts", action="store_true", help="keep the first of same-span mentions")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="corpus statistics as JSON")
    p.add_argument("corpus")
    p.add_argument("--drop-conflicts", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("oracle-check", help="oracle/replay round trip and 3n bound")
    p.add_argument("corpus")
    p.add_argument("--actions", help="write the oracle sequences here, one action per line")
    p.add_argument("--drop-conflicts", action="store_true")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="greedy decoding into the corpus format")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("corpus")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="exact-match P/R/F1")
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--split-nested", action="store_true", help="add nested / non-nested sentence scores")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="decode throughput in words per second (single thread)")
    p.add_argument("--model", required=True)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("corpus")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantError, GoldActionError, TransitionError) as err:
        print(f"internal invariant breach: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except CorpusError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, CheckpointError, NestingError, TrainingError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

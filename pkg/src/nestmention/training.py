"""Teacher-forced greedy training with per-sentence Adam updates."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import nn
from .evaluation import score
from .forest import SentenceAnnotation, mentions_to_forest
from .model import ParserModel
from .transitions import Action, oracle_actions

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    patience: int = 5
    l2: float = 1e-6
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 3.0
    seed: int = 1
    checkpoint: Optional[str] = None
    log_path: Optional[str] = None

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.clip <= 0:
            raise ValueError("clip threshold must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float  # mean NLL per gold action
    dev_precision: float
    dev_recall: float
    dev_f1: float
    seconds: float
    best: bool

    def deterministic_fields(self) -> tuple:
        return (self.epoch, self.loss, self.dev_precision, self.dev_recall, self.dev_f1, self.best)


@dataclass
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)

    @property
    def best_epoch(self) -> Optional[int]:
        marked = [r.epoch for r in self.epochs if r.best]
        return marked[-1] if marked else None

    @property
    def best_f1(self) -> float:
        return max((r.dev_f1 for r in self.epochs), default=0.0)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.epochs)


class TrainingError(RuntimeError):
    pass


def gold_actions(sentence: SentenceAnnotation) -> list[Action]:
    return oracle_actions(mentions_to_forest(sentence))


def sentence_loss(model: ParserModel, sentence: SentenceAnnotation, gold: Sequence[Action], training: bool = False, rng=None) -> nn.Tensor:
    """Summed action NLL along the gold trajectory (the l2 term is added as a gradient)."""
    return model.episode_loss(sentence, gold, training, rng)


def train_step(model: ParserModel, opt: nn.AdamState, sentence, gold, cfg: TrainConfig, rng) -> float:
    params = model.parameters()
    model.zero_grad()
    where = " ".join(sentence.tokens)
    with nn.Tape() as tape:
        try:
            loss = sentence_loss(model, sentence, gold, training=True, rng=rng)
        except FloatingPointError as err:
            raise TrainingError(f"non-finite loss on sentence {where!r}: {err}") from None
        value = float(loss.value)
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} on sentence {where!r}")
        if loss.requires_grad:
            tape.backward(loss)
    nn.add_l2_gradient(params, cfg.l2)
    nn.clip_global_norm([p.grad for p in params], cfg.clip)
    nn.adam_step(opt, params)
    return value


def decode_corpus(model: ParserModel, corpus: Sequence[SentenceAnnotation]) -> list:
    return [model.greedy_decode(s)[0] for s in corpus]


def train(
    model: ParserModel,
    train_corpus: Sequence[SentenceAnnotation],
    dev_corpus: Sequence[SentenceAnnotation],
    cfg: TrainConfig = TrainConfig(),
) -> tuple[ParserModel, TrainLog]:
    """Train in place; on return the model holds the best-dev-F1 parameters."""
    rng = np.random.default_rng(cfg.seed)
    golds = [gold_actions(s) for s in train_corpus]
    n_actions = sum(len(g) for g in golds)
    opt = nn.AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    history = TrainLog()
    best_f1, best_values, stale = -1.0, model.get_values(), 0
    if cfg.log_path:
        Path(cfg.log_path).write_text("")

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        for k in rng.permutation(len(train_corpus)):
            total += train_step(model, opt, train_corpus[k], golds[k], cfg, rng)
        prf = score([s.mentions for s in dev_corpus], decode_corpus(model, dev_corpus))
        improved = prf.f1 > best_f1
        record = EpochRecord(
            epoch=epoch,
            loss=total / max(n_actions, 1),
            dev_precision=prf.precision,
            dev_recall=prf.recall,
            dev_f1=prf.f1,
            seconds=time.perf_counter() - t0,
            best=improved,
        )
        history.epochs.append(record)
        log.info("epoch %d loss %.4f dev F1 %.1f%s", epoch, record.loss, 100 * prf.f1, " *" if improved else "")
        if cfg.log_path:
            with open(cfg.log_path, "a") as fh:
                fh.write(json.dumps(asdict(record)) + "\n")
        if improved:
            best_f1, best_values, stale = prf.f1, model.get_values(), 0
            if cfg.checkpoint:
                model.save(cfg.checkpoint)
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    model.set_values(best_values)
    return model, history

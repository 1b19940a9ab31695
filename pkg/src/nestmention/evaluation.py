from __future__ import annotations

import os
import platform
import statistics
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .corpus import nested_flags
from .forest import Mention, SentenceAnnotation


@dataclass(frozen=True)
class PRF:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: PRF) -> PRF:
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _sentence_prf(gold: Iterable[Mention], pred: Iterable[Mention]) -> PRF:
    gold, pred = set(gold), set(pred)
    tp = len(gold & pred)
    return PRF(tp, len(pred) - tp, len(gold) - tp)


def score(gold: Sequence[Iterable[Mention]], pred: Sequence[Iterable[Mention]]) -> PRF:
    """Micro-averaged exact-match scores over aligned sentences."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    result = PRF(0, 0, 0)
    for g, p in zip(gold, pred):
        result = result + _sentence_prf(g, p)
    return result


def score_by_label(gold: Sequence[Iterable[Mention]], pred: Sequence[Iterable[Mention]]) -> dict[str, PRF]:
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    out: dict[str, PRF] = defaultdict(lambda: PRF(0, 0, 0))
    for g, p in zip(gold, pred):
        g, p = set(g), set(p)
        for label in {m.label for m in g | p}:
            out[label] = out[label] + _sentence_prf(
                (m for m in g if m.label == label), (m for m in p if m.label == label)
            )
    return dict(sorted(out.items()))


def has_nesting(sentence: SentenceAnnotation) -> bool:
    return any(nested_flags(sentence.mentions).values())


def split_nested(corpus: Sequence[SentenceAnnotation]) -> tuple[list[int], list[int]]:
    """Indices of sentences with and without a containment pair (by gold mentions)."""
    nested, flat = [], []
    for k, s in enumerate(corpus):
        (nested if has_nesting(s) else flat).append(k)
    return nested, flat


def evaluation_report(gold: Sequence[SentenceAnnotation], pred: Sequence[SentenceAnnotation], split: bool = False) -> dict:
    for k, (g, p) in enumerate(zip(gold, pred)):
        if g.tokens != p.tokens:
            raise ValueError(f"sentence {k}: gold and prediction tokens differ")
    gm = [s.mentions for s in gold]
    pm = [s.mentions for s in pred]
    report = {
        "overall": score(gm, pm).as_dict(),
        "by_label": {k: v.as_dict() for k, v in score_by_label(gm, pm).items()},
    }
    if split:
        nested, flat = split_nested(gold)
        report["nested"] = {"sentences": len(nested), **score([gm[k] for k in nested], [pm[k] for k in nested]).as_dict()}
        report["non_nested"] = {"sentences": len(flat), **score([gm[k] for k in flat], [pm[k] for k in flat]).as_dict()}
    return report


def format_report(report: dict) -> str:
    """Plain-text table, percentages to one decimal."""

    def row(name, d):
        return f"{name:<14}{100 * d['precision']:>7.1f}{100 * d['recall']:>7.1f}{100 * d['f1']:>7.1f}"

    lines = [f"{'':<14}{'P':>7}{'R':>7}{'F1':>7}", row("overall", report["overall"])]
    for label, d in report["by_label"].items():
        lines.append(row(f"  {label}", d))
    for key in ("nested", "non_nested"):
        if key in report:
            lines.append(row(key.replace("_", "-"), report[key]))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# decode throughput


@dataclass(frozen=True)
class BenchResult:
    words_per_second: float  # median over repetitions
    min_wps: float
    max_wps: float
    sentences: int
    tokens: int
    repetitions: int
    hardware: str
    threads: int

    def as_dict(self) -> dict:
        return asdict(self)


def hardware_string() -> str:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{cpu}; {os.cpu_count()} logical cores; Python {platform.python_version()}"


def bench_decode(model, corpus: Sequence[SentenceAnnotation], repetitions: int = 5, warmup: bool = True) -> BenchResult:
    """Words decoded per second on one thread (BLAS pinned to one thread as well)."""
    if not corpus:
        raise ValueError("cannot benchmark on an empty corpus")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    from threadpoolctl import threadpool_limits

    tokens = sum(len(s) for s in corpus)
    rates = []
    with threadpool_limits(limits=1):
        if warmup:
            for s in corpus[: max(1, min(len(corpus), 10))]:
                model.greedy_decode(s)
        for _ in range(repetitions):
            t0 = time.perf_counter()
            for s in corpus:
                model.greedy_decode(s)
            rates.append(tokens / (time.perf_counter() - t0))
    return BenchResult(
        words_per_second=statistics.median(rates),
        min_wps=min(rates),
        max_wps=max(rates),
        sentences=len(corpus),
        tokens=tokens,
        repetitions=repetitions,
        hardware=hardware_string(),
        threads=1,
    )

"""Corpus ingestion and vocabulary construction.

Wire format: UTF-8, one JSON object per line::

    {"tokens": ["Indonesian", "leaders"], "pos": ["JJ", "NNS"],
     "mentions": [{"start": 0, "end": 1, "label": "GPE"}]}

``end`` is exclusive on the wire and inclusive in memory.  Use POS ``"_"``
when a corpus has no tags.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .forest import Mention, SentenceAnnotation, nesting_depth, validate_nesting

log = logging.getLogger(__name__)

NO_POS = "_"
UNK = "<unk>"
EOS = "<eos>"

RECORD_SCHEMA = {
    "type": "object",
    "required": ["tokens", "pos", "mentions"],
    "properties": {
        "tokens": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1},
        "pos": {"type": "array", "items": {"type": "string", "minLength": 1}},
        "mentions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["start", "end", "label"],
                "properties": {
                    "start": {"type": "integer", "minimum": 0},
                    "end": {"type": "integer", "description": "exclusive"},
                    "label": {"type": "string", "minLength": 1},
                },
            },
        },
    },
}


@dataclass
class CorpusReport:
    errors: list[tuple[int, str]] = field(default_factory=list)  # (line number, message)
    dropped: list[tuple[int, Mention]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        return "\n".join(f"line {line}: {msg}" for line, msg in self.errors) or "ok"


class CorpusError(ValueError):
    def __init__(self, report: CorpusReport, path=None):
        where = f"{path}: " if path else ""
        super().__init__(where + str(report))
        self.report = report


def parse_record(obj, drop_conflicts: bool = False) -> tuple[SentenceAnnotation, list[Mention]]:
    """Convert one decoded JSON record; raises ValueError describing the first defect."""
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for key in ("tokens", "pos", "mentions"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    tokens, pos, raw = obj["tokens"], obj["pos"], obj["mentions"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) and t for t in tokens):
        raise ValueError("tokens must be a list of non-empty strings")
    if not tokens:
        raise ValueError("sentence has no tokens")
    if not isinstance(pos, list) or not all(isinstance(t, str) and t for t in pos):
        raise ValueError("pos must be a list of non-empty strings")
    if len(tokens) != len(pos):
        raise ValueError(f"length mismatch: {len(tokens)} tokens, {len(pos)} POS tags")
    if not isinstance(raw, list):
        raise ValueError("mentions must be a list")

    mentions: list[Mention] = []
    for m in raw:
        if not isinstance(m, dict) or not {"start", "end", "label"} <= m.keys():
            raise ValueError(f"malformed mention {m!r}")
        start, end, label = m["start"], m["end"], m["label"]
        if not (isinstance(start, int) and isinstance(end, int)) or isinstance(start, bool) or isinstance(end, bool):
            raise ValueError(f"non-integer span in {m!r}")
        if not isinstance(label, str) or not label or label.endswith("*") or label == "$":
            raise ValueError(f"invalid label in {m!r}")
        if start >= end:
            raise ValueError(f"empty span [{start}, {end})")
        mentions.append(Mention(start, end - 1, label))

    dropped: list[Mention] = []
    if drop_conflicts:
        kept: dict[tuple[int, int], Mention] = {}
        for m in mentions:
            prev = kept.get((m.start, m.end))
            if prev is None:
                kept[(m.start, m.end)] = m
            elif prev != m:
                dropped.append(m)
        mentions = list(kept.values())
    report = validate_nesting(mentions, len(tokens))
    if not report.ok:
        raise ValueError(f"nesting violation: {report}")
    return SentenceAnnotation(tokens, pos, frozenset(mentions)), dropped


def load_corpus(path, strict: bool = True, drop_conflicts: bool = False) -> tuple[list[SentenceAnnotation], CorpusReport]:
    """Parse a line-delimited corpus file.

    In strict mode any invalid record raises :class:`CorpusError`; otherwise
    invalid records are left out and listed in the report.
    """
    report = CorpusReport()
    sentences: list[SentenceAnnotation] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                sentence, dropped = parse_record(json.loads(line), drop_conflicts)
            except json.JSONDecodeError as err:
                report.errors.append((line_no, f"malformed JSON: {err.msg}"))
                continue
            except ValueError as err:
                report.errors.append((line_no, str(err)))
                continue
            for m in dropped:
                log.warning("line %d: dropped %s (same span as an earlier mention)", line_no, m)
                report.dropped.append((line_no, m))
            sentences.append(sentence)
    if strict and not report.ok:
        raise CorpusError(report, path)
    return sentences, report


def to_record(sentence: SentenceAnnotation) -> dict:
    return {
        "tokens": list(sentence.tokens),
        "pos": list(sentence.pos_tags),
        "mentions": [
            {"start": m.start, "end": m.end + 1, "label": m.label}
            for m in sorted(sentence.mentions, key=lambda m: (m.start, m.end, m.label))
        ],
    }


def dumps_corpus(sentences: Iterable[SentenceAnnotation]) -> str:
    return "".join(json.dumps(to_record(s), ensure_ascii=False) + "\n" for s in sentences)


def save_corpus(sentences: Iterable[SentenceAnnotation], path) -> None:
    Path(path).write_text(dumps_corpus(sentences), encoding="utf-8")


# ---------------------------------------------------------------------------
# vocabulary


def _ranked(counts: Counter) -> list[str]:
    return [k for k, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


@dataclass
class Vocabulary:
    words: list[str]
    chars: list[str]
    pos_tags: list[str]
    labels: list[str]
    word_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self._word_ids = {w: k for k, w in enumerate(self.words)}
        self._char_ids = {c: k for k, c in enumerate(self.chars)}
        self._pos_ids = {p: k for k, p in enumerate(self.pos_tags)}

    @classmethod
    def build(cls, corpus: Sequence[SentenceAnnotation], min_count: int = 1) -> Vocabulary:
        words, chars, tags, labels = Counter(), Counter(), Counter(), Counter()
        for s in corpus:
            words.update(s.tokens)
            tags.update(s.pos_tags)
            labels.update(m.label for m in s.mentions)
            for tok in s.tokens:
                chars.update(tok)
        kept = [w for w in _ranked(words) if words[w] >= min_count]
        return cls(
            words=[UNK, EOS] + [w for w in kept if w not in (UNK, EOS)],
            chars=[UNK, EOS] + [c for c in _ranked(chars) if c not in (UNK, EOS)],
            pos_tags=[UNK, EOS] + [t for t in _ranked(tags) if t not in (UNK, EOS)],
            labels=sorted(labels),
            word_counts=dict(words),
        )

    def word_id(self, token: str) -> int:
        k = self._word_ids.get(token)
        if k is None:
            k = self._word_ids.get(token.lower(), 0)
        return k

    def char_ids(self, token: str) -> list[int]:
        return [self._char_ids.get(c, 0) for c in token]

    def pos_id(self, tag: str) -> int:
        return self._pos_ids.get(tag, 0)

    @property
    def eos_word(self) -> int:
        return self._word_ids[EOS]

    @property
    def eos_char(self) -> int:
        return self._char_ids[EOS]

    @property
    def eos_pos(self) -> int:
        return self._pos_ids[EOS]

    def to_dict(self) -> dict:
        return {
            "words": self.words,
            "chars": self.chars,
            "pos_tags": self.pos_tags,
            "labels": self.labels,
            "word_counts": self.word_counts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Vocabulary:
        return cls(d["words"], d["chars"], d["pos_tags"], d["labels"], d.get("word_counts", {}))

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.to_dict() == other.to_dict()


# ---------------------------------------------------------------------------
# pretrained embeddings


def load_embeddings(path, dim: int) -> dict[str, np.ndarray]:
    """Read whitespace-separated text vectors (GloVe layout)."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{line_no}: expected {dim} values, found {len(parts) - 1}")
            try:
                table[parts[0]] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise ValueError(f"{path}:{line_no}: non-numeric value") from None
    return table


def lookup_embedding(table: dict[str, np.ndarray], token: str) -> Optional[np.ndarray]:
    vec = table.get(token)
    if vec is None:
        vec = table.get(token.lower())
    return vec


def embedding_coverage(words: Iterable[str], table: dict[str, np.ndarray]) -> float:
    """Percentage of ``words`` found by exact or lowercase match."""
    words = [w for w in words if w not in (UNK, EOS)]
    if not words:
        return 0.0
    return 100.0 * sum(lookup_embedding(table, w) is not None for w in words) / len(words)


# ---------------------------------------------------------------------------
# statistics


def nested_flags(mentions: Iterable[Mention]) -> dict[Mention, bool]:
    ms = list(mentions)
    flags = dict.fromkeys(ms, False)
    for a in ms:
        for b in ms:
            if a != b and a.span.contains(b.span):
                flags[a] = flags[b] = True
    return flags


def corpus_stats(corpus: Sequence[SentenceAnnotation]) -> dict:
    n_mentions = nested = nested_sentences = 0
    labels: Counter = Counter()
    lengths: Counter = Counter()
    depth = 0
    for s in corpus:
        flags = nested_flags(s.mentions)
        n_mentions += len(flags)
        k = sum(flags.values())
        nested += k
        nested_sentences += k > 0
        labels.update(m.label for m in s.mentions)
        lengths[len(s)] += 1
        depth = max(depth, nesting_depth(s.mentions))
    return {
        "sentences": len(corpus),
        "tokens": sum(len(s) for s in corpus),
        "mentions": n_mentions,
        "nested_mentions": nested,
        "nested_mention_pct": 100.0 * nested / n_mentions if n_mentions else 0.0,
        "sentences_with_nesting_pct": 100.0 * nested_sentences / len(corpus) if corpus else 0.0,
        "max_nesting_depth": depth,
        "label_histogram": dict(sorted(labels.items())),
        "length_histogram": {str(k): v for k, v in sorted(lengths.items())},
    }

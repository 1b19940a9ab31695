"""Seeded generators for nested-mention data (tests, demos, benchmarks)."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .forest import Mention, SentenceAnnotation


def random_mentions(
    rng: np.random.Generator,
    n: int,
    labels: Sequence[str],
    max_depth: int = 4,
    p_mention: float = 0.5,
) -> frozenset[Mention]:
    """A random properly nested mention set over ``n`` tokens (no identical spans)."""
    out: set[Mention] = set()

    def fill(lo: int, hi: int, depth: int, parent: Optional[tuple[int, int]]) -> None:
        pos = lo
        while pos <= hi:
            end = int(rng.integers(pos, hi + 1))
            if depth < max_depth and (pos, end) != parent and rng.random() < p_mention:
                out.add(Mention(pos, end, str(rng.choice(labels))))
                if end > pos:
                    fill(pos, end, depth + 1, (pos, end))
            pos = end + 1

    fill(0, n - 1, 0, None)
    return frozenset(out)


def fully_nested(n: int, label: str = "A") -> frozenset[Mention]:
    """Prefix chain (0,0), (0,1), ..., (0,n-1) plus every single-word mention."""
    return frozenset({Mention(0, e, label) for e in range(n)} | {Mention(i, i, label) for i in range(n)})


class SyntheticCorpus:
    """Lexicalized toy language where mention structure is predictable from words.

    Each label owns a pool of entity words; outside words come from a shared
    pool.  Mentions may contain words of their own label and inner mentions
    of other labels, so a good fraction of mentions are nested.
    """

    def __init__(self, seed: int = 0, vocab_size: int = 200, labels: Sequence[str] = ("PER", "ORG", "GPE"), entity_share: float = 0.45):
        self.rng = np.random.default_rng(seed)
        self.labels = list(labels)
        n_entity = int(vocab_size * entity_share) // len(self.labels)
        self.pools = {
            label: [f"{label.lower()}{k:02d}" for k in range(n_entity)] for label in self.labels
        }
        n_outside = vocab_size - n_entity * len(self.labels)
        self.outside = [f"w{k:03d}" for k in range(n_outside)]
        self.outside_tags = ["DT", "VB", "IN", "NN", "JJ"]

    @property
    def vocabulary(self) -> list[str]:
        return [w for pool in self.pools.values() for w in pool] + self.outside

    def _outside_tag(self, word: str) -> str:
        return self.outside_tags[int(word[1:]) % len(self.outside_tags)]

    def _mention(self, label: str, depth: int, tokens: list, tags: list, mentions: set) -> None:
        start = len(tokens)
        n_children = int(self.rng.integers(1, 4))
        previous = label
        for _ in range(n_children):
            # adjacent same-label mentions would be indistinguishable from one
            choices = [x for x in self.labels if x not in (label, previous)]
            if depth < 2 and choices and self.rng.random() < 0.35:
                previous = str(self.rng.choice(choices))
                self._mention(previous, depth + 1, tokens, tags, mentions)
            else:
                previous = label
                tokens.append(str(self.rng.choice(self.pools[label])))
                tags.append("NNP")
        end = len(tokens) - 1
        if any(m.span == (start, end) for m in mentions):
            # a lone inner mention would share our span; pad with an own word
            tokens.append(str(self.rng.choice(self.pools[label])))
            tags.append("NNP")
            end += 1
        mentions.add(Mention(start, end, label))

    def sentence(self, min_len: int = 6, max_len: int = 20) -> SentenceAnnotation:
        while True:
            target = int(self.rng.integers(min_len, max_len + 1))
            tokens: list[str] = []
            tags: list[str] = []
            mentions: set[Mention] = set()
            while len(tokens) < target:
                if self.rng.random() < 0.3:
                    self._mention(str(self.rng.choice(self.labels)), 0, tokens, tags, mentions)
                    word = str(self.rng.choice(self.outside))
                    tokens.append(word)
                    tags.append(self._outside_tag(word))
                else:
                    word = str(self.rng.choice(self.outside))
                    tokens.append(word)
                    tags.append(self._outside_tag(word))
            if len(tokens) <= max_len:
                return SentenceAnnotation(tokens, tags, frozenset(mentions))

    def corpus(self, size: int, min_len: int = 6, max_len: int = 20) -> list[SentenceAnnotation]:
        return [self.sentence(min_len, max_len) for _ in range(size)]

    def unannotated(self, length: int) -> SentenceAnnotation:
        """Random tokens from the whole vocabulary, no gold mentions."""
        vocab = self.vocabulary
        tokens = [str(w) for w in self.rng.choice(vocab, size=length)]
        tags = ["NNP" if not w.startswith("w") else self._outside_tag(w) for w in tokens]
        return SentenceAnnotation(tokens, tags, frozenset())

"""Stack-LSTM action scorer for the mention transition system.

The parser state vector is ``[buffer; stack; history]``:

* buffer: a right-to-left LSTM over word vectors (plus the ``$`` position),
  precomputed once per sentence;
* stack: a Stack-LSTM over tree-element vectors, where leaves are projected
  from ``[word vector; buffer state at shift time]`` and internal nodes come
  from per-label unary/binary compositions;
* history: a left-to-right LSTM over embeddings of the actions taken so far.

Word vectors concatenate word, POS and character-BiLSTM representations.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import nn
from .corpus import Vocabulary, lookup_embedding
from .forest import Forest, Label, Mention, SentenceAnnotation, forest_to_mentions
from .nn import Parameter, Tensor
from .transitions import (
    REDUCE,
    SHIFT,
    Action,
    ActionAlphabet,
    ParserState,
    apply,
    initial_state,
    valid_actions,
)


@dataclass(frozen=True)
class ModelConfig:
    word_dim: int = 100
    pos_dim: int = 32
    char_dim: int = 30
    char_hidden: int = 25
    buffer_hidden: int = 128
    stack_hidden: int = 128
    history_hidden: int = 128
    action_dim: int = 20
    node_dim: int = 128
    dropout: float = 0.2
    singleton_unk: float = 0.1
    seed: int = 1

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name.endswith(("_dim", "_hidden")) and getattr(self, f.name) < 1:
                raise ValueError(f"{f.name} must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if not 0.0 <= self.singleton_unk <= 1.0:
            raise ValueError("singleton_unk must be in [0, 1]")

    @property
    def word_repr_dim(self) -> int:
        return self.word_dim + self.pos_dim + 2 * self.char_hidden

    @property
    def state_dim(self) -> int:
        return self.buffer_hidden + self.stack_hidden + self.history_hidden


@dataclass
class WordRepr:
    e_w: Tensor
    e_p: Tensor
    c_w: Tensor
    e_x: Tensor


@dataclass
class EncodedSentence:
    words: list[Tensor]  # e_x for x_0 .. x_{n-1}, $
    buffer: list[Tensor]  # b_i: hidden state after reading positions n .. i


def _glorot(rng, fan_in, fan_out, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class StackEncoder:
    """Stack-LSTM: stored states plus a top pointer, so a pop is O(1)."""

    def __init__(self, W: Tensor, b: Tensor, init: Tensor):
        self.W, self.b = W, b
        self.states: list[Tensor] = [init]
        self.nodes: list[Tensor] = []
        self.top = 0

    def __len__(self) -> int:
        return self.top

    def push(self, node: Tensor) -> None:
        state = nn.lstm_cell(node, self.states[self.top], self.W, self.b)
        self.top += 1
        if self.top < len(self.states):
            self.states[self.top] = state
            self.nodes[self.top - 1] = node
        else:
            self.states.append(state)
            self.nodes.append(node)

    def pop(self) -> Tensor:
        if self.top == 0:
            raise IndexError("pop from an empty stack")
        self.top -= 1
        return self.nodes[self.top]

    def live_nodes(self) -> list[Tensor]:
        return self.nodes[: self.top]

    def summary(self) -> Tensor:
        return nn.hidden(self.states[self.top])


class ParserModel:
    def __init__(self, config: ModelConfig, vocab: Vocabulary, alphabet: Optional[ActionAlphabet] = None):
        self.config = config
        self.vocab = vocab
        self.alphabet = alphabet if alphabet is not None else ActionAlphabet(vocab.labels)
        if tuple(self.alphabet.base_labels) != tuple(sorted(vocab.labels)):
            raise ValueError("action alphabet and vocabulary labels disagree")
        self.params: dict[str, Parameter] = {}
        self._build(np.random.default_rng(config.seed))

    # -- parameters -------------------------------------------------------

    def _add(self, name: str, value) -> Parameter:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name}")
        p = self.params[name] = Parameter(name, value)
        return p

    def _add_lstm(self, name: str, n_in: int, n_hidden: int, rng) -> None:
        self._add(f"{name}.W", _glorot(rng, n_in + n_hidden, 4 * n_hidden))
        b = np.zeros(4 * n_hidden)
        b[n_hidden : 2 * n_hidden] = 1.0  # forget gate
        self._add(f"{name}.b", b)
        self._add(f"{name}.init", np.zeros(2 * n_hidden))

    def _build(self, rng) -> None:
        c = self.config
        v = self.vocab
        self._add("word_emb", rng.uniform(-1, 1, (len(v.words), c.word_dim)) * np.sqrt(3.0 / c.word_dim))
        self._add("pos_emb", rng.uniform(-1, 1, (len(v.pos_tags), c.pos_dim)) * np.sqrt(3.0 / c.pos_dim))
        self._add("char_emb", rng.uniform(-1, 1, (len(v.chars), c.char_dim)) * np.sqrt(3.0 / c.char_dim))
        self._add_lstm("char_fwd", c.char_dim, c.char_hidden, rng)
        self._add_lstm("char_bwd", c.char_dim, c.char_hidden, rng)
        self._add_lstm("buffer", c.word_repr_dim, c.buffer_hidden, rng)
        self._add_lstm("stack", c.node_dim, c.stack_hidden, rng)
        self._add_lstm("history", c.action_dim, c.history_hidden, rng)
        n_actions = len(self.alphabet)
        self._add("action_emb", rng.uniform(-1, 1, (n_actions, c.action_dim)) * np.sqrt(3.0 / c.action_dim))
        self._add("leaf.W", _glorot(rng, c.word_repr_dim + c.buffer_hidden, c.node_dim))
        self._add("leaf.b", np.zeros(c.node_dim))
        for label in self.alphabet.labels:
            if not label.is_temporary:
                self._add(f"unary.{label}.W", _glorot(rng, c.node_dim, c.node_dim))
                self._add(f"unary.{label}.b", np.zeros(c.node_dim))
        for label in self.alphabet.labels:
            self._add(f"binary.{label}.W", _glorot(rng, 2 * c.node_dim, c.node_dim))
            self._add(f"binary.{label}.b", np.zeros(c.node_dim))
        self._add("classifier.W", _glorot(rng, c.state_dim, n_actions))
        self._add("classifier.b", np.zeros(n_actions))

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def get_values(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def set_values(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if values[name].shape != p.value.shape:
                raise ValueError(f"{name}: shape {values[name].shape} != {p.value.shape}")
            p.value[...] = values[name]

    def load_pretrained(self, table: dict[str, np.ndarray]) -> float:
        """Overwrite word rows found in ``table``; returns percentage coverage."""
        W = self.params["word_emb"].value
        words = self.vocab.words[2:]
        hits = 0
        for k, word in enumerate(words, start=2):
            vec = lookup_embedding(table, word)
            if vec is not None:
                if vec.shape != (W.shape[1],):
                    raise ValueError(f"embedding for {word!r} has dimension {vec.shape}, expected {W.shape[1]}")
                W[k] = vec
                hits += 1
        return 100.0 * hits / len(words) if words else 0.0

    # -- word and buffer representations ------------------------------------

    def _run_lstm(self, name: str, inputs: Sequence[Tensor]) -> Tensor:
        W, b = self.params[f"{name}.W"], self.params[f"{name}.b"]
        state: Tensor = self.params[f"{name}.init"]
        for x in inputs:
            state = nn.lstm_cell(x, state, W, b)
        return state

    def char_repr(self, char_ids: Sequence[int]) -> Tensor:
        table = self.params["char_emb"]
        chars = [nn.take(table, k) for k in char_ids]
        fwd = self._run_lstm("char_fwd", chars)
        bwd = self._run_lstm("char_bwd", chars[::-1])
        return nn.concat([nn.hidden(fwd), nn.hidden(bwd)])

    def _word_parts(self, word_id, pos_id, char_ids, training, rng) -> WordRepr:
        e_w = nn.take(self.params["word_emb"], word_id)
        e_p = nn.take(self.params["pos_emb"], pos_id)
        c_w = self.char_repr(char_ids)
        e_x = nn.concat([e_w, e_p, c_w])
        e_x = nn.dropout(e_x, self.config.dropout, training, rng)
        return WordRepr(e_w, e_p, c_w, e_x)

    def embed_word(self, token: str, pos: str, training: bool = False, rng=None) -> WordRepr:
        if not token:
            raise ValueError("empty token")
        word_id = self.vocab.word_id(token)
        if training and self.config.singleton_unk and self.vocab.word_counts.get(token) == 1:
            if rng.random() < self.config.singleton_unk:
                word_id = 0
        return self._word_parts(word_id, self.vocab.pos_id(pos), self.vocab.char_ids(token), training, rng)

    def embed_terminal(self, training: bool = False, rng=None) -> WordRepr:
        v = self.vocab
        return self._word_parts(v.eos_word, v.eos_pos, [v.eos_char], training, rng)

    def encode_buffer(self, sentence: SentenceAnnotation, training: bool = False, rng=None) -> EncodedSentence:
        words = [self.embed_word(t, p, training, rng).e_x for t, p in zip(sentence.tokens, sentence.pos_tags)]
        words.append(self.embed_terminal(training, rng).e_x)
        W, b = self.params["buffer.W"], self.params["buffer.b"]
        state: Tensor = self.params["buffer.init"]
        buffer: list[Tensor] = [None] * len(words)  # type: ignore[list-item]
        for i in range(len(words) - 1, -1, -1):
            state = nn.lstm_cell(words[i], state, W, b)
            buffer[i] = nn.hidden(state)
        return EncodedSentence(words, buffer)

    # -- tree elements -----------------------------------------------------

    def leaf_repr(self, e_x: Tensor, b_k: Tensor) -> Tensor:
        return nn.tanh(nn.affine(self.params["leaf.W"], nn.concat([e_x, b_k]), self.params["leaf.b"]))

    def compose(self, label: Label, children: Sequence[Tensor]) -> Tensor:
        kind = {1: "unary", 2: "binary"}.get(len(children))
        if kind is None:
            raise ValueError(f"composition takes 1 or 2 children, got {len(children)}")
        W = self.params.get(f"{kind}.{label}.W")
        if W is None:
            raise ValueError(f"no {kind} composition for label {label}")
        x = children[0] if kind == "unary" else nn.concat(children)
        return nn.tanh(nn.affine(W, x, self.params[f"{kind}.{label}.b"]))

    # -- scoring -------------------------------------------------------------

    def logits(self, features: Tensor) -> Tensor:
        return nn.affine(self.params["classifier.W"], features, self.params["classifier.b"])

    def action_distribution(self, features: Tensor, mask: np.ndarray) -> np.ndarray:
        return nn.masked_softmax(self.logits(features).value, mask)

    def start(self, sentence: SentenceAnnotation, training: bool = False, rng=None) -> Episode:
        return Episode(self, sentence, training, rng)

    def episode_loss(self, sentence: SentenceAnnotation, gold: Sequence[Action], training: bool = False, rng=None) -> Tensor:
        """Summed masked NLL of the gold actions along the gold trajectory."""
        episode = self.start(sentence, training, rng)
        losses = []
        for action in gold:
            if episode.terminal:
                raise GoldActionError(f"gold action {action} follows the terminal shift")
            report = valid_actions(episode.state, self.alphabet)
            k = self.alphabet.index(action)
            if not report.mask[k]:
                raise GoldActionError(
                    f"gold action {action} blocked by {report.blocked[k]!r} at step {len(episode.state.history)}"
                )
            if report.mask.sum() > 1:
                loss, _ = nn.masked_softmax_nll(self.logits(episode.features()), report.mask, k)
                losses.append(loss)
            episode.step(action)
        if not episode.terminal:
            raise GoldActionError("gold sequence ends before the terminal shift")
        if not losses:
            return Tensor(0.0)
        total = losses[0]
        for loss in losses[1:]:
            total = nn.add(total, loss)
        return total

    def greedy_decode(self, sentence: SentenceAnnotation) -> tuple[frozenset[Mention], list[Action]]:
        episode = self.start(sentence)
        while not episode.terminal:
            mask = valid_actions(episode.state, self.alphabet).mask
            if mask.sum() == 1:
                k = int(np.flatnonzero(mask)[0])
            else:
                scores = self.logits(episode.features()).value
                k = int(np.argmax(np.where(mask, scores, -np.inf)))
            episode.step(self.alphabet[k])
        trace = list(episode.state.history)
        return forest_to_mentions(Forest(episode.state.stack[:-1])), trace

    # -- persistence ---------------------------------------------------------

    def manifest(self) -> dict:
        return {
            "config": dataclasses.asdict(self.config),
            "vocab": self.vocab.to_dict(),
            "labels": list(self.alphabet.base_labels),
        }

    def save(self, path) -> None:
        nn.save_arrays(path, {name: p.value for name, p in self.params.items()}, self.manifest())

    @classmethod
    def load(cls, path) -> ParserModel:
        arrays, meta = nn.load_arrays(path)
        model = cls(ModelConfig(**meta["config"]), Vocabulary.from_dict(meta["vocab"]), ActionAlphabet(meta["labels"]))
        expected = {name: p.shape for name, p in model.params.items()}
        arrays, _ = nn.load_arrays(path, expected)
        model.set_values(arrays)
        return model


class GoldActionError(RuntimeError):
    """A gold action is not valid where the oracle put it."""


class Episode:
    """Parser state together with its incremental neural encoders."""

    def __init__(self, model: ParserModel, sentence: SentenceAnnotation, training: bool, rng):
        self.model = model
        self.encoded = model.encode_buffer(sentence, training, rng)
        self.state: ParserState = initial_state(len(sentence))
        p = model.params
        self.stack = StackEncoder(p["stack.W"], p["stack.b"], p["stack.init"])
        self._history: Tensor = p["history.init"]

    @property
    def terminal(self) -> bool:
        return self.state.terminal

    def history_summary(self) -> Tensor:
        return nn.hidden(self._history)

    def features(self) -> Tensor:
        if self.terminal:
            raise ValueError("no features for a terminal state")
        b_k = self.encoded.buffer[self.state.buffer_front]
        return nn.concat([b_k, self.stack.summary(), self.history_summary()])

    def step(self, action: Action) -> None:
        model, i = self.model, self.state.buffer_front
        self.state = apply(self.state, action)
        if self.terminal:
            return
        if action.kind == SHIFT:
            self.stack.push(model.leaf_repr(self.encoded.words[i], self.encoded.buffer[i]))
        elif action.kind == REDUCE:
            right = self.stack.pop()
            left = self.stack.pop()
            self.stack.push(model.compose(action.label, [left, right]))
        else:
            self.stack.push(model.compose(action.label, [self.stack.pop()]))
        p = model.params
        e_a = nn.take(p["action_emb"], model.alphabet.index(action))
        self._history = nn.lstm_cell(e_a, self._history, p["history.W"], p["history.b"])

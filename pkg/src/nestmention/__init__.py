"""Transition-based recognition of nested entity mentions."""

from .corpus import Vocabulary, corpus_stats, load_corpus, load_embeddings, save_corpus
from .evaluation import PRF, bench_decode, score, split_nested
from .forest import (
    Forest,
    Internal,
    Label,
    Leaf,
    Mention,
    SentenceAnnotation,
    Terminal,
    binarize,
    debinarize,
    forest_to_mentions,
    mentions_to_forest,
    validate_nesting,
)
from .model import ModelConfig, ParserModel
from .training import TrainConfig, train
from .transitions import (
    Action,
    ActionAlphabet,
    ParserState,
    apply,
    initial_state,
    oracle_actions,
    replay,
    valid_actions,
)

__version__ = "0.1.0"

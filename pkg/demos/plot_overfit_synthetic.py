"""
Overfitting a toy corpus
========================

Train the parser on a small seeded synthetic corpus and watch dev F1 climb
until early stopping kicks in.  The training and dev sets are identical
here, so a correct implementation should reach 100%.

Smaller layer sizes than the defaults keep this under half a minute.
"""

import logging

from nestmention import ModelConfig, ParserModel, TrainConfig, Vocabulary, corpus_stats, train
from nestmention.synthetic import SyntheticCorpus
from nestmention.training import decode_corpus

logging.basicConfig(level=logging.INFO, format="%(message)s")

gen = SyntheticCorpus(seed=3)
corpus = gen.corpus(30)
stats = corpus_stats(corpus)
print(f"{stats['mentions']} mentions, {stats['nested_mention_pct']:.0f}% of them nested")
print(" ".join(corpus[0].tokens))
print(sorted(corpus[0].mentions))

# The vocabulary is built from training data only; the model owns it.
config = ModelConfig(word_dim=32, char_hidden=12, buffer_hidden=48, stack_hidden=48, history_hidden=24, node_dim=48)
model = ParserModel(config, Vocabulary.build(corpus))
print(f"{sum(p.value.size for p in model.parameters()):,} parameters")

# One Adam update per sentence; best-F1 weights are restored at the end.
model, log = train(model, corpus, corpus, TrainConfig(max_epochs=40, patience=3, seed=1))
print(f"best dev F1 {100 * log.best_f1:.1f} at epoch {log.best_epoch}, ran {len(log.epochs)} epochs")

predicted = decode_corpus(model, corpus[:1])[0]
print("decoded:", sorted(predicted))

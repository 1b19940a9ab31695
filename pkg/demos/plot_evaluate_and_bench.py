"""
Scoring and throughput
======================

Exact-match scoring with the nested / non-nested split, then a
single-thread decode benchmark.  Everything goes through files in the
corpus format, the same path the command line uses.
"""

import json
import tempfile
from pathlib import Path

from nestmention import ModelConfig, ParserModel, Vocabulary, bench_decode, load_corpus, save_corpus
from nestmention.evaluation import evaluation_report, format_report
from nestmention.synthetic import SyntheticCorpus

work = Path(tempfile.mkdtemp())
gen = SyntheticCorpus(seed=11)
gold = gen.corpus(20)
save_corpus(gold, work / "gold.jsonl")

# A fake system that forgets every inner mention: nested sentences suffer,
# flat ones are untouched.
def outermost(mentions):
    return {m for m in mentions if not any(o != m and o.start <= m.start and m.end <= o.end for o in mentions)}

save_corpus([s.with_mentions(outermost(s.mentions)) for s in gold], work / "pred.jsonl")

report = evaluation_report(load_corpus(work / "gold.jsonl")[0], load_corpus(work / "pred.jsonl")[0], split=True)
print(format_report(report))

# Throughput of an untrained model is as meaningful as a trained one for
# timing purposes: the number of actions is bounded by 3n either way.
model = ParserModel(ModelConfig(), Vocabulary.build(gold))
for n in (10, 40, 80):
    sentences = [gen.unannotated(n) for _ in range(5)]
    result = bench_decode(model, sentences, repetitions=3)
    print(f"n={n:<3} {result.words_per_second:8.0f} words/s")
print(json.dumps({"hardware": result.hardware, "threads": result.threads}))

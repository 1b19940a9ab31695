"""
From mentions to actions and back
=================================

A walk through the structural half of the library on one sentence with
two levels of nesting: build the forest, binarize it, read off the gold
action sequence and replay it.
"""

from nestmention import Mention, SentenceAnnotation, mentions_to_forest, forest_to_mentions
from nestmention.forest import Forest, format_tree
from nestmention.transitions import ActionAlphabet, initial_state, apply, oracle_actions, valid_actions

# "Indonesian leaders visited him": GPE inside PER, plus a pronoun mention.
sentence = SentenceAnnotation(
    ["Indonesian", "leaders", "visited", "him"],
    ["JJ", "NNS", "VBD", "PRP"],
    {Mention(0, 0, "GPE"), Mention(0, 1, "PER"), Mention(3, 3, "PER")},
)

# Each outermost mention becomes a tree, the unmentioned verb is a bare leaf.
forest = mentions_to_forest(sentence)
for root in forest.roots:
    print(format_tree(root, sentence.tokens))

# The oracle reads those trees off in post-order and finishes by shifting $.
actions = oracle_actions(forest)
print(" ".join(map(str, actions)), f"({len(actions)} actions, bound {3 * len(sentence)})")

# Replaying the sequence step by step, printing how many actions were legal.
alphabet = ActionAlphabet(["GPE", "PER"])
state = initial_state(len(sentence))
for action in actions:
    legal = valid_actions(state, alphabet)
    print(f"{str(action):<12} {len(legal.valid_indices)} of {len(alphabet)} valid")
    state = apply(state, action)

# The final stack (without $) is the same forest, so the mentions come back.
assert Forest(state.stack[:-1]) == forest
assert forest_to_mentions(Forest(state.stack[:-1])) == sentence.mentions

# A longer mention gets binarized to the left: "the leaders of Indonesia"
# has four children, so two temporary PER* nodes appear.
long = SentenceAnnotation(
    ["the", "leaders", "of", "Indonesia"], ["DT", "NNS", "IN", "NNP"],
    {Mention(0, 3, "PER"), Mention(3, 3, "GPE")},
)
print(format_tree(mentions_to_forest(long).roots[0], long.tokens))
print(" ".join(map(str, oracle_actions(mentions_to_forest(long)))))

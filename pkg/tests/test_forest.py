import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestmention.forest import (
    Forest,
    Internal,
    Label,
    Leaf,
    Mention,
    NaryNode,
    NestingError,
    SentenceAnnotation,
    binarize,
    debinarize,
    forest_to_mentions,
    mentions_to_forest,
    nesting_depth,
    validate_nesting,
)

from .strategies import annotated_sentences

X, XT = Label("X"), Label("X", True)
PER, GPE = Label("PER"), Label("GPE")


class TestLabel:
    def test_rendering_and_parse(self):
        assert str(XT) == "X*"
        assert Label.parse("X*") == XT
        assert Label.parse("X") == X
        assert XT.base == X and X.temporary == XT

    @pytest.mark.parametrize("name", ["", "$", "X*"])
    def test_rejects_reserved_names(self, name):
        with pytest.raises(ValueError):
            Label(name)


class TestValidateNesting:
    def test_nested4_ok(self):
        ms = {Mention(0, 1, "PER"), Mention(0, 0, "GPE"), Mention(3, 3, "PER")}
        assert validate_nesting(ms, 4).ok

    def test_empty_ok(self):
        assert validate_nesting(set(), 5).ok

    def test_crossing(self):
        a, b = Mention(0, 2, "A"), Mention(1, 3, "B")
        report = validate_nesting({a, b}, 4)
        assert not report.ok
        assert [(v.kind, v.mentions) for v in report.violations] == [("crossing", (a, b))]

    def test_identical_span_different_labels(self):
        report = validate_nesting({Mention(0, 1, "A"), Mention(0, 1, "B")}, 3)
        assert [v.kind for v in report.violations] == ["identical-span"]

    def test_out_of_bounds(self):
        report = validate_nesting({Mention(2, 4, "A")}, 4)
        assert [v.kind for v in report.violations] == ["out-of-bounds"]

    def test_reports_every_pair(self):
        ms = {Mention(0, 2, "A"), Mention(1, 3, "B"), Mention(2, 4, "C")}
        report = validate_nesting(ms, 5)
        assert len(report.violations) == 3


class TestBinarize:
    def test_three_children(self):
        node = binarize(NaryNode("X", (Leaf(0), Leaf(1), Leaf(2))))
        assert node == Internal(X, (Internal(XT, (Leaf(0), Leaf(1))), Leaf(2)))

    def test_two_children(self):
        assert binarize(NaryNode("X", (Leaf(0), Leaf(1)))) == Internal(X, (Leaf(0), Leaf(1)))

    def test_four_children(self):
        node = binarize(NaryNode("X", tuple(Leaf(i) for i in range(4))))
        inner = Internal(XT, (Internal(XT, (Leaf(0), Leaf(1))), Leaf(2)))
        assert node == Internal(X, (inner, Leaf(3)))
        assert debinarize(node) == NaryNode("X", tuple(Leaf(i) for i in range(4)))

    def test_unary(self):
        assert binarize(NaryNode("X", (Leaf(3),))) == Internal(X, (Leaf(3),))

    def test_debinarize_rejects_foreign_temporary(self):
        bad = Internal(X, (Internal(Label("Y", True), (Leaf(0), Leaf(1))), Leaf(2)))
        with pytest.raises(ValueError):
            debinarize(bad)


class TestMentionsToForest:
    def test_flat_three_word_mention(self):
        s = SentenceAnnotation(["A", "B", "C"], ["_"] * 3, {Mention(0, 2, "Person")})
        person = Label("Person")
        expected = Internal(person, (Internal(person.temporary, (Leaf(0), Leaf(1))), Leaf(2)))
        assert mentions_to_forest(s).roots == (expected,)

    def test_single_bare_word(self):
        s = SentenceAnnotation(["w"], ["_"])
        assert mentions_to_forest(s) == Forest((Leaf(0),))

    def test_nested4(self, nested4):
        forest = mentions_to_forest(nested4)
        assert forest.roots == (
            Internal(PER, (Internal(GPE, (Leaf(0),)), Leaf(1))),
            Leaf(2),
            Internal(PER, (Leaf(3),)),
        )
        forest.check()

    def test_rejects_crossing(self):
        s = SentenceAnnotation(list("abcd"), ["_"] * 4, {Mention(0, 2, "A"), Mention(1, 3, "B")})
        with pytest.raises(NestingError) as err:
            mentions_to_forest(s)
        assert err.value.report.violations[0].kind == "crossing"


class TestForestToMentions:
    def test_nested4(self, nested4):
        assert forest_to_mentions(mentions_to_forest(nested4)) == {
            Mention(0, 0, "GPE"),
            Mention(0, 1, "PER"),
            Mention(3, 3, "PER"),
        }

    def test_bare_leaves(self):
        assert forest_to_mentions(Forest((Leaf(0), Leaf(1)))) == frozenset()

    def test_temporary_emits_nothing(self):
        tree = Internal(X, (Internal(XT, (Leaf(0), Leaf(1))), Leaf(2)))
        assert forest_to_mentions(Forest((tree,))) == {Mention(0, 2, "X")}


def test_nesting_depth(nested4):
    assert nesting_depth(nested4.mentions) == 2
    assert nesting_depth([]) == 0


def test_exact_duplicates_collapse():
    s = SentenceAnnotation(["a"], ["_"], [Mention(0, 0, "A"), Mention(0, 0, "A")])
    assert len(s.mentions) == 1


@settings(max_examples=300, deadline=None)
@given(annotated_sentences())
def test_round_trip(sentence):
    forest = mentions_to_forest(sentence)
    assert forest_to_mentions(forest) == sentence.mentions


@settings(max_examples=300, deadline=None)
@given(annotated_sentences())
def test_forest_invariants(sentence):
    forest = mentions_to_forest(sentence)
    forest.check()
    assert forest.leaves() == list(range(len(sentence)))
    for root in forest.roots:
        if isinstance(root, Internal):
            assert binarize(debinarize(root)) == root

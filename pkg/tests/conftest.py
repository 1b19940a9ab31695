from pathlib import Path

import pytest

from nestmention.corpus import Vocabulary
from nestmention.forest import Mention, SentenceAnnotation
from nestmention.model import ModelConfig, ParserModel

FIXTURES = Path(__file__).parent / "fixtures"

TINY = ModelConfig(
    word_dim=4,
    pos_dim=3,
    char_dim=3,
    char_hidden=2,
    buffer_hidden=4,
    stack_hidden=4,
    history_hidden=3,
    action_dim=3,
    node_dim=4,
    dropout=0.0,
    singleton_unk=0.0,
    seed=7,
)


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def nested4():
    return SentenceAnnotation(
        ["Indonesian", "leaders", "visited", "him"],
        ["JJ", "NNS", "VBD", "PRP"],
        {Mention(0, 0, "GPE"), Mention(0, 1, "PER"), Mention(3, 3, "PER")},
    )


@pytest.fixture
def tiny_model(nested4):
    return ParserModel(TINY, Vocabulary.build([nested4]))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)

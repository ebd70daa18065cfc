"""Session-scoped fixtures: the default corpus and models.

Everything downstream is deterministic given DEFAULT_SEED, so building
these once keeps the suite fast without risking cross-test coupling.
"""

import pytest

from didyoumean.dsl import default_grammar, generate_corpus
from didyoumean.model import SequenceModel, decode_corpus

DEFAULT_SEED = 0


@pytest.fixture(scope="session")
def grammar():
    return default_grammar()


@pytest.fixture(scope="session")
def corpus(grammar):
    return generate_corpus(grammar, seed=DEFAULT_SEED)


@pytest.fixture(scope="session")
def parse_model(corpus):
    return SequenceModel(direction="parse").fit(corpus.split("train"))


@pytest.fixture(scope="session")
def gloss_model(corpus):
    return SequenceModel(direction="gloss").fit(corpus.split("train"))


@pytest.fixture(scope="session")
def test_records(parse_model, corpus):
    return decode_corpus(parse_model, corpus.split("test"))


@pytest.fixture(scope="session")
def validation_records(parse_model, corpus):
    return decode_corpus(parse_model, corpus.split("validation"))

from __future__ import annotations

import pytest

from tracktok import DensityModel, MultiTrackTokenizer
from tracktok.demo import demo_corpus


@pytest.fixture(scope="session")
def corpus():
    """Deterministic synthetic mini-corpus shared across the suite."""
    return demo_corpus(30, seed=0)


@pytest.fixture(scope="session")
def corpus_expressive():
    return demo_corpus(12, seed=0, expressive=True)


@pytest.fixture(scope="session")
def density_model(corpus):
    return DensityModel().fit(corpus)


@pytest.fixture
def tokenizer():
    return MultiTrackTokenizer()


@pytest.fixture
def tokenizer_expressive():
    return MultiTrackTokenizer(expressive=True)

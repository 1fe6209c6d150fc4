import os

import pytest

from lccrl.configuration import ModelConfiguration
from lccrl.synthetic import SyntheticConfiguration, generate_synthetic
from lccrl.vocabulary import build_vocab


@pytest.fixture()
def small_config():
    return ModelConfiguration(word_dim=4, speaker_dim=2, hidden=3, encoder_layers=1, context_layers=1, dropout=0.0)


@pytest.fixture()
def synthetic_corpus():
    return generate_synthetic(SyntheticConfiguration(num_conversations=6, seed=0))


@pytest.fixture()
def synthetic_vocab(synthetic_corpus):
    return build_vocab(synthetic_corpus, min_count=1)


@pytest.fixture()
def data_path():
    """
    Resolve a file under tests/data.
    """
    directory = os.path.join(os.path.dirname(__file__), 'data')
    return lambda name: os.path.join(directory, name)

import numpy as np
import pytest

from sneuron.atlas import build_atlas
from sneuron.factory import synth_random
from sneuron.fixture import planted_fixture
from sneuron.model import ModelConfig


@pytest.fixture(scope="session")
def fixture():
    return planted_fixture()


@pytest.fixture(scope="session")
def planted(fixture):
    weights, registry = fixture.build()
    return weights, registry


@pytest.fixture(scope="session")
def planted_atlas(fixture, planted):
    weights, _ = planted
    return build_atlas(weights, fixture.tokens(fixture.corpus_a), fixture.tokens(fixture.corpus_b), 8)


SMALL = ModelConfig(n_layers=3, d_model=16, n_heads=4, d_ffn=24, vocab_size=20, max_seq_len=32)


@pytest.fixture
def small_random():
    return synth_random(SMALL, seed=7, scale=3.0)


def random_tokens(rng, vocab_size, n):
    return [int(t) for t in rng.integers(0, vocab_size, n)]

import os

import numpy as np
import pytest
import torch

from wordglyph.corpus import Vocabulary
from wordglyph.lexicon import EmbeddingTable
from wordglyph.synth import SynthConfig, synthesize_corpus, synthesize_embedding_table

torch.set_num_threads(max(1, min(4, os.cpu_count() or 1)))


def make_table(words_to_vectors):
    """EmbeddingTable from a {word: vector} dict (test helper)."""
    words = list(words_to_vectors)
    vectors = np.array([words_to_vectors[w] for w in words], dtype=np.float64)
    return EmbeddingTable(dim=vectors.shape[1],
                          index={w: i for i, w in enumerate(words)},
                          vectors=vectors)


@pytest.fixture(scope="session")
def small_corpus():
    """10 synthetic fonts over 4 single-tag attributes."""
    config = SynthConfig(n_fonts=10, attributes=("bold", "thin", "italic", "upright"),
                         tag_mode="single", seed=3)
    records, vocab = synthesize_corpus(config)
    return records, vocab, config


@pytest.fixture(scope="session")
def small_table(small_corpus):
    _, _, config = small_corpus
    return synthesize_embedding_table(config.attributes, aliases={"fat": "bold"},
                                      dim=16, seed=5)


@pytest.fixture()
def four_word_vocab():
    return Vocabulary(words=["bold", "italic", "thin", "upright"], counts=[3, 2, 4, 1])

import numpy as np
import pytest
import torch

from textgan import TrainConfig, build_vocab, encode_corpus

torch.set_num_threads(1)

GRAMMAR_SYMBOLS = "abcde"
# Regular grammar over five symbols: each state allows two successors.
GRAMMAR_NEXT = {"a": "bc", "b": "cd", "c": "de", "d": "ea", "e": "ab"}


def sample_grammar_sentences(count: int, length: int, seed: int) -> list[str]:
    """Fixed-length sentences from the five-symbol regular grammar."""
    rng = np.random.Generator(np.random.PCG64(seed))
    sentences = []
    for _ in range(count):
        ch = GRAMMAR_SYMBOLS[rng.integers(0, len(GRAMMAR_SYMBOLS))]
        chars = [ch]
        for _ in range(length - 1):
            options = GRAMMAR_NEXT[chars[-1]]
            chars.append(options[rng.integers(0, len(options))])
        sentences.append("".join(chars))
    return sentences


def desk_config(**overrides) -> TrainConfig:
    """Downsized configuration used across training-level tests."""
    base = dict(
        sentence_len=16,
        batch_size=64,
        ae_hidden=64,
        noise_dim=32,
        channels=64,
        resblocks=2,
        max_chars=10,
        eval_batches=10,
        threads=1,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def grammar_corpus():
    return sample_grammar_sentences(2000, 16, seed=11)


@pytest.fixture(scope="session")
def grammar_vocab(grammar_corpus):
    return build_vocab(grammar_corpus, 10)


@pytest.fixture(scope="session")
def grammar_ids(grammar_corpus, grammar_vocab):
    return encode_corpus(grammar_corpus, grammar_vocab, 16)

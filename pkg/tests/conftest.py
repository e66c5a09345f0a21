import numpy as np
import pytest

from adverseg.phantom import CorpusSpec, generate_corpus


def make_corpus(count, seed, h=64, w=64, mix=(0.2, 0.4, 0.4)):
    return generate_corpus(CorpusSpec(count=count, height=h, width=w, mix=mix, seed=seed))


@pytest.fixture(scope="session")
def corpus8():
    # the overfit split: 8 samples, 64x64, seed 7
    return make_corpus(8, 7)


@pytest.fixture(scope="session")
def tumor_sample(corpus8):
    return next(s for s in corpus8 if s.cls >= 1)

import numpy as np
import pytest

from dualvoice.classifier import Frontend, TrainConfig, train
from dualvoice.synth import gen_corpus


@pytest.fixture(scope="session")
def small_corpus():
    return gen_corpus(40, seed=3)


@pytest.fixture(scope="session")
def small_model(small_corpus):
    # longer patience: train past the first perfect epoch for confident logits
    model, history = train(
        small_corpus.train,
        small_corpus.val,
        TrainConfig(seed=0, patience=15),
        frontend=Frontend.MFCC,
    )
    assert max(h["val_acc"] for h in history) > 0.9
    return model


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)

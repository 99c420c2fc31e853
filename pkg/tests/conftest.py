"""Shared fixtures: the synthetic text scene and its patch database."""

import numpy as np
import pytest

from patchdenoise import build_database, synthetic

SCENE_SEED = 7
DB_STRIDE = 2


@pytest.fixture(scope="session")
def corpus():
    clean, pages = synthetic.make_corpus(SCENE_SEED)
    return clean, pages


@pytest.fixture(scope="session")
def clean_scene(corpus):
    return corpus[0]


@pytest.fixture(scope="session")
def scene_db(corpus):
    _, pages = corpus
    return build_database(pages, 8, DB_STRIDE)


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)

import numpy as np
import pytest

from quadscan.synthdata import CorpusSpec, make_corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Small shared corpus: 4 train / 4 test sequences at 64 px."""
    root = tmp_path_factory.mktemp("mini_corpus")
    spec = CorpusSpec(
        counts={"plain": 4, "static-target": 2, "low-light": 2},
        train_fraction=0.5,
        frames=6,
        resolution=64,
    )
    make_corpus(spec, seed=99, out_dir=root)
    return root

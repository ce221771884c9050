import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fcgprobe.embed import Embedder
from fcgprobe.experiments import benign_reference, embed_samples, train_model
from fcgprobe.graph import SensitiveApiIndex
from fcgprobe.synth import SENSITIVE_APIS, SynthConfig, synth_corpus

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def apis():
    return SensitiveApiIndex(SENSITIVE_APIS)


@pytest.fixture(scope="session")
def small_corpus():
    """A quick corpus with mid-sized graphs, for search and CLI tests."""
    cfg = SynthConfig(n_graphs=60, size_range=(150, 250), seed=11)
    return cfg, synth_corpus(cfg)


@pytest.fixture(scope="session")
def small_world(small_corpus, apis):
    _, samples = small_corpus
    emb = Embedder("degree", apis)
    train = [s for s in samples if s.split == "train"]
    x, y = embed_samples(train, emb)
    models = {k: train_model(k, x, y, seed=0) for k in ("mlp", "knn", "rf")}
    return {"samples": samples, "embedder": emb, "x": x, "y": y,
            "reference": benign_reference(x, y), "models": models}


@pytest.fixture
def np_rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

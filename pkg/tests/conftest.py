import numpy as np
import pytest

from pnvec import dfg, embedder, netgen
from pnvec.pnml_io import net_from_edges


def chain_net(net_id="m", labels=("t1", "t2")):
    """t1 -> p0 -> t2 -> p1 -> ... with the given labels (None = silent)."""
    ids = [f"t{i + 1}" for i in range(len(labels))]
    edges = []
    for i in range(len(ids) - 1):
        edges += [(ids[i], f"p{i}"), (f"p{i}", ids[i + 1])]
    return net_from_edges(net_id, edges, dict(zip(ids, labels)))


@pytest.fixture(scope="session")
def synthetic_models():
    return netgen.generate_models()


@pytest.fixture(scope="session")
def synthetic_corpus(synthetic_models):
    return dfg.corpus_from_nets([n for _, n in synthetic_models], "none")


@pytest.fixture(scope="session")
def trained_space(synthetic_corpus):
    space, report = embedder.fit(synthetic_corpus, 8, embedder.TrainConfig(epochs=500, seed=0))
    return space, report


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    netgen.generate_dataset(out)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])

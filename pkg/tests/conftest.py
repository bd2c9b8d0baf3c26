import numpy as np
import pytest

from pgxbench.graphs import graph_from_undirected


@pytest.fixture
def path_graph():
    """Path a-b-c-d-e with unit features."""
    return graph_from_undirected(
        5,
        [(0, 1), (1, 2), (2, 3), (3, 4)],
        np.ones((5, 10)),
        node_labels=np.zeros(5, dtype=np.int64),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

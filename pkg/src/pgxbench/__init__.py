"""Motif-benchmark workbench: small GNNs plus a parameterized edge-mask explainer."""

from pgxbench.autodiff import Tensor, backward
from pgxbench.graphs import ComputationGraph, Graph
from pgxbench.synth import Dataset, gen_dataset

__all__ = [
    "Tensor",
    "backward",
    "Graph",
    "ComputationGraph",
    "Dataset",
    "gen_dataset",
]

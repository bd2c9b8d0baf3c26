"""Dataset persistence, TU-format ingestion, and deterministic splits."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from pgxbench.graphs import Graph
from pgxbench.seeding import substream
from pgxbench.synth import Dataset

SCHEMA_VERSION = 1


def _graph_to_dict(g: Graph) -> dict:
    return {
        "num_nodes": g.num_nodes,
        "edges": g.edges.tolist(),
        "features": g.features.tolist(),
        "node_labels": None if g.node_labels is None else g.node_labels.tolist(),
        "graph_label": g.graph_label,
        "motif_flags": g.motif_edge.astype(bool).tolist(),
    }


def _graph_from_dict(d: dict) -> Graph:
    return Graph(
        num_nodes=int(d["num_nodes"]),
        edges=np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2),
        features=np.asarray(d["features"], dtype=np.float64),
        node_labels=None if d["node_labels"] is None else np.asarray(d["node_labels"], dtype=np.int64),
        graph_label=d["graph_label"],
        motif_edge=np.asarray(d["motif_flags"], dtype=bool),
    )


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": ds.name,
        "task": ds.task,
        "recipe": ds.recipe,
        "instances": ds.instances.tolist(),
        "graphs": [_graph_to_dict(g) for g in ds.graphs],
    }


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds), sort_keys=True) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    d = json.loads(Path(path).read_text())
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported dataset schema version: {d.get('schema_version')}")
    return Dataset(
        name=d["name"],
        task=d["task"],
        graphs=[_graph_from_dict(gd) for gd in d["graphs"]],
        instances=np.asarray(d["instances"], dtype=np.int64),
        recipe=d["recipe"],
    )


# ---------------------------------------------------------------------------
# TU-style ingestion


def _read_int_rows(path: Path) -> list[list[int]]:
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.replace(",", " ").split()])
        except ValueError as exc:
            raise ValueError(f"{path.name}:{lineno}: not an integer row: {line!r}") from exc
    return rows


def find_tu_files(directory: str | Path) -> dict[str, Path]:
    """Locate the required *_A / *_graph_indicator / *_graph_labels / *_node_labels files."""
    directory = Path(directory)
    suffixes = {
        "A": "_A.txt",
        "graph_indicator": "_graph_indicator.txt",
        "graph_labels": "_graph_labels.txt",
        "node_labels": "_node_labels.txt",
    }
    found: dict[str, Path] = {}
    for key, suffix in suffixes.items():
        matches = sorted(directory.glob(f"*{suffix}"))
        if not matches:
            raise FileNotFoundError(f"missing required TU file *{suffix} in {directory}")
        found[key] = matches[0]
    return found


def parse_tu(files: dict[str, Path] | str | Path, name: str = "tu") -> Dataset:
    """Parse a TU-format bundle into a graph-classification Dataset.

    Atom types are one-hot encoded; motif flags are all false since the raw
    data ships no ground-truth explanation edges.
    """
    if not isinstance(files, dict):
        files = find_tu_files(files)
    indicator = [r[0] for r in _read_int_rows(files["graph_indicator"])]
    num_nodes_total = len(indicator)
    graph_ids = sorted(set(indicator))
    if graph_ids != list(range(1, len(graph_ids) + 1)):
        raise ValueError(f"{files['graph_indicator'].name}: graph ids are not contiguous from 1")

    raw_graph_labels = [r[0] for r in _read_int_rows(files["graph_labels"])]
    if len(raw_graph_labels) != len(graph_ids):
        raise ValueError(
            f"{files['graph_labels'].name}: {len(raw_graph_labels)} labels for {len(graph_ids)} graphs"
        )
    label_map = {lab: i for i, lab in enumerate(sorted(set(raw_graph_labels)))}

    raw_node_labels = [r[0] for r in _read_int_rows(files["node_labels"])]
    if len(raw_node_labels) != num_nodes_total:
        raise ValueError(
            f"{files['node_labels'].name}: {len(raw_node_labels)} node labels for {num_nodes_total} nodes"
        )
    vocab = {atom: i for i, atom in enumerate(sorted(set(raw_node_labels)))}

    node_graph = np.asarray(indicator, dtype=np.int64)
    local_id = np.zeros(num_nodes_total + 1, dtype=np.int64)
    counts: dict[int, int] = {}
    for node, gid in enumerate(indicator, start=1):
        local_id[node] = counts.get(gid, 0)
        counts[gid] = counts.get(gid, 0) + 1

    per_graph_edges: dict[int, list[tuple[int, int]]] = {gid: [] for gid in graph_ids}
    for lineno, row in enumerate(_read_int_rows(files["A"]), start=1):
        if len(row) != 2:
            raise ValueError(f"{files['A'].name}:{lineno}: expected two endpoints, got {row}")
        u, v = row
        if not (1 <= u <= num_nodes_total and 1 <= v <= num_nodes_total):
            raise ValueError(f"{files['A'].name}:{lineno}: endpoint out of range: {row}")
        if node_graph[u - 1] != node_graph[v - 1]:
            raise ValueError(
                f"{files['A'].name}:{lineno}: edge ({u},{v}) crosses graphs "
                f"{node_graph[u - 1]} and {node_graph[v - 1]}"
            )
        per_graph_edges[int(node_graph[u - 1])].append((int(local_id[u]), int(local_id[v])))

    graphs = []
    for gid in graph_ids:
        n = counts[gid]
        atom_rows = [raw_node_labels[i] for i in range(num_nodes_total) if indicator[i] == gid]
        features = np.zeros((n, len(vocab)))
        for i, atom in enumerate(atom_rows):
            features[i, vocab[atom]] = 1.0
        edges = per_graph_edges[gid]
        have = set(edges)
        directed = list(edges) + [(j, i) for (i, j) in edges if (j, i) not in have]
        graphs.append(
            Graph(
                num_nodes=n,
                edges=np.asarray(directed, dtype=np.int64).reshape(-1, 2),
                features=features,
                node_labels=None,
                graph_label=label_map[raw_graph_labels[gid - 1]],
                motif_edge=np.zeros(len(directed), dtype=bool),
            )
        )
    recipe = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "source": "tu",
        "files": {k: str(v) for k, v in files.items()},
        "atom_vocabulary": {str(k): v for k, v in vocab.items()},
        "label_map": {str(k): v for k, v in label_map.items()},
    }
    return Dataset(name=name, task="graph", graphs=graphs, instances=np.arange(len(graphs)), recipe=recipe)


# ---------------------------------------------------------------------------
# splits


def split_items(n: int, ratios: tuple[int, int, int], rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shuffle range(n) into train/val/test position arrays."""
    if sum(ratios) != 100:
        raise ValueError(f"split ratios must sum to 100, got {ratios}")
    if n == 0:
        raise ValueError("cannot split an empty collection")
    perm = rng.permutation(n)
    n_train = int(n * ratios[0] / 100)
    n_val = int(n * ratios[1] / 100)
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


def split(ds: Dataset, ratios: tuple[int, int, int] = (80, 10, 10), seed: int = 0):
    """Deterministic train/val/test split over explainable instances.

    Node-classification datasets are split over motif nodes, graph datasets
    over graphs. Returns three arrays of instance ids.
    """
    rng = substream(seed, "instance-split", ds.name)
    parts = split_items(len(ds.instances), ratios, rng)
    return tuple(np.sort(ds.instances[p]) for p in parts)


def node_split(ds: Dataset, ratios: tuple[int, int, int] = (80, 10, 10), seed: int = 0):
    """Train/val/test split over all nodes, for supervising the node-task GNN."""
    if ds.task != "node":
        raise ValueError("node_split applies to node-classification datasets")
    rng = substream(seed, "node-split", ds.name)
    parts = split_items(ds.graphs[0].num_nodes, ratios, rng)
    return tuple(np.sort(p) for p in parts)

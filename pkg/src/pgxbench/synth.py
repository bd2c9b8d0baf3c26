"""Seeded construction of the synthetic motif benchmarks.

Five datasets plus a noisier BA-Shapes variant, all with per-edge ground
truth: edges inside planted motifs are flagged true, everything else
(base graph, connectors, perturbation noise) false.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pgxbench.graphs import Graph, graph_from_undirected
from pgxbench.seeding import substream

FEATURE_DIM = 10

DATASET_NAMES = (
    "ba-shapes",
    "ba-community",
    "tree-cycles",
    "tree-grid",
    "ba-2motifs",
    "ba-shapes-noisy",
)


@dataclass(frozen=True)
class MotifSpec:
    """A planted substructure: internal edges plus per-node role labels."""

    kind: str
    num_nodes: int
    und_edges: tuple[tuple[int, int], ...]
    roles: tuple[int, ...]


def motif_spec(kind: str) -> MotifSpec:
    if kind == "house":
        # square 0-1-2-3 with roof node 4 on top of the 0-1 side;
        # roles: 1 = top, 2 = middle (under the roof), 3 = bottom
        return MotifSpec(
            "house",
            5,
            ((0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)),
            (2, 2, 3, 3, 1),
        )
    if kind == "cycle6":
        return MotifSpec("cycle6", 6, tuple((i, (i + 1) % 6) for i in range(6)), (1,) * 6)
    if kind == "cycle5":
        return MotifSpec("cycle5", 5, tuple((i, (i + 1) % 5) for i in range(5)), (1,) * 5)
    if kind == "grid3x3":
        edges = []
        for r in range(3):
            for c in range(3):
                n = 3 * r + c
                if c < 2:
                    edges.append((n, n + 1))
                if r < 2:
                    edges.append((n, n + 3))
        return MotifSpec("grid3x3", 9, tuple(edges), (1,) * 9)
    raise ValueError(f"unknown motif kind: {kind}")


@dataclass
class Dataset:
    """A named graph collection with explainable-instance ids and a recipe.

    Node-classification datasets hold a single graph and node-id instances;
    graph-classification datasets hold many graphs and graph-id instances.
    """

    name: str
    task: str  # "node" | "graph"
    graphs: list[Graph]
    instances: np.ndarray
    recipe: dict = field(default_factory=dict)

    def __post_init__(self):
        self.instances = np.asarray(self.instances, dtype=np.int64)
        if self.task not in ("node", "graph"):
            raise ValueError(f"unknown task kind: {self.task}")

    @property
    def label_count(self) -> int:
        if self.task == "node":
            return int(self.graphs[0].node_labels.max()) + 1
        return int(max(g.graph_label for g in self.graphs)) + 1

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].features.shape[1]


def gen_ba(n: int, m: int, rng: np.random.Generator, feature_dim: int = FEATURE_DIM) -> Graph:
    """Preferential-attachment graph grown from an m-node clique seed."""
    if not n > m >= 1:
        raise ValueError(f"need n > m >= 1, got n={n}, m={m}")
    edges: list[tuple[int, int]] = [(i, j) for i in range(m) for j in range(i + 1, m)]
    repeated: list[int] = [v for e in edges for v in e]
    for new in range(m, n):
        targets: set[int] = set()
        while len(targets) < m:
            if repeated:
                cand = repeated[int(rng.integers(len(repeated)))]
            else:
                cand = int(rng.integers(new))
            targets.add(int(cand))
        for t in sorted(targets):
            edges.append((t, new))
            repeated.extend((t, new))
    return graph_from_undirected(
        n,
        edges,
        np.ones((n, feature_dim)),
        node_labels=np.zeros(n, dtype=np.int64),
    )


def gen_balanced_tree(depth: int, feature_dim: int = FEATURE_DIM) -> Graph:
    """Perfect binary tree with 2**(depth+1) - 1 nodes."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n = 2 ** (depth + 1) - 1
    edges = []
    for i in range(n):
        for child in (2 * i + 1, 2 * i + 2):
            if child < n:
                edges.append((i, child))
    return graph_from_undirected(
        n,
        edges,
        np.ones((n, feature_dim)),
        node_labels=np.zeros(n, dtype=np.int64),
    )


def attach_motifs(base: Graph, spec: MotifSpec, count: int, rng: np.random.Generator) -> Graph:
    """Append motif copies, each tethered to the base by one connector edge.

    Motif-internal edges are flagged as ground truth; connectors are not.
    Base node labels are kept, motif nodes get the spec's role labels.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    base_n = base.num_nodes
    rep = base.representative_edges()
    und = [tuple(e) for e in base.edges[rep]]
    flags = list(base.motif_edge[rep])
    labels = list(base.node_labels if base.node_labels is not None else np.zeros(base_n, dtype=np.int64))
    n = base_n
    for _ in range(count):
        offset = n
        for i, j in spec.und_edges:
            und.append((offset + i, offset + j))
            flags.append(True)
        labels.extend(spec.roles)
        n += spec.num_nodes
        anchor = offset + int(rng.integers(spec.num_nodes))
        target = int(rng.integers(base_n))
        und.append((target, anchor))
        flags.append(False)
    features = np.ones((n, base.features.shape[1]))
    features[:base_n] = base.features
    return graph_from_undirected(n, und, features, node_labels=np.asarray(labels), motif_flags=flags)


def perturb_edges(g: Graph, count: int, rng: np.random.Generator) -> Graph:
    """Add uniformly random new undirected edges, all flagged as noise."""
    n = g.num_nodes
    rep = g.representative_edges()
    existing = {(min(int(i), int(j)), max(int(i), int(j))) for i, j in g.edges[rep]}
    capacity = n * (n - 1) // 2 - len(existing)
    if count > capacity:
        raise ValueError(f"cannot place {count} new edges, only {capacity} slots free")
    added: list[tuple[int, int]] = []
    while len(added) < count:
        i, j = int(rng.integers(n)), int(rng.integers(n))
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in existing:
            continue
        existing.add(key)
        added.append(key)
    und = [tuple(e) for e in g.edges[rep]] + added
    flags = list(g.motif_edge[rep]) + [False] * len(added)
    return graph_from_undirected(
        n, und, g.features, node_labels=g.node_labels, graph_label=g.graph_label, motif_flags=flags
    )


def _ba_shapes_graph(seed: int, label: str, extra_noise: int = 0) -> Graph:
    base = gen_ba(300, 5, substream(seed, label, "base"))
    g = attach_motifs(base, motif_spec("house"), 80, substream(seed, label, "attach"))
    g = perturb_edges(g, 30, substream(seed, label, "perturb"))
    if extra_noise:
        g = perturb_edges(g, extra_noise, substream(seed, label, "extra-noise"))
    return g


def degree_onehot(g: Graph) -> np.ndarray:
    """One-hot degree encoding, top bin shared by degrees >= FEATURE_DIM - 1.

    Structure-only benchmarks ship no real features; encoding the degree
    makes the local structure visible to the first GNN layer, which constant
    vectors provably hide (any aggregation of identical rows stays rank one).
    """
    deg = np.bincount(g.edges[:, 0], minlength=g.num_nodes)
    return np.eye(FEATURE_DIM)[np.minimum(deg, FEATURE_DIM - 1)]


def _with_features(g: Graph, features: np.ndarray) -> Graph:
    return Graph(
        num_nodes=g.num_nodes,
        edges=g.edges,
        features=features,
        node_labels=g.node_labels,
        graph_label=g.graph_label,
        motif_edge=g.motif_edge,
    )


def gen_dataset(name: str, seed: int) -> Dataset:
    """Build one of the named benchmarks, fully labeled, from a single seed."""
    if name not in DATASET_NAMES:
        raise ValueError(f"unknown dataset name: {name!r}; known: {', '.join(DATASET_NAMES)}")
    recipe: dict = {"schema_version": 1, "name": name, "seed": int(seed), "feature_dim": FEATURE_DIM}

    if name in ("ba-shapes", "ba-shapes-noisy"):
        extra = 60 if name == "ba-shapes-noisy" else 0
        g = _ba_shapes_graph(seed, "shapes", extra_noise=extra)
        g = _with_features(g, degree_onehot(g))
        recipe.update(
            base="ba(300,5)", motifs="house x80", perturb_edges=30, extra_noise_edges=extra,
            features="degree one-hot",
        )
        return Dataset(name, "node", [g], np.arange(300, 700), recipe)

    if name == "ba-community":
        parts = [_ba_shapes_graph(seed, f"community{c}") for c in range(2)]
        n0 = parts[0].num_nodes
        n = n0 + parts[1].num_nodes
        und: list[tuple[int, int]] = []
        flags: list[bool] = []
        labels = np.zeros(n, dtype=np.int64)
        for c, part in enumerate(parts):
            off = c * n0
            rep = part.representative_edges()
            und.extend((off + int(i), off + int(j)) for i, j in part.edges[rep])
            flags.extend(part.motif_edge[rep])
            labels[off : off + n0] = part.node_labels + 4 * c
        cross_rng = substream(seed, "cross")
        existing = set(und)
        cross = 0
        target_cross = int(0.01 * n)
        while cross < target_cross:
            pair = (int(cross_rng.integers(n0)), n0 + int(cross_rng.integers(n0)))
            if pair in existing:
                continue
            existing.add(pair)
            und.append(pair)
            flags.append(False)
            cross += 1
        g = graph_from_undirected(
            n, und, np.ones((n, FEATURE_DIM)), node_labels=labels, motif_flags=flags
        )
        # community mean offsets (spacing 1.0, both nonzero so message
        # magnitudes never vanish) + Gaussian noise, on top of the degree bins
        feat_rng = substream(seed, "features")
        mu = np.where(np.arange(n) < n0, 1.0, 2.0)[:, None]
        features = degree_onehot(g) + feat_rng.normal(mu, 0.1, size=(n, FEATURE_DIM))
        g = _with_features(g, features)
        recipe.update(
            base="2 x ba-shapes", cross_edges=target_cross,
            features="degree one-hot + per-community gaussian offset (means 1 and 2, sigma 0.1)",
        )
        instances = np.concatenate([np.arange(300, 700), np.arange(n0 + 300, n0 + 700)])
        return Dataset(name, "node", [g], instances, recipe)

    if name in ("tree-cycles", "tree-grid"):
        kind = "cycle6" if name == "tree-cycles" else "grid3x3"
        base = gen_balanced_tree(8)
        g = attach_motifs(base, motif_spec(kind), 80, substream(seed, "attach"))
        g = _with_features(g, degree_onehot(g))
        recipe.update(base="balanced binary tree, depth 8", motifs=f"{kind} x80", features="degree one-hot")
        return Dataset(name, "node", [g], np.arange(base.num_nodes, g.num_nodes), recipe)

    if name == "ba-2motifs":
        graphs = []
        for i in range(1000):
            rng = substream(seed, "graph", i)
            base = gen_ba(20, 1, rng)
            kind = "house" if i < 500 else "cycle5"
            g = attach_motifs(base, motif_spec(kind), 1, rng)
            graphs.append(
                Graph(
                    num_nodes=g.num_nodes,
                    edges=g.edges,
                    features=degree_onehot(g),
                    node_labels=None,
                    graph_label=0 if kind == "house" else 1,
                    motif_edge=g.motif_edge,
                )
            )
        recipe.update(
            base="ba(20,1)", motifs="house (label 0) or cycle5 (label 1)",
            graphs=1000, features="degree one-hot",
        )
        return Dataset(name, "graph", graphs, np.arange(1000), recipe)

    raise AssertionError("unreachable")

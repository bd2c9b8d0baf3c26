"""Graph representation, L-hop computation graphs, edge scores, and exports.

Undirected data is stored as paired directed edges so that message passing
and edge-mask sampling share one index space. Edge order is generation
order; every per-edge score vector in the package refers to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pgxbench.autodiff import AggPlan

# score vectors are plain float arrays aligned with a graph's directed edges
EdgeScores = np.ndarray

_PALETTE = [
    "#d9d9d9",  # label 0: base
    "#66c2a5",
    "#fc8d62",
    "#8da0cb",
    "#e78ac3",
    "#a6d854",
    "#ffd92f",
    "#b3b3b3",
]


@dataclass
class Graph:
    """Directed-pair graph with features, labels and ground-truth motif flags.

    ``indeg_offset`` carries degree mass of neighbors that were cut away by
    computation-graph extraction, so the degree normalization of a subgraph
    forward pass reproduces the parent graph's exactly.
    """

    num_nodes: int
    edges: np.ndarray  # (E, 2) int64, ordered pairs
    features: np.ndarray  # (N, d) float64
    node_labels: np.ndarray | None = None
    graph_label: int | None = None
    motif_edge: np.ndarray | None = None  # (E,) bool
    indeg_offset: np.ndarray | None = None  # (N,) float64, zeros unless extracted
    _plan: AggPlan | None = field(default=None, repr=False, compare=False)
    _rev: np.ndarray | None = field(default=None, repr=False, compare=False)
    _rep: np.ndarray | None = field(default=None, repr=False, compare=False)
    _expand: np.ndarray | None = field(default=None, repr=False, compare=False)
    _norm_deg: np.ndarray | None = field(default=None, repr=False, compare=False)
    _sym_weights: np.ndarray | None = field(default=None, repr=False, compare=False)
    _adjacent_rep_pairs: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.node_labels is not None:
            self.node_labels = np.asarray(self.node_labels, dtype=np.int64)
        if self.motif_edge is None:
            self.motif_edge = np.zeros(len(self.edges), dtype=bool)
        self.motif_edge = np.asarray(self.motif_edge, dtype=bool)
        if self.indeg_offset is None:
            self.indeg_offset = np.zeros(self.num_nodes)
        self.indeg_offset = np.asarray(self.indeg_offset, dtype=np.float64)
        self._validate()

    def _validate(self):
        n, e = self.num_nodes, len(self.edges)
        if self.features.shape[0] != n:
            raise ValueError(f"feature matrix has {self.features.shape[0]} rows for {n} nodes")
        if self.node_labels is not None and len(self.node_labels) != n:
            raise ValueError("node label vector length does not match node count")
        if len(self.motif_edge) != e:
            raise ValueError("motif flag vector length does not match edge count")
        if self.indeg_offset.shape != (n,) or np.any(self.indeg_offset < 0):
            raise ValueError("indeg_offset must be one non-negative value per node")
        if e == 0:
            return
        if self.edges.min() < 0 or self.edges.max() >= n:
            raise ValueError("edge endpoint out of range")
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        if len(np.unique(keys)) != e:
            raise ValueError("duplicate directed edge")
        rev = self.reverse_index()
        if np.any(self.motif_edge != self.motif_edge[rev]):
            raise ValueError("motif flags must be symmetric under edge reversal")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def plan(self) -> AggPlan:
        if self._plan is None:
            self._plan = AggPlan(self.num_nodes, self.edges[:, 0], self.edges[:, 1])
        return self._plan

    def reverse_index(self) -> np.ndarray:
        """For each directed edge, the index of its reversed twin."""
        if self._rev is None:
            n = self.num_nodes
            keys = self.edges[:, 0] * n + self.edges[:, 1]
            rkeys = self.edges[:, 1] * n + self.edges[:, 0]
            order = np.argsort(keys, kind="stable")
            pos = np.searchsorted(keys[order], rkeys)
            if np.any(pos >= len(keys)) or np.any(keys[order][np.minimum(pos, len(keys) - 1)] != rkeys):
                raise ValueError("graph does not store both directions of every edge")
            self._rev = order[pos]
        return self._rev

    def representative_edges(self) -> np.ndarray:
        """Indices of one directed edge per undirected edge (src < dst)."""
        if self._rep is None:
            self._rep = np.flatnonzero(self.edges[:, 0] < self.edges[:, 1])
        return self._rep

    def expand_index(self) -> np.ndarray:
        """Map each directed edge to its undirected representative's position."""
        if self._expand is None:
            rep = self.representative_edges()
            slot = np.empty(self.num_edges, dtype=np.int64)
            slot[rep] = np.arange(len(rep))
            slot[self.reverse_index()[rep]] = np.arange(len(rep))
            self._expand = slot
        return self._expand

    def neighbors(self, node: int) -> np.ndarray:
        plan = self.plan()
        return plan._bwd_indices[plan._bwd_indptr[node] : plan._bwd_indptr[node + 1]]

    def indegrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.num_nodes).astype(np.float64)

    def norm_degrees(self) -> np.ndarray:
        """1 + offset + in-degree per node, as a column; the message normalizer."""
        if self._norm_deg is None:
            self._norm_deg = (1.0 + self.indeg_offset + self.indegrees())[:, None]
        return self._norm_deg

    def unit_sym_weights(self) -> np.ndarray:
        """1/sqrt(deg_i deg_j) per directed edge for unit masks, pinned for reuse."""
        if self._sym_weights is None:
            d = self.norm_degrees()[:, 0]
            w = 1.0 / np.sqrt(d[self.edges[:, 0]] * d[self.edges[:, 1]])
            self._sym_weights = self.plan().pin_weights(w)
        return self._sym_weights

    def adjacent_rep_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Ordered pairs of distinct undirected edges sharing an endpoint.

        Returned as two index arrays into the representative edge list.
        """
        if self._adjacent_rep_pairs is None:
            rep = self.representative_edges()
            incident: list[list[int]] = [[] for _ in range(self.num_nodes)]
            for slot, e in enumerate(rep):
                i, j = self.edges[e]
                incident[i].append(slot)
                incident[j].append(slot)
            first: list[np.ndarray] = []
            second: list[np.ndarray] = []
            for slots in incident:
                d = len(slots)
                if d < 2:
                    continue
                s = np.asarray(slots, dtype=np.int64)
                a = np.repeat(s, d)
                b = np.tile(s, d)
                keep = a != b
                first.append(a[keep])
                second.append(b[keep])
            if first:
                self._adjacent_rep_pairs = (np.concatenate(first), np.concatenate(second))
            else:
                empty = np.zeros(0, dtype=np.int64)
                self._adjacent_rep_pairs = (empty, empty)
        return self._adjacent_rep_pairs


def graph_from_undirected(
    num_nodes: int,
    und_edges,
    features: np.ndarray,
    node_labels=None,
    graph_label=None,
    motif_flags=None,
) -> Graph:
    """Build a Graph from undirected edges, interleaving both directions."""
    und = np.asarray(und_edges, dtype=np.int64).reshape(-1, 2)
    edges = np.empty((2 * len(und), 2), dtype=np.int64)
    edges[0::2] = und
    edges[1::2] = und[:, ::-1]
    flags = None
    if motif_flags is not None:
        flags = np.repeat(np.asarray(motif_flags, dtype=bool), 2)
    return Graph(
        num_nodes=num_nodes,
        edges=edges,
        features=features,
        node_labels=node_labels,
        graph_label=graph_label,
        motif_edge=flags,
    )


@dataclass
class ComputationGraph:
    """Induced L-hop subgraph around one center node."""

    graph: Graph
    node_map: np.ndarray  # subgraph node id -> parent node id
    edge_map: np.ndarray  # subgraph edge id -> parent edge id
    center: int  # subgraph node id of the explained node


def extract_computation_graph(g: Graph, v: int, hops: int) -> ComputationGraph:
    """BFS ball of radius ``hops`` around ``v`` with all induced parent edges."""
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range for graph with {g.num_nodes} nodes")
    if hops < 1:
        raise ValueError("hop count must be at least 1")
    visited = {int(v)}
    frontier = [int(v)]
    for _ in range(hops):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w not in visited:
                    visited.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    node_map = np.array(sorted(visited), dtype=np.int64)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[node_map] = np.arange(len(node_map))
    inside = (local[g.edges[:, 0]] >= 0) & (local[g.edges[:, 1]] >= 0)
    edge_map = np.flatnonzero(inside)
    sub_edges = local[g.edges[edge_map]]
    # boundary nodes lose neighbors; keep their degree normalization intact
    parent_indeg = (g.indeg_offset + g.indegrees())[node_map]
    sub_indeg = np.bincount(sub_edges[:, 1], minlength=len(node_map))
    sub = Graph(
        num_nodes=len(node_map),
        edges=sub_edges,
        features=g.features[node_map],
        node_labels=None if g.node_labels is None else g.node_labels[node_map],
        graph_label=g.graph_label,
        motif_edge=g.motif_edge[edge_map],
        indeg_offset=parent_indeg - sub_indeg,
    )
    return ComputationGraph(graph=sub, node_map=node_map, edge_map=edge_map, center=int(local[v]))


def symmetrize_scores(g: Graph, scores: EdgeScores) -> EdgeScores:
    """Average each directed score with its reversed twin."""
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != (g.num_edges,):
        raise ValueError(f"score vector shape {s.shape} does not match {g.num_edges} edges")
    return 0.5 * (s + s[g.reverse_index()])


def topk_rep_edges(g: Graph, scores: EdgeScores, k: int) -> np.ndarray:
    """Indices (into the representative list) of the k best undirected edges."""
    rep = g.representative_edges()
    if k > len(rep):
        raise ValueError(f"k={k} exceeds {len(rep)} undirected edges")
    s = np.asarray(scores, dtype=np.float64)[rep]
    order = np.lexsort((np.arange(len(rep)), -s))
    return order[:k]


def topk_connected(g: Graph, scores: EdgeScores, k: int) -> bool:
    """Whether the top-k undirected edges form one connected subgraph."""
    rep = g.representative_edges()
    chosen = g.edges[rep[topk_rep_edges(g, scores, k)]]
    if len(chosen) == 0:
        return True
    parent: dict[int, int] = {}

    def find(a: int) -> int:
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in chosen:
        parent[find(int(i))] = find(int(j))
    roots = {find(int(n)) for n in np.unique(chosen)}
    return len(roots) == 1


def to_dot(g: Graph, scores: EdgeScores, k: int) -> str:
    """Graphviz text with the k top-scoring undirected edges drawn bold."""
    rep = g.representative_edges()
    bold = set(topk_rep_edges(g, scores, k).tolist())
    sym = symmetrize_scores(g, scores)
    lines = ["graph explanation {", "  node [shape=circle style=filled width=0.3 fontsize=8];"]
    labels = g.node_labels
    for n in range(g.num_nodes):
        color = _PALETTE[int(labels[n]) % len(_PALETTE)] if labels is not None else _PALETTE[0]
        lines.append(f'  {n} [fillcolor="{color}"];')
    for slot, e in enumerate(rep):
        i, j = g.edges[e]
        if slot in bold:
            style = "style=bold penwidth=2.5 color=black"
        else:
            style = 'penwidth=0.6 color="#aaaaaa"'
        lines.append(f'  {i} -- {j} [{style} tooltip="{sym[e]:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def scores_to_json_dict(g: Graph, scores: EdgeScores) -> dict:
    """Stable-field JSON payload of the scored edge list."""
    sym = symmetrize_scores(g, scores)
    return {
        "schema_version": 1,
        "edges": g.edges.tolist(),
        "scores": sym.tolist(),
        "motif_flags": g.motif_edge.astype(bool).tolist(),
    }

"""Parameterized edge-distribution explainer, plus the reference baselines.

One shared two-layer MLP maps frozen GNN edge embeddings to latent edge
logits. Training draws relaxed Bernoulli edge masks from those logits,
pushes the masked graph through the frozen model, and minimizes the
cross-entropy between the original and masked predictions plus sparsity
regularizers, backpropagating only into the MLP. Inference is a single
deterministic MLP pass per instance, so a trained explainer transfers to
unseen instances without retraining.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from pgxbench import autodiff as ad
from pgxbench.autodiff import Tensor
from pgxbench.gnn import GnnModel, forward
from pgxbench.graphs import (
    ComputationGraph,
    Graph,
    extract_computation_graph,
    symmetrize_scores,
    topk_rep_edges,
)
from pgxbench.optim import AdamState, adam_step, xavier_init
from pgxbench.seeding import substream
from pgxbench.synth import Dataset

MLP_HIDDEN = 64


@dataclass
class ExplainTrainConfig:
    epochs: int = 30
    lr: float = 3e-3
    samples: int = 1  # concrete draws per instance per epoch
    lambda_size: float = 0.05
    lambda_entropy: float = 1.0
    lambda_budget: float = 0.0
    budget: float = 0.0
    lambda_connect: float = 0.0
    tau_start: float = 5.0
    tau_end: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.samples < 1:
            raise ValueError("epochs and samples must be at least 1")
        if self.tau_start <= 0 or self.tau_end <= 0:
            raise ValueError("temperatures must be positive")
        if min(self.lambda_size, self.lambda_entropy, self.lambda_budget, self.lambda_connect) < 0:
            raise ValueError("regularizer coefficients must be non-negative")


def recommended_explainer_config(dataset_name: str, seed: int = 0) -> ExplainTrainConfig:
    """Explainer settings known to reach the target AUCs per dataset.

    Tree-Grid needs stronger size pressure: its computation graphs are
    dominated by motif edges (3x3 grids have diameter 4, so 3-hop balls
    barely leave the motif) and with the default coefficient every edge
    saturates at keep-probability one, leaving nothing to rank.
    """
    cfg = ExplainTrainConfig(seed=seed)
    if dataset_name == "tree-grid":
        cfg.lambda_size = 0.2
    return cfg


@dataclass
class ExplainerNet:
    """Shared MLP from edge embeddings to one latent logit per edge."""

    input_width: int
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def params(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params())


def new_explainer_net(input_width: int, rng) -> ExplainerNet:
    return ExplainerNet(
        input_width=input_width,
        w1=xavier_init((input_width, MLP_HIDDEN), rng),
        b1=Tensor(np.zeros(MLP_HIDDEN), requires_grad=True),
        w2=xavier_init((MLP_HIDDEN, 1), rng),
        b2=Tensor(np.zeros(1), requires_grad=True),
    )


def temperature(epoch: int, cfg: ExplainTrainConfig) -> float:
    """Geometric annealing from tau_start at epoch 0 to tau_end at the last epoch."""
    if not 0 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs}]")
    return cfg.tau_start * (cfg.tau_end / cfg.tau_start) ** (epoch / cfg.epochs)


def sample_concrete(omega, tau: float, rng: np.random.Generator) -> Tensor:
    """Relaxed Bernoulli edge weights in (0, 1) from latent logits.

    One uniform draw per entry; callers pass per-undirected-edge logits so
    both directions of an edge share a single draw.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    om = omega if isinstance(omega, Tensor) else Tensor(omega)
    eps = np.clip(rng.random(om.data.shape), 1e-12, 1.0 - 1e-12)
    noise = np.log(eps) - np.log1p(-eps)
    return ad.sigmoid((om + Tensor(noise)) * (1.0 / tau))


def reg_budget(edge_probs, budget: float) -> Tensor:
    """ReLU(total mask mass - budget): free below budget, linear above."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    e = edge_probs if isinstance(edge_probs, Tensor) else Tensor(edge_probs)
    return ad.relu(ad.total(e) - budget)


def reg_connectivity(edge_probs, g: Graph) -> Tensor:
    """Cross-entropy pulled over ordered pairs of undirected edges sharing a node.

    Low when adjacent edges agree (both kept or both dropped), so minimizing
    it favors connected explanations.
    """
    ia, ib = g.adjacent_rep_pairs()
    if len(ia) == 0:
        return Tensor(0.0)
    e = edge_probs if isinstance(edge_probs, Tensor) else Tensor(edge_probs)
    if e.data.ndim == 1:
        e = ad.reshape(e, (len(e.data), 1))
    ea = ad.gather_rows(e, ia)
    eb = ad.clip(ad.gather_rows(e, ib), 1e-12, 1.0 - 1e-12)
    h = -((1.0 - ea) * ad.log(1.0 - eb) + ea * ad.log(eb))
    return ad.mean(h)


def explainer_loss(p_original, p_masked, edge_probs, cfg: ExplainTrainConfig, graph: Graph | None = None) -> Tensor:
    """Masked-prediction cross-entropy plus size/entropy and optional extras.

    ``edge_probs`` holds one value per undirected edge; the size term sums
    them and the entropy term averages their element-wise binary entropy.
    """
    target = np.asarray(p_original, dtype=np.float64).reshape(1, -1)
    pm = p_masked if isinstance(p_masked, Tensor) else Tensor(p_masked)
    if pm.data.ndim == 1:
        pm = ad.reshape(pm, (1, len(pm.data)))
    e = edge_probs if isinstance(edge_probs, Tensor) else Tensor(edge_probs)
    loss = -ad.total(Tensor(target) * ad.log(pm))
    if cfg.lambda_size:
        loss = loss + cfg.lambda_size * ad.total(e)
    if cfg.lambda_entropy:
        ent = -(e * ad.log(e) + (1.0 - e) * ad.log(1.0 - e))
        loss = loss + cfg.lambda_entropy * ad.mean(ent)
    if cfg.lambda_budget:
        loss = loss + cfg.lambda_budget * reg_budget(e, cfg.budget)
    if cfg.lambda_connect and graph is not None:
        loss = loss + cfg.lambda_connect * reg_connectivity(e, graph)
    return loss


# ---------------------------------------------------------------------------
# instance preparation (frozen-GNN precomputation)


@dataclass
class InstanceContext:
    """Everything the explainer needs about one instance, precomputed once."""

    instance: int
    graph: Graph  # computation graph (node task) or the instance graph
    center: int | None  # local center node id for node tasks
    z: np.ndarray  # frozen node embeddings
    p_orig: np.ndarray  # original class probabilities
    node_map: np.ndarray | None = None  # local -> parent node ids

    def edge_embed(self, input_width: int) -> np.ndarray:
        """Per-directed-edge MLP input rows [z_src; z_dst(; z_center)]."""
        src, dst = self.graph.edges[:, 0], self.graph.edges[:, 1]
        cols = [self.z[src], self.z[dst]]
        if input_width == 3 * self.z.shape[1]:
            if self.center is None:
                raise ValueError("node-task explainer input needs a center node")
            cols.append(np.broadcast_to(self.z[self.center], (len(src), self.z.shape[1])))
        elif input_width != 2 * self.z.shape[1]:
            raise ValueError(
                f"explainer input width {input_width} incompatible with embedding width {self.z.shape[1]}"
            )
        return np.hstack(cols)


def prepare_instance(model: GnnModel, ds: Dataset, instance: int) -> InstanceContext:
    frozen = model.frozen()
    if ds.task == "node":
        cg: ComputationGraph = extract_computation_graph(ds.graphs[0], int(instance), len(model.layers))
        z, probs = forward(frozen, cg.graph)
        return InstanceContext(
            instance=int(instance),
            graph=cg.graph,
            center=cg.center,
            z=z.data,
            p_orig=probs.data[cg.center].copy(),
            node_map=cg.node_map,
        )
    g = ds.graphs[int(instance)]
    z, probs = forward(frozen, g)
    return InstanceContext(
        instance=int(instance), graph=g, center=None, z=z.data, p_orig=probs.data[0].copy()
    )


def prepare_instances(model: GnnModel, ds: Dataset, instances) -> list[InstanceContext]:
    return [prepare_instance(model, ds, i) for i in np.asarray(instances, dtype=np.int64)]


def _mlp_tape(net: ExplainerNet, x: Tensor) -> Tensor:
    return ad.matmul(ad.relu(ad.matmul(x, net.w1) + net.b1), net.w2) + net.b2


def _rep_logits(net: ExplainerNet, ctx: InstanceContext) -> Tensor:
    """Symmetrized latent logits, one row per undirected edge, on the tape."""
    g = ctx.graph
    om_dir = _mlp_tape(net, Tensor(ctx.edge_embed(net.input_width)))
    rep = g.representative_edges()
    return (ad.gather_rows(om_dir, rep) + ad.gather_rows(om_dir, g.reverse_index()[rep])) * 0.5


def _masked_forward(model: GnnModel, ctx: InstanceContext, e_rep: Tensor) -> Tensor:
    g = ctx.graph
    w_dir = ad.reshape(ad.gather_rows(e_rep, g.expand_index()), (g.num_edges,))
    _, probs = forward(model, g, edge_weights=w_dir)
    if ctx.center is not None:
        return ad.gather_rows(probs, np.array([ctx.center]))
    return probs


def _instance_loss(
    net: ExplainerNet,
    frozen: GnnModel,
    ctx: InstanceContext,
    tau: float,
    cfg: ExplainTrainConfig,
    rng: np.random.Generator,
) -> Tensor:
    om_rep = _rep_logits(net, ctx)
    e_rep = sample_concrete(om_rep, tau, rng)
    p_masked = _masked_forward(frozen, ctx, e_rep)
    return explainer_loss(ctx.p_orig, p_masked, e_rep, cfg, graph=ctx.graph)


def train_pgexplainer(
    model: GnnModel,
    ds: Dataset,
    instances,
    cfg: ExplainTrainConfig,
    contexts: list[InstanceContext] | None = None,
) -> tuple[ExplainerNet, list[float]]:
    """Fit the shared explainer MLP over the instance set.

    The GNN stays frozen throughout. Gradients are accumulated over all
    instances and samples, with one Adam step per epoch. Returns the net and
    the per-epoch total loss history. A non-finite loss aborts the run and
    restores the last finite-loss parameters.
    """
    if contexts is None:
        contexts = prepare_instances(model, ds, instances)
    if not contexts:
        raise ValueError("explainer training needs at least one instance")
    frozen = model.frozen()
    width = (3 if ds.task == "node" else 2) * contexts[0].z.shape[1]
    net = new_explainer_net(width, substream(cfg.seed, "explainer-init"))
    params = net.params()
    state = AdamState.for_params(params, lr=cfg.lr)
    rng = substream(cfg.seed, "concrete")
    history: list[float] = []
    snapshot = [p.data.copy() for p in params]
    for epoch in range(cfg.epochs):
        tau = temperature(epoch, cfg)
        ad.zero_grads(params)
        epoch_loss = 0.0
        for ctx in contexts:
            for _ in range(cfg.samples):
                loss = _instance_loss(net, frozen, ctx, tau, cfg, rng)
                ad.backward(loss)
                epoch_loss += loss.item()
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
        try:
            if not np.isfinite(epoch_loss):
                raise FloatingPointError(f"explainer loss became {epoch_loss} at epoch {epoch}")
            adam_step(params, grads, state)
        except FloatingPointError as exc:
            warnings.warn(f"aborting explainer training, restoring last checkpoint: {exc}")
            for p, s in zip(params, snapshot):
                p.data = s
            break
        snapshot = [p.data.copy() for p in params]
        history.append(epoch_loss)
    return net, history


# ---------------------------------------------------------------------------
# inference


def edge_logits(net: ExplainerNet, z: np.ndarray, g: Graph, center: int | None = None) -> np.ndarray:
    """Deterministic symmetrized latent logits per directed edge (no sampling)."""
    z = np.asarray(z, dtype=np.float64)
    ctx = InstanceContext(instance=-1, graph=g, center=center, z=z, p_orig=np.zeros(1))
    x = ctx.edge_embed(net.input_width)
    h = np.maximum(x @ net.w1.data + net.b1.data, 0.0)
    om = (h @ net.w2.data + net.b2.data)[:, 0]
    return symmetrize_scores(g, om)


@dataclass
class Explanation:
    """Deterministic per-edge explanation of one instance."""

    instance: int
    graph: Graph
    node_map: np.ndarray | None
    omega: np.ndarray  # symmetrized latent logits, per directed edge
    prob: np.ndarray  # sigmoid(omega), per directed edge
    topk: list[tuple[int, int]]  # best undirected edges, parent node ids
    inference_ms: float

    def to_dict(self) -> dict:
        edges = self.graph.edges if self.node_map is None else self.node_map[self.graph.edges]
        return {
            "schema_version": 1,
            "instance": self.instance,
            "edges": np.asarray(edges).tolist(),
            "omega": self.omega.tolist(),
            "prob": self.prob.tolist(),
            "topk": [list(e) for e in self.topk],
        }


def explain(net: ExplainerNet, model: GnnModel, ds: Dataset, instance: int, topk: int = 6) -> Explanation:
    """Score one (possibly unseen) instance with the trained explainer."""
    t0 = time.perf_counter()
    ctx = prepare_instance(model, ds, instance)
    om = edge_logits(net, ctx.z, ctx.graph, ctx.center)
    prob = 1.0 / (1.0 + np.exp(-om))
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    rep = ctx.graph.representative_edges()
    slots = topk_rep_edges(ctx.graph, prob, min(topk, len(rep)))
    pairs = ctx.graph.edges[rep[slots]]
    if ctx.node_map is not None:
        pairs = ctx.node_map[pairs]
    return Explanation(
        instance=int(instance),
        graph=ctx.graph,
        node_map=ctx.node_map,
        omega=om,
        prob=prob,
        topk=[(int(i), int(j)) for i, j in pairs],
        inference_ms=elapsed_ms,
    )


# ---------------------------------------------------------------------------
# baselines


# direct per-edge logits need a larger step than the shared MLP; calibrated
# so the baseline tracks its reference behavior across the benchmarks
INSTANCE_MASK_LR = 0.03


def instance_mask_scores(
    model: GnnModel,
    ctx: InstanceContext,
    epochs: int,
    cfg: ExplainTrainConfig | None = None,
    rng: np.random.Generator | None = None,
    lr: float | None = None,
) -> np.ndarray:
    """Optimize one free logit per undirected edge of a single instance.

    Same sampling, loss and annealing machinery as the shared explainer, but
    the variables are per-edge, so the whole optimization reruns for every
    explained instance. Returns sigmoid(logits) per directed edge.
    """
    cfg = cfg or ExplainTrainConfig()
    rng = rng if rng is not None else substream(cfg.seed, "instance-mask", ctx.instance)
    frozen = model.frozen()
    g = ctx.graph
    n_rep = len(g.representative_edges())
    logits = Tensor(np.zeros((n_rep, 1)), requires_grad=True)
    params = [logits]
    if epochs > 0:
        schedule = replace(cfg, epochs=epochs)
        state = AdamState.for_params(params, lr=lr if lr is not None else INSTANCE_MASK_LR)
        for epoch in range(epochs):
            tau = temperature(epoch, schedule)
            ad.zero_grads(params)
            e_rep = sample_concrete(logits, tau, rng)
            p_masked = _masked_forward(frozen, ctx, e_rep)
            loss = explainer_loss(ctx.p_orig, p_masked, e_rep, cfg, graph=g)
            grads = ad.backward(loss, params)
            adam_step(params, grads, state)
    rep_scores = 1.0 / (1.0 + np.exp(-logits.data[:, 0]))
    return rep_scores[g.expand_index()]


def _self_ce_loss(probs: Tensor, row: int) -> Tensor:
    """Cross-entropy of the model's own argmax prediction at one output row."""
    picked = ad.gather_rows(probs, np.array([row]))
    onehot = np.zeros((1, picked.data.shape[1]))
    onehot[0, int(picked.data.argmax())] = 1.0
    return -ad.total(Tensor(onehot) * ad.log(picked))


def grad_edge_scores(model: GnnModel, g: Graph, center: int | None = None) -> np.ndarray:
    """|d loss / d edge weight| at all-ones weights, symmetrized."""
    frozen = model.frozen()
    w = Tensor(np.ones(g.num_edges), requires_grad=True)
    _, probs = forward(frozen, g, edge_weights=w)
    loss = _self_ce_loss(probs, center if center is not None else 0)
    (gw,) = ad.backward(loss, [w])
    return symmetrize_scores(g, np.abs(gw))


def node_grad_scores(model: GnnModel, g: Graph, center: int | None = None) -> np.ndarray:
    """Edge score = mean of endpoint feature-gradient norms."""
    frozen = model.frozen()
    x = Tensor(g.features, requires_grad=True)
    _, probs = forward(frozen, g, features=x)
    loss = _self_ce_loss(probs, center if center is not None else 0)
    (gx,) = ad.backward(loss, [x])
    importance = np.linalg.norm(gx, axis=1)
    return 0.5 * (importance[g.edges[:, 0]] + importance[g.edges[:, 1]])


# ---------------------------------------------------------------------------
# checkpoints


def explainer_to_dict(net: ExplainerNet, cfg: ExplainTrainConfig | None = None, extra: dict | None = None) -> dict:
    d = {
        "schema_version": 1,
        "input_width": net.input_width,
        "layers": [
            {"w": net.w1.data.tolist(), "b": net.b1.data.tolist()},
            {"w": net.w2.data.tolist(), "b": net.b2.data.tolist()},
        ],
        "config": None if cfg is None else vars(cfg).copy(),
    }
    if extra:
        d.update(extra)
    return d


def explainer_from_dict(d: dict) -> ExplainerNet:
    (l1, l2) = d["layers"]
    w1 = np.asarray(l1["w"], dtype=np.float64)
    w2 = np.asarray(l2["w"], dtype=np.float64)
    if w1.shape[0] != int(d["input_width"]) or w1.shape[1] != w2.shape[0] or w2.shape[1] != 1:
        raise ValueError("explainer checkpoint widths are inconsistent")
    return ExplainerNet(
        input_width=int(d["input_width"]),
        w1=Tensor(w1, requires_grad=True),
        b1=Tensor(np.asarray(l1["b"], dtype=np.float64), requires_grad=True),
        w2=Tensor(w2, requires_grad=True),
        b2=Tensor(np.asarray(l2["b"], dtype=np.float64), requires_grad=True),
    )

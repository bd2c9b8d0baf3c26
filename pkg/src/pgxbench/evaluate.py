"""Quantitative evaluation: edge AUC, timing, inductive sweeps, ablations.

Edges are scored per evaluation instance (computation-graph edges for node
tasks, whole-graph edges for graph tasks), pooled over instances with each
undirected edge counted once, and ranked against the ground-truth motif
flags.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from pgxbench.dataio import split
from pgxbench.explainer import (
    ExplainTrainConfig,
    InstanceContext,
    edge_logits,
    grad_edge_scores,
    instance_mask_scores,
    node_grad_scores,
    prepare_instances,
    train_pgexplainer,
)
from pgxbench.gnn import GnnModel
from pgxbench.graphs import to_dot, topk_connected
from pgxbench.seeding import substream
from pgxbench.synth import Dataset

METHODS = ("pgexplainer", "instance-mask", "grad", "node-grad", "oracle", "anti-oracle")


def auc(scores, labels) -> float:
    """Rank-based AUC with midrank tie handling (Mann-Whitney statistic)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    midranks = starts + (counts + 1) / 2.0
    ranks = midranks[inverse]
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pooled_auc(contexts: list[InstanceContext], scores_per_ctx: list[np.ndarray]) -> float:
    """AUC over all evaluation instances, each undirected edge counted once."""
    pooled_scores, pooled_labels = [], []
    for ctx, s in zip(contexts, scores_per_ctx):
        rep = ctx.graph.representative_edges()
        pooled_scores.append(np.asarray(s)[rep])
        pooled_labels.append(ctx.graph.motif_edge[rep])
    return auc(np.concatenate(pooled_scores), np.concatenate(pooled_labels))


@dataclass
class EvalReport:
    method: str
    dataset: str
    runs: int
    aucs: list[float]
    mean_auc: float
    std_auc: float
    inference_ms: float
    config: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "method": self.method,
            "dataset": self.dataset,
            "runs": self.runs,
            "aucs": self.aucs,
            "mean_auc": self.mean_auc,
            "std_auc": self.std_auc,
            "inference_ms": self.inference_ms,
            "config": self.config,
            "failures": self.failures,
        }


def _score_one_run(
    method: str,
    model: GnnModel,
    ds: Dataset,
    train_ctxs: list[InstanceContext],
    eval_ctxs: list[InstanceContext],
    cfg: ExplainTrainConfig,
    run_seed: int,
    mask_epochs: int,
) -> tuple[float, list[float]]:
    """Train (if the method needs it) and score the evaluation instances.

    Returns the pooled AUC and per-instance scoring times in milliseconds.
    """
    scores: list[np.ndarray] = []
    times: list[float] = []
    net = None
    if method == "pgexplainer":
        net, _ = train_pgexplainer(model, ds, None, replace(cfg, seed=run_seed), contexts=train_ctxs)
    for ctx in eval_ctxs:
        t0 = time.perf_counter()
        if method == "pgexplainer":
            om = edge_logits(net, ctx.z, ctx.graph, ctx.center)
            s = 1.0 / (1.0 + np.exp(-om))
        elif method == "instance-mask":
            rng = substream(run_seed, "instance-mask", ctx.instance)
            s = instance_mask_scores(model, ctx, mask_epochs, cfg, rng)
        elif method == "grad":
            s = grad_edge_scores(model, ctx.graph, ctx.center)
        elif method == "node-grad":
            s = node_grad_scores(model, ctx.graph, ctx.center)
        elif method == "oracle":
            s = ctx.graph.motif_edge.astype(np.float64)
        elif method == "anti-oracle":
            s = 1.0 - ctx.graph.motif_edge.astype(np.float64)
        else:
            raise ValueError(f"unknown method {method!r}; known: {', '.join(METHODS)}")
        times.append((time.perf_counter() - t0) * 1000.0)
        scores.append(s)
    return pooled_auc(eval_ctxs, scores), times


def evaluate_method(
    method: str,
    ds: Dataset,
    model: GnnModel,
    runs: int = 10,
    cfg: ExplainTrainConfig | None = None,
    seed: int = 0,
    mask_epochs: int = 100,
    jobs: int = 1,
    train_ctxs: list[InstanceContext] | None = None,
    eval_ctxs: list[InstanceContext] | None = None,
) -> EvalReport:
    """Repeat (train +) score with fresh seeds; aggregate mean and std AUC.

    Per-run failures propagate into the report; fewer than 80% successful
    runs raise. Instance contexts may be passed in to share the frozen-GNN
    precomputation across methods.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; known: {', '.join(METHODS)}")
    cfg = cfg or ExplainTrainConfig()
    tr_ids, _va_ids, te_ids = split(ds, seed=seed)
    if train_ctxs is None and method == "pgexplainer":
        train_ctxs = prepare_instances(model, ds, tr_ids)
    if eval_ctxs is None:
        eval_ctxs = prepare_instances(model, ds, te_ids)
    run_seeds = [int(substream(seed, "eval-run", r).integers(2**31 - 1)) for r in range(runs)]
    aucs: list[float] = []
    failures: list[str] = []
    inference_ms = float("nan")
    results: list[tuple[float, list[float]] | Exception] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(
                    _score_one_run, method, model, ds, train_ctxs or [], eval_ctxs, cfg, rs, mask_epochs
                )
                for rs in run_seeds
            ]
            for fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - per-run isolation
                    results.append(exc)
    else:
        for rs in run_seeds:
            try:
                results.append(
                    _score_one_run(method, model, ds, train_ctxs or [], eval_ctxs, cfg, rs, mask_epochs)
                )
            except Exception as exc:  # noqa: BLE001 - per-run isolation
                results.append(exc)
    for r, res in enumerate(results):
        if isinstance(res, Exception):
            failures.append(f"run {r}: {type(res).__name__}: {res}")
            continue
        run_auc, times = res
        aucs.append(run_auc)
        if np.isnan(inference_ms):
            inference_ms = float(np.median(times))
    required = int(np.ceil(0.8 * runs))
    if len(aucs) < required:
        raise RuntimeError(
            f"{method} on {ds.name}: only {len(aucs)}/{runs} runs succeeded "
            f"(needed {required}); failures: {failures}"
        )
    return EvalReport(
        method=method,
        dataset=ds.name,
        runs=runs,
        aucs=aucs,
        mean_auc=float(np.mean(aucs)),
        std_auc=float(np.std(aucs)),
        inference_ms=inference_ms,
        config={**vars(cfg), "seed": seed, "mask_epochs": mask_epochs},
        failures=failures,
    )


# ---------------------------------------------------------------------------
# timing


@dataclass
class TimingReport:
    ms_per_instance_a: float
    ms_per_instance_b: float
    speedup: float  # b / a

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "ms_per_instance_a": self.ms_per_instance_a,
            "ms_per_instance_b": self.ms_per_instance_b,
            "speedup": self.speedup,
        }


def _median_ms(fn, instances, min_reps: int) -> float:
    fn(instances[0])  # warmup
    samples: list[float] = []
    while len(samples) < min_reps:
        for inst in instances:
            t0 = time.perf_counter()
            fn(inst)
            samples.append((time.perf_counter() - t0) * 1000.0)
    return float(np.median(samples))


def timing(method_a, method_b, instances, min_reps: int = 20) -> TimingReport:
    """Median per-instance wall time of two scoring callables; speedup = B/A."""
    if not len(instances):
        raise ValueError("timing needs at least one instance")
    ms_a = _median_ms(method_a, instances, min_reps)
    ms_b = _median_ms(method_b, instances, min_reps)
    return TimingReport(ms_per_instance_a=ms_a, ms_per_instance_b=ms_b, speedup=ms_b / ms_a)


# ---------------------------------------------------------------------------
# inductive sweep


@dataclass
class InductivePoint:
    alpha: int
    aucs: list[float]
    mean_auc: float
    std_auc: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "aucs": self.aucs, "mean_auc": self.mean_auc, "std_auc": self.std_auc}


def inductive_sweep(
    model: GnnModel,
    ds: Dataset,
    alphas=(1, 2, 3, 4, 5, 30),
    seeds: int = 5,
    cfg: ExplainTrainConfig | None = None,
    seed: int = 0,
    contexts: dict[int, InstanceContext] | None = None,
) -> list[InductivePoint]:
    """Train on alpha instances, validate on half the rest, test on the remainder."""
    cfg = cfg or ExplainTrainConfig()
    instances = ds.instances
    if len(instances) < 60:
        raise ValueError("inductive sweep needs at least 60 explainable instances")
    if max(alphas) > len(instances):
        raise ValueError(f"alpha {max(alphas)} exceeds {len(instances)} available instances")
    if contexts is None:
        ctx_list = prepare_instances(model, ds, instances)
        contexts = {c.instance: c for c in ctx_list}
    points = []
    for alpha in alphas:
        aucs = []
        for s in range(seeds):
            shuffle_rng = substream(seed, "inductive", alpha, s)
            perm = shuffle_rng.permutation(instances)
            train_ids = perm[:alpha]
            n_val = (len(instances) - alpha) // 2
            test_ids = perm[alpha + n_val :]
            run_seed = int(substream(seed, "inductive-run", alpha, s).integers(2**31 - 1))
            net, _ = train_pgexplainer(
                model, ds, None, replace(cfg, seed=run_seed),
                contexts=[contexts[int(i)] for i in train_ids],
            )
            eval_ctxs = [contexts[int(i)] for i in test_ids]
            scores = []
            for ctx in eval_ctxs:
                om = edge_logits(net, ctx.z, ctx.graph, ctx.center)
                scores.append(1.0 / (1.0 + np.exp(-om)))
            aucs.append(pooled_auc(eval_ctxs, scores))
        points.append(
            InductivePoint(alpha=int(alpha), aucs=aucs, mean_auc=float(np.mean(aucs)), std_auc=float(np.std(aucs)))
        )
    return points


# ---------------------------------------------------------------------------
# regularizer studies


def reg_ablation(
    model: GnnModel,
    ds: Dataset,
    size_grid,
    entropy_grid,
    cfg: ExplainTrainConfig | None = None,
    seed: int = 0,
    runs: int = 1,
) -> dict:
    """Mean AUC per (size, entropy) coefficient cell."""
    if not len(size_grid) or not len(entropy_grid):
        raise ValueError("coefficient grids must be non-empty")
    cfg = cfg or ExplainTrainConfig()
    tr_ids, _va, te_ids = split(ds, seed=seed)
    train_ctxs = prepare_instances(model, ds, tr_ids)
    eval_ctxs = prepare_instances(model, ds, te_ids)
    matrix = []
    failures = []
    for ls in size_grid:
        row = []
        for le in entropy_grid:
            cell_cfg = replace(cfg, lambda_size=float(ls), lambda_entropy=float(le))
            try:
                report = evaluate_method(
                    "pgexplainer", ds, model, runs=runs, cfg=cell_cfg, seed=seed,
                    train_ctxs=train_ctxs, eval_ctxs=eval_ctxs,
                )
                row.append(report.mean_auc)
            except Exception as exc:  # noqa: BLE001 - per-cell isolation
                failures.append(f"size={ls} entropy={le}: {exc}")
                row.append(float("nan"))
        matrix.append(row)
    return {
        "schema_version": 1,
        "size_grid": [float(x) for x in size_grid],
        "entropy_grid": [float(x) for x in entropy_grid],
        "mean_auc": matrix,
        "failures": failures,
    }


def connectivity_demo(
    model: GnnModel,
    noisy_ds: Dataset,
    lambdas=(0.0, 5.0, 10.0),
    seeds: int = 5,
    cfg: ExplainTrainConfig | None = None,
    seed: int = 0,
    topk: int = 6,
    out_dir=None,
) -> list[dict]:
    """Train with varying connectivity coefficients; export top-k explanations.

    For each coefficient and seed, reports whether the demo instance's top-k
    undirected edges form a connected subgraph, and writes one DOT file per
    coefficient when ``out_dir`` is given.
    """
    cfg = cfg or ExplainTrainConfig()
    tr_ids, _va, te_ids = split(noisy_ds, seed=seed)
    train_ctxs = prepare_instances(model, noisy_ds, tr_ids)
    demo_ctx = prepare_instances(model, noisy_ds, te_ids[:1])[0]
    records = []
    for lam in lambdas:
        for s in range(seeds):
            run_seed = int(substream(seed, "connectivity", lam, s).integers(2**31 - 1))
            net, _ = train_pgexplainer(
                model, noisy_ds, None,
                replace(cfg, lambda_connect=float(lam), seed=run_seed),
                contexts=train_ctxs,
            )
            om = edge_logits(net, demo_ctx.z, demo_ctx.graph, demo_ctx.center)
            probs = 1.0 / (1.0 + np.exp(-om))
            connected = topk_connected(demo_ctx.graph, probs, topk)
            record = {
                "lambda_connect": float(lam),
                "seed": s,
                "instance": demo_ctx.instance,
                "topk": topk,
                "connected": bool(connected),
            }
            if out_dir is not None and s == 0:
                from pathlib import Path

                path = Path(out_dir) / f"connectivity-lambda{lam:g}.dot"
                path.write_text(to_dot(demo_ctx.graph, probs, topk))
                record["dot_path"] = str(path)
            records.append(record)
    return records


# ---------------------------------------------------------------------------
# report rendering


def format_table(reports: list[EvalReport]) -> str:
    """Aligned text table: one explanation-AUC row per method, one column per dataset."""
    datasets = list(dict.fromkeys(r.dataset for r in reports))
    methods = list(dict.fromkeys(r.method for r in reports))
    by_key = {(r.method, r.dataset): r for r in reports}
    name_w = max(len(m) for m in methods + ["Explanation AUC"]) + 2
    col_w = max(max(len(d) for d in datasets) + 2, 16)
    lines = ["Explanation AUC".ljust(name_w) + "".join(d.rjust(col_w) for d in datasets)]
    for m in methods:
        cells = []
        for d in datasets:
            r = by_key.get((m, d))
            cells.append("-" if r is None else f"{r.mean_auc:.3f}±{r.std_auc:.3f}")
        lines.append(m.ljust(name_w) + "".join(c.rjust(col_w) for c in cells))
    lines.append("")
    lines.append("Inference time (ms)".ljust(name_w) + "".join(d.rjust(col_w) for d in datasets))
    for m in methods:
        cells = []
        for d in datasets:
            r = by_key.get((m, d))
            cells.append("-" if r is None else f"{r.inference_ms:.2f}")
        lines.append(m.ljust(name_w) + "".join(c.rjust(col_w) for c in cells))
    return "\n".join(lines) + "\n"

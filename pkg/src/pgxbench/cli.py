"""Command-line entry point for reproducible generate/train/explain/eval runs.

Every command takes one ``--seed`` that feeds labeled substreams, writes its
artifacts under ``--out``, and embeds {seed, config_hash} in each artifact so
replays are byte-comparable. Exit codes: 0 ok, 1 run failure, 2 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from pgxbench import dataio, evaluate, explainer, gnn, graphs, synth


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(canon).hexdigest()[:16]


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True) + "\n")


def _echo_config(out: Path, command: str, config: dict) -> dict:
    stamp = {"command": command, "config": config, "config_hash": _config_hash(config)}
    _write_json(out / f"{command}-config.json", stamp)
    return stamp


def _load_pair(args) -> tuple[synth.Dataset, gnn.GnnModel]:
    ds = dataio.load_dataset(args.dataset)
    model = gnn.load_model(args.model)
    return ds, model


def cmd_gen(args) -> int:
    out = Path(args.out)
    config = {"name": args.name, "seed": args.seed}
    stamp = _echo_config(out, "gen", config)
    ds = synth.gen_dataset(args.name, args.seed)
    ds.recipe["config_hash"] = stamp["config_hash"]
    dataio.save_dataset(ds, out / f"{args.name}.json")
    print(f"wrote {out / (args.name + '.json')} ({sum(g.num_nodes for g in ds.graphs)} nodes)")
    return 0


def cmd_ingest(args) -> int:
    out = Path(args.out)
    config = {"dir": str(args.dir), "name": args.name, "seed": args.seed}
    stamp = _echo_config(out, "ingest", config)
    ds = dataio.parse_tu(args.dir, name=args.name)
    ds.recipe["config_hash"] = stamp["config_hash"]
    ds.recipe["seed"] = args.seed
    dataio.save_dataset(ds, out / f"{args.name}.json")
    print(
        f"ingested {len(ds.graphs)} graphs, "
        f"{sum(g.num_nodes for g in ds.graphs)} nodes, "
        f"{sum(g.num_edges for g in ds.graphs)} directed edges"
    )
    return 0


def cmd_train_gnn(args) -> int:
    out = Path(args.out)
    ds = dataio.load_dataset(args.dataset)
    cfg = gnn.recommended_config(ds.name, seed=args.seed)
    if args.epochs:
        cfg.epochs = args.epochs
    if args.lr:
        cfg.lr = args.lr
    config = {"dataset": str(args.dataset), "seed": args.seed, "epochs": cfg.epochs, "lr": cfg.lr}
    stamp = _echo_config(out, "train-gnn", config)
    model, report = gnn.train(ds, cfg)
    gnn.save_model(model, out / "model.json", extra={"config_hash": stamp["config_hash"]})
    _write_json(
        out / "train-report.json",
        {
            "seed": args.seed,
            "config_hash": stamp["config_hash"],
            "train_acc": report.train_acc,
            "val_acc": report.val_acc,
            "test_acc": report.test_acc,
            "final_loss": report.final_loss,
            "seconds": report.seconds,
            "epochs": report.epochs,
        },
    )
    print(
        f"{ds.name}: train {report.train_acc:.3f}  val {report.val_acc:.3f}  "
        f"test {report.test_acc:.3f}  ({report.seconds:.0f}s)"
    )
    return 0


def _explainer_cfg(args) -> explainer.ExplainTrainConfig:
    cfg = explainer.ExplainTrainConfig(seed=args.seed)
    for attr in ("epochs", "lr", "samples", "lambda_size", "lambda_entropy",
                 "lambda_budget", "budget", "lambda_connect"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


def cmd_train_explainer(args) -> int:
    out = Path(args.out)
    ds, model = _load_pair(args)
    cfg = _explainer_cfg(args)
    config = {"dataset": str(args.dataset), "model": str(args.model), "seed": args.seed, **vars(cfg)}
    stamp = _echo_config(out, "train-explainer", config)
    train_ids, _val_ids, _test_ids = dataio.split(ds, seed=args.seed)
    net, losses = explainer.train_pgexplainer(model, ds, train_ids, cfg)
    _write_json(
        out / "explainer.json",
        explainer.explainer_to_dict(
            net, cfg, extra={"seed": args.seed, "config_hash": stamp["config_hash"], "loss_history": losses}
        ),
    )
    print(f"trained explainer on {len(train_ids)} instances; loss {losses[0]:.2f} -> {losses[-1]:.2f}")
    return 0


def cmd_explain(args) -> int:
    out = Path(args.out)
    ds, model = _load_pair(args)
    net = explainer.explainer_from_dict(json.loads(Path(args.explainer).read_text()))
    config = {
        "dataset": str(args.dataset), "model": str(args.model), "explainer": str(args.explainer),
        "instance": args.instance, "topk": args.topk, "seed": args.seed,
    }
    stamp = _echo_config(out, "explain", config)
    result = explainer.explain(net, model, ds, args.instance, topk=args.topk)
    payload = result.to_dict()
    payload.update({"seed": args.seed, "config_hash": stamp["config_hash"]})
    _write_json(out / f"explanation-{args.instance}.json", payload)
    dot = graphs.to_dot(result.graph, result.prob, args.topk)
    (out / f"explanation-{args.instance}.dot").write_text(dot)
    print(f"instance {args.instance}: top-{args.topk} edges {result.topk} ({result.inference_ms:.2f} ms)")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    ds, model = _load_pair(args)
    cfg = _explainer_cfg(args)
    config = {
        "dataset": str(args.dataset), "model": str(args.model), "method": args.method,
        "runs": args.runs, "seed": args.seed, "mask_epochs": args.mask_epochs, "jobs": args.jobs,
    }
    stamp = _echo_config(out, "eval", config)
    report = evaluate.evaluate_method(
        args.method, ds, model, runs=args.runs, cfg=cfg, seed=args.seed,
        mask_epochs=args.mask_epochs, jobs=args.jobs,
    )
    payload = report.to_dict()
    payload.update({"seed": args.seed, "config_hash": stamp["config_hash"]})
    _write_json(out / f"eval-{args.method}.json", payload)
    text = evaluate.format_table([report])
    (out / f"eval-{args.method}.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_inductive(args) -> int:
    out = Path(args.out)
    ds, model = _load_pair(args)
    alphas = [int(a) for a in args.alphas.split(",")]
    config = {
        "dataset": str(args.dataset), "model": str(args.model),
        "alphas": alphas, "seeds": args.seeds, "seed": args.seed,
    }
    stamp = _echo_config(out, "inductive", config)
    points = evaluate.inductive_sweep(model, ds, alphas=alphas, seeds=args.seeds, seed=args.seed)
    _write_json(
        out / "inductive.json",
        {
            "seed": args.seed, "config_hash": stamp["config_hash"],
            "points": [p.to_dict() for p in points],
        },
    )
    for p in points:
        print(f"alpha={p.alpha:>3}  mean AUC {p.mean_auc:.3f} ± {p.std_auc:.3f}")
    return 0


def cmd_ablate(args) -> int:
    out = Path(args.out)
    ds, model = _load_pair(args)
    if args.connectivity_lambdas:
        lambdas = [float(x) for x in args.connectivity_lambdas.split(",")]
        config = {
            "dataset": str(args.dataset), "model": str(args.model),
            "connectivity_lambdas": lambdas, "seeds": args.seeds, "seed": args.seed,
        }
        stamp = _echo_config(out, "ablate", config)
        records = evaluate.connectivity_demo(
            model, ds, lambdas=lambdas, seeds=args.seeds, seed=args.seed, out_dir=out
        )
        _write_json(out / "connectivity.json",
                    {"seed": args.seed, "config_hash": stamp["config_hash"], "records": records})
        for r in records:
            print(f"lambda={r['lambda_connect']:g} seed={r['seed']}: connected={r['connected']}")
        return 0
    size_grid = [float(x) for x in args.size_grid.split(",")]
    entropy_grid = [float(x) for x in args.entropy_grid.split(",")]
    config = {
        "dataset": str(args.dataset), "model": str(args.model),
        "size_grid": size_grid, "entropy_grid": entropy_grid, "seed": args.seed, "runs": args.runs,
    }
    stamp = _echo_config(out, "ablate", config)
    result = evaluate.reg_ablation(model, ds, size_grid, entropy_grid, seed=args.seed, runs=args.runs)
    result.update({"seed": args.seed, "config_hash": stamp["config_hash"]})
    _write_json(out / "ablation.json", result)
    for i, ls in enumerate(size_grid):
        row = "  ".join(f"{result['mean_auc'][i][j]:.3f}" for j in range(len(entropy_grid)))
        print(f"size={ls:<6g} {row}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgxbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False, explainer_cfg=False):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("runs"))
        if model:
            p.add_argument("--dataset", type=Path, required=True)
            p.add_argument("--model", type=Path, required=True)
        if explainer_cfg:
            p.add_argument("--epochs", type=int, default=None)
            p.add_argument("--lr", type=float, default=None)
            p.add_argument("--samples", type=int, default=None)
            p.add_argument("--lambda-size", dest="lambda_size", type=float, default=None)
            p.add_argument("--lambda-entropy", dest="lambda_entropy", type=float, default=None)
            p.add_argument("--lambda-budget", dest="lambda_budget", type=float, default=None)
            p.add_argument("--budget", type=float, default=None)
            p.add_argument("--lambda-connect", dest="lambda_connect", type=float, default=None)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--name", required=True, choices=synth.DATASET_NAMES)
    common(p)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("ingest", help="ingest a TU-format dataset directory")
    p.add_argument("--dir", type=Path, required=True)
    p.add_argument("--name", default="tu")
    common(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train-gnn", help="train the GNN under explanation")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_train_gnn)

    p = sub.add_parser("train-explainer", help="train the parameterized explainer")
    common(p, model=True, explainer_cfg=True)
    p.set_defaults(fn=cmd_train_explainer)

    p = sub.add_parser("explain", help="explain one instance with a trained explainer")
    p.add_argument("--explainer", type=Path, required=True)
    p.add_argument("--instance", type=int, required=True)
    p.add_argument("--topk", type=int, default=6)
    common(p, model=True)
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("eval", help="repeated-run AUC evaluation of a method")
    p.add_argument("--method", required=True, choices=evaluate.METHODS)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--mask-epochs", dest="mask_epochs", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    common(p, model=True, explainer_cfg=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("inductive", help="explainer AUC vs number of training instances")
    p.add_argument("--alphas", default="1,2,3,4,5,30")
    p.add_argument("--seeds", type=int, default=5)
    common(p, model=True)
    p.set_defaults(fn=cmd_inductive)

    p = sub.add_parser("ablate", help="regularizer grids / connectivity demo")
    p.add_argument("--size-grid", dest="size_grid", default="0,0.05")
    p.add_argument("--entropy-grid", dest="entropy_grid", default="0,1.0")
    p.add_argument("--connectivity-lambdas", dest="connectivity_lambdas", default=None)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--runs", type=int, default=1)
    common(p, model=True)
    p.set_defaults(fn=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

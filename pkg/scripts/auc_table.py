#!/usr/bin/env python3
"""Explanation-AUC table over the synthetic benchmarks.

Loads datasets and models written by train_gnns.py, evaluates the chosen
methods with repeated runs, and prints the aligned table plus a JSON dump.
"""

import argparse
import json
import sys
from pathlib import Path

from pgxbench.dataio import load_dataset, split
from pgxbench.evaluate import evaluate_method, format_table
from pgxbench.explainer import prepare_instances, recommended_explainer_config
from pgxbench.gnn import load_model
from pgxbench.synth import DATASET_NAMES


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs-dir", type=Path, default=Path("runs"))
    ap.add_argument("--names", nargs="*", default=[n for n in DATASET_NAMES if n != "ba-shapes-noisy"])
    ap.add_argument("--methods", nargs="*", default=["pgexplainer", "instance-mask", "grad", "node-grad"])
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--baseline-runs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    reports = []
    for name in args.names:
        ds = load_dataset(args.runs_dir / f"{name}.json")
        model = load_model(args.runs_dir / f"{name}-model.json")
        tr_ids, _va, te_ids = split(ds, seed=args.seed)
        train_ctxs = prepare_instances(model, ds, tr_ids)
        eval_ctxs = prepare_instances(model, ds, te_ids)
        for method in args.methods:
            runs = args.runs if method == "pgexplainer" else args.baseline_runs
            report = evaluate_method(
                method, ds, model, runs=runs, seed=args.seed,
                cfg=recommended_explainer_config(name, seed=args.seed),
                train_ctxs=train_ctxs, eval_ctxs=eval_ctxs,
            )
            reports.append(report)
            print(f"{name} / {method}: {report.mean_auc:.3f} ± {report.std_auc:.3f}")
    print()
    print(format_table(reports))
    out = args.runs_dir / "auc-table.json"
    out.write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

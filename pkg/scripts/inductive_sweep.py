#!/usr/bin/env python3
"""AUC as a function of the number of explainer training instances."""

import argparse
import json
import sys
from pathlib import Path

from pgxbench.dataio import load_dataset
from pgxbench.evaluate import inductive_sweep
from pgxbench.explainer import recommended_explainer_config
from pgxbench.gnn import load_model


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs-dir", type=Path, default=Path("runs"))
    ap.add_argument("--names", nargs="*", default=["ba-shapes", "tree-cycles"])
    ap.add_argument("--alphas", default="1,2,3,4,5,30")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    alphas = [int(a) for a in args.alphas.split(",")]
    results = {}
    for name in args.names:
        ds = load_dataset(args.runs_dir / f"{name}.json")
        model = load_model(args.runs_dir / f"{name}-model.json")
        points = inductive_sweep(
            model, ds, alphas=alphas, seeds=args.seeds,
            cfg=recommended_explainer_config(name, seed=args.seed), seed=args.seed,
        )
        results[name] = [p.to_dict() for p in points]
        for p in points:
            print(f"{name} alpha={p.alpha:>3}: {p.mean_auc:.3f} ± {p.std_auc:.3f}")
    out = args.runs_dir / "inductive.json"
    out.write_text(json.dumps(results, indent=2) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Remote codeword classification from two-site LoS CSI at M=64 (slow)."""

import argparse
from dataclasses import replace
from pathlib import Path

from remote_csi.config import ExperimentConfig, load_config
from remote_csi.experiments import generate_dataset
from remote_csi.io import write_csv, write_summary
from remote_csi.mlp import train_and_eval


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/classification")
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--m", type=int, default=64)
    args = ap.parse_args()
    cfg: ExperimentConfig = load_config(args.config).with_(channel="los", head="classification",
                                                           mode="two-site")
    data = generate_dataset(cfg, args.size, args.m, seed=[cfg.master_seed, args.m])
    res = train_and_eval(data, replace(cfg.train, num_runs=1))
    out = Path(args.out)
    cols = ("run", "accuracy", "median_error", "mean_error")
    write_csv(out / "metrics.csv", cols, [dict(run=i, **r) for i, r in enumerate(res["runs"])])
    write_summary(out / "summary.json", cfg.to_flat(), metrics={k: v for k, v in res.items() if k != "runs"})
    print(f"accuracy {res['accuracy'][0]:.4f} (random {1 / args.m:.4f})  median e {res['median_error'][0]:.4f}")


if __name__ == "__main__":
    main()

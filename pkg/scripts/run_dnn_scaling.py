"""Test MSE of the regression MLP against array size, one vs two local sites (slow)."""

import argparse
from dataclasses import replace
import logging

from remote_csi.config import load_config
from remote_csi.experiments import run_dnn_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/dnn_scaling")
    ap.add_argument("--runs", type=int, default=3)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = load_config(args.config)
    cfg = cfg.with_(m_list=(8, 16, 32, 64, 128), train=replace(cfg.train, num_runs=args.runs))
    res = run_dnn_scaling(cfg, args.out)
    for r in res["rows"]:
        print(f"M={r['M']:4d} sites={r['num_sites']}  mse={r['mean_test_mse']:.4f} +- {r['std_test_mse']:.4f}")


if __name__ == "__main__":
    main()

"""Terminal-averaged remote-AoA bounds (one and two local sites) against array size."""

import argparse

from remote_csi.config import load_config
from remote_csi.experiments import run_crlb_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/crlb_scaling")
    ap.add_argument("--terminals", type=int, default=1000)
    args = ap.parse_args()
    cfg = load_config(args.config).with_(num_terminals=args.terminals, m_list=(16, 32, 64, 128, 256, 512))
    res = run_crlb_scaling(cfg, args.out)
    for row in res["rows"]:
        print(f"M={row['M']:4d}  CRB1={row['crb1_mean']:.3e}  CRB2={row['crb2_mean']:.3e}")
    print("slopes:", {k: round(v, 4) for k, v in res["slopes"].items()})


if __name__ == "__main__":
    main()

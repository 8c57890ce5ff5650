"""ML LoS bearing estimates against their bounds at 20 dB (one and two local sites)."""

import argparse

from remote_csi.config import load_config
from remote_csi.experiments import run_estimator_efficiency


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/estimator")
    ap.add_argument("--trials", type=int, default=1000)
    args = ap.parse_args()
    base = load_config(args.config)
    if not base.terminal:
        base = base.with_(terminal=((30.0, 90.0),))
    for mode in ("one-site", "two-site"):
        cfg = base.with_(mode=mode, snr_db=20.0, trials=args.trials, m_list=(16, 32, 64))
        res = run_estimator_efficiency(cfg, f"{args.out}/{mode}")
        print(mode)
        for r in res["rows"]:
            print(f"  M={r['M']:3d}  MSE/CRB theta_lc={r['mse_theta_lc'] / r['crb_theta_lc']:.3f}"
                  f"  theta_rm={r['mse_theta_rm'] / r['crb_theta_rm']:.3f}")
        print("  slopes:", {k: round(v, 3) for k, v in res["slopes"].items()})


if __name__ == "__main__":
    main()

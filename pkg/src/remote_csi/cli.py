"""Command-line entry point: ``remote-csi <command> [--config PATH] [--seed N] [--out DIR] ...``.

Every command writes CSV tables and one ``summary.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelSnapshot, RingModel, covariance_analytic, covariance_sampled, farfield_batch
from .config import ExperimentConfig, load_config
from .crlb import crlb_los_closed_form, crlb_remote_one_site, crlb_remote_two_site, fit_power_law
from .experiments import (
    generate_dataset,
    layout_for,
    run_crlb_scaling,
    run_dnn_scaling,
    run_estimator_efficiency,
    scenario_terminal,
    tx_power_for,
)
from .features import FeatureSpec
from .geometry import UlaConfig
from .io import (
    CRLB_COLUMNS,
    crlb_rows,
    read_dataset,
    write_covariance,
    write_csv,
    write_dataset,
    write_snapshots,
    write_summary,
)
from .mlp import MlpModel, evaluate, train_and_eval

log = logging.getLogger("remote_csi")

REGRESSION_METRICS = ("mse",)
CLASSIFICATION_METRICS = ("accuracy", "median_error", "mean_error")


def _metric_columns(head: str) -> tuple[str, ...]:
    return REGRESSION_METRICS if head == "regression" else CLASSIFICATION_METRICS


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
        changes["train"] = dataclasses.replace(cfg.train, master_seed=args.seed)
    for name in ("mode", "head", "out"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    return cfg.with_(**changes)


def _m(args, cfg: ExperimentConfig) -> int:
    return args.m if args.m is not None else cfg.m_list[0]


def _site_model(cfg: ExperimentConfig, site, terminal) -> RingModel:
    if cfg.channel == "los":
        return RingModel.los(site, terminal)
    return RingModel.from_geometry(site, terminal, cfg.ring_radius, cfg.num_scatterers)


def _array(cfg: ExperimentConfig, m: int, origin) -> UlaConfig:
    return UlaConfig(m, cfg.wavelength / 2, cfg.wavelength, origin=origin)


def cmd_snapshot(args, cfg: ExperimentConfig) -> dict:
    m, term = _m(args, cfg), scenario_terminal(cfg)
    p_tx = tx_power_for(cfg)
    snaps = []
    for s, site in enumerate(cfg.local_sites[:cfg.num_sites]):
        y, clean = farfield_batch(_site_model(cfg, site, term), _array(cfg, m, site), p_tx, 1.0,
                                  cfg.num_samples, seed=[cfg.master_seed, s], force=True)
        snaps += [ChannelSnapshot(f"lc{s}", y[k], clean[k], k) for k in range(len(y))]
    write_snapshots(Path(cfg.out) / "snapshots.csv", snaps)
    return dict(M=m, terminal=term, num_snapshots=len(snaps))


def cmd_covariance(args, cfg: ExperimentConfig) -> dict:
    m, term = _m(args, cfg), scenario_terminal(cfg)
    site = cfg.local_sites[0]
    model, arr = _site_model(cfg, site, term), _array(cfg, m, site)
    p_tx = tx_power_for(cfg)
    analytic = covariance_analytic(model, arr, p_tx, 1.0)
    y, _ = farfield_batch(model, arr, p_tx, 1.0, cfg.num_samples, seed=[cfg.master_seed, 0], force=True)
    sampled = covariance_sampled(y)
    out = Path(cfg.out)
    write_covariance(out / "covariance.csv", analytic)
    write_covariance(out / "covariance_sampled.csv", sampled)
    rel = np.linalg.norm(sampled.matrix - analytic.matrix) / np.linalg.norm(analytic.matrix)
    return dict(M=m, terminal=term, frobenius_relative_error=float(rel))


def cmd_crlb(args, cfg: ExperimentConfig) -> dict:
    layout = layout_for(cfg, scenario_terminal(cfg))
    th_lc, d_lc = layout.local(0)
    k, snr = cfg.num_samples, cfg.snr
    rows, remote = [], []
    for m in sorted(cfg.m_list):
        local = crlb_los_closed_form(d_lc, th_lc, m, k, snr=snr)
        rows += crlb_rows(local)
        if cfg.num_sites == 1:
            rep = crlb_remote_one_site(layout, m, k, snr)
        else:
            rep = crlb_remote_two_site(layout, m, k, snr)
        rows += crlb_rows(rep)
        remote.append((m, rep["theta_rm"]))
    write_csv(Path(cfg.out) / "crlb.csv", CRLB_COLUMNS, rows)
    slopes = {"theta_rm": fit_power_law(remote)[0]} if len(remote) >= 2 else {}
    return dict(terminal=layout.terminal, slopes=slopes)


def cmd_scaling(args, cfg: ExperimentConfig) -> dict | None:
    runner = dict(crlb=run_crlb_scaling, dnn=run_dnn_scaling, estimator=run_estimator_efficiency)[args.kind]
    runner(cfg, cfg.out)
    return None  # the runners write their own summary


def cmd_dataset(args, cfg: ExperimentConfig) -> dict:
    m = _m(args, cfg)
    size = args.size or cfg.dataset_size
    data = generate_dataset(cfg, size, m, seed=cfg.master_seed)
    write_dataset(Path(cfg.out) / "dataset.csv", data)
    return dict(M=m, size=size, num_sites=cfg.num_sites, head=cfg.head)


def _load_or_generate(args, cfg: ExperimentConfig):
    m = _m(args, cfg)
    if args.data:
        return read_dataset(args.data, cfg.head, m)
    return generate_dataset(cfg, args.size or cfg.dataset_size, m, seed=cfg.master_seed)


def cmd_train(args, cfg: ExperimentConfig) -> dict:
    data = _load_or_generate(args, cfg)
    summary, models = train_and_eval(data, cfg.train, return_models=True)
    cols = _metric_columns(cfg.head)
    out = Path(cfg.out)
    write_csv(out / "metrics.csv", ("run",) + cols,
              [dict(run=i, **r) for i, r in enumerate(summary["runs"])])
    model, spec = models[0]
    (out / "model.json").write_text(model.to_json(dict(feature_spec=spec.to_dict(), head=cfg.head,
                                                       config=_flat_for_json(cfg))))
    return {k: v for k, v in summary.items() if k != "runs"}


def cmd_eval(args, cfg: ExperimentConfig) -> dict:
    if not args.model:
        raise SystemExit("eval needs --model")
    model, extra = MlpModel.from_json(Path(args.model).read_text())
    spec = FeatureSpec.from_dict(extra["feature_spec"])
    cfg = cfg.with_(head=extra.get("head", cfg.head))
    data = _load_or_generate(args, cfg)
    idx = np.arange(len(data))
    metrics = evaluate(model, spec.transform(data.features), data, idx)
    write_csv(Path(cfg.out) / "metrics.csv", ("run",) + _metric_columns(cfg.head), [dict(run=0, **metrics)])
    return metrics


def _flat_for_json(cfg: ExperimentConfig) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.to_flat().items()}


COMMANDS = dict(snapshot=cmd_snapshot, covariance=cmd_covariance, crlb=cmd_crlb, scaling=cmd_scaling,
                dataset=cmd_dataset, train=cmd_train, eval=cmd_eval)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="remote-csi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat 'key = value' config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mode", choices=("one-site", "two-site"))
    common.add_argument("--head", choices=("regression", "classification"))
    common.add_argument("--m", type=int, help="array size (default: first entry of m_list)")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "scaling":
            p.add_argument("--kind", choices=("crlb", "dnn", "estimator"), default="crlb")
        if name in ("dataset", "train", "eval"):
            p.add_argument("--size", type=int, help="rows to generate (default: dataset_size)")
        if name in ("train", "eval"):
            p.add_argument("--data", type=Path, help="dataset CSV instead of generating one")
        if name == "eval":
            p.add_argument("--model", type=Path, help="model.json written by 'train'")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _config(args)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    metrics = COMMANDS[args.command](args, cfg)
    if metrics is not None:
        slopes = metrics.pop("slopes", {})
        write_summary(Path(cfg.out) / "summary.json", cfg.to_flat(), command=args.command,
                      slopes=slopes, metrics=metrics)
    return 0


if __name__ == "__main__":
    sys.exit(main())

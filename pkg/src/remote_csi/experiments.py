"""Terminal sampling, dataset generation and the scaling experiments."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .channel import RingModel, farfield_batch
from .config import ExperimentConfig
from .crlb import crlb_remote_one_site, crlb_remote_two_site, fit_power_law
from .estimator import SWEEP_COLUMNS, mse_vs_crlb_sweep
from .features import angular_log_modulus, codeword_gains, dft_codebook
from .geometry import SiteLayout, UlaConfig
from .io import CRLB_SCALING_COLUMNS, DNN_SCALING_COLUMNS, write_csv, write_summary
from .mlp import Dataset, train_and_eval

log = logging.getLogger(__name__)

ESTIMATOR_COLUMNS = SWEEP_COLUMNS + ("se_theta_lc", "se_theta_rm")


def sample_terminal(config: ExperimentConfig, seed=None) -> tuple[float, float]:
    """Area-uniform point on the half annulus around the remote site."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r0, r1 = config.disk_min_radius, config.disk_radius
    r = np.sqrt(r0**2 + rng.random() * (r1**2 - r0**2))
    ang = rng.uniform(0, np.pi)
    if config.half_plane == "lower":
        ang = -ang
    cx, cy = config.remote_site
    return (float(cx + r * np.cos(ang)), float(cy + r * np.sin(ang)))


def sample_terminals(config: ExperimentConfig, n: int, seed=None) -> list[tuple[float, float]]:
    rng = np.random.default_rng(seed)
    return [sample_terminal(config, rng) for _ in range(n)]


def layout_for(config: ExperimentConfig, terminal) -> SiteLayout:
    return SiteLayout(config.local_sites, config.remote_site, terminal)


def scenario_terminal(config: ExperimentConfig) -> tuple[float, float]:
    """The configured terminal, or one drawn from ``master_seed`` when none is set."""
    if config.terminal:
        return config.terminal[0]
    return sample_terminal(config, [config.master_seed, 0])


def tx_power_for(config: ExperimentConfig) -> float:
    """Transmit power giving ``snr_db`` at ``snr_reference_distance`` with unit noise."""
    g = config.wavelength / (4 * np.pi * config.snr_reference_distance)
    return config.snr / g**2


def generate_dataset(config: ExperimentConfig, size: int, m: int, *, head: str | None = None,
                     num_sites: int | None = None, seed=None, noiseless: bool = False) -> Dataset:
    """Synthetic rows of local angular features and remote labels.

    Every row draws a terminal, one set of ring positions shared by all sites (one-ring
    channel) and independent path phases per site. Features are the concatenated
    ``log |W^H y|`` of one noisy snapshot per local site; the regression target is
    ``theta_rm / pi`` and the classification target the remote codeword with the largest
    gain on the noiseless remote channel.
    """
    head = head or config.head
    num_sites = num_sites or config.num_sites
    rng = np.random.default_rng(config.master_seed if seed is None else seed)
    lam = config.wavelength
    p_tx = tx_power_for(config)
    noise = 0.0 if noiseless else 1.0
    book = dft_codebook(m)
    arrays = [UlaConfig(m, lam / 2, lam, origin=p) for p in config.local_sites[:num_sites]]
    remote_arr = UlaConfig(m, lam / 2, lam, origin=config.remote_site)
    feats = np.empty((size, m * num_sites))
    target = np.empty(size)
    gains = np.empty((size, m)) if head == "classification" else None
    for row in range(size):
        term = sample_terminal(config, rng)
        layout = layout_for(config, term)
        if config.channel == "ring":
            psi = tuple(rng.uniform(0, 2 * np.pi, config.num_scatterers))
            make = lambda site: RingModel.from_geometry(site, term, config.ring_radius, scatterer_angles=psi)
        else:
            make = lambda site: RingModel.los(site, term)
        for s, arr in enumerate(arrays):
            y, _ = farfield_batch(make(config.local_sites[s]), arr, p_tx, noise, 1,
                                  seed=rng.integers(2**63), force=True)
            feats[row, s * m:(s + 1) * m] = angular_log_modulus(y[0], book)
        th_rm, _ = layout.remote()
        if head == "regression":
            target[row] = th_rm / np.pi
        else:
            _, h_rm = farfield_batch(make(config.remote_site), remote_arr, 1.0, 0.0, 1,
                                     seed=rng.integers(2**63), force=True)
            gains[row] = codeword_gains(h_rm[0], book)
            target[row] = int(np.argmax(gains[row]))
    if head == "classification":
        target = target.astype(int)
    meta = dict(m=m, num_sites=num_sites, channel=config.channel, noiseless=noiseless)
    return Dataset(feats, target, head, m, gains, meta)


def crlb_scaling_table(config: ExperimentConfig) -> tuple[list[dict], dict]:
    """Terminal-averaged CRB1 and CRB2 per M, plus log-log slopes."""
    terms = sample_terminals(config, config.num_terminals, config.master_seed)
    layouts = [layout_for(config, t) for t in terms]
    rows = []
    for m in sorted(config.m_list):
        c1 = [crlb_remote_one_site(l, m, config.num_samples, config.snr)["theta_rm"] for l in layouts]
        r2 = [crlb_remote_two_site(l, m, config.num_samples, config.snr) for l in layouts]
        rows.append(dict(M=m, crb1_mean=float(np.mean(c1)),
                         crb2_mean=float(np.mean([r["theta_rm"] for r in r2])),
                         crb2_propagated_mean=float(np.mean([r.extras["propagated"] for r in r2])),
                         num_terminals=len(layouts)))
    slopes = {
        key: fit_power_law([(r["M"], r[key]) for r in rows])[0]
        for key in ("crb1_mean", "crb2_mean", "crb2_propagated_mean")
    }
    return rows, slopes


def run_crlb_scaling(config: ExperimentConfig, out: str | Path | None = None) -> dict:
    rows, slopes = crlb_scaling_table(config)
    out = Path(out or config.out)
    write_csv(out / "crlb_scaling.csv", CRLB_SCALING_COLUMNS, rows)
    write_summary(out / "summary.json", config.to_flat(), slopes=slopes, metrics=dict(rows=rows))
    return dict(rows=rows, slopes=slopes)


def dnn_scaling_table(config: ExperimentConfig, sites=(1, 2)) -> tuple[list[dict], dict]:
    rows = []
    for m in sorted(config.m_list):
        for ns in sites:
            data = generate_dataset(config, config.dataset_size, m, head="regression", num_sites=ns,
                                    seed=[config.master_seed, m, ns])
            res = train_and_eval(data, config.train)
            mean, std = res["mse"]
            log.info("M=%d sites=%d mse=%.4g +- %.2g", m, ns, mean, std)
            rows.append(dict(M=m, num_sites=ns, mean_test_mse=mean, std_test_mse=std,
                             num_runs=config.train.num_runs, dataset_size=config.dataset_size))
    slopes = {}
    for ns in sites:
        pts = [(r["M"], r["mean_test_mse"]) for r in rows if r["num_sites"] == ns]
        if len(pts) >= 2:
            slopes[f"sites{ns}"] = fit_power_law(pts)[0]
    return rows, slopes


def run_dnn_scaling(config: ExperimentConfig, out: str | Path | None = None) -> dict:
    rows, slopes = dnn_scaling_table(config)
    out = Path(out or config.out)
    write_csv(out / "dnn_scaling.csv", DNN_SCALING_COLUMNS, rows)
    write_summary(out / "summary.json", config.to_flat(), slopes=slopes, metrics=dict(rows=rows))
    return dict(rows=rows, slopes=slopes)


def run_estimator_efficiency(config: ExperimentConfig, out: str | Path | None = None) -> dict:
    """Empirical MSE of the LoS ML estimates against their bounds for every M."""
    layout = layout_for(config, scenario_terminal(config))
    rows = mse_vs_crlb_sweep(layout, config.m_list, config.trials, config.snr_db, config.num_samples,
                             mode=config.mode, seed=config.master_seed, wavelength=config.wavelength)
    slopes = {}
    if len(rows) >= 2:
        slopes["mse_theta_rm"] = fit_power_law([(r["M"], r["mse_theta_rm"]) for r in rows])[0]
        slopes["crb_theta_rm"] = fit_power_law([(r["M"], r["crb_theta_rm"]) for r in rows])[0]
    out = Path(out or config.out)
    write_csv(out / "estimator.csv", ESTIMATOR_COLUMNS, rows)
    write_summary(out / "summary.json", config.to_flat(), slopes=slopes,
                  metrics=dict(rows=rows, terminal=layout.terminal))
    return dict(rows=rows, slopes=slopes)

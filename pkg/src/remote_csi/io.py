"""CSV and JSON writers/readers. Floats are written with ``repr`` so files round-trip exactly."""

from __future__ import annotations

import csv
import json
import subprocess
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelSnapshot, HermitianCovariance
from .crlb import CrlbReport
from .mlp import Dataset

SNAPSHOT_COLUMNS = ("sounding_index", "site_id", "element_index", "re", "im")
COVARIANCE_COLUMNS = ("row", "col", "re", "im")
CRLB_COLUMNS = ("mode", "M", "K", "SNR", "param", "bound")
CRLB_SCALING_COLUMNS = ("M", "crb1_mean", "crb2_mean", "crb2_propagated_mean", "num_terminals")
DNN_SCALING_COLUMNS = ("M", "num_sites", "mean_test_mse", "std_test_mse", "num_runs", "dataset_size")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict | Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            vals = [r[c] for c in columns] if isinstance(r, dict) else r
            w.writerow([_fmt(v) for v in vals])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_snapshots(path, snapshots: Sequence[ChannelSnapshot]) -> Path:
    rows = ((s.sounding_index, s.site_id, i, v.real, v.imag)
            for s in snapshots for i, v in enumerate(s.values))
    return write_csv(path, SNAPSHOT_COLUMNS, rows)


def read_snapshots(path) -> list[ChannelSnapshot]:
    _, rows = read_csv(path)
    grouped: dict[tuple[int, str], dict[int, complex]] = {}
    for k, site, i, re, im in rows:
        grouped.setdefault((int(k), site), {})[int(i)] = complex(float(re), float(im))
    out = []
    for (k, site), vals in grouped.items():
        v = np.array([vals[i] for i in sorted(vals)])
        out.append(ChannelSnapshot(site, v, np.full_like(v, np.nan), k))
    return out


def write_covariance(path, cov: HermitianCovariance) -> Path:
    c = cov.matrix
    rows = ((r, q, c[r, q].real, c[r, q].imag) for r in range(c.shape[0]) for q in range(c.shape[1]))
    return write_csv(path, COVARIANCE_COLUMNS, rows)


def read_covariance(path) -> np.ndarray:
    _, rows = read_csv(path)
    n = int(np.sqrt(len(rows)))
    c = np.empty((n, n), dtype=complex)
    for r, q, re, im in rows:
        c[int(r), int(q)] = complex(float(re), float(im))
    return c


def crlb_rows(report: CrlbReport) -> list[dict]:
    fp = report.fingerprint
    return [dict(mode=report.mode, M=fp.get("M"), K=fp.get("K"), SNR=fp.get("snr", float("nan")),
                 param=name, bound=value) for name, value in report.bounds.items()]


def write_dataset(path, data: Dataset) -> Path:
    nf = data.features.shape[1]
    cols = [f"f{i}" for i in range(nf)] + ["target"]
    if data.gains is not None:
        cols += [f"gain{i}" for i in range(data.gains.shape[1])]
    def rows():
        for i in range(len(data)):
            r = list(data.features[i]) + [data.target[i]]
            if data.gains is not None:
                r += list(data.gains[i])
            yield r
    return write_csv(path, cols, rows())


def read_dataset(path, head: str = "regression", m: int = 0) -> Dataset:
    header, rows = read_csv(path)
    arr = np.array(rows, dtype=float)
    t = header.index("target")
    gains = arr[:, t + 1:] if len(header) > t + 1 else None
    target = arr[:, t] if head == "regression" else arr[:, t].astype(int)
    return Dataset(arr[:, :t], target, head, m, gains)


def git_describe() -> str:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if np.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_summary(path, config: dict, **sections) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = dict(config=config, git_describe=git_describe(), **sections)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path

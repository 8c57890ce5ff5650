"""Experiment configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .mlp import TrainConfig


def _points(text: str) -> tuple[tuple[float, float], ...]:
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            x, y = chunk.split(",")
            pts.append((float(x), float(y)))
    return tuple(pts)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


@dataclass
class ExperimentConfig:
    """All experiment knobs. Defaults reproduce the two-LBS layout with a semi-disk of terminals."""

    local_sites: tuple[tuple[float, float], ...] = ((-100.0, 0.0), (100.0, 0.0))
    remote_site: tuple[float, float] = (0.0, 50.0)
    terminal: tuple[tuple[float, float], ...] = ()
    disk_radius: float = 50.0
    disk_min_radius: float = 5.0
    half_plane: str = "upper"
    channel: str = "ring"
    ring_radius: float = 5.0
    num_scatterers: int = 100
    wavelength: float = 0.01
    snr_db: float = 10.0
    snr_reference_distance: float = 100.0
    num_samples: int = 100
    m_list: tuple[int, ...] = (16, 32, 64, 128, 256)
    num_terminals: int = 1000
    trials: int = 1000
    dataset_size: int = 10000
    mode: str = "one-site"
    head: str = "regression"
    train: TrainConfig = field(default_factory=TrainConfig)
    master_seed: int = 0
    out: str = "results"

    def __post_init__(self) -> None:
        if self.half_plane not in ("upper", "lower"):
            raise ValueError("half_plane must be 'upper' or 'lower'")
        if self.channel not in ("ring", "los"):
            raise ValueError("channel must be 'ring' or 'los'")
        if self.mode not in ("one-site", "two-site"):
            raise ValueError("mode must be 'one-site' or 'two-site'")
        if self.head not in ("regression", "classification"):
            raise ValueError("head must be 'regression' or 'classification'")
        if not 0 <= self.disk_min_radius < self.disk_radius:
            raise ValueError("need 0 <= disk_min_radius < disk_radius")

    @property
    def num_sites(self) -> int:
        return 1 if self.mode == "one-site" else 2

    @property
    def snr(self) -> float:
        return 10 ** (self.snr_db / 10)

    def to_flat(self) -> dict:
        flat = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "train":
                flat.update({f"train.{k}": w for k, w in dataclasses.asdict(v).items()})
            else:
                flat[f.name] = v
        return flat

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_PARSERS = {
    "local_sites": _points,
    "remote_site": lambda t: _points(t)[0],
    "terminal": _points,
    "m_list": _ints,
}


def _coerce(template, text: str):
    if isinstance(template, bool):
        return text.strip().lower() in ("1", "true", "yes")
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    return text.strip()


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys raise ``KeyError``."""
    cfg = base or ExperimentConfig()
    top, train = {}, {}
    train_defaults = dataclasses.asdict(cfg.train)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("train."):
            name = key[len("train."):]
            if name not in train_defaults:
                raise KeyError(f"line {lineno}: unknown key {key!r}")
            train[name] = _coerce(train_defaults[name], value)
        elif key in _PARSERS:
            top[key] = _PARSERS[key](value)
        elif key in {f.name for f in fields(cfg)} and key != "train":
            top[key] = _coerce(getattr(cfg, key), value)
        else:
            raise KeyError(f"line {lineno}: unknown key {key!r}")
    if train:
        top["train"] = dataclasses.replace(cfg.train, **train)
    return dataclasses.replace(cfg, **top)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return parse_config(Path(path).read_text())

"""DFT codebook, angular-domain CSI features and the codebook inference error."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

EPS_LOG = 1e-12


def dft_codebook(m: int) -> np.ndarray:
    """``M x M`` matrix whose column ``k`` is ``exp(-j 2 pi i k / M) / sqrt(M)``."""
    if m < 1:
        raise ValueError("codebook size must be >= 1")
    i = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(i, i) / m) / np.sqrt(m)


def angular_log_modulus(h: np.ndarray, codebook: np.ndarray, eps_log: float = EPS_LOG) -> np.ndarray:
    """``log(|W^H h| + eps)``; works on a single vector or on rows of a batch."""
    h = np.asarray(h)
    if not np.any(h):
        raise ValueError("channel vector is zero")
    return np.log(np.abs(h @ codebook.conj()) + eps_log)


@dataclass
class FeatureSpec:
    """Quantize-then-z-score stage applied to angular log-modulus features.

    ``fit`` learns the quantizer range and the per-feature statistics from training
    rows only.
    """

    codebook_size: int
    quantization_levels: int = 64
    eps_log: float = EPS_LOG
    q_low: float | None = None
    q_high: float | None = None
    mean: np.ndarray | None = field(default=None, repr=False)
    std: np.ndarray | None = field(default=None, repr=False)

    def quantize(self, raw: np.ndarray) -> np.ndarray:
        if self.q_low is None:
            raise RuntimeError("FeatureSpec is not fitted")
        span = self.q_high - self.q_low
        if span <= 0:
            return np.full_like(raw, self.q_low, dtype=float)
        step = span / (self.quantization_levels - 1)
        idx = np.clip(np.rint((raw - self.q_low) / step), 0, self.quantization_levels - 1)
        return self.q_low + idx * step

    def fit(self, raw_train: np.ndarray) -> "FeatureSpec":
        raw_train = np.atleast_2d(raw_train)
        spec = replace(self, q_low=float(raw_train.min()), q_high=float(raw_train.max()))
        q = spec.quantize(raw_train)
        std = q.std(axis=0)
        std[std == 0] = 1.0
        spec.mean, spec.std = q.mean(axis=0), std
        return spec

    def transform(self, raw: np.ndarray) -> np.ndarray:
        if self.mean is None:
            raise RuntimeError("FeatureSpec is not fitted")
        return (self.quantize(raw) - self.mean) / self.std

    def to_dict(self) -> dict:
        return dict(codebook_size=self.codebook_size, quantization_levels=self.quantization_levels,
                    eps_log=self.eps_log, q_low=self.q_low, q_high=self.q_high,
                    mean=None if self.mean is None else self.mean.tolist(),
                    std=None if self.std is None else self.std.tolist())

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        d = dict(d)
        for k in ("mean", "std"):
            if d.get(k) is not None:
                d[k] = np.asarray(d[k], dtype=float)
        return cls(**d)


def featurize(h: np.ndarray | Sequence[np.ndarray], spec: FeatureSpec) -> np.ndarray:
    """Full feature pipeline for one channel, or a list of per-site channels (concatenated)."""
    if isinstance(h, (list, tuple)):
        raw = np.concatenate([angular_log_modulus(x, dft_codebook(len(x)), spec.eps_log) for x in h])
    else:
        raw = angular_log_modulus(h, dft_codebook(len(h)), spec.eps_log)
    return spec.transform(raw)


def codeword_gains(h: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """``|w_k^H h|`` for every codeword (rows of a batch give rows of gains)."""
    return np.abs(np.asarray(h) @ codebook.conj())


def normalized_inference_error(h_hat: np.ndarray, h: np.ndarray, codebook: np.ndarray) -> float:
    """``1 - |h_hat^H h| / |h_opt^H h|`` with ``h_opt`` the best codeword for ``h``."""
    h = np.asarray(h)
    if not np.any(h):
        raise ValueError("channel vector is zero")
    best = codeword_gains(h, codebook).max()
    return float(1.0 - np.abs(np.vdot(h_hat, h)) / best)


def inference_error_from_gains(gains: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Per-row normalized inference error given codeword gains and predicted indices."""
    gains = np.atleast_2d(gains)
    picked = gains[np.arange(gains.shape[0]), np.asarray(predicted)]
    return 1.0 - picked / gains.max(axis=1)

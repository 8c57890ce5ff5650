"""Numpy multilayer perceptron: LeakyReLU hidden layers, inverted dropout, Adam.

Hidden sizes are ``[M, M, 64, 32]``. The regression head is a single sigmoid unit
trained with MSE; the classification head is a softmax trained with cross-entropy.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureSpec, inference_error_from_gains

FORMAT_NAME = "remote-csi-mlp"
FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    step_size: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 200
    batch_size: int = 128
    train_fraction: float = 0.9
    num_runs: int = 10
    master_seed: int = 0
    quantization_levels: int = 64


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output: str = "sigmoid"
    alpha_leak: float = 0.01
    dropout_keep: float = 0.7

    @classmethod
    def init(cls, layer_sizes: Sequence[int], output: str = "sigmoid", seed=None, *,
             alpha_leak: float = 0.01, dropout_keep: float = 0.7) -> "MlpModel":
        """Fan-in scaled uniform weights, ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``; zero biases."""
        if output not in ("sigmoid", "softmax"):
            raise ValueError("output must be 'sigmoid' or 'softmax'")
        rng = np.random.default_rng(seed)
        sizes = [int(s) for s in layer_sizes]
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = np.sqrt(6.0 / fan_in)
            ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(sizes, ws, bs, output, alpha_leak, dropout_keep)

    @classmethod
    def for_task(cls, input_size: int, m: int, out: int = 1, seed=None, **kwargs) -> "MlpModel":
        output = "sigmoid" if out == 1 else "softmax"
        return cls.init([input_size, m, m, 64, 32, out], output, seed, **kwargs)

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpModel":
        return MlpModel(list(self.layer_sizes), [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.output, self.alpha_leak, self.dropout_keep)

    def to_json(self, extra: dict | None = None) -> str:
        doc = dict(format=FORMAT_NAME, version=FORMAT_VERSION, layer_sizes=self.layer_sizes,
                   output=self.output, alpha_leak=self.alpha_leak, dropout_keep=self.dropout_keep,
                   weights=[w.ravel().tolist() for w in self.weights],
                   biases=[b.tolist() for b in self.biases])
        if extra:
            doc.update(extra)
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> tuple["MlpModel", dict]:
        doc = json.loads(text)
        if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
            raise ValueError("unrecognized model file")
        sizes = doc["layer_sizes"]
        ws = [np.asarray(w, dtype=float).reshape(a, b) for w, a, b in zip(doc["weights"], sizes[:-1], sizes[1:])]
        bs = [np.asarray(b, dtype=float) for b in doc["biases"]]
        model = cls(sizes, ws, bs, doc["output"], doc["alpha_leak"], doc["dropout_keep"])
        return model, {k: v for k, v in doc.items() if k not in asdict(model) and k not in ("format", "version")}


def _leaky(z: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(z > 0, z, alpha * z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward(model: MlpModel, x: np.ndarray, mode: str = "eval", seed=None, *, masks=None):
    """Forward pass. Returns ``(output, cache)``.

    Train mode applies inverted dropout on every hidden activation (masks drawn from
    ``seed`` unless given); eval mode uses no dropout and no rescaling.
    """
    x = np.atleast_2d(np.asarray(x))
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(float)
    if x.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"expected {model.layer_sizes[0]} features, got {x.shape[1]}")
    train = mode == "train"
    rng = np.random.default_rng(seed) if train and masks is None else None
    keep = model.dropout_keep
    acts, pre, used_masks = [x], [], []
    a = x
    n_hidden = len(model.weights) - 1
    for layer in range(n_hidden):
        z = a @ model.weights[layer] + model.biases[layer]
        a = _leaky(z, model.alpha_leak)
        if train and keep < 1.0:
            mask = masks[layer] if masks is not None else (rng.random(a.shape) < keep) / keep
            a = a * mask
        else:
            mask = None
        pre.append(z)
        used_masks.append(mask)
        acts.append(a)
    z = a @ model.weights[-1] + model.biases[-1]
    out = _sigmoid(z) if model.output == "sigmoid" else _softmax(z)
    return out, dict(acts=acts, pre=pre, masks=used_masks, out=out)


def loss_value(out: np.ndarray, target: np.ndarray, loss: str):
    """Mean batch loss, kept in the dtype of ``out``."""
    if loss == "mse":
        return np.mean((out - np.reshape(target, out.shape)) ** 2)
    idx = np.asarray(target, dtype=int)
    return -np.mean(np.log(out[np.arange(out.shape[0]), idx]))


def backward(model: MlpModel, cache: dict, target: np.ndarray, loss: str = "mse"):
    """Exact gradients of the mean batch loss. Returns ``(weight_grads, bias_grads)``."""
    out = cache["out"]
    n = out.shape[0]
    if loss == "mse":
        if model.output != "sigmoid":
            raise ValueError("mse loss expects the sigmoid head")
        t = np.reshape(target, out.shape)
        delta = 2.0 * (out - t) / out.size * out * (1.0 - out)
    elif loss == "cross-entropy":
        if model.output != "softmax":
            raise ValueError("cross-entropy loss expects the softmax head")
        onehot = np.zeros_like(out)
        onehot[np.arange(n), np.asarray(target, dtype=int)] = 1.0
        delta = (out - onehot) / n
    else:
        raise ValueError(f"unknown loss {loss!r}")
    acts, pre, masks = cache["acts"], cache["pre"], cache["masks"]
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for layer in range(len(model.weights) - 1, -1, -1):
        gw[layer] = acts[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer == 0:
            break
        da = delta @ model.weights[layer].T
        if masks[layer - 1] is not None:
            da = da * masks[layer - 1]
        delta = da * np.where(pre[layer - 1] > 0, 1.0, model.alpha_leak)
    return gw, gb


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, step_size: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """In-place bias-corrected Adam update of ``params``."""
    state.t += 1
    c1 = 1 - beta1**state.t
    c2 = 1 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= step_size * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def train(model: MlpModel, x: np.ndarray, y: np.ndarray, config: TrainConfig, seed, loss: str) -> MlpModel:
    """Mini-batch Adam on ``(x, y)``; shuffling and dropout masks come from ``seed``."""
    rng = np.random.default_rng(seed)
    state = AdamState.zeros_like(model.params)
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, cache = forward(model, x[idx], "train", rng)
            gw, gb = backward(model, cache, y[idx], loss)
            adam_step(model.params, [*gw, *gb], state, config.step_size,
                      config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    return model


@dataclass
class Dataset:
    """Raw angular log-modulus features plus labels.

    ``gains`` holds remote codeword gains ``|w_k^H h_rm|`` (classification only).
    """

    features: np.ndarray
    target: np.ndarray
    head: str = "regression"
    m: int = 0
    gains: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.features.shape[0]


def split_indices(n: int, train_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_train = int(round(train_fraction * n))
    if n_train <= 0 or n_train >= n:
        raise ValueError("degenerate train/test split")
    return perm[:n_train], perm[n_train:]


def evaluate(model: MlpModel, x: np.ndarray, data: Dataset, idx: np.ndarray) -> dict:
    out, _ = forward(model, x)
    if data.head == "regression":
        return dict(mse=float(np.mean((out[:, 0] - data.target[idx]) ** 2)))
    pred = out.argmax(axis=1)
    metrics = dict(accuracy=float(np.mean(pred == data.target[idx])))
    if data.gains is not None:
        e = inference_error_from_gains(data.gains[idx], pred)
        metrics.update(median_error=float(np.median(e)), mean_error=float(np.mean(e)))
    return metrics


def train_and_eval(data: Dataset, config: TrainConfig, *, hidden_m: int | None = None,
                   return_models: bool = False):
    """Repeat ``num_runs`` times: fresh split, fresh init, train, score the test split.

    Returns ``{metric: (mean, sample std)}`` plus ``"runs"``: the per-run metric dicts.
    """
    if len(data) < 10:
        raise ValueError("dataset must hold at least 10 rows")
    m = hidden_m or data.m or data.features.shape[1]
    head = data.head
    n_out = 1 if head == "regression" else data.gains.shape[1] if data.gains is not None else int(data.target.max()) + 1
    loss = "mse" if head == "regression" else "cross-entropy"
    runs, models = [], []
    for run in range(config.num_runs):
        rng = np.random.default_rng([config.master_seed, run])
        tr, te = split_indices(len(data), config.train_fraction, rng)
        spec = FeatureSpec(m, config.quantization_levels).fit(data.features[tr])
        x_tr, x_te = spec.transform(data.features[tr]), spec.transform(data.features[te])
        model = MlpModel.for_task(x_tr.shape[1], m, n_out, seed=rng.integers(2**63))
        y_tr = data.target[tr]
        train(model, x_tr, y_tr if head == "regression" else y_tr.astype(int), config,
              rng.integers(2**63), loss)
        runs.append(evaluate(model, x_te, data, te))
        models.append((model, spec))
    summary = {}
    for key in runs[0]:
        vals = np.array([r[key] for r in runs])
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        summary[key] = (float(vals.mean()), std)
    summary["runs"] = runs
    if return_models:
        return summary, models
    return summary

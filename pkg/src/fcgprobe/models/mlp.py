"""Small numpy MLP producing a benign-class probability."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateData, DimensionMismatch
from .labels import BENIGN


def _relu(z):
    return np.maximum(z, 0.0)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


ACTIVATIONS = {"relu": _relu, "sigmoid": _sigmoid}


@dataclass
class MlpModel:
    weights: list[np.ndarray]  # each (fan_in, fan_out)
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("an MLP needs at least one layer")
        if self.activations[-1] != "sigmoid":
            raise ValueError("final activation must be sigmoid")
        for w, b, prev in zip(self.weights[1:], self.biases[1:], self.weights):
            if w.shape[0] != prev.shape[1] or b.shape != (w.shape[1],):
                raise ValueError("layer dimensions do not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """All layer activations for a batch, input included."""
        acts = [x]
        for w, b, name in zip(self.weights, self.biases, self.activations):
            acts.append(ACTIVATIONS[name](acts[-1] @ w + b))
        return acts

    def predict_proba(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        if xb.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} features, got {xb.shape[1]}")
        p = self.forward(xb)[-1][:, 0]
        return float(p[0]) if single else p

    __call__ = predict_proba


def mlp_predict(m: MlpModel, x) -> float | np.ndarray:
    """Benign-class probability for one vector or a batch."""
    return m.predict_proba(x)


@dataclass
class MlpConfig:
    hidden: tuple[int, ...] = (64, 64)
    epochs: int = 600
    learning_rate: float = 0.5
    # L2 penalty on weights; keeps near-constant inputs from dominating after scaling
    weight_decay: float = 1e-3
    seed: int = 0
    history: list[float] = field(default_factory=list, repr=False, compare=False)


def _bce(p, t):
    eps = 1e-12
    return float(-np.mean(t * np.log(p + eps) + (1 - t) * np.log(1 - p + eps)))


def mlp_train(data, labels, config: MlpConfig | None = None) -> MlpModel:
    """Full-batch gradient descent on cross-entropy plus an L2 weight penalty.

    A step that raises the loss is rolled back and the learning rate halved,
    so the recorded per-epoch loss (``config.history``) never increases.
    Inputs are centred and divided by one shared scale during training and the scaling is folded into
    the first layer of the returned model.
    """
    cfg = config or MlpConfig()
    x = np.asarray(data, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or len(x) != len(y):
        raise DimensionMismatch("data must be (n, d) with one label per row")
    if len(np.unique(y)) < 2:
        raise DegenerateData("training data must contain both classes")
    t = (y == BENIGN).astype(float)

    mu = x.mean(axis=0)
    # one shared scale: embedding coordinates share units, and per-feature
    # scaling would blow up nearly constant coordinates
    spread = float(np.sqrt(np.mean((x - mu) ** 2)))
    sigma = np.full(x.shape[1], spread if spread > 0 else 1.0)
    xs = (x - mu) / sigma

    rng = np.random.default_rng(cfg.seed)
    sizes = [x.shape[1], *cfg.hidden, 1]
    ws = [rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(sizes, sizes[1:])]
    bs = [np.zeros(b) for b in sizes[1:]]
    acts = ["relu"] * len(cfg.hidden) + ["sigmoid"]

    def loss_and_grads(ws, bs):
        hs = [xs]
        for w, b, name in zip(ws, bs, acts):
            hs.append(ACTIVATIONS[name](hs[-1] @ w + b))
        p = hs[-1][:, 0]
        loss = _bce(p, t) + 0.5 * cfg.weight_decay * sum(float(np.sum(w * w)) for w in ws)
        delta = ((p - t) / len(t))[:, None]
        gw, gb = [], []
        for i in range(len(ws) - 1, -1, -1):
            gw.append(hs[i].T @ delta + cfg.weight_decay * ws[i])
            gb.append(delta.sum(axis=0))
            if i:
                delta = (delta @ ws[i].T) * (hs[i] > 0)
        return loss, gw[::-1], gb[::-1]

    lr = cfg.learning_rate
    loss, gw, gb = loss_and_grads(ws, bs)
    cfg.history.clear()
    cfg.history.append(loss)
    for _ in range(cfg.epochs):
        while True:
            new_ws = [w - lr * g for w, g in zip(ws, gw)]
            new_bs = [b - lr * g for b, g in zip(bs, gb)]
            new_loss, new_gw, new_gb = loss_and_grads(new_ws, new_bs)
            if new_loss <= loss or lr < 1e-12:
                break
            lr /= 2.0
        if new_loss > loss:
            break
        ws, bs, loss, gw, gb = new_ws, new_bs, new_loss, new_gw, new_gb
        cfg.history.append(loss)

    # fold (x - mu) / sigma into the first layer
    w0 = ws[0] / sigma[:, None]
    b0 = bs[0] - (mu / sigma) @ ws[0]
    return MlpModel([w0, *ws[1:]], [b0, *bs[1:]], acts)

"""LSTM evaluator: predicts each step's ``user_mmst`` from a short window of history.

Each example is one dataset row.  Its input is the window of the last
``window`` steps (left zero-padded at the start of a sequence), where a step
holds ``attributes + features + previous label``; the target is the row's own
label.  Everything is on the [-1, 1] scale of the real data's normalization.

Training uses a hand-written BPTT over the fused gate kernels rather than the
general autodiff graph; the evaluator is trained many times per pipeline run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from synthguard import kernels
from synthguard import rng as rng_mod
from synthguard.dataset import NormalizationParams, SequenceDataset
from synthguard.errors import ConfigError, StateError
from synthguard.numerics.layers import Dense, LSTMCell
from synthguard.numerics.optim import Adam


@dataclass(frozen=True)
class EvaluatorConfig:
    hidden: int = 32
    epochs: int = 200
    learning_rate: float = 1e-3
    window: int = 5
    batch_size: int = 256

    def __post_init__(self):
        if min(self.hidden, self.epochs, self.window, self.batch_size) < 1:
            raise ConfigError("evaluator hidden, epochs, window and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("evaluator learning_rate must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Windows:
    inputs: np.ndarray  # (N, window, D)
    targets: np.ndarray  # (N,)

    def __len__(self) -> int:
        return self.targets.shape[0]


def make_windows(ds: SequenceDataset, norm: NormalizationParams, window: int) -> Windows:
    """One example per row of ``ds`` (original scale in, normalized windows out)."""
    if len(ds) == 0:
        raise ConfigError("cannot window an empty dataset")
    n_cols = len(ds.columns)
    xs, ys = [], []
    for seq in ds.sequences:
        rows = norm.apply(seq.rows())
        steps = rows.copy()
        steps[:, -1] = np.r_[0.0, rows[:-1, -1]]
        padded = np.vstack([np.zeros((window - 1, n_cols)), steps])
        view = np.lib.stride_tricks.sliding_window_view(padded, (window, n_cols))[:, 0]
        xs.append(view)
        ys.append(rows[:, -1])
    return Windows(np.ascontiguousarray(np.concatenate(xs)), np.concatenate(ys))


class EvaluatorModel:
    """Single-layer LSTM with a linear read-out of the last hidden state."""

    def __init__(self, n_in: int, config: EvaluatorConfig, rng: np.random.Generator):
        self.config = config
        self.n_in = n_in
        self.cell = LSTMCell(n_in, config.hidden, rng, name="evaluator.lstm")
        self.head = Dense(config.hidden, 1, rng, name="evaluator.head")
        self.trained = False

    def parameters(self):
        return {**self.cell.parameters(), **self.head.parameters()}

    def _forward(self, x: np.ndarray):
        p = self.cell.params
        wx, wh, b = p.w_x.data, p.w_h.data, p.b.data
        batch = x.shape[0]
        h = np.zeros((batch, self.config.hidden))
        c = np.zeros_like(h)
        cache = []
        for t in range(x.shape[1]):
            z = np.ascontiguousarray(x[:, t] @ wx + h @ wh + b)
            h_new, c_new, gates, tanh_c = kernels.lstm_gates_forward(z, c)
            cache.append((h, c, gates, tanh_c))
            h, c = np.asarray(h_new), np.asarray(c_new)
        out = h @ self.head.weight.data + self.head.bias.data
        return out[:, 0], h, cache

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(x, dtype=np.float64))[0]

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        """Mean squared error of a batch and its gradient for every parameter."""
        pred, h_last, cache = self._forward(x)
        err = pred - y
        batch = x.shape[0]
        d_out = (2.0 / batch) * err[:, None]
        p = self.cell.params
        grads = {
            self.head.weight.name: h_last.T @ d_out,
            self.head.bias.name: d_out.sum(axis=0),
        }
        dh = np.ascontiguousarray(d_out @ self.head.weight.data.T)
        dc = np.zeros_like(dh)
        dwx = np.zeros_like(p.w_x.data)
        dwh = np.zeros_like(p.w_h.data)
        db = np.zeros_like(p.b.data)
        wh_t = p.w_h.data.T
        for t in range(x.shape[1] - 1, -1, -1):
            h_prev, c_prev, gates, tanh_c = cache[t]
            dz, dc = kernels.lstm_gates_backward(dh, dc, gates, c_prev, tanh_c)
            dz, dc = np.asarray(dz), np.asarray(dc)
            dwx += x[:, t].T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dh = np.ascontiguousarray(dz @ wh_t)
        grads[p.w_x.name], grads[p.w_h.name], grads[p.b.name] = dwx, dwh, db
        return float(np.mean(err * err)), grads

    def per_example_loss(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if not self.trained:
            raise StateError("evaluator has not been trained")
        return (self.predict(x) - y) ** 2


def train_evaluator(data: Windows, config: EvaluatorConfig, rng: np.random.Generator) -> EvaluatorModel:
    """Adam on shuffled minibatches; one epoch is one pass over ``data``."""
    if len(data) == 0:
        raise ConfigError("cannot train the evaluator on zero examples")
    init_rng, order_rng = rng_mod.split(rng, 2)
    model = EvaluatorModel(data.inputs.shape[2], config, init_rng)
    opt = Adam(model.parameters(), lr=config.learning_rate)
    n = len(data)
    for _ in range(config.epochs):
        order = order_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = model.loss_and_grads(data.inputs[idx], data.targets[idx])
            opt.step(grads)
    model.trained = True
    return model

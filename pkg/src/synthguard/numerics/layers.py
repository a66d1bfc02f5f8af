"""Trainable building blocks: dense layers, MLPs and an LSTM cell."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synthguard.errors import ConfigError, ShapeError
from synthguard.numerics import autograd as ag
from synthguard.numerics.autograd import Tensor


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Module:
    """Anything holding named trainable tensors."""

    def parameters(self) -> dict[str, Tensor]:
        raise NotImplementedError

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        if missing:
            raise ShapeError(f"state is missing parameters: {sorted(missing)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ShapeError(f"{name}: expected {p.shape}, got {arr.shape}")
            p.data = arr.copy()


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str = "dense"):
        self.name = name
        self.weight = Tensor(glorot_uniform(rng, n_in, n_out), requires_grad=True, name=f"{name}.weight")
        self.bias = Tensor(np.zeros(n_out), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return ag.matmul(x, self.weight) + self.bias

    def parameters(self) -> dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class MLP(Module):
    """Stack of dense layers; ``hidden`` activation between them, ``output`` at the end."""

    def __init__(
        self,
        sizes: list[int],
        rng: np.random.Generator,
        hidden: str = "tanh",
        output: str = "linear",
        name: str = "mlp",
    ):
        if len(sizes) < 2:
            raise ConfigError("an MLP needs at least input and output sizes")
        for act in (hidden, output):
            if act not in ag.ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
        self.sizes = list(sizes)
        self.hidden = hidden
        self.output = output
        self.layers = [Dense(a, b, rng, name=f"{name}.{i}") for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def __call__(self, x: Tensor) -> Tensor:
        act = ag.ACTIVATIONS[self.hidden]
        for layer in self.layers[:-1]:
            x = act(layer(x))
        return ag.ACTIVATIONS[self.output](self.layers[-1](x))

    def parameters(self) -> dict[str, Tensor]:
        return ag.parameters_of(*self.layers)


@dataclass
class LSTMParams:
    """Weights of one LSTM cell; gate blocks ordered input, forget, candidate, output."""

    w_x: Tensor  # (n_in, 4H)
    w_h: Tensor  # (H, 4H)
    b: Tensor  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]

    @property
    def n_in(self) -> int:
        return self.w_x.shape[0]


def lstm_step(x, h, c, params: LSTMParams) -> tuple[Tensor, Tensor]:
    """One LSTM step on a batch; ``x`` is (B, n_in), ``h`` and ``c`` are (B, H)."""
    x, h, c = ag.as_tensor(x), ag.as_tensor(h), ag.as_tensor(c)
    hidden = params.hidden
    if x.ndim != 2 or x.shape[1] != params.n_in:
        raise ShapeError(f"lstm input {x.shape} does not match n_in={params.n_in}")
    if h.shape != c.shape or h.ndim != 2 or h.shape[1] != hidden or h.shape[0] != x.shape[0]:
        raise ShapeError(f"lstm state shapes {h.shape}/{c.shape} do not match hidden={hidden}")
    z = ag.matmul(x, params.w_x) + ag.matmul(h, params.w_h) + params.b
    hc = ag.lstm_gates(z, c)
    return hc[:, :hidden], hc[:, hidden:]


class LSTMCell(Module):
    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator, name: str = "lstm"):
        self.name = name
        self.hidden = hidden
        self.params = LSTMParams(
            w_x=Tensor(glorot_uniform(rng, n_in, 4 * hidden), requires_grad=True, name=f"{name}.w_x"),
            w_h=Tensor(glorot_uniform(rng, hidden, 4 * hidden), requires_grad=True, name=f"{name}.w_h"),
            b=Tensor(np.zeros(4 * hidden), requires_grad=True, name=f"{name}.b"),
        )

    def __call__(self, x, h, c):
        return lstm_step(x, h, c, self.params)

    def zero_state(self, batch: int) -> tuple[Tensor, Tensor]:
        return Tensor(np.zeros((batch, self.hidden))), Tensor(np.zeros((batch, self.hidden)))

    def parameters(self) -> dict[str, Tensor]:
        p = self.params
        return {p.w_x.name: p.w_x, p.w_h.name: p.w_h, p.b.name: p.b}


# -- losses ---------------------------------------------------------------


def mse(pred: Tensor, target) -> Tensor:
    diff = pred - target
    return ag.mean(diff * diff)


def bce_with_logits(logits: Tensor, target) -> Tensor:
    """Mean binary cross-entropy; ``target`` holds 0/1 labels."""
    target = ag.as_tensor(target)
    return ag.mean(ag.softplus(logits) - logits * target)

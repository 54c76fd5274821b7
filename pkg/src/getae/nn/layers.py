"""Dense and recurrent layers with hand-written backward passes.

Every layer is a pair of functions over a flat ``dict[str, ndarray]`` of
parameters: ``*_forward`` returns ``(output, cache)`` and ``*_backward``
takes the upstream gradient and the cache and returns
``(grad_input, grads)`` with ``grads`` keyed like the parameters.
Inputs are batched: dense takes ``(B, in)``, recurrent takes ``(B, T, in)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Activation(str, Enum):
    RELU = "ReLU"
    SIGMOID = "Sigmoid"
    TANH = "Tanh"
    IDENTITY = "Identity"


class RecurrentKind(str, Enum):
    RNN = "RNN"
    LSTM = "LSTM"
    GRU = "GRU"


GATES = {RecurrentKind.RNN: 1, RecurrentKind.LSTM: 4, RecurrentKind.GRU: 3}


@dataclass(frozen=True)
class DenseLayerSpec:
    units: int
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        if self.units < 1:
            raise ValueError("units must be > 0")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass(frozen=True)
class RecurrentLayerSpec:
    kind: RecurrentKind
    hidden_units: int = 64  # per direction
    bidirectional: bool = False
    dropout: float = 0.2

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        object.__setattr__(self, "kind", RecurrentKind(self.kind))

    @property
    def output_width(self) -> int:
        return self.hidden_units * (2 if self.bidirectional else 1)


def sigmoid(x):
    # exp of a non-positive argument only; no overflow warnings
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _activate(z, act: Activation):
    if act is Activation.RELU:
        return np.maximum(z, 0.0)
    if act is Activation.SIGMOID:
        return sigmoid(z)
    if act is Activation.TANH:
        return np.tanh(z)
    return z


def _activation_grad(z, y, act: Activation):
    if act is Activation.RELU:
        return (z > 0).astype(z.dtype)
    if act is Activation.SIGMOID:
        return y * (1.0 - y)
    if act is Activation.TANH:
        return 1.0 - y * y
    return np.ones_like(z)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


# -- dense ------------------------------------------------------------------

def init_dense(in_dim: int, spec: DenseLayerSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {"W": glorot_uniform(rng, in_dim, spec.units), "b": np.zeros(spec.units)}


def dense_forward(x, spec: DenseLayerSpec, params):
    W, b = params["W"], params["b"]
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"dense input width {x.shape[-1]} does not match weights {W.shape}")
    z = x @ W + b
    y = _activate(z, spec.activation)
    return y, (x, z, y)


def dense_backward(dy, cache, spec: DenseLayerSpec, params):
    x, z, y = cache
    dz = dy * _activation_grad(z, y, spec.activation)
    grads = {"W": x.T @ dz, "b": dz.sum(axis=0)}
    return dz @ params["W"].T, grads


# -- recurrent cells (single direction) -------------------------------------

def init_cell(kind: RecurrentKind, in_dim: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    g = GATES[kind]
    W = np.concatenate([glorot_uniform(rng, in_dim, hidden) for _ in range(g)], axis=1)
    U = orthogonal(rng, hidden, g * hidden)
    b = np.zeros(g * hidden)
    if kind is RecurrentKind.LSTM:
        b[hidden:2 * hidden] = 1.0  # forget gate
    return {"W": W, "U": U, "b": b}


def _cell_forward(kind, x, params):
    W, U, b = params["W"], params["U"], params["b"]
    B, T, D = x.shape
    if D != W.shape[0]:
        raise ValueError(f"recurrent input width {D} does not match weights {W.shape}")
    H = U.shape[0]
    xw = x @ W + b  # (B, T, gH), input projections for all steps at once
    h = np.zeros((B, H))
    steps = []
    if kind is RecurrentKind.RNN:
        for t in range(T):
            h_new = np.tanh(xw[:, t] + h @ U)
            steps.append((h, h_new))
            h = h_new
    elif kind is RecurrentKind.LSTM:
        c = np.zeros((B, H))
        for t in range(T):
            z = xw[:, t] + h @ U
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((h, c, i, f, g, o, tc))
            h, c = h_new, c_new
    else:
        Uz, Ur, Un = U[:, :H], U[:, H:2 * H], U[:, 2 * H:]
        for t in range(T):
            a = xw[:, t]
            z = sigmoid(a[:, :H] + h @ Uz)
            r = sigmoid(a[:, H:2 * H] + h @ Ur)
            rh = r * h
            n = np.tanh(a[:, 2 * H:] + rh @ Un)
            h_new = z * h + (1.0 - z) * n
            steps.append((h, z, r, rh, n))
            h = h_new
    return h, (kind, x, steps)


def _cell_backward(dh_last, cache, params):
    kind, x, steps = cache
    W, U = params["W"], params["U"]
    B, T, D = x.shape
    H = U.shape[0]
    dpre = np.zeros((B, T, W.shape[1]))  # gradient wrt pre-activations x_t W + b (+ recurrent part)
    dU = np.zeros_like(U)
    dh = dh_last
    if kind is RecurrentKind.RNN:
        for t in reversed(range(T)):
            h_prev, h_t = steps[t]
            da = dh * (1.0 - h_t * h_t)
            dpre[:, t] = da
            dU += h_prev.T @ da
            dh = da @ U.T
    elif kind is RecurrentKind.LSTM:
        dc = np.zeros((B, H))
        for t in reversed(range(T)):
            h_prev, c_prev, i, f, g, o, tc = steps[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            da = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dc * i * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            dpre[:, t] = da
            dU += h_prev.T @ da
            dh = da @ U.T
            dc = dc * f
    else:
        Uz, Ur, Un = U[:, :H], U[:, H:2 * H], U[:, 2 * H:]
        for t in reversed(range(T)):
            h_prev, z, r, rh, n = steps[t]
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dh_prev = dh * z
            dan = dn * (1.0 - n * n)
            drh = dan @ Un.T
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            dpre[:, t, :H] = daz
            dpre[:, t, H:2 * H] = dar
            dpre[:, t, 2 * H:] = dan
            dU[:, :H] += h_prev.T @ daz
            dU[:, H:2 * H] += h_prev.T @ dar
            dU[:, 2 * H:] += rh.T @ dan
            dh = dh_prev + daz @ Uz.T + dar @ Ur.T
    grads = {
        "W": np.einsum("btd,btg->dg", x, dpre),
        "U": dU,
        "b": dpre.sum(axis=(0, 1)),
    }
    dx = dpre @ W.T
    return dx, grads


# -- recurrent layer (optionally bidirectional) -----------------------------

def init_recurrent(in_dim: int, spec: RecurrentLayerSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {f"fwd/{k}": v for k, v in init_cell(spec.kind, in_dim, spec.hidden_units, rng).items()}
    if spec.bidirectional:
        params.update({f"bwd/{k}": v for k, v in init_cell(spec.kind, in_dim, spec.hidden_units, rng).items()})
    return params


def _sub(params, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


def recurrent_forward(x, spec: RecurrentLayerSpec, params):
    """Final hidden state; bidirectional concatenates forward-last and backward-first states."""
    if x.ndim != 3:
        raise ValueError(f"recurrent input must be (batch, steps, features), got shape {x.shape}")
    if x.shape[1] == 0:
        raise ValueError("empty sequence")
    h_f, cache_f = _cell_forward(spec.kind, x, _sub(params, "fwd/"))
    if not spec.bidirectional:
        return h_f, (cache_f, None)
    h_b, cache_b = _cell_forward(spec.kind, x[:, ::-1], _sub(params, "bwd/"))
    return np.concatenate([h_f, h_b], axis=1), (cache_f, cache_b)


def recurrent_backward(dout, cache, spec: RecurrentLayerSpec, params):
    cache_f, cache_b = cache
    H = spec.hidden_units
    dx, g = _cell_backward(dout[:, :H], cache_f, _sub(params, "fwd/"))
    grads = {f"fwd/{k}": v for k, v in g.items()}
    if spec.bidirectional:
        dx_b, g_b = _cell_backward(dout[:, H:], cache_b, _sub(params, "bwd/"))
        dx = dx + dx_b[:, ::-1]
        grads.update({f"bwd/{k}": v for k, v in g_b.items()})
    return dx, grads


# -- dropout and loss -------------------------------------------------------

def apply_dropout(x, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout. Returns ``(y, mask)``; the mask is None when inactive."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


BCE_EPSILON = 1e-7


def binary_cross_entropy(pred, label):
    p = np.clip(np.asarray(pred, dtype=np.float64), BCE_EPSILON, 1.0 - BCE_EPSILON)
    y = np.asarray(label, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def binary_cross_entropy_grad(pred, label):
    """d loss / d pred; zero where the clamp is active."""
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    p = np.clip(pred, BCE_EPSILON, 1.0 - BCE_EPSILON)
    g = -(y / p) + (1.0 - y) / (1.0 - p)
    return np.where((pred < BCE_EPSILON) | (pred > 1.0 - BCE_EPSILON), 0.0, g)

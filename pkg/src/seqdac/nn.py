"""Two-layer dense network with hand-written gradients, Adam, and a binary checkpoint format.

Parameters of an :class:`Mlp` live in one flat float64 vector; ``w1``, ``b1``,
``w2`` and ``b2`` are views into it. Several networks can share one larger
buffer, which lets a learner run a single Adam step over all of its nets.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity")

_MAGIC = b"SQNN"
_VERSION = 1
# magic, version, activation code, input_dim, hidden_dim, output_dim, value count
_HEADER = struct.Struct("<4sHHIIIQ")
_CRC = struct.Struct("<I")


class DecodeError(ValueError):
    """Raised when a serialized network cannot be decoded."""


class NonFiniteGradientError(FloatingPointError):
    """Raised when an optimizer step receives NaN or inf gradients."""


def param_count(input_dim: int, hidden_dim: int, output_dim: int) -> int:
    return hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim


class Mlp:
    """``y = W2 · act(W1 · x + b1) + b2`` for a single hidden layer.

    Inputs may be a single vector of shape ``(input_dim,)`` or a batch of
    shape ``(B, input_dim)``.
    """

    def __init__(
        self,
        input_dim: int,
        output_dim: int,
        hidden_dim: int = 64,
        *,
        activation: str = "relu",
        rng: np.random.Generator | None = None,
        params: np.ndarray | None = None,
    ):
        if min(input_dim, output_dim, hidden_dim) < 1:
            raise ValueError(
                f"dims must be positive, got {input_dim}x{hidden_dim}x{output_dim}"
            )
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.output_dim = int(output_dim)
        self.activation = activation

        size = param_count(self.input_dim, self.hidden_dim, self.output_dim)
        if params is None:
            params = np.zeros(size)
        elif params.shape != (size,) or params.dtype != np.float64:
            raise ValueError(f"params buffer must be float64 of shape ({size},)")
        self.params = params
        self._bind_views()
        if rng is not None:
            self.reset_parameters(rng)

    @property
    def size(self) -> int:
        return self.params.size

    def _bind_views(self) -> None:
        i, h, o = self.input_dim, self.hidden_dim, self.output_dim
        p = self.params
        a = h * i
        b = a + h
        c = b + o * h
        self.w1 = p[:a].reshape(h, i)
        self.b1 = p[a:b]
        self.w2 = p[b:c].reshape(o, h)
        self.b2 = p[c:]

    def reset_parameters(self, rng: np.random.Generator) -> None:
        """Uniform init in ±1/sqrt(fan_in) for every layer."""
        lim1 = 1.0 / np.sqrt(self.input_dim)
        lim2 = 1.0 / np.sqrt(self.hidden_dim)
        self.w1[...] = rng.uniform(-lim1, lim1, self.w1.shape)
        self.b1[...] = rng.uniform(-lim1, lim1, self.b1.shape)
        self.w2[...] = rng.uniform(-lim2, lim2, self.w2.shape)
        self.b2[...] = rng.uniform(-lim2, lim2, self.b2.shape)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[-1] != self.input_dim:
            raise ValueError(
                f"expected input with last dim {self.input_dim}, got shape {x.shape}"
            )
        return x

    def _hidden(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pre = x @ self.w1.T + self.b1
        if self.activation == "relu":
            return pre, np.maximum(pre, 0.0)
        return pre, pre

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        _, h = self._hidden(x)
        return h @ self.w2.T + self.b2

    __call__ = forward

    def backward(
        self, x: np.ndarray, grad_output: np.ndarray, out: np.ndarray | None = None
    ) -> np.ndarray:
        """Gradient of ``sum(grad_output * forward(x))`` w.r.t. the flat parameters.

        The forward pass is recomputed from ``x``. For batched input the
        gradients are summed over the batch. If ``out`` is given the result is
        written into it (it must have the shape of ``params``).
        """
        x = self._check_input(x)
        g = np.asarray(grad_output, dtype=np.float64)
        if g.shape[-1] != self.output_dim or g.ndim != x.ndim:
            raise ValueError(
                f"grad_output shape {g.shape} does not match output dim {self.output_dim}"
            )
        if out is None:
            out = np.empty_like(self.params)
        gw1, gb1, gw2, gb2 = self._split(out)

        pre, h = self._hidden(x)
        if x.ndim == 1:
            np.outer(g, h, out=gw2)
            gb2[...] = g
            gh = self.w2.T @ g
            if self.activation == "relu":
                gh = gh * (pre > 0.0)
            np.outer(gh, x, out=gw1)
            gb1[...] = gh
        else:
            np.matmul(g.T, h, out=gw2)
            g.sum(axis=0, out=gb2)
            gh = g @ self.w2
            if self.activation == "relu":
                gh *= pre > 0.0
            np.matmul(gh.T, x, out=gw1)
            gh.sum(axis=0, out=gb1)
        return out

    def _split(self, flat: np.ndarray):
        i, h, o = self.input_dim, self.hidden_dim, self.output_dim
        a = h * i
        b = a + h
        c = b + o * h
        return flat[:a].reshape(h, i), flat[a:b], flat[b:c].reshape(o, h), flat[c:]

    def copy(self) -> "Mlp":
        return Mlp(
            self.input_dim,
            self.output_dim,
            self.hidden_dim,
            activation=self.activation,
            params=self.params.copy(),
        )

    def load_from(self, other: "Mlp") -> None:
        if other.params.shape != self.params.shape:
            raise ValueError("shape mismatch")
        np.copyto(self.params, other.params)

    def __repr__(self) -> str:
        return (
            f"Mlp({self.input_dim}->{self.hidden_dim}->{self.output_dim}, "
            f"{self.activation})"
        )


def pack_nets(nets_dims, hidden_dim: int, rng: np.random.Generator | None, **kw):
    """Allocate one flat buffer and build an :class:`Mlp` view for each ``(in, out)`` pair."""
    sizes = [param_count(i, hidden_dim, o) for i, o in nets_dims]
    buf = np.zeros(sum(sizes))
    nets = []
    start = 0
    for (i, o), size in zip(nets_dims, sizes):
        nets.append(
            Mlp(i, o, hidden_dim, rng=rng, params=buf[start : start + size], **kw)
        )
        start += size
    return buf, nets


# -- optimizer ---------------------------------------------------------------


def clip_grad_norm(grads: np.ndarray, max_norm: float) -> float:
    """Scale ``grads`` in place so its L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = float(np.sqrt(np.dot(grads, grads)))
    if norm > max_norm:
        grads *= max_norm / norm
    return norm


@dataclass
class AdamState:
    size: int
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: np.ndarray = field(default=None, repr=False)
    second_moment: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.first_moment is None:
            self.first_moment = np.zeros(self.size)
        if self.second_moment is None:
            self.second_moment = np.zeros(self.size)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    max_grad_norm: float | None = None,
) -> np.ndarray:
    """Apply one bias-corrected Adam update to ``params`` in place.

    ``grads`` is clipped in place to ``max_grad_norm`` first when given.
    Non-finite gradients leave params and state untouched and raise
    :class:`NonFiniteGradientError`.
    """
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.first_moment.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradientError("non-finite gradient, update rejected")
    if max_grad_norm is not None:
        clip_grad_norm(grads, max_grad_norm)

    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    m, v = state.first_moment, state.second_moment
    m *= b1
    m += (1.0 - b1) * grads
    v *= b2
    v += (1.0 - b2) * (grads * grads)
    bc1 = 1.0 - b1**state.step_count
    bc2 = 1.0 - b2**state.step_count
    denom = np.sqrt(v / bc2)
    denom += state.epsilon
    params -= (state.learning_rate / bc1) * m / denom
    return params


class Adam:
    """Adam bound to one flat parameter vector."""

    def __init__(self, params: np.ndarray, lr: float = 1e-4, max_grad_norm: float | None = 10.0):
        self.params = params
        self.state = AdamState(params.size, learning_rate=lr)
        self.max_grad_norm = max_grad_norm

    def step(self, grads: np.ndarray) -> None:
        adam_step(self.params, grads, self.state, self.max_grad_norm)


# -- serialization -------------------------------------------------------------


def serialize(net: Mlp) -> bytes:
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        ACTIVATIONS.index(net.activation),
        net.input_dim,
        net.hidden_dim,
        net.output_dim,
        net.size,
    )
    body = header + net.params.astype("<f8").tobytes()
    return body + _CRC.pack(zlib.crc32(body))


def deserialize(data: bytes) -> Mlp:
    if len(data) < _HEADER.size + _CRC.size:
        raise DecodeError("stream too short for header")
    magic, version, act, i, h, o, count = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise DecodeError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise DecodeError(f"unsupported version {version}")
    if act >= len(ACTIVATIONS):
        raise DecodeError(f"unknown activation code {act}")
    expected = _HEADER.size + 8 * count + _CRC.size
    if len(data) != expected:
        raise DecodeError(f"expected {expected} bytes, got {len(data)}")
    if count != param_count(i, h, o):
        raise DecodeError(f"value count {count} inconsistent with dims {i}x{h}x{o}")
    body = data[: -_CRC.size]
    (crc,) = _CRC.unpack_from(data, len(body))
    if zlib.crc32(body) != crc:
        raise DecodeError("checksum mismatch")
    values = np.frombuffer(body, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return Mlp(i, o, h, activation=ACTIVATIONS[act], params=values)

"""Minimal reverse-mode differentiable core for the walker agent.

Everything runs in float64 on numpy arrays: the network is tiny, so
determinism and gradient-checkability win over speed.  The op set is
exactly what the agent needs (LSTM cell, affine layers, ReLU, softmax,
entropy, categorical sampling) plus an AdamW optimizer with decoupled
weight decay and global-norm gradient clipping.  No broadcasting beyond
scalars, no GPU, no general autodiff.

Tensors built outside a ``no_grad()`` block record their provenance; calling
:func:`backward` on a scalar loss fills ``.grad`` on every reachable
parameter and frees the graph.
"""

from __future__ import annotations

import contextvars
import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

_GRAD_ENABLED: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "causalwalk_grad_enabled", default=True
)


class no_grad:
    """Context manager disabling graph recording (thread/context local)."""

    def __enter__(self):
        self._token = _GRAD_ENABLED.set(False)
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED.reset(self._token)
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


class Tensor:
    """A float64 array with optional gradient tracking.

    ``requires_grad`` marks leaves (parameters).  Intermediate tensors
    track parents and a vector-Jacobian closure; both are dropped once
    :func:`backward` has consumed the graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_vjp", "_freed")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self._freed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __matmul__(self, other):
        return matmul(self, _coerce(other))


def _coerce(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    """Create an op result, recording the graph only when it matters."""
    if grad_enabled() and any(p.requires_grad or p._parents for p in parents):
        out = Tensor(data)
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
        return out
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Only scalar-vs-array broadcasting is supported by the op set.
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum())
    raise ValueError(f"cannot reduce gradient of shape {grad.shape} to {shape}")


# -- elementwise / structural ops ---------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return _node(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return _node(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    return _node(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix-vector or matrix-matrix product (2-D left operand)."""
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ValueError(f"unsupported matmul shapes {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        if b.data.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _node(out, (a, b), vjp)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _node(t, (a,), lambda g: (g * (1.0 - t * t),))


def log(a: Tensor) -> Tensor:
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def tensor_sum(a: Tensor) -> Tensor:
    return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.full_like(a.data, float(g)),))


def narrow(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice of a 1-D tensor."""
    if a.data.ndim != 1:
        raise ValueError("narrow expects a 1-D tensor")
    out = a.data[start:stop]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)

    return _node(out.copy(), (a,), vjp)


def get(a: Tensor, index: int) -> Tensor:
    """Scalar element of a 1-D tensor."""
    if a.data.ndim != 1:
        raise ValueError("get expects a 1-D tensor")

    def vjp(g):
        full = np.zeros_like(a.data)
        full[index] = float(g)
        return (full,)

    return _node(np.asarray(a.data[index]), (a,), vjp)


# -- distribution ops ----------------------------------------------------

def softmax(logits: Tensor) -> Tensor:
    """Numerically stable softmax over a 1-D logit vector."""
    x = logits.data
    if x.ndim != 1 or x.size < 1:
        raise ValueError("softmax expects a non-empty 1-D tensor")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax requires finite logits")
    shifted = x - x.max()
    e = np.exp(shifted)
    p = e / e.sum()

    def vjp(g):
        return (p * (g - float(np.dot(g, p))),)

    return _node(p, (logits,), vjp)


def log_softmax(logits: Tensor) -> Tensor:
    x = logits.data
    if x.ndim != 1 or x.size < 1:
        raise ValueError("log_softmax expects a non-empty 1-D tensor")
    shifted = x - x.max()
    lse = np.log(np.exp(shifted).sum())
    out = shifted - lse

    def vjp(g):
        return (g - np.exp(out) * g.sum(),)

    return _node(out, (logits,), vjp)


def entropy(probs) -> Tensor:
    """Shannon entropy −Σ p log p (natural log, 0·log 0 = 0) of a distribution.

    Accepts a probability Tensor (gradient flows through) or a plain array.
    """
    t = _coerce(probs)
    p = t.data
    if p.ndim != 1 or p.size < 1:
        raise ValueError("entropy expects a non-empty 1-D distribution")
    if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("entropy expects a valid probability distribution")
    pos = p > 0.0
    logp = np.zeros_like(p)
    logp[pos] = np.log(p[pos])
    h = -float(np.dot(p, logp))

    def vjp(g):
        grad = np.zeros_like(p)
        grad[pos] = -float(g) * (logp[pos] + 1.0)
        return (grad,)

    return _node(np.asarray(h), (t,), vjp)


def sample_categorical(probs, rng: np.random.Generator) -> int:
    """Draw an index from a categorical distribution via inverse CDF.

    Bit-deterministic for a fixed generator state; no numpy internals
    whose tie-breaking could vary between platforms.
    """
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("sample_categorical expects a 1-D distribution")
    if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("sample_categorical expects a valid probability distribution")
    cdf = np.cumsum(p)
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, p.size - 1)


# -- backward pass -------------------------------------------------------

def backward(loss: Tensor, retain_graph: bool = False) -> dict[Tensor, np.ndarray]:
    """Reverse-mode pass from a scalar loss.

    Accumulates into ``.grad`` of every ``requires_grad`` leaf and returns
    the leaf→gradient mapping.  The graph is freed afterwards unless
    ``retain_graph`` is set; a second backward through a freed graph raises.
    """
    if loss.data.shape != ():
        raise ValueError("backward expects a scalar loss")
    if loss._freed:
        raise RuntimeError("backward through a freed graph")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node._freed:
            raise RuntimeError("backward through a freed graph")
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.asarray(1.0)}
    leaf_grads: dict[Tensor, np.ndarray] = {}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is not None:
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg
        elif node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
            leaf_grads[node] = node.grad
    if not retain_graph:
        for node in topo:
            if node._vjp is not None:
                node._vjp = None
                node._parents = ()
                node._freed = True
    return leaf_grads


# -- gradient clipping and AdamW ------------------------------------------

def global_norm(grads: Mapping[str, np.ndarray] | Iterable[np.ndarray]) -> float:
    arrays = grads.values() if isinstance(grads, Mapping) else grads
    total = 0.0
    for g in arrays:
        total += float(np.sum(np.square(g)))
    return float(np.sqrt(total))


def clip_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale the whole gradient set so its global L2 norm is ≤ ``max_norm``."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return {k: np.array(v, copy=True) for k, v in grads.items()}
    scale = max_norm / norm
    return {k: v * scale for k, v in grads.items()}


@dataclass
class AdamWState:
    """Per-parameter-group AdamW accumulators (decoupled weight decay)."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamWState,
) -> AdamWState:
    """One AdamW update in place; decay multiplies parameters directly."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, grad in grads.items():
        p = params[name]
        if p.data.shape != grad.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v
        if state.weight_decay:
            p.data *= 1.0 - state.lr * state.weight_decay
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state


# -- LSTM cell -------------------------------------------------------------

@dataclass
class LstmWeights:
    """Single-layer LSTM cell weights, gates stacked in (i, f, g, o) order."""

    wx: Tensor  # (4*hidden, input)
    wh: Tensor  # (4*hidden, hidden)
    b: Tensor  # (4*hidden,)

    @property
    def hidden_size(self) -> int:
        return self.wh.data.shape[1]


def lstm_step(
    weights: LstmWeights, h_prev: Tensor, c_prev: Tensor, x: Tensor
) -> tuple[Tensor, Tensor]:
    """Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate."""
    n = weights.hidden_size
    if h_prev.shape != (n,) or c_prev.shape != (n,):
        raise ValueError("carry shape does not match the LSTM hidden size")
    if x.shape != (weights.wx.data.shape[1],):
        raise ValueError("input shape does not match the LSTM input size")
    z = weights.wx @ x + weights.wh @ h_prev + weights.b
    i = sigmoid(narrow(z, 0, n))
    f = sigmoid(narrow(z, n, 2 * n))
    g = tanh(narrow(z, 2 * n, 3 * n))
    o = sigmoid(narrow(z, 3 * n, 4 * n))
    c = f * c_prev + i * g
    h = o * tanh(c)
    return h, c


# -- initialization and rng streams ----------------------------------------

def init_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def derive_rngs(seed: int, names: Iterable[str]) -> dict[str, np.random.Generator]:
    """Named, independent generator streams from one 64-bit seed."""
    names = list(names)
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


# -- checkpoint format ------------------------------------------------------

_CHECKPOINT_MAGIC = b"CWCHKPT1"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: Mapping[str, Tensor], meta: Mapping[str, object]) -> None:
    """Write a versioned header plus named little-endian float64 blobs."""
    header = dict(meta)
    header["format_version"] = CHECKPOINT_VERSION
    header["params"] = [
        {"name": name, "shape": list(t.data.shape)} for name, t in params.items()
    ]
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for t in params.values():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, object]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a causalwalk checkpoint")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version")
        params: dict[str, np.ndarray] = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            params[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return params, header


def digest_strings(items: Iterable[str]) -> str:
    """Short stable digest used to fingerprint the entity vocabulary."""
    h = hashlib.sha256()
    for item in items:
        h.update(item.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]

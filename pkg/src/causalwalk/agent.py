"""Actor-critic network: shared LSTM history encoder plus two heads.

The policy head scores the variable-size action set by projecting the
encoded history back into action-embedding space and taking the softmax of
the action-matrix product; the value head maps the same encoding to a
scalar.  Both heads backpropagate into the shared encoder: theta covers the
encoder plus the policy head, psi the encoder plus the value head.

A feedforward ablation replaces the LSTM with a ReLU affine layer over the
same [question ; entity] input, behind identical interfaces.

Parameters are immutable during rollout collection; updates are applied by
a single training coordinator between batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import nn
from .env import Action, EnvState

Carry = tuple  # (h, c) pair, Tensor-valued while a graph is being recorded


@dataclass
class AgentConfig:
    """Training and decoding configuration; defaults are the reference setup."""

    d: int = 100  # word-embedding dimension
    h: int = 2048  # feedforward head hidden dimension
    T: int = 2  # rollout length (hop count)
    gamma: float = 0.99
    lam: float = 0.95
    entropy_beta: float = 0.01
    lr: float = 1e-4
    weight_decay: float = 0.01
    grad_clip: float = 0.5
    steps: int = 2000
    batch_size: int = 128
    supervised_steps: int = 300
    supervised_batch: int = 64
    alpha: float = 0.8
    beam_width: int = 50
    seed: int = 0
    use_lstm: bool = True
    use_critic: bool = True
    out_degree_cap: int | None = None
    log_every: int = 10
    eval_every: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1 or not 0 < self.lam <= 1:
            raise ValueError("gamma and lambda must lie in (0, 1]")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.entropy_beta < 0:
            raise ValueError("entropy_beta must be >= 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, values: dict) -> "AgentConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})

    def override(self, **kwargs) -> "AgentConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass
class AgentParams:
    """All learnable weights, with the theta/psi partition over shared encoder."""

    d: int
    h: int
    use_lstm: bool
    tensors: dict[str, nn.Tensor] = field(default_factory=dict)

    ENCODER_LSTM = ("lstm_wx", "lstm_wh", "lstm_b")
    ENCODER_FF = ("ff_w", "ff_b")
    POLICY = ("policy_w1", "policy_w2")
    VALUE = ("value_w3", "value_w4")

    @property
    def encoder_names(self) -> tuple[str, ...]:
        return self.ENCODER_LSTM if self.use_lstm else self.ENCODER_FF

    @property
    def theta_names(self) -> tuple[str, ...]:
        return self.encoder_names + self.POLICY

    @property
    def psi_names(self) -> tuple[str, ...]:
        return self.encoder_names + self.VALUE

    def named(self, names: Sequence[str] | None = None) -> dict[str, nn.Tensor]:
        if names is None:
            return dict(self.tensors)
        return {n: self.tensors[n] for n in names}

    def lstm(self) -> nn.LstmWeights:
        return nn.LstmWeights(
            wx=self.tensors["lstm_wx"],
            wh=self.tensors["lstm_wh"],
            b=self.tensors["lstm_b"],
        )

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self) -> "AgentParams":
        clone = {
            name: nn.Tensor(t.data.copy(), requires_grad=True, name=name)
            for name, t in self.tensors.items()
        }
        return AgentParams(d=self.d, h=self.h, use_lstm=self.use_lstm, tensors=clone)


def init_params(config: AgentConfig, seed: int | None = None) -> AgentParams:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, zero biases.

    The LSTM forget-gate bias starts at 1 so early training does not wipe
    the carry.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed if seed is None else seed))
    d, h = config.d, config.h
    hidden = 2 * d
    tensors: dict[str, nn.Tensor] = {}

    def param(name: str, shape: tuple[int, ...], fan_in: int):
        tensors[name] = nn.Tensor(nn.init_uniform(shape, fan_in, rng), True, name)

    if config.use_lstm:
        param("lstm_wx", (4 * hidden, hidden), hidden)
        param("lstm_wh", (4 * hidden, hidden), hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        tensors["lstm_b"] = nn.Tensor(b, True, "lstm_b")
    else:
        param("ff_w", (hidden, hidden), hidden)
        tensors["ff_b"] = nn.Tensor(np.zeros(hidden), True, "ff_b")
    param("policy_w1", (h, hidden), hidden)
    param("policy_w2", (hidden, h), h)
    param("value_w3", (h, hidden), hidden)
    param("value_w4", (1, h), h)
    return AgentParams(d=d, h=h, use_lstm=config.use_lstm, tensors=tensors)


def encode_history(
    params: AgentParams, carry: Carry, q_embed: np.ndarray, e_t_embed: np.ndarray
) -> Carry:
    """Advance the history encoder with the [question ; entity] input."""
    x = nn.Tensor(np.concatenate([q_embed, e_t_embed]))
    h_prev, c_prev = carry
    if not isinstance(h_prev, nn.Tensor):
        h_prev = nn.Tensor(h_prev)
    if not isinstance(c_prev, nn.Tensor):
        c_prev = nn.Tensor(c_prev)
    if params.use_lstm:
        return nn.lstm_step(params.lstm(), h_prev, c_prev, x)
    h = nn.relu(params.tensors["ff_w"] @ x + params.tensors["ff_b"])
    return h, c_prev


def _history_of(params: AgentParams, state_or_carry) -> nn.Tensor:
    if isinstance(state_or_carry, EnvState):
        carry = encode_history(
            params, state_or_carry.history, state_or_carry.q_embed, state_or_carry.e_t_embed
        )
        return carry[0]
    h = state_or_carry[0]
    return h if isinstance(h, nn.Tensor) else nn.Tensor(h)


def policy_logits(
    params: AgentParams, state_or_carry, actions: Sequence[Action]
) -> nn.Tensor:
    """Unnormalized action scores A_t (W2 ReLU(W1 h_t)).

    Accepts either an EnvState (the history is encoded on the fly) or a
    carry already produced by :func:`encode_history`.
    """
    if len(actions) < 1:
        raise ValueError("action set must be non-empty")
    h_t = _history_of(params, state_or_carry)
    action_matrix = nn.Tensor(np.stack([a.embed for a in actions]))
    hidden = nn.relu(params.tensors["policy_w1"] @ h_t)
    return action_matrix @ (params.tensors["policy_w2"] @ hidden)


def policy_distribution(
    params: AgentParams, state_or_carry, actions: Sequence[Action]
) -> nn.Tensor:
    """Categorical distribution over the state's actions."""
    return nn.softmax(policy_logits(params, state_or_carry, actions))


def value(params: AgentParams, state_or_carry) -> nn.Tensor:
    """Scalar estimate of the future reward from this state."""
    h_t = _history_of(params, state_or_carry)
    hidden = nn.relu(params.tensors["value_w3"] @ h_t)
    return nn.get(params.tensors["value_w4"] @ hidden, 0)


class NetworkPolicy:
    """Inference-time view of the agent: no graph recording, numpy outputs.

    Implements the decoding protocol used by the search strategies:
    ``initial_carry`` / ``advance`` / ``distribution``.
    """

    def __init__(self, params: AgentParams):
        self.params = params

    def initial_carry(self) -> Carry:
        hidden = 2 * self.params.d
        return np.zeros(hidden), np.zeros(hidden)

    def advance(self, carry: Carry, state: EnvState) -> Carry:
        with nn.no_grad():
            h, c = encode_history(self.params, carry, state.q_embed, state.e_t_embed)
        return h.data, c.data

    def distribution(self, carry: Carry, state: EnvState, actions: Sequence[Action]) -> np.ndarray:
        with nn.no_grad():
            probs = policy_distribution(self.params, carry, actions)
        return probs.data


def save_checkpoint(path, params: AgentParams, config: AgentConfig, entity_digest: str, entity_count: int) -> None:
    meta = {
        "d": params.d,
        "h": params.h,
        "use_lstm": params.use_lstm,
        "entity_count": entity_count,
        "entity_hash": entity_digest,
        "config": config.to_dict(),
    }
    nn.save_checkpoint(path, params.named(), meta)


def load_checkpoint(path) -> tuple[AgentParams, dict]:
    arrays, meta = nn.load_checkpoint(path)
    tensors = {
        name: nn.Tensor(arr, requires_grad=True, name=name) for name, arr in arrays.items()
    }
    params = AgentParams(
        d=int(meta["d"]), h=int(meta["h"]), use_lstm=bool(meta["use_lstm"]), tensors=tensors
    )
    return params, meta

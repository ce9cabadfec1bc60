import numpy as np
import pytest

from causalwalk import nn
from causalwalk.agent import (
    AgentConfig,
    NetworkPolicy,
    encode_history,
    init_params,
    load_checkpoint,
    policy_distribution,
    policy_logits,
    save_checkpoint,
    value,
)
from causalwalk.env import Action, Environment, make_question


def small_config(**kw):
    base = dict(d=8, h=16, T=3, seed=0)
    base.update(kw)
    return AgentConfig(**base)


def zero_carry(d):
    return np.zeros(2 * d), np.zeros(2 * d)


def fake_actions(rng, n, d):
    return [
        Action(kind="move", embed=rng.normal(size=2 * d), edge=None) for _ in range(n)
    ]


# -- init ---------------------------------------------------------------------


def test_init_deterministic_under_seed():
    a = init_params(small_config(), seed=7)
    b = init_params(small_config(), seed=7)
    for name in a.tensors:
        np.testing.assert_array_equal(a.tensors[name].data, b.tensors[name].data)


def test_init_differs_across_seeds():
    a = init_params(small_config(), seed=7)
    b = init_params(small_config(), seed=8)
    assert any(
        not np.array_equal(a.tensors[n].data, b.tensors[n].data) for n in a.tensors
    )


def test_init_shapes_match_declared_layout():
    config = AgentConfig(d=100, h=2048)
    params = init_params(config)
    hidden = 200
    assert params.tensors["lstm_wx"].shape == (4 * hidden, hidden)
    assert params.tensors["lstm_wh"].shape == (4 * hidden, hidden)
    assert params.tensors["lstm_b"].shape == (4 * hidden,)
    assert params.tensors["policy_w1"].shape == (2048, hidden)
    assert params.tensors["policy_w2"].shape == (hidden, 2048)
    assert params.tensors["value_w3"].shape == (2048, hidden)
    assert params.tensors["value_w4"].shape == (1, 2048)
    assert set(params.theta_names) == {"lstm_wx", "lstm_wh", "lstm_b", "policy_w1", "policy_w2"}
    assert set(params.psi_names) == {"lstm_wx", "lstm_wh", "lstm_b", "value_w3", "value_w4"}


def test_forget_gate_bias_starts_at_one():
    params = init_params(small_config())
    hidden = 16
    b = params.tensors["lstm_b"].data
    np.testing.assert_array_equal(b[hidden : 2 * hidden], 1.0)
    np.testing.assert_array_equal(b[:hidden], 0.0)


# -- encode_history -----------------------------------------------------------


def test_encode_zero_weights_gives_zero_hidden():
    params = init_params(small_config())
    for name in params.ENCODER_LSTM:
        params.tensors[name].data[:] = 0.0
    rng = np.random.default_rng(0)
    h, c = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    np.testing.assert_allclose(h.data, 0.0)


def test_encode_deterministic():
    params = init_params(small_config())
    rng = np.random.default_rng(1)
    q, e = rng.normal(size=8), rng.normal(size=8)
    h1, c1 = encode_history(params, zero_carry(8), q, e)
    h2, c2 = encode_history(params, zero_carry(8), q, e)
    np.testing.assert_array_equal(h1.data, h2.data)
    np.testing.assert_array_equal(c1.data, c2.data)


def test_encode_depends_on_visit_order():
    params = init_params(small_config(), seed=3)
    rng = np.random.default_rng(2)
    q = rng.normal(size=8)
    e1, e2 = rng.normal(size=8), rng.normal(size=8)

    def run(order):
        carry = zero_carry(8)
        for e in order:
            carry = encode_history(params, carry, q, e)
        return carry[0].data

    assert not np.allclose(run([e1, e2]), run([e2, e1]))


# -- heads ----------------------------------------------------------------------


def test_policy_distribution_matches_action_count():
    params = init_params(small_config())
    rng = np.random.default_rng(4)
    carry = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    for n in (1, 2, 5, 9):
        probs = policy_distribution(params, carry, fake_actions(rng, n, 8))
        assert probs.shape == (n,)
        assert probs.data.sum() == pytest.approx(1.0)


def test_duplicate_action_embeddings_get_equal_probability():
    params = init_params(small_config())
    rng = np.random.default_rng(5)
    carry = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    embed = rng.normal(size=16)
    actions = [Action(kind="move", embed=embed.copy(), edge=None) for _ in range(3)]
    probs = policy_distribution(params, carry, actions).data
    assert probs[0] == pytest.approx(probs[1]) == pytest.approx(probs[2])


def test_value_zero_weights_is_zero_and_scalar():
    params = init_params(small_config())
    params.tensors["value_w3"].data[:] = 0.0
    params.tensors["value_w4"].data[:] = 0.0
    rng = np.random.default_rng(6)
    carry = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    v = value(params, carry)
    assert v.shape == ()
    assert v.item() == 0.0


def test_policy_accepts_env_state(fig1_env, fig1_question):
    params = init_params(small_config())
    state = fig1_env.reset(fig1_question)
    actions = fig1_env.action_space(state)
    probs = policy_distribution(params, state, actions)
    assert probs.shape == (len(actions),)
    v = value(params, state)
    assert v.shape == ()


# -- gradient flow into the shared encoder --------------------------------------


def _lstm_grad_norm(params):
    return sum(
        float(np.abs(params.tensors[n].grad).sum())
        for n in params.ENCODER_LSTM
        if params.tensors[n].grad is not None
    )


def test_policy_loss_reaches_lstm():
    params = init_params(small_config(), seed=9)
    rng = np.random.default_rng(7)
    carry = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    logits = policy_logits(params, carry, fake_actions(rng, 4, 8))
    nn.backward(nn.get(nn.log_softmax(logits), 0))
    assert _lstm_grad_norm(params) > 0


def test_value_loss_reaches_lstm():
    params = init_params(small_config(), seed=9)
    rng = np.random.default_rng(8)
    carry = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    nn.backward(value(params, carry))
    assert _lstm_grad_norm(params) > 0


# -- feedforward ablation ---------------------------------------------------------


def test_feedforward_mode_has_identical_interfaces():
    config = small_config(use_lstm=False)
    params = init_params(config)
    assert set(params.encoder_names) == {"ff_w", "ff_b"}
    rng = np.random.default_rng(10)
    carry = encode_history(params, zero_carry(8), rng.normal(size=8), rng.normal(size=8))
    probs = policy_distribution(params, carry, fake_actions(rng, 3, 8))
    assert probs.shape == (3,)
    assert value(params, carry).shape == ()


def test_feedforward_mode_ignores_history():
    config = small_config(use_lstm=False)
    params = init_params(config)
    rng = np.random.default_rng(11)
    q, e = rng.normal(size=8), rng.normal(size=8)
    h1, _ = encode_history(params, zero_carry(8), q, e)
    h2, _ = encode_history(params, (rng.normal(size=16), rng.normal(size=16)), q, e)
    np.testing.assert_array_equal(h1.data, h2.data)


# -- inference wrapper and checkpoints ---------------------------------------------


def test_network_policy_records_no_graph(fig1_env, fig1_question):
    params = init_params(small_config())
    policy = NetworkPolicy(params)
    state = fig1_env.reset(fig1_question)
    carry = policy.advance(policy.initial_carry(), state)
    probs = policy.distribution(carry, state, fig1_env.action_space(state))
    assert isinstance(probs, np.ndarray)
    assert isinstance(carry[0], np.ndarray)


def test_checkpoint_roundtrip(tmp_path, fig1_graph):
    config = small_config()
    params = init_params(config, seed=13)
    path = tmp_path / "agent.bin"
    save_checkpoint(path, params, config, fig1_graph.entity_digest(), len(fig1_graph))
    loaded, meta = load_checkpoint(path)
    assert meta["entity_count"] == len(fig1_graph)
    assert meta["entity_hash"] == fig1_graph.entity_digest()
    assert loaded.use_lstm == params.use_lstm
    for name in params.tensors:
        np.testing.assert_array_equal(loaded.tensors[name].data, params.tensors[name].data)

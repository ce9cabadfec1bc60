import numpy as np
import pytest

from causalwalk.env import Environment, GraphEmbedder, LinkError, make_question
from causalwalk.graph import CausalGraph, link
from conftest import fig1_records, vocab_for_graph


def test_make_question_links_both_phrases(fig1_graph, fig1_embedder):
    q = make_question(
        fig1_graph, fig1_embedder, "Does pneumonia cause anemia?", "pneumonia", "anemia"
    )
    assert q.e_c == link(fig1_graph, "pneumonia")
    assert q.e_e == link(fig1_graph, "anemia")
    assert q.q_embed.shape == (fig1_embedder.dim,)


def test_make_question_rejects_unlinkable(fig1_graph, fig1_embedder):
    with pytest.raises(LinkError):
        make_question(fig1_graph, fig1_embedder, "q", "zebra stampede", "anemia")


def test_reset_starts_at_cause_with_zero_history(fig1_env, fig1_question):
    state = fig1_env.reset(fig1_question)
    assert state.e_t == fig1_question.e_c
    assert state.t == 0
    h, c = state.history
    np.testing.assert_array_equal(h, 0.0)
    np.testing.assert_array_equal(c, 0.0)


def test_reset_is_deterministic(fig1_env, fig1_question):
    a = fig1_env.reset(fig1_question)
    b = fig1_env.reset(fig1_question)
    assert a.e_t == b.e_t and a.t == b.t
    np.testing.assert_array_equal(a.e_t_embed, b.e_t_embed)


def test_action_space_fig1_counts(fig1_env, fig1_question):
    state = fig1_env.reset(fig1_question)
    actions = fig1_env.action_space(state)
    assert len(actions) == 4  # 3 MOVE + 1 STAY
    assert all(not a.is_stay for a in actions[:-1])
    assert actions[-1].is_stay


def test_action_space_sink_is_stay_only(fig1_graph, fig1_env, fig1_embedder):
    q = make_question(fig1_graph, fig1_embedder, "q", "grief", "pneumonia")
    actions = fig1_env.action_space(fig1_env.reset(q))
    assert len(actions) == 1 and actions[0].is_stay


def test_action_space_order_stable(fig1_env, fig1_question):
    state = fig1_env.reset(fig1_question)
    a = [ac.edge.dst if ac.edge else None for ac in fig1_env.action_space(state)]
    b = [ac.edge.dst if ac.edge else None for ac in fig1_env.action_space(state)]
    assert a == b


def test_action_embeddings_follow_definitions(fig1_env, fig1_question, fig1_embedder):
    d = fig1_env.dim
    state = fig1_env.reset(fig1_question)
    for action in fig1_env.action_space(state):
        assert action.embed.shape == (2 * d,)
        if action.is_stay:
            np.testing.assert_array_equal(action.embed[:d], np.zeros(d))
            np.testing.assert_array_equal(action.embed[d:], state.e_t_embed)
        else:
            np.testing.assert_array_equal(
                action.embed[:d], fig1_embedder.sentence(action.edge.sentence)
            )
            np.testing.assert_array_equal(
                action.embed[d:], fig1_embedder.entity(action.edge.dst)
            )


def test_step_move_and_terminal_rewards(fig1_graph, fig1_embedder):
    env = Environment(fig1_graph, fig1_embedder, T=3)
    q = make_question(fig1_graph, fig1_embedder, "q", "pneumonia", "anemia")
    state = env.reset(q)
    sepsis = link(fig1_graph, "sepsis")
    move = next(a for a in env.action_space(state) if a.edge and a.edge.dst == sepsis)
    state, reward = env.step(state, move)
    assert state.e_t == sepsis and reward == 0.0

    kidney = link(fig1_graph, "kidney failure")
    move = next(a for a in env.action_space(state) if a.edge and a.edge.dst == kidney)
    state, reward = env.step(state, move)
    assert reward == 0.0

    anemia = link(fig1_graph, "anemia")
    move = next(a for a in env.action_space(state) if a.edge and a.edge.dst == anemia)
    state, reward = env.step(state, move)
    assert state.e_t == anemia and state.t == 3
    assert reward == 1.0


def test_stay_at_target_at_final_step_scores(fig1_graph, fig1_embedder):
    env = Environment(fig1_graph, fig1_embedder, T=1)
    q = make_question(fig1_graph, fig1_embedder, "q", "anemia", "anemia")
    state = env.reset(q)
    stay = env.action_space(state)[-1]
    state, reward = env.step(state, stay)
    assert reward == 1.0 and state.e_t == q.e_e


def test_move_to_non_target_at_final_step_scores_zero(fig1_graph, fig1_embedder):
    env = Environment(fig1_graph, fig1_embedder, T=1)
    q = make_question(fig1_graph, fig1_embedder, "q", "pneumonia", "anemia")
    state = env.reset(q)
    move = env.action_space(state)[0]
    _, reward = env.step(state, move)
    assert reward == 0.0


def test_stay_is_idempotent_on_entity(fig1_env, fig1_question):
    state = fig1_env.reset(fig1_question)
    for _ in range(fig1_env.T):
        stay = fig1_env.action_space(state)[-1]
        state, _ = fig1_env.step(state, stay)
        assert state.e_t == fig1_question.e_c


def test_foreign_action_rejected(fig1_graph, fig1_embedder):
    env = Environment(fig1_graph, fig1_embedder, T=3)
    q = make_question(fig1_graph, fig1_embedder, "q", "pneumonia", "anemia")
    q2 = make_question(fig1_graph, fig1_embedder, "q", "bacteria", "anemia")
    foreign = env.action_space(env.reset(q2))[0]
    with pytest.raises(ValueError):
        env.step(env.reset(q), foreign)


def test_rollout_reward_sum_is_binary(fig1_graph, fig1_embedder):
    # random walks: total reward in {0, 1}, 1 iff the walk ends on the effect
    env = Environment(fig1_graph, fig1_embedder, T=3)
    q = make_question(fig1_graph, fig1_embedder, "q", "pneumonia", "anemia")
    rng = np.random.default_rng(5)
    for _ in range(50):
        state = env.reset(q)
        total = 0.0
        for _ in range(env.T):
            actions = env.action_space(state)
            state, reward = env.step(state, actions[rng.integers(len(actions))])
            total += reward
        assert total in (0.0, 1.0)
        assert (total == 1.0) == (state.e_t == q.e_e)


def test_episode_length_capped(fig1_env, fig1_question):
    state = fig1_env.reset(fig1_question)
    for _ in range(fig1_env.T):
        state, _ = fig1_env.step(state, fig1_env.action_space(state)[-1])
    with pytest.raises(ValueError):
        fig1_env.step(state, fig1_env.action_space(state)[-1])


def test_out_degree_cap_truncates_highest_ids(fig1_graph, fig1_embedder):
    env = Environment(fig1_graph, fig1_embedder, T=2, out_degree_cap=2)
    q = make_question(fig1_graph, fig1_embedder, "q", "pneumonia", "anemia")
    actions = env.action_space(env.reset(q))
    assert len(actions) == 3  # 2 MOVE + STAY
    kept = [a.edge.dst for a in actions if a.edge]
    full = [e.dst for e in fig1_graph.adjacency[q.e_c]]
    assert kept == full[:2]

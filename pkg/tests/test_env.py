from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from dialign.env import (
    EPISODE_SCHEMA_VERSION,
    AgentAction,
    DialogueEnv,
    EvidenceOracleAgent,
    RewardBreakdown,
    discounted_return,
    make_response,
    observation_dim,
    observe,
    read_episodes,
    replay_rewards,
    rollout,
    write_episodes,
)
from dialign.errors import ProtocolError
from dialign.profiles import Profile, SlotMatcher, SlotSchema
from dialign.user_sim import ConflictSpec, UserConfig

_POOLS = json.loads(
    (Path(__file__).resolve().parents[1] / "src" / "dialign" / "data" / "value_pools.json").read_text()
)["aloe"]


def _profile(n: int = 10, rng_seed: int = 0) -> Profile:
    schema = SlotSchema.aloe()
    rng = random.Random(rng_seed)
    entries = {slot: rng.choice(_POOLS[slot]) for slot in schema.slots[:n]}
    return Profile(schema=schema, entries=entries)


def _env(horizon: int = 10, style_seed: int = 0, conflict: ConflictSpec | None = None) -> DialogueEnv:
    config = UserConfig(
        profile=_profile(rng_seed=style_seed),
        horizon=horizon,
        conflict=conflict,
        style_seed=style_seed,
    )
    return DialogueEnv(config, matcher=SlotMatcher(kind="exact"))


# --- protocol -------------------------------------------------------------------


def test_step_before_reset_raises() -> None:
    env = _env()
    action = AgentAction(
        response=make_response([], continues=True),
        estimate=Profile(schema=SlotSchema.aloe(), entries={}),
    )
    with pytest.raises(ProtocolError):
        env.step(action)


def test_episode_runs_exactly_horizon_steps_then_refuses_more() -> None:
    env = _env(horizon=5)
    env.reset()
    agent = EvidenceOracleAgent()
    steps = 0
    while not env.done:
        action = agent.act(env.view())
        _, _, done, _ = env.step(action)
        steps += 1
    assert steps == 5
    with pytest.raises(ProtocolError):
        env.step(action)


def test_turns_alternate_user_then_agent() -> None:
    env = _env(horizon=6)
    state = env.reset()
    assert len(state.user_turns) == 1
    assert len(state.agent_turns) == 0
    agent = EvidenceOracleAgent()
    turn = 0
    while not env.done:
        turn += 1
        state, _, done, _ = env.step(agent.act(env.view()))
        assert len(state.agent_turns) == turn
        # The user replies after every agent turn except the last.
        expected_user_turns = turn + (0 if done else 1)
        assert len(state.user_turns) == expected_user_turns


def test_reward_is_computed_before_the_next_user_turn() -> None:
    # The reward for turn t must not depend on evidence from turn t+1: an agent
    # whose estimate copies everything seen so far scores exactly the overlap
    # of already-seen slots.
    env = _env(horizon=4)
    env.reset()
    agent = EvidenceOracleAgent()
    truth_size = len(env.config.profile)
    seen_counts = []
    rewards = []
    while not env.done:
        view = env.view()
        seen_counts.append(len(view.seen_values))
        _, breakdown, _, _ = env.step(agent.act(view))
        rewards.append(breakdown.profile)
    for seen, reward in zip(seen_counts, rewards):
        expected = 2.0 * seen / (seen + truth_size) if seen else 0.0
        assert reward == pytest.approx(expected)


# --- reward bookkeeping ------------------------------------------------------------


def test_breakdown_total_is_exact_sum() -> None:
    breakdown = RewardBreakdown(profile=0.25, response=1.0, total=1.25)
    assert breakdown.total == breakdown.profile + breakdown.response
    with pytest.raises(ValueError):
        RewardBreakdown(profile=0.25, response=1.0, total=1.0)


def test_oracle_agent_profile_curve_matches_closed_form() -> None:
    # With one reveal per turn from turn 2, the oracle estimate holds t-1 slots
    # at turn t, giving F1 = 2(t-1) / ((t-1) + 10).
    env = _env(horizon=10)
    env.reset()
    agent = EvidenceOracleAgent()
    profile_rewards = []
    while not env.done:
        _, breakdown, _, _ = env.step(agent.act(env.view()))
        profile_rewards.append(breakdown.profile)
    expected = [2.0 * k / (k + 10.0) if k else 0.0 for k in range(10)]
    assert profile_rewards == pytest.approx(expected)


def test_oracle_agent_earns_full_response_reward() -> None:
    env = _env(horizon=8)
    env.reset()
    agent = EvidenceOracleAgent()
    while not env.done:
        _, breakdown, _, outcome = env.step(agent.act(env.view()))
        assert breakdown.response == 1.0
        assert outcome.judgment.criteria() == (1, 1, 1, 1, 1)


def test_discounted_return_matches_brute_force() -> None:
    rng = np.random.default_rng(5)
    for gamma in (0.0, 0.5, 1.0):
        for _ in range(20):
            rewards = rng.uniform(-1, 2, size=rng.integers(1, 12)).tolist()
            expected = sum(r * gamma**t for t, r in enumerate(rewards))
            assert discounted_return(rewards, gamma) == pytest.approx(expected, abs=1e-12)


# --- observations -------------------------------------------------------------------


def test_observation_layout_and_dim() -> None:
    env = _env(horizon=10)
    state = env.reset()
    obs = observe(state, env.schema, env.horizon)
    assert obs.slot_feats.shape == (10, 3)
    assert obs.global_feats.shape == (2,)
    assert obs.flat().shape == (observation_dim(10),)
    # Turn 1: bias on, nothing seen, greeting has no topic.
    assert obs.slot_feats[:, 0].tolist() == [1.0] * 10
    assert obs.slot_feats[:, 1:].sum() == 0.0
    assert obs.global_feats[0] == 1.0
    assert obs.global_feats[1] == pytest.approx(0.1)


def test_observation_tracks_seen_and_topic_flags() -> None:
    env = _env(horizon=10)
    env.reset()
    agent = EvidenceOracleAgent()
    env.step(agent.act(env.view()))
    view = env.view()
    obs = view.observation
    seen_flags = obs.slot_feats[:, 1]
    topic_flags = obs.slot_feats[:, 2]
    assert seen_flags.sum() == 1.0
    assert topic_flags.sum() == 1.0
    revealed_slot = next(iter(view.seen_values))
    idx = obs.slot_names.index(revealed_slot)
    assert seen_flags[idx] == 1.0


# --- conflict handling ----------------------------------------------------------------


def _conflict_env(style_seed: int = 3) -> tuple[DialogueEnv, str, str, str]:
    profile = _profile(rng_seed=style_seed)
    probe = UserConfig(profile=profile, horizon=10, style_seed=style_seed)
    from dialign.user_sim import initial_state

    slot = initial_state(probe).pending[0]
    old = profile.entries[slot]
    new = next(v for v in _POOLS[slot] if v != old)
    config = UserConfig(
        profile=profile,
        horizon=10,
        conflict=ConflictSpec(turn=6, replace={slot: new}),
        style_seed=style_seed,
    )
    return DialogueEnv(config, matcher=SlotMatcher(kind="exact")), slot, old, new


def test_effective_truth_switches_at_conflict_turn() -> None:
    env, slot, old, new = _conflict_env()
    env.reset()
    agent = EvidenceOracleAgent()
    truth_by_turn: dict[int, str] = {}
    while not env.done:
        view = env.view()
        truth_by_turn[view.turn] = env.effective_truth().entries[slot]
        env.step(agent.act(view))
    assert truth_by_turn[5] == old
    assert truth_by_turn[6] == new
    assert truth_by_turn[10] == new


def test_oracle_profile_reward_dips_at_conflict_and_recovers() -> None:
    env, slot, old, new = _conflict_env()
    env.reset()
    agent = EvidenceOracleAgent()
    by_turn: dict[int, float] = {}
    while not env.done:
        view = env.view()
        _, breakdown, _, _ = env.step(agent.act(view))
        by_turn[view.turn] = breakdown.profile
    assert by_turn[6] < by_turn[5]
    assert by_turn[10] > by_turn[6]


# --- records and replay ------------------------------------------------------------------


def test_rollout_produces_a_replayable_record(tmp_path: Path) -> None:
    env = _env(horizon=10, style_seed=6)
    record = rollout(env, EvidenceOracleAgent(), scenario_id="ep-6")
    assert record.scenario_id == "ep-6"
    assert record.schema_version == EPISODE_SCHEMA_VERSION
    assert len(record.turns) == 10

    replayed = replay_rewards(record, SlotMatcher(kind="exact"))
    for turn, breakdown in zip(record.turns, replayed):
        assert breakdown.profile == turn.profile_reward
        assert breakdown.response == turn.response_reward
        assert breakdown.total == turn.total_reward


def test_episode_json_round_trip(tmp_path: Path) -> None:
    env = _env(horizon=5, style_seed=2)
    record = rollout(env, EvidenceOracleAgent(), scenario_id="rt")
    path = tmp_path / "episodes.jsonl"
    write_episodes([record, record], path)
    loaded = list(read_episodes(path))
    assert len(loaded) == 2
    assert loaded[0].to_json() == record.to_json()
    assert loaded[0].turns[-1].estimate == record.turns[-1].estimate


def test_effective_truth_at_honours_conflict(tmp_path: Path) -> None:
    env, slot, old, new = _conflict_env(style_seed=4)
    record = rollout(env, EvidenceOracleAgent(), scenario_id="conf")
    assert record.effective_truth_at(5)[slot] == old
    assert record.effective_truth_at(6)[slot] == new
    assert record.conflict is not None
    assert record.conflict["turn"] == 6


def test_make_response_text_mentions_addressed_values() -> None:
    response = make_response([("Age", "34")], continues=True)
    assert "34" in response.text
    assert response.addressed_slots == (("Age", "34"),)
    assert response.continues
    closing = make_response([], continues=False)
    assert closing.text
    assert not closing.continues

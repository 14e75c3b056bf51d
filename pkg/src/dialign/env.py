"""Multi-turn dialogue environment.

State after t user turns is the transcript {u_1, r_1, ..., u_t}; an action
is the pair (structured response, full replacement profile estimate).  Each
step judges the response, scores the estimate against the current effective
ground truth (which reflects any conflict swap already triggered), appends
the agent turn, and asks the simulator for the next user turn until the
horizon is reached.  Rewards are immediate: the turn-t action is scored
before the turn-t+1 utterance is generated.

The per-turn total in a RewardBreakdown is always the unweighted sum
profile + response; reward weighting for training or ablations is applied
downstream by the consumers of episode data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Protocol

import numpy as np

from .errors import ProtocolError
from .profiles import Profile, SlotMatcher, SlotSchema, profile_reward
from .reward import (
    JudgeContext,
    ResponseJudgment,
    RuleJudge,
    alignment_verdict,
    response_reward,
)
from .user_sim import (
    UserConfig,
    UserUtterance,
    first_utterance,
    initial_state,
    next_utterance,
    theoretical_max,
)

EPISODE_SCHEMA_VERSION = "dialign.episode.v1"

# Placeholder emitted when a policy includes a slot it has no evidence for.
# Never matches a real profile value, so blind guesses cost precision.
UNKNOWN_VALUE = "(unknown)"

_CONTINUATION = "What else should I know about you?"
_ACK = "Noted, thanks for sharing."


@dataclass(frozen=True)
class ResponseRecord:
    """Structured agent response: personalized claims plus surface text."""

    addressed_slots: tuple[tuple[str, str], ...]
    continues: bool
    text: str


def make_response(
    addressed: tuple[tuple[str, str], ...] | list[tuple[str, str]], continues: bool
) -> ResponseRecord:
    """Render a response record from structured parts; text is deterministic."""
    addressed = tuple(addressed)
    if addressed:
        parts = [
            f"Since your {slot.lower()} is {value}, I'll take that into account."
            for slot, value in addressed
        ]
    else:
        parts = [_ACK]
    if continues:
        parts.append(_CONTINUATION)
    return ResponseRecord(addressed_slots=addressed, continues=continues, text=" ".join(parts))


@dataclass(frozen=True)
class AgentAction:
    """One agent turn: the response and the full replacement estimate."""

    response: ResponseRecord
    estimate: Profile


@dataclass(frozen=True)
class RewardBreakdown:
    profile: float
    response: float
    total: float

    def __post_init__(self) -> None:
        if self.total != self.profile + self.response:
            raise ValueError("total must equal profile + response exactly")


@dataclass(frozen=True)
class DialogueState:
    """Transcript so far.  Between actions it always ends in a user turn."""

    user_turns: tuple[UserUtterance, ...]
    agent_turns: tuple[ResponseRecord, ...]

    @property
    def turn(self) -> int:
        return len(self.user_turns)

    def seen_values(self) -> dict[str, str]:
        """Latest evidence value per slot across all user turns."""
        seen: dict[str, str] = {}
        for utterance in self.user_turns:
            for slot, value in utterance.evidence:
                seen[slot] = value
        return seen

    def evidence_revealed(self) -> bool:
        return any(utterance.evidence for utterance in self.user_turns)

    def prior_addressed(self) -> tuple[tuple[str, str], ...]:
        pairs: list[tuple[str, str]] = []
        for record in self.agent_turns:
            pairs.extend(record.addressed_slots)
        return tuple(pairs)


@dataclass(frozen=True)
class Observation:
    """Fixed-length feature view of a DialogueState for linear policies.

    Per slot: [bias, evidence seen, topic of the latest utterance].
    Global: [bias, turn fraction of horizon].
    """

    slot_feats: np.ndarray
    global_feats: np.ndarray
    slot_names: tuple[str, ...]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.global_feats, self.slot_feats.ravel()])

    @property
    def n_slots(self) -> int:
        return len(self.slot_names)


SLOT_FEATURE_DIM = 3
GLOBAL_FEATURE_DIM = 2


def observe(state: DialogueState, schema: SlotSchema, horizon: int) -> Observation:
    seen = state.seen_values()
    topics = set(state.user_turns[-1].topic_slots) if state.user_turns else set()
    names = tuple(schema.slots)
    slot_feats = np.zeros((len(names), SLOT_FEATURE_DIM))
    for i, slot in enumerate(names):
        slot_feats[i, 0] = 1.0
        slot_feats[i, 1] = 1.0 if slot in seen else 0.0
        slot_feats[i, 2] = 1.0 if slot in topics else 0.0
    global_feats = np.array([1.0, state.turn / float(horizon)])
    return Observation(slot_feats=slot_feats, global_feats=global_feats, slot_names=names)


def observation_dim(n_slots: int) -> int:
    return GLOBAL_FEATURE_DIM + n_slots * SLOT_FEATURE_DIM


@dataclass(frozen=True)
class EnvView:
    """What an agent sees when asked to act."""

    state: DialogueState
    observation: Observation
    seen_values: dict[str, str]
    schema: SlotSchema
    horizon: int
    turn: int


@dataclass
class TurnOutcome:
    """Everything the environment knows about one completed agent turn."""

    turn: int
    utterance: UserUtterance
    action: AgentAction
    breakdown: RewardBreakdown
    judgment: ResponseJudgment
    aligned: bool
    theoretical_max: float


class DialogueEnv:
    """Gym-style wrapper around the scripted user and the rule judge."""

    def __init__(
        self,
        config: UserConfig,
        matcher: SlotMatcher | None = None,
        judge: RuleJudge | None = None,
    ) -> None:
        self.config = config
        self.matcher = matcher or SlotMatcher(kind="exact")
        self.judge = judge or RuleJudge()
        self._state: DialogueState | None = None
        self._user_state = None
        self._done = False
        self._truth_cache: tuple[dict[str, str], Profile] | None = None

    @property
    def schema(self) -> SlotSchema:
        return self.config.profile.schema

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def reset(self) -> DialogueState:
        self._user_state = initial_state(self.config)
        opening = first_utterance(self.config)
        self._state = DialogueState(user_turns=(opening,), agent_turns=())
        self._done = False
        self._truth_cache = None
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def effective_truth(self) -> Profile:
        if self._user_state is None:
            raise ProtocolError("reset() the environment before querying truth")
        entries = self._user_state.active_entries
        # Entries dicts are shared across states until a conflict swaps values,
        # so identity is a sound cache key.
        if self._truth_cache is None or self._truth_cache[0] is not entries:
            self._truth_cache = (entries, Profile(schema=self.schema, entries=dict(entries)))
        return self._truth_cache[1]

    def view(self) -> EnvView:
        if self._state is None:
            raise ProtocolError("reset() the environment before acting")
        return EnvView(
            state=self._state,
            observation=observe(self._state, self.schema, self.horizon),
            seen_values=self._state.seen_values(),
            schema=self.schema,
            horizon=self.horizon,
            turn=self._state.turn,
        )

    def step(self, action: AgentAction) -> tuple[DialogueState, RewardBreakdown, bool, TurnOutcome]:
        if self._state is None or self._user_state is None:
            raise ProtocolError("step() before reset()")
        if self._done:
            raise ProtocolError("step() after the episode ended")

        state = self._state
        turn = state.turn
        context = JudgeContext(
            latest_topics=state.user_turns[-1].topic_slots,
            evidence_revealed=state.evidence_revealed(),
            prior_addressed=state.prior_addressed(),
        )
        judgment = self.judge.judge(action.response, action.estimate, context)
        truth_now = self.effective_truth()
        r_response = float(response_reward(judgment))
        r_profile = profile_reward(action.estimate, truth_now, self.matcher)
        breakdown = RewardBreakdown(
            profile=r_profile, response=r_response, total=r_profile + r_response
        )
        outcome = TurnOutcome(
            turn=turn,
            utterance=state.user_turns[-1],
            action=action,
            breakdown=breakdown,
            judgment=judgment,
            aligned=alignment_verdict(action.response, judgment, truth_now, self.matcher),
            theoretical_max=theoretical_max(self._user_state, truth_now),
        )

        agent_turns = state.agent_turns + (action.response,)
        if turn >= self.horizon:
            self._done = True
            self._state = DialogueState(user_turns=state.user_turns, agent_turns=agent_turns)
        else:
            step_result = next_utterance(self._user_state, self.config)
            if step_result is None:
                self._done = True
                self._state = DialogueState(user_turns=state.user_turns, agent_turns=agent_turns)
            else:
                utterance, self._user_state = step_result
                self._state = DialogueState(
                    user_turns=state.user_turns + (utterance,), agent_turns=agent_turns
                )
        return self._state, breakdown, self._done, outcome


# --- episode records ----------------------------------------------------------


@dataclass
class TurnRecord:
    turn: int
    user_text: str
    evidence: tuple[tuple[str, str], ...]
    topic_slots: tuple[str, ...]
    response_text: str
    addressed: tuple[tuple[str, str], ...]
    continues: bool
    estimate: dict[str, str]
    profile_reward: float
    response_reward: float
    total_reward: float
    criteria: dict[str, int]
    dimensions: dict[str, float]
    aligned: bool
    theoretical_max: float


@dataclass
class EpisodeRecord:
    """Self-contained episode log; enough to recompute every reward offline."""

    scenario_id: str
    schema_name: str
    schema_slots: tuple[str, ...]
    open_schema: bool
    truth: dict[str, str]
    conflict: dict | None
    horizon: int
    style_seed: int
    matcher: str
    turns: list[TurnRecord] = field(default_factory=list)
    schema_version: str = EPISODE_SCHEMA_VERSION

    def final_estimate(self) -> dict[str, str]:
        return dict(self.turns[-1].estimate) if self.turns else {}

    def total_rewards(self) -> list[float]:
        return [t.total_reward for t in self.turns]

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "scenario_id": self.scenario_id,
            "schema_name": self.schema_name,
            "schema_slots": list(self.schema_slots),
            "open_schema": self.open_schema,
            "truth": self.truth,
            "conflict": self.conflict,
            "horizon": self.horizon,
            "style_seed": self.style_seed,
            "matcher": self.matcher,
            "turns": [
                {
                    "turn": t.turn,
                    "user_text": t.user_text,
                    "evidence": [list(pair) for pair in t.evidence],
                    "topic_slots": list(t.topic_slots),
                    "response_text": t.response_text,
                    "addressed": [list(pair) for pair in t.addressed],
                    "continues": t.continues,
                    "estimate": t.estimate,
                    "profile_reward": t.profile_reward,
                    "response_reward": t.response_reward,
                    "total_reward": t.total_reward,
                    "criteria": t.criteria,
                    "dimensions": t.dimensions,
                    "aligned": t.aligned,
                    "theoretical_max": t.theoretical_max,
                }
                for t in self.turns
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, line: str) -> "EpisodeRecord":
        payload = json.loads(line)
        if payload.get("schema_version") != EPISODE_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported episode schema version {payload.get('schema_version')!r}"
            )
        record = cls(
            scenario_id=payload["scenario_id"],
            schema_name=payload["schema_name"],
            schema_slots=tuple(payload["schema_slots"]),
            open_schema=payload["open_schema"],
            truth=dict(payload["truth"]),
            conflict=payload["conflict"],
            horizon=payload["horizon"],
            style_seed=payload["style_seed"],
            matcher=payload["matcher"],
        )
        for t in payload["turns"]:
            record.turns.append(
                TurnRecord(
                    turn=t["turn"],
                    user_text=t["user_text"],
                    evidence=tuple((s, v) for s, v in t["evidence"]),
                    topic_slots=tuple(t["topic_slots"]),
                    response_text=t["response_text"],
                    addressed=tuple((s, v) for s, v in t["addressed"]),
                    continues=t["continues"],
                    estimate=dict(t["estimate"]),
                    profile_reward=t["profile_reward"],
                    response_reward=t["response_reward"],
                    total_reward=t["total_reward"],
                    criteria={k: int(v) for k, v in t["criteria"].items()},
                    dimensions=dict(t["dimensions"]),
                    aligned=t["aligned"],
                    theoretical_max=t["theoretical_max"],
                )
            )
        return record

    def schema_object(self) -> SlotSchema:
        return SlotSchema(
            name=self.schema_name, slots=self.schema_slots, open_schema=self.open_schema
        )

    def effective_truth_at(self, turn: int) -> dict[str, str]:
        entries = dict(self.truth)
        if self.conflict is not None and turn >= int(self.conflict["turn"]):
            entries.update(self.conflict["replace"])
        return entries


class Agent(Protocol):
    def act(self, view: EnvView) -> AgentAction: ...


class EvidenceOracleAgent:
    """Copies every piece of revealed evidence into its estimate and always
    addresses a topic slot it has a value for.  Used as a reference policy."""

    def act(self, view: EnvView) -> AgentAction:
        seen = view.seen_values
        estimate = Profile(schema=view.schema, entries=dict(seen))
        addressed: list[tuple[str, str]] = []
        for topic in view.state.user_turns[-1].topic_slots:
            if topic in seen:
                addressed = [(topic, seen[topic])]
                break
        if not addressed and seen:
            slot = next(iter(seen))
            addressed = [(slot, seen[slot])]
        return AgentAction(response=make_response(addressed, continues=True), estimate=estimate)


def _criteria_dict(judgment: ResponseJudgment) -> dict[str, int]:
    return {
        "naturalness": judgment.naturalness,
        "relevance": judgment.relevance,
        "logical_consistency": judgment.logical_consistency,
        "engagement": judgment.engagement,
        "informativeness": judgment.informativeness,
    }


def rollout(env: DialogueEnv, agent: Agent, scenario_id: str = "episode") -> EpisodeRecord:
    """Play one full episode and return its self-contained record."""
    env.reset()
    config = env.config
    record = EpisodeRecord(
        scenario_id=scenario_id,
        schema_name=env.schema.name,
        schema_slots=tuple(env.schema.slots),
        open_schema=env.schema.open_schema,
        truth=dict(config.profile.entries),
        conflict=(
            {"turn": config.conflict.turn, "replace": dict(config.conflict.replace)}
            if config.conflict
            else None
        ),
        horizon=config.horizon,
        style_seed=config.style_seed,
        matcher=env.matcher.label,
    )
    done = False
    while not done:
        view = env.view()
        action = agent.act(view)
        _, breakdown, done, outcome = env.step(action)
        record.turns.append(
            TurnRecord(
                turn=outcome.turn,
                user_text=outcome.utterance.text,
                evidence=outcome.utterance.evidence,
                topic_slots=outcome.utterance.topic_slots,
                response_text=action.response.text,
                addressed=action.response.addressed_slots,
                continues=action.response.continues,
                estimate=dict(action.estimate.entries),
                profile_reward=breakdown.profile,
                response_reward=breakdown.response,
                total_reward=breakdown.total,
                criteria=_criteria_dict(outcome.judgment),
                dimensions=outcome.judgment.dimensions(),
                aligned=outcome.aligned,
                theoretical_max=outcome.theoretical_max,
            )
        )
    return record


def discounted_return(rewards: list[float] | tuple[float, ...], gamma: float) -> float:
    """Sum of gamma^(t-1) * reward_t over the episode."""
    total = 0.0
    for t, reward in enumerate(rewards):
        total += (gamma**t) * reward
    return total


def replay_rewards(record: EpisodeRecord, matcher: SlotMatcher | None = None) -> list[RewardBreakdown]:
    """Recompute every turn's rewards from the raw logged fields.

    Used to check that episode logs are self-contained: the replay must
    reproduce the logged breakdowns exactly (same judge, same matcher).
    """
    matcher = matcher or SlotMatcher.parse(record.matcher)
    schema = record.schema_object()
    judge = RuleJudge()
    breakdowns: list[RewardBreakdown] = []
    prior: list[tuple[str, str]] = []
    evidence_seen = False
    for t in record.turns:
        evidence_seen = evidence_seen or bool(t.evidence)
        estimate = Profile(schema=schema, entries=dict(t.estimate))
        response = ResponseRecord(
            addressed_slots=t.addressed, continues=t.continues, text=t.response_text
        )
        context = JudgeContext(
            latest_topics=t.topic_slots,
            evidence_revealed=evidence_seen,
            prior_addressed=tuple(prior),
        )
        judgment = judge.judge(response, estimate, context)
        truth = Profile(schema=schema, entries=record.effective_truth_at(t.turn))
        r_profile = profile_reward(estimate, truth, matcher)
        r_response = float(response_reward(judgment))
        breakdowns.append(
            RewardBreakdown(
                profile=r_profile, response=r_response, total=r_profile + r_response
            )
        )
        prior.extend(t.addressed)
    return breakdowns


def write_episodes(records: list[EpisodeRecord], path) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")


def read_episodes(path) -> Iterator[EpisodeRecord]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EpisodeRecord.from_json(line)

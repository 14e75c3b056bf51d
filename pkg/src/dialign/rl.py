"""PPO training over a factored categorical dialogue policy.

The policy factors an agent turn into independent heads sharing per-slot
features: a Bernoulli inclusion decision per schema slot (does the estimate
carry this slot), one categorical choice over slots-plus-none for which slot
the response addresses, and a Bernoulli engagement flag.  All heads are
linear in the observation features, log-probabilities and their gradients
are computed analytically, and a central finite-difference helper is
provided so tests can cross-check the closed form.

The update is clipped-surrogate PPO: for each collected batch the sampling
policy is frozen (its log-probabilities are stored with the trajectories),
advantages come from generalized advantage estimation with a terminal value
of zero, advantages are normalized per batch, and the actor ascends

    E[ min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A) ]

with the ratio's exponent clamped for overflow safety.  No KL penalty is
applied.  The critic is a linear value function regressed on GAE returns.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .env import (
    AgentAction,
    DialogueEnv,
    EnvView,
    EpisodeRecord,
    Observation,
    UNKNOWN_VALUE,
    make_response,
    observation_dim,
    rollout,
)
from .errors import CheckpointError, ConfigError
from .profiles import Profile, SlotMatcher, SlotSchema
from .reward import combined_reward
from .user_sim import UserConfig

CHECKPOINT_FORMAT = "dialign.checkpoint.v1"

# theta layout: [w_include (3) | w_respond (3) | b_none (1) | w_engage (2)]
_W_INC = slice(0, 3)
_W_RESP = slice(3, 6)
_B_NONE = 6
_W_ENG = slice(7, 9)
POLICY_DIM = 9


@dataclass(frozen=True)
class PPOConfig:
    """Desk-scale PPO hyperparameters.

    The learning rates are sized for the 9-parameter linear policy here,
    not for fine-tuning a language model; everything else keeps the usual
    clipped-PPO shape (eps 0.2, gamma 1 over finite episodes, lambda 0.95,
    4 sampled episodes per scenario, 10 collection rounds by default).
    """

    clip_eps: float = 0.2
    gamma: float = 1.0
    lam: float = 0.95
    actor_lr: float = 5e-2
    critic_lr: float = 1e-2
    epochs: int = 4
    samples_per_scenario: int = 4
    total_rounds: int = 10
    rollouts_per_update: int | None = None
    ratio_clamp: float = 60.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        # Zero is allowed so one head can be frozen for ablations.
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.epochs < 1 or self.samples_per_scenario < 1 or self.total_rounds < 1:
            raise ConfigError("epochs, samples_per_scenario, total_rounds must be >= 1")
        if self.rollouts_per_update is not None and self.rollouts_per_update < 1:
            raise ConfigError("rollouts_per_update must be >= 1 when set")
        if self.ratio_clamp <= 0:
            raise ConfigError("ratio_clamp must be positive")


@dataclass(frozen=True)
class PolicyDecision:
    """One sampled action in head coordinates.

    ``response_choice`` indexes the schema slots; the value ``n_slots``
    means "address nothing".
    """

    include: tuple[int, ...]
    response_choice: int
    engage: bool


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-z))


def _log_sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    # log sigma(z) = -log(1 + exp(-z)), stable for large |z|
    return -np.logaddexp(0.0, -z)


@dataclass(frozen=True)
class DecisionBatch:
    """Column-oriented view of (observation, decision) pairs.

    Collection-time and update-time log-probabilities go through the same
    batched code path, so recomputing under unchanged parameters reproduces
    the stored values bit for bit.
    """

    slot_feats: np.ndarray  # (N, n_slots, SLOT_FEATURE_DIM)
    global_feats: np.ndarray  # (N, GLOBAL_FEATURE_DIM)
    include: np.ndarray  # (N, n_slots) in {0, 1}
    response_choice: np.ndarray  # (N,) ints in [0, n_slots]
    engage: np.ndarray  # (N,) in {0, 1}

    @classmethod
    def from_pairs(
        cls,
        observations: Sequence[Observation],
        decisions: Sequence[PolicyDecision],
    ) -> "DecisionBatch":
        if len(observations) != len(decisions):
            raise ValueError("observations and decisions must pair up")
        return cls(
            slot_feats=np.stack([obs.slot_feats for obs in observations]),
            global_feats=np.stack([obs.global_feats for obs in observations]),
            include=np.array([dec.include for dec in decisions], dtype=float),
            response_choice=np.array([dec.response_choice for dec in decisions], dtype=int),
            engage=np.array([float(dec.engage) for dec in decisions]),
        )

    def __len__(self) -> int:
        return self.global_feats.shape[0]


class CategoricalSlotPolicy:
    """Linear factored policy; parameters are shared across slots."""

    def __init__(self, n_slots: int, theta: np.ndarray | None = None) -> None:
        if n_slots < 1:
            raise ConfigError("policy needs at least one slot")
        self.n_slots = n_slots
        if theta is None:
            theta = np.zeros(POLICY_DIM)
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (POLICY_DIM,):
            raise ConfigError(f"theta must have shape ({POLICY_DIM},), got {theta.shape}")
        self.theta = theta.copy()

    # -- head distributions ----------------------------------------------

    def _include_logits(self, slot_feats: np.ndarray) -> np.ndarray:
        return slot_feats @ self.theta[_W_INC]

    def _response_logits(self, slot_feats: np.ndarray) -> np.ndarray:
        slot_logits = slot_feats @ self.theta[_W_RESP]
        none_col = np.full(slot_logits.shape[:-1] + (1,), self.theta[_B_NONE])
        return np.concatenate([slot_logits, none_col], axis=-1)

    def _engage_logit(self, global_feats: np.ndarray) -> np.ndarray:
        return global_feats @ self.theta[_W_ENG]

    def sample(self, obs: Observation, rng: np.random.Generator) -> PolicyDecision:
        decision, _ = self.sample_with_log_prob(obs, rng)
        return decision

    def sample_with_log_prob(
        self, obs: Observation, rng: np.random.Generator
    ) -> tuple[PolicyDecision, float]:
        """Draw a decision and its log-probability in one pass."""
        z_inc = self._include_logits(obs.slot_feats)
        include_mask = rng.random(obs.n_slots) < _sigmoid(z_inc)
        # Mirrors log_prob_batch term by term (same reductions, same association)
        # so stored log-probs match the update-time recomputation bit for bit.
        lp = float(np.sum(_log_sigmoid(np.where(include_mask, z_inc, -z_inc))))
        logits = self._response_logits(obs.slot_feats)
        log_norm = float(np.logaddexp.reduce(logits))
        probs = np.exp(logits - log_norm)
        choice = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
        choice = min(choice, len(probs) - 1)
        lp = lp + float(logits[choice]) - log_norm
        z_eng = float(self._engage_logit(obs.global_feats))
        engage = bool(rng.random() < _sigmoid(z_eng))
        lp = lp + float(_log_sigmoid(z_eng if engage else -z_eng))
        decision = PolicyDecision(
            include=tuple(int(v) for v in include_mask),
            response_choice=choice,
            engage=engage,
        )
        return decision, lp

    def greedy(self, obs: Observation) -> PolicyDecision:
        include = tuple(int(z > 0.0) for z in self._include_logits(obs.slot_feats))
        choice = int(np.argmax(self._response_logits(obs.slot_feats)))
        engage = bool(float(self._engage_logit(obs.global_feats)) > 0.0)
        return PolicyDecision(include=include, response_choice=choice, engage=engage)

    def log_prob_batch(self, batch: DecisionBatch) -> np.ndarray:
        z_inc = self._include_logits(batch.slot_feats)  # (N, n)
        # Bernoulli log-pmf in logit form: y*log(sigma) + (1-y)*log(1-sigma)
        lp = np.sum(
            batch.include * _log_sigmoid(z_inc)
            + (1.0 - batch.include) * _log_sigmoid(-z_inc),
            axis=-1,
        )
        logits = self._response_logits(batch.slot_feats)  # (N, n+1)
        log_norm = np.logaddexp.reduce(logits, axis=-1)
        rows = np.arange(len(batch))
        lp = lp + logits[rows, batch.response_choice] - log_norm
        z_eng = self._engage_logit(batch.global_feats)
        lp = lp + batch.engage * _log_sigmoid(z_eng) + (1.0 - batch.engage) * _log_sigmoid(-z_eng)
        return lp

    def log_prob(self, obs: Observation, decision: PolicyDecision) -> float:
        return float(self.log_prob_batch(DecisionBatch.from_pairs([obs], [decision]))[0])

    def grad_components(self, batch: DecisionBatch) -> np.ndarray:
        """Per-sample analytic d log pi / d theta, shape (N, POLICY_DIM)."""
        n = len(batch)
        grads = np.zeros((n, POLICY_DIM))
        p_inc = _sigmoid(self._include_logits(batch.slot_feats))  # (N, n_slots)
        grads[:, _W_INC] = np.einsum("ns,nsk->nk", batch.include - p_inc, batch.slot_feats)
        logits = self._response_logits(batch.slot_feats)
        probs = np.exp(logits - np.logaddexp.reduce(logits, axis=-1, keepdims=True))
        indicator = np.zeros_like(probs)
        indicator[np.arange(n), batch.response_choice] = 1.0
        diff = indicator - probs
        grads[:, _W_RESP] = np.einsum("ns,nsk->nk", diff[:, :-1], batch.slot_feats)
        grads[:, _B_NONE] = diff[:, -1]
        p_eng = _sigmoid(self._engage_logit(batch.global_feats))
        grads[:, _W_ENG] = (batch.engage - p_eng)[:, None] * batch.global_feats
        return grads

    def log_prob_grad(self, obs: Observation, decision: PolicyDecision) -> np.ndarray:
        """Analytic d log pi / d theta for a single sampled decision."""
        return self.grad_components(DecisionBatch.from_pairs([obs], [decision]))[0]

    def clone(self) -> "CategoricalSlotPolicy":
        return CategoricalSlotPolicy(self.n_slots, self.theta)


def numerical_log_prob_grad(
    policy: CategoricalSlotPolicy,
    obs: Observation,
    decision: PolicyDecision,
    eps: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of log_prob, for cross-checking."""
    base = policy.theta.copy()
    grad = np.zeros_like(base)
    for i in range(base.size):
        theta_hi = base.copy()
        theta_hi[i] += eps
        theta_lo = base.copy()
        theta_lo[i] -= eps
        hi = CategoricalSlotPolicy(policy.n_slots, theta_hi).log_prob(obs, decision)
        lo = CategoricalSlotPolicy(policy.n_slots, theta_lo).log_prob(obs, decision)
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad


class LinearValue:
    """Linear state-value function on the flattened observation."""

    def __init__(self, dim: int, phi: np.ndarray | None = None) -> None:
        if phi is None:
            phi = np.zeros(dim)
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (dim,):
            raise ConfigError(f"phi must have shape ({dim},), got {phi.shape}")
        self.dim = dim
        self.phi = phi.copy()

    def predict(self, flat_obs: np.ndarray) -> float:
        return float(flat_obs @ self.phi)

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        return features @ self.phi

    def clone(self) -> "LinearValue":
        return LinearValue(self.dim, self.phi)


# --- trajectories and GAE ------------------------------------------------------


@dataclass
class Trajectory:
    """One episode's worth of training data, sampled under a frozen policy."""

    observations: list[Observation]
    decisions: list[PolicyDecision]
    log_probs_old: np.ndarray
    values: np.ndarray
    rewards: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.observations)
        if not (
            len(self.decisions) == n
            and self.log_probs_old.shape == (n,)
            and self.values.shape == (n,)
            and self.rewards.shape == (n,)
        ):
            raise ValueError("trajectory fields must share one length")

    def __len__(self) -> int:
        return len(self.observations)


def compute_gae(
    rewards: np.ndarray | Sequence[float],
    values: np.ndarray | Sequence[float],
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Backward-recursive generalized advantage estimation.

    delta_t = r_t + gamma * V(s_{t+1}) - V(s_t), with V past the final step
    taken as 0, and A_t = delta_t + gamma * lam * A_{t+1}.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape or rewards.ndim != 1:
        raise ValueError(
            f"rewards and values must be equal-length vectors, got {rewards.shape} vs {values.shape}"
        )
    horizon = rewards.size
    advantages = np.zeros(horizon)
    last = 0.0
    for t in reversed(range(horizon)):
        next_value = values[t + 1] if t + 1 < horizon else 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * last
        advantages[t] = last
    return advantages


def policy_ratio(
    log_prob_new: np.ndarray | float,
    log_prob_old: np.ndarray | float,
    clamp: float = 60.0,
) -> np.ndarray | float:
    """exp(new - old) with the exponent clamped to +-clamp."""
    diff = np.clip(np.asarray(log_prob_new) - np.asarray(log_prob_old), -clamp, clamp)
    return np.exp(diff)


def ppo_surrogate(
    ratio: np.ndarray | float, advantage: np.ndarray | float, clip_eps: float
) -> np.ndarray | float:
    """Clipped surrogate objective min(r*A, clip(r)*A)."""
    ratio = np.asarray(ratio, dtype=float)
    if np.any(ratio <= 0.0):
        raise ValueError("probability ratios must be positive")
    advantage = np.asarray(advantage, dtype=float)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    return np.minimum(ratio * advantage, clipped * advantage)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance per batch; a zero-variance batch maps to zeros."""
    advantages = np.asarray(advantages, dtype=float)
    centered = advantages - advantages.mean()
    std = advantages.std()
    if std == 0.0:
        return centered
    return centered / std


# --- acting in the environment -------------------------------------------------


class PolicyAgent:
    """Adapts a CategoricalSlotPolicy to the environment's Agent protocol.

    Translates head decisions into a concrete action: included slots take
    their latest evidence value (or the unknown placeholder when the policy
    includes a slot blind), and the response addresses the chosen slot only
    when the estimate actually carries it.  Records everything needed for
    the PPO update as it goes.
    """

    def __init__(
        self,
        policy: CategoricalSlotPolicy,
        value_fn: LinearValue | None,
        rng: np.random.Generator,
        greedy: bool = False,
    ) -> None:
        self.policy = policy
        self.value_fn = value_fn
        self.rng = rng
        self.greedy = greedy
        self.observations: list[Observation] = []
        self.decisions: list[PolicyDecision] = []
        self.log_probs: list[float] = []
        self.values: list[float] = []

    def act(self, view: EnvView) -> AgentAction:
        obs = view.observation
        if self.greedy:
            decision = self.policy.greedy(obs)
            log_prob = self.policy.log_prob(obs, decision)
        else:
            decision, log_prob = self.policy.sample_with_log_prob(obs, self.rng)
        self.observations.append(obs)
        self.decisions.append(decision)
        self.log_probs.append(log_prob)
        if self.value_fn is not None:
            self.values.append(self.value_fn.predict(obs.flat()))

        entries = {
            slot: view.seen_values.get(slot, UNKNOWN_VALUE)
            for slot, included in zip(obs.slot_names, decision.include)
            if included
        }
        estimate = Profile(schema=view.schema, entries=entries)
        addressed: list[tuple[str, str]] = []
        if decision.response_choice < obs.n_slots:
            slot = obs.slot_names[decision.response_choice]
            if slot in entries:
                addressed = [(slot, entries[slot])]
        return AgentAction(
            response=make_response(addressed, continues=decision.engage), estimate=estimate
        )

    def finish(self, record: EpisodeRecord, weights: tuple[float, float]) -> Trajectory:
        rewards = np.array(
            [
                combined_reward(t.profile_reward, t.response_reward, weights)
                for t in record.turns
            ]
        )
        values = np.array(self.values) if self.values else np.zeros(len(self.observations))
        return Trajectory(
            observations=self.observations,
            decisions=self.decisions,
            log_probs_old=np.array(self.log_probs),
            values=values,
            rewards=rewards,
        )


def collect(
    scenarios: Sequence[tuple[str, UserConfig]],
    policy: CategoricalSlotPolicy,
    value_fn: LinearValue,
    cfg: PPOConfig,
    weights: tuple[float, float],
    matcher: SlotMatcher,
    round_index: int,
) -> tuple[list[Trajectory], list[EpisodeRecord]]:
    """Sample a batch of episodes under the frozen current policy."""
    pairs = [
        (idx, sample)
        for idx in range(len(scenarios))
        for sample in range(cfg.samples_per_scenario)
    ]
    if cfg.rollouts_per_update is not None and cfg.rollouts_per_update < len(pairs):
        picker = np.random.default_rng([cfg.seed, round_index, 0xC0FFEE])
        chosen = picker.choice(len(pairs), size=cfg.rollouts_per_update, replace=False)
        pairs = [pairs[i] for i in sorted(chosen)]
    trajectories: list[Trajectory] = []
    records: list[EpisodeRecord] = []
    for idx, sample in pairs:
        scenario_id, config = scenarios[idx]
        rng = np.random.default_rng([cfg.seed, round_index, idx, sample])
        env = DialogueEnv(config, matcher=matcher)
        agent = PolicyAgent(policy, value_fn, rng)
        record = rollout(env, agent, scenario_id=scenario_id)
        trajectories.append(agent.finish(record, weights))
        records.append(record)
    return trajectories, records


# --- the PPO update -------------------------------------------------------------


@dataclass(frozen=True)
class UpdateStats:
    clip_fraction: float
    value_loss: float
    mean_advantage: float
    surrogate: float


def update(
    policy: CategoricalSlotPolicy,
    value_fn: LinearValue,
    trajectories: Sequence[Trajectory],
    cfg: PPOConfig,
) -> UpdateStats:
    """One PPO update over a batch of trajectories (in place)."""
    if not trajectories:
        raise ValueError("update needs at least one trajectory")
    if not np.all(np.isfinite(policy.theta)) or not np.all(np.isfinite(value_fn.phi)):
        raise FloatingPointError("non-finite parameters entering update")
    observations: list[Observation] = []
    decisions: list[PolicyDecision] = []
    logp_old_parts: list[np.ndarray] = []
    adv_parts: list[np.ndarray] = []
    return_parts: list[np.ndarray] = []
    for traj in trajectories:
        advantages = compute_gae(traj.rewards, traj.values, cfg.gamma, cfg.lam)
        observations.extend(traj.observations)
        decisions.extend(traj.decisions)
        logp_old_parts.append(traj.log_probs_old)
        adv_parts.append(advantages)
        return_parts.append(advantages + traj.values)

    logp_old = np.concatenate(logp_old_parts)
    advantages = normalize_advantages(np.concatenate(adv_parts))
    returns = np.concatenate(return_parts)
    features = np.stack([obs.flat() for obs in observations])
    batch = DecisionBatch.from_pairs(observations, decisions)
    n = logp_old.size

    clip_fractions: list[float] = []
    surrogates: list[float] = []
    for _ in range(cfg.epochs):
        logp_new = policy.log_prob_batch(batch)
        ratio = policy_ratio(logp_new, logp_old, clamp=cfg.ratio_clamp)
        surrogate = ppo_surrogate(ratio, advantages, cfg.clip_eps)
        surrogates.append(float(np.mean(surrogate)))
        # The clipped branch contributes zero gradient when it is active.
        clip_active = ((advantages > 0) & (ratio > 1.0 + cfg.clip_eps)) | (
            (advantages < 0) & (ratio < 1.0 - cfg.clip_eps)
        )
        clip_fractions.append(float(np.mean(clip_active)))
        sample_weights = np.where(clip_active, 0.0, advantages * ratio)
        grad = sample_weights @ policy.grad_components(batch) / n
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(
                f"non-finite policy gradient (|grad|={np.abs(grad).max()!r}); aborting update"
            )
        policy.theta = policy.theta + cfg.actor_lr * grad

        predictions = value_fn.predict_batch(features)
        value_grad = 2.0 / n * (features.T @ (predictions - returns))
        if not np.all(np.isfinite(value_grad)):
            raise FloatingPointError("non-finite critic gradient; aborting update")
        value_fn.phi = value_fn.phi - cfg.critic_lr * value_grad

    final_value_loss = float(np.mean((value_fn.predict_batch(features) - returns) ** 2))
    return UpdateStats(
        clip_fraction=float(np.mean(clip_fractions)),
        value_loss=final_value_loss,
        mean_advantage=float(np.mean(advantages)),
        surrogate=float(np.mean(surrogates)),
    )


# --- the training loop -----------------------------------------------------------


@dataclass(frozen=True)
class CurveRow:
    """One training-curve sample; rewards are unweighted per-episode sums."""

    step: int
    mean_total_reward: float
    mean_profile_reward: float
    mean_response_reward: float
    clip_fraction: float
    value_loss: float


CURVE_COLUMNS = (
    "step",
    "mean_total_reward",
    "mean_profile_reward",
    "mean_response_reward",
    "clip_fraction",
    "value_loss",
)


@dataclass
class TrainResult:
    policy: CategoricalSlotPolicy
    value_fn: LinearValue
    curve: list[CurveRow]
    final_step: int


def _batch_reward_means(records: Sequence[EpisodeRecord]) -> tuple[float, float, float]:
    totals = [sum(t.total_reward for t in r.turns) for r in records]
    profiles = [sum(t.profile_reward for t in r.turns) for r in records]
    responses = [sum(t.response_reward for t in r.turns) for r in records]
    return (
        float(np.mean(totals)),
        float(np.mean(profiles)),
        float(np.mean(responses)),
    )


def train(
    scenarios: Sequence[tuple[str, UserConfig]],
    cfg: PPOConfig,
    weights: tuple[float, float] = (1.0, 1.0),
    matcher: SlotMatcher | None = None,
    policy: CategoricalSlotPolicy | None = None,
    value_fn: LinearValue | None = None,
    start_step: int = 0,
) -> TrainResult:
    """Alternate collection rounds and PPO updates over the scenario set."""
    if not scenarios:
        raise ConfigError("training needs at least one scenario")
    schema = scenarios[0][1].profile.schema
    for _, config in scenarios:
        if config.profile.schema.name != schema.name:
            raise ConfigError("all training scenarios must share a schema")
    matcher = matcher or SlotMatcher(kind="exact")
    n_slots = len(schema.slots)
    policy = policy or CategoricalSlotPolicy(n_slots)
    value_fn = value_fn or LinearValue(observation_dim(n_slots))

    curve: list[CurveRow] = []
    step = start_step
    for round_index in range(cfg.total_rounds):
        step = start_step + round_index + 1
        trajectories, records = collect(
            scenarios, policy, value_fn, cfg, weights, matcher, round_index=step
        )
        mean_total, mean_profile, mean_response = _batch_reward_means(records)
        stats = update(policy, value_fn, trajectories, cfg)
        curve.append(
            CurveRow(
                step=step,
                mean_total_reward=mean_total,
                mean_profile_reward=mean_profile,
                mean_response_reward=mean_response,
                clip_fraction=stats.clip_fraction,
                value_loss=stats.value_loss,
            )
        )
    return TrainResult(policy=policy, value_fn=value_fn, curve=curve, final_step=step)


# --- checkpoints -------------------------------------------------------------------


def config_fingerprint(
    cfg: PPOConfig, weights: tuple[float, float], schema: SlotSchema
) -> str:
    payload = {
        "ppo": asdict(cfg),
        "weights": list(weights),
        "schema": {"name": schema.name, "slots": list(schema.slots), "open": schema.open_schema},
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class Checkpoint:
    theta: np.ndarray
    phi: np.ndarray
    schema: SlotSchema
    step: int
    fingerprint: str
    ppo: dict
    weights: tuple[float, float]

    def policy(self) -> CategoricalSlotPolicy:
        return CategoricalSlotPolicy(len(self.schema.slots), self.theta)

    def value_fn(self) -> LinearValue:
        return LinearValue(observation_dim(len(self.schema.slots)), self.phi)


def save_checkpoint(
    path,
    policy: CategoricalSlotPolicy,
    value_fn: LinearValue,
    cfg: PPOConfig,
    weights: tuple[float, float],
    schema: SlotSchema,
    step: int,
) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "theta": policy.theta.tolist(),
        "phi": value_fn.phi.tolist(),
        "schema": {
            "name": schema.name,
            "slots": list(schema.slots),
            "open": schema.open_schema,
        },
        "step": step,
        "fingerprint": config_fingerprint(cfg, weights, schema),
        "ppo": asdict(cfg),
        "weights": list(weights),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {payload.get('format')!r}")
    for key in ("theta", "phi", "schema", "step", "fingerprint"):
        if key not in payload:
            raise CheckpointError(f"checkpoint missing field {key!r}")
    schema = SlotSchema(
        name=payload["schema"]["name"],
        slots=tuple(payload["schema"]["slots"]),
        open_schema=bool(payload["schema"].get("open", False)),
    )
    return Checkpoint(
        theta=np.asarray(payload["theta"], dtype=float),
        phi=np.asarray(payload["phi"], dtype=float),
        schema=schema,
        step=int(payload["step"]),
        fingerprint=payload["fingerprint"],
        ppo=dict(payload.get("ppo", {})),
        weights=tuple(payload.get("weights", (1.0, 1.0))),  # type: ignore[arg-type]
    )

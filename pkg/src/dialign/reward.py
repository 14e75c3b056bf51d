"""Response judging and reward aggregation.

The per-turn response reward is the product of five binary criteria:
naturalness, relevance, logical consistency, engagement, and informativeness.
A response earns reward 1 only when every criterion passes.  Four graded
dimensions (preference expression, style consistency, goal alignment,
persona coherence) are scored alongside for logging and never enter the
reward.

Judging is fully rule-based over structured actions, so verdicts are
deterministic and reproducible offline:

* naturalness is constant 1 because surface text is rendered from
  templates; malformed actions raise instead of scoring low,
* relevance requires the response to address a topic slot of the latest
  user utterance (vacuously true when the utterance has no topic),
* logical consistency requires every addressed value to agree with the
  agent's own current estimate, which also rules out contradicting an
  earlier response unless the estimate legitimately changed in between,
* engagement requires the response to carry a continuation element,
* informativeness requires at least one addressed slot once any profile
  evidence has been revealed.

The total reward for a turn is the weighted sum of the profile overlap
reward and this response reward; both weights default to 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .profiles import Profile, SlotMatcher, normalize_text


class ResponseLike(Protocol):
    addressed_slots: tuple[tuple[str, str], ...]
    continues: bool


@dataclass(frozen=True)
class JudgeContext:
    """What the judge needs to know about the dialogue so far."""

    latest_topics: tuple[str, ...]
    evidence_revealed: bool
    prior_addressed: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ResponseJudgment:
    """Five binary criteria plus four graded diagnostic dimensions."""

    naturalness: int
    relevance: int
    logical_consistency: int
    engagement: int
    informativeness: int
    preference_expression: float
    style_consistency: float
    goal_alignment: float
    persona_coherence: float

    def criteria(self) -> tuple[int, int, int, int, int]:
        return (
            self.naturalness,
            self.relevance,
            self.logical_consistency,
            self.engagement,
            self.informativeness,
        )

    def dimensions(self) -> dict[str, float]:
        return {
            "preference_expression": self.preference_expression,
            "style_consistency": self.style_consistency,
            "goal_alignment": self.goal_alignment,
            "persona_coherence": self.persona_coherence,
        }


def _validate_addressed(addressed: Sequence[tuple[str, str]]) -> None:
    for pair in addressed:
        if len(pair) != 2:
            raise ValueError(f"addressed entry must be a (slot, value) pair: {pair!r}")
        slot, value = pair
        if not isinstance(slot, str) or not slot.strip():
            raise ValueError(f"addressed slot must be non-empty text: {slot!r}")
        if not isinstance(value, str) or not value.strip():
            raise ValueError(f"addressed value for {slot!r} must be non-empty text")


class RuleJudge:
    """Deterministic rule-based judge over structured responses."""

    def judge(
        self, response: ResponseLike, estimate: Profile, context: JudgeContext
    ) -> ResponseJudgment:
        addressed = tuple(response.addressed_slots)
        _validate_addressed(addressed)

        relevance = 1
        if context.latest_topics:
            names = {slot for slot, _ in addressed}
            relevance = int(any(topic in names for topic in context.latest_topics))

        consistent = 0
        for slot, value in addressed:
            believed = estimate.entries.get(slot)
            if believed is not None and normalize_text(value) == normalize_text(believed):
                consistent += 1
        preference_ok = consistent == len(addressed)

        # A revision contradicts history only if the earlier value still
        # matches the current estimate; estimate changes legitimize revisions.
        contradiction = False
        for slot, value in addressed:
            believed = estimate.entries.get(slot)
            if believed is None:
                continue
            for prior_slot, prior_value in context.prior_addressed:
                if prior_slot != slot:
                    continue
                if normalize_text(prior_value) != normalize_text(value) and normalize_text(
                    prior_value
                ) == normalize_text(believed):
                    contradiction = True
        logical = int(preference_ok and not contradiction)

        engagement = int(bool(response.continues))
        informativeness = 1 if not context.evidence_revealed else int(len(addressed) >= 1)

        if addressed:
            pref_expr = consistent / len(addressed)
            coherence = sum(1 for s, _ in addressed if s in estimate.entries) / len(addressed)
        else:
            pref_expr = coherence = 0.0 if context.evidence_revealed else 1.0

        return ResponseJudgment(
            naturalness=1,
            relevance=relevance,
            logical_consistency=logical,
            engagement=engagement,
            informativeness=informativeness,
            preference_expression=pref_expr,
            style_consistency=1.0,
            goal_alignment=float(relevance),
            persona_coherence=coherence,
        )


def response_reward(judgment: ResponseJudgment) -> int:
    """Product of the five binary criteria: 1 only if all pass."""
    total = 1
    for criterion in judgment.criteria():
        if criterion not in (0, 1):
            raise ValueError(f"criteria must be binary, got {criterion!r}")
        total *= criterion
    return total


def combined_reward(
    profile_r: float, response_r: float, weights: tuple[float, float] = (1.0, 1.0)
) -> float:
    """Weighted sum w_p * profile + w_r * response; weights must be >= 0."""
    w_profile, w_response = weights
    if w_profile < 0 or w_response < 0:
        raise ValueError(f"reward weights must be non-negative, got {weights}")
    return w_profile * profile_r + w_response * response_r


def alignment_verdict(
    response: ResponseLike,
    judgment: ResponseJudgment,
    truth: Profile,
    matcher: SlotMatcher,
) -> bool:
    """Evaluation-time alignment check with ground-truth access.

    Unlike the training judge, evaluation sees the user's full profile: a
    turn counts as aligned when the rule criteria all pass, the response
    personalizes on at least one slot, and every addressed value agrees
    with the truth.
    """
    if response_reward(judgment) != 1:
        return False
    addressed = tuple(response.addressed_slots)
    if not addressed:
        return False
    for slot, value in addressed:
        actual = truth.entries.get(slot)
        if actual is None or not matcher.values_match(slot, value, actual):
            return False
    return True

"""Evaluation metrics for multi-turn personalization.

Alignment level AL(k) is 100 times the mean binary alignment verdict at
turn k over a set of episodes.  To compare how curves improve over turns,
a curve is first normalized to [0, 1] using its global minimum and maximum
(an all-equal curve maps to zeros), then an ordinary least squares line is
fitted against turn indices 1..K:

    N-IR  = fitted slope (normalized improvement rate)
    N-R^2 = coefficient of determination of that fit (improvement stability)

A running-prefix normalization variant is available behind ``mode=
"running"`` for comparison; it leaves the first point at 0 by convention
since a single-point prefix has no range.

Also here: agreement statistics between two binary raters from a confusion
matrix (accuracy, precision, recall, F1, specificity, Cohen's kappa), and
the long-horizon profile-recall curve against the theoretical maximum
recoverable from what the user has actually revealed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import EpisodeRecord
from .profiles import Profile, SlotMatcher, precision_recall


# --- alignment curves -------------------------------------------------------


def alignment_level(scores: Sequence[Sequence[float]], k: int) -> float:
    """AL(k): 100 x mean turn-k alignment over episodes (1-based k)."""
    if not scores:
        raise ValueError("alignment_level needs at least one episode")
    if k < 1:
        raise ValueError(f"turn index must be >= 1, got {k}")
    column: list[float] = []
    for i, episode in enumerate(scores):
        if k > len(episode):
            raise ValueError(f"episode {i} has only {len(episode)} turns, asked for {k}")
        value = float(episode[k - 1])
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"alignment scores must lie in [0, 1], got {value}")
        column.append(value)
    return 100.0 * float(np.mean(column))


def alignment_curve(scores: Sequence[Sequence[float]], k_max: int | None = None) -> list[float]:
    """[AL(1), ..., AL(K)] with K defaulting to the shortest episode."""
    if not scores:
        raise ValueError("alignment_curve needs at least one episode")
    limit = min(len(ep) for ep in scores)
    if k_max is not None:
        if k_max > limit:
            raise ValueError(f"k_max {k_max} exceeds shortest episode length {limit}")
        limit = k_max
    return [alignment_level(scores, k) for k in range(1, limit + 1)]


def normalize_curve(values: Sequence[float], mode: str = "global") -> list[float]:
    """Min-max normalize a curve to [0, 1].

    ``global`` uses the whole curve's range; a constant curve maps to all
    zeros.  ``running`` uses the prefix range up to each point, with
    zero-range prefixes (including the first point) mapping to 0.
    """
    if mode not in ("global", "running"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    if len(values) == 0:
        raise ValueError("cannot normalize an empty curve")
    vals = [float(v) for v in values]
    if mode == "global":
        lo, hi = min(vals), max(vals)
        if hi == lo:
            return [0.0] * len(vals)
        return [(v - lo) / (hi - lo) for v in vals]
    out: list[float] = []
    for k in range(1, len(vals) + 1):
        prefix = vals[:k]
        lo, hi = min(prefix), max(prefix)
        out.append(0.0 if hi == lo else (vals[k - 1] - lo) / (hi - lo))
    return out


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float


def fit_improvement(normalized: Sequence[float]) -> RegressionFit:
    """OLS of a normalized curve against turn indices 1..K.

    A zero-variance curve fits slope 0 with r_squared 0 (the fit explains
    nothing because there is nothing to explain).
    """
    y = np.asarray(normalized, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("need at least two points to fit a trend")
    k = np.arange(1, y.size + 1, dtype=float)
    k_centered = k - k.mean()
    y_centered = y - y.mean()
    denom = float(np.sum(k_centered**2))
    slope = float(np.sum(k_centered * y_centered) / denom)
    intercept = float(y.mean() - slope * k.mean())
    ss_tot = float(np.sum(y_centered**2))
    if ss_tot == 0.0:
        return RegressionFit(slope=0.0, intercept=intercept, r_squared=0.0)
    residuals = y - (slope * k + intercept)
    r_squared = 1.0 - float(np.sum(residuals**2)) / ss_tot
    return RegressionFit(slope=slope, intercept=intercept, r_squared=r_squared)


@dataclass(frozen=True)
class AlignmentSummary:
    """The three headline numbers for one alignment curve."""

    average: float
    n_ir: float
    n_r2: float
    curve: tuple[float, ...]
    normalized: tuple[float, ...]


def summarize_alignment(values: Sequence[float], mode: str = "global") -> AlignmentSummary:
    normalized = normalize_curve(values, mode=mode)
    fit = fit_improvement(normalized)
    return AlignmentSummary(
        average=float(np.mean(np.asarray(values, dtype=float))),
        n_ir=fit.slope,
        n_r2=fit.r_squared,
        curve=tuple(float(v) for v in values),
        normalized=tuple(normalized),
    )


# --- rater agreement ---------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name, count in (("tp", self.tp), ("fp", self.fp), ("fn", self.fn), ("tn", self.tn)):
            if not isinstance(count, int) or count < 0:
                raise ValueError(f"{name} must be a non-negative int, got {count!r}")
        if self.total == 0:
            raise ValueError("confusion matrix must contain at least one observation")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class AgreementStats:
    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    kappa: float | None


def agreement_stats(m: ConfusionMatrix) -> AgreementStats:
    """Binary agreement metrics; zero-denominator ratios are defined as 0,
    and kappa is None when chance agreement is exactly 1."""
    n = m.total
    accuracy = (m.tp + m.tn) / n
    precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) else 0.0
    recall = m.tp / (m.tp + m.fn) if (m.tp + m.fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    specificity = m.tn / (m.tn + m.fp) if (m.tn + m.fp) else 0.0
    # Chance agreement from the raters' marginal label frequencies.
    p_yes = ((m.tp + m.fp) / n) * ((m.tp + m.fn) / n)
    p_no = ((m.fn + m.tn) / n) * ((m.fp + m.tn) / n)
    p_e = p_yes + p_no
    kappa = None if p_e == 1.0 else (accuracy - p_e) / (1.0 - p_e)
    return AgreementStats(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        specificity=specificity,
        kappa=kappa,
    )


# --- long-horizon profile tracking --------------------------------------------


@dataclass(frozen=True)
class LongtermPoint:
    turn: int
    profile_score: float
    theoretical_max: float


@dataclass(frozen=True)
class LongtermCurve:
    points: tuple[LongtermPoint, ...]
    average: float


def longterm_profile_curve(
    records: Sequence[EpisodeRecord],
    checkpoints: Sequence[int],
    matcher: SlotMatcher | None = None,
) -> LongtermCurve:
    """Profile recall at each checkpoint turn, next to the theoretical max.

    The score is recall of the agent's estimate against the turn's effective
    ground truth: the fraction of true attributes recovered.  Recall is the
    right scale to compare with the reveal ceiling, because any estimate
    built only from revealed evidence can recover at most the revealed
    fraction.  The ``average`` aggregates the score over checkpoints.
    """
    if not records:
        raise ValueError("longterm_profile_curve needs at least one episode")
    if not checkpoints:
        raise ValueError("need at least one checkpoint turn")
    points: list[LongtermPoint] = []
    for k in checkpoints:
        if k < 1:
            raise ValueError(f"checkpoint turns must be >= 1, got {k}")
        scores: list[float] = []
        ceilings: list[float] = []
        for record in records:
            if k > len(record.turns):
                raise ValueError(
                    f"checkpoint {k} beyond episode {record.scenario_id!r}"
                    f" with {len(record.turns)} turns"
                )
            turn = record.turns[k - 1]
            schema = record.schema_object()
            estimate = Profile(schema=schema, entries=dict(turn.estimate))
            truth = Profile(schema=schema, entries=record.effective_truth_at(k))
            m = matcher or SlotMatcher.parse(record.matcher)
            _, recall = precision_recall(estimate, truth, m)
            scores.append(recall)
            ceilings.append(turn.theoretical_max)
        points.append(
            LongtermPoint(
                turn=k,
                profile_score=float(np.mean(scores)),
                theoretical_max=float(np.mean(ceilings)),
            )
        )
    average = float(np.mean([p.profile_score for p in points]))
    return LongtermCurve(points=tuple(points), average=average)


def alignment_matrix(records: Sequence[EpisodeRecord]) -> list[list[int]]:
    """Per-episode binary alignment verdicts, ready for alignment_level."""
    return [[int(t.aligned) for t in record.turns] for record in records]

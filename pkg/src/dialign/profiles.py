"""User profiles, slot matchers, and profile-overlap scoring.

A profile is an ordered mapping from slot names to free-text values under a
named schema.  The profile reward for an estimate P-hat against a ground
truth P is the F1-style overlap score

    R_profile = 2 * |P-hat ∩ P| / (|P-hat| + |P|)

where the intersection is counted slot-by-slot under a configurable value
matcher.  An empty estimate scores 0 by convention.

The module also ships a small synthetic benchmark for matchers: rewrite a
profile by paraphrasing ``a`` entries and altering ``b`` entries, then check
how close a matcher's predicted overlap lands to the known answer ``a``.
"""

from __future__ import annotations

import json
import random
import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ConfigError, SchemaError

# The ten closed-schema slots used by the standard scenarios.
ALOE_SLOTS: tuple[str, ...] = (
    "Age",
    "Gender",
    "Interests",
    "Educational Background",
    "Personality Traits",
    "Occupation",
    "Marital Status",
    "Family Background",
    "Location",
    "Others",
)

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})
_WS_RE = re.compile(r"\s+")


@lru_cache(maxsize=8192)
def normalize_text(text: str) -> str:
    """Casefold, strip punctuation, and collapse whitespace."""
    folded = text.casefold().translate(_PUNCT_TABLE)
    return _WS_RE.sub(" ", folded).strip()


@lru_cache(maxsize=8192)
def token_set(text: str) -> frozenset[str]:
    norm = normalize_text(text)
    return frozenset(norm.split()) if norm else frozenset()


@dataclass(frozen=True)
class SlotSchema:
    """A named slot-name namespace.

    Closed schemas reject entries outside ``slots``; open schemas accept any
    well-formed slot name (the Extended-style setting).
    """

    name: str
    slots: tuple[str, ...]
    open_schema: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("schema name must be non-empty")
        if len(set(self.slots)) != len(self.slots):
            raise ValueError("schema slots must be unique")
        for slot in self.slots:
            if not isinstance(slot, str) or not slot.strip():
                raise ValueError(f"bad slot name: {slot!r}")

    def allows(self, slot: str) -> bool:
        return self.open_schema or slot in self.slots

    @classmethod
    def aloe(cls) -> "SlotSchema":
        return cls(name="aloe", slots=ALOE_SLOTS)


@dataclass(frozen=True)
class Profile:
    """An ordered slot -> value mapping validated against a schema.

    Treat instances as immutable; entry order is insertion order.  The
    mapping type itself forbids duplicate slot names.
    """

    schema: SlotSchema
    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for slot, value in self.entries.items():
            if not isinstance(slot, str) or not slot.strip():
                raise ValueError(f"bad slot name: {slot!r}")
            if not self.schema.allows(slot):
                raise SchemaError(
                    f"slot {slot!r} not allowed by closed schema {self.schema.name!r}"
                )
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"empty value for slot {slot!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def slot_names(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def with_entries(self, updates: Mapping[str, str]) -> "Profile":
        """Return a copy with ``updates`` merged in (replace-or-add)."""
        merged = dict(self.entries)
        merged.update(updates)
        return Profile(schema=self.schema, entries=merged)

    def to_record(self) -> dict:
        return {"schema": self.schema.name, "entries": dict(self.entries)}


def load_profile(record: Mapping, registry: Mapping[str, SlotSchema] | None = None) -> Profile:
    """Build a Profile from a parsed JSON record ``{"schema": ..., "entries": ...}``.

    ``schema`` may be a registered name (``"aloe"`` is built in), an unknown
    name (treated as an open schema inferred from the entry keys), or an
    inline ``{"name", "slots", "open"}`` object.
    """
    if "entries" not in record or "schema" not in record:
        raise ValueError("profile record needs 'schema' and 'entries' fields")
    entries = dict(record["entries"])
    spec = record["schema"]
    if isinstance(spec, Mapping):
        schema = SlotSchema(
            name=spec["name"],
            slots=tuple(spec.get("slots", entries.keys())),
            open_schema=bool(spec.get("open", False)),
        )
    else:
        known = {"aloe": SlotSchema.aloe()}
        if registry:
            known.update(registry)
        schema = known.get(spec) or SlotSchema(
            name=str(spec), slots=tuple(entries.keys()), open_schema=True
        )
    return Profile(schema=schema, entries=entries)


# --- matchers ---------------------------------------------------------------

MatchPredicate = Callable[[str, str, str], bool]


@dataclass(frozen=True)
class SlotMatcher:
    """Deterministic predicate deciding whether two slot values agree.

    ``kind`` selects the rule: ``"exact"`` compares normalized strings,
    ``"token"`` compares Jaccard overlap of normalized token sets against
    ``threshold``, and ``"custom"`` delegates to ``predicate`` so an external
    judge can be plugged in.  All bundled rules are symmetric and reflexive.
    """

    kind: str = "exact"
    threshold: float = 0.5
    predicate: MatchPredicate | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "token", "custom"):
            raise ConfigError(f"unknown matcher kind {self.kind!r}")
        if self.kind == "token" and not (0.0 < self.threshold <= 1.0):
            raise ConfigError(f"token threshold must be in (0, 1], got {self.threshold}")
        if self.kind == "custom" and self.predicate is None:
            raise ConfigError("custom matcher needs a predicate")

    def values_match(self, slot: str, a: str, b: str) -> bool:
        if self.kind == "custom":
            assert self.predicate is not None
            return bool(self.predicate(slot, a, b))
        na, nb = normalize_text(a), normalize_text(b)
        if self.kind == "exact":
            return na == nb and na != ""
        ta, tb = token_set(a), token_set(b)
        if not ta or not tb:
            return False
        jaccard = len(ta & tb) / len(ta | tb)
        return jaccard >= self.threshold

    @property
    def label(self) -> str:
        if self.kind == "token":
            return f"token:{self.threshold:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "SlotMatcher":
        """Parse a CLI-style matcher spec: ``exact`` or ``token[:<threshold>]``."""
        head, _, tail = text.partition(":")
        if head == "exact":
            if tail:
                raise ConfigError("exact matcher takes no threshold")
            return cls(kind="exact")
        if head == "token":
            threshold = float(tail) if tail else 0.5
            return cls(kind="token", threshold=threshold)
        raise ConfigError(f"cannot parse matcher spec {text!r}")


# --- overlap scoring ---------------------------------------------------------


def _check_same_family(estimate: Profile, truth: Profile) -> None:
    if estimate.schema.name != truth.schema.name:
        raise SchemaError(
            f"schema mismatch: {estimate.schema.name!r} vs {truth.schema.name!r}"
        )


def overlap_count(estimate: Profile, truth: Profile, matcher: SlotMatcher) -> int:
    """Number of estimate entries whose slot exists in truth with a matching value.

    Bounded by min(len(estimate), len(truth)) because both sides are mappings.
    """
    _check_same_family(estimate, truth)
    count = 0
    for slot, value in estimate.entries.items():
        other = truth.entries.get(slot)
        if other is not None and matcher.values_match(slot, value, other):
            count += 1
    return count


def precision_recall(
    estimate: Profile, truth: Profile, matcher: SlotMatcher
) -> tuple[float, float]:
    """(precision, recall) of the estimate; empty estimate yields precision 0."""
    if len(truth) == 0:
        raise ValueError("truth profile must be non-empty")
    overlap = overlap_count(estimate, truth, matcher)
    precision = overlap / len(estimate) if len(estimate) else 0.0
    recall = overlap / len(truth)
    return precision, recall


def profile_reward(estimate: Profile, truth: Profile, matcher: SlotMatcher) -> float:
    """F1-style overlap reward 2|inter| / (|estimate| + |truth|), in [0, 1]."""
    if len(truth) == 0:
        raise ValueError("truth profile must be non-empty")
    overlap = overlap_count(estimate, truth, matcher)
    if len(estimate) == 0:
        return 0.0
    return 2.0 * overlap / (len(estimate) + len(truth))


# --- matcher benchmark -------------------------------------------------------


def _load_rewrite_tables() -> dict:
    with resources.files("dialign.data").joinpath("paraphrase.json").open() as fh:
        return json.load(fh)


@dataclass(frozen=True)
class OverlapBenchCase:
    """One benchmark item: a rewritten profile with a known true overlap."""

    original: Profile
    rewritten: Profile
    ground_truth_overlap: int
    altered_count: int


def _paraphrase(value: str, rules: Sequence[str], rng: random.Random) -> str:
    template = rng.choice(list(rules))
    return template.format(value=value)


def _alter(
    slot: str,
    value: str,
    pools: Mapping[str, Sequence[str]],
    rng: random.Random,
    counter: int,
) -> str:
    # The substitute must not match the original under either bundled matcher.
    candidates = [
        v
        for v in pools.get(slot, [])
        if normalize_text(v) != normalize_text(value)
        and len(token_set(v) & token_set(value)) / max(len(token_set(v) | token_set(value)), 1) < 0.5
    ]
    if candidates:
        return rng.choice(candidates)
    return f"substitute{counter} item{counter}"


def build_overlap_bench(
    source: Profile,
    a: int,
    b: int,
    seed: int,
    paraphrase: bool = True,
) -> OverlapBenchCase:
    """Rewrite ``a`` entries as paraphrases and ``b`` as altered values.

    The rewritten profile contains exactly the a + b rewritten entries;
    untouched entries are excluded.  With ``paraphrase=False`` the ``a``
    entries are copied verbatim (identity rewrite), which calibrates
    exact matchers.  Deterministic for a given (source, a, b, seed).
    """
    if a < 0 or b < 0:
        raise ValueError("a and b must be non-negative")
    if a + b > len(source):
        raise ValueError(f"a+b={a+b} exceeds profile size {len(source)}")
    tables = _load_rewrite_tables()
    rng = random.Random(seed)
    slots = list(source.entries)
    rng.shuffle(slots)
    para_slots, alter_slots = slots[:a], slots[a : a + b]
    rewritten: dict[str, str] = {}
    for slot in source.entries:  # preserve source order in the rewrite
        if slot in para_slots:
            original_value = source.entries[slot]
            rewritten[slot] = (
                _paraphrase(original_value, tables["paraphrase_rules"], rng)
                if paraphrase
                else original_value
            )
        elif slot in alter_slots:
            rewritten[slot] = _alter(
                slot, source.entries[slot], tables["alteration_pools"], rng, len(rewritten)
            )
    return OverlapBenchCase(
        original=source,
        rewritten=Profile(schema=source.schema, entries=rewritten),
        ground_truth_overlap=a,
        altered_count=b,
    )


def eval_matcher(
    cases: Iterable[OverlapBenchCase], matcher: SlotMatcher
) -> dict[str, float]:
    """Score a matcher's predicted overlap against the known answers.

    Returns exact accuracy, fuzzy accuracy (off by at most one), MSE, and
    RMSE over the case list.
    """
    preds: list[int] = []
    truths: list[int] = []
    for case in cases:
        preds.append(overlap_count(case.rewritten, case.original, matcher))
        truths.append(case.ground_truth_overlap)
    if not preds:
        raise ValueError("eval_matcher needs at least one case")
    n = len(preds)
    errors = [p - t for p, t in zip(preds, truths)]
    exact = sum(1 for e in errors if e == 0) / n
    fuzzy = sum(1 for e in errors if abs(e) <= 1) / n
    mse = sum(e * e for e in errors) / n
    return {"exact_acc": exact, "fuzzy_acc": fuzzy, "mse": mse, "rmse": mse**0.5}

"""Scenario files: synthetic user profiles plus episode settings.

A scenario bundles everything an episode needs on the user side: the ground
truth profile, the per-turn reveal schedule, an optional conflict, the
horizon, and the style seed controlling utterance variation.  Scenarios are
stored one JSON file each so runs can be reproduced and shared.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .profiles import ALOE_SLOTS, Profile, SlotSchema, normalize_text, token_set
from .user_sim import ConflictSpec, UserConfig


def _load_pools() -> dict[str, dict[str, list[str]]]:
    with resources.files("dialign.data").joinpath("value_pools.json").open() as fh:
        return json.load(fh)


_POOLS = _load_pools()

DEFAULT_CONFLICT_TURN = 6


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    profile: Profile
    horizon: int
    reveal_schedule: tuple[int, ...] | None
    conflict: ConflictSpec | None
    style_seed: int

    def user_config(
        self,
        horizon: int | None = None,
        conflict: ConflictSpec | None = None,
    ) -> UserConfig:
        """Materialize the episode config, optionally overriding pieces.

        Overriding the horizon resets the reveal schedule to the default
        one-per-turn so longer episodes keep revealing.
        """
        effective_horizon = horizon if horizon is not None else self.horizon
        schedule = self.reveal_schedule if horizon is None else None
        return UserConfig(
            profile=self.profile,
            horizon=effective_horizon,
            reveal_schedule=schedule,
            conflict=conflict if conflict is not None else self.conflict,
            style_seed=self.style_seed,
        )

    def to_payload(self) -> dict:
        return {
            "id": self.scenario_id,
            "profile": self.profile.to_record(),
            "reveal_schedule": list(self.reveal_schedule) if self.reveal_schedule else None,
            "conflict": (
                {"turn": self.conflict.turn, "replace": dict(self.conflict.replace)}
                if self.conflict
                else None
            ),
            "horizon": self.horizon,
            "style_seed": self.style_seed,
        }


def _schema_for(extended: bool) -> SlotSchema:
    if not extended:
        return SlotSchema.aloe()
    extra = tuple(_POOLS["extended"])
    return SlotSchema(name="extended", slots=ALOE_SLOTS + extra, open_schema=True)


def generate_profile(rng: random.Random, schema: SlotSchema) -> Profile:
    pools = dict(_POOLS["aloe"])
    pools.update(_POOLS["extended"])
    entries = {slot: rng.choice(pools[slot]) for slot in schema.slots}
    return Profile(schema=schema, entries=entries)


def reveal_order(profile: Profile, style_seed: int) -> list[str]:
    """The order slots surface in an episode; must mirror the simulator."""
    order = list(profile.entries)
    random.Random(style_seed).shuffle(order)
    return order


def default_conflict(
    profile: Profile,
    style_seed: int,
    rng: random.Random,
    turn: int = DEFAULT_CONFLICT_TURN,
) -> ConflictSpec:
    """Swap the first-revealed slot's value for a clearly different one.

    Targeting the earliest reveal guarantees the slot is already revealed
    well before the conflict turn, so an evidence-tracking agent is left
    holding a stale value and the reward dip is observable.
    """
    target = reveal_order(profile, style_seed)[0]
    original = profile.entries[target]
    pools = dict(_POOLS["aloe"])
    pools.update(_POOLS["extended"])
    candidates = [
        v
        for v in pools.get(target, [])
        if normalize_text(v) != normalize_text(original)
        and len(token_set(v) & token_set(original)) / max(len(token_set(v) | token_set(original)), 1)
        < 0.5
    ]
    replacement = rng.choice(candidates) if candidates else f"changed {target.lower()}"
    return ConflictSpec(turn=turn, replace={target: replacement})


def generate_scenarios(
    count: int,
    seed: int,
    horizon: int = 10,
    conflict: bool = False,
    extended: bool = False,
) -> list[Scenario]:
    if count < 1:
        raise ConfigError("need at least one scenario")
    if conflict and horizon < DEFAULT_CONFLICT_TURN + 1:
        raise ConfigError(
            f"conflict scenarios need horizon > {DEFAULT_CONFLICT_TURN} to recover"
        )
    rng = random.Random(seed)
    schema = _schema_for(extended)
    scenarios: list[Scenario] = []
    for index in range(count):
        profile = generate_profile(rng, schema)
        style_seed = rng.randrange(2**31)
        spec = default_conflict(profile, style_seed, rng) if conflict else None
        scenarios.append(
            Scenario(
                scenario_id=f"scenario_{index:04d}",
                profile=profile,
                horizon=horizon,
                reveal_schedule=tuple([1] * horizon),
                conflict=spec,
                style_seed=style_seed,
            )
        )
    return scenarios


def save_scenarios(scenarios: list[Scenario], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for scenario in scenarios:
        path = out / f"{scenario.scenario_id}.json"
        with open(path, "w") as fh:
            json.dump(scenario.to_payload(), fh, indent=2)
            fh.write("\n")
        paths.append(path)
    return paths


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("profile", "horizon", "style_seed"):
        if key not in payload:
            raise ConfigError(f"scenario file {path} missing field {key!r}")
    from .profiles import load_profile

    profile = load_profile(payload["profile"])
    conflict = None
    if payload.get("conflict"):
        conflict = ConflictSpec(
            turn=int(payload["conflict"]["turn"]),
            replace=dict(payload["conflict"]["replace"]),
        )
    schedule = payload.get("reveal_schedule")
    return Scenario(
        scenario_id=str(payload.get("id", Path(path).stem)),
        profile=profile,
        horizon=int(payload["horizon"]),
        reveal_schedule=tuple(schedule) if schedule else None,
        conflict=conflict,
        style_seed=int(payload["style_seed"]),
    )


def load_scenarios(source: str | Path) -> list[Scenario]:
    """Load every scenario JSON from a directory (or a single file)."""
    path = Path(source)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise ConfigError(f"no scenario files in {path}")
        return [load_scenario(f) for f in files]
    if path.is_file():
        return [load_scenario(path)]
    raise FileNotFoundError(f"scenario source {path} does not exist")

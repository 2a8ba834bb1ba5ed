"""Experiment configuration, presets and strategy definitions."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..adversary import AttackScenario

CONFIG_FORMAT = 1


@dataclass(frozen=True)
class Strategy:
    name: str
    reputation: bool
    social: bool
    verify: bool
    # None: use the configured m
    m: int | None = None


STRATEGIES = {
    s.name: s
    for s in (
        Strategy("baseline", reputation=False, social=False, verify=False),
        Strategy("credence", reputation=True, social=False, verify=False, m=1),
        Strategy("credence-social", reputation=True, social=True, verify=False, m=1),
        Strategy("green-nonsocial", reputation=True, social=False, verify=True),
        Strategy("green", reputation=True, social=True, verify=True),
    )
}


def strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None


@dataclass(frozen=True)
class SimConfig:
    # population and social graph
    users: int = 2000
    avg_degree: float = 8.0
    group_count: int = 50
    group_alpha: float = 1.0
    trace: str | None = None
    # protocol
    m: int = 5
    beta: float = 0.2
    gamma: float = 0.9
    p_o: float = 0.9
    p_d: float = 0.9
    efpr: float = 0.133
    verify_r: int = 2
    vote_noise: float = 0.1
    voter_sample_cap: int = 50
    min_friend_votes: int = 4
    download_sources: int | None = None  # None: blocks // verify_r
    # content
    file_count: int = 200
    versions_per_file: int = 20
    decoys_per_file: int = 20
    blocks_per_version: int = 10
    authentic_shares_per_genuine: int = 20
    zipf_content: float = 0.8
    # attack
    attack: str = "decoy"
    polluted_shares_per_polluter: int | None = None  # None: 400 decoy / 50 identifier
    voting_strategy: str = "opposite"
    tricky_q: float = 0.5
    maintainer_corruption_rate: float = 0.0
    placement: str = "all"
    # schedule
    experimental_cycles: int = 20
    query_cycles_per_experimental_cycle: int = 50_000
    friend_db_refresh_period: int = 100_000
    strategy: str = "green"
    seed: int = 1

    def __post_init__(self):
        for name in ("beta", "p_o", "p_d", "efpr", "vote_noise", "tricky_q",
                     "maintainer_corruption_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("users", "m", "file_count", "versions_per_file", "blocks_per_version",
                     "experimental_cycles", "friend_db_refresh_period", "voter_sample_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("query_cycles_per_experimental_cycle", "decoys_per_file",
                     "authentic_shares_per_genuine", "min_friend_votes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.blocks_per_version > 64:
            raise ValueError("the simulator tracks at most 64 blocks per version")
        if not 0 <= self.verify_r <= self.blocks_per_version:
            raise ValueError("verify_r must lie in [0, blocks_per_version]")
        if self.authentic_shares_per_genuine > self.file_count * self.versions_per_file:
            raise ValueError("more authentic shares per user than versions in the catalog")
        if self.download_sources is not None and self.download_sources < 1:
            raise ValueError("download_sources must be at least 1")
        strategy(self.strategy)
        self.scenario()  # validates the attack fields

    @property
    def sources(self) -> int:
        if self.download_sources is not None:
            return self.download_sources
        return max(1, self.blocks_per_version // max(self.verify_r, 1))

    @property
    def total_cycles(self) -> int:
        return self.experimental_cycles * self.query_cycles_per_experimental_cycle

    def scenario(self) -> AttackScenario:
        return AttackScenario(
            kind=self.attack,
            polluted_versions_per_polluter=self.polluted_shares_per_polluter,
            voting_strategy=self.voting_strategy,
            tricky_q=self.tricky_q,
            maintainer_corruption_rate=self.maintainer_corruption_rate,
            placement=self.placement,
        )

    def effective_m(self) -> int:
        return strategy(self.strategy).m or self.m

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {"format": CONFIG_FORMAT, **dataclasses.asdict(self)}


PRESETS: dict[str, dict[str, Any]] = {
    # the desk-scale stand-in for the full experiment
    "desk": {},
    "desk-identifier": {"attack": "identifier"},
    # half the desk population over half the cycles; for multi-run sweeps
    "sweep": {
        "users": 1000,
        "group_count": 25,
        "file_count": 100,
        "experimental_cycles": 10,
        "query_cycles_per_experimental_cycle": 25_000,
        "friend_db_refresh_period": 50_000,
    },
    "sweep-identifier": {
        "users": 1000,
        "group_count": 25,
        "file_count": 100,
        "experimental_cycles": 10,
        "query_cycles_per_experimental_cycle": 25_000,
        "friend_db_refresh_period": 50_000,
        "attack": "identifier",
    },
    # a few seconds; used by the test suite
    "smoke": {
        "users": 300,
        "group_count": 10,
        "file_count": 30,
        "versions_per_file": 6,
        "decoys_per_file": 6,
        "authentic_shares_per_genuine": 5,
        "polluted_shares_per_polluter": 20,
        "experimental_cycles": 3,
        "query_cycles_per_experimental_cycle": 2000,
        "friend_db_refresh_period": 1000,
    },
    # what the original evaluation used; far beyond a desk machine
    "paper": {
        "users": 1_157_827,
        "m": 1,
        "file_count": 10_000,
        "versions_per_file": 100,
        "experimental_cycles": 50,
        "query_cycles_per_experimental_cycle": 5_000_000,
    },
}

DEFAULTS = SimConfig()


def preset(name: str, **overrides) -> SimConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return SimConfig(**{**base, **overrides})


def deviations(cfg: SimConfig) -> dict[str, tuple[Any, Any]]:
    """Fields where ``cfg`` differs from the full-scale setup, as (value, full-scale value)."""
    full = SimConfig(**PRESETS["paper"])
    return {
        f.name: (getattr(cfg, f.name), getattr(full, f.name))
        for f in dataclasses.fields(SimConfig)
        if getattr(cfg, f.name) != getattr(full, f.name)
    }


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(SimConfig)}


def coerce(name: str, text: str) -> Any:
    """Parse a command-line ``name=value`` override to the field's type."""
    if name not in _FIELD_TYPES:
        raise ValueError(f"unknown config field {name!r}")
    default = getattr(DEFAULTS, name)
    if text.lower() in ("none", "null"):
        return None
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, int) or name in ("download_sources", "polluted_shares_per_polluter"):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None,
                base: str = "desk") -> SimConfig:
    """Preset, then the JSON config file, then explicit overrides."""
    values: dict[str, Any] = dict(PRESETS[base]) if base else {}
    if path is not None:
        doc = json.loads(Path(path).read_text())
        fmt = doc.pop("format", CONFIG_FORMAT)
        if fmt != CONFIG_FORMAT:
            raise ValueError(f"unsupported config format {fmt}")
        unknown = set(doc) - set(_FIELD_TYPES)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        values.update(doc)
    values.update(overrides or {})
    return SimConfig(**values)

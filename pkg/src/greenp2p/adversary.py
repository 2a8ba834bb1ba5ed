"""Attacker behaviour: pollution seeding, malicious votes, corrupted responses."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from typing import Iterable

from .content import Catalog, FileInfoRecord, MaintainerStore, version_id_of, zipf_cdf, zipf_pick

DECOY = "decoy"
IDENTIFIER = "identifier"
KINDS = (DECOY, IDENTIFIER)
OPPOSITE = "opposite"
TRICKY = "tricky"
CORRUPTION_MODES = ("refuse", "fabricate", "vi-rewrite", "vi-dl-rewrite")
PLACEMENTS = ("all", "random-r", "fixed-r")
DEFAULT_SHARES = {DECOY: 400, IDENTIFIER: 50}


@dataclass(frozen=True)
class AttackScenario:
    kind: str = DECOY
    polluted_versions_per_polluter: int | None = None
    voting_strategy: str = OPPOSITE
    tricky_q: float = 0.5
    maintainer_corruption_rate: float = 0.0
    collude: bool = True
    # identifier corruption: which blocks of a polluter copy are tampered with
    placement: str = "all"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; choose from {KINDS}")
        if self.voting_strategy not in (OPPOSITE, TRICKY):
            raise ValueError(f"unknown voting strategy {self.voting_strategy!r}")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"unknown placement {self.placement!r}; choose from {PLACEMENTS}")
        for name in ("tricky_q", "maintainer_corruption_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.shares < 0:
            raise ValueError("polluted share count must be non-negative")

    @property
    def shares(self) -> int:
        if self.polluted_versions_per_polluter is None:
            return DEFAULT_SHARES[self.kind]
        return self.polluted_versions_per_polluter


def corruption_set(block_count: int, r: int, placement: str, rng: random.Random) -> frozenset[int]:
    if placement == "all":
        return frozenset(range(block_count))
    if placement == "random-r":
        return frozenset(rng.sample(range(block_count), r))
    if placement == "fixed-r":
        return frozenset(range(block_count - r, block_count))
    raise ValueError(f"unknown placement {placement!r}")


def seed_pollution(
    scenario: AttackScenario,
    polluters: Iterable[int],
    catalog: Catalog,
    store: MaintainerStore,
    rng: random.Random,
    *,
    r: int,
    alpha: float = 0.8,
    holdings: dict[int, set] | None = None,
) -> int:
    """Have every polluter publish its polluted shares; returns the total.

    File and version are both drawn by Zipf rank.  A polluter never shares
    the same version twice; a draw that repeats is redrawn, and a polluter
    asking for more versions than exist gets every one of them.
    """
    polluters = list(polluters)
    file_cdf = zipf_cdf(len(catalog.files), alpha)
    pools = catalog.decoys if scenario.kind == DECOY else catalog.authentic
    cdfs = {f: zipf_cdf(len(v), alpha) for f, v in pools.items() if v}
    available = sum(len(v) for v in pools.values())
    if scenario.kind == DECOY and scenario.shares and polluters and not available:
        raise ValueError("decoy insertion needs a non-empty decoy pool")
    total = 0
    for p in polluters:
        want = min(scenario.shares, available)
        mine: set[bytes] = set()
        while len(mine) < want:
            f = catalog.files[zipf_pick(file_cdf, rng)]
            if f not in cdfs:
                continue
            vid = pools[f][zipf_pick(cdfs[f], rng)]
            if vid in mine:
                continue
            mine.add(vid)
            truth = catalog.truth[vid]
            if scenario.kind == IDENTIFIER:
                if truth.authentic:
                    truth = catalog.truth[vid] = truth.corrupted_twin(r)
                truth.corrupt_copy(p, corruption_set(truth.block_count, r, scenario.placement, rng))
            store.publish(p, truth, catalog.digests[vid])
            if holdings is not None:
                holdings.setdefault(p, set()).add((f, vid))
            total += 1
    return total


def malicious_vote(
    polluted: bool, scenario: AttackScenario, rng: random.Random | None = None
) -> int:
    """Vote on a version whose real state is ``polluted``.

    Opposite promotes pollution and demotes authentic content.  Tricky votes
    honestly with probability ``tricky_q`` to build up correlation.
    """
    honest = -1 if polluted else 1
    if scenario.voting_strategy == TRICKY:
        if rng is None:
            raise ValueError("tricky voting needs an rng")
        if rng.random() < scenario.tricky_q:
            return honest
    return -honest


# -- maintainer-side corruption ------------------------------------------------


def _fake_id(*parts) -> int:
    return int.from_bytes(hashlib.sha1(repr(parts).encode()).digest(), "big")


def _fake_digests(records: list[FileInfoRecord], salt) -> tuple[bytes, ...]:
    base = records[0].digest_list if records and records[0].digest_list else (b"\x00" * 20,)
    return tuple(hashlib.sha1(d + repr(salt).encode()).digest() for d in base)


def apply_corruption(mode: str, records: list[FileInfoRecord], salt) -> list[FileInfoRecord]:
    """Rewrite a maintainer's honest answer in one of the four ways.

    ``salt`` drives the fabricated content: colluders share a salt and so
    fabricate identical pairs, which is the worst case for the tally.
    """
    recs = [r.copy() for r in records]
    if mode == "refuse":
        return []
    if mode == "fabricate":
        fake_p, fake_o = _fake_id("provider", salt), _fake_id("voter", salt)
        for r in recs:
            r.provider_ids.append(fake_p)
            r.voter_ids.append(fake_o)
        dl = _fake_digests(records, salt)
        recs.append(FileInfoRecord(version_id_of(dl), dl, [fake_p], [fake_o]))
        return recs
    if mode == "vi-rewrite":
        return [
            replace(r, version_id=hashlib.sha1(r.version_id + repr(salt).encode()).digest())
            for r in recs
        ]
    if mode == "vi-dl-rewrite":
        out = []
        for r in recs:
            dl = tuple(hashlib.sha1(d + repr(salt).encode()).digest() for d in r.digest_list)
            out.append(replace(r, version_id=version_id_of(dl), digest_list=dl))
        return out
    raise ValueError(f"unknown corruption mode {mode!r}")


def corrupt_response(
    maintainer: int,
    honest_records: list[FileInfoRecord],
    rng: random.Random,
    *,
    rate: float,
    mode: str | None = None,
    collude: bool = True,
    nonce: int = 0,
) -> list[FileInfoRecord]:
    """What a malicious maintainer returns instead of ``honest_records``.

    With probability ``rate`` the answer is rewritten; the mode is ``mode``
    or else drawn uniformly.  Colluders draw the mode and the fabricated
    content from ``nonce`` alone so they all tell the same lie.
    """
    if rng.random() >= rate:
        return [r.copy() for r in honest_records]
    if collude:
        salt = ("collude", nonce)
        chosen = mode or CORRUPTION_MODES[random.Random(repr(salt)).randrange(len(CORRUPTION_MODES))]
    else:
        salt = ("solo", nonce, maintainer)
        chosen = mode or rng.choice(CORRUPTION_MODES)
    return apply_corruption(chosen, honest_records, salt)


def corrupt_vote_pairs(pairs: set, salt, flip_all: bool = True) -> set:
    """A vote maintainer's lie: every stored vote flipped, plus one invented vote."""
    out = {(vid, -v) for vid, v in pairs} if flip_all else set(pairs)
    out.add((hashlib.sha1(repr(("vote", salt)).encode()).digest(), 1))
    return out

"""Proactive majority filtering of maintainer responses.

A requestor pools the tables returned by the ``m`` maintainers of a file and
keeps only what at least ``ceil((m + 1) / 2)`` of them agree on.  Pairs are
counted once per responding maintainer, never deduplicated across
maintainers.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .content import FileInfoRecord, Response


def majority_threshold(m: int) -> int:
    if m < 1:
        raise ValueError("m must be at least 1")
    return (m + 2) // 2  # == ceil((m + 1) / 2)


@dataclass(frozen=True)
class PairTally:
    pair: tuple
    count: int


def tally(per_maintainer: Iterable[Iterable[Hashable]]) -> Counter:
    """Count each item once per maintainer that reported it."""
    counts: Counter = Counter()
    for items in per_maintainer:
        counts.update(set(items))
    return counts


def surviving(per_maintainer: Iterable[Iterable[Hashable]], m: int) -> set:
    t = majority_threshold(m)
    return {item for item, c in tally(per_maintainer).items() if c >= t}


def majority_filter(responses: Response, m: int) -> list[FileInfoRecord]:
    """Rebuild the file table from ``m`` maintainer responses.

    Records whose digest list does not hash to their version id are
    discarded before counting.  A version is kept when its (VI, DL) binding
    reaches the threshold; its PIL and OIL are the (VI, PI) and (VI, OI)
    pairs that reach it too.  Versions come out in order of first appearance.
    """
    if len(responses) > m:
        raise ValueError(f"got {len(responses)} responses from a group of {m}")
    bindings, providers, voters = [], [], []
    order: dict[bytes, None] = {}
    for _, records in responses:
        b, p, o = set(), set(), set()
        for rec in records:
            if not rec.consistent():
                continue
            order.setdefault(rec.version_id, None)
            b.add((rec.version_id, rec.digest_list))
            p.update((rec.version_id, pi) for pi in rec.provider_ids)
            o.update((rec.version_id, oi) for oi in rec.voter_ids)
        bindings.append(b)
        providers.append(p)
        voters.append(o)

    kept_bindings = dict(surviving(bindings, m))
    if not kept_bindings:
        return []
    kept_p = _grouped(surviving(providers, m))
    kept_o = _grouped(surviving(voters, m))

    out = []
    for vid in order:
        dl = kept_bindings.get(vid)
        if dl is None:
            continue
        out.append(FileInfoRecord(vid, dl, kept_p.get(vid, []), kept_o.get(vid, [])))
    return out


def _grouped(kept: set) -> dict[bytes, list]:
    # identifiers sorted within each version so the output is deterministic
    grouped: dict[bytes, list] = {}
    for vid, ident in sorted(kept):
        grouped.setdefault(vid, []).append(ident)
    return grouped


def filter_pairs(responses: Sequence[Iterable[Hashable]], m: int) -> set:
    """Majority filter for flat pair lists, e.g. (version, vote) replicas."""
    if len(responses) > m:
        raise ValueError(f"got {len(responses)} responses from a group of {m}")
    return surviving(responses, m)


def group_reliability(m: int, beta: float) -> float:
    """Probability that fewer than half of ``m`` i.i.d. maintainers are malicious at rate ``beta``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    return math.fsum(
        math.comb(m, x) * beta**x * (1.0 - beta) ** (m - x) for x in range((m - 1) // 2 + 1)
    )


class Infeasible(ValueError):
    """No odd group size up to the cap reaches the target reliability."""


def min_group_size(beta_worst: float, target: float, cap: int = 99) -> int:
    """Smallest odd ``m`` whose group reliability at ``beta_worst`` reaches ``target``."""
    if not 0.0 < target <= 1.0:
        raise ValueError("target reliability must lie in (0, 1]")
    if beta_worst >= 0.5:
        raise Infeasible("a malicious majority cannot be ruled out when beta >= 0.5")
    if beta_worst < 0.0:
        raise ValueError("beta must be non-negative")
    for m in range(1, cap + 1, 2):
        if group_reliability(m, beta_worst) >= target:
            return m
    raise Infeasible(f"no odd m <= {cap} reaches reliability {target} at beta={beta_worst}")

"""Probabilistic version selection.

A version is drawn with probability proportional to |PIL| * (Rep + 1), so a
well-provisioned version with a bad score can still lose to a rare version
that its voters trust.
"""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Candidate:
    version_id: bytes
    provider_count: int
    rep: float = 0.0

    @property
    def rep_shifted(self) -> float:
        return self.rep + 1.0


def selection_weights(candidates: Sequence[Candidate], *, use_rep: bool = True) -> list[float]:
    return [
        c.provider_count * (c.rep_shifted if use_rep else 1.0) if c.provider_count > 0 else 0.0
        for c in candidates
    ]


def selection_probabilities(candidates: Sequence[Candidate], *, use_rep: bool = True) -> list[float]:
    """The exact distribution :func:`select_version` samples from."""
    if not candidates:
        raise ValueError("no candidate versions")
    w = selection_weights(candidates, use_rep=use_rep)
    total = sum(w)
    if total > 0:
        return [x / total for x in w]
    live = [c.provider_count > 0 for c in candidates]
    if not any(live):
        live = [True] * len(candidates)
    return [1.0 / sum(live) if ok else 0.0 for ok in live]


def _draw(candidates: Sequence[Candidate], weights: list[float], rng: random.Random) -> bytes:
    total = sum(weights)
    if total <= 0:
        # every weight vanished: fall back to a uniform pick among live versions
        live = [c for c in candidates if c.provider_count > 0] or list(candidates)
        return live[rng.randrange(len(live))].version_id
    cum = list(itertools.accumulate(weights))
    i = bisect.bisect_right(cum, rng.random() * total)
    return candidates[min(i, len(candidates) - 1)].version_id


def select_version(candidates: Sequence[Candidate], rng: random.Random) -> bytes:
    if not candidates:
        raise ValueError("no candidate versions")
    return _draw(candidates, selection_weights(candidates), rng)


def select_baseline(candidates: Sequence[Candidate], rng: random.Random) -> bytes:
    """Selection by provider count alone."""
    if not candidates:
        raise ValueError("no candidate versions")
    return _draw(candidates, selection_weights(candidates, use_rep=False), rng)

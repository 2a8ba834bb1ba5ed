"""Block-level download with realtime verification, and the v_min planner.

A requestor verifying ``v`` of ``b`` blocks chosen uniformly without
replacement misses every one of ``r`` tampered blocks with probability
C(b-r, v) / C(b, v).  The planner picks the smallest ``v`` that keeps this
false positive rate under the expected rate the user is willing to accept.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .content import VersionInstance

# Default EFPR values are quoted to three decimals (0.133 stands for 2/15),
# so an FPR that rounds to the target counts as meeting it.
ROUNDING_TOL = 5e-4


def fpr_exact(b: int, r: int, v: int) -> Fraction:
    """C(b-r, v) / C(b, v) as an exact fraction, built up factor by factor."""
    if not (b >= 1 and 0 <= r <= b and 0 <= v <= b):
        raise ValueError(f"need b >= 1, 0 <= r <= b, 0 <= v <= b (got b={b}, r={r}, v={v})")
    if r + v > b:
        return Fraction(0)
    out = Fraction(1)
    for i in range(v):
        out *= Fraction(b - r - i, b - i)
    return out


def fpr(b: int, r: int, v: int) -> float:
    return float(fpr_exact(b, r, v))


@dataclass(frozen=True)
class VerificationPlan:
    b: int
    r: int
    efpr: float
    v_min: int
    achieved_fpr: float

    @classmethod
    def fixed(cls, b: int, r: int, v: int) -> "VerificationPlan":
        f = fpr(b, r, v)
        return cls(b, r, f, v, f)


def plan_verification(b: int, r: int, efpr: float, *, tol: float = ROUNDING_TOL) -> VerificationPlan:
    """Smallest number of blocks to verify so that FPR <= EFPR.

    ``efpr >= 1`` verifies nothing.  ``efpr == 0`` is taken literally: it asks
    for b - r + 1 blocks (b when r = 0), which makes a miss impossible.
    With r = 0 no sample can ever catch anything, so every block is checked.
    """
    if b < 1:
        raise ValueError("b must be at least 1")
    if not 0 <= r <= b:
        raise ValueError(f"r must lie in [0, b]; got r={r}, b={b}")
    if not 0.0 <= efpr <= 1.0:
        raise ValueError("efpr must lie in [0, 1]")
    if efpr >= 1.0:
        v = 0
    elif efpr == 0.0 or r == 0:
        v = b - r + 1 if r >= 1 else b
    else:
        limit = Fraction(efpr) + Fraction(tol)
        v = next(v for v in range(b + 1) if fpr_exact(b, r, v) <= limit)
    return VerificationPlan(b, r, efpr, v, fpr(b, r, v))


@dataclass(frozen=True)
class DownloadOutcome:
    version_id: bytes
    accepted: bool
    detected_pollution: bool
    blocks_verified: int
    corrupted_received: frozenset[int] = frozenset()
    polluted: bool = False

    @property
    def polluted_accepted(self) -> bool:
        return self.accepted and self.polluted


def assign_blocks(b: int, providers: Sequence[int], rng: random.Random) -> list[int]:
    """Round-robin over a random provider order: entry i serves block i."""
    order = list(providers)
    rng.shuffle(order)
    return [order[i % len(order)] for i in range(b)]


def verify_positions(plan: VerificationPlan, rng: random.Random) -> list[int]:
    return rng.sample(range(plan.b), plan.v_min)


def download(
    candidate_version: bytes,
    providers: Sequence[int],
    plan: VerificationPlan,
    truth: VersionInstance,
    rng: random.Random,
    *,
    positions: Iterable[int] | None = None,
) -> DownloadOutcome:
    """Fetch every block and check ``plan.v_min`` of them against the digest list.

    A block fails its check when it came from a provider whose copy has that
    index tampered with.  Decoy blocks hash to the decoy's own digest list,
    so they pass; a decoy is only found out once the user looks at the
    assembled content.  ``positions`` overrides the random sample (used for
    the fixed-position negative control).
    """
    if not providers:
        raise ValueError("no providers to download from")
    if plan.b != truth.block_count:
        raise ValueError("plan and version disagree on the block count")
    sources = assign_blocks(plan.b, providers, rng)
    bad = frozenset(i for i, p in enumerate(sources) if i in truth.corrupted_blocks(p))
    checked = list(positions) if positions is not None else verify_positions(plan, rng)
    detected = any(i in bad for i in checked)
    return DownloadOutcome(
        version_id=candidate_version,
        accepted=not detected,
        detected_pollution=detected,
        blocks_verified=len(checked),
        corrupted_received=bad,
        polluted=truth.decoy or bool(bad),
    )


def fixed_positions(plan: VerificationPlan) -> list[int]:
    """Always check the first v_min blocks; defeated by an attacker who knows it."""
    return list(range(plan.v_min))


@dataclass(frozen=True)
class Behavior:
    p_o: float = 0.9
    p_d: float = 0.9
    vote_noise: float = 0.1


def noisy_vote(correct: int, behavior, rng: random.Random) -> int:
    return -correct if rng.random() < behavior.vote_noise else correct


def finalize(
    outcome: DownloadOutcome,
    requestor: int,
    behavior,
    rng: random.Random,
    *,
    truth: VersionInstance,
    digest_list,
    store,
    votes,
    holdings: set,
) -> bool:
    """Apply a genuine user's reaction to a download; returns True to retry.

    ``behavior`` is anything with ``p_o``, ``p_d`` and ``vote_noise``.
    A download rejected by verification is dropped without a vote: the
    requestor cannot tell a bad provider from a bad version.
    """
    if outcome.detected_pollution:
        return True
    vid = outcome.version_id
    if not outcome.polluted:
        if rng.random() < behavior.p_o:
            _vote(requestor, truth, vid, digest_list, noisy_vote(1, behavior, rng), store, votes)
        _share(requestor, truth, digest_list, outcome, store, holdings)
        return False
    if rng.random() < behavior.p_o:
        _vote(requestor, truth, vid, digest_list, noisy_vote(-1, behavior, rng), store, votes)
    if rng.random() >= behavior.p_d:
        _share(requestor, truth, digest_list, outcome, store, holdings)
    return True


def _vote(voter, truth, vid, digest_list, vote, store, votes) -> None:
    votes.store_vote(voter, vid, vote)
    store.register_vote_pointer(voter, truth.file, vid, digest_list)


def _share(requestor, truth, digest_list, outcome, store, holdings) -> None:
    if outcome.corrupted_received:
        truth.per_provider_corruption[requestor] = outcome.corrupted_received
    holdings.add((truth.file, outcome.version_id))
    store.publish(requestor, truth, digest_list)

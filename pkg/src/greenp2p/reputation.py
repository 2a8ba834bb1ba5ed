"""Vote histories, correlation weights and reputation scores.

Local histories hold +1/-1 votes.  Extended histories blend in the
friends' votes at weight ``gamma`` and hold real values in [-1, 1]; for the
correlation statistics an entry counts as positive when it is above zero
and negative when below, and a zero entry is treated as "not voted".
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Container, Iterable, Iterator, Mapping, Sequence

from .filtering import filter_pairs
from .overlay import MaintainerGroup, Ring, maintainer_group

FORMAT_VERSION = 1
THETA_CUTOFF = 0.5
MIN_FRIEND_VOTES = 4
DEFAULT_SAMPLE_CAP = 50


@dataclass
class VoteHistory:
    """Sparse map from version id to vote value."""

    entries: dict[bytes, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, vid: bytes) -> bool:
        return vid in self.entries

    def __iter__(self) -> Iterator[bytes]:
        return iter(self.entries)

    def get(self, vid: bytes, default: float = 0.0) -> float:
        return self.entries.get(vid, default)

    def items(self):
        return self.entries.items()

    def record(self, vid: bytes, vote: int) -> None:
        if vote not in (-1, 1):
            raise ValueError("a vote must be -1 or +1")
        self.entries[vid] = vote

    def is_local(self) -> bool:
        return all(v in (-1, 1) for v in self.entries.values())

    def to_json(self) -> str:
        """Compact form: sorted (hex version id, value) pairs under a format tag."""
        pairs = sorted((vid.hex(), v) for vid, v in self.entries.items())
        return json.dumps({"v": FORMAT_VERSION, "votes": pairs}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "VoteHistory":
        doc = json.loads(text)
        if doc.get("v") != FORMAT_VERSION:
            raise ValueError(f"unsupported vote history format {doc.get('v')!r}")
        return cls({bytes.fromhex(h): v for h, v in doc["votes"]})


# -- redundant storage --------------------------------------------------------

PairHook = Callable[[int, set], set]


def vote_subject(voter: int) -> str:
    """Subject string hashed to place a user's vote maintainers."""
    return format(voter, "040x")


class VoteStore:
    """Local histories plus the ``m`` vote-maintainer replicas of each user.

    Honest replicas receive every write, so they are kept as one shared map;
    maliciousness only shows up on reads via ``corrupt``.
    """

    def __init__(self, population: Ring | Iterable[int], m: int):
        self.ring = population if isinstance(population, Ring) else Ring(population)
        if m < 1:
            raise ValueError("vote maintainer group size must be at least 1")
        self.m = m
        self._histories: dict[int, dict[bytes, int]] = {}
        self._groups: dict[int, MaintainerGroup] = {}

    def group(self, voter: int) -> MaintainerGroup:
        g = self._groups.get(voter)
        if g is None:
            g = self._groups[voter] = maintainer_group(vote_subject(voter), self.m, self.ring)
        return g

    def store_vote(self, voter: int, vid: bytes, vote: int) -> None:
        if vote not in (-1, 1):
            raise ValueError("a vote must be -1 or +1")
        self._histories.setdefault(voter, {})[vid] = vote  # last write wins

    def local(self, voter: int) -> VoteHistory:
        return VoteHistory(dict(self._histories.get(voter, {})))

    def replica_responses(
        self,
        subject: int,
        *,
        offline: Container[int] = (),
        malicious: Container[int] = (),
        corrupt: PairHook | None = None,
    ) -> list[set]:
        honest = set(self._histories.get(subject, {}).items())
        out = []
        for member in self.group(subject).members:
            if member in offline:
                out.append(set())
            elif corrupt is not None and member in malicious:
                out.append(set(corrupt(member, set(honest))))
            else:
                out.append(set(honest))
        return out

    def fetch_history(self, subject: int, requestor: int | None = None, **kw) -> VoteHistory:
        """Rebuild ``subject``'s history from its replicas by majority.

        The subject itself is never contacted, so this works whether it is
        online or not.  If a version ends up with two surviving values (only
        possible with m < 3) it is dropped as contested.
        """
        kept = filter_pairs(self.replica_responses(subject, **kw), self.m)
        entries: dict[bytes, int] = {}
        contested = set()
        for vid, vote in kept:
            if vid in entries and entries[vid] != vote:
                contested.add(vid)
            entries[vid] = vote
        for vid in contested:
            del entries[vid]
        return VoteHistory(entries)


# -- correlation and scores --------------------------------------------------


@dataclass(frozen=True)
class CorrelationStats:
    a: float
    b: float
    p: float
    shared_count: int


def correlation_stats(hr: VoteHistory, ho: VoteHistory) -> CorrelationStats:
    small, large = (hr, ho) if len(hr) <= len(ho) else (ho, hr)
    n = na = nb = nboth = 0
    for vid, x in small.items():
        y = large.get(vid)
        if not x or not y:
            continue
        xr, yo = (x, y) if small is hr else (y, x)
        n += 1
        na += xr > 0
        nb += yo > 0
        nboth += xr > 0 and yo > 0
    if n == 0:
        return CorrelationStats(0.0, 0.0, 0.0, 0)
    return CorrelationStats(na / n, nb / n, nboth / n, n)


def raw_correlation(stats: CorrelationStats) -> float:
    a, b, p = stats.a, stats.b, stats.p
    denom = a * (1 - a) * b * (1 - b)
    if stats.shared_count == 0 or denom <= 0:
        return 0.0
    return (p - a * b) / math.sqrt(denom)


def threshold_theta(raw: float) -> float:
    raw = max(-1.0, min(1.0, raw))
    return raw if abs(raw) >= THETA_CUTOFF else 0.0


def correlation(hr: VoteHistory, ho: VoteHistory) -> float:
    """Thresholded correlation weight theta between two vote histories."""
    return threshold_theta(raw_correlation(correlation_stats(hr, ho)))


def weighted_score(votes_and_weights: Iterable[tuple[float, float]]) -> float:
    num = den = 0.0
    for vote, theta in votes_and_weights:
        num += vote * theta
        den += abs(theta)
    if den == 0:
        return 0.0
    return max(-1.0, min(1.0, num / den))


def sample_voters(
    voters: Sequence[int], cap: int | None, rng: random.Random | None
) -> Sequence[int]:
    if cap is None or len(voters) <= cap:
        return voters
    if rng is None:
        raise ValueError("an rng is needed to sample voters above the cap")
    return rng.sample(list(voters), cap)


def reputation_score(
    requestor_history: VoteHistory,
    version: bytes,
    voters: Sequence[int],
    fetch: Callable[[int], VoteHistory],
    *,
    sample_cap: int | None = DEFAULT_SAMPLE_CAP,
    rng: random.Random | None = None,
) -> float:
    """Correlation-weighted average of the voters' votes on ``version``.

    ``requestor_history`` should be the requestor's extended history.
    Voters whose fetched history lacks a vote on the version are skipped.
    """
    pairs = []
    for voter in sample_voters(voters, sample_cap, rng):
        h = fetch(voter)
        vote = h.get(version)
        if vote:
            pairs.append((vote, correlation(requestor_history, h)))
    return weighted_score(pairs)


def extend_history(
    local: VoteHistory, friend_histories: Sequence[VoteHistory], gamma: float
) -> VoteHistory:
    """Blend friends' votes into a local history.

    Per version: the weighted mean of the nonzero entries, where the local
    vote has weight 1 and each friend's vote weight ``gamma``, i.e.
    (v_R + gamma * sum v_F) / (w_R + gamma * k).  Unanimous slots therefore
    come out at exactly +1 or -1.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if not friend_histories:
        return VoteHistory(dict(local.entries))
    num: dict[bytes, float] = {}
    den: dict[bytes, float] = {}
    for weight, hist in [(1.0, local)] + [(gamma, f) for f in friend_histories]:
        for vid, v in hist.items():
            if v:
                num[vid] = num.get(vid, 0.0) + weight * v
                den[vid] = den.get(vid, 0.0) + weight * abs(v)
    out = {}
    for vid, s in num.items():
        val = s / den[vid]
        if val:
            out[vid] = max(-1.0, min(1.0, val))
    return VoteHistory(out)


# -- friend-vote database ----------------------------------------------------


@dataclass
class FriendVoteDb:
    owner: int
    snapshots: dict[int, tuple[VoteHistory, float]] = field(default_factory=dict)
    last_refresh: int = -1

    def eligible(self) -> Iterator[tuple[int, VoteHistory]]:
        for friend, (hist, theta) in self.snapshots.items():
            if theta >= THETA_CUTOFF:
                yield friend, hist

    def histories(self) -> list[VoteHistory]:
        return [h for h, _ in self.snapshots.values()]


def refresh_friend_db(
    owner: int,
    owner_local: VoteHistory,
    friends: Iterable[int],
    cycle: int,
    fetch: Callable[[int], VoteHistory],
    gamma: float,
) -> FriendVoteDb:
    """Snapshot the friends' histories and their weights against the owner.

    Weights are taken against the owner's extended history built from the
    very snapshots being stored.
    """
    fetched = {f: fetch(f) for f in friends}
    extended = extend_history(owner_local, list(fetched.values()), gamma)
    snaps = {f: (h, correlation(extended, h) if len(h) else 0.0) for f, h in fetched.items()}
    return FriendVoteDb(owner, snaps, cycle)


@dataclass(frozen=True)
class Score:
    value: float


@dataclass(frozen=True)
class FallBack:
    reason: str


def quick_estimate(version: bytes, db: FriendVoteDb, gamma: float) -> Score | FallBack:
    """Friend-vote shortcut: gamma * mean vote of eligible friends who voted."""
    votes = [h.get(version) for _, h in db.eligible()]
    votes = [v for v in votes if v]
    if len(votes) < MIN_FRIEND_VOTES:
        return FallBack(f"only {len(votes)} eligible friend votes")
    s = gamma * sum(votes) / len(votes)
    if abs(s) >= 0.5:
        return Score(s)
    return FallBack("friends disagree")


def scores_by_version(
    requestor_history: VoteHistory,
    oil: Mapping[bytes, Sequence[int]],
    fetch: Callable[[int], VoteHistory],
    **kw,
) -> dict[bytes, float]:
    return {vid: reputation_score(requestor_history, vid, v, fetch, **kw) for vid, v in oil.items()}

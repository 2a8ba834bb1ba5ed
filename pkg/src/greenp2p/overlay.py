"""Simulated identifier circle: hashing, successor lookup and maintainer groups.

Nodes and files live on a 2**160 ring.  There is no routing; a lookup is a
binary search over the sorted population snapshot.
"""

from __future__ import annotations

import bisect
import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

ID_BITS = 160
ID_SPACE = 1 << ID_BITS
SEPARATOR = b"|"


def hash_to_id(source: bytes | str) -> int:
    """Map a byte string (user address, file name, ...) onto the ring with SHA-1."""
    if isinstance(source, str):
        source = source.encode()
    if not source:
        raise ValueError("cannot hash an empty identifier source")
    return int.from_bytes(hashlib.sha1(source).digest(), "big")


def indexed_key(subject: bytes | str, i: int) -> bytes:
    """``subject | i`` as raw bytes; the index is rendered in decimal."""
    if isinstance(subject, str):
        subject = subject.encode()
    return subject + SEPARATOR + str(i).encode()


class Ring:
    """An immutable, sorted population snapshot."""

    def __init__(self, population: Iterable[int]):
        ids = sorted(set(population))
        if not ids:
            raise ValueError("population is empty")
        for node in (ids[0], ids[-1]):
            if not 0 <= node < ID_SPACE:
                raise ValueError(f"identifier {node} outside the ring")
        self._ids = ids

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, node: int) -> bool:
        i = bisect.bisect_left(self._ids, node)
        return i < len(self._ids) and self._ids[i] == node

    @property
    def ids(self) -> Sequence[int]:
        return self._ids

    def successor(self, key: int) -> int:
        i = bisect.bisect_left(self._ids, key % ID_SPACE)
        if i == len(self._ids):
            return self._ids[0]
        return self._ids[i]

    def without(self, node: int) -> "Ring":
        return Ring(x for x in self._ids if x != node)


def _as_ring(population: Ring | Iterable[int]) -> Ring:
    return population if isinstance(population, Ring) else Ring(population)


def successor(key: int, population: Ring | Iterable[int]) -> int:
    """First member whose identifier is equal to or follows ``key`` on the circle."""
    return _as_ring(population).successor(key)


@dataclass(frozen=True)
class MaintainerGroup:
    subject: str
    m: int
    members: tuple[int, ...]

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)


def maintainer_group(subject: str, m: int, population: Ring | Iterable[int]) -> MaintainerGroup:
    """The ``m`` maintainers of ``subject``: member i is successor(hash(subject | i)), i = 1..m."""
    if m < 1:
        raise ValueError("maintainer group size must be at least 1")
    ring = _as_ring(population)
    members = tuple(ring.successor(hash_to_id(indexed_key(subject, i))) for i in range(1, m + 1))
    return MaintainerGroup(subject=subject, m=m, members=members)


def arc_index(node: int, arcs: int) -> int:
    """Which of ``arcs`` equal slices of the ring a node falls into."""
    return node * arcs >> ID_BITS

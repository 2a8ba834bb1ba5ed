"""Ground-truth content model and the publication protocol.

Blocks carry no payload.  A block is a (file, variant, seed, index) tuple and
its digest is the SHA-1 of that tuple, so digests and version identifiers are
real hashes without any bytes being stored.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Container, Iterable, Sequence

from .overlay import MaintainerGroup, Ring, hash_to_id, maintainer_group

DigestList = tuple[bytes, ...]


def block_digest(file: str, content_seed: int, index: int, variant: str = "a") -> bytes:
    return hashlib.sha1(f"{file}\x00{variant}\x00{content_seed}\x00{index}".encode()).digest()


def version_id_of(digest_list: Sequence[bytes]) -> bytes:
    """Version identifier: hash over the concatenated digest list."""
    if not digest_list:
        raise ValueError("digest list is empty")
    return hashlib.sha1(b"".join(digest_list)).digest()


def file_id(name: str) -> int:
    return hash_to_id(name)


@dataclass
class VersionInstance:
    """What a version really is, as opposed to what maintainers say about it.

    ``per_provider_corruption`` maps a provider to the block indices its copy
    has tampered with.  Decoys are internally consistent (their blocks match
    their own digest list) so they carry no corruption sets; they are
    polluted because ``authentic`` is false.
    """

    file: str
    version_id: bytes
    authentic: bool
    block_count: int
    polluted_block_min: int = 0
    per_provider_corruption: dict[int, frozenset[int]] = field(default_factory=dict)
    decoy: bool = False

    def corrupt_copy(self, provider: int, blocks: Iterable[int]) -> None:
        """Record that ``provider``'s copy has the given blocks tampered with."""
        if self.authentic:
            raise ValueError("authentic versions carry no corrupted copies; use corrupted_twin()")
        blocks = frozenset(blocks)
        if len(blocks) < max(self.polluted_block_min, 1):
            raise ValueError(
                f"a polluted copy must tamper with at least {self.polluted_block_min} blocks"
            )
        if any(not 0 <= i < self.block_count for i in blocks):
            raise ValueError("corrupted block index out of range")
        self.per_provider_corruption[provider] = blocks

    def corrupted_blocks(self, provider: int) -> frozenset[int]:
        return self.per_provider_corruption.get(provider, frozenset())

    def corrupted_twin(self, min_polluted: int) -> "VersionInstance":
        """The identifier-corruption counterpart: same identifier, tampered data."""
        if not 1 <= min_polluted <= self.block_count:
            raise ValueError("min_polluted must lie in [1, block_count]")
        return VersionInstance(
            file=self.file,
            version_id=self.version_id,
            authentic=False,
            block_count=self.block_count,
            polluted_block_min=min_polluted,
        )

    def invariant_ok(self) -> bool:
        clean = self.polluted_block_min == 0 and not self.per_provider_corruption
        if self.authentic != clean or (self.decoy and self.authentic):
            return False
        return all(len(s) >= self.polluted_block_min for s in self.per_provider_corruption.values())


def make_version(
    file: str, block_count: int, content_seed: int, *, authentic: bool = True
) -> tuple[VersionInstance, DigestList, bytes]:
    """Split a simulated file into ``block_count`` blocks and derive its digests and id.

    With ``authentic=False`` the result is a decoy: fresh content under a new
    identifier, every block differing from any authentic version.
    """
    if block_count < 1:
        raise ValueError("a version needs at least one block")
    variant = "a" if authentic else "d"
    digests = tuple(block_digest(file, content_seed, i, variant) for i in range(block_count))
    vid = version_id_of(digests)
    instance = VersionInstance(
        file=file,
        version_id=vid,
        authentic=authentic,
        block_count=block_count,
        polluted_block_min=0 if authentic else block_count,
        decoy=not authentic,
    )
    return instance, digests, vid


@dataclass
class FileInfoRecord:
    """One row of a maintainer's file table: (VI, DL, PIL, OIL)."""

    version_id: bytes
    digest_list: DigestList
    provider_ids: list[int] = field(default_factory=list)
    voter_ids: list[int] = field(default_factory=list)

    def consistent(self) -> bool:
        return bool(self.digest_list) and version_id_of(self.digest_list) == self.version_id

    def copy(self) -> "FileInfoRecord":
        return FileInfoRecord(
            self.version_id, self.digest_list, list(self.provider_ids), list(self.voter_ids)
        )


class _Row:
    __slots__ = ("digest_list", "providers", "voters")

    def __init__(self, digest_list: DigestList):
        self.digest_list = digest_list
        # dicts double as insertion-ordered sets
        self.providers: dict[int, None] = {}
        self.voters: dict[int, None] = {}


def canonical_table(records: Iterable[FileInfoRecord]) -> dict[bytes, tuple]:
    """Order-free form of a record list, for comparing reconstructions."""
    return {
        r.version_id: (r.digest_list, frozenset(r.provider_ids), frozenset(r.voter_ids))
        for r in records
    }


Response = list[tuple[int, list[FileInfoRecord]]]
CorruptHook = Callable[[int, list[FileInfoRecord]], list[FileInfoRecord]]


class MaintainerStore:
    """File tables held by the maintainer groups of a fixed population.

    Every write is delivered to all ``m`` maintainers of the file, so the
    honest replicas are identical; the store keeps one table per file and
    hands each group member its own copy on read.  Divergence only happens
    on the response path, through the adversary's corruption hook.
    """

    def __init__(self, population: Ring | Iterable[int], m: int):
        self.ring = population if isinstance(population, Ring) else Ring(population)
        if m < 1:
            raise ValueError("maintainer group size must be at least 1")
        self.m = m
        self._tables: dict[str, dict[bytes, _Row]] = {}
        self._groups: dict[str, MaintainerGroup] = {}

    def group(self, file: str) -> MaintainerGroup:
        g = self._groups.get(file)
        if g is None:
            g = self._groups[file] = maintainer_group(file, self.m, self.ring)
        return g

    def files(self) -> list[str]:
        return list(self._tables)

    def _row(self, file: str, version_id: bytes, digest_list: DigestList | None) -> _Row:
        table = self._tables.setdefault(file, {})
        row = table.get(version_id)
        if row is None:
            if digest_list is None:
                raise KeyError("unknown version and no digest list to create it")
            row = table[version_id] = _Row(tuple(digest_list))
        return row

    def publish(self, provider: int, version: VersionInstance, digest_list: DigestList) -> None:
        """Index ``provider`` as a holder of ``version`` at every maintainer of its file."""
        self._row(version.file, version.version_id, digest_list).providers[provider] = None

    def unpublish(self, provider: int, file: str, version_id: bytes) -> None:
        row = self._tables.get(file, {}).get(version_id)
        if row is not None:
            row.providers.pop(provider, None)

    def register_vote_pointer(
        self, voter: int, file: str, version_id: bytes, digest_list: DigestList | None = None
    ) -> None:
        """Add ``voter`` to the OIL of the version; creates an empty-PIL row if needed."""
        table = self._tables.setdefault(file, {})
        row = table.get(version_id)
        if row is None:
            row = table[version_id] = _Row(tuple(digest_list) if digest_list else ())
        row.voters[voter] = None

    def honest_records(self, file: str) -> list[FileInfoRecord]:
        return [
            FileInfoRecord(vid, row.digest_list, list(row.providers), list(row.voters))
            for vid, row in self._tables.get(file, {}).items()
        ]

    def records_at(self, maintainer: int, file: str) -> list[FileInfoRecord]:
        if maintainer not in self.group(file).members:
            return []
        return self.honest_records(file)

    def query_file(
        self,
        requestor: int,
        file: str,
        *,
        offline: Container[int] = (),
        malicious: Container[int] = (),
        corrupt: CorruptHook | None = None,
    ) -> Response:
        """Ask each of the file's maintainers for its table.

        Offline maintainers answer with an empty list.  Malicious ones answer
        through ``corrupt`` when a hook is given.
        """
        out: Response = []
        for member in self.group(file).members:
            if member in offline:
                out.append((member, []))
                continue
            records = self.honest_records(file)
            if corrupt is not None and member in malicious:
                records = corrupt(member, records)
            out.append((member, records))
        return out

    def provider_entries(self, file: str) -> int:
        """Provider-list entries summed over the honest replicas of a file."""
        rows = self._tables.get(file, {}).values()
        return len(self.group(file).members) * sum(len(r.providers) for r in rows)


def zipf_cdf(n: int, alpha: float) -> list[float]:
    """Cumulative Zipf(alpha) weights over ranks 1..n, normalised to end at 1."""
    if n < 1:
        raise ValueError("need at least one rank")
    w = [1.0 / k**alpha for k in range(1, n + 1)]
    total = math.fsum(w)
    return [x / total for x in itertools.accumulate(w)]


def zipf_pick(cdf: Sequence[float], rng) -> int:
    """0-based rank drawn from a cumulative table."""
    return min(bisect.bisect_right(cdf, rng.random()), len(cdf) - 1)


@dataclass
class Catalog:
    """Files, their authentic versions and a pool of decoys per file.

    ``truth`` maps every version id to the instance describing it; for an
    identifier-corrupted version this is the corrupted twin, which carries
    the polluters' tampered copies.
    """

    files: list[str]
    block_count: int
    authentic: dict[str, list[bytes]] = field(default_factory=dict)
    decoys: dict[str, list[bytes]] = field(default_factory=dict)
    truth: dict[bytes, VersionInstance] = field(default_factory=dict)
    digests: dict[bytes, DigestList] = field(default_factory=dict)

    @classmethod
    def build(
        cls, file_count: int, versions_per_file: int, block_count: int, decoys_per_file: int = 0
    ) -> "Catalog":
        if file_count < 1 or versions_per_file < 1:
            raise ValueError("need at least one file and one version per file")
        cat = cls([f"file-{i:04d}" for i in range(file_count)], block_count)
        for f in cat.files:
            cat.authentic[f] = [cat._add(f, s, True) for s in range(versions_per_file)]
            cat.decoys[f] = [cat._add(f, s, False) for s in range(decoys_per_file)]
        return cat

    def _add(self, file: str, seed: int, authentic: bool) -> bytes:
        inst, dl, vid = make_version(file, self.block_count, seed, authentic=authentic)
        self.truth[vid] = inst
        self.digests[vid] = dl
        return vid

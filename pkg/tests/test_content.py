import pytest

from greenp2p.content import (
    Catalog,
    FileInfoRecord,
    MaintainerStore,
    canonical_table,
    make_version,
    version_id_of,
    zipf_cdf,
)
from greenp2p.overlay import hash_to_id

POP = [hash_to_id(f"user-{i}") for i in range(60)]


def test_make_version_is_deterministic():
    a = make_version("file-0001", 10, 3)
    b = make_version("file-0001", 10, 3)
    assert a[2] == b[2] and a[1] == b[1]
    inst, dl, vid = a
    assert len(dl) == 10 and vid == version_id_of(dl) and inst.authentic


def test_single_block_version():
    _, dl, vid = make_version("f", 1, 0)
    assert len(dl) == 1 and vid == version_id_of(dl)


def test_seed_change_changes_digests():
    _, dl1, v1 = make_version("f", 4, 0)
    _, dl2, v2 = make_version("f", 4, 1)
    assert v1 != v2 and any(x != y for x, y in zip(dl1, dl2))


def test_zero_blocks_rejected():
    with pytest.raises(ValueError):
        make_version("f", 0, 0)


def test_decoy_has_fresh_identifier():
    a, _, va = make_version("f", 8, 0)
    d, _, vd = make_version("f", 8, 0, authentic=False)
    assert va != vd
    assert d.decoy and not d.authentic and d.polluted_block_min == 8
    assert a.invariant_ok() and d.invariant_ok()


def test_corrupted_twin_keeps_identifier():
    a, _, vid = make_version("f", 10, 0)
    twin = a.corrupted_twin(2)
    assert twin.version_id == vid and not twin.authentic
    twin.corrupt_copy(99, {0, 5})
    assert twin.corrupted_blocks(99) == {0, 5}
    assert twin.invariant_ok()
    with pytest.raises(ValueError):
        twin.corrupt_copy(98, {3})  # fewer than r blocks
    with pytest.raises(ValueError):
        a.corrupt_copy(1, {0, 1})  # authentic versions stay clean


def test_publish_is_idempotent_and_grouped():
    store = MaintainerStore(POP, 5)
    inst, dl, vid = make_version("file-0001", 4, 0)
    store.publish(POP[0], inst, dl)
    store.publish(POP[0], inst, dl)
    store.publish(POP[1], inst, dl)
    (rec,) = store.honest_records("file-0001")
    assert rec.provider_ids == [POP[0], POP[1]]


def test_two_versions_two_rows():
    store = MaintainerStore(POP, 3)
    for seed in (0, 1):
        inst, dl, _ = make_version("file-0001", 4, seed)
        store.publish(POP[seed], inst, dl)
    rows = store.honest_records("file-0001")
    assert len(rows) == 2 and len({r.version_id for r in rows}) == 2


def test_vote_pointers():
    store = MaintainerStore(POP, 5)
    a, dla, va = make_version("f", 4, 0)
    b, dlb, vb = make_version("f", 4, 1)
    store.publish(POP[0], a, dla)
    store.publish(POP[0], b, dlb)
    for voter in POP[:7]:
        store.register_vote_pointer(voter, "f", va)
    store.register_vote_pointer(POP[0], "f", va)
    table = canonical_table(store.honest_records("f"))
    assert len(table[va][2]) == 7 and table[vb][2] == frozenset()
    for member in store.group("f").members:
        assert len(canonical_table(store.records_at(member, "f"))[va][2]) == 7


def test_vote_pointer_for_unknown_version_creates_row():
    store = MaintainerStore(POP, 3)
    _, dl, vid = make_version("g", 4, 0)
    store.register_vote_pointer(POP[3], "g", vid, dl)
    (rec,) = store.honest_records("g")
    assert rec.provider_ids == [] and rec.voter_ids == [POP[3]] and rec.consistent()


def test_query_with_offline_and_fabricating_members():
    store = MaintainerStore(POP, 5)
    inst, dl, vid = make_version("f", 4, 0)
    store.publish(POP[0], inst, dl)
    members = store.group("f").members
    resp = store.query_file(POP[1], "f")
    assert len(resp) == 5 and all(len(r) == 1 for _, r in resp)

    offline = {members[0]}
    resp = store.query_file(POP[1], "f", offline=offline)
    assert sum(1 for _, r in resp if not r) == 1

    fake = 12345

    def fabricate(member, records):
        out = [r.copy() for r in records]
        out[0].provider_ids.append(fake)
        return out

    bad = set(members[:2])
    resp = store.query_file(POP[1], "f", malicious=bad, corrupt=fabricate)
    seen = sum(fake in rec.provider_ids for _, recs in resp for rec in recs)
    assert seen == len([m for m in members if m in bad])


def test_provider_entry_conservation():
    store = MaintainerStore(POP, 5)
    pubs = set()
    for seed in range(3):
        inst, dl, vid = make_version("f", 4, seed)
        for p in POP[seed : seed + 4]:
            store.publish(p, inst, dl)
            pubs.add((p, vid))
    assert store.provider_entries("f") == 5 * len(pubs)


def test_record_consistency_check():
    _, dl, vid = make_version("f", 3, 0)
    assert FileInfoRecord(vid, dl).consistent()
    assert not FileInfoRecord(b"\x00" * 20, dl).consistent()


def test_catalog_and_zipf_table():
    cat = Catalog.build(3, 4, 10, decoys_per_file=2)
    assert len(cat.truth) == 3 * 6
    assert all(cat.truth[v].authentic for vs in cat.authentic.values() for v in vs)
    assert all(cat.truth[v].decoy for vs in cat.decoys.values() for v in vs)
    cdf = zipf_cdf(5, 0.8)
    assert cdf[-1] == pytest.approx(1.0) and all(a < b for a, b in zip(cdf, cdf[1:]))

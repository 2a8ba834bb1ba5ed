import itertools
import math
import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from greenp2p.content import FileInfoRecord, MaintainerStore, make_version
from greenp2p.filtering import (
    Infeasible,
    filter_pairs,
    group_reliability,
    majority_filter,
    majority_threshold,
    min_group_size,
    surviving,
)
from greenp2p.overlay import hash_to_id


def binomial_cdf_below_half(m, beta):
    # independent oracle: enumerate every malicious/honest pattern of m maintainers
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=m):
        x = sum(pattern)
        if 2 * x < m:
            total += beta**x * (1 - beta) ** (m - x)
    return total


def test_threshold_values():
    assert [majority_threshold(m) for m in (1, 2, 3, 4, 5, 6, 7)] == [1, 2, 2, 3, 3, 4, 4]
    for m in range(1, 30):
        assert majority_threshold(m) == math.ceil((m + 1) / 2)


def test_reliability_reference_values():
    assert group_reliability(5, 0.2) == pytest.approx(0.94208, abs=1e-9)
    assert group_reliability(3, 0.2) == pytest.approx(0.896, abs=1e-12)
    assert group_reliability(1, 0.5) == pytest.approx(0.5)
    assert group_reliability(7, 0.0) == 1.0


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6, 7, 9])
@pytest.mark.parametrize("beta", [0.0, 0.1, 0.2, 0.35, 0.49])
def test_reliability_matches_enumeration(m, beta):
    assert group_reliability(m, beta) == pytest.approx(binomial_cdf_below_half(m, beta), abs=1e-12)


def test_reliability_monotone_on_grid():
    betas = [i / 50 for i in range(25)]
    for m in range(1, 16, 2):
        vals = [group_reliability(m, b) for b in betas]
        assert all(x >= y - 1e-15 for x, y in zip(vals, vals[1:]))
    for b in betas:
        vals = [group_reliability(m, b) for m in range(1, 16, 2)]
        assert all(y >= x - 1e-15 for x, y in zip(vals, vals[1:]))


def test_min_group_size():
    assert min_group_size(0.2, 0.94) == 5
    assert min_group_size(0.0, 1.0) == 1
    with pytest.raises(Infeasible):
        min_group_size(0.5, 0.6)
    with pytest.raises(Infeasible):
        min_group_size(0.45, 0.999999, cap=9)


def test_threshold_boundary_keeps_three_of_five():
    resp = [{("v", 1)}] * 3 + [set()] * 2
    assert filter_pairs(resp, 5) == {("v", 1)}
    resp = [{("v", 1)}] * 2 + [set()] * 3
    assert filter_pairs(resp, 5) == set()


def test_two_colluders_cannot_insert_or_remove_at_m5():
    honest = {("v1", "p1"), ("v1", "p2"), ("v2", "p3")}
    fake = ("v1", "evil")
    for bad in itertools.combinations(range(5), 2):
        for lie in ("fabricate", "drop", "both"):
            resp = []
            for i in range(5):
                if i not in bad:
                    resp.append(set(honest))
                elif lie == "fabricate":
                    resp.append(honest | {fake})
                elif lie == "drop":
                    resp.append(set())
                else:
                    resp.append({fake})
            assert filter_pairs(resp, 5) == honest


def _table(m=5, versions=3, providers=4):
    pop = [hash_to_id(f"user-{i}") for i in range(80)]
    store = MaintainerStore(pop, m)
    for seed in range(versions):
        inst, dl, vid = make_version("movie", 6, seed)
        for p in pop[seed : seed + providers]:
            store.publish(p, inst, dl)
        for o in pop[40 + seed : 43 + seed]:
            store.register_vote_pointer(o, "movie", vid)
    return pop, store


def test_completeness_with_no_malicious_maintainers():
    pop, store = _table()
    out = majority_filter(store.query_file(pop[0], "movie"), 5)
    expected = store.honest_records("movie")
    key = lambda r: (r.version_id, r.digest_list, sorted(r.provider_ids), sorted(r.voter_ids))  # noqa: E731
    assert sorted(map(key, out)) == sorted(map(key, expected))


def test_inconsistent_binding_is_discarded_before_counting():
    _, dl, vid = make_version("f", 4, 0)
    bogus = FileInfoRecord(b"\x01" * 20, dl, [7], [])
    good = FileInfoRecord(vid, dl, [7], [])
    resp = [(i, [bogus] if i < 3 else [good]) for i in range(5)]
    assert majority_filter(resp, 5) == []


def test_too_many_responses_rejected():
    with pytest.raises(ValueError):
        filter_pairs([set()] * 4, 3)


def _dedup_filter(responses, m):
    # the broken variant: pairs deduplicated across maintainers before counting
    pooled = set().union(*responses) if responses else set()
    counts = Counter({p: 1 for p in pooled})
    return {p for p, c in counts.items() if c >= majority_threshold(m)}


def test_deduplication_breaks_soundness():
    rng = random.Random(3)
    honest = {("v", i) for i in range(4)}
    ok_real = ok_dedup = 0
    trials = 2000
    for _ in range(trials):
        resp = []
        for _ in range(5):
            resp.append({("v", "fake")} if rng.random() < 0.2 else set(honest))
        ok_real += filter_pairs(resp, 5) == honest
        ok_dedup += _dedup_filter(resp, 5) == honest
    assert ok_real / trials > 0.9
    assert ok_dedup == 0  # with m = 5 nothing ever reaches the threshold once deduplicated


@given(st.lists(st.sets(st.integers(0, 6), max_size=5), min_size=1, max_size=7))
def test_surviving_items_reach_threshold(resp):
    m = len(resp)
    kept = surviving(resp, m)
    for item in range(7):
        count = sum(item in r for r in resp)
        assert (item in kept) == (count >= majority_threshold(m))

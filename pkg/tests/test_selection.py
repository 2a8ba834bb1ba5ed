import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from greenp2p.selection import (
    Candidate,
    select_baseline,
    select_version,
    selection_probabilities,
)

A, B, C = b"a" * 20, b"b" * 20, b"c" * 20
DRAWS = 10_000


def freq(pick, cands, seed=1):
    rng = random.Random(seed)
    return Counter(pick(cands, rng) for _ in range(DRAWS))


def within_3_sigma(count, p):
    sigma = (DRAWS * p * (1 - p)) ** 0.5
    return abs(count - DRAWS * p) <= 3 * sigma


def test_zero_weight_is_never_chosen():
    cands = [Candidate(A, 3, 1.0), Candidate(B, 1, -1.0)]
    assert selection_probabilities(cands) == [1.0, 0.0]
    assert set(freq(select_version, cands)) == {A}


def test_equal_candidates_split_evenly():
    counts = freq(select_version, [Candidate(A, 2, 0.3), Candidate(B, 2, 0.3)])
    # chi-square with one degree of freedom, 99th percentile
    chi2 = sum((counts[k] - DRAWS / 2) ** 2 / (DRAWS / 2) for k in (A, B))
    assert chi2 < 6.635


def test_two_to_one_split():
    cands = [Candidate(A, 2, 0.0), Candidate(B, 1, 0.0)]
    assert selection_probabilities(cands) == pytest.approx([2 / 3, 1 / 3])
    assert within_3_sigma(freq(select_version, cands)[A], 2 / 3)


def test_baseline_ignores_reputation():
    cands = [Candidate(A, 9, -1.0), Candidate(B, 1, 1.0)]
    assert selection_probabilities(cands, use_rep=False) == pytest.approx([0.9, 0.1])
    assert within_3_sigma(freq(select_baseline, cands)[A], 0.9)
    assert select_baseline([Candidate(C, 1)], random.Random(0)) == C


def test_baseline_equals_green_when_reps_are_zero():
    cands = [Candidate(A, 4), Candidate(B, 7), Candidate(C, 2)]
    assert freq(select_version, cands, 5) == freq(select_baseline, cands, 5)


def test_all_negative_falls_back_to_uniform():
    cands = [Candidate(A, 3, -1.0), Candidate(B, 5, -1.0), Candidate(C, 0, 0.5)]
    assert selection_probabilities(cands) == [0.5, 0.5, 0.0]
    counts = freq(select_version, cands)
    assert C not in counts and within_3_sigma(counts[A], 0.5)


def test_empty_list_rejected():
    with pytest.raises(ValueError):
        select_version([], random.Random(0))
    with pytest.raises(ValueError):
        select_baseline([], random.Random(0))


cand_lists = st.lists(
    st.tuples(st.integers(0, 50), st.floats(-1.0, 1.0)), min_size=1, max_size=12
)


def build(specs):
    return [Candidate(bytes([i]) * 20, n, r) for i, (n, r) in enumerate(specs)]


@settings(max_examples=1000)
@given(cand_lists)
def test_probabilities_are_normalized(specs):
    probs = selection_probabilities(build(specs))
    assert sum(probs) == pytest.approx(1.0) and all(p >= 0 for p in probs)


@settings(max_examples=1000)
@given(cand_lists, st.integers(2, 20))
def test_scaling_provider_counts_changes_nothing(specs, k):
    scaled = [(n * k, r) for n, r in specs]
    assert selection_probabilities(build(scaled)) == pytest.approx(selection_probabilities(build(specs)))


@settings(max_examples=1000)
@given(cand_lists, st.data())
def test_raising_a_reputation_never_lowers_its_probability(specs, data):
    i = data.draw(st.integers(0, len(specs) - 1))
    n, r = specs[i]
    bump = data.draw(st.floats(r, 1.0))
    before = selection_probabilities(build(specs))[i]
    after_specs = list(specs)
    after_specs[i] = (n, bump)
    assert selection_probabilities(build(after_specs))[i] >= before - 1e-12

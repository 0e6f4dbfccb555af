from __future__ import annotations

import random

import pytest

from statefuzz.coverage import (
    DEFAULT_MAP_SIZE,
    CoverageMap,
    VirginMap,
    coverage_percent,
    feature_masks,
    merge_and_classify,
)
from statefuzz.errors import ConfigurationError
from statefuzz.sut import get_harness


def _map(ids, size=DEFAULT_MAP_SIZE) -> CoverageMap:
    return CoverageMap.from_ids(ids, size)


def test_merge_disjoint_counts_all_new():
    virgin = VirginMap(total_branches=50)
    out = merge_and_classify(virgin, _map([3, 7]))
    assert out["new_branch_count"] == 2
    assert sorted(out["first_seen_ids"]) == [3, 7]


def test_merge_idempotent_second_time():
    virgin = VirginMap(total_branches=50)
    merge_and_classify(virgin, _map([3, 7]))
    out = merge_and_classify(virgin, _map([3, 7]))
    assert out["new_branch_count"] == 0
    assert out["first_seen_ids"] == []


def test_merge_counts_only_the_difference():
    virgin = VirginMap(total_branches=50)
    merge_and_classify(virgin, _map([3]))
    out = merge_and_classify(virgin, _map([3, 9]))
    assert out["new_branch_count"] == 1
    assert out["first_seen_ids"] == [9]


def test_merge_rejects_map_size_mismatch():
    virgin = VirginMap(total_branches=10, map_size=64)
    with pytest.raises(ConfigurationError):
        merge_and_classify(virgin, _map([1], size=128))


def test_virgin_popcount_monotone_under_random_merges():
    rng = random.Random(11)
    virgin = VirginMap(total_branches=200, map_size=256)
    covered = 0
    for _ in range(300):
        ids = [rng.randrange(200) for _ in range(rng.randint(0, 6))]
        merge_and_classify(virgin, _map(ids, size=256))
        now = virgin.covered()
        assert now >= covered
        covered = now
    assert covered <= 200


def test_coverage_percent_fractions():
    empty = VirginMap(total_branches=50)
    assert coverage_percent(empty) == 0.0
    full = VirginMap(total_branches=50)
    merge_and_classify(full, _map(range(50)))
    assert coverage_percent(full) == 1.0
    partial = VirginMap(total_branches=40)
    merge_and_classify(partial, _map(range(10)))
    assert coverage_percent(partial) == 0.25


def test_virgin_rejects_bad_denominator():
    with pytest.raises(ConfigurationError):
        VirginMap(total_branches=0)
    with pytest.raises(ConfigurationError):
        VirginMap(total_branches=10, map_size=4)


def test_coverage_map_validates_ids():
    with pytest.raises(ValueError):
        CoverageMap.from_ids([DEFAULT_MAP_SIZE])
    m = _map([0, 5])
    assert m.count() == 2
    assert m.branch_ids() == [0, 5]


def test_feature_masks_cover_harness_case_table():
    server = get_harness("ftp-glob")
    masks = feature_masks(server)
    table = {case["case_id"]: case["branch_ids"] for case in server.glob_cases()}
    assert set(masks) == set(table)
    for cid, ids in table.items():
        for b in ids:
            assert masks[cid] >> b & 1

    class Bare:
        pass

    assert feature_masks(Bare()) == {}

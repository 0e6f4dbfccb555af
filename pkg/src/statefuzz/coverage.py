"""AFL-style branch coverage maps backed by integer bitsets.

One bit per instrumented branch. Python integers make union, novelty tests,
and population counts single C-level operations, which keeps the per-execution
cost flat even at large campaign scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError

DEFAULT_MAP_SIZE = 4096


def _bit_ids(bits: int) -> list[int]:
    ids = []
    i = 0
    while bits:
        if bits & 1:
            ids.append(i)
        bits >>= 1
        i += 1
    return ids


@dataclass
class CoverageMap:
    """Branches hit by one execution."""

    map_size: int = DEFAULT_MAP_SIZE
    bits: int = 0

    def __post_init__(self):
        if self.map_size < 1:
            raise ValueError("map_size must be positive")
        if self.bits < 0 or self.bits >> self.map_size:
            raise ValueError("coverage bits outside the map")

    @classmethod
    def from_ids(cls, ids, map_size: int = DEFAULT_MAP_SIZE) -> CoverageMap:
        bits = 0
        for i in ids:
            if not 0 <= i < map_size:
                raise ValueError(f"branch id {i} outside map of size {map_size}")
            bits |= 1 << i
        return cls(map_size, bits)

    def count(self) -> int:
        return self.bits.bit_count()

    def branch_ids(self) -> list[int]:
        return _bit_ids(self.bits)


@dataclass
class VirginMap:
    """Branches seen so far across a whole campaign trial."""

    total_branches: int
    map_size: int = DEFAULT_MAP_SIZE
    bits: int = 0

    def __post_init__(self):
        if self.total_branches < 1:
            raise ConfigurationError("total_branches must be positive")
        if self.total_branches > self.map_size:
            raise ConfigurationError("total_branches cannot exceed map_size")

    def covered(self) -> int:
        return self.bits.bit_count()


def merge_and_classify(virgin: VirginMap, cov: CoverageMap) -> dict:
    """Fold one execution's coverage into the virgin map.

    Returns the number of branches this execution hit for the first time and
    their ids. Merging the same map twice is a no-op the second time.
    """
    if cov.map_size != virgin.map_size:
        raise ConfigurationError("coverage and virgin maps disagree on map_size")
    new_bits = cov.bits & ~virgin.bits
    virgin.bits |= cov.bits
    if virgin.bits.bit_count() > virgin.total_branches:
        raise ValueError("observed more branches than the harness declares")
    if not new_bits:
        return {"new_branch_count": 0, "first_seen_ids": []}
    return {"new_branch_count": new_bits.bit_count(), "first_seen_ids": _bit_ids(new_bits)}


def coverage_percent(virgin: VirginMap) -> float:
    """Covered fraction of the declared branch space, in [0, 1]."""
    return virgin.bits.bit_count() / virgin.total_branches


def feature_masks(server) -> dict[int, int]:
    """Branch-bit masks for the harness's named coverage features.

    Harnesses that expose a case table (glob_cases) get one mask per case so
    engines can count, per execution, which features fired. Harnesses without
    a table yield an empty dict and engines skip the accounting.
    """
    table = getattr(server, "glob_cases", None)
    if table is None:
        return {}
    masks: dict[int, int] = {}
    for case in table():
        bits = 0
        for b in case["branch_ids"]:
            bits |= 1 << b
        masks[case["case_id"]] = bits
    return masks

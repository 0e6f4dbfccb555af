"""Flat response-code state machine and its seed scheduling baselines.

Every response code observed anywhere in a response sequence becomes a state.
Interesting sequences are appended to the seed queue of each state they visit
at a message boundary (a state entered only inside a multi-code burst cannot
be restored by replaying whole messages, so it gets no seeds). Three
selection algorithms are provided for both the state pick and the seed pick:

    random       uniform over eligible entries
    round_robin  insertion order with a persistent cursor
    favor        states: (1 + discoveries) / (1 + times fuzzed)
                 seeds:  branches covered / message count

Favor ties resolve to the earliest insertion, so selection only depends on
score ratios, not absolute scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import NamedTuple, Sequence

from .coverage import VirginMap, feature_masks
from .errors import StateFuzzError
from .mutation import MutationConfig, MutationScope, mutate
from .protocol import DUMMY_CODE, Origin, RequestSequence, split_from_bursts
from .sut import ExecutionResult

SELECT_RANDOM = "random"
SELECT_ROUND_ROBIN = "round_robin"
SELECT_FAVOR = "favor"
_ALGORITHMS = (SELECT_RANDOM, SELECT_ROUND_ROBIN, SELECT_FAVOR)

# novelty-set keys join response codes on a byte no code contains
_KEY_SEP = "\x1f"


class IterationStats(NamedTuple):
    executed: int
    new_branches: int
    new_sequences: int


class SeedEntry:
    """One retained sequence plus the stats scheduling needs.

    selection_count and discovery_count double as the S and D of the tree
    scheduler's per-seed bandit scores. key holds the raw payload tuple;
    the RequestSequence wrapper is only built when someone asks for it.
    """

    __slots__ = (
        "bursts",
        "branch_count",
        "key",
        "origin",
        "selection_count",
        "discovery_count",
        "_seq",
    )

    def __init__(
        self,
        bursts: tuple[tuple[str, ...], ...],
        branch_count: int,
        key: tuple[bytes, ...],
        origin: Origin = Origin.MUTANT,
    ):
        self.bursts = bursts
        self.branch_count = branch_count
        self.key = key
        self.origin = origin
        self.selection_count = 0
        self.discovery_count = 0
        self._seq: RequestSequence | None = None

    @property
    def sequence(self) -> RequestSequence:
        seq = self._seq
        if seq is None:
            seq = self._seq = RequestSequence.from_payloads(self.key, self.origin)
        return seq

    @property
    def message_count(self) -> int:
        return len(self.key)

    def favor_score(self) -> float:
        return self.branch_count / self.message_count

    def __repr__(self) -> str:
        return (
            f"SeedEntry(messages={len(self.key)}, branches={self.branch_count}, "
            f"s={self.selection_count}, d={self.discovery_count})"
        )


@dataclass
class StateRecord:
    code: str
    index: int
    fuzz_count: int = 0
    discovery_count: int = 0
    seeds: list[SeedEntry] = field(default_factory=list)
    seed_keys: set = field(default_factory=set)
    rr_cursor: int = 0

    def favor_score(self) -> float:
        return (1 + self.discovery_count) / (1 + self.fuzz_count)


def _make_seed(payloads, bursts, branch_count, origin) -> SeedEntry:
    return SeedEntry(tuple(bursts), branch_count, tuple(payloads), origin)


class StateMachineModel:
    """States keyed by single response codes, in first-seen order."""

    def __init__(self):
        self.states: dict[str, StateRecord] = {}
        self.order: list[str] = []
        self.rr_cursor = 0

    def _ensure(self, code: str) -> StateRecord:
        record = self.states.get(code)
        if record is None:
            record = StateRecord(code, len(self.order))
            self.states[code] = record
            self.order.append(code)
        return record

    def observe(self, seq: RequestSequence, exec_result: ExecutionResult, interesting: bool):
        """Fold one execution into the model.

        All codes of the (truncated) response sequence become states; if the
        execution was interesting, the sequence joins the seed queue of every
        boundary state it visits, deduplicated per state by payload identity.
        """
        self._observe_raw(
            seq.payloads,
            exec_result.per_message_codes,
            exec_result.response.codes,
            exec_result.coverage.count(),
            interesting,
            seq.origin,
        )

    def _observe_raw(self, payloads, bursts, codes, branch_count, interesting, origin=Origin.MUTANT):
        for code in codes:
            self._ensure(code)
        if not interesting:
            return
        seed = None
        pos = 1
        limit = len(codes)
        key = tuple(payloads)
        boundary_codes = [DUMMY_CODE]
        for burst in bursts:
            end = pos + len(burst)
            if end > limit:
                break  # burst cut by truncation: not a restorable boundary
            boundary_codes.append(burst[-1])
            pos = end
        for code in boundary_codes:
            record = self.states[code]
            if key in record.seed_keys:
                continue
            if seed is None:
                seed = _make_seed(payloads, bursts, branch_count, origin)
            record.seeds.append(
                SeedEntry(seed.bursts, seed.branch_count, seed.key, seed.origin)
            )
            record.seed_keys.add(seed.key)

    def seeded_states(self) -> list[StateRecord]:
        return [self.states[c] for c in self.order if self.states[c].seeds]

    def select_state(self, algorithm: str, rng) -> StateRecord:
        if algorithm not in _ALGORITHMS:
            raise ValueError(f"unknown selection algorithm {algorithm!r}")
        eligible = self.seeded_states()
        if not eligible:
            raise StateFuzzError("no state holds any seed")
        if algorithm == SELECT_RANDOM:
            return eligible[rng.randrange(len(eligible))]
        if algorithm == SELECT_ROUND_ROBIN:
            n = len(self.order)
            for k in range(n):
                idx = (self.rr_cursor + k) % n
                record = self.states[self.order[idx]]
                if record.seeds:
                    self.rr_cursor = (idx + 1) % n
                    return record
            raise StateFuzzError("unreachable: eligible states vanished")
        best = eligible[0]
        best_score = best.favor_score()
        for record in eligible[1:]:
            score = record.favor_score()
            if score > best_score:
                best, best_score = record, score
        return best

    def select_seed(self, state: StateRecord, algorithm: str, rng) -> SeedEntry:
        if algorithm not in _ALGORITHMS:
            raise ValueError(f"unknown selection algorithm {algorithm!r}")
        seeds = state.seeds
        if not seeds:
            raise StateFuzzError(f"state {state.code} holds no seeds")
        if algorithm == SELECT_RANDOM:
            return seeds[rng.randrange(len(seeds))]
        if algorithm == SELECT_ROUND_ROBIN:
            idx = state.rr_cursor % len(seeds)
            state.rr_cursor = (idx + 1) % len(seeds)
            return seeds[idx]
        best = seeds[0]
        best_score = best.favor_score()
        for entry in seeds[1:]:
            score = entry.favor_score()
            if score > best_score:
                best, best_score = entry, score
        return best


def target_prefix_for(seed: SeedEntry, state_code: str) -> tuple[str, ...] | None:
    """Shortest boundary-aligned response prefix of seed ending in state_code."""
    if state_code == DUMMY_CODE:
        return (DUMMY_CODE,)
    codes = [DUMMY_CODE]
    for burst in seed.bursts:
        codes.extend(burst)
        if burst[-1] == state_code:
            return tuple(codes)
    return None


class FlatEngine:
    """One campaign trial's scheduler loop over a StateMachineModel."""

    def __init__(
        self,
        server,
        algorithm: str,
        mutation_cfg: MutationConfig,
        rng,
        virgin: VirginMap,
        mutants_per_iteration: int,
        depth_cap: int,
    ):
        self.model = StateMachineModel()
        self.server = server
        self.algorithm = algorithm
        self.mutation_cfg = mutation_cfg
        self.rng = rng
        self.virgin = virgin
        self.mutants_per_iteration = mutants_per_iteration
        self.depth_cap = depth_cap
        self.session = server.new_session()
        self.seen: set[str] = set()
        self.case_masks = feature_masks(server)
        self.case_exec_counts = {cid: 0 for cid in self.case_masks}

    def ingest(self, sequences: Sequence[RequestSequence]) -> None:
        """Execute and record the initial corpus."""
        session = self.session
        cap_len = self.depth_cap + 1
        mask_items = list(self.case_masks.items())
        counts = self.case_exec_counts
        for seq in sequences:
            session.reset()
            bursts = [session.handle(p) for p in seq.payloads]
            flat = [DUMMY_CODE]
            for b in bursts:
                flat += b
            codes = tuple(flat[:cap_len])
            bits = session.hits
            self.virgin.bits |= bits
            for cid, mask in mask_items:
                if bits & mask:
                    counts[cid] += 1
            self.seen.add(_KEY_SEP.join(codes))
            self.model._observe_raw(
                seq.payloads, tuple(bursts), codes, bits.bit_count(), True, seq.origin
            )

    def run_iteration(self) -> IterationStats:
        model = self.model
        rng = self.rng
        state = model.select_state(self.algorithm, rng)
        state.fuzz_count += 1
        seed = model.select_seed(state, self.algorithm, rng)
        seed.selection_count += 1

        target = target_prefix_for(seed, state.code)
        if target is None:
            raise StateFuzzError(f"seed in state {state.code} lost its boundary")
        split = split_from_bursts(len(seed.bursts), seed.bursts, target)
        m1_end = split.m1_end
        payloads = seed.key

        session = self.session
        session.reset()
        for p in payloads[:m1_end]:
            session.handle(p)
        snap = session.snapshot()
        m1_bursts = seed.bursts[:m1_end]
        m1_codes = (DUMMY_CODE,)
        for b in m1_bursts:
            m1_codes += b
        m1_key = _KEY_SEP.join(m1_codes)
        m1_len = len(m1_codes)

        virgin = self.virgin
        seen = self.seen
        scope = MutationScope.M2_ONLY
        cfg = self.mutation_cfg
        cap_len = self.depth_cap + 1
        handle = session.handle
        restore = session.restore
        mask_items = list(self.case_masks.items())
        counts = self.case_exec_counts
        discoveries = 0
        new_branches = 0
        new_seqs = 0
        executed = 0

        for _ in range(self.mutants_per_iteration):
            msgs, _changed = mutate(payloads, split, scope, cfg, rng)
            executed += 1
            restore(snap)
            tail = [handle(p) for p in msgs[m1_end:]]
            bits = session.hits
            for cid, mask in mask_items:
                if bits & mask:
                    counts[cid] += 1
            nc = m1_len
            for b in tail:
                nc += len(b)
            if nc > cap_len:
                codes = m1_codes
                for b in tail:
                    codes += b
                codes = codes[:cap_len]
                key = _KEY_SEP.join(codes)
            else:
                codes = None
                key = _KEY_SEP.join(chain((m1_key,), chain.from_iterable(tail)))

            is_new_seq = key not in seen
            new_mask = bits & ~virgin.bits
            if is_new_seq:
                seen.add(key)
                new_seqs += 1
            if is_new_seq or new_mask:
                if new_mask:
                    virgin.bits |= bits
                    new_branches += new_mask.bit_count()
                if codes is None:
                    codes = m1_codes
                    for b in tail:
                        codes += b
                model._observe_raw(
                    msgs, m1_bursts + tuple(tail), codes, bits.bit_count(), True
                )
                discoveries += 1

        state.discovery_count += discoveries
        seed.discovery_count += discoveries
        return IterationStats(executed, new_branches, new_seqs)

    def summary(self) -> dict:
        model = self.model
        return {
            "kind": "flat",
            "states": len(model.order),
            "seeded_states": len(model.seeded_states()),
            "seeds": sum(len(s.seeds) for s in model.states.values()),
        }

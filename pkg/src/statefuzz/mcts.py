"""Response-sequence tree scheduler with bandit-driven descent.

The tree mirrors every response sequence observed so far: each node is one
response code, identified by the full code path from the root (equal codes
under different prefixes are distinct nodes). Codes that arrive mid-burst
(several codes answering one request) become redundant nodes, which cannot
anchor fuzzing; the burst-final code becomes a hollow node carrying a
simulation child and a seed queue. An iteration descends to a simulation
node, picks a seed, replays the seed prefix that reproduces the node's
state, fuzzes a batch of mutants from there, expands any new response
sequences into the tree, and writes the statistics back along the path.

Node and seed choices use the same score:

    score = +inf                                   if S = 0
    score = D/S + rho * sqrt(2 * ln(P_S) / S)      otherwise

where S counts past selections, D past discoveries, and P_S the selection
count one level up (parent node, or owning simulation node for a seed).
Ties go to the simulation child first, then insertion order.
"""

from __future__ import annotations

from itertools import chain
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

from .coverage import VirginMap, feature_masks
from .errors import ConfigurationError, StateFuzzError, StateMismatchError
from .mutation import MutationConfig, MutationScope, mutate
from .protocol import DUMMY_CODE, Origin, RequestSequence, split_from_bursts
from .state_machine import _KEY_SEP, IterationStats, SeedEntry, _make_seed
from .sut import ExecutionResult

POLICY_UCT = "uct"
POLICY_RANDOM = "random"
_POLICIES = (POLICY_UCT, POLICY_RANDOM)

ROOT = "root"
HOLLOW = "hollow"
REDUNDANT = "redundant"


def uct(d: int, s: int, p_s: int, rho: float) -> float:
    """Exploitation D/S plus exploration rho*sqrt(2 ln(P_S)/S); +inf at S=0."""
    if d < 0 or s < 0 or rho < 0:
        raise ValueError("uct arguments must be non-negative")
    if s == 0:
        return math.inf
    if p_s < s:
        raise ValueError("parent selection count below child's")
    if p_s < 1:
        raise ValueError("positive S requires P_S >= 1")
    return d / s + rho * math.sqrt(2.0 * math.log(p_s) / s)


@dataclass
class UctParams:
    rho: float = 0.0025
    depth_cap: int = 200

    def __post_init__(self):
        if self.rho < 0:
            raise ConfigurationError("rho must be >= 0")
        if self.depth_cap < 1:
            raise ConfigurationError("depth_cap must be >= 1")


class SimulationNode:
    """Leaf hanging off a hollow node; selecting it means "fuzz from here"."""

    __slots__ = ("s",)

    def __init__(self):
        self.s = 0


class TreeNode:
    __slots__ = ("code", "kind", "depth", "children", "sim", "s", "d", "seeds", "seed_keys")

    def __init__(self, code: str, kind: str, depth: int):
        self.code = code
        self.kind = kind
        self.depth = depth
        self.children: dict[str, TreeNode] = {}
        self.sim = None if kind == REDUNDANT else SimulationNode()
        self.s = 0
        self.d = 0
        self.seeds: list[SeedEntry] = []
        self.seed_keys: set = set()

    def __repr__(self):
        return f"TreeNode({self.code}@{self.depth} {self.kind} S={self.s} D={self.d})"


class Tree:
    def __init__(self, params: UctParams | None = None):
        self.params = params if params is not None else UctParams()
        self.root = TreeNode(DUMMY_CODE, ROOT, 0)
        self.node_count = 1


def iter_nodes(tree: Tree) -> Iterator[TreeNode]:
    """Every node, root first, depth-first in insertion order."""
    stack = [tree.root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children.values()))


class ExpandResult(NamedTuple):
    new_nodes: tuple[TreeNode, ...]
    first_new_parent: TreeNode | None
    promoted: tuple[TreeNode, ...]
    end_node: TreeNode

    @property
    def new_node_count(self) -> int:
        return len(self.new_nodes)


def select_path(tree: Tree, policy: str, rng, blocked=frozenset()) -> list[TreeNode] | None:
    """Descend from the root until a simulation child is chosen.

    Returns the node path root..launch (the launch node owns the chosen
    simulation child), or None when every reachable simulation child is in
    `blocked` and no descent remains. Redundant nodes never terminate the
    descent; scoring covers the current node's simulation child plus all
    children, with P_S taken from the current node.
    """
    if policy not in _POLICIES:
        raise ValueError(f"unknown selection policy {policy!r}")
    rho = tree.params.rho
    node = tree.root
    path = [node]
    while True:
        sim_ok = node.sim is not None and node not in blocked
        children = node.children
        if not children:
            if node.sim is None:
                raise StateFuzzError("redundant node with no children: tree corrupted")
            if sim_ok:
                return path
            return None
        if policy == POLICY_RANDOM:
            cands = list(children.values())
            if sim_ok:
                idx = rng.randrange(len(cands) + 1)
                if idx == 0:
                    return path
                nxt = cands[idx - 1]
            else:
                nxt = cands[rng.randrange(len(cands))]
        else:
            # inline uct: any S=0 candidate scores +inf, and the scan order
            # (sim first, then insertion order) makes the first one the winner
            sim = node.sim if sim_ok else None
            if sim is not None and sim.s == 0:
                return path
            p_s = node.s
            two_log_p = 2.0 * math.log(p_s) if p_s else 0.0
            best = -math.inf
            nxt = None
            if sim is not None:
                ss = sim.s
                best = node.d / ss + rho * math.sqrt(two_log_p / ss)
            for child in children.values():
                cs = child.s
                if cs == 0:
                    nxt = child
                    break
                score = child.d / cs + rho * math.sqrt(two_log_p / cs)
                if score > best:
                    best = score
                    nxt = child
            if nxt is None:
                if sim is None:
                    return None
                return path
        node = nxt
        path.append(node)


def select_seed(node: TreeNode, policy: str, rng, rho: float = 0.0025) -> SeedEntry:
    """Pick a seed from the launch node; P_S is the simulation child's S."""
    if policy not in _POLICIES:
        raise ValueError(f"unknown selection policy {policy!r}")
    seeds = node.seeds
    if not seeds:
        raise StateFuzzError(f"node {node.code!r} holds no seeds")
    if policy == POLICY_RANDOM:
        return seeds[rng.randrange(len(seeds))]
    # inline uct; the first never-selected seed scores +inf and wins outright
    p_s = node.sim.s
    two_log_p = 2.0 * math.log(p_s) if p_s else 0.0
    best = None
    best_score = -math.inf
    for entry in seeds:
        s = entry.selection_count
        if s == 0:
            return entry
        score = entry.discovery_count / s + rho * math.sqrt(two_log_p / s)
        if score > best_score:
            best_score = score
            best = entry
    return best


def expand(tree: Tree, seq: RequestSequence, exec_result: ExecutionResult) -> ExpandResult:
    """Record one executed sequence's response path into the tree."""
    return _expand_raw(
        tree,
        seq.payloads,
        exec_result.per_message_codes,
        exec_result.coverage.count(),
        seq.origin,
    )


def _expand_raw(
    tree: Tree, payloads, bursts, branch_count, origin=Origin.MUTANT, start=None, skip=0
) -> ExpandResult:
    """Walk bursts from the root, creating missing nodes.

    Bursts are applied whole: a burst that would cross the depth cap is
    dropped along with everything after it, so no redundant node is ever
    left childless. Within a burst all codes but the last become redundant
    nodes; the last is hollow. A burst ending on an existing redundant node
    promotes it to hollow. The sequence is stored as a seed at the parent
    of the first new node (when it can hold seeds), at every new hollow
    node, and at every promoted node.

    A caller that already knows the first `skip` bursts retrace the path
    to `start` may pass both; replaying a prefix through existing nodes
    never creates or promotes anything, so the walk can begin at `start`.
    """
    cap = tree.params.depth_cap
    if start is None:
        cur = tree.root
        depth = 0
    else:
        cur = start
        depth = start.depth
    new_nodes: list[TreeNode] = []
    promoted: list[TreeNode] = []
    first_new_parent = None
    for burst in bursts[skip:] if skip else bursts:
        blen = len(burst)
        if depth + blen > cap:
            break
        last = blen - 1
        for k in range(blen):
            code = burst[k]
            child = cur.children.get(code)
            if child is None:
                kind = HOLLOW if k == last else REDUNDANT
                child = TreeNode(code, kind, depth + k + 1)
                cur.children[code] = child
                if first_new_parent is None:
                    first_new_parent = cur
                new_nodes.append(child)
                tree.node_count += 1
            elif k == last and child.kind == REDUNDANT:
                child.kind = HOLLOW
                child.sim = SimulationNode()
                promoted.append(child)
            cur = child
        depth += blen

    targets: list[TreeNode] = []
    if first_new_parent is not None and first_new_parent.sim is not None:
        targets.append(first_new_parent)
    for node in new_nodes:
        if node.kind == HOLLOW:
            targets.append(node)
    targets.extend(promoted)
    if targets:
        seed = _make_seed(payloads, bursts, branch_count, origin)
        for node in targets:
            if seed.key in node.seed_keys:
                continue
            node.seeds.append(
                SeedEntry(seed.bursts, seed.branch_count, seed.key, seed.origin)
            )
            node.seed_keys.add(seed.key)
    return ExpandResult(tuple(new_nodes), first_new_parent, tuple(promoted), cur)


def backpropagate(
    path: Sequence[TreeNode],
    seed: SeedEntry,
    mutants_executed: int,
    expansions: Sequence[ExpandResult],
) -> None:
    """Push one iteration's outcome back along the selection path.

    Every path node, the launch node's simulation child, and the chosen
    seed gain S += mutants_executed. Each expansion that created nodes adds
    D += 1 to the parent of its first new node and to every new node; the
    seed's D grows by the number of new response sequences.
    """
    for node in path:
        node.s += mutants_executed
    path[-1].sim.s += mutants_executed
    seed.selection_count += mutants_executed
    for result in expansions:
        if result.new_nodes:
            result.first_new_parent.d += 1
            for node in result.new_nodes:
                node.d += 1
        seed.discovery_count += 1


def audit(tree: Tree) -> list[str]:
    """Structural and accounting invariants; returns violations found."""
    problems: list[str] = []
    root = tree.root
    if root.kind != ROOT or root.code != DUMMY_CODE or root.depth != 0:
        problems.append("root is malformed")
    if root.sim is None:
        problems.append("root lacks a simulation child")
    cap = tree.params.depth_cap
    count = 0
    stack: list[tuple[TreeNode, str]] = [(root, root.code)]
    while stack:
        node, label = stack.pop()
        count += 1
        if node.kind not in (ROOT, HOLLOW, REDUNDANT):
            problems.append(f"{label}: unknown kind {node.kind!r}")
        if node.kind == REDUNDANT:
            if node.sim is not None:
                problems.append(f"{label}: redundant node has a simulation child")
            if node.seeds or node.seed_keys:
                problems.append(f"{label}: redundant node holds seeds")
            if not node.children:
                problems.append(f"{label}: redundant node has no children")
        elif node.sim is None:
            problems.append(f"{label}: {node.kind} node lacks a simulation child")
        if node.depth > cap:
            problems.append(f"{label}: depth {node.depth} exceeds cap {cap}")
        if node.s < 0 or node.d < 0:
            problems.append(f"{label}: negative statistics")
        if len(node.seeds) != len(node.seed_keys):
            problems.append(f"{label}: seed list and key set disagree")
        for entry in node.seeds:
            if entry.key not in node.seed_keys:
                problems.append(f"{label}: seed key missing from key set")
            if entry.selection_count < 0 or entry.discovery_count < 0:
                problems.append(f"{label}: negative seed statistics")
        child_s = 0
        for code, child in node.children.items():
            if child.code != code:
                problems.append(f"{label}: child keyed {code!r} holds code {child.code!r}")
            if child.depth != node.depth + 1:
                problems.append(f"{label}: child {code!r} depth mismatch")
            child_s += child.s
            stack.append((child, f"{label}.{code}"))
        sim_s = node.sim.s if node.sim is not None else 0
        if sim_s < 0:
            problems.append(f"{label}: negative simulation count")
        if sim_s > node.s:
            problems.append(f"{label}: simulation child exceeds node selection count")
        if node.s != sim_s + child_s:
            problems.append(
                f"{label}: S conservation broken ({node.s} != {sim_s} + {child_s})"
            )
    if count != tree.node_count:
        problems.append(f"node_count {tree.node_count} but walk saw {count}")
    return problems


class TreeEngine:
    """One campaign trial's scheduler loop over a response-sequence tree."""

    def __init__(
        self,
        server,
        node_policy: str,
        seed_policy: str,
        mutation_cfg: MutationConfig,
        rng,
        virgin: VirginMap,
        mutants_per_iteration: int,
        params: UctParams,
    ):
        if node_policy not in _POLICIES or seed_policy not in _POLICIES:
            raise ConfigurationError(
                f"unknown policy pair ({node_policy!r}, {seed_policy!r})"
            )
        self.tree = Tree(params)
        self.server = server
        self.node_policy = node_policy
        self.seed_policy = seed_policy
        self.mutation_cfg = mutation_cfg
        self.rng = rng
        self.virgin = virgin
        self.mutants_per_iteration = mutants_per_iteration
        self.session = server.new_session()
        self.seen: set[str] = set()
        self.case_masks = feature_masks(server)
        self.case_exec_counts = {cid: 0 for cid in self.case_masks}

    def ingest(self, sequences: Sequence[RequestSequence]) -> None:
        """Execute and expand the initial corpus."""
        session = self.session
        cap_len = self.tree.params.depth_cap + 1
        mask_items = list(self.case_masks.items())
        counts = self.case_exec_counts
        for seq in sequences:
            session.reset()
            bursts = tuple(session.handle(p) for p in seq.payloads)
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
            result = _expand_raw(self.tree, seq.payloads, bursts, bits.bit_count(), seq.origin)
            if not result.new_nodes and not result.promoted:
                # duplicate-path corpus entry: keep it at the deepest holder
                end = result.end_node
                if end.sim is not None and tuple(seq.payloads) not in end.seed_keys:
                    entry = _make_seed(seq.payloads, bursts, bits.bit_count(), seq.origin)
                    end.seeds.append(entry)
                    end.seed_keys.add(entry.key)

    def _retain(self, node: TreeNode, payloads, bursts, branch_count) -> None:
        key = tuple(payloads)
        if key in node.seed_keys:
            return
        entry = _make_seed(payloads, bursts, branch_count, Origin.MUTANT)
        node.seeds.append(entry)
        node.seed_keys.add(entry.key)

    def run_iteration(self) -> IterationStats:
        tree = self.tree
        rng = self.rng
        blocked: set = set()
        while True:
            path = select_path(tree, self.node_policy, rng, blocked)
            if path is None:
                return IterationStats(0, 0, 0)
            node = path[-1]
            target = tuple(n.code for n in path)
            seed = None
            split = None
            for _ in range(2):
                if not node.seeds:
                    break
                cand = select_seed(node, self.seed_policy, rng, tree.params.rho)
                try:
                    split = split_from_bursts(len(cand.bursts), cand.bursts, target)
                except StateMismatchError:
                    # stale seed: it no longer reproduces this node's state
                    node.seeds.remove(cand)
                    node.seed_keys.discard(cand.key)
                    continue
                seed = cand
                break
            if seed is not None:
                break
            blocked.add(node)

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
        scope = MutationScope.M2_AND_M3
        cfg = self.mutation_cfg
        cap_len = tree.params.depth_cap + 1
        handle = session.handle
        restore = session.restore
        mask_items = list(self.case_masks.items())
        counts = self.case_exec_counts
        expansions: list[ExpandResult] = []
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
                flat = list(m1_codes)
                for b in tail:
                    flat += b
                key = _KEY_SEP.join(flat[:cap_len])
            else:
                key = _KEY_SEP.join(chain((m1_key,), chain.from_iterable(tail)))

            is_new_seq = key not in seen
            new_mask = bits & ~virgin.bits
            if not is_new_seq and not new_mask:
                continue
            if new_mask:
                virgin.bits |= bits
                new_branches += new_mask.bit_count()
            bursts = m1_bursts + tuple(tail)
            if is_new_seq:
                seen.add(key)
                new_seqs += 1
                # the m1 prefix retraces the launch path, so skip rewalking it
                result = _expand_raw(
                    tree, msgs, bursts, bits.bit_count(), start=node, skip=m1_end
                )
                expansions.append(result)
                if not result.new_nodes and not result.promoted:
                    self._retain(node, msgs, bursts, bits.bit_count())
            else:
                # coverage novelty alone: keep the mutant where it launched
                self._retain(node, msgs, bursts, bits.bit_count())

        backpropagate(path, seed, executed, expansions)
        return IterationStats(executed, new_branches, new_seqs)

    def summary(self) -> dict:
        hollow = redundant = seeds = 0
        for node in iter_nodes(self.tree):
            seeds += len(node.seeds)
            if node.kind == HOLLOW:
                hollow += 1
            elif node.kind == REDUNDANT:
                redundant += 1
        return {
            "kind": "tree",
            "nodes": self.tree.node_count,
            "hollow": hollow,
            "redundant": redundant,
            "seeds": seeds,
        }

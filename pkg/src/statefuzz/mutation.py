"""Region-scoped mutation of request sequences.

A mutation never touches M1: the prefix that reproduces the selected state is
replayed verbatim. Scope M2_ONLY confines operators to the messages sent
while the server stays in that state; M2_AND_M3 opens everything after M1,
including appending new messages when the region is empty.

Operators (drawn by weight, 1..max_stacked_ops per call):

    bit_flip        flip one bit in one message
    byte_set        overwrite one byte with a random value
    byte_delete     remove a short byte range (keeps >= 1 byte per message)
    byte_insert     insert a short random byte range
    dict_insert     splice a dictionary token into a message
    dict_overwrite  overwrite message bytes with a dictionary token
    msg_duplicate   duplicate a message inside the region
    msg_delete      delete a region message (total length stays >= 1)
    msg_swap        exchange two region messages
    dict_message    insert a dictionary token as a new message

Same rng state and inputs always give the same output.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import CorpusFormatError
from .protocol import RegionSplit, unescape_line


class MutationScope(Enum):
    M2_ONLY = "m2"
    M2_AND_M3 = "m2+m3"


DEFAULT_WEIGHTS: dict[str, float] = {
    "bit_flip": 4.0,
    "byte_set": 4.0,
    "byte_delete": 2.0,
    "byte_insert": 2.0,
    "dict_insert": 4.0,
    "dict_overwrite": 2.0,
    "msg_duplicate": 1.0,
    "msg_delete": 1.0,
    "msg_swap": 1.0,
    "dict_message": 2.0,
}

# dispatch ids; byte-level operators stay below _FIRST_MSG_OP
_BIT_FLIP = 0
_BYTE_SET = 1
_BYTE_DELETE = 2
_BYTE_INSERT = 3
_DICT_INSERT = 4
_DICT_OVERWRITE = 5
_FIRST_MSG_OP = 6
_MSG_DUPLICATE = 6
_MSG_DELETE = 7
_MSG_SWAP = 8
_DICT_MESSAGE = 9

_OP_IDS: dict[str, int] = {
    "bit_flip": _BIT_FLIP,
    "byte_set": _BYTE_SET,
    "byte_delete": _BYTE_DELETE,
    "byte_insert": _BYTE_INSERT,
    "dict_insert": _DICT_INSERT,
    "dict_overwrite": _DICT_OVERWRITE,
    "msg_duplicate": _MSG_DUPLICATE,
    "msg_delete": _MSG_DELETE,
    "msg_swap": _MSG_SWAP,
    "dict_message": _DICT_MESSAGE,
}


@dataclass
class MutationConfig:
    max_stacked_ops: int = 4
    dictionary: tuple[bytes, ...] = ()
    weights: dict[str, float] = field(default_factory=dict)
    # growth caps so duplicate/insert chains cannot snowball across generations
    max_messages: int = 16
    max_message_len: int = 512

    def __post_init__(self):
        if self.max_stacked_ops < 1:
            raise ValueError("max_stacked_ops must be >= 1")
        unknown = set(self.weights) - set(DEFAULT_WEIGHTS)
        if unknown:
            raise ValueError(f"unknown mutation operators: {sorted(unknown)}")
        merged = dict(DEFAULT_WEIGHTS, **self.weights)
        if any(w < 0 for w in merged.values()):
            raise ValueError("operator weights must be >= 0")
        names = [n for n, w in merged.items() if w > 0]
        if not names:
            raise ValueError("at least one operator needs positive weight")
        self._names = names
        self._op_ids = [_OP_IDS[n] for n in names]
        cum = []
        total = 0.0
        for n in names:
            total += merged[n]
            cum.append(total)
        self._cum_weights = cum


def load_dictionary(path: str | Path) -> tuple[bytes, ...]:
    """One token per line; same backslash escapes as text corpora."""
    path = Path(path)
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        raise CorpusFormatError(str(path), len(data), "missing final newline")
    tokens = []
    offset = 0
    for line in data.split(b"\n")[:-1]:
        if line:
            tokens.append(unescape_line(line, str(path), offset))
        offset += len(line) + 1
    if not tokens:
        raise CorpusFormatError(str(path), 0, "dictionary holds no tokens")
    return tuple(tokens)


def mutate(
    payloads: Sequence[bytes],
    split: RegionSplit,
    scope: MutationScope,
    cfg: MutationConfig,
    rng,
) -> tuple[list[bytes], bool]:
    """Return (mutated message list, changed flag).

    The flag is False only when nothing was mutable: scope M2_ONLY with an
    empty M2, or every drawn operator lacking a usable target.
    """
    msgs = list(payloads)
    lo = split.m1_end
    if scope is MutationScope.M2_ONLY:
        region_len = split.m2_end - lo
        if region_len <= 0:
            return msgs, False
    else:
        region_len = len(msgs) - lo

    # rand()*n < n holds for ieee doubles, so int(rand()*n) is a safe index
    rand = rng.random
    ids = cfg._op_ids
    cum = cfg._cum_weights
    total = cum[-1]
    dictionary = cfg.dictionary
    changed = False

    for _ in range(int(rand() * cfg.max_stacked_ops) + 1):
        op = ids[bisect_right(cum, rand() * total)]
        if op < _FIRST_MSG_OP:
            # byte-level operators need a non-empty target message
            if not region_len:
                continue
            i = lo + int(rand() * region_len)
            m = msgs[i]
            n = len(m)
            if not n:
                continue
            if op == _BIT_FLIP:
                p = int(rand() * n)
                msgs[i] = m[:p] + bytes((m[p] ^ (1 << int(rand() * 8)),)) + m[p + 1 :]
                changed = True
            elif op == _BYTE_SET:
                p = int(rand() * n)
                msgs[i] = m[:p] + bytes((int(rand() * 256),)) + m[p + 1 :]
                changed = True
            elif op == _DICT_INSERT:
                if dictionary and n < cfg.max_message_len:
                    tok = dictionary[int(rand() * len(dictionary))]
                    p = int(rand() * (n + 1))
                    msgs[i] = m[:p] + tok + m[p:]
                    changed = True
            elif op == _BYTE_DELETE:
                if n > 1:
                    span = 1 + int(rand() * min(8, n - 1))
                    p = int(rand() * (n - span + 1))
                    msgs[i] = m[:p] + m[p + span :]
                    changed = True
            elif op == _BYTE_INSERT:
                if n < cfg.max_message_len:
                    span = 1 + int(rand() * 8)
                    p = int(rand() * (n + 1))
                    blob = rng.getrandbits(span * 8).to_bytes(span, "little")
                    msgs[i] = m[:p] + blob + m[p:]
                    changed = True
            else:  # dict_overwrite
                if dictionary:
                    tok = dictionary[int(rand() * len(dictionary))]
                    p = int(rand() * n)
                    msgs[i] = m[:p] + tok + m[p + len(tok) :]
                    changed = True
        elif op == _MSG_DUPLICATE:
            if region_len and len(msgs) < cfg.max_messages:
                i = lo + int(rand() * region_len)
                msgs.insert(i + 1, msgs[i])
                region_len += 1
                changed = True
        elif op == _MSG_DELETE:
            if region_len and len(msgs) > 1:
                del msgs[lo + int(rand() * region_len)]
                region_len -= 1
                changed = True
        elif op == _MSG_SWAP:
            if region_len >= 2:
                i = lo + int(rand() * region_len)
                j = lo + int(rand() * region_len)
                if i != j:
                    msgs[i], msgs[j] = msgs[j], msgs[i]
                    changed = True
        else:  # dict_message
            if dictionary and len(msgs) < cfg.max_messages:
                i = lo + int(rand() * (region_len + 1))
                msgs.insert(i, dictionary[int(rand() * len(dictionary))])
                region_len += 1
                changed = True
    return msgs, changed

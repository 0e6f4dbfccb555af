"""Request/response sequence types, corpus file IO, and region splitting.

Framed corpus files (``.rseq``) hold raw message payloads:

    +----------------+---------------------+
    | u32 big-endian |  payload bytes      |   repeated once per message
    | payload length |  (length >= 1)      |
    +----------------+---------------------+

Text corpus files (``.txt``) hold one message per line, newline terminated,
with two escapes inside a line: ``\\n`` for a linefeed byte and ``\\\\`` for a
backslash. Both formats round-trip arbitrary payload bytes.

Response sequences are always prefixed with the dummy code ``"0"`` naming the
initial server state, and are truncated to ``depth_cap`` codes past the dummy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusFormatError, EmptyCorpusError, StateMismatchError

DUMMY_CODE = "0"
DEFAULT_DEPTH_CAP = 200

_FRAME_HEADER = struct.Struct(">I")


class Origin(Enum):
    CORPUS = "corpus"
    MUTANT = "mutant"


def validate_code(code: str) -> str:
    """Response codes are non-empty tokens without commas or newlines."""
    if not code or "," in code or "\n" in code:
        raise ValueError(f"invalid response code: {code!r}")
    return code


@dataclass(frozen=True)
class Message:
    payload: bytes

    def __post_init__(self):
        if len(self.payload) < 1:
            raise ValueError("message payload must be at least 1 byte")


@dataclass(frozen=True)
class RequestSequence:
    messages: tuple[Message, ...]
    origin: Origin

    def __post_init__(self):
        if len(self.messages) < 1:
            raise ValueError("request sequence must hold at least 1 message")

    def __len__(self) -> int:
        return len(self.messages)

    @property
    def payloads(self) -> tuple[bytes, ...]:
        return tuple(m.payload for m in self.messages)

    @classmethod
    def from_payloads(cls, payloads: Iterable[bytes], origin: Origin) -> RequestSequence:
        return cls(tuple(Message(p) for p in payloads), origin)


class ResponseSequence:
    """Dummy-prefixed tuple of response codes, truncated at a depth cap."""

    __slots__ = ("codes", "truncated")

    def __init__(self, codes: tuple[str, ...], truncated: bool = False):
        if not codes or codes[0] != DUMMY_CODE:
            raise ValueError("response sequence must start with the dummy code")
        for code in codes[1:]:
            validate_code(code)
        self.codes = codes
        self.truncated = truncated

    @classmethod
    def from_bursts(
        cls, bursts: Sequence[Sequence[str]], depth_cap: int = DEFAULT_DEPTH_CAP
    ) -> ResponseSequence:
        flat = [DUMMY_CODE]
        for burst in bursts:
            flat.extend(burst)
        if len(flat) - 1 > depth_cap:
            seq = cls.__new__(cls)
            seq.codes = tuple(flat[: depth_cap + 1])
            seq.truncated = True
            return seq
        seq = cls.__new__(cls)
        seq.codes = tuple(flat)
        seq.truncated = False
        return seq

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ResponseSequence)
            and self.codes == other.codes
            and self.truncated == other.truncated
        )

    def __hash__(self) -> int:
        return hash((self.codes, self.truncated))

    def __len__(self) -> int:
        return len(self.codes)

    def __repr__(self) -> str:
        dots = "..." if self.truncated else ""
        return f"ResponseSequence({'·'.join(self.codes)}{dots})"


@dataclass(frozen=True)
class RegionSplit:
    """Message-index boundaries: M1 = [0, m1_end), M2 = [m1_end, m2_end)."""

    m1_end: int
    m2_end: int

    def __post_init__(self):
        if not 0 <= self.m1_end <= self.m2_end:
            raise ValueError("region boundaries out of order")


# --- framed format -----------------------------------------------------------

def encode_framed(payloads: Iterable[bytes]) -> bytes:
    parts = []
    for p in payloads:
        if len(p) < 1:
            raise ValueError("cannot encode a zero-length message")
        parts.append(_FRAME_HEADER.pack(len(p)))
        parts.append(p)
    return b"".join(parts)


def decode_framed(data: bytes, source: str = "<bytes>") -> list[bytes]:
    payloads = []
    pos = 0
    total = len(data)
    while pos < total:
        if total - pos < 4:
            raise CorpusFormatError(source, pos, "truncated frame header")
        (length,) = _FRAME_HEADER.unpack_from(data, pos)
        pos += 4
        if length < 1:
            raise CorpusFormatError(source, pos - 4, "zero-length message frame")
        if total - pos < length:
            raise CorpusFormatError(
                source, pos, f"frame payload needs {length} bytes, {total - pos} left"
            )
        payloads.append(data[pos : pos + length])
        pos += length
    return payloads


# --- text format -------------------------------------------------------------

def escape_line(payload: bytes) -> bytes:
    return payload.replace(b"\\", b"\\\\").replace(b"\n", b"\\n")


def unescape_line(line: bytes, source: str = "<line>", base_offset: int = 0) -> bytes:
    out = bytearray()
    i = 0
    n = len(line)
    while i < n:
        b = line[i]
        if b == 0x5C:  # backslash
            if i + 1 >= n:
                raise CorpusFormatError(source, base_offset + i, "dangling escape at end of line")
            nxt = line[i + 1]
            if nxt == 0x6E:  # n
                out.append(0x0A)
            elif nxt == 0x5C:
                out.append(0x5C)
            else:
                raise CorpusFormatError(
                    source, base_offset + i, f"unknown escape \\{chr(nxt)!s}"
                )
            i += 2
        else:
            out.append(b)
            i += 1
    return bytes(out)


def encode_text(payloads: Iterable[bytes]) -> bytes:
    parts = []
    for p in payloads:
        if len(p) < 1:
            raise ValueError("cannot encode a zero-length message")
        parts.append(escape_line(p))
        parts.append(b"\n")
    return b"".join(parts)


def decode_text(data: bytes, source: str = "<bytes>") -> list[bytes]:
    if data and not data.endswith(b"\n"):
        raise CorpusFormatError(source, len(data), "missing final newline")
    payloads = []
    offset = 0
    for line in data.split(b"\n")[:-1]:
        if not line:
            raise CorpusFormatError(source, offset, "empty line (messages need >= 1 byte)")
        payloads.append(unescape_line(line, source, offset))
        offset += len(line) + 1
    return payloads


# --- corpus loading ----------------------------------------------------------

_DECODERS = {".rseq": decode_framed, ".txt": decode_text}


def load_corpus(directory: str | Path) -> list[RequestSequence]:
    """Load every ``.rseq``/``.txt`` file in lexicographic filename order."""
    directory = Path(directory)
    files = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix in _DECODERS),
        key=lambda p: p.name,
    )
    sequences = []
    for path in files:
        payloads = _DECODERS[path.suffix](path.read_bytes(), source=str(path))
        if not payloads:
            raise CorpusFormatError(str(path), 0, "file holds no messages")
        sequences.append(RequestSequence.from_payloads(payloads, Origin.CORPUS))
    if not sequences:
        raise EmptyCorpusError(f"no corpus files in {directory}")
    return sequences


# --- region splitting --------------------------------------------------------

def split_from_bursts(
    message_count: int,
    bursts: Sequence[Sequence[str]],
    target_codes: Sequence[str],
) -> RegionSplit:
    """Worker behind split_regions, operating on raw per-message bursts.

    m1_end is the smallest whole-message count whose dummy-prefixed cumulative
    response codes equal target_codes; a target that only matches inside a
    burst is unreproducible and raises StateMismatchError.
    """
    if len(bursts) != message_count:
        raise ValueError("one burst per message required")
    target = list(target_codes)
    if not target or target[0] != DUMMY_CODE:
        raise StateMismatchError("target prefix must start with the dummy code")

    cumulative = [DUMMY_CODE]
    m1_end = None
    if cumulative == target:
        m1_end = 0
    else:
        for k, burst in enumerate(bursts, start=1):
            cumulative.extend(burst)
            if len(cumulative) > len(target):
                break
            if len(cumulative) == len(target):
                if cumulative == target:
                    m1_end = k
                break
    if m1_end is None:
        raise StateMismatchError(
            f"target prefix {'·'.join(target)} not reachable at a message boundary"
        )

    # M2 holds the messages sent before the server leaves the state named by
    # the last target code; the first message whose burst departs it already
    # belongs to M3.
    state_code = target[-1]
    m2_end = message_count
    for j in range(m1_end, message_count):
        if any(code != state_code for code in bursts[j]):
            m2_end = j
            break
    return RegionSplit(m1_end, m2_end)


def split_regions(seq: RequestSequence, exec_result, target_prefix: ResponseSequence) -> RegionSplit:
    """Split seq into M1 (reproduces the state), M2, and M3 regions.

    exec_result must expose per_message_codes for seq; target_prefix names the
    state to reproduce as a dummy-prefixed response-code path.
    """
    return split_from_bursts(len(seq), exec_result.per_message_codes, target_prefix.codes)

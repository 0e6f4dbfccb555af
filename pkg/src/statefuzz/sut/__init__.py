"""Simulated targets and the execution contract shared by all schedulers."""

from __future__ import annotations

from ..coverage import CoverageMap
from ..errors import ConfigurationError
from ..protocol import DEFAULT_DEPTH_CAP, RequestSequence, ResponseSequence
from .ftp_server import FtpGlobServer
from .instrumentation import branch_count, branch_name

HARNESSES = {FtpGlobServer.name: FtpGlobServer}


def get_harness(name: str):
    """Instantiate a registered harness by name."""
    try:
        return HARNESSES[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown harness {name!r}; known: {sorted(HARNESSES)}"
        ) from None


class ExecutionResult:
    """Everything one execution of a request sequence produced."""

    __slots__ = ("per_message_codes", "response", "coverage", "glob_case_hits")

    def __init__(self, per_message_codes, response, coverage, glob_case_hits):
        self.per_message_codes = per_message_codes
        self.response = response
        self.coverage = coverage
        self.glob_case_hits = glob_case_hits

    @property
    def response_sequence(self) -> ResponseSequence:
        return self.response


def fold_branch_bits(ids) -> int:
    bits = 0
    for i in ids:
        bits |= 1 << i
    return bits


def case_mask_ids(mask: int) -> list[int]:
    """Decode a session case-hit bitmask into sorted case ids."""
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def execute(sut, seq, depth_cap: int = DEFAULT_DEPTH_CAP) -> ExecutionResult:
    """Run seq against a fresh session of sut and collect the outcome.

    seq may be a RequestSequence or any iterable of payload byte strings.
    Execution always runs every message; only the recorded response sequence
    is truncated at depth_cap.
    """
    payloads = seq.payloads if isinstance(seq, RequestSequence) else seq
    session = sut.new_session()
    handle = session.handle
    bursts = [handle(p) for p in payloads]
    response = ResponseSequence.from_bursts(bursts, depth_cap)
    coverage = CoverageMap(sut.map_size, session.hits)
    return ExecutionResult(
        tuple(bursts), response, coverage, frozenset(case_mask_ids(session.case_hits))
    )


def list_glob_cases(sut) -> list[dict]:
    """The instrumented glob case table of a harness (id, description, branches)."""
    if isinstance(sut, str):
        sut = get_harness(sut)
    return sut.glob_cases()


__all__ = [
    "ExecutionResult",
    "FtpGlobServer",
    "HARNESSES",
    "branch_count",
    "branch_name",
    "case_mask_ids",
    "execute",
    "fold_branch_bits",
    "get_harness",
    "list_glob_cases",
]

"""Simulated FTP-style server with an instrumented glob engine.

In-process and deterministic: no sockets, no clock, no global RNG. One
request message maps to one burst of response codes. The command surface is
deliberately small:

    USER x    -> 331 (restarts login)
    PASS x    -> 230 after USER, else 503
    MKD p     -> 257 creates a directory; 550 if it exists or parent missing
    STOR p    -> 250 creates/overwrites a file; 550 if parent missing or p is a dir
    NLST      -> 250 lists the working directory (no glob engine involved)
    NLST pat  -> 250 with glob evaluation; 550 on a glob error
    CWD p     -> 250 if p is a directory (or /), else 550
    QUIT      -> 221
    INFO      -> 150 then 226 in a single burst
    other     -> 500; commands needing a path answer 501 without one

Verbs are case-sensitive. Paths are resolved against the working directory
('' is the root); "." and ".." have no special meaning. Each session carries
an allocation budget consumed by glob matches; exhausting it is the glob
engine's case-1 failure. Sessions snapshot/restore cheaply so a fuzzing batch
can replay a common message prefix once.
"""

from __future__ import annotations

from ..coverage import DEFAULT_MAP_SIZE
from .instrumentation import branch, branch_count
from .glob_engine import (
    GLOB_CASE_BRANCH,
    GLOB_CASE_DESCRIPTIONS,
    GLOB_CASE_MASK,
    run_glob,
)

DEFAULT_ALLOC_BUDGET = 24

_AUTH_NONE = 0
_AUTH_USER = 1
_AUTH_IN = 2

_VERBS = frozenset(("USER", "PASS", "MKD", "STOR", "NLST", "CWD", "QUIT", "INFO"))

R150_226 = ("150", "226")
R221 = ("221",)
R230 = ("230",)
R250 = ("250",)
R257 = ("257",)
R331 = ("331",)
R500 = ("500",)
R501 = ("501",)
R503 = ("503",)
R550 = ("550",)

def _mask(name: str) -> int:
    return 1 << branch(name)


# pre-shifted masks: sessions accumulate hits as one int
B_EMPTY = _mask("ftp-empty-request")
B_UNKNOWN = _mask("ftp-unknown-verb")
B_USER = _mask("ftp-user")
B_PASS_OK = _mask("ftp-pass-ok")
B_PASS_BAD = _mask("ftp-pass-out-of-order")
B_MKD_OK = _mask("ftp-mkd-ok")
B_MKD_EXISTS = _mask("ftp-mkd-exists")
B_MKD_NOPARENT = _mask("ftp-mkd-no-parent")
B_MKD_NOARG = _mask("ftp-mkd-no-arg")
B_STOR_OK = _mask("ftp-stor-ok")
B_STOR_NOPARENT = _mask("ftp-stor-no-parent")
B_STOR_ISDIR = _mask("ftp-stor-target-is-dir")
B_STOR_NOARG = _mask("ftp-stor-no-arg")
B_NLST_BARE = _mask("ftp-nlst-bare-listing")
B_NLST_OK = _mask("ftp-nlst-glob-ok")
B_NLST_ERR = _mask("ftp-nlst-glob-error")
B_CWD_OK = _mask("ftp-cwd-ok")
B_CWD_MISS = _mask("ftp-cwd-missing")
B_CWD_NOARG = _mask("ftp-cwd-no-arg")
B_QUIT = _mask("ftp-quit")
B_INFO = _mask("ftp-info-burst")


class FtpSession:
    """One connection's worth of mutable server state."""

    __slots__ = ("fs", "cwd", "auth", "alloc_left", "hits", "case_hits", "_budget")

    def __init__(self, alloc_budget: int = DEFAULT_ALLOC_BUDGET):
        self._budget = alloc_budget
        self.reset()

    def reset(self):
        self.fs = {}
        self.cwd = ""
        self.auth = _AUTH_NONE
        self.alloc_left = self._budget
        self.hits = 0
        self.case_hits = 0

    def snapshot(self):
        # hits and case_hits are ints, so only fs needs a defensive copy
        return (
            dict(self.fs),
            self.cwd,
            self.auth,
            self.alloc_left,
            self.hits,
            self.case_hits,
        )

    def restore(self, snap):
        fs, self.cwd, self.auth, self.alloc_left, self.hits, self.case_hits = snap
        self.fs = dict(fs)

    def glob_case(self, case_id: int):
        self.case_hits |= 1 << case_id
        self.hits |= GLOB_CASE_MASK[case_id]

    def alloc_charge(self) -> bool:
        if self.alloc_left <= 0:
            self.glob_case(1)
            return False
        self.alloc_left -= 1
        return True

    def _resolve(self, arg: str) -> str:
        if arg.startswith("/"):
            base = ""
            arg = arg.lstrip("/")
        else:
            base = self.cwd
        parts = [p for p in arg.split("/") if p]
        if not parts:
            return base
        if base:
            return base + "/" + "/".join(parts)
        return "/".join(parts)

    def _parent_ok(self, path: str) -> bool:
        head, sep, _ = path.rpartition("/")
        return not sep or self.fs.get(head) is True

    def handle(self, payload: bytes) -> tuple[str, ...]:
        """Process one request, returning its burst of response codes."""
        text = payload.decode("latin-1")
        if text.endswith("\n"):
            text = text[:-2] if text.endswith("\r\n") else text[:-1]
        if not text:
            self.hits |= B_EMPTY
            return R500
        verb, _, arg = text.partition(" ")
        if verb not in _VERBS:
            self.hits |= B_UNKNOWN
            return R500

        if verb == "USER":
            self.hits |= B_USER
            self.auth = _AUTH_USER
            return R331
        if verb == "PASS":
            if self.auth == _AUTH_USER:
                self.hits |= B_PASS_OK
                self.auth = _AUTH_IN
                return R230
            self.hits |= B_PASS_BAD
            return R503
        if verb == "MKD":
            if not arg:
                self.hits |= B_MKD_NOARG
                return R501
            path = self._resolve(arg)
            if not path or path in self.fs:
                self.hits |= B_MKD_EXISTS
                return R550
            if not self._parent_ok(path):
                self.hits |= B_MKD_NOPARENT
                return R550
            self.hits |= B_MKD_OK
            self.fs[path] = True
            return R257
        if verb == "STOR":
            if not arg:
                self.hits |= B_STOR_NOARG
                return R501
            path = self._resolve(arg)
            if not path or self.fs.get(path) is True:
                self.hits |= B_STOR_ISDIR
                return R550
            if not self._parent_ok(path):
                self.hits |= B_STOR_NOPARENT
                return R550
            self.hits |= B_STOR_OK
            self.fs[path] = False
            return R250
        if verb == "NLST":
            if not arg:
                self.hits |= B_NLST_BARE
                return R250
            if run_glob(self, arg) is None:
                self.hits |= B_NLST_ERR
                return R550
            self.hits |= B_NLST_OK
            return R250
        if verb == "CWD":
            if not arg:
                self.hits |= B_CWD_NOARG
                return R501
            path = self._resolve(arg)
            if path and self.fs.get(path) is not True:
                self.hits |= B_CWD_MISS
                return R550
            self.hits |= B_CWD_OK
            self.cwd = path
            return R250
        if verb == "QUIT":
            self.hits |= B_QUIT
            return R221
        self.hits |= B_INFO
        return R150_226


_DEFAULT_DICTIONARY = (
    b"USER",
    b"PASS",
    b"MKD",
    b"STOR",
    b"NLST",
    b"NLST ",
    b"CWD",
    b"QUIT",
    b"INFO",
    b"*",
    b"*/",
    b"?",
    b"[",
    b"]",
    b"!",
    b"-",
    b"/",
    b"\\",
    b" ",
)


class FtpGlobServer:
    """Harness descriptor: builds sessions and names its coverage space."""

    name = "ftp-glob"
    map_size = DEFAULT_MAP_SIZE

    def __init__(self, alloc_budget: int = DEFAULT_ALLOC_BUDGET):
        self.alloc_budget = alloc_budget

    @property
    def total_branches(self) -> int:
        return branch_count()

    def new_session(self) -> FtpSession:
        return FtpSession(self.alloc_budget)

    def default_dictionary(self) -> tuple[bytes, ...]:
        return _DEFAULT_DICTIONARY

    def glob_cases(self) -> list[dict]:
        return [
            {
                "case_id": cid,
                "description": GLOB_CASE_DESCRIPTIONS[cid],
                "branch_ids": [GLOB_CASE_BRANCH[cid]],
            }
            for cid in sorted(GLOB_CASE_DESCRIPTIONS)
        ]

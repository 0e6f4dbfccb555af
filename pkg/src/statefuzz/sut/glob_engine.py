"""Instrumented glob matching over the simulated server's virtual filesystem.

Patterns support ``*`` and ``?`` wildcards, ``[...]`` character classes with
``!`` negation and ranges, backslash escapes, and path-component-wise
matching. Ten behaviours of interest are instrumented as numbered cases, each
tied to its own coverage branch; the descriptions below double as the rows of
the reported case table.

Matching uses the iterative backtrack-to-last-star algorithm, so adversarial
patterns cannot trigger super-linear matching the way a backtracking regex
translation would. The only failure modes are a dangling trailing escape and
exhaustion of the session's allocation budget (case 1); an unterminated
bracket class falls back to a literal ``[``.
"""

from __future__ import annotations

from .instrumentation import branch

GLOB_CASE_DESCRIPTIONS: dict[int, str] = {
    1: "Failing to allocate more memory",
    2: "Globbing a file without path prefix",
    3: "Globbing a file with a path prefix",
    4: "Having a wildcard in a directory name",
    5: 'Globbing with metacharacter "*" or "?"',
    6: 'Globbing with metacharacter "[]"',
    7: "Escaping a wildcard metacharacter",
    8: "Successfully expanding a directory with a metacharacter",
    9: 'Globbing a directory that contains "\\"',
    10: "Successfully finding at least 1 match",
}

GLOB_CASE_BRANCH: dict[int, int] = {
    1: branch("glob-case-01-alloc-fail"),
    2: branch("glob-case-02-no-path-prefix"),
    3: branch("glob-case-03-path-prefix"),
    4: branch("glob-case-04-wildcard-dir"),
    5: branch("glob-case-05-star-qmark"),
    6: branch("glob-case-06-bracket-class"),
    7: branch("glob-case-07-escaped-meta"),
    8: branch("glob-case-08-dir-expanded"),
    9: branch("glob-case-09-backslash-dir"),
    10: branch("glob-case-10-any-match"),
}

# sessions track hits as an int bitmask, so branch marks are pre-shifted
GLOB_CASE_MASK: dict[int, int] = {c: 1 << b for c, b in GLOB_CASE_BRANCH.items()}


def _mask(name: str) -> int:
    return 1 << branch(name)


B_PAT_DANGLING = _mask("glob-dangling-escape")
B_PAT_LITERAL_CLASS = _mask("glob-unterminated-class-literal")
B_DIR_LITERAL_HIT = _mask("glob-dir-literal-hit")
B_DIR_LITERAL_MISS = _mask("glob-dir-literal-miss")
B_DIR_WILD_FILE = _mask("glob-dir-wildcard-matched-file")
B_DIR_DEAD = _mask("glob-dir-walk-dead-end")
B_FINAL_LITERAL_HIT = _mask("glob-final-literal-hit")
B_FINAL_LITERAL_MISS = _mask("glob-final-literal-miss")
B_FINAL_WILD_HIT = _mask("glob-final-wildcard-hit")
B_NO_MATCH = _mask("glob-no-match")

_F_WILD = 1
_F_CLASS = 2
_F_ESC_META = 4

_METACHARS = "*?[]\\"

# token kinds for compiled components
_T_LIT = 0
_T_ANY = 1
_T_STAR = 2
_T_CLASS = 3


class _BadPattern(Exception):
    pass


class _Component:
    __slots__ = ("literal", "tokens", "flags")

    def __init__(self, literal, tokens, flags):
        self.literal = literal
        self.tokens = tokens
        self.flags = flags


class _Pattern:
    __slots__ = ("components", "anchored", "error")

    def __init__(self, components, anchored, error):
        self.components = components
        self.anchored = anchored
        self.error = error


def _compile_component(comp: str) -> _Component:
    flags = 0
    literal = True
    lit_parts: list[str] = []
    tokens: list[tuple] = []
    i, n = 0, len(comp)
    while i < n:
        c = comp[i]
        if c == "\\":
            if i + 1 >= n:
                raise _BadPattern
            nxt = comp[i + 1]
            if nxt in _METACHARS:
                flags |= _F_ESC_META
            lit_parts.append(nxt)
            tokens.append((_T_LIT, nxt))
            i += 2
        elif c == "*":
            literal = False
            flags |= _F_WILD
            # consecutive stars collapse into one
            if not tokens or tokens[-1][0] != _T_STAR:
                tokens.append((_T_STAR,))
            i += 1
        elif c == "?":
            literal = False
            flags |= _F_WILD
            tokens.append((_T_ANY,))
            i += 1
        elif c == "[":
            j = i + 1
            negate = False
            if j < n and comp[j] == "!":
                negate = True
                j += 1
            body: list[str] = []
            first = True
            while j < n and (comp[j] != "]" or first):
                body.append(comp[j])
                first = False
                j += 1
            if j >= n or not body:
                lit_parts.append("[")
                tokens.append((_T_LIT, "["))
                i += 1
            else:
                literal = False
                flags |= _F_CLASS
                chars = set()
                ranges = []
                k = 0
                while k < len(body):
                    if k + 2 < len(body) and body[k + 1] == "-":
                        ranges.append((body[k], body[k + 2]))
                        k += 3
                    else:
                        chars.add(body[k])
                        k += 1
                tokens.append((_T_CLASS, negate, frozenset(chars), tuple(ranges)))
                i = j + 1
        else:
            lit_parts.append(c)
            tokens.append((_T_LIT, c))
            i += 1
    if literal:
        return _Component("".join(lit_parts), None, flags)
    return _Component(None, tuple(tokens), flags)


def _match_tokens(tokens: tuple, name: str) -> bool:
    nt = len(tokens)
    nn = len(name)
    ti = ni = 0
    star_ti = -1
    star_ni = 0
    while ni < nn:
        if ti < nt:
            tok = tokens[ti]
            kind = tok[0]
            if kind == _T_STAR:
                star_ti = ti
                star_ni = ni
                ti += 1
                continue
            if kind == _T_LIT:
                if name[ni] == tok[1]:
                    ti += 1
                    ni += 1
                    continue
            elif kind == _T_ANY:
                ti += 1
                ni += 1
                continue
            else:  # _T_CLASS
                c = name[ni]
                inside = c in tok[2] or any(lo <= c <= hi for lo, hi in tok[3])
                if inside != tok[1]:
                    ti += 1
                    ni += 1
                    continue
        if star_ti >= 0:
            # retry: let the last star swallow one more character
            star_ni += 1
            ni = star_ni
            ti = star_ti + 1
            continue
        return False
    while ti < nt and tokens[ti][0] == _T_STAR:
        ti += 1
    return ti == nt


_CACHE: dict[str, _Pattern] = {}
_CACHE_LIMIT = 8192


def compile_pattern(pattern: str) -> _Pattern:
    pat = _CACHE.get(pattern)
    if pat is not None:
        return pat
    anchored = pattern.startswith("/")
    text = pattern.lstrip("/") if anchored else pattern
    try:
        components = [_compile_component(c) for c in text.split("/")]
        pat = _Pattern(components, anchored, False)
    except _BadPattern:
        pat = _Pattern((), anchored, True)
    if len(_CACHE) >= _CACHE_LIMIT:
        _CACHE.clear()
    _CACHE[pattern] = pat
    return pat


def _children(fs: dict, d: str):
    prefix = d + "/" if d else ""
    plen = len(prefix)
    for path, isdir in fs.items():
        if path.startswith(prefix):
            name = path[plen:]
            if name and "/" not in name:
                yield name, path, isdir


def run_glob(session, pattern: str):
    """Match pattern against the session filesystem.

    Returns the list of matched paths, or None on a glob error (dangling
    escape, or allocation budget exhausted while collecting matches). Branch
    and case hits are recorded on the session as a side effect.
    """
    pat = compile_pattern(pattern)
    case = session.glob_case
    if pat.error:
        session.hits |= B_PAT_DANGLING
        return None

    comps = pat.components
    if len(comps) == 1 and not pat.anchored:
        case(2)
    else:
        case(3)
    for comp in comps:
        f = comp.flags
        if f & _F_WILD:
            case(5)
        if f & _F_CLASS:
            case(6)
        if f & _F_ESC_META:
            case(7)
        if comp.tokens is None and "[" in comp.literal:
            session.hits |= B_PAT_LITERAL_CLASS

    fs = session.fs
    dirs = [""] if pat.anchored else [session.cwd]
    for comp in comps[:-1]:
        nxt = []
        if comp.tokens is None:
            for d in dirs:
                path = f"{d}/{comp.literal}" if d else comp.literal
                if comp.literal and fs.get(path) is True:
                    session.hits |= B_DIR_LITERAL_HIT
                    nxt.append(path)
                else:
                    session.hits |= B_DIR_LITERAL_MISS
        else:
            case(4)
            tokens = comp.tokens
            for d in dirs:
                for name, path, isdir in _children(fs, d):
                    if _match_tokens(tokens, name):
                        if isdir:
                            case(8)
                            if "\\" in name:
                                case(9)
                            nxt.append(path)
                        else:
                            session.hits |= B_DIR_WILD_FILE
        dirs = nxt
        if not dirs:
            session.hits |= B_DIR_DEAD
            break

    matches: list[str] = []
    if dirs:
        final = comps[-1]
        if final.tokens is None:
            name = final.literal
            for d in dirs:
                path = f"{d}/{name}" if d else name
                isdir = fs.get(path) if name else None
                if isdir is not None:
                    session.hits |= B_FINAL_LITERAL_HIT
                    if isdir and "\\" in name:
                        case(9)
                    if not session.alloc_charge():
                        return None
                    matches.append(path)
                else:
                    session.hits |= B_FINAL_LITERAL_MISS
        else:
            tokens = final.tokens
            for d in dirs:
                for name, path, isdir in _children(fs, d):
                    if _match_tokens(tokens, name):
                        session.hits |= B_FINAL_WILD_HIT
                        if isdir and "\\" in name:
                            case(9)
                        if not session.alloc_charge():
                            return None
                        matches.append(path)

    if matches:
        case(10)
    else:
        session.hits |= B_NO_MATCH
    return matches

from __future__ import annotations

import random

import pytest

from statefuzz.errors import ConfigurationError
from statefuzz.sut import execute, get_harness, list_glob_cases
from statefuzz.sut.ftp_server import FtpGlobServer


def _run(server, messages):
    result = execute(server, [m.encode() for m in messages])
    return [list(burst) for burst in result.per_message_codes], sorted(result.glob_case_hits)


@pytest.fixture()
def server():
    return get_harness("ftp-glob")


def test_get_harness_rejects_unknown_name():
    with pytest.raises(ConfigurationError):
        get_harness("no-such-target")


def test_login_mkd_stor_nlst_codes(server):
    bursts, cases = _run(server, ["USER u", "PASS p", "MKD d", "STOR d/f", "NLST *"])
    assert bursts == [["331"], ["230"], ["257"], ["250"], ["250"]]
    assert {5, 10} <= set(cases)


def test_listing_before_any_file_matches_nothing(server):
    bursts, cases = _run(server, ["USER u", "PASS p", "NLST *"])
    assert bursts == [["331"], ["230"], ["250"]]
    assert 10 not in cases


def test_quit_alone(server):
    bursts, cases = _run(server, ["QUIT"])
    assert bursts == [["221"]]
    assert cases == []


def test_state_merging_fixture_shapes(server):
    # both sequences end in 250 yet their full response sequences differ
    with_dir, _ = _run(server, ["USER u", "PASS p", "MKD d", "STOR d/f", "NLST *"])
    without, _ = _run(server, ["USER u", "PASS p", "NLST *"])
    assert with_dir[-1] == without[-1] == ["250"]
    assert with_dir != without


def test_info_bursts_two_codes(server):
    bursts, _ = _run(server, ["INFO"])
    assert bursts == [["150", "226"]]


def test_error_codes(server):
    bursts, _ = _run(
        server, ["PASS p", "MKD", "STOR d/f", "NOPE", "", "CWD nowhere", "MKD d", "MKD d"]
    )
    assert bursts == [
        ["503"],  # PASS without USER
        ["501"],  # MKD without argument
        ["550"],  # STOR into a missing directory
        ["500"],  # unknown verb
        ["500"],  # empty request
        ["550"],  # CWD to a missing directory
        ["257"],
        ["550"],  # duplicate MKD
    ]


def test_cwd_into_created_directory(server):
    bursts, _ = _run(server, ["MKD d", "CWD d"])
    assert bursts == [["257"], ["250"]]


def test_case_table_descriptions(server):
    table = {c["case_id"]: c for c in list_glob_cases(server)}
    assert sorted(table) == list(range(1, 11))
    assert table[1]["description"] == "Failing to allocate more memory"
    assert table[6]["description"] == 'Globbing with metacharacter "[]"'
    assert table[10]["description"] == "Successfully finding at least 1 match"
    for case in table.values():
        assert case["branch_ids"]


def test_glob_case_hits_imply_branch_bits(server):
    table = {c["case_id"]: c["branch_ids"] for c in server.glob_cases()}
    result = execute(server, [b"MKD ab", b"NLST [a-c]*", b"NLST */x", b"NLST x"])
    assert result.glob_case_hits
    for cid in result.glob_case_hits:
        assert any(result.coverage.bits >> b & 1 for b in table[cid])


def test_class_star_and_match_cases(server):
    _, cases = _run(server, ["MKD ab", "NLST [a-c]*"])
    assert {2, 5, 6, 10} <= set(cases)


def test_escaped_metacharacter_case(server):
    _, cases = _run(server, ["NLST \\*"])
    assert 7 in cases
    # escaping an ordinary character is not an escaped metacharacter
    _, cases = _run(server, ["NLST a\\b"])
    assert 7 not in cases


def test_dangling_escape_is_a_glob_error(server):
    bursts, _ = _run(server, ["NLST x\\"])
    assert bursts == [["550"]]


def test_unterminated_class_is_a_literal(server):
    bursts, cases = _run(server, ["MKD [", "NLST ["])
    assert bursts == [["257"], ["250"]]
    assert 10 in cases
    assert 6 not in cases


def test_directory_expansion_and_backslash_cases(server):
    _, cases = _run(server, ["MKD a\\b", "NLST */x"])
    assert {3, 4, 8, 9} <= set(cases)
    _, plain = _run(server, ["MKD d", "NLST */x"])
    assert 8 in plain
    assert 9 not in plain


def test_wildcard_directory_case_fires_without_a_match():
    # the pattern shape alone reaches the wildcard-directory code path
    server = get_harness("ftp-glob")
    _, cases = _run(server, ["NLST */x"])
    assert 4 in cases
    assert 8 not in cases


def test_allocation_budget_exhaustion():
    tiny = FtpGlobServer(alloc_budget=1)
    bursts, cases = _run(tiny, ["MKD d", "MKD e", "NLST *"])
    assert bursts[-1] == ["550"]
    assert 1 in cases


def test_allocation_budget_spans_a_session():
    tiny = FtpGlobServer(alloc_budget=3)
    _, cases = _run(tiny, ["MKD d", "MKD e", "NLST *", "NLST *"])
    assert 1 in cases


def test_execution_is_deterministic(server):
    msgs = [b"USER u", b"PASS p", b"MKD d", b"NLST [a-c]*", b"INFO"]
    first = execute(server, msgs)
    second = execute(server, msgs)
    assert first.per_message_codes == second.per_message_codes
    assert first.coverage.bits == second.coverage.bits
    assert first.glob_case_hits == second.glob_case_hits
    assert first.response.codes == second.response.codes


def test_sessions_are_independent(server):
    session = server.new_session()
    session.handle(b"MKD d")
    fresh = server.new_session()
    assert fresh.handle(b"CWD d") == ("550",)


def test_reset_clears_session_state(server):
    session = server.new_session()
    session.handle(b"USER u")
    session.handle(b"MKD d")
    session.reset()
    assert session.handle(b"PASS p") == ("503",)
    assert session.handle(b"CWD d") == ("550",)
    assert session.hits != 0


def test_snapshot_restore_round_trips(server):
    session = server.new_session()
    session.handle(b"USER u")
    session.handle(b"MKD d")
    snap = session.snapshot()
    hits = session.hits
    session.handle(b"PASS p")
    session.handle(b"MKD other")
    session.restore(snap)
    assert session.hits == hits
    assert session.handle(b"CWD d") == ("250",)
    assert session.handle(b"CWD other") == ("550",)


def test_random_byte_messages_never_crash(server):
    rng = random.Random(7)
    session = server.new_session()
    for _ in range(400):
        payload = bytes(rng.randrange(256) for _ in range(rng.randint(1, 30)))
        burst = session.handle(payload)
        assert burst
        for code in burst:
            assert code.isdigit()


def test_responses_unaffected_by_auth_state(server):
    # directory and listing commands answer the same before and after login
    anon, _ = _run(server, ["MKD d", "STOR d/f", "NLST *", "CWD d"])
    authed, _ = _run(server, ["USER u", "PASS p", "MKD d", "STOR d/f", "NLST *", "CWD d"])
    assert authed[2:] == anon

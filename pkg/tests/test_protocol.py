from __future__ import annotations

import random

import pytest

from statefuzz.errors import CorpusFormatError, EmptyCorpusError, StateMismatchError
from statefuzz.protocol import (
    DUMMY_CODE,
    Message,
    Origin,
    RegionSplit,
    RequestSequence,
    ResponseSequence,
    decode_framed,
    decode_text,
    encode_framed,
    encode_text,
    load_corpus,
    split_from_bursts,
    validate_code,
)


def _random_payload(rng: random.Random, max_len: int = 40) -> bytes:
    n = rng.randint(1, max_len)
    return bytes(rng.randrange(256) for _ in range(n))


def test_message_rejects_empty_payload():
    with pytest.raises(ValueError):
        Message(b"")
    assert Message(b"\x00").payload == b"\x00"


def test_request_sequence_rejects_empty():
    with pytest.raises(ValueError):
        RequestSequence((), Origin.CORPUS)
    seq = RequestSequence.from_payloads([b"USER u"], Origin.CORPUS)
    assert len(seq) == 1
    assert seq.payloads == (b"USER u",)


def test_validate_code_rules():
    assert validate_code("250") == "250"
    for bad in ("", "2,50", "25\n0"):
        with pytest.raises(ValueError):
            validate_code(bad)


def test_response_sequence_requires_dummy_prefix():
    seq = ResponseSequence((DUMMY_CODE, "331", "230"))
    assert len(seq) == 3
    assert not seq.truncated
    with pytest.raises(ValueError):
        ResponseSequence(("331", "230"))


def test_response_sequence_from_bursts_concatenates_with_dummy():
    bursts = [["331"], ["230"], ["150", "226"]]
    seq = ResponseSequence.from_bursts(bursts)
    assert seq.codes == ("0", "331", "230", "150", "226")
    assert not seq.truncated


def test_response_sequence_truncates_at_depth_cap():
    bursts = [["250"]] * 12
    seq = ResponseSequence.from_bursts(bursts, depth_cap=5)
    assert seq.truncated
    assert len(seq.codes) == 6
    assert seq.codes[0] == DUMMY_CODE


def test_region_split_orders_boundaries():
    RegionSplit(0, 0)
    RegionSplit(2, 5)
    with pytest.raises(ValueError):
        RegionSplit(3, 2)
    with pytest.raises(ValueError):
        RegionSplit(-1, 2)


def test_framed_round_trip_random_sequences():
    rng = random.Random(0xF0F0)
    for _ in range(300):
        payloads = [_random_payload(rng) for _ in range(rng.randint(1, 8))]
        blob = encode_framed(payloads)
        assert decode_framed(blob) == payloads
        # encode(decode(file)) must reproduce the file bytes exactly
        assert encode_framed(decode_framed(blob)) == blob


def test_framed_round_trip_covers_every_byte_value():
    payload = bytes(range(256))
    assert decode_framed(encode_framed([payload])) == [payload]


def test_framed_decode_errors():
    with pytest.raises(CorpusFormatError):
        decode_framed(b"\x00\x00\x00")
    with pytest.raises(CorpusFormatError):
        decode_framed(b"\x00\x00\x00\x00")
    with pytest.raises(CorpusFormatError):
        decode_framed(b"\x00\x00\x00\x05ab")


def test_text_round_trip_random_sequences():
    rng = random.Random(0xBEEF)
    for _ in range(300):
        payloads = [_random_payload(rng) for _ in range(rng.randint(1, 6))]
        blob = encode_text(payloads)
        assert decode_text(blob) == payloads
        assert encode_text(decode_text(blob)) == blob


def test_text_escapes_newline_and_backslash():
    payloads = [b"MKD a\nb", b"back\\slash"]
    blob = encode_text(payloads)
    assert blob == b"MKD a\\nb\nback\\\\slash\n"
    assert decode_text(blob) == payloads


def test_text_decode_errors():
    with pytest.raises(CorpusFormatError):
        decode_text(b"no trailing newline")
    with pytest.raises(CorpusFormatError):
        decode_text(b"ok\n\nok\n")
    with pytest.raises(CorpusFormatError):
        decode_text(b"dangling\\\n")
    with pytest.raises(CorpusFormatError):
        decode_text(b"bad\\qescape\n")


def test_load_corpus_orders_and_filters(tmp_path):
    (tmp_path / "b.txt").write_bytes(b"PASS p\n")
    (tmp_path / "a.rseq").write_bytes(encode_framed([b"USER u"]))
    (tmp_path / "ignored.bin").write_bytes(b"\x00\x01")
    seqs = load_corpus(tmp_path)
    assert [s.payloads for s in seqs] == [(b"USER u",), (b"PASS p",)]
    assert all(s.origin is Origin.CORPUS for s in seqs)


def test_load_corpus_rejects_empty_file_and_empty_dir(tmp_path):
    with pytest.raises(EmptyCorpusError):
        load_corpus(tmp_path)
    (tmp_path / "empty.rseq").write_bytes(b"")
    with pytest.raises(CorpusFormatError):
        load_corpus(tmp_path)


def test_split_m1_at_whole_message_boundary():
    bursts = [["331"], ["230"], ["250"]]
    split = split_from_bursts(3, bursts, ["0", "331", "230"])
    assert split.m1_end == 2


def test_split_root_target_is_empty_m1():
    split = split_from_bursts(2, [["331"], ["230"]], ["0"])
    assert split.m1_end == 0


def test_split_rejects_mid_burst_target():
    # the 150 of a 150·226 burst is not reachable at a message boundary
    bursts = [["331"], ["150", "226"]]
    with pytest.raises(StateMismatchError):
        split_from_bursts(2, bursts, ["0", "331", "150"])
    split = split_from_bursts(2, bursts, ["0", "331", "150", "226"])
    assert split.m1_end == 2


def test_split_rejects_unreachable_target():
    bursts = [["331"], ["230"]]
    with pytest.raises(StateMismatchError):
        split_from_bursts(2, bursts, ["0", "500"])
    with pytest.raises(StateMismatchError):
        split_from_bursts(2, bursts, ["500", "331"])


def test_split_m2_extends_while_state_code_repeats():
    # messages keep extending M2 while their bursts stay on the state code;
    # the first departing message is already M3
    bursts = [["331"], ["230"], ["250"], ["250"], ["257"], ["250"]]
    split = split_from_bursts(6, bursts, ["0", "331", "230", "250"])
    assert split.m1_end == 3
    assert split.m2_end == 4


def test_split_m2_runs_to_end_without_leaving_state():
    bursts = [["331"], ["230"], ["250"], ["250"]]
    split = split_from_bursts(4, bursts, ["0", "331", "230", "250"])
    assert split.m1_end == 3
    assert split.m2_end == 4


def test_split_departing_message_belongs_to_m3():
    # a burst carrying any off-state code marks the departure point
    bursts = [["331"], ["230"], ["250", "550"], ["250"]]
    split = split_from_bursts(4, bursts, ["0", "331", "230"])
    assert split.m1_end == 2
    assert split.m2_end == 2


def test_split_monotone_in_target_length():
    # a longer reachable target never yields a smaller m1_end
    rng = random.Random(0x5EED)
    codes = ["250", "257", "331", "500"]
    for _ in range(200):
        bursts = []
        for _ in range(rng.randint(1, 7)):
            bursts.append([rng.choice(codes) for _ in range(rng.randint(1, 2))])
        flat = [DUMMY_CODE]
        boundaries = [0]
        for burst in bursts:
            flat.extend(burst)
            boundaries.append(len(flat))
        prev_m1 = -1
        for count in boundaries:
            target = flat[: count or 1]
            split = split_from_bursts(len(bursts), bursts, target)
            assert split.m1_end >= prev_m1
            prev_m1 = split.m1_end


def test_split_requires_one_burst_per_message():
    with pytest.raises(ValueError):
        split_from_bursts(2, [["331"]], ["0", "331"])

"""Message encode/decode: frozen wire examples, totality, and roundtrips."""

import random

import pytest

from isoha.codec import (
    CodecError,
    EncodeError,
    IsoMessage,
    Mti,
    VerdictReason,
    build_echo_request,
    classify,
    decode_message,
    default_dictionary,
    encode_message,
    next_stan,
    response_mti,
)

from .helpers import random_message

DICT = default_dictionary()
TABLE = DICT.compiled


def scan(kernel, data: bytes):
    return kernel.scan_payload(data, TABLE.kind, TABLE.length, TABLE.content)


ECHO_RESPONSE_WIRE = b"0810" b"8020000002000000" b"0400000000000000" b"000001" b"00" b"301"


def test_frozen_echo_response_encoding():
    msg = IsoMessage(Mti("0810"), {11: "000001", 39: "00", 70: "301"})
    assert encode_message(msg) == ECHO_RESPONSE_WIRE


def test_frozen_echo_response_decoding():
    msg, verdict = decode_message(ECHO_RESPONSE_WIRE)
    assert verdict.standard
    assert msg.mti == "0810"
    assert dict(msg.fields) == {11: "000001", 39: "00", 70: "301"}


def test_frozen_financial_request_encoding():
    msg = IsoMessage(
        Mti("0200"),
        {
            2: "4000001234567899",
            3: "000000",
            4: "000000012500",
            7: "0823174211",
            11: "000042",
            41: "TERM0001",
        },
    )
    wire = encode_message(msg)
    assert wire.startswith(b"0200" b"7220000000800000" b"164000001234567899")
    back, verdict = decode_message(wire)
    assert verdict.standard
    assert back == msg


def test_roundtrip_property():
    rng = random.Random(20260823)
    for _ in range(1200):
        msg = random_message(rng)
        wire = encode_message(msg)
        back, verdict = decode_message(wire)
        assert verdict.standard, f"{wire!r} -> {verdict}"
        assert back == msg
        assert encode_message(back) == wire


def test_decode_total_on_random_bytes(kernel):
    rng = random.Random(77)
    for _ in range(3000):
        size = rng.randint(0, 80)
        blob = bytes(rng.randrange(256) for _ in range(size))
        code, mti, numbers, values = scan(kernel, blob)
        assert 0 <= code <= 7
        assert len(numbers) == len(values)


def test_kernels_agree_on_corrupted_messages():
    import tests.conftest as cf

    if len(cf.KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    rng = random.Random(99)
    for _ in range(1500):
        wire = bytearray(encode_message(random_message(rng)))
        op = rng.randrange(4)
        if op == 0 and wire:
            wire = wire[: rng.randrange(len(wire))]
        elif op == 1:
            wire[rng.randrange(len(wire))] = rng.randrange(256)
        elif op == 2:
            wire += bytes(rng.randrange(256) for _ in range(rng.randint(1, 6)))
        results = [scan(k, bytes(wire)) for k in cf.KERNELS]
        assert results[0] == results[1], f"kernels disagree on {bytes(wire)!r}"


# One crafted payload per defect reason, first-defect-wins order included.


def classify_reason(data: bytes) -> VerdictReason:
    verdict = classify(data)
    assert not verdict.standard, f"{data!r} unexpectedly standard"
    return verdict.reason


def test_reason_bad_mti():
    assert classify_reason(b"08A0" + ECHO_RESPONSE_WIRE[4:]) is VerdictReason.BAD_MTI
    # defect at char 2 beats the truncation at char 3
    assert classify_reason(b"08x") is VerdictReason.BAD_MTI


def test_reason_truncated():
    assert classify_reason(b"") is VerdictReason.TRUNCATED
    assert classify_reason(b"081") is VerdictReason.TRUNCATED
    assert classify_reason(b"0810" b"80200000") is VerdictReason.TRUNCATED
    assert classify_reason(ECHO_RESPONSE_WIRE[:-1]) is VerdictReason.TRUNCATED
    # primary map announces a secondary that never arrives
    assert classify_reason(b"0810" b"8000000000000000") is VerdictReason.TRUNCATED


def test_reason_trailing_bytes():
    assert classify_reason(ECHO_RESPONSE_WIRE + b"|") is VerdictReason.TRAILING_BYTES
    assert classify_reason(ECHO_RESPONSE_WIRE + b"081") is VerdictReason.TRAILING_BYTES


def test_reason_combined():
    assert classify_reason(ECHO_RESPONSE_WIRE * 2) is VerdictReason.COMBINED
    assert classify_reason(ECHO_RESPONSE_WIRE + b"0200rest") is VerdictReason.COMBINED
    # a separator byte before the second message hides the splice
    tagged = ECHO_RESPONSE_WIRE + b"|" + ECHO_RESPONSE_WIRE
    assert classify_reason(tagged) is VerdictReason.TRAILING_BYTES


def test_reason_bad_length_indicator():
    # field 2 is LLVAR(19): prefix "9Z" breaks before any content
    wire = b"0200" b"4000000000000000" b"9Z"
    assert classify_reason(wire) is VerdictReason.BAD_LENGTH_INDICATOR
    # all-digit prefix declaring more than the 19-char cap
    wire = b"0200" b"4000000000000000" b"21" + b"1" * 21
    assert classify_reason(wire) is VerdictReason.BAD_LENGTH_INDICATOR


def test_reason_bad_content():
    # field 3 is FIXED(6) numeric
    wire = b"0200" b"2000000000000000" b"00A000"
    assert classify_reason(wire) is VerdictReason.BAD_CONTENT
    # lowercase hex in the message bitmap breaks byte-exact re-encoding,
    # and wins over everything after it
    wire = b"0200" b"f220000000800000" b"164000001234567899"
    assert classify_reason(wire) is VerdictReason.BAD_CONTENT
    assert classify_reason(b"0200" b"f2") is VerdictReason.BAD_CONTENT
    # bad character inside the available prefix beats truncation at the end
    wire = b"0200" b"2000000000000000" b"0!"
    assert classify_reason(wire) is VerdictReason.BAD_CONTENT


def test_reason_unknown_field():
    # field 5 has no entry in the default dictionary
    wire = b"0200" b"0800000000000000" b"123456"
    assert classify_reason(wire) is VerdictReason.UNKNOWN_FIELD


def test_partial_decode_keeps_clean_prefix():
    msg, verdict = decode_message(ECHO_RESPONSE_WIRE + b"|")
    assert verdict.reason is VerdictReason.TRAILING_BYTES
    assert msg is not None and dict(msg.fields) == {11: "000001", 39: "00", 70: "301"}
    msg, verdict = decode_message(b"junk")
    assert verdict.reason is VerdictReason.BAD_MTI
    assert msg is None


def test_verdict_str():
    assert str(classify(ECHO_RESPONSE_WIRE)) == "STANDARD"
    assert str(classify(b"x")) == "NON_STANDARD(BAD_MTI)"


def test_mti_validation():
    assert Mti("0800").is_request
    assert not Mti("0810").is_request
    for bad in ("080", "08000", "08a0", "08٠0", ""):
        with pytest.raises(CodecError):
            Mti(bad)


def test_response_mti():
    assert response_mti(Mti("0200")) == "0210"
    assert response_mti("0800") == "0810"
    with pytest.raises(CodecError):
        response_mti(Mti("0810"))
    with pytest.raises(CodecError):
        response_mti("0x00")


def test_encode_rejects_unknown_field():
    with pytest.raises(EncodeError):
        encode_message(IsoMessage(Mti("0200"), {5: "123456"}))


def test_encode_rejects_wrong_fixed_length():
    with pytest.raises(EncodeError):
        encode_message(IsoMessage(Mti("0200"), {3: "12345"}))


def test_encode_rejects_overlong_llvar():
    with pytest.raises(EncodeError):
        encode_message(IsoMessage(Mti("0200"), {2: "1" * 20}))


def test_encode_rejects_content_violation():
    with pytest.raises(EncodeError):
        encode_message(IsoMessage(Mti("0200"), {3: "00A000"}))
    with pytest.raises(EncodeError):
        encode_message(IsoMessage(Mti("0200"), {41: "café +++"}))


def test_empty_llvar_value_roundtrips():
    msg = IsoMessage(Mti("0200"), {2: "", 11: "000007"})
    wire = encode_message(msg)
    assert b"00" in wire
    back, verdict = decode_message(wire)
    assert verdict.standard and back == msg


def test_build_echo_request():
    msg = build_echo_request("000123")
    assert msg.mti == "0800"
    assert dict(msg.fields) == {11: "000123", 70: "301"}
    for bad in ("12345", "1234567", "12345a", "12345٠"):
        with pytest.raises(EncodeError):
            build_echo_request(bad)


def test_next_stan_is_six_digits_and_fresh():
    a, b = next_stan(), next_stan()
    assert len(a) == len(b) == 6 and a.isdigit() and b.isdigit()
    assert a != b

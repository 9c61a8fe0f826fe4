"""Bitmap transcription against an independent per-bit oracle."""

import random

import pytest

from isoha.codec import BitmapError, decode_bitmap, encode_bitmap

from .helpers import oracle_bitmap_fields, oracle_bitmap_hex, random_field_set


@pytest.mark.parametrize("n", range(1, 129))
def test_single_bit_decode_matches_oracle(kernel, n):
    numbers = [n] if n <= 64 else [1, n]
    hex_chars = oracle_bitmap_hex(numbers)
    assert kernel.bitmap_to_fields(hex_chars) == numbers
    assert oracle_bitmap_fields(hex_chars) == numbers


@pytest.mark.parametrize("n", range(2, 129))
def test_single_field_encode_matches_oracle(kernel, n):
    expected = [n] if n <= 64 else [1, n]
    assert kernel.fields_to_bitmap([n]) == oracle_bitmap_hex(expected)


def test_random_sets_match_oracle(kernel):
    rng = random.Random(8583)
    for _ in range(1200):
        numbers = random_field_set(rng)
        expected = sorted({1, *numbers}) if numbers[-1] > 64 else numbers
        hex_chars = kernel.fields_to_bitmap(numbers)
        assert hex_chars == oracle_bitmap_hex(expected)
        assert kernel.bitmap_to_fields(hex_chars) == expected
        assert oracle_bitmap_fields(hex_chars) == expected


def test_decode_known_values(kernel):
    assert kernel.bitmap_to_fields("8000000000000000") == [1]
    assert kernel.bitmap_to_fields("0000000002000000") == [39]
    assert kernel.bitmap_to_fields("7220000002800000") == [2, 3, 4, 7, 11, 39, 41]
    assert kernel.bitmap_to_fields("80200000000000000400000000000000") == [1, 11, 70]


def test_decode_is_case_insensitive(kernel):
    upper = "7220000002800000"
    assert kernel.bitmap_to_fields(upper.lower()) == kernel.bitmap_to_fields(upper)


def test_encode_known_values(kernel):
    assert kernel.fields_to_bitmap([2, 3, 4, 7, 11, 39, 41]) == "7220000002800000"
    assert kernel.fields_to_bitmap([39]) == "0000000002000000"
    assert kernel.fields_to_bitmap([11, 70]) == "80200000000000000400000000000000"


def test_encode_output_is_uppercase(kernel):
    out = kernel.fields_to_bitmap([2, 44, 63])
    assert out == out.upper()


@pytest.mark.parametrize("bad", ["", "80", "8" * 15, "8" * 17, "8" * 31, "8" * 33])
def test_decode_rejects_bad_lengths(kernel, bad):
    with pytest.raises(ValueError):
        kernel.bitmap_to_fields(bad)


@pytest.mark.parametrize("bad", ["822000000280000G", "8220h00002800000", "82200000028000éé"])
def test_decode_rejects_non_hex(kernel, bad):
    with pytest.raises(ValueError):
        kernel.bitmap_to_fields(bad)


def test_decode_rejects_secondary_without_indicator(kernel):
    # 32 chars but bit 1 clear: the map denies the secondary it carries
    with pytest.raises(ValueError):
        kernel.bitmap_to_fields("00200000000000000400000000000000")


@pytest.mark.parametrize("bad", [0, 1, 129, -3, 500])
def test_encode_rejects_out_of_range(kernel, bad):
    with pytest.raises(ValueError):
        kernel.fields_to_bitmap([11, bad])


def test_public_wrappers_raise_bitmap_error():
    with pytest.raises(BitmapError):
        decode_bitmap("ZZ")
    with pytest.raises(BitmapError):
        encode_bitmap([1])
    assert decode_bitmap("8000000000000000") == [1]
    assert encode_bitmap({70, 11}) == "80200000000000000400000000000000"


def test_encode_accepts_any_iterable_order():
    assert encode_bitmap((41, 2, 39, 2)) == encode_bitmap([2, 39, 41])

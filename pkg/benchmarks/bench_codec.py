#!/usr/bin/env python3
"""Compare the compiled and pure-Python codec kernels on the hot paths.

Builds one corpus of framed-payload bytes and one of bitmap field sets,
checks that every built kernel agrees on them, then times full-payload
scanning and bitmap transcription per kernel.  Prints throughput and the
speedup of the compiled kernel over the fallback.

Run from a checkout:  python3 benchmarks/bench_codec.py [--ops 200000]
"""

import argparse
import random
import time

from isoha import codec
from isoha.codec import _pure
from isoha.loadgen import LoadProfile, generate_wires

try:
    from isoha.codec import _speedups
except ImportError:
    _speedups = None

KERNELS = [k for k in (_pure, _speedups) if k is not None]


def build_payload_corpus(count: int, seed: int) -> list[bytes]:
    """Financial and echo payloads in a 3:1 mix."""
    financial = [
        wire for _, wire in generate_wires(LoadProfile(tps=count, interval_s=1, seed=seed))
    ]
    out = []
    for i, wire in enumerate(financial):
        out.append(wire)
        if i % 3 == 0:
            out.append(codec.encode_message(codec.build_echo_request(f"{i % 999999 + 1:06d}")))
    return out


def build_bitmap_corpus(count: int, seed: int) -> tuple[list[list[int]], list[str]]:
    rng = random.Random(seed)
    sets, hexes = [], []
    for _ in range(count):
        numbers = sorted(rng.sample(range(2, 129), rng.randint(1, 20)))
        sets.append(numbers)
        hexes.append(_pure.fields_to_bitmap(numbers))
    return sets, hexes


def check_parity(table, payloads, sets, hexes) -> None:
    if len(KERNELS) < 2:
        return
    a, b = KERNELS
    for wire in payloads:
        assert a.scan_payload(wire, table.kind, table.length, table.content) == b.scan_payload(
            wire, table.kind, table.length, table.content
        ), f"kernels disagree on {wire!r}"
    for numbers, hex_chars in zip(sets, hexes):
        assert a.fields_to_bitmap(numbers) == b.fields_to_bitmap(numbers)
        assert a.bitmap_to_fields(hex_chars) == b.bitmap_to_fields(hex_chars)


def best_of(repeats: int, fn) -> float:
    return min(fn() for _ in range(repeats))


def time_batch(work, batch: list, passes: int) -> float:
    started = time.perf_counter()
    for _ in range(passes):
        for item in batch:
            work(item)
    return time.perf_counter() - started


def run(ops: int, seed: int, repeats: int) -> None:
    corpus_size = 2000
    passes = max(1, ops // corpus_size)
    payloads = build_payload_corpus(corpus_size, seed)
    sets, hexes = build_bitmap_corpus(corpus_size, seed + 1)
    table = codec.default_dictionary().compiled
    check_parity(table, payloads, sets, hexes)

    print(f"codec kernel benchmark: {len(payloads)} payloads, {corpus_size} bitmaps, "
          f"{passes} passes, best of {repeats}")
    print(f"built kernels: {', '.join(k.BACKEND for k in KERNELS)}")
    print(f"package selected: {codec.kernel_backend()}")
    print()

    jobs = {
        "scan_payload": lambda k: (
            payloads,
            lambda wire: k.scan_payload(wire, table.kind, table.length, table.content),
        ),
        "bitmap_to_fields": lambda k: (hexes, k.bitmap_to_fields),
        "fields_to_bitmap": lambda k: (sets, k.fields_to_bitmap),
    }
    for name, make in jobs.items():
        rates = {}
        for kernel in KERNELS:
            batch, work = make(kernel)
            elapsed = best_of(repeats, lambda: time_batch(work, batch, passes))
            rates[kernel.BACKEND] = len(batch) * passes / elapsed
        for backend, rate in rates.items():
            note = ""
            if backend != "python" and rates.get("python"):
                note = f"  {rate / rates['python']:.1f}x over python"
            print(f"{name:<18} {backend:<7} {rate:>12,.0f} ops/s{note}")
        print()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ops", type=int, default=200_000, help="operations per measurement")
    parser.add_argument("--seed", type=int, default=8583, help="corpus seed")
    parser.add_argument("--repeats", type=int, default=3, help="timed repeats, best kept")
    args = parser.parse_args()
    run(args.ops, args.seed, args.repeats)


if __name__ == "__main__":
    main()

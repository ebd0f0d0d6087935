"""Undetected-error counts per error weight for the two CRC-protected words.

    python3 scripts/hd_sweep.py --random 1000000
"""

import argparse
import time

from horuslink import hamming, wire_codec as wc


def sample_reading():
    return wc.GpsPositionObject(1230, wc.ID_GPS_BASE, wc.STATUS_VALID_FIX,
                                47.5, 8.72, 410.5, 1.5, 90.0, -0.25, 0.0, 0.5, -9.75)


def report(label, rows, elapsed):
    print(f"{label}  ({elapsed:.1f} s)")
    print(f"  {'weight':>6} {'patterns':>12} {'undetected':>10}  mode")
    for r in rows:
        mode = "exhaustive" if r.exhaustive else "random"
        print(f"  {r.weight:>6} {r.patterns:>12} {r.undetected:>10}  {mode}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--random", type=int, default=1_000_000, help="random patterns per weight")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    obj = sample_reading()
    gps = wc.encode_gps(obj)
    reported = wc.encode_reported(wc.as_reported(obj))
    jobs = [
        ("gps frame, 480 bits, 0xF8C9140A", gps, hamming.frame_residual, 3, range(4, 8)),
        ("reported frame, 512 bits, 0xF8C9140A", reported, hamming.frame_residual, 3, range(4, 8)),
        ("position word, 160 bits, 0x9D7F97D6", reported[8:28], hamming.position_residual, 4,
         range(5, 9)),
    ]
    for label, word, residual, exhaustive, random_weights in jobs:
        t = time.perf_counter()
        rows = hamming.sweep(word, residual, exhaustive, random_weights, args.random, args.seed)
        report(label, rows, time.perf_counter() - t)


if __name__ == "__main__":
    main()

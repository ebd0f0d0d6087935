"""Error-pattern sweeps for CRC-protected words.

A CRC check over a fixed-length word is affine in the bits of the word, so
the residual ``crc(data') ^ stored'`` of a corrupted word is the XOR of the
residuals of its single-bit corruptions. A pattern is undetected iff that XOR
is zero. The sweeps below therefore work on the per-bit residual vector
("syndromes") and never re-run the CRC per pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np

from .crc import POLY_FRAME, POLY_POSITION, crc32_koopman

Residual = Callable[[bytes], int]


def flip_bit(word: bytes, bit: int) -> bytes:
    """Flip bit ``bit`` (MSB-first within each byte)."""
    out = bytearray(word)
    out[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(out)


def flip_bits(word: bytes, bits) -> bytes:
    out = bytearray(word)
    for bit in bits:
        out[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(out)


def trailing_crc_residual(polynomial: int) -> Residual:
    """Residual for words laid out as data || crc (crc little-endian)."""

    def residual(word: bytes) -> int:
        stored = int.from_bytes(word[-4:], "little")
        return crc32_koopman(polynomial, word[:-4]) ^ stored

    return residual


frame_residual = trailing_crc_residual(POLY_FRAME)
position_residual = trailing_crc_residual(POLY_POSITION)


def syndromes(word: bytes, residual: Residual) -> np.ndarray:
    base = residual(word)
    s = [residual(flip_bit(word, i)) ^ base for i in range(len(word) * 8)]
    return np.array(s, dtype=np.uint32)


def _count_matches(left: np.ndarray, right_sorted: np.ndarray) -> int:
    if left.size == 0 or right_sorted.size == 0:
        return 0
    hi = np.searchsorted(right_sorted, left, side="right")
    lo = np.searchsorted(right_sorted, left, side="left")
    return int((hi - lo).sum())


def _pair_xors(s: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(len(s), 1)
    return s[i] ^ s[j]


def exhaustive_undetected(s: np.ndarray, weight: int) -> int:
    """Number of weight-``weight`` patterns with zero residual, by full enumeration.

    Weights 1..4 are supported. Patterns are enumerated as index tuples
    i < j < (rest): for every j, the singletons i < j are matched against
    all (weight-2)-subsets drawn from indices > j.
    """
    n = len(s)
    if weight == 1:
        return int((s == 0).sum())
    if weight not in (2, 3, 4):
        raise ValueError("exhaustive sweep supports weights 1..4")
    total = 0
    for j in range(1, n):
        left = s[:j] ^ s[j]
        if weight == 2:
            total += int((left == 0).sum())
            continue
        tail = s[j + 1:]
        right = tail if weight == 3 else _pair_xors(tail)
        total += _count_matches(left, np.sort(right))
    return total


def random_patterns(n_bits: int, weight: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct-position index sets of size ``weight``, uniform over subsets."""
    out = np.empty((count, weight), dtype=np.int64)
    filled = 0
    while filled < count:
        need = count - filled
        draw = np.sort(rng.integers(0, n_bits, size=(need, weight)), axis=1)
        ok = np.all(np.diff(draw, axis=1) != 0, axis=1)
        good = draw[ok]
        out[filled:filled + len(good)] = good
        filled += len(good)
    return out


def random_undetected(s: np.ndarray, weight: int, count: int, rng: np.random.Generator,
                      chunk: int = 200_000) -> int:
    bad = 0
    done = 0
    while done < count:
        m = min(chunk, count - done)
        idx = random_patterns(len(s), weight, m, rng)
        bad += int((np.bitwise_xor.reduce(s[idx], axis=1) == 0).sum())
        done += m
    return bad


@dataclass
class SweepRow:
    weight: int
    patterns: int
    undetected: int
    exhaustive: bool


def sweep(word: bytes, residual: Residual, exhaustive_max: int, random_weights: range,
          random_count: int, seed: int = 0) -> list[SweepRow]:
    s = syndromes(word, residual)
    rows = [
        SweepRow(w, comb(len(s), w), exhaustive_undetected(s, w), True)
        for w in range(1, exhaustive_max + 1)
    ]
    rng = np.random.default_rng(seed)
    for w in random_weights:
        rows.append(SweepRow(w, random_count, random_undetected(s, w, random_count, rng), False))
    return rows

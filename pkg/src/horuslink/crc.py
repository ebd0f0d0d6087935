"""32-bit CRCs with polynomials given in Koopman (implicit +1) notation.

Convention used everywhere in this package: MSB-first, initial remainder
0xFFFFFFFF, no input/output reflection, no final XOR.
"""

from __future__ import annotations

from functools import lru_cache

# framing CRC, HD=8 up to the 448-bit GPS payload
POLY_FRAME = 0xF8C9140A
# position CRC, HD=9 over latitude/longitude
POLY_POSITION = 0x9D7F97D6

CRC_INIT = 0xFFFFFFFF
_MASK = 0xFFFFFFFF


def koopman_to_normal(polynomial: int) -> int:
    """Convert implicit-plus-one notation to the usual normal form (x^32 implied)."""
    if not 0 < polynomial <= _MASK:
        raise ValueError(f"not a 32-bit polynomial: {polynomial:#x}")
    return ((polynomial << 1) | 1) & _MASK


@lru_cache(maxsize=None)
def _table(polynomial: int) -> tuple[int, ...]:
    poly = koopman_to_normal(polynomial)
    table = []
    for byte in range(256):
        reg = byte << 24
        for _ in range(8):
            reg = ((reg << 1) ^ poly) if reg & 0x80000000 else (reg << 1)
            reg &= _MASK
        table.append(reg)
    return tuple(table)


def crc32_koopman(polynomial: int, data: bytes, init: int = CRC_INIT) -> int:
    """Table-driven CRC-32 of ``data`` under a Koopman-notation polynomial."""
    table = _table(polynomial)
    crc = init
    for b in data:
        crc = ((crc << 8) & _MASK) ^ table[(crc >> 24) ^ b]
    return crc

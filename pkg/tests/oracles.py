"""Reference implementations kept independent of the package code paths."""

import numpy as np


def crc_bitserial(koopman_poly: int, data: bytes, init: int = 0xFFFFFFFF) -> int:
    """Long division, one message bit at a time, MSB first."""
    poly = ((koopman_poly << 1) | 1) & 0xFFFFFFFF
    reg = init
    for byte in data:
        for k in range(7, -1, -1):
            feedback = ((reg >> 31) & 1) ^ ((byte >> k) & 1)
            reg = (reg << 1) & 0xFFFFFFFF
            if feedback:
                reg ^= poly
    return reg


def crc_bitserial_batch(koopman_poly: int, rows: np.ndarray, init: int = 0xFFFFFFFF) -> np.ndarray:
    """Same division for many equal-length messages at once (rows: uint8, shape (m, L))."""
    poly = np.uint64(((koopman_poly << 1) | 1) & 0xFFFFFFFF)
    mask = np.uint64(0xFFFFFFFF)
    reg = np.full(rows.shape[0], init, dtype=np.uint64)
    bits = np.unpackbits(rows, axis=1)  # MSB first
    for col in range(bits.shape[1]):
        feedback = ((reg >> np.uint64(31)) & np.uint64(1)) ^ bits[:, col].astype(np.uint64)
        reg = (reg << np.uint64(1)) & mask
        reg ^= feedback * poly
    return reg.astype(np.uint32)


def median_sorted(values):
    v = sorted(values)
    n = len(v)
    if n % 2:
        return v[n // 2]
    return (v[n // 2 - 1] + v[n // 2]) / 2.0

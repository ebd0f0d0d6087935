"""Seedable serial links with fault injection.

Random draws per ``transmit`` call, in this order, from a PCG64 generator
seeded with ``FaultModel.seed``:

1. one uniform for the drop decision (``u < drop_probability`` drops),
2. one uniform for the duplicate decision (always drawn, even after a drop),
3. if not dropped and ``bit_flip_probability > 0``: for each delivered copy,
   ``8 * len(frame)`` uniforms; bit ``i`` flips when its uniform is below the
   probability. Bit ``i`` is mask ``0x80 >> (i % 8)`` of byte ``i // 8``.

Faults are then applied as drop -> duplicate -> flip -> freeze -> babble.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class NothingToFreeze(RuntimeError):
    pass


@dataclass(frozen=True)
class Babble:
    """Unsolicited frame injected every ``period`` cycles within [start, end)."""

    frame: bytes
    period: int = 1
    start: int = 0
    end: Optional[int] = None

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("babble period must be >= 1")
        if not self.frame:
            raise ValueError("babble frame must be non-empty")

    def fires(self, cycle: int) -> bool:
        if cycle < self.start or (self.end is not None and cycle >= self.end):
            return False
        return (cycle - self.start) % self.period == 0


@dataclass(frozen=True)
class FaultModel:
    bit_flip_probability: float = 0.0
    drop_probability: float = 0.0
    duplicate_probability: float = 0.0
    freeze: bool = False
    babble: Optional[Babble] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("bit_flip_probability", "drop_probability", "duplicate_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit value")


@dataclass(frozen=True)
class Delivery:
    """One log line. ``disposition`` is delivered, dropped, duplicated or idle."""

    cycle: int
    channel: str
    direction: str
    nbytes: int
    disposition: str
    flipped: tuple = ()  # per delivered copy, tuple of flipped bit positions
    frozen: bool = False
    babble: int = 0

    @property
    def flipped_bits(self) -> int:
        return sum(len(f) for f in self.flipped)

    @property
    def faults(self) -> list[str]:
        out = []
        if self.disposition in ("dropped", "duplicated"):
            out.append(self.disposition)
        if self.flipped_bits:
            out.append("bit_flip")
        if self.frozen:
            out.append("freeze")
        if self.babble:
            out.append("babble")
        return out

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "channel": self.channel,
            "direction": self.direction,
            "nbytes": self.nbytes,
            "disposition": self.disposition,
            "flipped_bits": self.flipped_bits,
            "frozen": self.frozen,
            "babble": self.babble,
        }


def apply_flips(frame: bytes, positions) -> bytes:
    out = bytearray(frame)
    for i in positions:
        out[i >> 3] ^= 0x80 >> (i & 7)
    return bytes(out)


class SerialChannel:
    def __init__(self, name: str, fault: Optional[FaultModel] = None, direction: str = "tx"):
        self.name = name
        self.direction = direction
        self.fault = fault or FaultModel()
        self.rng = np.random.Generator(np.random.PCG64(self.fault.seed))
        self.log: list[Delivery] = []
        self.freeze_from: Optional[int] = None
        self._last: Optional[bytes] = None
        self._frozen_frame: Optional[bytes] = None

    def freeze_channel(self, from_cycle: int) -> None:
        if self._last is None:
            raise NothingToFreeze(f"channel {self.name!r} has delivered nothing yet")
        self.freeze_from = from_cycle
        self._frozen_frame = None

    def _is_frozen(self, cycle: int) -> bool:
        return self.freeze_from is not None and cycle >= self.freeze_from

    def _babble(self, cycle: int) -> list[bytes]:
        b = self.fault.babble
        return [bytes(b.frame)] if b is not None and b.fires(cycle) else []

    def transmit(self, frame: bytes, cycle: int) -> list[bytes]:
        """Push one frame through the link; returns the frames that come out."""
        if not frame:
            raise ValueError("frame must be non-empty")
        frame = bytes(frame)
        fm = self.fault
        if fm.freeze and self.freeze_from is None and self._last is not None:
            self.freeze_channel(cycle)

        u_drop, u_dup = self.rng.random(2)
        dropped = u_drop < fm.drop_probability
        copies = 0 if dropped else (2 if u_dup < fm.duplicate_probability else 1)

        out: list[bytes] = []
        flipped = []
        nbits = 8 * len(frame)
        for _ in range(copies):
            if fm.bit_flip_probability > 0.0:
                pos = np.flatnonzero(self.rng.random(nbits) < fm.bit_flip_probability)
                positions = tuple(int(p) for p in pos)
            else:
                positions = ()
            flipped.append(positions)
            out.append(apply_flips(frame, positions))

        if self._is_frozen(cycle) and self._frozen_frame is None:
            self._frozen_frame = self._last
        frozen = self._is_frozen(cycle) and copies > 0
        if frozen:
            out = [self._frozen_frame] * copies
        elif out:
            self._last = out[-1]

        babble = self._babble(cycle)
        disposition = "dropped" if copies == 0 else ("duplicated" if copies == 2 else "delivered")
        self.log.append(Delivery(cycle, self.name, self.direction, len(frame), disposition,
                                 tuple(flipped), frozen, len(babble)))
        return out + babble

    def idle(self, cycle: int) -> list[bytes]:
        """A cycle with no legitimate traffic; only babble can come out."""
        babble = self._babble(cycle)
        if babble:
            self.log.append(Delivery(cycle, self.name, self.direction, 0, "idle",
                                     babble=len(babble)))
        return babble

    def counts(self) -> dict:
        c = {"delivered": 0, "dropped": 0, "duplicated": 0, "idle": 0}
        for d in self.log:
            c[d.disposition] += 1
        c["transmitted"] = c["delivered"] + c["dropped"] + c["duplicated"]
        c["frames_out"] = c["delivered"] + 2 * c["duplicated"]
        c["flipped_bits"] = sum(d.flipped_bits for d in self.log)
        c["babble"] = sum(d.babble for d in self.log)
        return c

"""Active dual-ported RAM emulation.

Each region of the memory map is backed by three equal buffers that cycle
through the write, read and scrub roles. ``rotate`` moves write->read,
scrub->write, read->scrub and scrubs the new scrub buffer before returning,
so a reader can only ever see data written since the previous rotation.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .nodes import Node

SCRUB_VALUE = 0x00
_U32 = 0xFFFFFFFF


class DprError(Exception):
    pass


class UnknownRegion(DprError, KeyError):
    def __str__(self):
        return f"unknown region {self.args[0]!r}"


class WrongLength(DprError, ValueError):
    pass


class RoleViolation(DprError):
    pass


class Role(str, enum.Enum):
    WRITE = "write"
    READ = "read"
    SCRUB = "scrub"


@dataclass(frozen=True)
class Region:
    name: str
    offset: int
    length: int
    producer: Node
    consumer: Node
    reserved: bool = False

    @property
    def end(self) -> int:
        return self.offset + self.length


class MemoryMap:
    """Ordered, non-overlapping regions fixed at construction."""

    def __init__(self, regions: Iterable[Region]):
        self.regions = tuple(sorted(regions, key=lambda r: r.offset))
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate region names in {names}")
        for r in self.regions:
            if r.length <= 0 or r.offset < 0:
                raise ValueError(f"region {r.name!r} has invalid offset/length")
        for a, b in zip(self.regions, self.regions[1:]):
            if a.end > b.offset:
                raise ValueError(f"regions {a.name!r} and {b.name!r} overlap")
        self._by_name = {r.name: r for r in self.regions}

    @classmethod
    def default(cls, horus_length: int = 244) -> "MemoryMap":
        # 0x0000 / 0x0100 / 0x0180 for the 3-receiver profile; shifted up for larger ones
        hold = max(0x100, -(-horus_length // 0x80) * 0x80)
        return cls([
            Region("horus_profile", 0x0000, horus_length, Node.HORUS, Node.FLIGHT_CONTROLLER),
            Region("active_hold", hold, 64, Node.ACTIVE_LOAD, Node.FLIGHT_CONTROLLER,
                   reserved=True),
            Region("downlink", hold + 0x80, 64, Node.FLIGHT_CONTROLLER, Node.ACTIVE_LOAD),
        ])

    def __getitem__(self, name: str) -> Region:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownRegion(name) from None

    def __contains__(self, name) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self.regions)

    def __len__(self):
        return len(self.regions)

    def index_of(self, name: str) -> int:
        return self.regions.index(self[name])


class TripleBuffer:
    """Three buffers with a bijective write/read/scrub role assignment.

    The initial assignment is read=0, scrub=1, write=2.
    """

    def __init__(self, length: int, scrub_value: int = SCRUB_VALUE):
        self.length = length
        self.scrub_value = scrub_value
        self.buffers = [bytearray([scrub_value]) * length for _ in range(3)]
        self.roles = {Role.READ: 0, Role.SCRUB: 1, Role.WRITE: 2}

    def role_of(self, index: int) -> Role:
        for role, i in self.roles.items():
            if i == index:
                return role
        raise IndexError(index)

    def write(self, payload: bytes) -> None:
        if len(payload) != self.length:
            raise WrongLength(f"expected {self.length} bytes, got {len(payload)}")
        self.buffers[self.roles[Role.WRITE]][:] = payload

    def read(self) -> bytes:
        return bytes(self.buffers[self.roles[Role.READ]])

    def scrub(self, index: int) -> None:
        role = self.role_of(index)
        if role is not Role.SCRUB:
            raise RoleViolation(f"buffer {index} is in the {role.value} role")
        buf = self.buffers[index]
        buf[:] = bytes([self.scrub_value]) * self.length

    def rotate(self) -> dict:
        r = self.roles
        self.roles = {Role.READ: r[Role.WRITE], Role.WRITE: r[Role.SCRUB], Role.SCRUB: r[Role.READ]}
        self.scrub(self.roles[Role.SCRUB])
        return dict(self.roles)

    def is_scrubbed(self, index: int) -> bool:
        return self.buffers[index].count(self.scrub_value) == self.length


class Freshness(str, enum.Enum):
    FRESH = "fresh"
    STALE = "stale"
    NEVER_WRITTEN = "never_written"
    # scrubbed buffer read after data has been seen: no new frame this cycle
    EMPTY = "empty"


@dataclass(frozen=True)
class FreshnessReport:
    status: Freshness
    timestamp: Optional[int]
    unchanged: int
    gap: Optional[int] = None  # timestamp increment when larger than expected


@dataclass
class FreshnessTracker:
    expected_increment: int = 10
    stale_threshold: int = 3
    last_timestamp: Optional[int] = None
    unchanged: int = 0

    def observe(self, timestamp: Optional[int]) -> FreshnessReport:
        """Record one read. ``None`` means the buffer held only the scrub constant."""
        if timestamp is None:
            if self.last_timestamp is None:
                return FreshnessReport(Freshness.NEVER_WRITTEN, None, 0)
            self.unchanged += 1
            status = Freshness.STALE if self.stale else Freshness.EMPTY
            return FreshnessReport(status, None, self.unchanged)
        gap = None
        if self.last_timestamp is not None and timestamp == self.last_timestamp:
            self.unchanged += 1
        else:
            if self.last_timestamp is not None:
                delta = (timestamp - self.last_timestamp) & _U32
                if delta > self.expected_increment:
                    gap = delta
            self.unchanged = 0
        self.last_timestamp = timestamp
        status = Freshness.STALE if self.stale else Freshness.FRESH
        return FreshnessReport(status, timestamp, self.unchanged, gap)

    @property
    def stale(self) -> bool:
        return self.unchanged >= self.stale_threshold


@dataclass(frozen=True)
class RegionRead:
    region: str
    data: bytes
    freshness: FreshnessReport

    @property
    def has_data(self) -> bool:
        return self.freshness.status not in (Freshness.NEVER_WRITTEN, Freshness.EMPTY)


@dataclass
class _Slot:
    region: Region
    buffer: TripleBuffer
    tracker: FreshnessTracker
    lock: threading.Lock = field(default_factory=threading.Lock)


class ActiveDpr:
    """Region store; each region tolerates one producer and one consumer."""

    def __init__(self, memory_map: Optional[MemoryMap] = None, scrub_value: int = SCRUB_VALUE,
                 expected_increment: int = 10, stale_threshold: int = 3):
        self.memory_map = memory_map or MemoryMap.default()
        self.scrub_value = scrub_value
        self._slots = {
            r.name: _Slot(r, TripleBuffer(r.length, scrub_value),
                          FreshnessTracker(expected_increment, stale_threshold))
            for r in self.memory_map
        }

    def _slot(self, name: str) -> _Slot:
        try:
            return self._slots[name]
        except KeyError:
            raise UnknownRegion(name) from None

    def write(self, region: str, payload: bytes) -> int:
        """Store ``payload`` whole into the write buffer; returns bytes written."""
        slot = self._slot(region)
        with slot.lock:
            slot.buffer.write(payload)
        return len(payload)

    def rotate(self, region: str) -> dict:
        slot = self._slot(region)
        with slot.lock:
            return slot.buffer.rotate()

    def read(self, region: str) -> RegionRead:
        slot = self._slot(region)
        with slot.lock:
            data = slot.buffer.read()
        if data.count(self.scrub_value) == len(data):
            report = slot.tracker.observe(None)
        else:
            report = slot.tracker.observe(int.from_bytes(data[:4], "little"))
        return RegionRead(region, data, report)

    def scrub(self, region: str, index: int) -> None:
        slot = self._slot(region)
        with slot.lock:
            slot.buffer.scrub(index)

    def roles(self, region: str) -> dict:
        return dict(self._slot(region).buffer.roles)

    def buffer(self, region: str, role: Role) -> bytes:
        """Inspect a buffer without touching freshness state (debug/dump)."""
        buf = self._slot(region).buffer
        return bytes(buf.buffers[buf.roles[role]])

    def triple_buffer(self, region: str) -> TripleBuffer:
        return self._slot(region).buffer

    def producer_port(self, region: str) -> "ProducerPort":
        self._slot(region)
        return ProducerPort(self, region)


class ProducerPort:
    """Write-only handle on one region: a producer can write and rotate, never read."""

    __slots__ = ("_dpr", "region")

    def __init__(self, dpr: ActiveDpr, region: str):
        self._dpr = dpr
        self.region = region

    def write(self, payload: bytes) -> int:
        return self._dpr.write(self.region, payload)

    def rotate(self) -> dict:
        return self._dpr.rotate(self.region)

"""Flight-controller communication hub.

Every hub cycle reads each region consumed by the flight controller exactly
once, forwards region contents to the base station untouched, and applies at
most one downlink frame. Transfers are gated by the criticality matrix.

Downlink wire format (little-endian)::

    0 source function id u32 | 4 destination region index u32
    8 payload (region length) | 8+len framing crc u32 (POLY_FRAME)
"""

from __future__ import annotations

import enum
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .channel_sim import SerialChannel
from .crc import POLY_FRAME, crc32_koopman
from .dpr_core import ActiveDpr, Freshness, RegionRead
from .nodes import Node
from .wire_codec import (
    POSITION_SLICE,
    REPORTED_FRAME_SIZE,
    check_reported,
    seal,
)

_HDR = struct.Struct("<II")
DOWNLINK_OVERHEAD = _HDR.size + 4


class CriticalityLevel(enum.IntEnum):
    FORBIDDEN = 0
    NON_CRITICAL = 1
    SAFETY_RELEVANT = 2


class Denied(Exception):
    def __init__(self, source: Node, destination: Node):
        super().__init__(f"{source.name} may not write to {destination.name}")
        self.source = source
        self.destination = destination


# rows: source, columns: destination; every cell not listed is forbidden
_TABLE = {
    (Node.BASE_STATION, Node.FLIGHT_CONTROLLER): CriticalityLevel.SAFETY_RELEVANT,
    (Node.BASE_STATION, Node.ACTIVE_LOAD): CriticalityLevel.NON_CRITICAL,
    (Node.HORUS, Node.BASE_STATION): CriticalityLevel.SAFETY_RELEVANT,
    (Node.HORUS, Node.FLIGHT_CONTROLLER): CriticalityLevel.SAFETY_RELEVANT,
    (Node.FLIGHT_CONTROLLER, Node.BASE_STATION): CriticalityLevel.SAFETY_RELEVANT,
    (Node.FLIGHT_CONTROLLER, Node.ACTIVE_LOAD): CriticalityLevel.NON_CRITICAL,
    (Node.ACTIVE_LOAD, Node.BASE_STATION): CriticalityLevel.NON_CRITICAL,
    (Node.ACTIVE_LOAD, Node.FLIGHT_CONTROLLER): CriticalityLevel.NON_CRITICAL,
}


@dataclass(frozen=True)
class PermissionMatrix:
    cells: dict = field(default_factory=lambda: dict(_TABLE))

    def level(self, source: Node, destination: Node) -> CriticalityLevel:
        return self.cells.get((Node(source), Node(destination)), CriticalityLevel.FORBIDDEN)

    def pairs(self):
        return [(s, d) for s in Node for d in Node]


def check_permission(matrix: PermissionMatrix, source: Node, destination: Node) -> CriticalityLevel:
    level = matrix.level(source, destination)
    if level is CriticalityLevel.FORBIDDEN:
        raise Denied(Node(source), Node(destination))
    return level


@dataclass(frozen=True)
class UplinkFrame:
    source: Node
    region: str
    payload: bytes
    cycle: int
    level: CriticalityLevel = CriticalityLevel.SAFETY_RELEVANT


# --- downlink framing -----------------------------------------------------

class MalformedDownlink(ValueError):
    pass


@dataclass(frozen=True)
class Downlink:
    source: Node
    region_index: int
    payload: bytes


def encode_downlink(source: Node, region_index: int, payload: bytes) -> bytes:
    return seal(_HDR.pack(int(source), region_index) + bytes(payload))


def decode_downlink(frame: bytes) -> Downlink:
    if len(frame) <= DOWNLINK_OVERHEAD:
        raise MalformedDownlink(f"downlink frame too short ({len(frame)} bytes)")
    stored = int.from_bytes(frame[-4:], "little")
    if crc32_koopman(POLY_FRAME, frame[:-4]) != stored:
        raise MalformedDownlink("downlink CRC mismatch")
    source, index = _HDR.unpack_from(frame)
    try:
        node = Node(source)
    except ValueError:
        raise MalformedDownlink(f"unknown source id {source}") from None
    return Downlink(node, index, bytes(frame[_HDR.size:-4]))


# --- position for the control loop ----------------------------------------

class PositionRefused(Exception):
    pass


class StalePosition(PositionRefused):
    pass


class PositionCrcMismatch(PositionRefused):
    pass


class NeverWritten(PositionRefused):
    pass


def read_position_for_control(snapshot: RegionRead) -> tuple[float, float]:
    """Latitude/longitude from a Reported-Position region read, or refuse.

    Only the position CRC and freshness are checked; the framing CRC is the
    base station's business.
    """
    status = snapshot.freshness.status
    if status is Freshness.NEVER_WRITTEN:
        raise NeverWritten(snapshot.region)
    if status is not Freshness.FRESH:
        raise StalePosition(f"{snapshot.region}: {status.value}")
    frame = snapshot.data[:REPORTED_FRAME_SIZE]
    if len(frame) != REPORTED_FRAME_SIZE:
        raise PositionRefused(f"{snapshot.region}: {len(snapshot.data)} bytes received")
    _, pos_ok = check_reported(frame)
    if not pos_ok:
        raise PositionCrcMismatch(snapshot.region)
    lat, lon = struct.unpack("<dd", frame[POSITION_SLICE])
    return lat, lon


# --- the hub --------------------------------------------------------------

@dataclass
class HubCycleResult:
    cycle: int
    reads: list  # (region, nbytes) in read order
    uplinks: list
    writes: list  # (region, nbytes)
    events: list = field(default_factory=list)  # (kind, payload dict)
    radio_out: list = field(default_factory=list)  # (UplinkFrame, frames delivered by radio)

    @property
    def read_multiset(self) -> Counter:
        return Counter(self.reads)


class CommHub:
    """The flight controller as hub. ``ssi`` carries DPR reads, ``radio_up`` uplinks."""

    def __init__(self, dpr: ActiveDpr, radio_up: SerialChannel,
                 ssi: Optional[SerialChannel] = None,
                 matrix: Optional[PermissionMatrix] = None,
                 position_region: str = "horus_profile"):
        self.dpr = dpr
        self.radio_up = radio_up
        self.ssi = ssi
        self.matrix = matrix or PermissionMatrix()
        self.position_region = position_region
        self.me = Node.FLIGHT_CONTROLLER
        self.read_regions = [r for r in dpr.memory_map if r.consumer is self.me]
        self.owned_regions = [r for r in dpr.memory_map if r.producer is self.me]
        self.snapshots: dict[str, RegionRead] = {}

    def _read_all(self, cycle: int, events: list) -> list:
        reads = []
        for region in self.read_regions:
            snap = self.dpr.read(region.name)
            reads.append((region.name, len(snap.data)))
            if self.ssi is not None:
                delivered = self.ssi.transmit(snap.data, cycle)
                if not delivered:
                    events.append(("ssi_loss", {"region": region.name}))
                    snap = RegionRead(region.name, b"", snap.freshness)
                else:
                    snap = RegionRead(region.name, delivered[0], snap.freshness)
            self.snapshots[region.name] = snap
            fr = snap.freshness
            if fr.status is Freshness.STALE:
                events.append(("stale", {"region": region.name, "unchanged": fr.unchanged}))
            if fr.gap is not None:
                events.append(("gap", {"region": region.name, "increment": fr.gap}))
        return reads

    def _uplinks(self, cycle: int, events: list) -> list:
        pending = []
        for region in self.read_regions:
            snap = self.snapshots[region.name]
            if not snap.has_data or not snap.data:
                continue
            try:
                level = check_permission(self.matrix, region.producer, Node.BASE_STATION)
            except Denied as exc:
                events.append(("denial", _denial(exc, region.name, "uplink")))
                continue
            pending.append(UplinkFrame(region.producer, region.name, snap.data, cycle, level))
        offsets = {r.name: r.offset for r in self.read_regions}
        pending.sort(key=lambda u: (-u.level, offsets[u.region]))
        return pending

    def _destination(self, region) -> Node:
        # a write into a region lands with its producer unless the hub produces it
        return region.consumer if region.producer is self.me else region.producer

    def _apply_downlink(self, frame: bytes, events: list) -> list:
        try:
            dl = decode_downlink(frame)
        except MalformedDownlink as exc:
            events.append(("downlink_dropped", {"reason": str(exc), "nbytes": len(frame)}))
            return []
        regions = self.dpr.memory_map.regions
        if dl.region_index >= len(regions):
            events.append(("downlink_dropped", {"reason": f"no region {dl.region_index}"}))
            return []
        region = regions[dl.region_index]
        try:
            check_permission(self.matrix, dl.source, self._destination(region))
        except Denied as exc:
            events.append(("denial", _denial(exc, region.name, "downlink")))
            return []
        if region.producer is not self.me:
            events.append(("denial", {"source": dl.source.name, "destination": region.producer.name,
                                      "region": region.name, "direction": "downlink",
                                      "reason": "region not produced by the hub"}))
            return []
        if len(dl.payload) != region.length:
            events.append(("downlink_dropped", {"reason": "payload length",
                                                "nbytes": len(dl.payload)}))
            return []
        n = self.dpr.write(region.name, dl.payload)
        events.append(("downlink_write", {"region": region.name, "nbytes": n,
                                          "source": dl.source.name}))
        return [(region.name, n)]

    def cycle(self, cycle: int, downlink_frames: Sequence[bytes] = ()) -> HubCycleResult:
        """One hub interval: fixed reads, forward, at most one downlink write."""
        events: list = []
        reads = self._read_all(cycle, events)
        uplinks = self._uplinks(cycle, events)
        radio_out = [(up, self.radio_up.transmit(up.payload, cycle)) for up in uplinks]
        writes: list = []
        if downlink_frames:
            writes = self._apply_downlink(downlink_frames[0], events)
            for extra in downlink_frames[1:]:
                events.append(("downlink_dropped", {"reason": "excess frame in cycle",
                                                    "nbytes": len(extra)}))
        for region in self.owned_regions:
            self.dpr.rotate(region.name)
        return HubCycleResult(cycle, reads, uplinks, writes, events, radio_out)

    def position_for_control(self) -> tuple[float, float]:
        snap = self.snapshots.get(self.position_region)
        if snap is None:
            raise NeverWritten(self.position_region)
        return read_position_for_control(snap)


def _denial(exc: Denied, region: str, direction: str) -> dict:
    return {"source": exc.source.name, "destination": exc.destination.name,
            "region": region, "direction": direction}

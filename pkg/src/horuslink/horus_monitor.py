"""HORUS flight-path safety monitor.

Per tick the monitor collects N GPS receiver frames over their own serial
links, votes a canonical position (per-coordinate median over usable
receivers), checks it against the flight envelope and advances the safety
state machine. The resulting profile is pushed over the RFID link into the
DPR. The monitor holds only a write-only port on the DPR.
"""

from __future__ import annotations

import enum
import math
import statistics
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .channel_sim import SerialChannel
from .dpr_core import Freshness, FreshnessTracker, ProducerPort, WrongLength
from .wire_codec import (
    GPS_FRAME_SIZE,
    ID_REPORTED,
    STATUS_RECEIVER_FAULT,
    STATUS_VALID_FIX,
    CodecError,
    GpsPositionObject,
    ReportedPositionObject,
    assemble_profile,
    decode_gps,
    encode_gps,
    encode_reported,
)

METERS_PER_DEGREE = 111_320.0


class NoValidReceiver(Exception):
    pass


# --- envelope -------------------------------------------------------------

def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if _orient(ax, ay, bx, by, px, py) != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_intersect(a, b, c, d) -> bool:
    d1 = _orient(*c, *d, *a)
    d2 = _orient(*c, *d, *b)
    d3 = _orient(*a, *b, *c)
    d4 = _orient(*a, *b, *d)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and \
            ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    return (_on_segment(*a, *c, *d) or _on_segment(*b, *c, *d)
            or _on_segment(*c, *a, *b) or _on_segment(*d, *a, *b))


def is_simple_polygon(vertices: Sequence[tuple[float, float]]) -> bool:
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return len(set(vertices)) == n


def point_in_polygon(lat: float, lon: float, vertices: Sequence[tuple[float, float]]) -> bool:
    """Even-odd rule with points on an edge or vertex counted as inside."""
    n = len(vertices)
    inside = False
    for i in range(n):
        ay, ax = vertices[i]
        by, bx = vertices[(i + 1) % n]
        if _on_segment(lon, lat, ax, ay, bx, by):
            return True
        if (ay > lat) != (by > lat):
            x_cross = ax + (lat - ay) * (bx - ax) / (by - ay)
            if lon < x_cross:
                inside = not inside
    return inside


@dataclass(frozen=True)
class FlightEnvelope:
    vertices: tuple  # ((lat, lon), ...)
    alt_min: float
    alt_max: float

    def __post_init__(self):
        verts = tuple((float(a), float(b)) for a, b in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError("envelope polygon needs at least 3 vertices")
        if not is_simple_polygon(verts):
            raise ValueError("envelope polygon must be simple")
        if self.alt_min > self.alt_max:
            raise ValueError("alt_min must not exceed alt_max")


class Check(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    FAULT = "fault"


@dataclass(frozen=True)
class VoteResult:
    latitude: float
    longitude: float
    altitude: float
    contributing: int
    disagreement: bool


def envelope_check(position: VoteResult, envelope: FlightEnvelope) -> Check:
    horizontal = point_in_polygon(position.latitude, position.longitude, envelope.vertices)
    vertical = envelope.alt_min <= position.altitude <= envelope.alt_max
    return Check.INSIDE if horizontal and vertical else Check.OUTSIDE


# --- voting ---------------------------------------------------------------

def horizontal_distance_m(lat1, lon1, lat2, lon2) -> float:
    """Equirectangular distance; adequate at envelope scale."""
    mean_lat = math.radians((lat1 + lat2) / 2.0)
    dy = (lat2 - lat1) * METERS_PER_DEGREE
    dx = (lon2 - lon1) * METERS_PER_DEGREE * math.cos(mean_lat)
    return math.hypot(dx, dy)


def usable(receivers, valid=None, fresh=None) -> list[GpsPositionObject]:
    n = len(receivers)
    valid = [True] * n if valid is None else list(valid)
    fresh = [True] * n if fresh is None else list(fresh)
    return [r for r, v, f in zip(receivers, valid, fresh)
            if r is not None and v and f and r.valid_fix]


def derive_position(receivers: Sequence[Optional[GpsPositionObject]], valid=None, fresh=None,
                    epsilon_h: float = 50.0, epsilon_v: float = 10.0) -> VoteResult:
    """Per-coordinate median over CRC-valid, fresh, valid-fix receivers."""
    if len(receivers) < 1:
        raise ValueError("need at least one receiver slot")
    good = usable(receivers, valid, fresh)
    if not good:
        raise NoValidReceiver(f"0 of {len(receivers)} receivers usable")
    lat = statistics.median(r.latitude for r in good)
    lon = statistics.median(r.longitude for r in good)
    alt = statistics.median(r.altitude for r in good)
    disagreement = False
    for i, a in enumerate(good):
        for b in good[i + 1:]:
            if (horizontal_distance_m(a.latitude, a.longitude, b.latitude, b.longitude) > epsilon_h
                    or abs(a.altitude - b.altitude) > epsilon_v):
                disagreement = True
    return VoteResult(lat, lon, alt, len(good), disagreement)


# --- safety state machine -------------------------------------------------

class SafetyMode(str, enum.Enum):
    NOMINAL = "NOMINAL"
    SWITCHED_REDUNDANT = "SWITCHED_REDUNDANT"
    CUTOFF = "CUTOFF"


class Action(str, enum.Enum):
    SWITCH_PWM_RELAY = "switch_pwm_relay"
    CUT_MOTORS = "cut_motors"
    TRIGGER_PARACHUTE = "trigger_parachute"


@dataclass(frozen=True)
class SafetyState:
    mode: SafetyMode = SafetyMode.NOMINAL
    breach_counter: int = 0
    redundant_controller_present: bool = True
    parachute_triggered: bool = False


def _cutoff(state: SafetyState):
    new = replace(state, mode=SafetyMode.CUTOFF, parachute_triggered=True)
    return new, [Action.CUT_MOTORS, Action.TRIGGER_PARACHUTE]


def safety_step(state: SafetyState, check: Check, grace: int = 20):
    """Advance one cycle. Returns (new_state, actions)."""
    if state.mode is SafetyMode.CUTOFF:
        return replace(state, breach_counter=0) if check is Check.INSIDE else state, []
    if check is Check.INSIDE:
        return replace(state, breach_counter=0), []
    if state.mode is SafetyMode.NOMINAL:
        if state.redundant_controller_present:
            return (replace(state, mode=SafetyMode.SWITCHED_REDUNDANT, breach_counter=0),
                    [Action.SWITCH_PWM_RELAY])
        return _cutoff(replace(state, breach_counter=0))
    count = state.breach_counter + 1
    if count >= grace:
        return _cutoff(replace(state, breach_counter=count))
    return replace(state, breach_counter=count), []


# --- the monitor ----------------------------------------------------------

@dataclass
class HorusConfig:
    n_receivers: int = 3
    epsilon_h: float = 50.0
    epsilon_v: float = 10.0
    grace: int = 20
    redundant_controller_present: bool = True
    tick_ms: int = 10
    stale_threshold: int = 3


@dataclass
class HorusCycleResult:
    tick: int
    block: bytes
    vote: Optional[VoteResult]
    check: Check
    state: SafetyState
    actions: list
    receiver_valid: list
    receiver_fresh: list
    events: list = field(default_factory=list)  # (kind, payload dict)


class HorusMonitor:
    def __init__(self, config: HorusConfig, envelope: FlightEnvelope, rfid: SerialChannel,
                 port: ProducerPort, receiver_channels: Sequence[SerialChannel]):
        if len(receiver_channels) != config.n_receivers:
            raise ValueError("one serial channel per receiver is required")
        self.config = config
        self.envelope = envelope
        self.rfid = rfid
        self.port = port
        self.receiver_channels = list(receiver_channels)
        self.trackers = [
            FreshnessTracker(config.tick_ms, config.stale_threshold)
            for _ in receiver_channels
        ]
        self.state = SafetyState(redundant_controller_present=config.redundant_controller_present)

    def _collect(self, tick: int, readings: Sequence[GpsPositionObject], events: list):
        frames, objects, valid, fresh = [], [], [], []
        for k, (reading, chan, tracker) in enumerate(
                zip(readings, self.receiver_channels, self.trackers)):
            delivered = chan.transmit(encode_gps(reading), tick)
            raw = delivered[0] if delivered and len(delivered[0]) == GPS_FRAME_SIZE else None
            obj = None
            if raw is not None:
                try:
                    obj = decode_gps(raw)
                except CodecError:
                    events.append(("crc_fail", {"where": f"gps{k}"}))
            report = tracker.observe(obj.timestamp if obj is not None else None)
            if report.status is Freshness.STALE:
                events.append(("stale", {"where": f"gps{k}", "unchanged": report.unchanged}))
            frames.append(raw if raw is not None else bytes(GPS_FRAME_SIZE))
            objects.append(obj)
            valid.append(obj is not None)
            fresh.append(report.status is Freshness.FRESH)
        return frames, objects, valid, fresh

    def cycle(self, tick: int, readings: Sequence[GpsPositionObject]) -> HorusCycleResult:
        """One 10 ms tick: collect, vote, check, act, emit."""
        cfg = self.config
        events: list = []
        frames, objects, valid, fresh = self._collect(tick, readings, events)

        timestamp = (tick * cfg.tick_ms) & 0xFFFFFFFF
        try:
            vote = derive_position(objects, valid, fresh, cfg.epsilon_h, cfg.epsilon_v)
        except NoValidReceiver:
            vote = None
            check = Check.FAULT
            reported = ReportedPositionObject(timestamp, ID_REPORTED, STATUS_RECEIVER_FAULT)
            events.append(("vote_fault", {"receivers": len(objects)}))
        else:
            check = envelope_check(vote, self.envelope)
            if vote.disagreement:
                events.append(("disagreement", {"contributing": vote.contributing}))
            good = usable(objects, valid, fresh)

            def med(name):
                return statistics.median(getattr(r, name) for r in good)

            reported = ReportedPositionObject(
                timestamp, ID_REPORTED, STATUS_VALID_FIX,
                vote.latitude, vote.longitude, vote.altitude,
                med("pitch"), med("yaw"), med("roll"),
                med("x_acceleration"), med("y_acceleration"), med("z_acceleration"),
            )

        before = self.state
        self.state, actions = safety_step(self.state, check, cfg.grace)
        if self.state.mode is not before.mode:
            events.append(("safety_transition", {
                "from": before.mode.value, "to": self.state.mode.value,
                "check": check.value, "actions": [a.value for a in actions],
            }))

        block = assemble_profile(encode_reported(reported), frames)
        for frame in self.rfid.transmit(block, tick):
            try:
                self.port.write(frame)
            except WrongLength:
                events.append(("write_rejected", {"region": self.port.region,
                                                  "nbytes": len(frame)}))
        self.port.rotate()
        return HorusCycleResult(tick, block, vote, check, self.state, actions,
                                valid, fresh, events)

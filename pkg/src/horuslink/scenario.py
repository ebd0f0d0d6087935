"""Scenario files: JSON text describing one fully determined simulation run.

See docs/scenario_schema.md for the schema. Everything that can vary between
runs lives here, so a (scenario, seed) pair fixes the metrics output.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .channel_sim import Babble, FaultModel
from .dpr_core import MemoryMap, Region
from .horus_monitor import FlightEnvelope
from .nodes import Node
from .wire_codec import ALLOWED_RECEIVER_COUNTS, profile_size
from .world import ReceiverFault, Waypoint

LINK_NAMES = ("rfid", "ssi", "radio_up", "radio_down")
LINK_DIRECTIONS = {
    "rfid": "horus->dpr",
    "ssi": "dpr->fc",
    "radio_up": "fc->base",
    "radio_down": "base->fc",
}


class ConfigInvalid(ValueError):
    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.field = where


def derive_seed(seed: int, name: str) -> int:
    """Stable 64-bit child seed for a named component."""
    ss = np.random.SeedSequence([seed & (2**64 - 1), zlib.crc32(name.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class TimedEvent:
    cycle: int
    type: str
    channel: str


@dataclass
class DownlinkEvent:
    cycle: int
    source: Node
    region: str
    payload: Optional[bytes] = None  # None: fill the region with ``fill``
    fill: int = 0xA5


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    cycles: int = 1000
    tick_ms: int = 10
    memory_map: MemoryMap = field(default_factory=MemoryMap.default)
    envelope: Optional[FlightEnvelope] = None
    n_receivers: int = 3
    noise_h_m: float = 0.0
    noise_v_m: float = 0.0
    receiver_faults: list = field(default_factory=list)
    path: list = field(default_factory=list)
    channels: dict = field(default_factory=dict)  # name -> FaultModel
    events: list = field(default_factory=list)
    downlinks: list = field(default_factory=list)
    redundant_controller_present: bool = True
    grace: int = 20
    epsilon_h_m: float = 50.0
    epsilon_v_m: float = 10.0
    stale_threshold: int = 3
    raw: dict = field(default_factory=dict)

    @property
    def link_names(self) -> list[str]:
        return [f"gps{k}" for k in range(self.n_receivers)] + list(LINK_NAMES)

    def fault_model(self, name: str) -> FaultModel:
        return self.channels.get(name) or FaultModel(seed=derive_seed(self.seed, name))


# --- parsing ----------------------------------------------------------------

def _get(d: dict, key: str, where: str, kind, default: Any = ...):
    if key not in d:
        if default is ...:
            raise ConfigInvalid(f"{where}.{key}", "missing")
        return default
    v = d[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if kind is int and isinstance(v, bool):
        raise ConfigInvalid(f"{where}.{key}", "expected an integer")
    if not isinstance(v, kind):
        raise ConfigInvalid(f"{where}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return v


def _hex(s: str, where: str) -> bytes:
    try:
        return bytes.fromhex(s)
    except ValueError:
        raise ConfigInvalid(where, "not a hex string") from None


def _node(v, where: str) -> Node:
    try:
        return Node.parse(v)
    except ValueError as exc:
        raise ConfigInvalid(where, str(exc)) from None


def _fault_model(d: dict, where: str, default_seed: int) -> FaultModel:
    if not isinstance(d, dict):
        raise ConfigInvalid(where, "expected an object")
    known = {"bit_flip_probability", "drop_probability", "duplicate_probability", "freeze",
             "babble", "seed"}
    extra = set(d) - known
    if extra:
        raise ConfigInvalid(f"{where}.{sorted(extra)[0]}", "unknown key")
    babble = None
    if "babble" in d and d["babble"] is not None:
        b = d["babble"]
        bw = f"{where}.babble"
        if "frame_hex" in b:
            frame = _hex(b["frame_hex"], f"{bw}.frame_hex")
        else:
            frame = bytes([_get(b, "fill", bw, int, 0x55) & 0xFF]) * _get(b, "length", bw, int)
        try:
            babble = Babble(frame, _get(b, "period", bw, int, 1), _get(b, "start", bw, int, 0),
                            _get(b, "end", bw, int, None) if b.get("end") is not None else None)
        except ValueError as exc:
            raise ConfigInvalid(bw, str(exc)) from None
    try:
        return FaultModel(
            bit_flip_probability=_get(d, "bit_flip_probability", where, float, 0.0),
            drop_probability=_get(d, "drop_probability", where, float, 0.0),
            duplicate_probability=_get(d, "duplicate_probability", where, float, 0.0),
            freeze=_get(d, "freeze", where, bool, False),
            babble=babble,
            seed=_get(d, "seed", where, int, default_seed),
        )
    except ValueError as exc:
        raise ConfigInvalid(where, str(exc)) from None


def _memory_map(items, where: str) -> MemoryMap:
    if not isinstance(items, list) or not items:
        raise ConfigInvalid(where, "expected a non-empty list of regions")
    regions = []
    for i, r in enumerate(items):
        w = f"{where}[{i}]"
        regions.append(Region(
            _get(r, "name", w, str), _get(r, "offset", w, int), _get(r, "length", w, int),
            _node(_get(r, "producer", w, str), f"{w}.producer"),
            _node(_get(r, "consumer", w, str), f"{w}.consumer"),
            _get(r, "reserved", w, bool, False),
        ))
    try:
        return MemoryMap(regions)
    except ValueError as exc:
        raise ConfigInvalid(where, str(exc)) from None


_TOP_LEVEL_KEYS = {"name", "seed", "cycles", "tick_ms", "receivers", "memory_map", "envelope",
                   "path", "channels", "events", "downlinks", "safety", "thresholds",
                   "description"}


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigInvalid("scenario", "expected a JSON object")
    unknown = sorted(set(d) - _TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigInvalid(unknown[0], "unknown key")
    sc = Scenario()
    sc.name = _get(d, "name", "scenario", str, "scenario")
    sc.seed = _get(d, "seed", "scenario", int, 0)
    if not 0 <= sc.seed < 2**64:
        raise ConfigInvalid("seed", "must be an unsigned 64-bit value")
    sc.cycles = _get(d, "cycles", "scenario", int, 1000)
    if sc.cycles < 0:
        raise ConfigInvalid("cycles", "must be >= 0")
    sc.tick_ms = _get(d, "tick_ms", "scenario", int, 10)
    if sc.tick_ms <= 0:
        raise ConfigInvalid("tick_ms", "must be > 0")

    rx = _get(d, "receivers", "scenario", dict, {})
    sc.n_receivers = _get(rx, "count", "receivers", int, 3)
    if sc.n_receivers not in ALLOWED_RECEIVER_COUNTS:
        raise ConfigInvalid("receivers.count", f"must be one of {ALLOWED_RECEIVER_COUNTS}")
    sc.noise_h_m = _get(rx, "noise_h_m", "receivers", float, 0.0)
    sc.noise_v_m = _get(rx, "noise_v_m", "receivers", float, 0.0)
    for i, f in enumerate(_get(rx, "faults", "receivers", list, [])):
        w = f"receivers.faults[{i}]"
        k = _get(f, "receiver", w, int)
        if not 0 <= k < sc.n_receivers:
            raise ConfigInvalid(f"{w}.receiver", "out of range")
        sc.receiver_faults.append(ReceiverFault(k, _get(f, "start", w, int), _get(f, "end", w, int)))

    if "memory_map" in d:
        sc.memory_map = _memory_map(d["memory_map"], "memory_map")
    else:
        sc.memory_map = MemoryMap.default(profile_size(sc.n_receivers))
    if "horus_profile" not in sc.memory_map:
        raise ConfigInvalid("memory_map", "a 'horus_profile' region is required")
    if sc.memory_map["horus_profile"].length != profile_size(sc.n_receivers):
        raise ConfigInvalid("memory_map", "'horus_profile' length must equal the profile size "
                            f"{profile_size(sc.n_receivers)}")

    env = _get(d, "envelope", "scenario", dict)
    verts = _get(env, "vertices", "envelope", list)
    try:
        sc.envelope = FlightEnvelope(tuple(tuple(v) for v in verts),
                                     _get(env, "alt_min", "envelope", float),
                                     _get(env, "alt_max", "envelope", float))
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid("envelope", str(exc)) from None

    path = _get(d, "path", "scenario", list)
    if not path:
        raise ConfigInvalid("path", "needs at least one waypoint")
    for i, w in enumerate(path):
        where = f"path[{i}]"
        sc.path.append(Waypoint(_get(w, "cycle", where, int), _get(w, "lat", where, float),
                                _get(w, "lon", where, float), _get(w, "alt", where, float)))
    if len({w.cycle for w in sc.path}) != len(sc.path):
        raise ConfigInvalid("path", "waypoint cycles must be distinct")

    chans = _get(d, "channels", "scenario", dict, {})
    names = sc.link_names
    for name, fm in chans.items():
        if name not in names:
            raise ConfigInvalid(f"channels.{name}", f"unknown channel; expected one of {names}")
        sc.channels[name] = _fault_model(fm, f"channels.{name}", derive_seed(sc.seed, name))

    for i, e in enumerate(_get(d, "events", "scenario", list, [])):
        w = f"events[{i}]"
        typ = _get(e, "type", w, str)
        if typ != "freeze":
            raise ConfigInvalid(f"{w}.type", f"unknown event type {typ!r}")
        ch = _get(e, "channel", w, str)
        if ch not in names:
            raise ConfigInvalid(f"{w}.channel", f"unknown channel {ch!r}")
        sc.events.append(TimedEvent(_get(e, "cycle", w, int), typ, ch))

    for i, e in enumerate(_get(d, "downlinks", "scenario", list, [])):
        w = f"downlinks[{i}]"
        region = _get(e, "region", w, str)
        if region not in sc.memory_map:
            raise ConfigInvalid(f"{w}.region", f"unknown region {region!r}")
        payload = _hex(e["payload_hex"], f"{w}.payload_hex") if "payload_hex" in e else None
        sc.downlinks.append(DownlinkEvent(
            _get(e, "cycle", w, int), _node(_get(e, "source", w, str, "BaseStation"), f"{w}.source"),
            region, payload, _get(e, "fill", w, int, 0xA5) & 0xFF))

    safety = _get(d, "safety", "scenario", dict, {})
    sc.redundant_controller_present = _get(safety, "redundant_controller_present", "safety",
                                           bool, True)
    sc.grace = _get(safety, "grace", "safety", int, 20)
    if sc.grace < 1:
        raise ConfigInvalid("safety.grace", "must be >= 1")

    th = _get(d, "thresholds", "scenario", dict, {})
    sc.epsilon_h_m = _get(th, "epsilon_h_m", "thresholds", float, 50.0)
    sc.epsilon_v_m = _get(th, "epsilon_v_m", "thresholds", float, 10.0)
    sc.stale_threshold = _get(th, "stale_threshold", "thresholds", int, 3)
    if sc.stale_threshold < 1:
        raise ConfigInvalid("thresholds.stale_threshold", "must be >= 1")
    sc.raw = d
    return sc


def load_scenario(path, seed: Optional[int] = None, cycles: Optional[int] = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid("scenario", f"cannot read {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("scenario", f"invalid JSON: {exc}") from None
    return scenario_from_dict(apply_overrides(d, seed, cycles))


def apply_overrides(d: dict, seed: Optional[int] = None, cycles: Optional[int] = None) -> dict:
    d = dict(d)
    if seed is not None:
        d["seed"] = seed
    if cycles is not None:
        d["cycles"] = cycles
    return d

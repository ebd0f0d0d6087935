"""Scripted flight path and noisy GPS receivers for the simulation."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .horus_monitor import METERS_PER_DEGREE
from .wire_codec import ID_GPS_BASE, STATUS_RECEIVER_FAULT, STATUS_VALID_FIX, GpsPositionObject

GRAVITY = 9.80665


@dataclass(frozen=True)
class Waypoint:
    cycle: int
    lat: float
    lon: float
    alt: float


@dataclass(frozen=True)
class ReceiverFault:
    """Receiver ``receiver`` reports a fault status during [start, end)."""

    receiver: int
    start: int
    end: int


class FlightPath:
    """Piecewise-linear in cycle index; held constant outside the waypoints."""

    def __init__(self, waypoints: Sequence[Waypoint]):
        if not waypoints:
            raise ValueError("flight path needs at least one waypoint")
        self.waypoints = sorted(waypoints, key=lambda w: w.cycle)
        self._cycles = [w.cycle for w in self.waypoints]
        if len(set(self._cycles)) != len(self._cycles):
            raise ValueError("waypoint cycles must be distinct")

    def at(self, cycle: int) -> tuple[float, float, float]:
        k = bisect.bisect_right(self._cycles, cycle)
        if k == 0:
            w = self.waypoints[0]
            return w.lat, w.lon, w.alt
        if k == len(self.waypoints):
            w = self.waypoints[-1]
            return w.lat, w.lon, w.alt
        a, b = self.waypoints[k - 1], self.waypoints[k]
        t = (cycle - a.cycle) / (b.cycle - a.cycle)
        return (a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon),
                a.alt + t * (b.alt - a.alt))


class World:
    def __init__(self, path: FlightPath, n_receivers: int, noise_h_m: float = 0.0,
                 noise_v_m: float = 0.0, seed: int = 0, faults: Sequence[ReceiverFault] = (),
                 tick_ms: int = 10):
        self.path = path
        self.n = n_receivers
        self.noise_h_m = noise_h_m
        self.noise_v_m = noise_v_m
        self.rng = np.random.default_rng(seed)
        self.faults = list(faults)
        self.tick_ms = tick_ms

    def truth(self, tick: int) -> tuple[float, float, float]:
        return self.path.at(tick)

    def readings(self, tick: int) -> list[GpsPositionObject]:
        lat, lon, alt = self.truth(tick)
        # draw for every receiver every tick so fault windows do not shift the stream
        noise = self.rng.standard_normal((self.n, 3))
        timestamp = (tick * self.tick_ms) & 0xFFFFFFFF
        scale_lon = METERS_PER_DEGREE * max(np.cos(np.radians(lat)), 1e-9)
        out = []
        for k in range(self.n):
            faulty = any(f.receiver == k and f.start <= tick < f.end for f in self.faults)
            status = STATUS_RECEIVER_FAULT if faulty else STATUS_VALID_FIX
            out.append(GpsPositionObject(
                timestamp=timestamp,
                identifier=ID_GPS_BASE + k,
                status=status,
                latitude=float(lat + noise[k, 0] * self.noise_h_m / METERS_PER_DEGREE),
                longitude=float(lon + noise[k, 1] * self.noise_h_m / scale_lon),
                altitude=float(alt + noise[k, 2] * self.noise_v_m),
                z_acceleration=-GRAVITY,
            ))
        return out

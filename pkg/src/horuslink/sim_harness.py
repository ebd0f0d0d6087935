"""Cycle-driven simulation of the whole system and the command-line entry point.

Per tick: world update -> HORUS cycle -> base-station downlink send ->
hub cycle -> base-station intake. Metrics are JSON lines, one event per
line, in cycle order.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import wire_codec as wc
from .channel_sim import NothingToFreeze, SerialChannel
from .comm_hub import CommHub, encode_downlink
from .crc import crc32_koopman
from .dpr_core import ActiveDpr, Role
from .horus_monitor import HorusConfig, HorusMonitor
from .scenario import LINK_DIRECTIONS, ConfigInvalid, Scenario, derive_seed, load_scenario
from .world import FlightPath, World

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


class InvariantViolation(RuntimeError):
    pass


class BaseStation:
    """Counting sink: CRC-checks every uplink it receives."""

    def __init__(self, n_receivers: int):
        self.n = n_receivers
        self.counts = Counter()

    def intake(self, region: str, frames) -> list:
        events = []
        for frame in frames:
            self.counts["frames"] += 1
            if region != "horus_profile":
                continue
            if len(frame) != wc.profile_size(self.n):
                self.counts["wrong_length"] += 1
                events.append(("crc_fail", {"where": "base", "region": region,
                                            "reason": "length", "nbytes": len(frame)}))
                continue
            parsed = wc.parse_profile(frame, self.n)
            if parsed.all_valid:
                self.counts["valid"] += 1
            else:
                self.counts["crc_fail"] += 1
                events.append(("crc_fail", {"where": "base", "region": region,
                                            "valid": parsed.valid}))
        return events


@dataclass
class RunResult:
    records: list = field(default_factory=list)
    hub_reads: list = field(default_factory=list)  # per cycle: sorted (region, nbytes) list
    states: list = field(default_factory=list)  # per cycle: SafetyState after the cycle
    channel_counts: dict = field(default_factory=dict)

    def kinds(self) -> Counter:
        return Counter(r["kind"] for r in self.records)

    def of_kind(self, kind: str) -> list:
        return [r for r in self.records if r["kind"] == kind]

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                       for r in self.records)


class Simulation:
    def __init__(self, scenario: Scenario):
        sc = scenario
        self.scenario = sc
        self.dpr = ActiveDpr(sc.memory_map, expected_increment=sc.tick_ms,
                             stale_threshold=sc.stale_threshold)
        self.channels = {
            name: SerialChannel(name, sc.fault_model(name),
                                LINK_DIRECTIONS.get(name, "receiver->horus"))
            for name in sc.link_names
        }
        cfg = HorusConfig(
            n_receivers=sc.n_receivers, epsilon_h=sc.epsilon_h_m, epsilon_v=sc.epsilon_v_m,
            grace=sc.grace, redundant_controller_present=sc.redundant_controller_present,
            tick_ms=sc.tick_ms, stale_threshold=sc.stale_threshold,
        )
        self.horus = HorusMonitor(
            cfg, sc.envelope, self.channels["rfid"], self.dpr.producer_port("horus_profile"),
            [self.channels[f"gps{k}"] for k in range(sc.n_receivers)],
        )
        self.hub = CommHub(self.dpr, self.channels["radio_up"], self.channels["ssi"])
        self.world = World(FlightPath(sc.path), sc.n_receivers, sc.noise_h_m, sc.noise_v_m,
                           derive_seed(sc.seed, "world"), sc.receiver_faults, sc.tick_ms)
        self.base = BaseStation(sc.n_receivers)
        self._log_pos = {name: 0 for name in self.channels}
        self._nominal_reads = None

    def _downlink_frames(self, tick: int) -> list:
        radio = self.channels["radio_down"]
        sent = [e for e in self.scenario.downlinks if e.cycle == tick]
        frames = []
        for e in sent:
            region = self.dpr.memory_map[e.region]
            payload = e.payload if e.payload is not None else bytes([e.fill]) * region.length
            frame = encode_downlink(e.source, self.dpr.memory_map.index_of(e.region), payload)
            frames.extend(radio.transmit(frame, tick))
        if not sent:
            frames.extend(radio.idle(tick))
        return frames

    def _fault_events(self) -> list:
        events = []
        for name, chan in self.channels.items():
            new = chan.log[self._log_pos[name]:]
            self._log_pos[name] = len(chan.log)
            for d in new:
                if d.faults:
                    events.append(("fault_injected", {"channel": name, "faults": d.faults,
                                                      "flipped_bits": d.flipped_bits}))
        return events

    def _check_invariants(self, tick: int, hub_result, horus_result) -> None:
        for region in self.dpr.memory_map:
            roles = self.dpr.roles(region.name)
            if sorted(roles.values()) != [0, 1, 2]:
                raise InvariantViolation(f"cycle {tick}: role assignment of {region.name} "
                                         f"is not a bijection: {roles}")
            tb = self.dpr.triple_buffer(region.name)
            if not tb.is_scrubbed(roles[Role.SCRUB]):
                raise InvariantViolation(f"cycle {tick}: scrub buffer of {region.name} is dirty")
        reads = sorted(hub_result.reads)
        if self._nominal_reads is None:
            self._nominal_reads = reads
        elif reads != self._nominal_reads:
            raise InvariantViolation(f"cycle {tick}: hub read budget changed: {reads}")
        for up in hub_result.uplinks:
            if up.payload != self.hub.snapshots[up.region].data:
                raise InvariantViolation(f"cycle {tick}: uplink payload mutated")
        if len(horus_result.block) != wc.profile_size(self.scenario.n_receivers):
            raise InvariantViolation(f"cycle {tick}: profile block length changed")

    def step(self, tick: int, result: RunResult) -> None:
        events: list = []
        for ev in self.scenario.events:
            if ev.cycle == tick and ev.type == "freeze":
                try:
                    self.channels[ev.channel].freeze_channel(tick)
                except NothingToFreeze as exc:
                    events.append(("freeze_refused", {"channel": ev.channel, "reason": str(exc)}))
                else:
                    events.append(("channel_frozen", {"channel": ev.channel}))

        horus_result = self.horus.cycle(tick, self.world.readings(tick))
        events += horus_result.events
        hub_result = self.hub.cycle(tick, self._downlink_frames(tick))
        events += hub_result.events
        for up, delivered in hub_result.radio_out:
            events.append(("uplink", {
                "region": up.region, "source": up.source.name, "level": up.level.name,
                "nbytes": len(up.payload), "crc32": crc32_koopman(wc.POLY_FRAME, up.payload),
                "delivered": len(delivered),
            }))
            events += self.base.intake(up.region, delivered)
        events += self._fault_events()
        self._check_invariants(tick, hub_result, horus_result)

        for kind, payload in events:
            result.records.append({"cycle": tick, "kind": kind, **payload})
        result.hub_reads.append(sorted(hub_result.reads))
        result.states.append(horus_result.state)

    def run(self, cycles: Optional[int] = None) -> RunResult:
        result = RunResult()
        n = self.scenario.cycles if cycles is None else cycles
        for tick in range(n):
            self.step(tick, result)
        result.channel_counts = {name: c.counts() for name, c in self.channels.items()}
        result.records.append({
            "cycle": n, "kind": "summary", "scenario": self.scenario.name,
            "seed": self.scenario.seed, "cycles": n,
            "events": dict(sorted(result.kinds().items())),
            "channels": result.channel_counts,
            "base_station": dict(sorted(self.base.counts.items())),
            "final_mode": self.horus.state.mode.value,
        })
        return result


def simulate(scenario: Scenario) -> RunResult:
    return Simulation(scenario).run()


def run_scenario(path, seed: Optional[int] = None, cycles: Optional[int] = None,
                 out=None) -> int:
    """Run a scenario file and write metrics; returns the process exit status."""
    try:
        sc = load_scenario(path, seed, cycles)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = simulate(sc)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    log.info("%s: %d cycles, %s", sc.name, sc.cycles, dict(result.kinds()))
    text = result.dumps()
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return EXIT_OK


# --- CLI ---------------------------------------------------------------------

def _codec(args) -> int:
    fields = None
    try:
        if args.json is not None:
            fields = json.loads(args.json)
        data = bytes.fromhex(args.hex) if args.hex is not None else None
    except ValueError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    op = args.op
    try:
        if op == "encode-gps":
            obj = wc.from_dict(fields) if data is None else wc.gps_from_data(data)
            print(wc.encode_gps(obj).hex())
        elif op == "encode-reported":
            obj = (wc.from_dict(fields, wc.FrameKind.REPORTED) if data is None
                   else wc.reported_from_data(data))
            print(wc.encode_reported(obj).hex())
        elif op == "decode-gps":
            obj = wc.decode_gps(data)
            print(json.dumps(wc.to_dict(obj)) if args.as_json else wc.reported_data(obj).hex())
        else:
            obj = wc.decode_reported(data)
            print(json.dumps(wc.to_dict(obj)) if args.as_json else wc.reported_data(obj).hex())
    except (wc.CodecError, TypeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


def _crc(args) -> int:
    poly = int(args.poly, 16)
    try:
        data = bytes.fromhex(args.hex)
    except ValueError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{crc32_koopman(poly, data):08x}")
    return EXIT_OK


def _dpr_dump(args) -> int:
    try:
        if args.scenario is not None:
            sc = load_scenario(args.scenario, args.seed, args.cycles)
        else:
            raise ConfigInvalid("--scenario", "required for dpr dump")
        if args.region not in sc.memory_map:
            raise ConfigInvalid("--region", f"unknown region {args.region!r}")
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sim = Simulation(sc)
    try:
        sim.run()
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    roles = [Role(args.role)] if args.role != "all" else list(Role)
    for role in roles:
        data = sim.dpr.buffer(args.region, role)
        prefix = f"{role.value}: " if len(roles) > 1 else ""
        print(prefix + data.hex())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim_harness",
                                description="Mixed-criticality UAV link simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write JSON-lines metrics")
    s.add_argument("--scenario", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--cycles", type=int)
    s.add_argument("--out", default="-")

    c = sub.add_parser("codec", help="encode/decode profile objects")
    c.add_argument("op", choices=["encode-gps", "decode-gps", "encode-reported",
                                  "decode-reported"])
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--hex", help="frame (decode) or 56 CRC-free data bytes (encode)")
    g.add_argument("--json", help="object fields as JSON (encode only)")
    c.add_argument("--as-json", action="store_true", help="decode: print fields as JSON")

    r = sub.add_parser("crc", help="CRC-32 with a Koopman-notation polynomial")
    r.add_argument("--poly", required=True, choices=["f8c9140a", "9d7f97d6"])
    r.add_argument("--hex", required=True)

    d = sub.add_parser("dpr", help="DPR inspection")
    dsub = d.add_subparsers(dest="dpr_command", required=True)
    dump = dsub.add_parser("dump", help="run a scenario and dump one region's buffers")
    dump.add_argument("--region", required=True)
    dump.add_argument("--scenario")
    dump.add_argument("--seed", type=int)
    dump.add_argument("--cycles", type=int)
    dump.add_argument("--role", default="read", choices=["read", "write", "scrub", "all"])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "simulate":
        return run_scenario(args.scenario, args.seed, args.cycles, args.out)
    if args.command == "codec":
        if args.op.startswith("decode") and args.hex is None:
            print("decode needs --hex", file=sys.stderr)
            return EXIT_CONFIG
        return _codec(args)
    if args.command == "crc":
        return _crc(args)
    return _dpr_dump(args)


if __name__ == "__main__":
    sys.exit(main())

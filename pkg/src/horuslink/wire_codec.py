"""Bit-exact wire format for the HORUS profile objects.

All scalars are little-endian and packed without padding. Float fields are
copied as IEEE-754 bit patterns. Layouts (byte offsets):

GPS-Position object, 60 bytes::

    0 timestamp u32 | 4 identifier u16 | 6 status u16 | 8 latitude f64
    16 longitude f64 | 24 altitude f64 | 32 pitch f32 | 36 yaw f32
    40 roll f32 | 44 x_acc f32 | 48 y_acc f32 | 52 z_acc f32 | 56 crc u32

Reported-Position object, 64 bytes::

    0 timestamp u32 | 4 identifier u16 | 6 status u16 | 8 latitude f64
    16 longitude f64 | 24 position_crc u32 | 28 altitude f64 | 36 pitch f32
    40 yaw f32 | 44 roll f32 | 48 x_acc f32 | 52 y_acc f32 | 56 z_acc f32
    60 crc u32

The framing CRC (POLY_FRAME) covers every byte before it; the position CRC
(POLY_POSITION) covers only bytes 8..24 (latitude || longitude).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import astuple, dataclass, field, fields
from typing import Optional, Sequence

from .crc import POLY_FRAME, POLY_POSITION, crc32_koopman

GPS_FRAME_SIZE = 60
REPORTED_FRAME_SIZE = 64
DATA_SIZE = 56  # CRC-free content of either object

ID_REPORTED = 0x0001
ID_GPS_BASE = 0x0010

STATUS_VALID_FIX = 0x0001
STATUS_RECEIVER_FAULT = 0x0002

ALLOWED_RECEIVER_COUNTS = (1, 2, 3, 5)

_GPS = struct.Struct("<IHHdddffffff")
_REPORTED = struct.Struct("<IHHddIdffffff")
_CRC = struct.Struct("<I")
_LATLON = struct.Struct("<dd")

POSITION_SLICE = slice(8, 24)
POSITION_CRC_OFFSET = 24


class FrameKind(enum.Enum):
    GPS = GPS_FRAME_SIZE
    REPORTED = REPORTED_FRAME_SIZE

    @property
    def size(self) -> int:
        return self.value


def profile_size(n_receivers: int) -> int:
    return REPORTED_FRAME_SIZE + GPS_FRAME_SIZE * n_receivers


class CodecError(ValueError):
    """Base class for frames that must be discarded."""


class WrongLength(CodecError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} bytes, got {got}")
        self.expected = expected
        self.got = got


class CrcMismatch(CodecError):
    pass


class CrcMismatchFrame(CrcMismatch):
    pass


class CrcMismatchPosition(CrcMismatch):
    """Position CRC failed. ``frame_valid`` tells whether the framing CRC held."""

    def __init__(self, msg: str, frame_valid: bool):
        super().__init__(msg)
        self.frame_valid = frame_valid


@dataclass(frozen=True)
class GpsPositionObject:
    timestamp: int = 0
    identifier: int = 0
    status: int = 0
    latitude: float = 0.0
    longitude: float = 0.0
    altitude: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    x_acceleration: float = 0.0
    y_acceleration: float = 0.0
    z_acceleration: float = 0.0

    @property
    def valid_fix(self) -> bool:
        return bool(self.status & STATUS_VALID_FIX) and not self.status & STATUS_RECEIVER_FAULT


@dataclass(frozen=True)
class ReportedPositionObject(GpsPositionObject):
    """GPS object plus a CRC over latitude/longitude, derived from those fields."""

    position_crc: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "position_crc", position_crc(self.latitude, self.longitude)
        )


_GPS_FIELDS = tuple(f.name for f in fields(GpsPositionObject))


def position_crc(latitude: float, longitude: float) -> int:
    return crc32_koopman(POLY_POSITION, _LATLON.pack(latitude, longitude))


def _check_len(frame: bytes, expected: int) -> None:
    if len(frame) != expected:
        raise WrongLength(expected, len(frame))


def _framing_ok(frame: bytes) -> bool:
    (stored,) = _CRC.unpack_from(frame, len(frame) - 4)
    return crc32_koopman(POLY_FRAME, frame[:-4]) == stored


def seal(data: bytes) -> bytes:
    """Append the framing CRC to ``data``."""
    return bytes(data) + _CRC.pack(crc32_koopman(POLY_FRAME, data))


def encode_gps(obj: GpsPositionObject) -> bytes:
    return seal(_GPS.pack(*(getattr(obj, name) for name in _GPS_FIELDS)))


def decode_gps(frame: bytes) -> GpsPositionObject:
    _check_len(frame, GPS_FRAME_SIZE)
    if not _framing_ok(frame):
        raise CrcMismatchFrame("GPS frame CRC mismatch")
    return GpsPositionObject(*_GPS.unpack_from(frame))


def encode_reported(obj: GpsPositionObject) -> bytes:
    """Encode a Reported-Position frame.

    Accepts any GPS-like object; the position CRC is always recomputed from
    latitude and longitude.
    """
    values = [getattr(obj, name) for name in _GPS_FIELDS]
    pcrc = position_crc(obj.latitude, obj.longitude)
    data = _REPORTED.pack(*values[:5], pcrc, *values[5:])
    return seal(data)


def check_reported(frame: bytes) -> tuple[bool, bool]:
    """Return (frame_valid, position_valid) without raising on CRC failure."""
    _check_len(frame, REPORTED_FRAME_SIZE)
    (stored,) = _CRC.unpack_from(frame, POSITION_CRC_OFFSET)
    pos_ok = crc32_koopman(POLY_POSITION, frame[POSITION_SLICE]) == stored
    return _framing_ok(frame), pos_ok


def decode_reported(frame: bytes) -> ReportedPositionObject:
    frame_ok, pos_ok = check_reported(frame)
    if not pos_ok:
        raise CrcMismatchPosition("position CRC mismatch", frame_valid=frame_ok)
    if not frame_ok:
        raise CrcMismatchFrame("Reported-Position frame CRC mismatch")
    values = _REPORTED.unpack_from(frame)
    return ReportedPositionObject(*values[:5], *values[6:])


def reported_data(obj: GpsPositionObject) -> bytes:
    """The 56 CRC-free data bytes of a Reported-Position object (GPS field order)."""
    return _GPS.pack(*(getattr(obj, name) for name in _GPS_FIELDS))


def gps_from_data(data: bytes) -> GpsPositionObject:
    _check_len(data, DATA_SIZE)
    return GpsPositionObject(*_GPS.unpack(data))


def reported_from_data(data: bytes) -> ReportedPositionObject:
    _check_len(data, DATA_SIZE)
    return ReportedPositionObject(*_GPS.unpack(data))


def as_reported(obj: GpsPositionObject) -> ReportedPositionObject:
    return ReportedPositionObject(*(getattr(obj, name) for name in _GPS_FIELDS))


@dataclass(frozen=True)
class HorusProfile:
    reported: ReportedPositionObject
    receivers: tuple[GpsPositionObject, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "receivers", tuple(self.receivers))
        if len(self.receivers) not in ALLOWED_RECEIVER_COUNTS:
            raise ValueError(
                f"receiver count must be one of {ALLOWED_RECEIVER_COUNTS}, "
                f"got {len(self.receivers)}"
            )

    @property
    def size(self) -> int:
        return profile_size(len(self.receivers))


def serialize_profile(p: HorusProfile) -> bytes:
    return encode_reported(p.reported) + b"".join(encode_gps(r) for r in p.receivers)


@dataclass
class ParsedProfile:
    """Per-slot decode result; invalid slots hold ``None``.

    ``valid`` is ordered (reported, receiver 0, receiver 1, ...).
    """

    reported: Optional[ReportedPositionObject]
    receivers: list[Optional[GpsPositionObject]]
    valid: list[bool]

    @property
    def all_valid(self) -> bool:
        return all(self.valid)

    def profile(self) -> HorusProfile:
        if not self.all_valid:
            raise CrcMismatch(f"invalid slots: {self.valid}")
        return HorusProfile(self.reported, tuple(self.receivers))


def split_profile(block: bytes, n_receivers: int) -> list[bytes]:
    """Cut a profile block into its object frames (no CRC checks)."""
    _check_len(block, profile_size(n_receivers))
    out = [bytes(block[:REPORTED_FRAME_SIZE])]
    for k in range(n_receivers):
        start = REPORTED_FRAME_SIZE + k * GPS_FRAME_SIZE
        out.append(bytes(block[start:start + GPS_FRAME_SIZE]))
    return out


def parse_profile(block: bytes, n_receivers: int) -> ParsedProfile:
    frames = split_profile(block, n_receivers)
    try:
        reported = decode_reported(frames[0])
    except CrcMismatch:
        reported = None
    receivers: list[Optional[GpsPositionObject]] = []
    for frame in frames[1:]:
        try:
            receivers.append(decode_gps(frame))
        except CrcMismatch:
            receivers.append(None)
    valid = [reported is not None] + [r is not None for r in receivers]
    return ParsedProfile(reported, receivers, valid)


def assemble_profile(reported_frame: bytes, receiver_frames: Sequence[bytes]) -> bytes:
    """Concatenate already-encoded object frames into a profile block.

    Receiver frames are carried verbatim, valid or not.
    """
    if len(receiver_frames) not in ALLOWED_RECEIVER_COUNTS:
        raise ValueError(f"receiver count {len(receiver_frames)} not allowed")
    _check_len(reported_frame, REPORTED_FRAME_SIZE)
    for f in receiver_frames:
        _check_len(f, GPS_FRAME_SIZE)
    return bytes(reported_frame) + b"".join(bytes(f) for f in receiver_frames)


def to_dict(obj: GpsPositionObject) -> dict:
    d = dict(zip(_GPS_FIELDS, astuple(obj)))
    if isinstance(obj, ReportedPositionObject):
        d["position_crc"] = obj.position_crc
    return d


def from_dict(d: dict, kind: FrameKind = FrameKind.GPS) -> GpsPositionObject:
    values = {k: d[k] for k in _GPS_FIELDS if k in d}
    cls = ReportedPositionObject if kind is FrameKind.REPORTED else GpsPositionObject
    return cls(**values)

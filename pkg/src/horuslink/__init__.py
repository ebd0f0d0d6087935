"""Mixed-criticality intra-UAV communication: wire codec, active DPR, links, HORUS, hub."""

from .crc import POLY_FRAME, POLY_POSITION, crc32_koopman
from .wire_codec import (
    GpsPositionObject,
    HorusProfile,
    ReportedPositionObject,
    decode_gps,
    decode_reported,
    encode_gps,
    encode_reported,
    parse_profile,
    serialize_profile,
)

__version__ = "0.1.0"

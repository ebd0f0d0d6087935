import enum


class Node(enum.IntEnum):
    """On-board functions that exchange data. Values are the wire IDs."""

    BASE_STATION = 0
    HORUS = 1
    FLIGHT_CONTROLLER = 2
    ACTIVE_LOAD = 3

    @classmethod
    def parse(cls, name) -> "Node":
        if isinstance(name, Node):
            return name
        key = str(name).replace("-", "_").upper()
        aliases = {
            "BASESTATION": "BASE_STATION",
            "FLIGHTCONTROLLER": "FLIGHT_CONTROLLER",
            "ACTIVELOAD": "ACTIVE_LOAD",
            "ACTIVE_HOLD": "ACTIVE_LOAD",
            "ACTIVEHOLD": "ACTIVE_LOAD",
        }
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown function {name!r}") from None

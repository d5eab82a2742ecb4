"""Exception hierarchy shared by every simulator layer."""


class SimError(Exception):
    """Base class for all simulator faults."""


class ParseError(SimError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class SequencingError(SimError):
    """An HWPE command was issued in a state that does not permit it."""


class MemoryFault(SimError):
    def __init__(self, message, address):
        self.address = address
        super().__init__(f"{message} (address {address:#010x})")


class RangeError(SimError, ValueError):
    def __init__(self, message, index=None):
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"{message}{where}")


class StructuralError(SimError, ValueError):
    """A packed container does not have the shape its mode requires."""


class DimensionError(SimError, ValueError):
    """An operator does not fit the array and must be tiled first."""


class ConfigError(SimError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""

"""Exception types shared across the engine."""


class PanstageError(Exception):
    """Base class for all engine errors."""


class DegenerateGeometry(PanstageError):
    """A direction is undefined (speaker/source on top of the listener)."""


class InvalidLayout(PanstageError):
    """A loudspeaker layout violates its structural constraints."""


class ConfigError(PanstageError):
    """A config file failed to parse; message carries the line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ParseError(PanstageError):
    """A control datagram failed to parse; ``offset`` is the byte offset."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownClip(PanstageError):
    """A trigger referenced a clip id that was never loaded."""


class UnknownSource(PanstageError):
    """An operation referenced a source id the scene does not define."""


class InsufficientDecay(PanstageError):
    """An impulse response does not decay enough for an RT fit."""

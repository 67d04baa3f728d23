"""Exception types shared across the package."""


class RobustRcpspError(Exception):
    """Base class for all library errors."""


class ParseError(RobustRcpspError):
    """Malformed instance input; carries the offending line and section."""

    def __init__(self, message, *, line=None, section=None):
        self.line = line
        self.section = section
        where = []
        if section is not None:
            where.append(f"section {section!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class CyclicGraphError(RobustRcpspError):
    """An arc set that must be acyclic contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__(f"directed cycle through nodes {list(self.cycle)}")


class CapExceeded(RobustRcpspError):
    """An exhaustive routine was refused because its size cap was exceeded."""


class InvalidHorizonError(RobustRcpspError):
    """A supplied horizon is smaller than the nominal critical path."""


class BridgeError(RobustRcpspError):
    """The external solver bridge failed to produce a usable solution file."""

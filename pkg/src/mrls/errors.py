"""Exception types shared across the package."""


class MrlsError(Exception):
    """Base class for all errors raised by this package."""


class InfeasibleSpec(MrlsError, ValueError):
    """Topology parameters cannot be realized."""


class GenerationStalled(MrlsError, RuntimeError):
    """The random wiring sampler could not produce a simple graph."""


class ParseError(MrlsError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class Disconnected(MrlsError, RuntimeError):
    def __init__(self, pair):
        self.pair = pair
        super().__init__(f"switches {pair[0]} and {pair[1]} are not connected")


class NoEndpoints(MrlsError, ValueError):
    pass


class InvalidK(MrlsError, ValueError):
    pass


class CornerEncountered(MrlsError, RuntimeError):
    def __init__(self, source, target, switch):
        self.triple = (source, target, switch)
        super().__init__(
            f"switch {switch} is a corner for source {source} and target {target}"
        )


class NotMultistage(MrlsError, ValueError):
    pass


class HopBoundExceeded(MrlsError, ValueError):
    pass


class DeadlockDetected(MrlsError, RuntimeError):
    def __init__(self, cycle, in_flight, trace_path=None):
        self.cycle = cycle
        self.in_flight = in_flight
        self.trace_path = trace_path
        msg = f"no flit moved before cycle {cycle} with {in_flight} packets in flight"
        if trace_path:
            msg += f" (trace: {trace_path})"
        super().__init__(msg)


class CreditUnderflow(MrlsError, RuntimeError):
    pass


class SaturatedAtLoad(MrlsError, RuntimeError):
    def __init__(self, offered, accepted, stats=None):
        self.offered = offered
        self.accepted = accepted
        self.stats = stats
        super().__init__(
            f"network saturated: accepted {accepted:.4f} of offered {offered:.4f}"
        )

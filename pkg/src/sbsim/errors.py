"""Exception types shared across the platform modules."""


class SimError(Exception):
    """Base class for all errors raised by this package."""


# -- transport ---------------------------------------------------------------

class NodeUnknown(SimError):
    pass


class AlreadyConnected(SimError):
    pass


class InvalidKind(SimError):
    pass


class Disconnected(SimError):
    pass


class SrcUnknown(SimError):
    pass


# -- scenario / world --------------------------------------------------------

class ParseError(SimError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(SimError):
    pass


class RoomUnknown(SimError):
    pass


class NotARelay(SimError):
    pass


# -- bus ---------------------------------------------------------------------

class DuplicateName(SimError):
    pass


# -- store -------------------------------------------------------------------

class OutOfOrder(SimError):
    pass


class NonFinite(SimError):
    pass


class SinkError(SimError):
    pass


class BadHeader(SimError):
    pass


class BadRow(SimError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# -- apps / gateway ----------------------------------------------------------

class VoteOutOfRange(SimError):
    pass


class NoData(SimError):
    pass

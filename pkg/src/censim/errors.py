"""Exception types shared across the protocol library and simulator."""


class ProtocolError(Exception):
    """Base class for all censim errors."""


class IntervalRangeError(ProtocolError):
    """A timestamp or interval index does not fit the 32-bit interval space."""


class AlignmentError(ProtocolError):
    """A day-start interval is not aligned to a day boundary."""


class WindowError(ProtocolError):
    """An interval falls outside the validity window of a key."""


class DomainError(ProtocolError):
    """A coordinate or parameter is outside its legal range."""


class UnsupportedRegionError(DomainError):
    """Location falls in the polar band where the grid projection is invalid."""


class FormatError(ProtocolError):
    """A byte string does not parse as the expected wire or file format."""


class DecryptError(ProtocolError):
    """Authenticated decryption failed: wrong key, wrong consent, or tampering."""


class StateError(ProtocolError):
    """A device operation was invoked in a state that cannot serve it."""


class RegistryError(ProtocolError):
    """A diagnosis-registry upload or revocation was rejected."""


class ScenarioError(ProtocolError):
    """Scenario validation failed; carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

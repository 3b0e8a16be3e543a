"""Exception hierarchy shared across the package."""


class ForgeLocError(Exception):
    """Base class for all package errors."""


class InputError(ForgeLocError, ValueError):
    """Bad user input: unreadable file, wrong shape, invalid parameter."""


class ProtocolError(ForgeLocError, RuntimeError):
    """An external scorer violated the file-exchange protocol."""


class ScorerError(ForgeLocError, RuntimeError):
    """A scorer failed while processing a specific patch or window."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index

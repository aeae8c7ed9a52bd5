"""Exception hierarchy shared across the package."""


class DiarlError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DiarlError, ValueError):
    """A configuration value is out of range or inconsistent."""


class InputError(DiarlError, ValueError):
    """Caller-supplied data is malformed (wrong shape, non-finite, bad format)."""


class StateError(DiarlError, RuntimeError):
    """An operation is invalid for the current internal state."""


class ProtocolError(DiarlError, RuntimeError):
    """Stream or wire protocol violated (out-of-order input, bad message)."""

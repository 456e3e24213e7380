"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes (see u3d.cli).
"""


class U3DError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(U3DError):
    """Invalid parameters, malformed inputs, or a violated invariant."""


class TensorFormatError(U3DError):
    """Corrupt or unreadable tensor container data."""


class BadMagic(TensorFormatError):
    """Stream does not start with the expected magic bytes."""


class Truncated(TensorFormatError):
    """Stream ended before the declared payload was complete."""


class ProtocolError(U3DError):
    """External extractor/oracle wire-protocol violation or timeout."""


class BudgetExhausted(U3DError):
    """A query would exceed the configured budget; fall back to the plain objective."""

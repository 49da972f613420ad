"""Exception types shared across the simulator."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration value (bad scheme name, vID overflow, odd region size, ...)."""


class TraceFormatError(ConfigError):
    """A trace artifact on disk is malformed or internally inconsistent.

    Kept distinct from plain ConfigError because a corrupted trace is a
    verification failure of the input data, not a usage mistake."""


class AddressError(ValueError):
    """Access outside the modeled physical address space."""


class AlignmentError(ValueError):
    """Physical address violates a required alignment."""


class TamperDetected(Exception):
    """An integrity check failed; the simulated run drops the access and locks.

    Attributes:
        reason: human-readable description of the failed check.
        addr: physical address of the offending access, when known.
        partial_stats: filled in by the simulation layer when a run aborts.
    """

    def __init__(self, reason: str, addr: int | None = None):
        super().__init__(reason if addr is None else f"{reason} (addr=0x{addr:x})")
        self.reason = reason
        self.addr = addr
        self.partial_stats = None


class SecurityInvariantFault(AssertionError):
    """Debug-mode check tripped: a counter value was reused or an unwritten/stale
    byte was read. Indicates a broken workload schedule, not an attack."""


class VerifyMismatch(Exception):
    """A replayed load returned plaintext that differs from the expected payload."""

    def __init__(self, message: str, event_index: int | None = None):
        super().__init__(message)
        self.event_index = event_index

"""CHERI-style capability values and their derivation algebra.

A capability is a fat reference carrying bounds, a cursor address, a
permission mask, and a validity tag.  Derivation is monotonic: bounds
and permissions can only shrink, and no operation ever sets the tag of
an untagged value.  Only tagged capabilities authorize memory access;
the access check itself lives here (``check_access``) so that the heap,
the allocators, and the attack probes all share one authority model.

Addresses are unsigned 32-bit byte offsets.  Bounds are exact by
default; an optional rounding mode pads large bounds to a power-of-two
alignment to mimic representability limits of compressed encodings.
"""

from __future__ import annotations

import enum
from typing import NamedTuple

__all__ = [
    "ADDRESS_MAX",
    "CapFault",
    "Capability",
    "FaultKind",
    "PERM_ALL",
    "PERM_NONE",
    "Perm",
    "make_root",
]

ADDRESS_MAX = (1 << 32) - 1

# Bounds rounding (opt-in) only applies above this length; the alignment
# grows with the requested length, leaving 8 bits of mantissa.
ROUNDING_THRESHOLD = 4096
ROUNDING_MANTISSA_BITS = 8


class Perm(enum.IntFlag):
    """Permission bits at fixed positions 0..5."""

    LOAD = 1 << 0
    STORE = 1 << 1
    LOAD_CAP = 1 << 2
    STORE_CAP = 1 << 3
    EXEC = 1 << 4
    GLOBAL = 1 << 5


PERM_ALL = Perm(0x3F)
PERM_NONE = Perm(0)


class FaultKind(enum.Enum):
    TAG_VIOLATION = "TagViolation"
    BOUNDS_VIOLATION = "BoundsViolation"
    PERMISSION_VIOLATION = "PermissionViolation"
    ALIGNMENT_VIOLATION = "AlignmentViolation"
    MONOTONICITY_VIOLATION = "MonotonicityViolation"


class CapFault(Exception):
    """A failed capability check.  ``kind`` is the machine-checkable part;
    the message is informative only."""

    def __init__(self, kind: FaultKind, detail: str = ""):
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)
        self.kind = kind
        self.detail = detail


class Capability(NamedTuple):
    """An immutable capability value.

    ``address`` is a roaming cursor: it may legally sit outside
    [base, top).  Out-of-bounds access only faults when the capability
    is actually used through ``check_access``.
    """

    tag: bool
    base: int
    top: int
    address: int
    perms: Perm

    @property
    def length(self) -> int:
        return self.top - self.base

    def set_bounds(self, new_base: int, length: int, *, rounding: bool = False) -> "Capability":
        """Derive a child narrowed to [new_base, new_base + length).

        The child's address starts at ``new_base`` and its permissions
        are inherited.  With ``rounding``, lengths above 4096 get their
        base rounded down and top rounded up to the representable
        alignment; a rounded range escaping the parent still faults.
        """
        if length < 0:
            raise ValueError("length must be non-negative")
        if not self.tag:
            raise CapFault(FaultKind.TAG_VIOLATION, "set_bounds on untagged capability")
        base = new_base
        top = new_base + length
        if rounding and length > ROUNDING_THRESHOLD:
            align = 1 << ((length - 1).bit_length() - ROUNDING_MANTISSA_BITS)
            base = (base // align) * align
            top = -(-top // align) * align
        if base < self.base or top > self.top:
            raise CapFault(
                FaultKind.MONOTONICITY_VIOLATION,
                f"[{base}, {top}) escapes parent [{self.base}, {self.top})",
            )
        return Capability(True, base, top, new_base, self.perms)

    def set_address(self, address: int) -> "Capability":
        """Copy with the cursor moved; bounds and tag are untouched."""
        if not 0 <= address <= ADDRESS_MAX:
            raise ValueError(f"address {address} outside 32-bit range")
        return self._replace(address=address)

    def and_perms(self, mask: Perm) -> "Capability":
        """Copy with permissions intersected with ``mask``."""
        return self._replace(perms=self.perms & mask)

    def clear_tag(self) -> "Capability":
        """Invalidated copy; idempotent."""
        return self._replace(tag=False)

    def check_access(self, addr: int, length: int, need: Perm) -> None:
        """Raise CapFault unless this capability authorizes an access of
        ``length`` bytes at ``addr`` with permissions ``need``.

        Fault priority when several checks fail: tag, then permission,
        then bounds.  Pure: never mutates the capability.
        """
        if length < 1:
            raise ValueError("access length must be at least 1")
        if not self.tag:
            raise CapFault(FaultKind.TAG_VIOLATION, "access through untagged capability")
        if (need & self.perms) != need:
            missing = need & ~(need & self.perms)
            raise CapFault(FaultKind.PERMISSION_VIOLATION, f"missing {missing!r}")
        if addr < self.base or addr + length > self.top:
            raise CapFault(
                FaultKind.BOUNDS_VIOLATION,
                f"[{addr}, {addr + length}) outside [{self.base}, {self.top})",
            )

    def describe(self) -> str:
        """Canonical one-line rendering, stable across runs (used by traces)."""
        return (
            f"cap(tag={int(self.tag)},base={self.base},top={self.top},"
            f"addr={self.address},perms={self.perms.value:#04x})"
        )


def make_root(heap_size: int) -> Capability:
    """The root capability over a heap of ``heap_size`` bytes: full range,
    all permissions, cursor at zero.  Everything else derives from it."""
    if heap_size <= 0:
        raise ValueError("heap size must be positive")
    if heap_size % 16 != 0:
        raise ValueError("heap size must be a multiple of 16")
    if heap_size > ADDRESS_MAX + 1 - 16:
        raise ValueError("heap size exceeds the 32-bit address space")
    return Capability(True, 0, heap_size, 0, PERM_ALL)

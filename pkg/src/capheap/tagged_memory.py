"""A flat simulated heap with one validity tag per 16-byte granule.

Every load and store is mediated by a capability check.  Capabilities
themselves can be stored in memory with a bit-exact 16-byte layout:

    bytes  0..3   base     (little-endian u32)
    bytes  4..7   top
    bytes  8..11  address
    byte   12     permission bitmask (bits 0..5)
    bytes 13..15  zero

A granule's tag is set only by ``store_cap`` with a tagged payload, and
any plain byte store touching the granule clears it again.  The heap
starts zeroed with all tags clear.
"""

from __future__ import annotations

import struct

from .capability import CapFault, Capability, FaultKind, Perm

__all__ = ["GRANULE", "TaggedHeap"]

GRANULE = 16

_CAP_LAYOUT = struct.Struct("<IIIB3x")
assert _CAP_LAYOUT.size == GRANULE


class TaggedHeap:
    """Single-owner mutable heap state.  One logical thread per heap;
    distinct heaps are independent."""

    def __init__(self, size: int):
        if size <= 0 or size % GRANULE != 0:
            raise ValueError("heap size must be a positive multiple of 16")
        self.size = size
        self.data = bytearray(size)
        self.tags = bytearray(size // GRANULE)

    def clear(self) -> None:
        """Re-zero all bytes and tags."""
        self.data = bytearray(self.size)
        self.tags = bytearray(self.size // GRANULE)

    def load(self, cap: Capability, addr: int, length: int) -> bytes:
        cap.check_access(addr, length, Perm.LOAD)
        return bytes(self.data[addr : addr + length])

    def store(self, cap: Capability, addr: int, payload: bytes) -> None:
        """Write bytes and clear the tag of every overlapped granule."""
        if not payload:
            raise ValueError("store payload must be non-empty")
        cap.check_access(addr, len(payload), Perm.STORE)
        self.data[addr : addr + len(payload)] = payload
        first = addr // GRANULE
        last = (addr + len(payload) - 1) // GRANULE
        self.tags[first : last + 1] = bytes(last + 1 - first)

    def store_cap(self, cap: Capability, addr: int, payload: Capability) -> None:
        """Serialize ``payload`` into one granule; the granule tag becomes
        the payload's tag.  Alignment is checked before authority."""
        if addr % GRANULE != 0:
            raise CapFault(FaultKind.ALIGNMENT_VIOLATION, f"store_cap at {addr}")
        cap.check_access(addr, GRANULE, Perm.STORE | Perm.STORE_CAP)
        self.data[addr : addr + GRANULE] = _CAP_LAYOUT.pack(
            payload.base, payload.top, payload.address, payload.perms.value
        )
        self.tags[addr // GRANULE] = 1 if payload.tag else 0

    def load_cap(self, cap: Capability, addr: int) -> Capability:
        """Deserialize one granule; the result's tag is the granule tag,
        so anything clobbered by byte stores comes back untagged."""
        if addr % GRANULE != 0:
            raise CapFault(FaultKind.ALIGNMENT_VIOLATION, f"load_cap at {addr}")
        cap.check_access(addr, GRANULE, Perm.LOAD | Perm.LOAD_CAP)
        base, top, address, perm_bits = _CAP_LAYOUT.unpack(
            bytes(self.data[addr : addr + GRANULE])
        )
        tag = bool(self.tags[addr // GRANULE])
        return Capability(tag, base, top, address, Perm(perm_bits & 0x3F))

    def snapshot(self) -> bytes:
        """Raw dump: all data bytes followed by the tag bitmap (one bit per
        granule, LSB first within each byte)."""
        bitmap = bytearray((len(self.tags) + 7) // 8)
        for i, t in enumerate(self.tags):
            if t:
                bitmap[i // 8] |= 1 << (i % 8)
        return bytes(self.data) + bytes(bitmap)

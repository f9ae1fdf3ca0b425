"""The pluggable allocator contract: traits, errors, and the base class.

An allocator binds to one TaggedHeap and hands out tagged capabilities
derived from its region (root) capability.  The static traits record
describes behavior the attack harness consults when deciding whether a
probe even applies.
"""

from __future__ import annotations

import abc
import enum
from dataclasses import dataclass

from .capability import PERM_ALL, Capability, Perm, make_root
from .tagged_memory import TaggedHeap

__all__ = [
    "AllocError",
    "AllocErrorKind",
    "Allocator",
    "AllocatorTraits",
    "FreeValidation",
]


class FreeValidation(enum.Enum):
    """How free() decides whether to honor a request."""

    NONE = "None"                       # accepts anything silently
    INLINE_HEADER = "InlineHeader"      # reads a header through the client's capability
    METADATA_LOOKUP = "MetadataLookup"  # out-of-band metadata keyed by address
    ALLOC_LOG = "AllocLog"              # record of live allocations


@dataclass(frozen=True)
class AllocatorTraits:
    name: str
    narrow_bounds: bool
    deferred_free: bool
    strips_exec: bool
    free_validation: FreeValidation
    double_free_detect: bool
    realloc_grows_in_place: bool


class AllocErrorKind(enum.Enum):
    OUT_OF_MEMORY = "OutOfMemory"
    INVALID_FREE = "InvalidFree"
    DOUBLE_FREE = "DoubleFree"
    BAD_REQUEST = "BadRequest"


class AllocError(Exception):
    def __init__(self, kind: AllocErrorKind, detail: str = ""):
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)
        self.kind = kind
        self.detail = detail


def round16(n: int) -> int:
    """Round up to the 16-byte granule."""
    return (n + 15) & ~15


class Allocator(abc.ABC):
    """Behavioral contract shared by all engines.

    One instance binds to one heap and one logical thread.  Placement is
    a pure function of the operation sequence: no randomness, no clocks,
    so identical op sequences on fresh instances yield identical
    capabilities.
    """

    def __init__(self, heap: TaggedHeap, traits: AllocatorTraits, *, rounding_bounds: bool = False):
        self.heap = heap
        self._traits = traits
        self._rounding = rounding_bounds
        self.region: Capability = make_root(heap.size)

    def traits(self) -> AllocatorTraits:
        return self._traits

    def reset(self) -> None:
        """Back to the initial state over a freshly zeroed heap."""
        self.heap.clear()
        self._reset_state()

    @abc.abstractmethod
    def malloc(self, size: int) -> Capability:
        """Return a tagged capability for at least ``size`` bytes of
        LOAD+STORE authority.  Raises AllocError on failure."""

    @abc.abstractmethod
    def free(self, cap: Capability) -> None:
        """Engine-specific deallocation; validation per traits.  May raise
        AllocError or propagate a CapFault from a tampered capability."""

    @abc.abstractmethod
    def realloc(self, cap: Capability, new_size: int) -> Capability:
        """Resize, preserving the first min(old, new) bytes."""

    @abc.abstractmethod
    def _reset_state(self) -> None:
        ...

    # Shared derivation helpers.  Client capabilities always descend from
    # the region capability; internal bookkeeping I/O goes straight
    # through the region capability itself.

    def _client_perms(self) -> Perm:
        if self._traits.strips_exec:
            return PERM_ALL & ~Perm.EXEC
        return PERM_ALL

    def _client_cap(self, base: int, length: int, address: int | None = None) -> Capability:
        cap = self.region.set_bounds(base, length, rounding=self._rounding)
        if address is not None and address != base:
            cap = cap.set_address(address)
        return cap.and_perms(self._client_perms())

    def _check_request(self, size: int) -> None:
        if not isinstance(size, int) or size < 1:
            raise AllocError(AllocErrorKind.BAD_REQUEST, f"size {size!r}")

"""Three allocation engines behind the seven reference configurations.

* bump: a cursor that only moves forward; memory is never reused.
* free list: first-fit chunks with an inline 8-byte header before each
  payload; freeing validates by reading that header through the
  client's own capability.
* slab: power-of-two size classes, 4096-byte slabs, out-of-band
  metadata keyed by address; optionally defers frees.

The free-list chunk header, bit-exact:

    bytes 0..3  payload size (little-endian u32)
    bytes 4..5  magic 0xCA1B
    byte  6     status (0 free, 1 live)
    byte  7     zero

Chunks tile the managed region with no gaps: region size is exactly the
sum of (header + payload) sizes.  Payloads therefore sit 8 bytes past a
16-aligned chunk start; payload sizes are multiples of 16.

The free list itself is kept out of band (a list of chunk offsets)
rather than threaded through chunk payloads: freeing deliberately
leaves payload bytes untouched, which is part of the threat model these
engines exist to exhibit.
"""

from __future__ import annotations

import struct

from .allocator_api import (
    AllocError,
    AllocErrorKind,
    Allocator,
    AllocatorTraits,
    FreeValidation,
    round16,
)
from .capability import CapFault, Capability, FaultKind
from .tagged_memory import TaggedHeap

__all__ = [
    "BumpAllocator",
    "CHUNK_HEADER_SIZE",
    "CHUNK_MAGIC",
    "FreeListAllocator",
    "SLAB_SIZE",
    "SIZE_CLASSES",
    "SlabAllocator",
]

CHUNK_HEADER_SIZE = 8
CHUNK_MAGIC = 0xCA1B
_HEADER = struct.Struct("<IHBB")  # payload size, magic, status, reserved
assert _HEADER.size == CHUNK_HEADER_SIZE

_STATUS_FREE = 0
_STATUS_LIVE = 1

SLAB_SIZE = 4096
SIZE_CLASSES = (16, 32, 64, 128, 256, 512, 1024, 2048, 4096)


class BumpAllocator(Allocator):
    """Bump-the-pointer: allocate by advancing a cursor, never reuse.

    free() is a no-op unless the config keeps an allocation log, in
    which case it marks the matching record freed and detects double
    and invalid frees.  realloc always allocates fresh and copies.
    """

    def __init__(self, heap: TaggedHeap, traits: AllocatorTraits, *, rounding_bounds: bool = False):
        super().__init__(heap, traits, rounding_bounds=rounding_bounds)
        self._keeps_log = traits.free_validation is FreeValidation.ALLOC_LOG
        self._reset_state()

    def _reset_state(self) -> None:
        self._cursor = 0
        # base -> [length, freed]; bump never reuses a base, so keys are unique
        self._log: dict[int, list] = {}

    def malloc(self, size: int) -> Capability:
        self._check_request(size)
        length = round16(size)
        if self._cursor + length > self.heap.size:
            raise AllocError(AllocErrorKind.OUT_OF_MEMORY, f"cursor at {self._cursor}")
        start = self._cursor
        self._cursor += length
        if self._keeps_log:
            self._log[start] = [length, False]
        if self._traits.narrow_bounds:
            return self._client_cap(start, length)
        # whole-region capability, cursor parked at the block start
        return self.region.and_perms(self._client_perms()).set_address(start)

    def free(self, cap: Capability) -> None:
        if not self._keeps_log:
            return
        record = self._log.get(cap.address)
        if record is None:
            raise AllocError(AllocErrorKind.INVALID_FREE, f"no allocation at {cap.address}")
        if record[1]:
            raise AllocError(AllocErrorKind.DOUBLE_FREE, f"block {cap.address} already freed")
        record[1] = True

    def realloc(self, cap: Capability, new_size: int) -> Capability:
        self._check_request(new_size)
        if self._keeps_log:
            record = self._log.get(cap.address)
            if record is None:
                raise AllocError(AllocErrorKind.INVALID_FREE, f"no allocation at {cap.address}")
            if record[1]:
                raise AllocError(AllocErrorKind.DOUBLE_FREE, f"block {cap.address} already freed")
            old_len = record[0]
        else:
            old_len = cap.length
        new_cap = self.malloc(new_size)
        ncopy = min(old_len, new_size)
        if ncopy:
            data = self.heap.load(self.region, cap.address, ncopy)
            self.heap.store(self.region, new_cap.address, data)
        # fresh cursor memory is already zero; no tail zeroing needed
        self.free(cap)
        return new_cap


class FreeListAllocator(Allocator):
    """First-fit over free chunks with inline headers.

    Client capabilities span the whole chunk (header included) with the
    cursor on the payload: free() re-reads the header at address-8
    through the client's capability, so an untampered capability passes
    while one narrowed to the payload faults.  Re-freeing a free chunk
    silently relinks; there is no double-free detection.  No coalescing
    happens except explicit realloc absorption.
    """

    def __init__(self, heap: TaggedHeap, traits: AllocatorTraits, *, rounding_bounds: bool = False):
        super().__init__(heap, traits, rounding_bounds=rounding_bounds)
        self._reset_state()

    def _reset_state(self) -> None:
        first_payload = self.heap.size - CHUNK_HEADER_SIZE
        self._write_header(0, first_payload, _STATUS_FREE)
        self._free_list: list[int] = [0]

    # header I/O goes through the region capability (engine authority)

    def _write_header(self, chunk: int, payload_size: int, status: int) -> None:
        self.heap.store(
            self.region, chunk, _HEADER.pack(payload_size, CHUNK_MAGIC, status, 0)
        )

    def _read_header(self, chunk: int) -> tuple[int, int, int]:
        raw = self.heap.load(self.region, chunk, CHUNK_HEADER_SIZE)
        size, magic, status, _ = _HEADER.unpack(raw)
        return size, magic, status

    def _client_header(self, cap: Capability) -> tuple[int, int]:
        """Validate a client capability by reading the chunk header through
        it, exactly as the client could.  Returns (chunk offset, payload
        size); raises CapFault on tamper, AllocError on a bad header."""
        if cap.address < CHUNK_HEADER_SIZE:
            raise CapFault(FaultKind.BOUNDS_VIOLATION, "header would sit below the heap")
        header_cap = cap.set_address(cap.address - CHUNK_HEADER_SIZE)
        raw = self.heap.load(header_cap, header_cap.address, CHUNK_HEADER_SIZE)
        size, magic, status, _ = _HEADER.unpack(raw)
        if magic != CHUNK_MAGIC:
            raise AllocError(AllocErrorKind.INVALID_FREE, f"bad chunk magic at {cap.address - 8}")
        return cap.address - CHUNK_HEADER_SIZE, size

    def _chunk_cap(self, chunk: int, payload_size: int) -> Capability:
        return self._client_cap(
            chunk, CHUNK_HEADER_SIZE + payload_size, address=chunk + CHUNK_HEADER_SIZE
        )

    def malloc(self, size: int) -> Capability:
        self._check_request(size)
        want = round16(size)
        for slot, chunk in enumerate(self._free_list):
            payload, magic, _ = self._read_header(chunk)
            assert magic == CHUNK_MAGIC, "free list points at a corrupt header"
            if payload < want:
                continue
            if payload >= want + 32:
                # split: keep `want`, the remainder becomes a new free chunk
                rest = chunk + CHUNK_HEADER_SIZE + want
                self._write_header(rest, payload - want - CHUNK_HEADER_SIZE, _STATUS_FREE)
                self._free_list[slot] = rest
                payload = want
            else:
                del self._free_list[slot]
            self._write_header(chunk, payload, _STATUS_LIVE)
            return self._chunk_cap(chunk, payload)
        raise AllocError(AllocErrorKind.OUT_OF_MEMORY, f"no free chunk holds {want} bytes")

    def free(self, cap: Capability) -> None:
        chunk, payload = self._client_header(cap)
        self._write_header(chunk, payload, _STATUS_FREE)
        # silent relink: a second free of the same chunk just moves it
        if chunk in self._free_list:
            self._free_list.remove(chunk)
        self._free_list.insert(0, chunk)

    def _free_chunk(self, chunk: int, payload: int) -> None:
        """Internal free path (realloc moves); no client validation."""
        self._write_header(chunk, payload, _STATUS_FREE)
        self._free_list.insert(0, chunk)

    def realloc(self, cap: Capability, new_size: int) -> Capability:
        self._check_request(new_size)
        chunk, payload = self._client_header(cap)
        want = round16(new_size)
        if want <= payload:
            return self._chunk_cap(chunk, payload)
        if self._traits.realloc_grows_in_place:
            grown = self._try_absorb(chunk, payload, want)
            if grown is not None:
                return self._chunk_cap(chunk, grown)
        # move: allocate fresh, copy, zero the tail, release the old chunk
        new_cap = self.malloc(new_size)
        ncopy = min(payload, new_size)
        data = self.heap.load(self.region, cap.address, ncopy)
        self.heap.store(self.region, new_cap.address, data)
        if new_size > ncopy:
            self.heap.store(self.region, new_cap.address + ncopy, bytes(new_size - ncopy))
        self._free_chunk(chunk, payload)
        return new_cap

    def _try_absorb(self, chunk: int, payload: int, want: int) -> int | None:
        """Absorb physically-following free chunks until the payload covers
        ``want`` bytes.  Scans first, commits only on success; absorbed
        bytes (stale data and old headers) are left as they are."""
        span = payload
        absorbed = []
        while span < want:
            nxt = chunk + CHUNK_HEADER_SIZE + span
            if nxt + CHUNK_HEADER_SIZE > self.heap.size:
                return None
            nxt_payload, magic, status = self._read_header(nxt)
            if magic != CHUNK_MAGIC or status != _STATUS_FREE:
                return None
            absorbed.append(nxt)
            span += CHUNK_HEADER_SIZE + nxt_payload
        for off in absorbed:
            self._free_list.remove(off)
        if span >= want + 32:
            rest = chunk + CHUNK_HEADER_SIZE + want
            self._write_header(rest, span - want - CHUNK_HEADER_SIZE, _STATUS_FREE)
            self._free_list.insert(0, rest)
            span = want
        self._write_header(chunk, span, _STATUS_LIVE)
        return span

    def chunks(self) -> list[tuple[int, int, int]]:
        """Walk the heap by headers: (offset, payload size, status) per
        chunk.  Used by tiling checks and the heap dump tooling."""
        out = []
        off = 0
        while off < self.heap.size:
            size, magic, status = self._read_header(off)
            assert magic == CHUNK_MAGIC, f"tiling broken at {off}"
            out.append((off, size, status))
            off += CHUNK_HEADER_SIZE + size
        return out


class SlabAllocator(Allocator):
    """Size-class slabs with metadata kept out of band.

    free() maps the capability's address to (slab, slot) without ever
    dereferencing through it, so narrowed capabilities are accepted.
    Clearing an already-clear slot bit is silent; only addresses outside
    every carved slab are invalid.  With deferred_free, frees queue up
    and are applied when the next malloc or realloc begins.
    """

    def __init__(self, heap: TaggedHeap, traits: AllocatorTraits, *, rounding_bounds: bool = False):
        super().__init__(heap, traits, rounding_bounds=rounding_bounds)
        self._reset_state()

    def _reset_state(self) -> None:
        self._slab_cursor = 0
        self._slabs: list[dict] = []  # {offset, cls, bits: list[bool]}
        self._by_class: dict[int, list[int]] = {}
        self._live: dict[int, tuple[int, int, int, int]] = {}  # addr -> (slab, slot, nslots, size)
        self._pending: list[int] = []

    @staticmethod
    def size_class(size: int) -> int:
        for cls in SIZE_CLASSES:
            if size <= cls:
                return cls
        raise AllocError(AllocErrorKind.OUT_OF_MEMORY, f"{size} exceeds the largest size class")

    def _flush_pending(self) -> None:
        if not self._pending:
            return
        pending, self._pending = self._pending, []
        for addr in pending:
            self._apply_free(addr, strict=False)

    def _carve_slab(self, cls: int) -> int:
        if self._slab_cursor + SLAB_SIZE > self.heap.size:
            raise AllocError(AllocErrorKind.OUT_OF_MEMORY, "no room for another slab")
        offset = self._slab_cursor
        self._slab_cursor += SLAB_SIZE
        self._slabs.append({"offset": offset, "cls": cls, "bits": [False] * (SLAB_SIZE // cls)})
        self._by_class.setdefault(cls, []).append(len(self._slabs) - 1)
        return len(self._slabs) - 1

    def malloc(self, size: int) -> Capability:
        self._check_request(size)
        if self._traits.deferred_free:
            self._flush_pending()
        cls = self.size_class(size)
        for idx in self._by_class.get(cls, []):
            bits = self._slabs[idx]["bits"]
            for slot, taken in enumerate(bits):
                if not taken:
                    return self._take(idx, slot, 1, size)
        idx = self._carve_slab(cls)
        return self._take(idx, 0, 1, size)

    def _take(self, idx: int, slot: int, nslots: int, size: int) -> Capability:
        slab = self._slabs[idx]
        for s in range(slot, slot + nslots):
            slab["bits"][s] = True
        addr = slab["offset"] + slot * slab["cls"]
        self._live[addr] = (idx, slot, nslots, size)
        return self._client_cap(addr, nslots * slab["cls"])

    def _slot_base(self, addr: int) -> tuple[int, int] | None:
        """Map an address to (slab index, slot base address), or None when
        it falls outside every carved slab."""
        if not 0 <= addr < self._slab_cursor:
            return None
        idx = None
        for i, slab in enumerate(self._slabs):
            if slab["offset"] <= addr < slab["offset"] + SLAB_SIZE:
                idx = i
                break
        if idx is None:
            return None
        slab = self._slabs[idx]
        slot = (addr - slab["offset"]) // slab["cls"]
        return idx, slab["offset"] + slot * slab["cls"]

    def _apply_free(self, addr: int, *, strict: bool) -> None:
        mapped = self._slot_base(addr)
        if mapped is None:
            if strict:
                raise AllocError(AllocErrorKind.INVALID_FREE, f"{addr} maps outside any slab")
            return
        idx, base = mapped
        record = self._live.pop(base, None)
        if record is None:
            # re-clearing a clear bit is silent
            slot = (base - self._slabs[idx]["offset"]) // self._slabs[idx]["cls"]
            self._slabs[idx]["bits"][slot] = False
            return
        _, slot, nslots, _ = record
        for s in range(slot, slot + nslots):
            self._slabs[idx]["bits"][s] = False

    def free(self, cap: Capability) -> None:
        if self._traits.deferred_free:
            self._pending.append(cap.address)
            return
        self._apply_free(cap.address, strict=True)

    def realloc(self, cap: Capability, new_size: int) -> Capability:
        self._check_request(new_size)
        if self._traits.deferred_free:
            self._flush_pending()
        record = self._live.get(cap.address)
        if record is None:
            raise AllocError(AllocErrorKind.INVALID_FREE, f"no allocation at {cap.address}")
        idx, slot, nslots, _ = record
        slab = self._slabs[idx]
        cls = slab["cls"]
        current = nslots * cls
        if new_size <= current:
            self._live[cap.address] = (idx, slot, nslots, new_size)
            return self._client_cap(cap.address, current)
        if self._traits.realloc_grows_in_place:
            need = -(-new_size // cls)
            if slot + need <= len(slab["bits"]) and not any(
                slab["bits"][slot + nslots : slot + need]
            ):
                return self._take(idx, slot, need, new_size)
        # move: fresh slot in the right class, copy, zero the tail
        new_cap = self.malloc(new_size)
        data = self.heap.load(self.region, cap.address, current)
        self.heap.store(self.region, new_cap.address, data)
        if new_size > current:
            self.heap.store(self.region, new_cap.address + current, bytes(new_size - current))
        self._apply_free(cap.address, strict=False)
        return new_cap

    def occupancy(self, addr: int) -> bool:
        """Slot bit for the slot containing ``addr`` (introspection)."""
        mapped = self._slot_base(addr)
        if mapped is None:
            raise ValueError(f"{addr} outside carved slabs")
        idx, base = mapped
        slab = self._slabs[idx]
        return slab["bits"][(base - slab["offset"]) // slab["cls"]]

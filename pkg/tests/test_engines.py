from bisect import bisect_left, insort
import random

import pytest

from capheap.allocator_api import AllocError, AllocErrorKind, round16
from capheap.capability import CapFault, FaultKind, Perm
from capheap.engines import (
    CHUNK_HEADER_SIZE,
    CHUNK_MAGIC,
    SIZE_CLASSES,
    SLAB_SIZE,
    SlabAllocator,
)
from capheap.registry import ALLOCATOR_NAMES, TRAITS, create


def region_size(alloc):
    return alloc.region.top - alloc.region.base


class TestBumpEngine:
    def test_cursor_arithmetic_matches_oracle(self):
        # oracle: blocks sit at cumulative sums of granule-rounded sizes
        sizes = [16, 16, 24, 100, 1]
        alloc = create("bump-alloc-cheri")
        expected_starts = []
        cursor = 0
        for s in sizes:
            expected_starts.append(cursor)
            cursor += round16(s)
        got = [alloc.malloc(s).address for s in sizes]
        assert got == expected_starts

    def test_two_mallocs_of_16(self):
        alloc = create("bump-alloc-cheri")
        assert alloc.malloc(16).address == 0
        assert alloc.malloc(16).address == 16

    def test_narrowed_bounds_round_to_granule(self):
        cap = create("bump-alloc-cheri").malloc(24)
        assert cap.top - cap.base == round16(24) == 32

    def test_nocheri_returns_whole_region_bounds(self):
        alloc = create("bump-alloc-nocheri")
        cap = alloc.malloc(24)
        assert (cap.base, cap.top) == (alloc.region.base, alloc.region.top)
        assert cap.address == 0
        assert alloc.malloc(24).address == 32

    def test_cheri_free_is_noop_and_undetected(self):
        alloc = create("bump-alloc-cheri")
        p = alloc.malloc(32)
        alloc.free(p)
        alloc.free(p)  # no log, no detection

    def test_alloc_log_detects_double_free(self):
        # oracle: replay the log by hand
        alloc = create("bump-alloc-nocheri")
        p = alloc.malloc(48)
        alloc.free(p)
        with pytest.raises(AllocError) as exc:
            alloc.free(p)
        assert exc.value.kind is AllocErrorKind.DOUBLE_FREE

    def test_alloc_log_rejects_unknown_address(self):
        alloc = create("bump-alloc-nocheri")
        p = alloc.malloc(48)
        with pytest.raises(AllocError) as exc:
            alloc.free(p.set_address(999))
        assert exc.value.kind is AllocErrorKind.INVALID_FREE

    def test_out_of_memory(self):
        alloc = create("bump-alloc-cheri", heap_size=64)
        alloc.malloc(64)
        with pytest.raises(AllocError) as exc:
            alloc.malloc(1)
        assert exc.value.kind is AllocErrorKind.OUT_OF_MEMORY

    def test_realloc_moves_to_fresh_zero_memory(self):
        alloc = create("bump-alloc-cheri")
        p = alloc.malloc(32)
        alloc.heap.store(p, p.address, b"\x5a" * 32)
        q = alloc.realloc(p, 128)
        assert q.address > p.address
        assert alloc.heap.load(q, q.address, 32) == b"\x5a" * 32
        assert alloc.heap.load(q, q.address + 32, 96) == bytes(96)

    def test_malloc_zero_is_bad_request(self):
        with pytest.raises(AllocError) as exc:
            create("bump-alloc-cheri").malloc(0)
        assert exc.value.kind is AllocErrorKind.BAD_REQUEST


class TestFreeListEngine:
    def test_client_bounds_cover_header_and_payload(self):
        cap = create("dlmalloc-cheribuild").malloc(24)
        assert cap.address == cap.base + CHUNK_HEADER_SIZE
        assert cap.top - cap.address == round16(24)

    def test_free_with_narrowed_capability_faults(self):
        # oracle: header sits at address-8, below the narrowed base
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(64)
        narrowed = p.set_bounds(p.address, 16)
        assert narrowed.base == p.address  # so address-8 must fault
        with pytest.raises(CapFault) as exc:
            alloc.free(narrowed)
        assert exc.value.kind is FaultKind.BOUNDS_VIOLATION

    def test_free_with_intact_capability_succeeds(self):
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(64)
        alloc.free(p)

    def test_refreeing_silently_relinks(self):
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(64)
        alloc.free(p)
        alloc.free(p)  # no DoubleFree by design

    def test_free_with_bad_magic_is_invalid(self):
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(64)
        with pytest.raises(AllocError) as exc:
            alloc.free(p.set_address(p.address + 16))
        assert exc.value.kind is AllocErrorKind.INVALID_FREE

    def test_header_layout_bit_exact(self):
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(40)
        raw = alloc.heap.load(alloc.region, p.base, 8)
        assert int.from_bytes(raw[0:4], "little") == round16(40)
        assert int.from_bytes(raw[4:6], "little") == CHUNK_MAGIC
        assert raw[6] == 1  # live
        assert raw[7] == 0

    def test_chunks_tile_the_region(self):
        # oracle: sum of (header + payload) must equal the region size
        alloc = create("dlmalloc-cheribuild")
        caps = [alloc.malloc(s) for s in (16, 40, 64, 100)]
        alloc.free(caps[1])
        alloc.realloc(caps[2], 200)
        chunks = alloc.chunks()
        assert sum(CHUNK_HEADER_SIZE + size for _, size, _ in chunks) == region_size(alloc)

    def test_first_fit_reuses_freed_chunk(self):
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(32)
        alloc.malloc(32)
        alloc.free(p)
        q = alloc.malloc(32)
        assert q.address == p.address

    def test_split_threshold(self):
        # a freed 32-byte chunk is reused whole for a 16-byte request:
        # the 24-byte leftover is below the 32-byte split threshold
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(32)
        alloc.malloc(32)
        alloc.free(p)
        q = alloc.malloc(16)
        assert q.address == p.address
        assert q.top - q.address == 32

    def test_inplace_realloc_exposes_stale_neighbor_bytes(self):
        # oracle: plant a sentinel, free, grow over it, byte-compare
        alloc = create("libmalloc-simple")
        p = alloc.malloc(32)
        q = alloc.malloc(32)
        alloc.heap.store(q, q.address, b"\xab" * 32)
        alloc.free(q)
        widened = alloc.realloc(p, 96)
        assert widened.address == p.address  # grew in place
        assert alloc.heap.load(widened, q.address, 32) == b"\xab" * 32

    def test_moving_realloc_zeroes_the_tail(self):
        alloc = create("dlmalloc-cheribuild")
        p = alloc.malloc(32)
        q = alloc.malloc(32)
        alloc.heap.store(q, q.address, b"\xab" * 32)
        alloc.free(q)
        moved = alloc.realloc(p, 96)
        assert moved.address != p.address
        assert alloc.heap.load(moved, moved.address + 32, 64) == bytes(64)

    def test_realloc_same_size_preserves_contents(self):
        alloc = create("jemalloc")
        p = alloc.malloc(48)
        alloc.heap.store(p, p.address, bytes(range(48)))
        q = alloc.realloc(p, 48)
        assert alloc.heap.load(q, q.address, 48) == bytes(range(48))

    def test_out_of_memory(self):
        alloc = create("dlmalloc-cheribuild", heap_size=128)
        alloc.malloc(64)
        with pytest.raises(AllocError) as exc:
            alloc.malloc(64)
        assert exc.value.kind is AllocErrorKind.OUT_OF_MEMORY


class TestSlabEngine:
    def test_class_rounding_matches_oracle(self):
        # oracle: smallest class at least the request
        alloc = create("snmalloc-repo")
        for size in (1, 16, 17, 24, 32, 100, 2049, 4096):
            expected = min(c for c in SIZE_CLASSES if c >= size)
            assert SlabAllocator.size_class(size) == expected
            cap = alloc.malloc(size)
            assert cap.top - cap.base == expected

    def test_oversized_request_is_out_of_memory(self):
        with pytest.raises(AllocError) as exc:
            create("snmalloc-repo").malloc(4097)
        assert exc.value.kind is AllocErrorKind.OUT_OF_MEMORY

    def test_slots_fill_lowest_first(self):
        alloc = create("snmalloc-repo")
        a = alloc.malloc(24)
        b = alloc.malloc(24)
        assert (a.address, b.address) == (0, 32)
        alloc.free(a)
        c = alloc.malloc(24)
        assert c.address == 0

    def test_distinct_classes_use_distinct_slabs(self):
        alloc = create("snmalloc-repo")
        a = alloc.malloc(24)
        b = alloc.malloc(100)
        assert b.address == SLAB_SIZE
        assert a.address // SLAB_SIZE != b.address // SLAB_SIZE

    def test_free_accepts_narrowed_capability(self):
        # metadata is keyed by address, never dereferenced through the cap
        alloc = create("snmalloc-repo")
        p = alloc.malloc(64)
        alloc.free(p.set_bounds(p.address, 16))
        assert not alloc.occupancy(p.address)

    def test_free_outside_any_slab_is_invalid(self):
        alloc = create("snmalloc-repo")
        p = alloc.malloc(64)
        with pytest.raises(AllocError) as exc:
            alloc.free(p.set_address(SLAB_SIZE * 10))
        assert exc.value.kind is AllocErrorKind.INVALID_FREE

    def test_double_free_is_silent(self):
        alloc = create("snmalloc-repo")
        p = alloc.malloc(48)
        alloc.free(p)
        alloc.free(p)  # re-clearing a clear bit

    def test_deferred_free_applies_at_next_malloc(self):
        # oracle: replay the queue by hand against the occupancy bitmap;
        # the next malloc goes to another class so the slot stays empty
        alloc = create("snmalloc-cheribuild")
        p = alloc.malloc(32)
        alloc.free(p)
        assert alloc.occupancy(p.address)  # still set: free is queued
        alloc.malloc(100)
        assert not alloc.occupancy(p.address)  # queue flushed first

    def test_deferred_flush_lets_malloc_reuse_the_slot(self):
        alloc = create("snmalloc-cheribuild")
        p = alloc.malloc(32)
        alloc.free(p)
        q = alloc.malloc(32)
        assert q.address == p.address

    def test_inplace_growth_over_free_slots(self):
        alloc = create("snmalloc-repo")
        p = alloc.malloc(32)
        v = alloc.malloc(32)
        alloc.heap.store(v, v.address, b"\xab" * 32)
        alloc.free(v)
        q = alloc.realloc(p, 128)
        assert q.address == p.address
        assert q.top - q.base == 128
        assert alloc.heap.load(q, v.address, 32) == b"\xab" * 32

    def test_blocked_growth_moves_and_zeroes(self):
        alloc = create("snmalloc-repo")
        p = alloc.malloc(32)
        blocker = alloc.malloc(32)
        q = alloc.realloc(p, 128)
        assert q.address != p.address
        assert q.address != blocker.address
        assert alloc.heap.load(q, q.address + 32, 96) == bytes(96)


class TestContractAcrossAllEngines:
    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_malloc_returns_tagged_capability_with_load_store(self, name):
        alloc = create(name)
        cap = alloc.malloc(40)
        assert cap.tag
        cap.check_access(cap.address, 40, Perm.LOAD | Perm.STORE)
        assert alloc.region.base <= cap.base and cap.top <= alloc.region.top

    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_exec_stripping_matches_traits(self, name):
        cap = create(name).malloc(32)
        assert bool(cap.perms & Perm.EXEC) == (not TRAITS[name].strips_exec)

    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_malloc_zero_is_bad_request(self, name):
        with pytest.raises(AllocError) as exc:
            create(name).malloc(0)
        assert exc.value.kind is AllocErrorKind.BAD_REQUEST

    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_reset_reproduces_fresh_instance(self, name):
        fresh_alloc = create(name)
        fresh = [fresh_alloc.malloc(s) for s in (24, 64)]
        alloc = create(name)
        alloc.malloc(48)
        alloc.reset()
        again = [alloc.malloc(s) for s in (24, 64)]
        assert again == fresh

    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_reset_is_idempotent_and_keeps_traits(self, name):
        alloc = create(name)
        before = alloc.traits()
        alloc.malloc(32)
        alloc.reset()
        one = alloc.malloc(16)
        alloc.reset()
        alloc.reset()
        assert alloc.malloc(16) == one
        assert alloc.traits() == before

    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_deterministic_sequences(self, name):
        def run():
            alloc = create(name)
            caps = [alloc.malloc(s) for s in (16, 48, 32, 128, 24)]
            alloc.free(caps[1])
            caps.append(alloc.realloc(caps[2], 80))
            caps.append(alloc.malloc(40))
            return caps

        assert run() == run()

    @pytest.mark.parametrize("name", ALLOCATOR_NAMES)
    def test_realloc_preserves_prefix(self, name):
        alloc = create(name)
        p = alloc.malloc(32)
        alloc.heap.store(p, p.address, bytes(range(32)))
        q = alloc.realloc(p, 200)
        assert alloc.heap.load(q, q.address, 32) == bytes(range(32))


class TestRoundingBoundsMode:
    def test_large_bounds_get_padded(self):
        alloc = create("bump-alloc-cheri", rounding_bounds=True)
        alloc.malloc(16)  # move the cursor off zero
        cap = alloc.malloc(5000)
        # alignment for 5008 rounded: 32; base 16 rounds down, top rounds up
        assert cap.address == 16
        assert cap.base == 0
        assert cap.top % 32 == 0 and cap.top >= 16 + 5000

    def test_small_bounds_stay_exact(self):
        alloc = create("bump-alloc-cheri", rounding_bounds=True)
        cap = alloc.malloc(24)
        assert (cap.base, cap.top) == (0, 32)

    def test_mode_never_escapes_the_region(self):
        alloc = create("snmalloc-repo", rounding_bounds=True)
        cap = alloc.malloc(4096)
        assert alloc.region.base <= cap.base and cap.top <= alloc.region.top


def test_create_rejects_unknown_name():
    with pytest.raises(ValueError):
        create("tcmalloc")


class LiveIntervals:
    """Sorted interval set: the disjointness oracle."""

    def __init__(self):
        self._starts = []
        self._by_start = {}

    def add(self, start, length):
        i = bisect_left(self._starts, start)
        if i > 0:
            prev = self._starts[i - 1]
            assert prev + self._by_start[prev] <= start, "overlap with predecessor"
        if i < len(self._starts):
            assert start + length <= self._starts[i], "overlap with successor"
        insort(self._starts, start)
        self._by_start[start] = length

    def remove(self, start):
        self._starts.remove(start)
        del self._by_start[start]


@pytest.mark.parametrize("name", ALLOCATOR_NAMES)
def test_random_sequences_keep_live_blocks_disjoint(name):
    rng = random.Random(0x5EED + hash(name) % 1000)
    alloc = create(name)
    for _ in range(20):
        alloc.reset()
        oracle = LiveIntervals()
        live = []
        for _ in range(100):
            roll = rng.random()
            if roll < 0.55 or not live:
                size = rng.randint(1, 200)
                try:
                    cap = alloc.malloc(size)
                except AllocError:
                    continue
                assert alloc.region.base <= cap.base and cap.top <= alloc.region.top
                oracle.add(cap.address, round16(size))
                live.append((cap, size))
            elif roll < 0.85:
                cap, _ = live.pop(rng.randrange(len(live)))
                alloc.free(cap)
                oracle.remove(cap.address)
            else:
                cap, _ = live.pop(rng.randrange(len(live)))
                new_size = rng.randint(1, 200)
                try:
                    new_cap = alloc.realloc(cap, new_size)
                except AllocError:
                    oracle.remove(cap.address)
                    continue
                oracle.remove(cap.address)
                oracle.add(new_cap.address, round16(new_size))
                live.append((new_cap, new_size))

#!/usr/bin/env python3
# The tagged heap: flat memory plus one validity bit per 16-byte granule.
#
# Capabilities can live in memory.  Storing one tags its granule;
# overwriting any byte of that granule clears the tag, so forged or
# corrupted capabilities come back dead.

from capheap import Perm, TaggedHeap, make_root

heap = TaggedHeap(4096)
root = make_root(4096)

# Ordinary data round-trips through capability-checked loads and stores.
heap.store(root, 64, b"hello capability world")
print("bytes back:", heap.load(root, 64, 22))

# Store a capability into memory: its granule becomes tagged.
child = root.set_bounds(256, 128).and_perms(Perm.LOAD | Perm.STORE)
heap.store_cap(root, 512, child)
print("granule tagged:", bool(heap.tags[512 // 16]))
print("load_cap returns it intact:", heap.load_cap(root, 512) == child)

# Now scribble a single byte over that granule.
heap.store(root, 519, b"\x00")
stale = heap.load_cap(root, 512)
print("after a one-byte overwrite, tag is", stale.tag)

# The raw snapshot is the data bytes followed by the tag bitmap.
snap = heap.snapshot()
print("snapshot size:", len(snap), "=", heap.size, "+", len(snap) - heap.size)

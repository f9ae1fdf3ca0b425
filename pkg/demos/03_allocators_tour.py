#!/usr/bin/env python3
# The seven reference allocators and what their capabilities look like.

from capheap import ALLOCATOR_NAMES, TRAITS, create

# Ask each allocator for 24 bytes and compare the capability it returns.
print(f"{'allocator':21} {'bounds':>16} {'length':>7}  exec?")
for name in ALLOCATOR_NAMES:
    cap = create(name).malloc(24)
    has_exec = "yes" if cap.perms & 16 else "no"
    print(f"{name:21} [{cap.base:>6}, {cap.top:>6}) {cap.length:>7}  {has_exec}")

# bump-alloc-nocheri is the odd one out: it hands back authority over
# the whole region, cursor parked at the block.  Everyone else narrows.

# The bump engines never reuse memory; the free-list engine does.
bump = create("bump-alloc-cheri")
p = bump.malloc(32)
bump.free(p)
q = bump.malloc(32)
print("\nbump after free/malloc:", p.address, "->", q.address, "(no reuse)")

dl = create("dlmalloc-cheribuild")
p = dl.malloc(32)
dl.malloc(32)  # hold the cursor position
dl.free(p)
q = dl.malloc(32)
print("free list after free/malloc:", p.address, "->", q.address, "(first fit reuse)")

# The slab engine rounds to size classes and keeps metadata out of band.
sn = create("snmalloc-repo")
for size in (1, 24, 100, 2000):
    cap = sn.malloc(size)
    print(f"slab malloc({size:>4}) -> class {cap.length}")

# Deferred frees (snmalloc-cheribuild) only take effect at the next
# allocation, which is why a synchronous double free cannot observe it.
deferred = create("snmalloc-cheribuild")
p = deferred.malloc(32)
deferred.free(p)
print("\nslot still occupied right after free:", deferred.occupancy(p.address))
deferred.malloc(100)
print("after the next malloc:", deferred.occupancy(p.address))

print("\ntraits on record:")
for name in ALLOCATOR_NAMES:
    print(f"  {name:21} {TRAITS[name]}")

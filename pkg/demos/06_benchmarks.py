#!/usr/bin/env python3
# Deterministic micro-benchmarks: every metric except wall time is a
# pure function of (allocator, workload), so numbers reproduce exactly.

from capheap import ALLOCATOR_NAMES, Workload, create, emit_csv, run_workload

# Churn hammers one size through a 64-block window.  Reusing engines
# stay inside a small working set; the bump engines touch fresh memory
# for every single allocation.
churn = Workload.churn(1024, 32)
results = [run_workload(create(name), churn) for name in ALLOCATOR_NAMES]
print(emit_csv(results).decode())

print("peak bytes touched on churn:")
for r in results:
    bar = "#" * max(1, r.peak_touched_bytes // 1024)
    print(f"  {r.allocator:21} {r.peak_touched_bytes:>7}  {bar}")

# randsize interleaves seeded random mallocs with FIFO frees; the seed
# lives in the workload descriptor, so a run is reproducible from its
# own CSV output.
rand = Workload.randsize(2000, seed=7, min_size=16, max_size=256)
print()
print(emit_csv([run_workload(create(n), rand) for n in ALLOCATOR_NAMES]).decode())

# reallocramp grows one block by 16 bytes per step.  Engines that grow
# in place barely move; movers leave a trail of abandoned blocks, and
# the slab engine runs out of size classes at 4096 bytes (recorded as
# out-of-memory counts, never fatal).
ramp = Workload.reallocramp(400)
print(emit_csv([run_workload(create(n), ramp) for n in ALLOCATOR_NAMES]).decode())

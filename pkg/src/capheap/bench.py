"""Deterministic allocator micro-benchmarks.

Three workloads: churn (fixed-size malloc/free through a sliding
window), randsize (seeded random malloc/free interleave), and
reallocramp (one block grown by 16 bytes per step).  Elapsed time is
reported but every other metric is a pure function of (allocator,
workload), so results are reproducible and assertable.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

from .allocator_api import AllocError, AllocErrorKind, Allocator

__all__ = ["BenchResult", "Workload", "Xorshift64", "emit_csv", "parse_csv", "run_workload"]

WINDOW = 64  # live blocks kept by the churn workload

CSV_HEADER = "allocator,workload,ops,elapsed_ns,peak_live_bytes,peak_touched_bytes,oom_count"


class Xorshift64:
    """Tiny deterministic generator; the seed is part of the workload
    descriptor so runs are reproducible from the output alone."""

    def __init__(self, seed: int):
        if seed <= 0:
            raise ValueError("seed must be positive")
        self.state = seed & 0xFFFFFFFFFFFFFFFF

    def next(self) -> int:
        x = self.state
        x ^= (x << 13) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 7
        x ^= (x << 17) & 0xFFFFFFFFFFFFFFFF
        self.state = x
        return x


@dataclass(frozen=True)
class Workload:
    kind: str
    op_count: int
    size: int = 0
    seed: int = 0
    min_size: int = 0
    max_size: int = 0

    def __post_init__(self):
        if self.op_count < 1:
            raise ValueError("op_count must be at least 1")
        if self.kind == "churn":
            if self.size < 1:
                raise ValueError("churn needs a positive size")
        elif self.kind == "randsize":
            if self.seed < 1:
                raise ValueError("randsize needs a positive seed")
            if not 1 <= self.min_size <= self.max_size:
                raise ValueError("randsize needs 1 <= min_size <= max_size")
        elif self.kind != "reallocramp":
            raise ValueError(f"unknown workload kind {self.kind!r}")

    @classmethod
    def churn(cls, op_count: int, size: int) -> "Workload":
        return cls("churn", op_count, size=size)

    @classmethod
    def randsize(cls, op_count: int, seed: int, min_size: int, max_size: int) -> "Workload":
        return cls("randsize", op_count, seed=seed, min_size=min_size, max_size=max_size)

    @classmethod
    def reallocramp(cls, op_count: int) -> "Workload":
        return cls("reallocramp", op_count)

    def describe(self) -> str:
        if self.kind == "churn":
            return f"churn;ops={self.op_count};size={self.size}"
        if self.kind == "randsize":
            return (
                f"randsize;ops={self.op_count};seed={self.seed};"
                f"min={self.min_size};max={self.max_size}"
            )
        return f"reallocramp;ops={self.op_count}"


@dataclass(frozen=True)
class BenchResult:
    allocator: str
    workload: str
    ops_completed: int
    elapsed_ns: int
    peak_live_bytes: int
    peak_touched_bytes: int
    oom_count: int


class _Meter:
    """Workload-side accounting: requested sizes of live blocks and the
    high-water mark of returned block extents."""

    def __init__(self):
        self.live_bytes = 0
        self.peak_live = 0
        self.peak_touched = 0

    def placed(self, cap, size: int) -> None:
        self.live_bytes += size
        self.peak_live = max(self.peak_live, self.live_bytes)
        self.peak_touched = max(self.peak_touched, cap.address + size)

    def removed(self, size: int) -> None:
        self.live_bytes -= size


def run_workload(alloc: Allocator, workload: Workload) -> BenchResult:
    """Drive a fresh allocator through one workload.  Out-of-memory is
    recorded per failed operation, never fatal."""
    meter = _Meter()
    completed = 0
    oom = 0
    start = time.perf_counter_ns()

    if workload.kind == "churn":
        live: deque = deque()
        for _ in range(workload.op_count):
            try:
                cap = alloc.malloc(workload.size)
            except AllocError as exc:
                if exc.kind is not AllocErrorKind.OUT_OF_MEMORY:
                    raise
                oom += 1
                continue
            meter.placed(cap, workload.size)
            live.append((cap, workload.size))
            if len(live) > WINDOW:
                old, old_size = live.popleft()
                alloc.free(old)
                meter.removed(old_size)
            completed += 1

    elif workload.kind == "randsize":
        rng = Xorshift64(workload.seed)
        span = workload.max_size - workload.min_size + 1
        live = deque()
        for _ in range(workload.op_count):
            do_alloc = (rng.next() & 1) == 1 or not live
            if do_alloc:
                size = workload.min_size + rng.next() % span
                try:
                    cap = alloc.malloc(size)
                except AllocError as exc:
                    if exc.kind is not AllocErrorKind.OUT_OF_MEMORY:
                        raise
                    oom += 1
                    continue
                meter.placed(cap, size)
                live.append((cap, size))
            else:
                cap, size = live.popleft()
                alloc.free(cap)
                meter.removed(size)
            completed += 1

    else:  # reallocramp
        cap = alloc.malloc(16)
        size = 16
        meter.placed(cap, size)
        for _ in range(workload.op_count):
            try:
                grown = alloc.realloc(cap, size + 16)
            except AllocError as exc:
                if exc.kind is not AllocErrorKind.OUT_OF_MEMORY:
                    raise
                oom += 1
                continue
            meter.removed(size)
            size += 16
            cap = grown
            meter.placed(cap, size)
            completed += 1

    elapsed = time.perf_counter_ns() - start
    return BenchResult(
        allocator=alloc.traits().name,
        workload=workload.describe(),
        ops_completed=completed,
        elapsed_ns=elapsed,
        peak_live_bytes=meter.peak_live,
        peak_touched_bytes=meter.peak_touched,
        oom_count=oom,
    )


def emit_csv(results: list[BenchResult]) -> bytes:
    if not results:
        raise ValueError("no results to emit")
    lines = [CSV_HEADER]
    for r in results:
        lines.append(
            f"{r.allocator},{r.workload},{r.ops_completed},{r.elapsed_ns},"
            f"{r.peak_live_bytes},{r.peak_touched_bytes},{r.oom_count}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_csv(data: bytes) -> list[BenchResult]:
    lines = data.decode("utf-8").strip().splitlines()
    if lines[0] != CSV_HEADER:
        raise ValueError("unexpected bench CSV header")
    out = []
    for line in lines[1:]:
        fields = line.split(",")
        if len(fields) != 7:
            raise ValueError(f"expected 7 columns, got {len(fields)}")
        out.append(
            BenchResult(
                allocator=fields[0],
                workload=fields[1],
                ops_completed=int(fields[2]),
                elapsed_ns=int(fields[3]),
                peak_live_bytes=int(fields[4]),
                peak_touched_bytes=int(fields[5]),
                oom_count=int(fields[6]),
            )
        )
    return out

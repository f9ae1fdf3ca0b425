"""Command-line entry point.

Subcommands: ``matrix`` (run the conformance grid, optionally diffing
against the reference matrix), ``attack`` (one probe with an optional
step trace), ``bench`` (micro-benchmarks as CSV), ``list`` (canonical
allocator names), and ``dump`` (drive an allocator from a script and
write a raw heap snapshot).

Exit codes: 0 on success or a matching matrix, 1 when ``--expect``
finds mismatches or a dump script op fails, 2 on malformed input.
"""

from __future__ import annotations

import argparse
import sys

from .allocator_api import AllocError
from .attacks import ATTACK_IDS, ATTACKS
from .bench import Workload, emit_csv, run_workload
from .capability import CapFault
from .harness import EXPECTED_MATRIX, diff_matrix, render, run_matrix
from .registry import ALLOCATOR_NAMES, TRAITS, create, default_registry

__all__ = ["main"]


class ScriptError(Exception):
    """Malformed dump script: unparseable line or bad result index."""


class ScriptOpError(Exception):
    """A well-formed script op that the allocator refused."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capheap",
        description="Capability-heap laboratory: reference allocators, attack probes, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_matrix = sub.add_parser("matrix", help="run the allocator-by-attack conformance matrix")
    p_matrix.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p_matrix.add_argument("--expect", action="store_true",
                          help="diff against the reference matrix; exit 1 on mismatch")
    p_matrix.add_argument("--serial", action="store_true", help="disable cell parallelism")
    p_matrix.add_argument("--rounding-bounds", action="store_true",
                          help="enable power-of-two bounds rounding above 4096 bytes")
    p_matrix.set_defaults(func=cmd_matrix)

    p_attack = sub.add_parser("attack", help="run a single attack probe")
    p_attack.add_argument("attack", choices=ATTACK_IDS)
    p_attack.add_argument("--allocator", required=True, choices=ALLOCATOR_NAMES)
    p_attack.add_argument("--trace", action="store_true", help="print the recorded steps")
    p_attack.set_defaults(func=cmd_attack)

    p_bench = sub.add_parser("bench", help="run a micro-benchmark workload")
    p_bench.add_argument("workload", choices=("churn", "randsize", "reallocramp"))
    p_bench.add_argument("--allocator", required=True,
                         choices=ALLOCATOR_NAMES + ("all",))
    p_bench.add_argument("--ops", type=int, default=1000)
    p_bench.add_argument("--size", type=int, default=32)
    p_bench.add_argument("--seed", type=int, default=1)
    p_bench.add_argument("--min-size", type=int, default=16)
    p_bench.add_argument("--max-size", type=int, default=256)
    p_bench.set_defaults(func=cmd_bench)

    p_list = sub.add_parser("list", help="list the canonical allocators in table order")
    p_list.add_argument("--traits", action="store_true")
    p_list.set_defaults(func=cmd_list)

    p_dump = sub.add_parser("dump", help="run an allocation script and dump the heap")
    p_dump.add_argument("--allocator", required=True, choices=ALLOCATOR_NAMES)
    p_dump.add_argument("--script", required=True)
    p_dump.add_argument("--out", default="-", help="snapshot path, '-' for stdout")
    p_dump.set_defaults(func=cmd_dump)

    return parser


def cmd_matrix(args) -> int:
    registry = default_registry(rounding_bounds=args.rounding_bounds)
    matrix = run_matrix(registry, parallel=not args.serial)
    sys.stdout.write(render(matrix, args.format).decode("utf-8"))
    if not args.expect:
        return 0
    diffs = diff_matrix(matrix, EXPECTED_MATRIX)
    if not diffs:
        total = len(matrix.names) * len(matrix.attacks)
        print(f"all {total} cells match the reference matrix", file=sys.stderr)
        return 0
    for name, attack, actual, expected in diffs:
        print(
            f"mismatch {name} {attack}: got {actual.token}, expected {expected.token}",
            file=sys.stderr,
        )
    return 1


def cmd_attack(args) -> int:
    report = ATTACKS[args.attack](create(args.allocator))
    print(f"{args.attack} {args.allocator}: {report.headline()}")
    if args.trace:
        for i, step in enumerate(report.trace):
            rendered = ", ".join(repr(a) for a in step.args)
            print(f"  {i:>2} {step.op}({rendered}) -> {step.result}")
    return 0


def cmd_bench(args) -> int:
    if args.workload == "churn":
        workload = Workload.churn(args.ops, args.size)
    elif args.workload == "randsize":
        workload = Workload.randsize(args.ops, args.seed, args.min_size, args.max_size)
    else:
        workload = Workload.reallocramp(args.ops)
    names = ALLOCATOR_NAMES if args.allocator == "all" else (args.allocator,)
    results = [run_workload(create(name), workload) for name in names]
    sys.stdout.write(emit_csv(results).decode("utf-8"))
    return 0


def cmd_list(args) -> int:
    if not args.traits:
        for name in ALLOCATOR_NAMES:
            print(name)
        return 0
    width = max(len(n) for n in ALLOCATOR_NAMES)
    print(f"{'allocator'.ljust(width)}  narrow deferred exec_strip validation      dfdetect inplace")
    for name in ALLOCATOR_NAMES:
        t = TRAITS[name]
        print(
            f"{name.ljust(width)}  "
            f"{str(t.narrow_bounds).ljust(6)} {str(t.deferred_free).ljust(8)} "
            f"{str(t.strips_exec).ljust(10)} {t.free_validation.value.ljust(15)} "
            f"{str(t.double_free_detect).ljust(8)} {t.realloc_grows_in_place}"
        )
    return 0


def _run_script(alloc, text: str) -> None:
    results = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            if fields[0] == "malloc" and len(fields) == 2:
                results.append(alloc.malloc(int(fields[1])))
            elif fields[0] == "free" and len(fields) == 2:
                alloc.free(results[int(fields[1])])
            elif fields[0] == "realloc" and len(fields) == 3:
                results.append(alloc.realloc(results[int(fields[1])], int(fields[2])))
            else:
                raise ScriptError(f"line {lineno}: cannot parse {line!r}")
        except (ValueError, IndexError) as exc:
            raise ScriptError(f"line {lineno}: {exc}") from exc
        except (AllocError, CapFault) as exc:
            raise ScriptOpError(f"line {lineno}: {line!r} failed: {exc}") from exc


def cmd_dump(args) -> int:
    try:
        with open(args.script, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return 2
    alloc = create(args.allocator)
    try:
        _run_script(alloc, text)
    except ScriptError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except ScriptOpError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    snapshot = alloc.heap.snapshot()
    if args.out == "-":
        sys.stdout.buffer.write(snapshot)
        sys.stdout.buffer.flush()
    else:
        with open(args.out, "wb") as fh:
            fh.write(snapshot)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

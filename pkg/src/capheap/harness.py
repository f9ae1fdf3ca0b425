"""Run the full allocator-by-attack conformance matrix and compare it
against the embedded reference matrix.

The reference matrix is the package's golden target: 7 allocators by
5 attacks.  It is embedded as constant data here and also shipped as a
CSV fixture (``data/expected_matrix.csv``); a test asserts the two
agree so transcription drift cannot go unnoticed.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Mapping

from .allocator_api import Allocator
from .attacks import ATTACK_IDS, ATTACKS, Outcome
from .registry import ALLOCATOR_NAMES, default_registry

__all__ = [
    "ConfigurationError",
    "ConformanceMatrix",
    "EXPECTED_MATRIX",
    "diff_matrix",
    "expected_matrix_fixture",
    "parse_csv",
    "parse_json",
    "render",
    "run_matrix",
]


class ConfigurationError(Exception):
    """A registry that does not describe the canonical seven allocators."""


@dataclass(frozen=True)
class ConformanceMatrix:
    names: tuple[str, ...]
    attacks: tuple[str, ...]
    cells: tuple[tuple[Outcome, ...], ...]

    def __post_init__(self):
        if len(self.cells) != len(self.names):
            raise ValueError("one cell row per allocator required")
        for row in self.cells:
            if len(row) != len(self.attacks):
                raise ValueError("one cell per attack required")

    def row(self, name: str) -> tuple[Outcome, ...]:
        return self.cells[self.names.index(name)]


def _matrix(rows: Mapping[str, str]) -> ConformanceMatrix:
    cells = tuple(
        tuple(Outcome.from_token(tok) for tok in row.split()) for row in rows.values()
    )
    return ConformanceMatrix(tuple(rows), ATTACK_IDS, cells)


EXPECTED_MATRIX = _matrix(
    {
        "bump-alloc-cheri": "S T S S S",
        "bump-alloc-nocheri": "S NA S T S",
        "dlmalloc-cheribuild": "S T T S S",
        "jemalloc": "S T T S T",
        "libmalloc-simple": "S S T S T",
        "snmalloc-cheribuild": "S S S NA S",
        "snmalloc-repo": "S S S S S",
    }
)


def expected_matrix_fixture() -> bytes:
    """The canonical CSV fixture shipped with the package."""
    return resources.files("capheap").joinpath("data/expected_matrix.csv").read_bytes()


def run_matrix(
    registry: Mapping[str, Callable[[], Allocator]] | None = None,
    *,
    rows: Iterable[str] | None = None,
    parallel: bool = True,
) -> ConformanceMatrix:
    """Probe every (allocator, attack) cell on a fresh instance each.

    Cells are independent, so parallel and serial runs agree; the
    registry is never mutated.  ``rows`` restricts the run to a subset
    of allocators, preserving table order.
    """
    if registry is None:
        registry = default_registry()
    if tuple(registry) != ALLOCATOR_NAMES:
        raise ConfigurationError(
            f"registry must hold exactly {list(ALLOCATOR_NAMES)}, got {list(registry)}"
        )
    if rows is None:
        names = ALLOCATOR_NAMES
    else:
        names = tuple(n for n in ALLOCATOR_NAMES if n in set(rows))
        unknown = set(rows) - set(ALLOCATOR_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown allocators: {sorted(unknown)}")

    def cell(name: str, attack_id: str) -> Outcome:
        return ATTACKS[attack_id](registry[name]()).outcome

    pairs = [(name, attack) for name in names for attack in ATTACK_IDS]
    if parallel:
        with ThreadPoolExecutor(max_workers=8) as pool:
            outcomes = list(pool.map(lambda p: cell(*p), pairs))
    else:
        outcomes = [cell(*p) for p in pairs]
    width = len(ATTACK_IDS)
    cells = tuple(
        tuple(outcomes[i * width : (i + 1) * width]) for i in range(len(names))
    )
    return ConformanceMatrix(names, ATTACK_IDS, cells)


def diff_matrix(
    actual: ConformanceMatrix, expected: ConformanceMatrix
) -> list[tuple[str, str, Outcome, Outcome]]:
    """Row-major list of (allocator, attack, actual, expected) mismatches;
    empty means the matrices are equal."""
    if actual.names != expected.names or actual.attacks != expected.attacks:
        raise ValueError("matrix dimensions or labels differ")
    out = []
    for name, arow, erow in zip(actual.names, actual.cells, expected.cells):
        for attack, a, e in zip(actual.attacks, arow, erow):
            if a is not e:
                out.append((name, attack, a, e))
    return out


def render(matrix: ConformanceMatrix, fmt: str = "text") -> bytes:
    """Render as aligned glyph text, token CSV, or JSON.  Output is
    byte-identical across runs and platforms."""
    if fmt == "text":
        width = max(len(n) for n in matrix.names + ("allocator",))
        lines = ["allocator".ljust(width) + "  " + " ".join(matrix.attacks)]
        for name, row in zip(matrix.names, matrix.cells):
            glyphs = " ".join(o.glyph.ljust(2) for o in row).rstrip()
            lines.append(name.ljust(width) + "  " + glyphs)
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "csv":
        lines = ["allocator," + ",".join(matrix.attacks)]
        for name, row in zip(matrix.names, matrix.cells):
            lines.append(name + "," + ",".join(o.token for o in row))
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "json":
        obj = {
            name: [o.value for o in row] for name, row in zip(matrix.names, matrix.cells)
        }
        return (json.dumps(obj, indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


def parse_csv(data: bytes) -> ConformanceMatrix:
    lines = data.decode("utf-8").strip().splitlines()
    header = lines[0].split(",")
    if header[0] != "allocator":
        raise ValueError("missing allocator header column")
    attacks = tuple(header[1:])
    names = []
    cells = []
    for line in lines[1:]:
        fields = line.split(",")
        names.append(fields[0])
        cells.append(tuple(Outcome.from_token(tok) for tok in fields[1:]))
    return ConformanceMatrix(tuple(names), attacks, tuple(cells))


def parse_json(data: bytes) -> ConformanceMatrix:
    obj = json.loads(data.decode("utf-8"))
    names = tuple(obj)
    cells = tuple(tuple(Outcome(v) for v in row) for row in obj.values())
    return ConformanceMatrix(names, ATTACK_IDS, cells)

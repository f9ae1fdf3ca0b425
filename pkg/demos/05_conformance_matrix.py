#!/usr/bin/env python3
# Run the whole allocator-by-attack grid and compare it to the
# reference matrix the package ships.

from capheap import EXPECTED_MATRIX, diff_matrix, render, run_matrix
from capheap.attacks import predicted_row
from capheap.registry import ALLOCATOR_NAMES, TRAITS

matrix = run_matrix()
print(render(matrix, "text").decode())

diffs = diff_matrix(matrix, EXPECTED_MATRIX)
print("mismatches against the reference matrix:", diffs or "none")

# The same grid falls out of the trait records alone: the probes'
# decision rules evaluated without running a single engine.  Keeping
# both routes green guards each against drift in the other.
predicted = [predicted_row(TRAITS[name]) for name in ALLOCATOR_NAMES]
print("trait-rule prediction agrees:", tuple(predicted) == EXPECTED_MATRIX.cells)

# Machine-readable renderings for downstream tooling.
print()
print(render(matrix, "csv").decode())
print(render(matrix, "json").decode())

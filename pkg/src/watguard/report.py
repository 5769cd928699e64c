"""Static insertion statistics and the linear overhead model.

Predicted overhead multiplies each function's inserted-instruction total
by its activation count and sums; measured overhead is the executed-total
difference of a protected run against an unprotected run on the same
input.  Under the counting conventions in docs/overhead-model.md the two
are equal on every non-trapping run.
"""

from __future__ import annotations

from .engine import FunctionInsertion, InsertionStats
from .errors import ReportError
from .interp import RunResult
from .ir import CATEGORIES, Module, count_by_category

# Per-function inserted-instruction counts reported by the original work,
# emitted into every report for side-by-side comparison.  They reflect a
# different embedded generator and are not expected to match this
# implementation's counts.
PAPER_REFERENCE = {
    "reference": True,
    "aslr": {"arithmetic": 21, "variable": 12, "memory": 0, "control": 0},
    "canary": {"arithmetic": 16, "variable": 16, "memory": 2, "control": 5},
}


def static_insertion_stats(before: Module, after: Module) -> InsertionStats:
    """Per-function category counts of ``after`` minus ``before``.

    The defined functions of ``before`` must be a name/order prefix of
    ``after``; functions the transform appended (the PRNG helpers) become
    rows counting their whole body.
    """
    if len(after.functions) < len(before.functions):
        raise ReportError("function list mismatch: transformed module lost functions")
    for pos, (b, a) in enumerate(zip(before.functions, after.functions)):
        if b.name != a.name:
            raise ReportError(
                f"function list mismatch at position {pos}: "
                f"{b.name!r} vs {a.name!r}"
            )

    stats = InsertionStats()
    for pos, (b, a) in enumerate(zip(before.functions, after.functions)):
        b_counts = count_by_category(b.body)
        a_counts = count_by_category(a.body)
        inserted = {cat: a_counts[cat] - b_counts[cat] for cat in CATEGORIES}
        name = a.name if a.name else f"#{pos}"
        stats.functions.append(FunctionInsertion(name, pos, inserted))
    for pos in range(len(before.functions), len(after.functions)):
        fn = after.functions[pos]
        name = fn.name if fn.name else f"#{pos}"
        stats.functions.append(
            FunctionInsertion(name, pos, count_by_category(fn.body), appended=True)
        )
    return stats


def defined_call_counts(module: Module, result: RunResult) -> dict[int, int]:
    """Activation counts keyed by defined-function position."""
    n_imp = module.num_func_imports()
    return {
        index - n_imp: count
        for index, count in result.call_counts.items()
        if index >= n_imp
    }


def predict_overhead(stats: InsertionStats, call_counts: dict[int, int]) -> int:
    """Extra executed instructions the linear model predicts for a run."""
    return sum(
        row.total * call_counts.get(row.position, 0) for row in stats.functions
    )


def measure_overhead(base: RunResult, protected: RunResult) -> int:
    """Executed-instruction difference between paired non-trapping runs."""
    if base.trapped or protected.trapped:
        raise ReportError("overhead is undefined on trapping runs")
    return protected.total - base.total


def build_overhead_report(
    passes: list[str],
    stats: InsertionStats,
    call_counts: dict[int, int] | None = None,
    measured: int | None = None,
) -> dict:
    """Assemble the JSON-ready report document."""
    functions = []
    for row in stats.functions:
        calls = call_counts.get(row.position, 0) if call_counts is not None else None
        functions.append(
            {"name": row.name, "inserted": dict(row.inserted), "calls": calls}
        )
    predicted = predict_overhead(stats, call_counts) if call_counts is not None else None
    report = {
        "passes": list(passes),
        "functions": functions,
        "paper_reference": PAPER_REFERENCE,
        "predicted_extra": predicted,
        "measured_extra": measured,
    }
    if stats.table_shuffle is not None:
        report["table_shuffle"] = stats.table_shuffle.as_dict()
    return report

"""Pass orchestration: skip-list filtering, exit normalization, PRNG
embedding, per-function injection, and insertion accounting."""

from __future__ import annotations

import copy
import time as _time
from dataclasses import dataclass, field

from .aslr import inject_aslr
from .canary import inject_canary
from .errors import PassError
from .ir import CATEGORIES, Module, count_by_category, find_stack_pointer, unsigned32
from .rng import embed_prng, seed_transform, xorshift32_step
from .shuffle import ShuffleReport, shuffle_elem_segment
from .wrap import wrap_body_for_epilogue, wrapper_bounds  # noqa: F401 (re-export)

# Functions that manipulate the stack pointer on purpose and must never be
# instrumented.
DEFAULT_SKIP_NAMES = frozenset(
    {
        "stackAlloc",
        "emscripten_stack_init",
        "emscripten_stack_restore",
        "emscripten_stack_get_current",
    }
)


@dataclass
class PassConfig:
    """Which passes run and how they are parameterized."""

    enable_aslr: bool = False
    enable_canary: bool = False
    enable_table_shuffle: bool = False
    skip_names: set[str] = field(default_factory=lambda: set(DEFAULT_SKIP_NAMES))
    sp_override: str | None = None
    # Transform-time randomness (table shuffle only): None draws the seed
    # from the host clock, an int pins it.
    seed_mode: int | None = None
    shuffle_strict: bool = False

    def __post_init__(self):
        self.skip_names = {name.lstrip("$") for name in self.skip_names}
        if self.seed_mode is not None and not 0 <= self.seed_mode < 2**32:
            raise PassError("fixed seed must be a 32-bit unsigned integer")

    def validate(self) -> None:
        if not (self.enable_aslr or self.enable_canary or self.enable_table_shuffle):
            raise PassError("no pass enabled")


@dataclass
class FunctionInsertion:
    """Per-function inserted-instruction counts by category."""

    name: str
    position: int
    inserted: dict[str, int]
    appended: bool = False

    @property
    def total(self) -> int:
        return sum(self.inserted.values())


@dataclass
class InsertionStats:
    """Module-wide insertion record produced by apply_passes."""

    functions: list[FunctionInsertion] = field(default_factory=list)
    table_shuffle: ShuffleReport | None = None

    def totals(self) -> dict[str, int]:
        totals = {cat: 0 for cat in CATEGORIES}
        for row in self.functions:
            for cat in CATEGORIES:
                totals[cat] += row.inserted[cat]
        return totals

    @property
    def total(self) -> int:
        return sum(self.totals().values())

    def row(self, name: str) -> FunctionInsertion:
        for entry in self.functions:
            if entry.name == name:
                return entry
        raise KeyError(name)


def _display_name(fn, position: int) -> str:
    return fn.name if fn.name else f"#{position}"


def _draw_stream(seed: int):
    state = seed_transform(seed)

    def draw() -> int:
        nonlocal state
        state = xorshift32_step(state)
        return state

    return draw


def apply_passes(module: Module, config: PassConfig) -> tuple[Module, InsertionStats]:
    """Apply the configured passes to a copy of ``module``.

    The PRNG is embedded once, and only when at least one function will
    actually be instrumented; a module whose every function is skip-listed
    comes back unchanged.  In combined mode each function seeds once and
    draws twice (canary value, then offset).
    """
    config.validate()
    out = copy.deepcopy(module)
    stats = InsertionStats()

    n_original = len(out.functions)
    before = [count_by_category(fn.body) for fn in out.functions]

    if config.enable_canary or config.enable_aslr:
        targets = [
            i for i, fn in enumerate(out.functions)
            if fn.name not in config.skip_names
        ]
        if targets:
            sp = find_stack_pointer(out, config.sp_override)
            embed_prng(out)
            for pos in targets:
                fn = out.functions[pos]
                wrap_body_for_epilogue(out, fn)
                if config.enable_canary:
                    inject_canary(out, fn, sp, seed=True)
                if config.enable_aslr:
                    inject_aslr(out, fn, sp, seed=not config.enable_canary)

    for pos in range(n_original):
        after = count_by_category(out.functions[pos].body)
        inserted = {cat: after[cat] - before[pos][cat] for cat in CATEGORIES}
        stats.functions.append(
            FunctionInsertion(_display_name(out.functions[pos], pos), pos, inserted)
        )
    for pos in range(n_original, len(out.functions)):
        fn = out.functions[pos]
        stats.functions.append(
            FunctionInsertion(
                _display_name(fn, pos), pos,
                count_by_category(fn.body), appended=True,
            )
        )

    if config.enable_table_shuffle:
        seed = config.seed_mode
        if seed is None:
            seed = unsigned32(int(_time.time()))
        out, stats.table_shuffle = shuffle_elem_segment(
            out, _draw_stream(seed), strict=config.shuffle_strict
        )

    return out, stats

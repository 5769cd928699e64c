"""Core data model for modules, functions, and instructions.

Instruction mnemonics are stored verbatim ("i32.const", "local.get", ...).
Symbolic names are kept without the leading ``$`` and live in the entity
that owns them; instruction immediates are always numeric indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ClassificationError, StackPointerError

ARITHMETIC = "arithmetic"
VARIABLE = "variable"
MEMORY = "memory"
CONTROL = "control"
OTHER = "other"

CATEGORIES = (ARITHMETIC, VARIABLE, MEMORY, CONTROL)

# Category sets partition the supported subset; "other" is reserved and
# currently empty so that per-category accounting is always total.
_ARITHMETIC_OPS = frozenset(
    "i32." + op
    for op in (
        "const", "add", "sub", "mul", "and", "or", "xor",
        "shl", "shr_s", "shr_u", "eq", "ne", "lt_u", "gt_u", "eqz",
    )
)
_VARIABLE_OPS = frozenset(
    ("local.get", "local.set", "local.tee", "global.get", "global.set")
)
_MEMORY_OPS = frozenset(
    ("i32.load", "i32.store", "i32.load8_u", "i32.store8", "memory.size")
)
_CONTROL_OPS = frozenset(
    ("unreachable", "br", "br_if", "return", "call", "call_indirect",
     "block", "loop", "end", "nop", "drop")
)

SUPPORTED_OPS = _ARITHMETIC_OPS | _VARIABLE_OPS | _MEMORY_OPS | _CONTROL_OPS

CATEGORY_OF = {}
for _op in _ARITHMETIC_OPS:
    CATEGORY_OF[_op] = ARITHMETIC
for _op in _VARIABLE_OPS:
    CATEGORY_OF[_op] = VARIABLE
for _op in _MEMORY_OPS:
    CATEGORY_OF[_op] = MEMORY
for _op in _CONTROL_OPS:
    CATEGORY_OF[_op] = CONTROL


def classify_instruction(mnemonic: str) -> str:
    """Return the overhead-accounting category of a mnemonic."""
    try:
        return CATEGORY_OF[mnemonic]
    except KeyError:
        raise ClassificationError(f"unknown mnemonic: {mnemonic!r}") from None


@dataclass(frozen=True)
class FuncSig:
    """Function signature: parameter kinds and at most one result kind."""

    params: tuple[str, ...] = ()
    result: str | None = None


@dataclass
class Instr:
    """One instruction with its immediates.

    ``arg`` holds whichever integer immediate the mnemonic takes: the
    constant for i32.const (stored as a signed 32-bit value), a local or
    global index, a label depth, a function index, or the type index of a
    call_indirect.  ``tag`` is transient pass metadata and never takes part
    in structural equality.
    """

    op: str
    arg: int | None = None
    offset: int = 0
    align: int | None = None
    result: str | None = None
    tag: str | None = field(default=None, compare=False)


@dataclass
class ImportEntry:
    module: str
    name: str
    kind: str  # currently always "func"
    type_index: int
    symbol: str | None = None


@dataclass
class FunctionDef:
    type_index: int
    locals: list[str] = field(default_factory=list)
    body: list[Instr] = field(default_factory=list)
    name: str | None = None
    # Optional symbols for params followed by locals, for printing.
    local_names: list[str | None] = field(default_factory=list)


@dataclass
class GlobalDef:
    kind: str
    mutable: bool
    init: int
    name: str | None = None


@dataclass
class DataSegment:
    offset: int
    data: bytes


@dataclass
class ElemSegment:
    offset: int
    funcs: list[int] = field(default_factory=list)


@dataclass
class ExportEntry:
    name: str
    kind: str  # "func" | "memory" | "global" | "table"
    index: int


@dataclass
class Module:
    types: list[FuncSig] = field(default_factory=list)
    imports: list[ImportEntry] = field(default_factory=list)
    functions: list[FunctionDef] = field(default_factory=list)
    globals: list[GlobalDef] = field(default_factory=list)
    memory: tuple[int, int | None] | None = None  # (min pages, max pages)
    data: list[DataSegment] = field(default_factory=list)
    table: tuple[int, int | None] | None = None  # (min size, max size)
    elems: list[ElemSegment] = field(default_factory=list)
    exports: list[ExportEntry] = field(default_factory=list)
    start: int | None = None

    # -- index-space helpers -------------------------------------------

    def func_imports(self) -> list[ImportEntry]:
        return [imp for imp in self.imports if imp.kind == "func"]

    def num_func_imports(self) -> int:
        return len(self.func_imports())

    def func_sig(self, func_index: int) -> FuncSig:
        """Signature of a function in the combined import+defined space."""
        n_imp = self.num_func_imports()
        if func_index < n_imp:
            return self.types[self.func_imports()[func_index].type_index]
        return self.types[self.functions[func_index - n_imp].type_index]

    def func_name(self, func_index: int) -> str | None:
        n_imp = self.num_func_imports()
        if func_index < n_imp:
            return self.func_imports()[func_index].symbol
        return self.functions[func_index - n_imp].name

    def find_function(self, name: str) -> int | None:
        """Index (combined space) of the function with the given symbol."""
        for i, imp in enumerate(self.func_imports()):
            if imp.symbol == name:
                return i
        n_imp = self.num_func_imports()
        for i, fn in enumerate(self.functions):
            if fn.name == name:
                return n_imp + i
        return None

    def intern_type(self, sig: FuncSig) -> int:
        """Index of ``sig`` in the type list, appending it if missing."""
        for i, existing in enumerate(self.types):
            if existing == sig:
                return i
        self.types.append(sig)
        return len(self.types) - 1


@dataclass(frozen=True)
class StackPointerRef:
    """The module global used as the unmanaged-stack pointer."""

    index: int
    symbol: str | None = None


def signed32(value: int) -> int:
    """Normalize an integer to its signed 32-bit representation."""
    return ((value + 0x8000_0000) & 0xFFFF_FFFF) - 0x8000_0000


def unsigned32(value: int) -> int:
    return value & 0xFFFF_FFFF


def fresh_local(module: Module, func: FunctionDef, kind: str = "i32") -> int:
    """Append a new local of ``kind`` to ``func`` and return its index.

    The returned index equals the previous param+local count, so repeated
    calls yield distinct consecutive indices.
    """
    n_params = len(module.types[func.type_index].params)
    index = n_params + len(func.locals)
    while len(func.local_names) < index:
        func.local_names.append(None)
    func.locals.append(kind)
    func.local_names.append(None)
    return index


def find_stack_pointer(module: Module, override: str | None = None) -> StackPointerRef:
    """Identify the stack-pointer global.

    With ``override`` (symbol, leading ``$`` optional) the named global is
    used.  Otherwise a mutable i32 global named ``__stack_pointer`` wins;
    failing that, a single unambiguous mutable i32 global is accepted.
    """
    if override is not None:
        name = override.lstrip("$")
        for i, g in enumerate(module.globals):
            if g.name == name:
                if not (g.mutable and g.kind == "i32"):
                    raise StackPointerError(
                        f"global ${name} is not a mutable i32 global"
                    )
                return StackPointerRef(i, name)
        raise StackPointerError(f"no global named ${name}")

    candidates = [
        (i, g) for i, g in enumerate(module.globals)
        if g.mutable and g.kind == "i32"
    ]
    for i, g in candidates:
        if g.name == "__stack_pointer":
            return StackPointerRef(i, g.name)
    if not candidates:
        raise StackPointerError("no stack pointer found: module has no mutable i32 global")
    if len(candidates) > 1:
        raise StackPointerError(
            "ambiguous stack pointer: multiple mutable i32 globals and none "
            "named $__stack_pointer; select one with --sp"
        )
    index, g = candidates[0]
    return StackPointerRef(index, g.name)


def count_by_category(body: list[Instr]) -> dict[str, int]:
    """Instruction counts of a body, keyed by the four categories."""
    counts = {cat: 0 for cat in CATEGORIES}
    for instr in body:
        counts[classify_instruction(instr.op)] += 1
    return counts

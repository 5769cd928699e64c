"""Mini-interpreter for the supported subset.

Runs modules against a byte-addressable linear memory with an explicit
operand/call stack, so locals, globals, and return addresses are never
reachable through loads and stores.  Every executed instruction is counted
per category; the counting conventions that make the linear overhead model
exact are described in docs/overhead-model.md.
"""

from __future__ import annotations

import copy
import time as _time
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvokeError, LinkError
from .ir import (
    CATEGORIES,
    CATEGORY_OF,
    CONTROL,
    Instr,
    Module,
    signed32,
    unsigned32,
)

PAGE_SIZE = 65536
MAX_CALL_DEPTH = 10_000

MASK = 0xFFFF_FFFF


class TrapReason(Enum):
    Unreachable = "Unreachable"
    CanaryMismatch = "CanaryMismatch"
    OutOfBoundsMemory = "OutOfBoundsMemory"
    UndefinedTableEntry = "UndefinedTableEntry"
    SignatureMismatch = "SignatureMismatch"
    StackExhausted = "StackExhausted"


class _Trap(Exception):
    def __init__(self, reason: TrapReason):
        self.reason = reason


@dataclass
class RunResult:
    """Outcome of one invocation plus its execution accounting."""

    values: list[int] | None
    trap: TrapReason | None
    counters: dict[str, int]
    call_counts: dict[int, int]

    @property
    def trapped(self) -> bool:
        return self.trap is not None

    @property
    def total(self) -> int:
        return self.counters["total"]


def _fresh_counters() -> dict[str, int]:
    counters = {cat: 0 for cat in CATEGORIES}
    counters["other"] = 0
    counters["total"] = 0
    return counters


# Shape of the canary verification block; recognizing it on re-parsed text
# restores the trap metadata that plain `unreachable` cannot carry.
_CANARY_CHECK_OPS = (
    "block", "local.get", "i32.load", "local.get", "i32.eq",
    "br_if", "unreachable", "end",
)

CANARY_BRANCH_TAG = "canary-skip"
CANARY_TRAP_TAG = "canary-trap"


def tag_canary_checks(module: Module) -> None:
    """Mark the br_if/unreachable pair of every canary-check idiom."""
    n = len(_CANARY_CHECK_OPS)
    for fn in module.functions:
        body = fn.body
        for i in range(len(body) - n + 1):
            window = body[i:i + n]
            if (
                tuple(instr.op for instr in window) == _CANARY_CHECK_OPS
                and window[5].arg == 0
                and window[2].offset == 0
            ):
                window[5].tag = CANARY_BRANCH_TAG
                window[6].tag = CANARY_TRAP_TAG


@dataclass
class Instance:
    """A loaded module with its runtime state."""

    module: Module
    memory: bytearray
    globals: list[int]
    table: list[int | None]
    time_source: object  # callable () -> int
    _end_maps: dict[int, dict[int, int]] = field(default_factory=dict)

    def pages(self) -> int:
        return len(self.memory) // PAGE_SIZE

    def global_value(self, ref: int | str) -> int:
        """Signed value of a global, by index or symbol."""
        if isinstance(ref, str):
            name = ref.lstrip("$")
            for i, g in enumerate(self.module.globals):
                if g.name == name:
                    return signed32(self.globals[i])
            raise InvokeError(f"no global named ${name}")
        return signed32(self.globals[ref])

    def read_memory(self, addr: int, count: int) -> bytes:
        if addr < 0 or addr + count > len(self.memory):
            raise InvokeError(f"memory read [{addr}, {addr + count}) out of bounds")
        return bytes(self.memory[addr:addr + count])

    def _ends(self, defined_index: int, body: list[Instr]) -> dict[int, int]:
        cached = self._end_maps.get(defined_index)
        if cached is None:
            cached = _match_ends(body)
            self._end_maps[defined_index] = cached
        return cached


def _match_ends(body: list[Instr]) -> dict[int, int]:
    """Map each block/loop position to its matching end position."""
    ends: dict[int, int] = {}
    stack: list[int] = []
    for pc, instr in enumerate(body):
        if instr.op in ("block", "loop"):
            stack.append(pc)
        elif instr.op == "end":
            ends[stack.pop()] = pc
    return ends


def instantiate(module: Module, time: int | None = None) -> Instance:
    """Allocate memory, apply data/element segments, and bind imports.

    ``time`` pins the host clock to a fixed value; None uses the system
    clock.  The module is copied so instances never alias caller state.
    """
    module = copy.deepcopy(module)
    tag_canary_checks(module)

    for imp in module.imports:
        if (imp.module, imp.name) != ("env", "time"):
            raise LinkError(f'unknown import ("{imp.module}", "{imp.name}")')
        sig = module.types[imp.type_index]
        if sig.params or sig.result != "i32":
            raise LinkError('import ("env", "time") must have signature () -> i32')

    pages = module.memory[0] if module.memory is not None else 0
    memory = bytearray(pages * PAGE_SIZE)
    for seg in module.data:
        offset = unsigned32(seg.offset)
        if offset + len(seg.data) > len(memory):
            raise LinkError(
                f"data segment [{offset}, {offset + len(seg.data)}) out of bounds"
            )
        memory[offset:offset + len(seg.data)] = seg.data

    globals_ = [unsigned32(g.init) for g in module.globals]

    table_size = module.table[0] if module.table is not None else 0
    table: list[int | None] = [None] * table_size
    n_funcs = module.num_func_imports() + len(module.functions)
    for elem in module.elems:
        offset = unsigned32(elem.offset)
        if offset + len(elem.funcs) > len(table):
            raise LinkError(
                f"element segment [{offset}, {offset + len(elem.funcs)}) out of bounds"
            )
        for i, func_index in enumerate(elem.funcs):
            if not 0 <= func_index < n_funcs:
                raise LinkError(f"element entry {func_index} is not a function")
            table[offset + i] = func_index

    if time is not None:
        fixed = unsigned32(time)
        source = lambda: fixed  # noqa: E731
    else:
        source = lambda: unsigned32(int(_time.time()))  # noqa: E731

    instance = Instance(module, memory, globals_, table, source)

    if module.start is not None:
        result = _run(instance, module.start, [], _fresh_counters(), {})
        if isinstance(result, _Trap):
            raise LinkError(f"start function trapped: {result.reason.value}")
    return instance


def poke_input(instance: Instance, addr: int, data: bytes) -> None:
    """Write attacker/benign input bytes directly into linear memory."""
    if addr < 0 or addr + len(data) > len(instance.memory):
        raise InvokeError(
            f"input write [{addr}, {addr + len(data)}) outside memory bounds"
        )
    instance.memory[addr:addr + len(data)] = data


def invoke(instance: Instance, export_name: str, args: list[int] | None = None) -> RunResult:
    """Run an exported function and collect counters and call counts."""
    args = list(args or [])
    module = instance.module
    export = next(
        (e for e in module.exports if e.name == export_name and e.kind == "func"),
        None,
    )
    if export is None:
        raise InvokeError(f"no exported function named {export_name!r}")
    sig = module.func_sig(export.index)
    if len(args) != len(sig.params):
        raise InvokeError(
            f"{export_name} takes {len(sig.params)} argument(s), got {len(args)}"
        )

    counters = _fresh_counters()
    call_counts: dict[int, int] = {}
    outcome = _run(instance, export.index, [unsigned32(a) for a in args],
                   counters, call_counts)
    if isinstance(outcome, _Trap):
        return RunResult(None, outcome.reason, counters, call_counts)
    return RunResult([signed32(v) for v in outcome], None, counters, call_counts)


class _Frame:
    __slots__ = ("func_index", "body", "pc", "locals", "stack", "labels",
                 "result_arity", "ends")

    def __init__(self, func_index, body, locals_, result_arity, ends):
        self.func_index = func_index
        self.body = body
        self.pc = 0
        self.locals = locals_
        self.stack: list[int] = []
        # (target_pc, arity, stack_height, is_loop); index 0 is the
        # implicit function label whose target is one past the last
        # instruction.
        self.labels: list[tuple[int, int, int, bool]] = [
            (len(body), result_arity, 0, False)
        ]
        self.result_arity = result_arity
        self.ends = ends


def _run(instance: Instance, func_index: int, args: list[int],
         counters: dict[str, int], call_counts: dict[int, int]):
    """Execute a function; returns result list or a _Trap."""
    module = instance.module
    memory = instance.memory
    globals_ = instance.globals
    table = instance.table
    n_imports = module.num_func_imports()

    def make_frame(index: int, call_args: list[int]) -> _Frame:
        fn = module.functions[index - n_imports]
        sig = module.types[fn.type_index]
        locals_ = call_args + [0] * len(fn.locals)
        arity = 1 if sig.result is not None else 0
        return _Frame(index, fn.body, locals_, arity,
                      instance._ends(index - n_imports, fn.body))

    def count_activation(index: int) -> None:
        call_counts[index] = call_counts.get(index, 0) + 1

    frames: list[_Frame] = []

    def enter(index: int, call_args: list[int]):
        if index < n_imports:
            # Only ("env", "time") links; the host body costs no instructions.
            count_activation(index)
            return [unsigned32(instance.time_source())]
        if len(frames) >= MAX_CALL_DEPTH:
            raise _Trap(TrapReason.StackExhausted)
        count_activation(index)
        frames.append(make_frame(index, call_args))
        return None

    try:
        host_result = enter(func_index, args)
        if host_result is not None:
            return host_result

        final: list[int] = []
        while frames:
            fr = frames[-1]
            body = fr.body
            if fr.pc >= len(body):
                results = fr.stack[len(fr.stack) - fr.result_arity:] if fr.result_arity else []
                frames.pop()
                if frames:
                    frames[-1].stack.extend(results)
                else:
                    final = results
                continue

            instr = body[fr.pc]
            fr.pc += 1
            op = instr.op
            counters[CATEGORY_OF[op]] += 1
            counters["total"] += 1
            stack = fr.stack

            if op == "local.get":
                stack.append(fr.locals[instr.arg])
            elif op == "local.set":
                fr.locals[instr.arg] = stack.pop()
            elif op == "local.tee":
                fr.locals[instr.arg] = stack[-1]
            elif op == "global.get":
                stack.append(globals_[instr.arg])
            elif op == "global.set":
                globals_[instr.arg] = stack.pop()
            elif op == "i32.const":
                stack.append(instr.arg & MASK)
            elif op == "i32.add":
                b = stack.pop()
                stack[-1] = (stack[-1] + b) & MASK
            elif op == "i32.sub":
                b = stack.pop()
                stack[-1] = (stack[-1] - b) & MASK
            elif op == "i32.mul":
                b = stack.pop()
                stack[-1] = (stack[-1] * b) & MASK
            elif op == "i32.and":
                b = stack.pop()
                stack[-1] &= b
            elif op == "i32.or":
                b = stack.pop()
                stack[-1] |= b
            elif op == "i32.xor":
                b = stack.pop()
                stack[-1] ^= b
            elif op == "i32.shl":
                b = stack.pop()
                stack[-1] = (stack[-1] << (b & 31)) & MASK
            elif op == "i32.shr_u":
                b = stack.pop()
                stack[-1] >>= (b & 31)
            elif op == "i32.shr_s":
                b = stack.pop()
                stack[-1] = (signed32(stack[-1]) >> (b & 31)) & MASK
            elif op == "i32.eq":
                b = stack.pop()
                stack[-1] = 1 if stack[-1] == b else 0
            elif op == "i32.ne":
                b = stack.pop()
                stack[-1] = 1 if stack[-1] != b else 0
            elif op == "i32.lt_u":
                b = stack.pop()
                stack[-1] = 1 if stack[-1] < b else 0
            elif op == "i32.gt_u":
                b = stack.pop()
                stack[-1] = 1 if stack[-1] > b else 0
            elif op == "i32.eqz":
                stack[-1] = 1 if stack[-1] == 0 else 0
            elif op == "i32.load":
                addr = stack.pop() + instr.offset
                if addr + 4 > len(memory):
                    raise _Trap(TrapReason.OutOfBoundsMemory)
                stack.append(int.from_bytes(memory[addr:addr + 4], "little"))
            elif op == "i32.store":
                value = stack.pop()
                addr = stack.pop() + instr.offset
                if addr + 4 > len(memory):
                    raise _Trap(TrapReason.OutOfBoundsMemory)
                memory[addr:addr + 4] = value.to_bytes(4, "little")
            elif op == "i32.load8_u":
                addr = stack.pop() + instr.offset
                if addr + 1 > len(memory):
                    raise _Trap(TrapReason.OutOfBoundsMemory)
                stack.append(memory[addr])
            elif op == "i32.store8":
                value = stack.pop()
                addr = stack.pop() + instr.offset
                if addr + 1 > len(memory):
                    raise _Trap(TrapReason.OutOfBoundsMemory)
                memory[addr] = value & 0xFF
            elif op == "memory.size":
                stack.append(len(memory) // PAGE_SIZE)
            elif op == "block":
                arity = 1 if instr.result is not None else 0
                fr.labels.append((fr.ends[fr.pc - 1], arity, len(stack), False))
            elif op == "loop":
                fr.labels.append((fr.pc, 0, len(stack), True))
            elif op == "end":
                fr.labels.pop()
            elif op in ("br", "br_if"):
                if op == "br_if":
                    if stack.pop() == 0:
                        continue
                    if instr.tag == CANARY_BRANCH_TAG:
                        # A passing canary check branches over its trap arm;
                        # charge that arm so the check costs its full static
                        # footprint per traversal (see docs/overhead-model.md).
                        counters[CONTROL] += 1
                        counters["total"] += 1
                depth = instr.arg
                target_pos = len(fr.labels) - 1 - depth
                target_pc, arity, height, is_loop = fr.labels[target_pos]
                values = stack[len(stack) - arity:] if arity else []
                del stack[height:]
                stack.extend(values)
                if target_pos == 0:
                    fr.pc = len(body)
                else:
                    # Keep the target label: a block's `end` pops it when the
                    # branch lands there; a loop label survives iteration.
                    del fr.labels[target_pos + 1:]
                    fr.pc = target_pc
            elif op == "return":
                arity = fr.result_arity
                values = stack[len(stack) - arity:] if arity else []
                del stack[fr.labels[0][2]:]
                stack.extend(values)
                fr.pc = len(body)
            elif op == "call":
                callee = instr.arg
                sig = module.func_sig(callee)
                n = len(sig.params)
                call_args = stack[len(stack) - n:] if n else []
                if n:
                    del stack[len(stack) - n:]
                host_result = enter(callee, call_args)
                if host_result is not None:
                    stack.extend(host_result)
            elif op == "call_indirect":
                index = stack.pop()
                if index >= len(table) or table[index] is None:
                    raise _Trap(TrapReason.UndefinedTableEntry)
                callee = table[index]
                declared = module.types[instr.arg]
                if module.func_sig(callee) != declared:
                    raise _Trap(TrapReason.SignatureMismatch)
                n = len(declared.params)
                call_args = stack[len(stack) - n:] if n else []
                if n:
                    del stack[len(stack) - n:]
                host_result = enter(callee, call_args)
                if host_result is not None:
                    stack.extend(host_result)
            elif op == "drop":
                stack.pop()
            elif op == "nop":
                pass
            elif op == "unreachable":
                if instr.tag == CANARY_TRAP_TAG:
                    raise _Trap(TrapReason.CanaryMismatch)
                raise _Trap(TrapReason.Unreachable)
            else:  # pragma: no cover - parser admits only the subset
                raise InvokeError(f"unhandled instruction {op!r}")
        return final
    except _Trap as trap:
        return trap

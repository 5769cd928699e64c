"""Stack-canary injection.

The prologue draws a fresh random value, pushes the stack pointer down by
4, and stores the value there; both the value and the slot address are
kept in function locals on the managed call stack, out of reach of linear
memory writes.  The epilogue reloads the slot, traps on mismatch, and
releases the 4 bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PassError
from .interp import CANARY_BRANCH_TAG, CANARY_TRAP_TAG
from .ir import FunctionDef, Instr, Module, StackPointerRef, fresh_local
from .rng import RAND_FUNC, RESERVED_SYMBOLS, SEED_FUNC, TIME_IMPORT
from .wrap import wrapper_bounds


@dataclass(frozen=True)
class CanaryLocals:
    value_local: int
    addr_local: int


def _helper_indices(module: Module) -> tuple[int, int, int]:
    indices = []
    for name in (TIME_IMPORT, SEED_FUNC, RAND_FUNC):
        index = module.find_function(name)
        if index is None:
            raise PassError(f"PRNG is not embedded: ${name} missing")
        indices.append(index)
    return tuple(indices)


def guard_self_instrumentation(func: FunctionDef) -> None:
    if func.name in RESERVED_SYMBOLS:
        raise PassError(f"refusing to instrument PRNG helper ${func.name}")


def inject_canary(module: Module, func: FunctionDef, sp: StackPointerRef,
                  seed: bool = True) -> CanaryLocals:
    """Add the canary prologue/epilogue around the exit wrapper of ``func``.

    With ``seed`` false the time fetch and seed call are omitted (another
    pass in the same function already seeded the generator).
    """
    guard_self_instrumentation(func)
    time_idx, seed_idx, rand_idx = _helper_indices(module)
    start, end = wrapper_bounds(func)

    value_local = fresh_local(module, func, "i32")
    addr_local = fresh_local(module, func, "i32")

    prologue: list[Instr] = []
    if seed:
        prologue += [Instr("call", arg=time_idx), Instr("call", arg=seed_idx)]
    prologue += [
        Instr("call", arg=rand_idx),
        Instr("local.set", arg=value_local),
        Instr("global.get", arg=sp.index),
        Instr("i32.const", arg=4),
        Instr("i32.sub"),
        Instr("global.set", arg=sp.index),
        Instr("global.get", arg=sp.index),
        Instr("local.get", arg=value_local),
        Instr("i32.store"),
        Instr("global.get", arg=sp.index),
        Instr("local.set", arg=addr_local),
    ]
    epilogue = [
        Instr("block"),
        Instr("local.get", arg=addr_local),
        Instr("i32.load"),
        Instr("local.get", arg=value_local),
        Instr("i32.eq"),
        Instr("br_if", arg=0, tag=CANARY_BRANCH_TAG),
        Instr("unreachable", tag=CANARY_TRAP_TAG),
        Instr("end"),
        Instr("global.get", arg=sp.index),
        Instr("i32.const", arg=4),
        Instr("i32.add"),
        Instr("global.set", arg=sp.index),
    ]

    func.body[end + 1:end + 1] = epilogue
    func.body[start:start] = prologue
    return CanaryLocals(value_local, addr_local)

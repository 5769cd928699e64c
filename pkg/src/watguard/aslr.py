"""Randomized stack-pointer offset injection.

At entry the pass snapshots the stack pointer into a local, then lowers it
by a random 4-byte-aligned offset in [0, 256); at exit the snapshot is
written back.  The offset derivation shifts the draw right by 26 and left
by 2; the right shift is logical so the offset can never be negative and
move the pointer up into the caller frame.
"""

from __future__ import annotations

from dataclasses import dataclass

from .canary import _helper_indices, guard_self_instrumentation
from .ir import FunctionDef, Instr, Module, StackPointerRef, fresh_local, unsigned32
from .wrap import wrapper_bounds

OFFSET_VALUES = tuple(range(0, 256, 4))


def offset_from_random(r: int) -> int:
    """Byte offset derived from a raw draw: (r >> 26) << 2, logical shift."""
    return (unsigned32(r) >> 26) << 2


@dataclass(frozen=True)
class AslrLocals:
    sp_save_local: int


def inject_aslr(module: Module, func: FunctionDef, sp: StackPointerRef,
                seed: bool = True) -> AslrLocals:
    """Add the offset prologue/epilogue around the exit wrapper of ``func``."""
    guard_self_instrumentation(func)
    time_idx, seed_idx, rand_idx = _helper_indices(module)
    start, end = wrapper_bounds(func)

    sp_save = fresh_local(module, func, "i32")

    prologue: list[Instr] = []
    if seed:
        prologue += [Instr("call", arg=time_idx), Instr("call", arg=seed_idx)]
    prologue += [
        Instr("global.get", arg=sp.index),
        Instr("local.set", arg=sp_save),
        Instr("global.get", arg=sp.index),
        Instr("call", arg=rand_idx),
        Instr("i32.const", arg=26),
        Instr("i32.shr_u"),
        Instr("i32.const", arg=2),
        Instr("i32.shl"),
        Instr("i32.sub"),
        Instr("global.set", arg=sp.index),
    ]
    epilogue = [
        Instr("local.get", arg=sp_save),
        Instr("global.set", arg=sp.index),
    ]

    func.body[end + 1:end + 1] = epilogue
    func.body[start:start] = prologue
    return AslrLocals(sp_save)

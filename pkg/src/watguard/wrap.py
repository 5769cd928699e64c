"""Single-exit body rewriting shared by the hardening passes.

Wrapping encloses the original body in one block carrying the function's
result type.  Every ``return`` becomes a branch to that block (its depth is
the number of labels open at that point), and branches that previously
targeted the implicit function label now target the block with the same
numeric depth.  Control therefore always falls out of the block into
whatever epilogue is injected after it.
"""

from __future__ import annotations

from .errors import PassError
from .ir import FunctionDef, Instr, Module

WRAPPER_TAG = "exit-wrapper"
WRAPPER_END_TAG = "exit-wrapper-end"


def wrap_body_for_epilogue(module: Module, func: FunctionDef) -> FunctionDef:
    """Normalize all exits of ``func`` through one trailing position."""
    result = module.types[func.type_index].result
    new_body: list[Instr] = [Instr("block", result=result, tag=WRAPPER_TAG)]
    depth = 0
    for instr in func.body:
        if instr.op == "return":
            new_body.append(Instr("br", arg=depth))
            continue
        if instr.op in ("block", "loop"):
            depth += 1
        elif instr.op == "end":
            depth -= 1
        new_body.append(instr)
    new_body.append(Instr("end", tag=WRAPPER_END_TAG))
    func.body = new_body
    return func


def wrapper_bounds(func: FunctionDef) -> tuple[int, int]:
    """Positions of the wrapper block and its end inside ``func.body``."""
    start = end = None
    for i, instr in enumerate(func.body):
        if instr.tag == WRAPPER_TAG:
            start = i
        elif instr.tag == WRAPPER_END_TAG:
            end = i
    if start is None or end is None:
        raise PassError("function body is not wrapped for epilogue injection")
    return start, end

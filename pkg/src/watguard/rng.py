"""Deterministic PRNG embedding and the host glue that feeds it.

The embedded generator is xorshift32 over a single mutable i32 global,
seeded from a host ``time`` import at function entry.  Seeding forces the
state away from zero (the one fixed point of xorshift32) by substituting
the xor constant itself.
"""

from __future__ import annotations

from .errors import EmbedError
from .ir import (
    FuncSig,
    FunctionDef,
    GlobalDef,
    ImportEntry,
    Instr,
    Module,
    signed32,
    unsigned32,
)

SEED_XOR = 0x9E3779B9

STATE_GLOBAL = "__prng_state"
SEED_FUNC = "__seed"
RAND_FUNC = "__rand"
TIME_IMPORT = "__time"

RESERVED_SYMBOLS = (STATE_GLOBAL, SEED_FUNC, RAND_FUNC, TIME_IMPORT)


def xorshift32_step(state: int) -> int:
    """One xorshift32 step; reference for the embedded ``__rand`` body."""
    if unsigned32(state) == 0:
        raise ValueError("xorshift32 state must be nonzero")
    s = unsigned32(state)
    s ^= unsigned32(s << 13)
    s ^= s >> 17
    s ^= unsigned32(s << 5)
    return s


def seed_transform(seed: int) -> int:
    """State produced by the embedded ``__seed`` for a given seed value."""
    s = unsigned32(seed) ^ SEED_XOR
    return s if s != 0 else SEED_XOR


def _seed_body(state_index: int) -> list[Instr]:
    k = signed32(SEED_XOR)
    # state = param ^ K; state |= (state == 0) * K  -- branch-free so the
    # helper costs the same instruction count on every call.
    return [
        Instr("local.get", arg=0),
        Instr("i32.const", arg=k),
        Instr("i32.xor"),
        Instr("global.set", arg=state_index),
        Instr("global.get", arg=state_index),
        Instr("global.get", arg=state_index),
        Instr("i32.eqz"),
        Instr("i32.const", arg=k),
        Instr("i32.mul"),
        Instr("i32.or"),
        Instr("global.set", arg=state_index),
    ]


def _rand_body(state_index: int) -> list[Instr]:
    body: list[Instr] = []
    for shift_op, amount in (("i32.shl", 13), ("i32.shr_u", 17), ("i32.shl", 5)):
        body += [
            Instr("global.get", arg=state_index),
            Instr("global.get", arg=state_index),
            Instr("i32.const", arg=amount),
            Instr(shift_op),
            Instr("i32.xor"),
            Instr("global.set", arg=state_index),
        ]
    body.append(Instr("global.get", arg=state_index))
    return body


def _shift_function_indices(module: Module, from_index: int) -> None:
    """Bump function references at or above ``from_index`` by one."""
    def bump(i: int) -> int:
        return i + 1 if i >= from_index else i

    for fn in module.functions:
        for instr in fn.body:
            if instr.op == "call":
                instr.arg = bump(instr.arg)
    for elem in module.elems:
        elem.funcs = [bump(f) for f in elem.funcs]
    for exp in module.exports:
        if exp.kind == "func":
            exp.index = bump(exp.index)
    if module.start is not None:
        module.start = bump(module.start)


def embed_prng(module: Module) -> Module:
    """Add the time import, state global, and seed/draw functions in place.

    Raises EmbedError if any reserved symbol or the ("env", "time") import
    already exists, so a second embedding never duplicates code.
    """
    for g in module.globals:
        if g.name == STATE_GLOBAL:
            raise EmbedError(f"symbol collision: global ${STATE_GLOBAL} already defined")
    for name in (SEED_FUNC, RAND_FUNC, TIME_IMPORT):
        if module.find_function(name) is not None:
            raise EmbedError(f"symbol collision: function ${name} already defined")
    for imp in module.imports:
        if (imp.module, imp.name) == ("env", "time"):
            raise EmbedError('import ("env", "time") already present')

    time_type = module.intern_type(FuncSig((), "i32"))
    seed_type = module.intern_type(FuncSig(("i32",), None))

    new_import_index = module.num_func_imports()
    _shift_function_indices(module, new_import_index)
    module.imports.append(
        ImportEntry("env", "time", "func", time_type, TIME_IMPORT)
    )

    state_index = len(module.globals)
    module.globals.append(
        GlobalDef("i32", True, signed32(SEED_XOR), STATE_GLOBAL)
    )

    module.functions.append(
        FunctionDef(seed_type, [], _seed_body(state_index), SEED_FUNC, [None])
    )
    module.functions.append(
        FunctionDef(time_type, [], _rand_body(state_index), RAND_FUNC)
    )
    return module


_GLUE_TEMPLATE = '''\
// Host glue for a watguard-hardened module.  require() this file and call
// createImports(opts) to build the import object; pass {{time: N}} to pin
// the clock for reproducible runs.
"use strict";

function createImports(opts) {{
  opts = opts || {{}};
  return {{
{entries}
  }};
}}

module.exports = {{ createImports: createImports }};
'''

_TIME_LIVE = "Math.floor(Date.now() / 1000) | 0"


def emit_host_glue(module: Module, deterministic: int | None = None) -> str:
    """Host embedding script providing exactly the module's declared imports."""
    if not any((imp.module, imp.name) == ("env", "time") for imp in module.imports):
        raise EmbedError('module does not import ("env", "time"); embed the PRNG first')

    by_module: dict[str, list[str]] = {}
    for imp in module.imports:
        by_module.setdefault(imp.module, []).append(imp.name)

    blocks = []
    for mod_name, fields in by_module.items():
        lines = [f'    "{mod_name}": {{']
        for field in fields:
            if (mod_name, field) == ("env", "time"):
                default = f"({deterministic}) | 0" if deterministic is not None else _TIME_LIVE
                lines.append(
                    f'      "{field}": function () {{'
                    f" return opts.time !== undefined ? opts.time | 0 : {default}; }},"
                )
            else:
                lines.append(
                    f'      "{field}": function () {{'
                    f' throw new Error("no host implementation: {mod_name}.{field}"); }},'
                )
        lines.append("    },")
        blocks.append("\n".join(lines))
    return _GLUE_TEMPLATE.format(entries="\n".join(blocks))

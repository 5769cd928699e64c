"""Canonical flat-form text emission for module IR.

``parse_module(print_module(m))`` is structurally equal to ``m`` for every
module the parser accepts.  Output follows binary section order and prints
symbols wherever the IR retained them.
"""

from __future__ import annotations

from .ir import FuncSig, FunctionDef, Module

_PRINTABLE = set(range(0x20, 0x7F)) - {0x22, 0x5C}


def _escape_bytes(data: bytes) -> str:
    out = []
    for b in data:
        if b in _PRINTABLE:
            out.append(chr(b))
        else:
            out.append(f"\\{b:02x}")
    return "".join(out)


def _escape_name(name: str) -> str:
    return _escape_bytes(name.encode("utf-8"))


def _sig_text(sig: FuncSig, param_names: list[str | None] | None = None) -> str:
    parts = []
    names = param_names or [None] * len(sig.params)
    if sig.params:
        if any(n is not None for n in names):
            for kind, name in zip(sig.params, names):
                parts.append(f"(param ${name} {kind})" if name else f"(param {kind})")
        else:
            parts.append("(param " + " ".join(sig.params) + ")")
    if sig.result is not None:
        parts.append(f"(result {sig.result})")
    return " ".join(parts)


def _func_ref(module: Module, index: int) -> str:
    name = module.func_name(index)
    return f"${name}" if name else str(index)


def _global_ref(module: Module, index: int) -> str:
    name = module.globals[index].name
    return f"${name}" if name else str(index)


def _instr_text(module: Module, fn: FunctionDef, instr) -> str:
    op = instr.op
    if op == "i32.const":
        return f"i32.const {instr.arg}"
    if op in ("local.get", "local.set", "local.tee"):
        names = fn.local_names
        if instr.arg < len(names) and names[instr.arg]:
            return f"{op} ${names[instr.arg]}"
        return f"{op} {instr.arg}"
    if op in ("global.get", "global.set"):
        return f"{op} {_global_ref(module, instr.arg)}"
    if op == "call":
        return f"call {_func_ref(module, instr.arg)}"
    if op in ("br", "br_if"):
        return f"{op} {instr.arg}"
    if op in ("block", "loop"):
        return op + (f" (result {instr.result})" if instr.result else "")
    if op == "call_indirect":
        return f"call_indirect (type {instr.arg})"
    if op in ("i32.load", "i32.store", "i32.load8_u", "i32.store8"):
        text = op
        if instr.offset:
            text += f" offset={instr.offset}"
        if instr.align is not None:
            text += f" align={instr.align}"
        return text
    return op


def _print_function(module: Module, fn: FunctionDef, lines: list[str]) -> None:
    sig = module.types[fn.type_index]
    n_params = len(sig.params)
    param_names = fn.local_names[:n_params] if fn.local_names else None
    header = "  (func"
    if fn.name:
        header += f" ${fn.name}"
    header += f" (type {fn.type_index})"
    sig_text = _sig_text(sig, param_names)
    if sig_text:
        header += " " + sig_text
    lines.append(header)

    local_names = fn.local_names[n_params:] if fn.local_names else [None] * len(fn.locals)
    if fn.locals:
        if any(n is not None for n in local_names):
            for kind, name in zip(fn.locals, local_names):
                lines.append(f"    (local ${name} {kind})" if name else f"    (local {kind})")
        else:
            lines.append("    (local " + " ".join(fn.locals) + ")")

    depth = 0
    for instr in fn.body:
        if instr.op == "end":
            depth = max(depth - 1, 0)
        lines.append("    " + "  " * depth + _instr_text(module, fn, instr))
        if instr.op in ("block", "loop"):
            depth += 1
    lines.append("  )")


def print_module(module: Module) -> str:
    """Emit flat-form text that reparses to a structurally equal module."""
    empty = not any(
        (
            module.types, module.imports, module.functions, module.globals,
            module.data, module.elems, module.exports,
        )
    ) and module.memory is None and module.table is None and module.start is None
    if empty:
        return "(module)\n"

    lines = ["(module"]
    for sig in module.types:
        body = _sig_text(sig)
        lines.append(f"  (type (func {body}))" if body else "  (type (func))")
    for imp in module.imports:
        sym = f" ${imp.symbol}" if imp.symbol else ""
        lines.append(
            f'  (import "{_escape_name(imp.module)}" "{_escape_name(imp.name)}"'
            f" (func{sym} (type {imp.type_index})))"
        )
    for fn in module.functions:
        _print_function(module, fn, lines)
    if module.table is not None:
        mn, mx = module.table
        sizes = f"{mn} {mx}" if mx is not None else f"{mn}"
        lines.append(f"  (table {sizes} funcref)")
    if module.memory is not None:
        mn, mx = module.memory
        sizes = f"{mn} {mx}" if mx is not None else f"{mn}"
        lines.append(f"  (memory {sizes})")
    for g in module.globals:
        name = f" ${g.name}" if g.name else ""
        kind = f"(mut {g.kind})" if g.mutable else g.kind
        lines.append(f"  (global{name} {kind} (i32.const {g.init}))")
    for exp in module.exports:
        if exp.kind == "func":
            ref = _func_ref(module, exp.index)
        elif exp.kind == "global":
            ref = _global_ref(module, exp.index)
        else:
            ref = str(exp.index)
        lines.append(f'  (export "{_escape_name(exp.name)}" ({exp.kind} {ref}))')
    if module.start is not None:
        lines.append(f"  (start {_func_ref(module, module.start)})")
    for elem in module.elems:
        refs = " ".join(_func_ref(module, f) for f in elem.funcs)
        refs = f" {refs}" if refs else ""
        lines.append(f"  (elem (i32.const {elem.offset}) func{refs})")
    for seg in module.data:
        lines.append(f'  (data (i32.const {seg.offset}) "{_escape_bytes(seg.data)}")')
    lines.append(")")
    return "\n".join(lines) + "\n"

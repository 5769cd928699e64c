"""Parser for the supported WebAssembly text-format subset.

Accepts one ``(module ...)`` per file.  Function bodies must be in flat
(non-folded) instruction form; the only parenthesized items allowed inside
a body are ``(result i32)`` after block/loop and ``(type k)`` after
call_indirect.  The full grammar is documented in docs/wat-subset.md.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .lexer import (
    ID,
    INT,
    KEYWORD,
    LPAREN,
    RPAREN,
    STRING,
    SourceSpan,
    Token,
    tokenize,
)
from .ir import (
    DataSegment,
    ElemSegment,
    ExportEntry,
    FuncSig,
    FunctionDef,
    GlobalDef,
    ImportEntry,
    Instr,
    Module,
    SUPPORTED_OPS,
    signed32,
)

I32_MIN = -(2**31)
U32_MAX = 2**32 - 1

# Natural alignment per memory instruction; explicit align equal to the
# natural one is normalized away.
_NATURAL_ALIGN = {
    "i32.load": 4,
    "i32.store": 4,
    "i32.load8_u": 1,
    "i32.store8": 1,
}

_NO_IMMEDIATE_OPS = frozenset(
    op for op in SUPPORTED_OPS
    if op.startswith("i32.") and op not in _NATURAL_ALIGN
) | frozenset(("unreachable", "return", "nop", "drop", "end", "memory.size"))
_NO_IMMEDIATE_OPS -= {"i32.const"}


@dataclass
class _SList:
    items: list
    span: SourceSpan


def _build_sexprs(tokens: list[Token]):
    """Group a token stream into nested lists."""
    stack: list[_SList] = [_SList([], SourceSpan(1, 1, 0))]
    for tok in tokens:
        if tok.kind == LPAREN:
            node = _SList([], tok.span)
            stack[-1].items.append(node)
            stack.append(node)
        elif tok.kind == RPAREN:
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", tok.span)
            stack.pop()
        else:
            stack[-1].items.append(tok)
    if len(stack) != 1:
        raise ParseError("unbalanced '(': missing ')'", stack[-1].span)
    return stack[0].items


def _is_kw(item, word: str | None = None) -> bool:
    return (
        isinstance(item, Token)
        and item.kind == KEYWORD
        and (word is None or item.text == word)
    )


def _head(node: _SList) -> str:
    if node.items and _is_kw(node.items[0]):
        return node.items[0].text
    raise ParseError("expected a keyword after '('", node.span)


class _ModuleParser:
    def __init__(self, fields: list[_SList]):
        self.fields = fields
        self.module = Module()
        self.type_names: dict[str, int] = {}
        self.func_names: dict[str, int] = {}
        self.global_names: dict[str, int] = {}
        self.n_explicit_types = 0
        self._global_pos = 0

    # -- shared helpers -------------------------------------------------

    def _fail(self, message: str, span: SourceSpan):
        raise ParseError(message, span)

    def _register_name(self, table: dict[str, int], tok: Token, index: int, what: str):
        name = tok.value
        if name in table:
            self._fail(f"duplicate {what} name ${name}", tok.span)
        table[name] = index

    def _expect_int(self, item, what: str, span: SourceSpan) -> int:
        if not (isinstance(item, Token) and item.kind == INT):
            self._fail(f"expected integer {what}", item.span if isinstance(item, (Token, _SList)) else span)
        return item.value

    def _resolve(self, item, table: dict[str, int], count: int, what: str) -> int:
        if isinstance(item, Token) and item.kind == INT:
            if not (0 <= item.value < count):
                self._fail(f"{what} index {item.value} out of range", item.span)
            return item.value
        if isinstance(item, Token) and item.kind == ID:
            if item.value not in table:
                self._fail(f"unresolved symbol ${item.value}", item.span)
            return table[item.value]
        span = item.span if isinstance(item, (Token, _SList)) else None
        self._fail(f"expected {what} index or symbol", span)

    # -- pass 1: declarations -------------------------------------------

    def collect(self):
        mod = self.module
        for node in self.fields:
            if not isinstance(node, _SList):
                self._fail("expected a parenthesized module field", node.span)
            head = _head(node)
            if head == "type":
                items = node.items[1:]
                if items and isinstance(items[0], Token) and items[0].kind == ID:
                    self._register_name(self.type_names, items[0], len(mod.types), "type")
                    items = items[1:]
                if len(items) != 1 or not isinstance(items[0], _SList) or _head(items[0]) != "func":
                    self._fail("type must contain a single (func ...) signature", node.span)
                mod.types.append(self._parse_sig_clauses(items[0].items[1:], allow_names=False)[0])
            elif head == "import":
                self._collect_import(node)
            elif head == "func":
                items = node.items[1:]
                name = None
                if items and isinstance(items[0], Token) and items[0].kind == ID:
                    name = items[0].value
                    self._register_name(self.func_names, items[0], -1, "function")
                mod.functions.append(FunctionDef(type_index=-1, name=name))
            elif head == "global":
                items = node.items[1:]
                if items and isinstance(items[0], Token) and items[0].kind == ID:
                    self._register_name(self.global_names, items[0], len(mod.globals), "global")
                mod.globals.append(GlobalDef("i32", False, 0))
        self.n_explicit_types = len(mod.types)
        # Imported functions occupy the low indices; shift defined ones up.
        n_imp = mod.num_func_imports()
        defined_pos = 0
        for node in self.fields:
            if isinstance(node, _SList) and _head(node) == "func":
                fn = mod.functions[defined_pos]
                if fn.name is not None:
                    self.func_names[fn.name] = n_imp + defined_pos
                defined_pos += 1

    def _collect_import(self, node: _SList):
        items = node.items[1:]
        if len(items) != 3 or not all(
            isinstance(items[i], Token) and items[i].kind == STRING for i in (0, 1)
        ) or not isinstance(items[2], _SList):
            self._fail('import must be (import "mod" "name" (func ...))', node.span)
        desc = items[2]
        kind = _head(desc)
        if kind != "func":
            self._fail(f"unsupported import kind {kind!r}", desc.span)
        rest = desc.items[1:]
        symbol = None
        if rest and isinstance(rest[0], Token) and rest[0].kind == ID:
            symbol = rest[0].value
            self._register_name(self.func_names, rest[0], self.module.num_func_imports(), "function")
            rest = rest[1:]
        self.module.imports.append(
            ImportEntry(
                module=items[0].value.decode("utf-8"),
                name=items[1].value.decode("utf-8"),
                kind="func",
                type_index=-1,
                symbol=symbol,
            )
        )

    # -- signature clauses ----------------------------------------------

    def _parse_valtype(self, item) -> str:
        if _is_kw(item, "i32"):
            return "i32"
        span = item.span if isinstance(item, (Token, _SList)) else None
        self._fail("only the i32 value kind is supported", span)

    def _parse_sig_clauses(self, items: list, allow_names: bool):
        """Parse (param ...)* (result t)? clauses.

        Returns (FuncSig, param_names, remaining_items).
        """
        params: list[str] = []
        param_names: list[str | None] = []
        result: str | None = None
        i = 0
        while i < len(items) and isinstance(items[i], _SList) and _head(items[i]) == "param":
            clause = items[i].items[1:]
            if clause and isinstance(clause[0], Token) and clause[0].kind == ID:
                if not allow_names:
                    self._fail("named params are not allowed here", clause[0].span)
                if len(clause) != 2:
                    self._fail("a named param declares exactly one value", items[i].span)
                params.append(self._parse_valtype(clause[1]))
                param_names.append(clause[0].value)
            else:
                for item in clause:
                    params.append(self._parse_valtype(item))
                    param_names.append(None)
            i += 1
        if i < len(items) and isinstance(items[i], _SList) and _head(items[i]) == "result":
            clause = items[i].items[1:]
            if len(clause) != 1:
                self._fail("at most one result value is supported", items[i].span)
            result = self._parse_valtype(clause[0])
            i += 1
        return FuncSig(tuple(params), result), param_names, items[i:]

    def _parse_typeuse(self, items: list, span: SourceSpan):
        """Parse (type k)? followed by optional inline param/result clauses."""
        type_index = None
        if items and isinstance(items[0], _SList) and _head(items[0]) == "type":
            ref = items[0].items[1:]
            if len(ref) != 1:
                self._fail("(type ...) takes a single index", items[0].span)
            type_index = self._resolve(ref[0], self.type_names, self.n_explicit_types, "type")
            items = items[1:]
        sig, param_names, items = self._parse_sig_clauses(items, allow_names=True)
        if type_index is not None:
            declared = self.module.types[type_index]
            if sig.params or sig.result is not None:
                if sig != declared:
                    self._fail("inline signature does not match its (type ...) use", span)
            else:
                param_names = [None] * len(declared.params)
            return type_index, param_names, items
        return self.module.intern_type(sig), param_names, items

    # -- pass 2: full fields ----------------------------------------------

    def parse(self) -> Module:
        self.collect()
        mod = self.module
        import_pos = 0
        defined_pos = 0
        for node in self.fields:
            head = _head(node)
            if head == "type":
                continue
            if head == "import":
                entry = mod.imports[import_pos]
                desc = node.items[3]
                rest = desc.items[1:]
                if rest and isinstance(rest[0], Token) and rest[0].kind == ID:
                    rest = rest[1:]
                entry.type_index, _, leftover = self._parse_typeuse(rest, desc.span)
                if leftover:
                    self._fail("unexpected tokens in import description", desc.span)
                import_pos += 1
            elif head == "func":
                self._parse_func(node, mod.functions[defined_pos])
                defined_pos += 1
            elif head == "global":
                self._parse_global(node)
            elif head == "memory":
                self._parse_memory(node)
            elif head == "table":
                self._parse_table(node)
            elif head == "data":
                self._parse_data(node)
            elif head == "elem":
                self._parse_elem(node)
            elif head == "export":
                self._parse_export(node)
            elif head == "start":
                items = node.items[1:]
                if len(items) != 1:
                    self._fail("start takes a single function", node.span)
                mod.start = self._resolve(
                    items[0], self.func_names,
                    mod.num_func_imports() + len(mod.functions), "function",
                )
            else:
                self._fail(f"unsupported module field {head!r}", node.span)
        return mod

    def _parse_global(self, node: _SList):
        items = node.items[1:]
        gdef = self.module.globals[self._global_pos]
        self._global_pos += 1
        if items and isinstance(items[0], Token) and items[0].kind == ID:
            gdef.name = items[0].value
            items = items[1:]
        if len(items) != 2:
            self._fail("global must declare a kind and an initializer", node.span)
        kind_item, init = items
        if isinstance(kind_item, _SList) and _head(kind_item) == "mut":
            gdef.mutable = True
            if len(kind_item.items) != 2:
                self._fail("(mut ...) takes a single value kind", kind_item.span)
            gdef.kind = self._parse_valtype(kind_item.items[1])
        else:
            gdef.mutable = False
            gdef.kind = self._parse_valtype(kind_item)
        gdef.init = signed32(self._parse_const_expr(init))

    def _parse_const_expr(self, item) -> int:
        if not (isinstance(item, _SList) and len(item.items) == 2 and _is_kw(item.items[0], "i32.const")):
            span = item.span if isinstance(item, (Token, _SList)) else None
            self._fail("expected an (i32.const ...) initializer", span)
        value = self._expect_int(item.items[1], "constant", item.span)
        if not (I32_MIN <= value <= U32_MAX):
            self._fail(f"constant {value} outside the 32-bit range", item.span)
        return value

    def _parse_memory(self, node: _SList):
        if self.module.memory is not None:
            self._fail("at most one memory is supported", node.span)
        items = node.items[1:]
        if items and isinstance(items[0], Token) and items[0].kind == ID:
            items = items[1:]
        if not 1 <= len(items) <= 2:
            self._fail("memory takes a min page count and an optional max", node.span)
        mn = self._expect_int(items[0], "page count", node.span)
        mx = self._expect_int(items[1], "page count", node.span) if len(items) == 2 else None
        self.module.memory = (mn, mx)

    def _parse_table(self, node: _SList):
        if self.module.table is not None:
            self._fail("at most one table is supported", node.span)
        items = node.items[1:]
        if items and isinstance(items[0], Token) and items[0].kind == ID:
            items = items[1:]
        if not (items and _is_kw(items[-1], "funcref")):
            self._fail("table must have element kind funcref", node.span)
        sizes = items[:-1]
        if not 1 <= len(sizes) <= 2:
            self._fail("table takes a min size and an optional max", node.span)
        mn = self._expect_int(sizes[0], "table size", node.span)
        mx = self._expect_int(sizes[1], "table size", node.span) if len(sizes) == 2 else None
        self.module.table = (mn, mx)

    def _parse_data(self, node: _SList):
        items = node.items[1:]
        if items and isinstance(items[0], Token) and items[0].kind == ID:
            items = items[1:]
        if not items:
            self._fail("data needs an offset and bytes", node.span)
        offset = self._parse_const_expr(items[0])
        chunks = bytearray()
        for item in items[1:]:
            if not (isinstance(item, Token) and item.kind == STRING):
                self._fail("data contents must be string literals", node.span)
            chunks.extend(item.value)
        self.module.data.append(DataSegment(offset, bytes(chunks)))

    def _parse_elem(self, node: _SList):
        items = node.items[1:]
        if not items:
            self._fail("elem needs an offset", node.span)
        offset = self._parse_const_expr(items[0])
        items = items[1:]
        if items and _is_kw(items[0], "func"):
            items = items[1:]
        count = self.module.num_func_imports() + len(self.module.functions)
        funcs = [self._resolve(item, self.func_names, count, "function") for item in items]
        self.module.elems.append(ElemSegment(offset, funcs))

    def _parse_export(self, node: _SList):
        items = node.items[1:]
        if len(items) != 2 or not (isinstance(items[0], Token) and items[0].kind == STRING):
            self._fail('export must be (export "name" (kind idx))', node.span)
        if not isinstance(items[1], _SList):
            self._fail("export needs a (kind idx) descriptor", node.span)
        desc = items[1]
        kind = _head(desc)
        ref = desc.items[1:]
        if len(ref) != 1:
            self._fail("export descriptor takes a single index", desc.span)
        mod = self.module
        if kind == "func":
            index = self._resolve(ref[0], self.func_names,
                                  mod.num_func_imports() + len(mod.functions), "function")
        elif kind == "global":
            index = self._resolve(ref[0], self.global_names, len(mod.globals), "global")
        elif kind == "memory":
            index = self._expect_int(ref[0], "memory index", desc.span)
            if index != 0 or mod.memory is None:
                self._fail("export references a missing memory", desc.span)
        elif kind == "table":
            index = self._expect_int(ref[0], "table index", desc.span)
            if index != 0 or mod.table is None:
                self._fail("export references a missing table", desc.span)
        else:
            self._fail(f"unsupported export kind {kind!r}", desc.span)
        mod.exports.append(ExportEntry(items[0].value.decode("utf-8"), kind, index))

    # -- function bodies ---------------------------------------------------

    def _parse_func(self, node: _SList, fn: FunctionDef):
        items = node.items[1:]
        if items and isinstance(items[0], Token) and items[0].kind == ID:
            items = items[1:]
        fn.type_index, param_names, items = self._parse_typeuse(items, node.span)

        local_names: list[str | None] = list(param_names)
        while items and isinstance(items[0], _SList) and _head(items[0]) == "local":
            clause = items[0].items[1:]
            if clause and isinstance(clause[0], Token) and clause[0].kind == ID:
                if len(clause) != 2:
                    self._fail("a named local declares exactly one value", items[0].span)
                fn.locals.append(self._parse_valtype(clause[1]))
                local_names.append(clause[0].value)
            else:
                for item in clause:
                    fn.locals.append(self._parse_valtype(item))
                    local_names.append(None)
            items = items[1:]
        fn.local_names = local_names

        local_table = {
            name: i for i, name in enumerate(local_names) if name is not None
        }
        n_locals = len(self.module.types[fn.type_index].params) + len(fn.locals)
        fn.body = self._parse_body(items, local_table, n_locals, node.span)

    def _parse_body(self, items: list, local_table: dict[str, int],
                    n_locals: int, func_span: SourceSpan) -> list[Instr]:
        body: list[Instr] = []
        labels: list[str | None] = []
        i = 0

        def take(expect_what: str):
            nonlocal i
            if i >= len(items):
                self._fail(f"missing {expect_what} at end of function body", func_span)
            item = items[i]
            i += 1
            return item

        while i < len(items):
            item = take("instruction")
            if isinstance(item, _SList):
                self._fail(
                    "folded expression syntax is not supported; "
                    "write bodies in flat instruction form",
                    item.span,
                )
            if item.kind != KEYWORD:
                self._fail(f"expected an instruction, found {item.text!r}", item.span)
            op = item.text
            span = item.span

            if op in _NO_IMMEDIATE_OPS:
                if op == "end":
                    if not labels:
                        self._fail("'end' without an open block", span)
                    labels.pop()
                body.append(Instr(op))
            elif op == "i32.const":
                value = self._expect_int(take("immediate for i32.const"), "immediate for i32.const", span)
                if not (I32_MIN <= value <= U32_MAX):
                    self._fail(f"constant {value} outside the 32-bit range", span)
                body.append(Instr(op, arg=signed32(value)))
            elif op in ("local.get", "local.set", "local.tee"):
                index = self._resolve(take("local index"), local_table, n_locals, "local")
                body.append(Instr(op, arg=index))
            elif op in ("global.get", "global.set"):
                index = self._resolve(take("global index"), self.global_names,
                                      len(self.module.globals), "global")
                body.append(Instr(op, arg=index))
            elif op == "call":
                count = self.module.num_func_imports() + len(self.module.functions)
                index = self._resolve(take("function index"), self.func_names, count, "function")
                body.append(Instr(op, arg=index))
            elif op in ("br", "br_if"):
                target = take("label")
                if isinstance(target, Token) and target.kind == ID:
                    depth = None
                    for back, name in enumerate(reversed(labels)):
                        if name == target.value:
                            depth = back
                            break
                    if depth is None:
                        self._fail(f"unresolved label ${target.value}", target.span)
                else:
                    depth = self._expect_int(target, "label depth", span)
                    if not 0 <= depth <= len(labels):
                        self._fail(f"label depth {depth} out of range", span)
                body.append(Instr(op, arg=depth))
            elif op in ("block", "loop"):
                label = None
                if i < len(items) and isinstance(items[i], Token) and items[i].kind == ID:
                    label = items[i].value
                    i += 1
                result = None
                if i < len(items) and isinstance(items[i], _SList) and _head(items[i]) == "result":
                    clause = items[i].items[1:]
                    if len(clause) != 1:
                        self._fail("at most one block result is supported", items[i].span)
                    result = self._parse_valtype(clause[0])
                    i += 1
                labels.append(label)
                body.append(Instr(op, result=result))
            elif op == "call_indirect":
                if not (i < len(items) and isinstance(items[i], _SList)
                        and _head(items[i]) == "type"):
                    self._fail("call_indirect requires a (type k) annotation", span)
                ref = items[i].items[1:]
                if len(ref) != 1:
                    self._fail("(type ...) takes a single index", items[i].span)
                type_index = self._resolve(ref[0], self.type_names,
                                           self.n_explicit_types, "type")
                i += 1
                body.append(Instr(op, arg=type_index))
            elif op in _NATURAL_ALIGN:
                offset = 0
                align = None
                while i < len(items) and _is_kw(items[i]) and "=" in items[i].text:
                    key, _, raw = items[i].text.partition("=")
                    try:
                        value = int(raw, 0)
                    except ValueError:
                        self._fail(f"malformed {key} value {raw!r}", items[i].span)
                    if key == "offset":
                        offset = value
                    elif key == "align":
                        align = None if value == _NATURAL_ALIGN[op] else value
                    else:
                        self._fail(f"unknown memory immediate {key!r}", items[i].span)
                    i += 1
                body.append(Instr(op, offset=offset, align=align))
            else:
                self._fail(f"unknown instruction {op!r}", span)

        if labels:
            self._fail("unbalanced block: missing 'end'", func_span)
        return body


def parse_module(text: str) -> Module:
    """Parse a .wat module in the supported subset into its IR."""
    tokens = tokenize(text)
    top = _build_sexprs(tokens)
    if len(top) != 1 or not isinstance(top[0], _SList):
        span = top[0].span if top and isinstance(top[0], (Token, _SList)) else SourceSpan(1, 1, 0)
        raise ParseError("expected a single (module ...) form", span)
    root = top[0]
    if _head(root) != "module":
        raise ParseError("expected a single (module ...) form", root.span)
    return _ModuleParser(root.items[1:]).parse()

"""Printer round-trip: corpus modules, transformed modules, generated modules."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import watguard as wg
from watguard.ir import (
    DataSegment,
    ElemSegment,
    ExportEntry,
    FuncSig,
    FunctionDef,
    GlobalDef,
    Instr,
    Module,
)

from conftest import CASE_NAMES, CORPUS_DIR, MODES, make_config


def roundtrip(module: Module) -> Module:
    return wg.parse_module(wg.print_module(module))


class TestBasics:
    def test_empty_module(self):
        assert wg.print_module(Module()) == "(module)\n"

    def test_corpus_roundtrip(self):
        for name in CASE_NAMES:
            module = wg.parse_module((CORPUS_DIR / f"{name}.wat").read_text())
            assert roundtrip(module) == module, name

    def test_transformed_corpus_roundtrip(self):
        for name in CASE_NAMES:
            module = wg.parse_module((CORPUS_DIR / f"{name}.wat").read_text())
            for mode in ("aslr", "canary", "both"):
                protected, _ = wg.apply_passes(module, make_config(mode))
                assert roundtrip(protected) == protected, (name, mode)

    def test_canary_prologue_prints_expected_sequence(self):
        # The injected prologue is a const/call/local/store sequence ending
        # in the stack-pointer update.
        module = wg.parse_module(
            "(module (global $__stack_pointer (mut i32) (i32.const 256))"
            " (memory 1) (func $f))"
        )
        protected, _ = wg.apply_passes(module, make_config("canary"))
        text = wg.print_module(protected)
        body = text[text.index("(func $f"):]
        for snippet in (
            "call $__time",
            "call $__seed",
            "call $__rand",
            "global.get $__stack_pointer",
            "i32.const 4",
            "i32.sub",
            "i32.store",
            "unreachable",
        ):
            assert snippet in body
        assert body.index("call $__time") < body.index("i32.store")

    def test_negative_const_roundtrip(self):
        module = wg.parse_module("(module (func $f i32.const -1640531527 drop))")
        assert roundtrip(module) == module


# -- generated-module strategy ------------------------------------------

_simple_ops = st.sampled_from(
    ["i32.add", "i32.sub", "i32.mul", "i32.and", "i32.or", "i32.xor",
     "i32.shl", "i32.shr_s", "i32.shr_u", "i32.eq", "i32.ne", "i32.lt_u",
     "i32.gt_u", "i32.eqz", "drop", "nop", "return", "unreachable",
     "memory.size"]
)
_i32 = st.integers(min_value=-(2**31), max_value=2**31 - 1)


@st.composite
def _body(draw, n_locals, n_funcs, n_globals, depth=0):
    items = draw(st.lists(st.integers(0, 7), min_size=0, max_size=6))
    body = []
    for choice in items:
        if choice == 0:
            body.append(Instr("i32.const", arg=draw(_i32)))
        elif choice == 1 and n_locals:
            op = draw(st.sampled_from(["local.get", "local.set", "local.tee"]))
            body.append(Instr(op, arg=draw(st.integers(0, n_locals - 1))))
        elif choice == 2 and n_globals:
            op = draw(st.sampled_from(["global.get", "global.set"]))
            body.append(Instr(op, arg=draw(st.integers(0, n_globals - 1))))
        elif choice == 3 and n_funcs:
            body.append(Instr("call", arg=draw(st.integers(0, n_funcs - 1))))
        elif choice == 4:
            op = draw(st.sampled_from(["i32.load", "i32.store", "i32.load8_u", "i32.store8"]))
            body.append(Instr(op, offset=draw(st.integers(0, 64))))
        elif choice == 5 and depth < 3:
            kind = draw(st.sampled_from(["block", "loop"]))
            result = draw(st.sampled_from([None, "i32"]))
            body.append(Instr(kind, result=result if kind == "block" else None))
            body.extend(draw(_body(n_locals, n_funcs, n_globals, depth + 1)))
            body.append(Instr("end"))
        elif choice == 6:
            body.append(Instr(draw(st.sampled_from(["br", "br_if"])),
                              arg=draw(st.integers(0, depth))))
        else:
            body.append(Instr(draw(_simple_ops)))
    return body


@st.composite
def generated_modules(draw):
    n_funcs = draw(st.integers(1, 3))
    n_globals = draw(st.integers(0, 2))
    sigs = [FuncSig((), None), FuncSig(("i32",), "i32"), FuncSig(("i32", "i32"), None)]
    module = Module(types=sigs)
    module.globals = [
        GlobalDef("i32", draw(st.booleans()), draw(_i32), f"g{i}")
        for i in range(n_globals)
    ]
    module.memory = (1, None) if draw(st.booleans()) else None
    if module.memory:
        module.data = [
            DataSegment(draw(st.integers(0, 1024)),
                        draw(st.binary(min_size=0, max_size=12)))
        ]
    for i in range(n_funcs):
        type_index = draw(st.integers(0, len(sigs) - 1))
        n_params = len(sigs[type_index].params)
        n_locals_decl = draw(st.integers(0, 2))
        named = draw(st.booleans())
        local_names = [
            f"v{j}" if named and draw(st.booleans()) else None
            for j in range(n_params + n_locals_decl)
        ]
        body = draw(_body(n_params + n_locals_decl, n_funcs, n_globals))
        module.functions.append(
            FunctionDef(type_index, ["i32"] * n_locals_decl, body, f"f{i}", local_names)
        )
    if draw(st.booleans()):
        module.table = (n_funcs, None)
        module.elems = [ElemSegment(0, list(range(n_funcs)))]
        for fn in module.functions:
            fn.body.append(Instr("i32.const", arg=0))
            fn.body.append(Instr("call_indirect", arg=0))
    exported = draw(st.integers(0, n_funcs - 1))
    module.exports.append(ExportEntry(draw(st.text(min_size=1, max_size=8)),
                                      "func", exported))
    return module


class TestGeneratedRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(generated_modules())
    def test_roundtrip_structural_equality(self, module):
        printed = wg.print_module(module)
        reparsed = wg.parse_module(printed)
        assert reparsed == module
        # Printing is a fixed point after one normalization.
        assert wg.print_module(reparsed) == printed

    @settings(max_examples=100, deadline=None)
    @given(generated_modules())
    def test_tokens_cover_printed_text(self, module):
        text = wg.print_module(module)
        tokens = wg.tokenize(text)
        for tok in tokens:
            assert text[tok.span.offset:tok.span.offset + len(tok.text)] == tok.text
        offsets = [t.span.offset for t in tokens]
        assert offsets == sorted(offsets)

"""Instruction classification, local allocation, and stack-pointer lookup."""

import pytest

from watguard.errors import ClassificationError, StackPointerError
from watguard.ir import (
    ARITHMETIC,
    CATEGORIES,
    CATEGORY_OF,
    CONTROL,
    MEMORY,
    SUPPORTED_OPS,
    VARIABLE,
    FuncSig,
    FunctionDef,
    GlobalDef,
    Module,
    classify_instruction,
    find_stack_pointer,
    fresh_local,
)
from watguard.parser import parse_module


class TestClassification:
    @pytest.mark.parametrize(
        "mnemonic,category",
        [
            ("i32.const", ARITHMETIC),
            ("i32.add", ARITHMETIC),
            ("i32.sub", ARITHMETIC),
            ("i32.shr_s", ARITHMETIC),
            ("i32.eqz", ARITHMETIC),
            ("local.get", VARIABLE),
            ("local.set", VARIABLE),
            ("global.set", VARIABLE),
            ("global.get", VARIABLE),
            ("i32.load", MEMORY),
            ("i32.store", MEMORY),
            ("memory.size", MEMORY),
            ("unreachable", CONTROL),
            ("br_if", CONTROL),
            ("return", CONTROL),
            ("call", CONTROL),
            ("block", CONTROL),
            ("end", CONTROL),
            ("drop", CONTROL),
        ],
    )
    def test_pinned_examples(self, mnemonic, category):
        assert classify_instruction(mnemonic) == category

    def test_unknown_mnemonic(self):
        with pytest.raises(ClassificationError, match="i64.add"):
            classify_instruction("i64.add")

    def test_categories_partition_the_subset(self):
        # Every supported mnemonic maps to exactly one of the four used
        # categories; "other" stays empty.
        assert set(CATEGORY_OF) == SUPPORTED_OPS
        assert set(CATEGORY_OF.values()) == set(CATEGORIES)
        for ops_of_cat in CATEGORIES:
            members = {op for op, cat in CATEGORY_OF.items() if cat == ops_of_cat}
            assert members, ops_of_cat


class TestFreshLocal:
    def _func(self, n_params, n_locals):
        module = Module(types=[FuncSig(("i32",) * n_params, None)])
        fn = FunctionDef(type_index=0, locals=["i32"] * n_locals,
                         local_names=[None] * (n_params + n_locals))
        module.functions.append(fn)
        return module, fn

    def test_index_is_param_plus_local_count(self):
        module, fn = self._func(2, 3)
        assert fresh_local(module, fn) == 5
        assert fn.locals == ["i32"] * 4

    def test_consecutive_calls_distinct(self):
        module, fn = self._func(1, 0)
        first = fresh_local(module, fn)
        second = fresh_local(module, fn)
        assert (first, second) == (1, 2)

    def test_added_locals_appear_in_printed_header(self):
        from watguard.printer import print_module

        text = "(module (func $f (param i32) i32.const 0 drop))"
        module = parse_module(text)
        fresh_local(module, module.functions[0])
        fresh_local(module, module.functions[0])
        printed = print_module(module)
        assert "(local i32 i32)" in printed
        reparsed = parse_module(printed)
        assert reparsed.functions[0].locals == ["i32", "i32"]


class TestFindStackPointer:
    def test_named_stack_pointer(self):
        module = parse_module(
            "(module (global $other i32 (i32.const 1))"
            " (global $__stack_pointer (mut i32) (i32.const 65536)))"
        )
        ref = find_stack_pointer(module)
        assert ref.index == 1
        assert ref.symbol == "__stack_pointer"

    def test_no_candidate(self):
        module = parse_module("(module (global $c i32 (i32.const 3)))")
        with pytest.raises(StackPointerError, match="no stack pointer"):
            find_stack_pointer(module)

    def test_single_unnamed_mutable_global(self):
        module = parse_module("(module (global (mut i32) (i32.const 4096)))")
        assert find_stack_pointer(module).index == 0

    def test_ambiguous_without_override(self):
        module = parse_module(
            "(module (global $a (mut i32) (i32.const 1))"
            " (global $b (mut i32) (i32.const 2)))"
        )
        with pytest.raises(StackPointerError, match="--sp"):
            find_stack_pointer(module)

    def test_override_selects_named_global(self):
        module = parse_module(
            "(module (global $a (mut i32) (i32.const 1))"
            " (global $sp (mut i32) (i32.const 2)))"
        )
        assert find_stack_pointer(module, "$sp").index == 1
        assert find_stack_pointer(module, "sp").index == 1

    def test_override_must_be_mutable_i32(self):
        module = parse_module("(module (global $sp i32 (i32.const 2)))")
        with pytest.raises(StackPointerError, match="mutable"):
            find_stack_pointer(module, "sp")

    def test_deterministic(self):
        module = parse_module(
            "(module (global $__stack_pointer (mut i32) (i32.const 65536)))"
        )
        assert find_stack_pointer(module) == find_stack_pointer(module)

"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
All tolerances are exact equalities; nothing here is approximate.
"""

import functools
import time as _clock

import pytest

import watguard as wg
from watguard.aslr import OFFSET_VALUES, offset_from_random
from watguard.cli import main
from watguard.engine import PassConfig
from watguard.interp import TrapReason
from watguard.ir import ExportEntry
from watguard.report import (
    build_overhead_report,
    defined_call_counts,
    measure_overhead,
    predict_overhead,
)
from watguard.rng import seed_transform, xorshift32_step

from conftest import CASE_NAMES, CORPUS_DIR, MODES, make_config, protect, run_module

ATTACK_HEX = "1c00000041414141414141414141414141414141414141414141414101000000"


def _verdict(number, description):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[criterion {number:02d}] FAIL - {description}")
                raise
            print(f"[criterion {number:02d}] PASS - {description}")

        return wrapper

    return decorate


@_verdict(1, "canary blocks the hijack; unprotected run raises the evil flag")
def test_criterion_01_canary_blocks_attack(corpus_cases, tmp_path):
    case = corpus_cases["hijack_indirect"]
    started = _clock.perf_counter()

    module = case.load_module()
    _, unprot_inst = run_module(module, case.entry, case.input_addr,
                                case.attack_input, time=42)
    assert unprot_inst.global_value("evil_flag") == 1

    for mode, time in (("canary", 42), ("both", case.times["both_trap"])):
        hardened, _ = protect(module, mode)
        result, inst = run_module(hardened, case.entry, case.input_addr,
                                  case.attack_input, time=time)
        assert result.trap is TrapReason.CanaryMismatch, mode
        assert inst.global_value("evil_flag") == 0, mode

    # Same outcome through the CLI surface.
    out = tmp_path / "hardened.wat"
    assert main(["protect", str(case.module_path), "--pass", "canary",
                 "--out", str(out)]) == 0
    code = main(["run", str(out), "--invoke", "main", "--input-addr", "1024",
                 "--input-hex", ATTACK_HEX, "--time", "42"])
    assert code == 3

    assert _clock.perf_counter() - started < 1.0


@_verdict(2, "nonzero offsets deflect the hijack; only offset 0 reproduces it")
def test_criterion_02_aslr_disrupts_attack(corpus_cases):
    case = corpus_cases["hijack_indirect"]
    module = case.load_module()
    hardened, _ = protect(module, "aslr")

    # Any pinned clock whose derived offset is nonzero deflects the attack.
    t_nonzero = case.times["aslr_nonzero"]
    assert offset_from_random(xorshift32_step(seed_transform(t_nonzero))) != 0
    result, inst = run_module(hardened, case.entry, case.input_addr,
                              case.attack_input, time=t_nonzero)
    assert not result.trapped
    assert inst.global_value("evil_flag") == 0

    # One representative clock per possible offset: the hijack lands exactly
    # in the offset-0 bucket, matching the 64-try brute-force bound.
    representative = {}
    k = 0
    while len(representative) < 64:
        t = (k * 0x9E3779B1) & 0xFFFFFFFF
        offset = offset_from_random(xorshift32_step(seed_transform(t)))
        representative.setdefault(offset, t)
        k += 1
    assert set(representative) == set(OFFSET_VALUES)

    for offset, t in sorted(representative.items()):
        _, inst = run_module(hardened, case.entry, case.input_addr,
                             case.attack_input, time=t)
        hijacked = inst.global_value("evil_flag") == 1
        assert hijacked == (offset == 0), (offset, t)


@_verdict(3, "benign runs identical under none/aslr/canary/both, exactly")
def test_criterion_03_benign_preservation(corpus_cases):
    for name in CASE_NAMES:
        case = corpus_cases[name]
        module = case.load_module()
        sp_index = wg.find_stack_pointer(module).index
        boundary = case.stack_region_start
        baseline = None
        for mode in MODES:
            time = case.expected[mode].get("time", 42)
            hardened, _ = protect(module, mode)
            result, inst = run_module(hardened, case.entry, case.input_addr,
                                      case.benign_input, time=time)
            assert not result.trapped, (name, mode)
            snapshot = (
                result.values,
                [inst.global_value(i) for i, _ in enumerate(module.globals)
                 if i != sp_index],
                inst.read_memory(0, boundary),
            )
            if baseline is None:
                baseline = snapshot
            assert snapshot == baseline, (name, mode)


@_verdict(4, "4096 seeds: offsets within {0,4,...,252} and all 64 occur")
def test_criterion_04_offset_domain():
    module = wg.embed_prng(wg.parse_module("(module)"))
    module.exports.append(ExportEntry("seed", "func", module.find_function("__seed")))
    module.exports.append(ExportEntry("rand", "func", module.find_function("__rand")))
    instance = wg.instantiate(module)
    observed = set()
    for k in range(4096):
        seed = (k * 0x9E3779B1) & 0xFFFFFFFF
        wg.invoke(instance, "seed", [seed])
        draw = wg.invoke(instance, "rand").values[0]
        observed.add(offset_from_random(draw))
    allowed = set(range(0, 256, 4))
    assert observed <= allowed
    assert observed == allowed
    assert len(observed) == 64


@_verdict(5, "measured overhead equals the linear prediction, exactly")
def test_criterion_05_overhead_model_exactness(corpus_cases):
    for name in CASE_NAMES:
        case = corpus_cases[name]
        module = case.load_module()
        base, _ = run_module(module, case.entry, case.input_addr,
                             case.benign_input, time=42)
        per_function = {}
        for mode in ("aslr", "canary", "both"):
            hardened, stats = wg.apply_passes(module, make_config(mode))
            run, _ = run_module(hardened, case.entry, case.input_addr,
                                case.benign_input, time=42)
            assert not run.trapped, (name, mode)
            calls = defined_call_counts(hardened, run)
            predicted = predict_overhead(stats, calls)
            measured = measure_overhead(base, run)
            assert predicted == measured, (name, mode, predicted, measured)
            per_function[mode] = {
                row.name: row.total for row in stats.functions if not row.appended
            }
        for fname in per_function["both"]:
            assert (
                per_function["both"][fname]
                < per_function["aslr"][fname] + per_function["canary"][fname]
            ), (name, fname)

    module = corpus_cases["benign_copy"].load_module()
    _, stats = wg.apply_passes(module, make_config("both"))
    doc = build_overhead_report(["aslr", "canary"], stats)
    assert doc["paper_reference"]["reference"] is True
    assert doc["paper_reference"]["aslr"] == {
        "arithmetic": 21, "variable": 12, "memory": 0, "control": 0}
    assert doc["paper_reference"]["canary"] == {
        "arithmetic": 16, "variable": 16, "memory": 2, "control": 5}


@_verdict(6, "stack pointer restored exactly on every non-trapping run")
def test_criterion_06_sp_balance(corpus_cases):
    for name in CASE_NAMES:
        case = corpus_cases[name]
        module = case.load_module()
        sp_entry = module.globals[wg.find_stack_pointer(module).index].init
        for mode in ("aslr", "canary", "both"):
            hardened, _ = protect(module, mode)
            for kind in ("benign", "attack"):
                payload = case.benign_input if kind == "benign" else case.attack_input
                time = case.expected[mode].get("time", 42)
                result, inst = run_module(hardened, case.entry,
                                          case.input_addr, payload, time=time)
                if result.trapped:
                    continue
                assert inst.global_value("__stack_pointer") == sp_entry, (
                    name, mode, kind)


@_verdict(7, "parse-print-parse structural equality on 100% of modules")
def test_criterion_07_parser_roundtrip(corpus_cases):
    modules = []
    for name in CASE_NAMES:
        module = corpus_cases[name].load_module()
        modules.append(module)
        for mode in ("aslr", "canary", "both"):
            hardened, _ = protect(module, mode)
            modules.append(hardened)
        shuffled, _ = wg.apply_passes(
            module, PassConfig(enable_table_shuffle=True, seed_mode=1)
        ) if module.table else (None, None)
        if shuffled is not None:
            modules.append(shuffled)
    checked = 0
    for module in modules:
        assert wg.parse_module(wg.print_module(module)) == module
        checked += 1
    assert checked == len(modules)


@_verdict(8, "embedded generator matches the reference on 1000 states")
def test_criterion_08_prng_conformance():
    import random

    module = wg.embed_prng(wg.parse_module("(module)"))
    module.exports.append(ExportEntry("rand", "func", module.find_function("__rand")))
    state_index = next(
        i for i, g in enumerate(module.globals) if g.name == "__prng_state"
    )
    instance = wg.instantiate(module)
    rng = random.Random(0xC0FFEE)
    for _ in range(1000):
        state = rng.randrange(1, 2**32)
        instance.globals[state_index] = state
        got = wg.invoke(instance, "rand").values[0] & 0xFFFFFFFF
        assert got == xorshift32_step(state)


@_verdict(9, "a stackAlloc-only module passes through every config unmodified")
def test_criterion_09_skip_list():
    text = (
        "(module (global $__stack_pointer (mut i32) (i32.const 65536))"
        " (memory 1)"
        " (func $stackAlloc (param i32) (result i32)"
        " global.get $__stack_pointer local.get 0 i32.sub"
        " global.set $__stack_pointer global.get $__stack_pointer))"
    )
    module = wg.parse_module(text)
    for mode in ("aslr", "canary", "both"):
        hardened, stats = wg.apply_passes(module, make_config(mode))
        assert hardened == module, mode
        assert stats.total == 0, mode
    hardened, _ = wg.apply_passes(
        module, PassConfig(enable_table_shuffle=True, seed_mode=0)
    )
    assert hardened == module


@_verdict(10, "zero-uncovered shuffle preserves behavior and slot signatures")
def test_criterion_10_table_shuffle_safety(corpus_cases):
    case = corpus_cases["hijack_indirect"]
    module = case.load_module()

    # The memory-fed dispatch makes moving permutations uncoverable, so the
    # zero-uncovered report arises exactly for identity permutations; pick a
    # seed whose first draw keeps the two-slot group in place.
    seed = next(s for s in range(64)
                if xorshift32_step(seed_transform(s)) % 2 == 1)
    shuffled, stats = wg.apply_passes(
        module, PassConfig(enable_table_shuffle=True, seed_mode=seed)
    )
    report = stats.table_shuffle
    assert report.uncovered_sites == 0
    assert report.unrewritten_indirect_sites == 1  # reported for transparency

    def signatures(mod):
        return [
            str(mod.func_sig(f)) for seg in mod.elems for f in seg.funcs
        ]

    assert signatures(shuffled) == signatures(module)

    plain, plain_inst = run_module(module, case.entry, case.input_addr,
                                   case.benign_input, time=42)
    moved, moved_inst = run_module(shuffled, case.entry, case.input_addr,
                                   case.benign_input, time=42)
    assert moved.values == plain.values
    assert moved.counters == plain.counters
    assert moved_inst.global_value("evil_flag") == plain_inst.global_value("evil_flag")

    # A moving permutation on the same module is refused under strict mode.
    moving_seed = next(s for s in range(64)
                       if xorshift32_step(seed_transform(s)) % 2 == 0)
    with pytest.raises(wg.PassError):
        wg.apply_passes(module, PassConfig(
            enable_table_shuffle=True, seed_mode=moving_seed,
            shuffle_strict=True,
        ))

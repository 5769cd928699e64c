"""watguard: a hardening transpiler for WebAssembly text modules.

Parses a supported .wat subset, injects stack-canary and randomized
stack-offset protection into every function, optionally shuffles the
indirect-call table, and ships a mini-interpreter plus overhead reporting
to demonstrate the attacks being blocked and account for the cost.
"""

from .errors import (
    ClassificationError,
    EmbedError,
    InvokeError,
    LexError,
    LinkError,
    ParseError,
    PassError,
    ReportError,
    StackPointerError,
    WatGuardError,
)
from .ir import (
    CATEGORIES,
    FuncSig,
    FunctionDef,
    GlobalDef,
    Instr,
    Module,
    StackPointerRef,
    classify_instruction,
    find_stack_pointer,
    fresh_local,
)
from .lexer import SourceSpan, Token, tokenize
from .parser import parse_module
from .printer import print_module
from .rng import embed_prng, emit_host_glue, seed_transform, xorshift32_step
from .aslr import offset_from_random
from .engine import (
    DEFAULT_SKIP_NAMES,
    InsertionStats,
    PassConfig,
    apply_passes,
    wrap_body_for_epilogue,
)
from .interp import (
    Instance,
    RunResult,
    TrapReason,
    instantiate,
    invoke,
    poke_input,
)
from .shuffle import ShuffleReport, shuffle_elem_segment
from .report import (
    build_overhead_report,
    measure_overhead,
    predict_overhead,
    static_insertion_stats,
)
from .corpus import CorpusCase, load_corpus_case

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "CorpusCase",
    "ClassificationError",
    "DEFAULT_SKIP_NAMES",
    "EmbedError",
    "FuncSig",
    "FunctionDef",
    "GlobalDef",
    "InsertionStats",
    "Instance",
    "Instr",
    "InvokeError",
    "LexError",
    "LinkError",
    "Module",
    "ParseError",
    "PassConfig",
    "PassError",
    "ReportError",
    "RunResult",
    "ShuffleReport",
    "SourceSpan",
    "StackPointerError",
    "StackPointerRef",
    "Token",
    "TrapReason",
    "WatGuardError",
    "apply_passes",
    "build_overhead_report",
    "classify_instruction",
    "embed_prng",
    "emit_host_glue",
    "find_stack_pointer",
    "fresh_local",
    "instantiate",
    "invoke",
    "load_corpus_case",
    "measure_overhead",
    "offset_from_random",
    "parse_module",
    "poke_input",
    "predict_overhead",
    "print_module",
    "seed_transform",
    "shuffle_elem_segment",
    "static_insertion_stats",
    "tokenize",
    "wrap_body_for_epilogue",
    "xorshift32_step",
]

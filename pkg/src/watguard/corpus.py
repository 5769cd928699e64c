"""Loader for the vulnerable/benign fixture corpus.

Each case pairs a ``corpus/<name>.wat`` module with a
``corpus/<name>.case.json`` description: where input is staged, the benign
and attack payloads (length-prefixed), the documented overrun distance,
and the expected outcome under every pass configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError
from .ir import Module
from .parser import parse_module

CASE_NAMES = ("hijack_indirect", "linear_overwrite", "benign_copy")

_DEFAULT_DIR = Path(__file__).resolve().parents[2] / "corpus"


@dataclass
class CorpusCase:
    name: str
    module_path: Path
    entry: str
    input_addr: int
    benign_input: bytes
    attack_input: bytes
    overrun_bytes: int
    stack_region_start: int
    times: dict[str, int]
    expected: dict

    def module_text(self) -> str:
        return self.module_path.read_text(encoding="utf-8")

    def load_module(self) -> Module:
        return parse_module(self.module_text())

    def shrunk_attack_input(self) -> bytes:
        """Attack input with its copy length reduced by the overrun.

        The first four bytes are the little-endian payload length; cutting
        it back by the documented overrun keeps the copy inside the buffer.
        """
        length = int.from_bytes(self.attack_input[:4], "little")
        shrunk = length - self.overrun_bytes
        return shrunk.to_bytes(4, "little") + self.attack_input[4:4 + shrunk]


def load_corpus_case(name: str, corpus_dir: Path | str | None = None) -> CorpusCase:
    """Load a fixture by name; unknown names list what is available."""
    if name not in CASE_NAMES:
        raise CorpusError(
            f"unknown corpus case {name!r}; available: {', '.join(CASE_NAMES)}"
        )
    directory = Path(corpus_dir) if corpus_dir is not None else _DEFAULT_DIR
    case_path = directory / f"{name}.case.json"
    if not case_path.exists():
        raise CorpusError(f"missing corpus file {case_path}")
    raw = json.loads(case_path.read_text(encoding="utf-8"))
    return CorpusCase(
        name=raw["name"],
        module_path=directory / raw["module"],
        entry=raw["entry"],
        input_addr=raw["input_addr"],
        benign_input=bytes.fromhex(raw["benign_input_hex"]),
        attack_input=bytes.fromhex(raw["attack_input_hex"]),
        overrun_bytes=raw["overrun_bytes"],
        stack_region_start=raw["stack_region_start"],
        times={k: int(v) for k, v in raw.get("times", {}).items()},
        expected=raw["expected"],
    )

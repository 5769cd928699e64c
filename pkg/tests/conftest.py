"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

from pathlib import Path

import pytest

import watguard as wg

REPO_ROOT = Path(__file__).resolve().parents[1]
CORPUS_DIR = REPO_ROOT / "corpus"

CASE_NAMES = ("hijack_indirect", "linear_overwrite", "benign_copy")

# Pass-configuration shorthand used across corpus tests.
MODES = {
    "none": (False, False),
    "aslr": (True, False),
    "canary": (False, True),
    "both": (True, True),
}


def make_config(mode: str, **kwargs) -> wg.PassConfig:
    enable_aslr, enable_canary = MODES[mode]
    return wg.PassConfig(enable_aslr=enable_aslr, enable_canary=enable_canary, **kwargs)


def protect(module: wg.Module, mode: str, **kwargs):
    if mode == "none":
        return module, None
    return wg.apply_passes(module, make_config(mode, **kwargs))


def run_module(module, entry, input_addr=None, input_bytes=None, time=None, args=()):
    """Instantiate, stage input, invoke; returns (RunResult, Instance)."""
    instance = wg.instantiate(module, time=time)
    if input_bytes is not None:
        wg.poke_input(instance, input_addr, input_bytes)
    result = wg.invoke(instance, entry, list(args))
    return result, instance


@pytest.fixture(scope="session")
def corpus_cases():
    return {name: wg.load_corpus_case(name) for name in CASE_NAMES}


@pytest.fixture(scope="session")
def corpus_modules(corpus_cases):
    return {name: case.load_module() for name, case in corpus_cases.items()}

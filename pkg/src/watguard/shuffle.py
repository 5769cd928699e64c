"""Compile-time permutation of indirect-call table entries.

Entries are permuted only within groups that share a function signature,
so every slot keeps its signature and call_indirect type checks behave
identically.  Only the ``i32.const k; call_indirect`` adjacency is safe to
rewrite statically; any other call_indirect feeds its index through memory
or locals and is reported instead of guessed at.  This pass is
experimental.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import PassError
from .ir import Module, signed32, unsigned32


@dataclass
class ShuffleReport:
    """Slot movements and call-site coverage of one shuffle run."""

    mapping: dict[int, int] = field(default_factory=dict)  # old slot -> new slot
    rewritten_sites: int = 0
    const_sites: int = 0
    unrewritten_indirect_sites: int = 0

    @property
    def moved(self) -> int:
        return sum(1 for old, new in self.mapping.items() if old != new)

    @property
    def uncovered_sites(self) -> int:
        # A site whose index flows through memory or locals can only
        # misbehave if the permutation actually moved a slot; an identity
        # shuffle leaves nothing for it to observe.
        return self.unrewritten_indirect_sites if self.moved else 0

    def as_dict(self) -> dict:
        return {
            "mapping": {str(old): new for old, new in sorted(self.mapping.items())},
            "moved": self.moved,
            "rewritten_sites": self.rewritten_sites,
            "const_sites": self.const_sites,
            "unrewritten_indirect_sites": self.unrewritten_indirect_sites,
            "uncovered_sites": self.uncovered_sites,
        }


def shuffle_elem_segment(module: Module, draw: Callable[[], int],
                         strict: bool = False) -> tuple[Module, ShuffleReport]:
    """Permute same-signature element entries and remap constant call sites.

    ``draw`` supplies the randomness, one 32-bit value per Fisher-Yates
    step.  With ``strict`` the pass refuses to apply a moving permutation
    while uncovered call sites exist.
    """
    report = ShuffleReport()

    # Effective table view: position -> (segment, offset within segment).
    cells: dict[int, tuple[int, int]] = {}
    for seg_index, seg in enumerate(module.elems):
        base = unsigned32(seg.offset)
        for i in range(len(seg.funcs)):
            pos = base + i
            if pos in cells:
                raise PassError(f"overlapping element segments at slot {pos}")
            cells[pos] = (seg_index, i)

    def occupant(pos: int) -> int:
        seg_index, i = cells[pos]
        return module.elems[seg_index].funcs[i]

    def place(pos: int, func_index: int) -> None:
        seg_index, i = cells[pos]
        module.elems[seg_index].funcs[i] = func_index

    groups: dict[object, list[int]] = {}
    for pos in sorted(cells):
        groups.setdefault(module.func_sig(occupant(pos)), []).append(pos)

    for sig in sorted(groups, key=lambda s: (len(s.params), s.params, s.result or "")):
        positions = groups[sig]
        occupants = [occupant(p) for p in positions]
        perm = list(range(len(positions)))
        for i in range(len(perm) - 1, 0, -1):
            j = draw() % (i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        for i, p in enumerate(positions):
            place(p, occupants[perm[i]])
            report.mapping[positions[perm[i]]] = p

    moved = {old: new for old, new in report.mapping.items() if old != new}

    for fn in module.functions:
        body = fn.body
        for k, instr in enumerate(body):
            if instr.op != "call_indirect":
                continue
            prev = body[k - 1] if k > 0 else None
            if prev is not None and prev.op == "i32.const":
                report.const_sites += 1
                old = unsigned32(prev.arg)
                if old in moved:
                    prev.arg = signed32(moved[old])
                    report.rewritten_sites += 1
            else:
                report.unrewritten_indirect_sites += 1

    if strict and report.uncovered_sites:
        raise PassError(
            f"{report.uncovered_sites} call_indirect site(s) take their index "
            "from memory or locals and cannot be remapped; refusing under --strict"
        )
    return module, report

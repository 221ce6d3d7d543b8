"""Static disassembly analysis and throttle-attribution output.

The identification workflow has two halves.  A static pass parses
disassembler listings, classifies instructions by the widest vector
register they touch, and ranks functions by their wide-vector instruction
ratio; functions near the top are candidates for annotation.  The static
ranking is advisory only: confirmation comes from throttle-cycle
attribution, which this module renders as folded stacks for standard
flame-graph tooling.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

#: Multiply / fused-multiply-add mnemonic stems that trigger the deepest
#: frequency reduction when applied to wide registers.
DEFAULT_HEAVY_STEMS = ("vfmadd", "vfmsub", "vfnmadd", "vfnmsub", "vmul", "vpmul")

_PREFIXES = {
    "lock", "rep", "repe", "repz", "repne", "repnz", "bnd", "notrack",
    "data16", "data32", "addr16", "addr32", "xacquire", "xrelease",
    "cs", "ds", "es", "fs", "gs", "ss",
}

_FUNC_RE = re.compile(r"^\s*([0-9a-fA-F]{4,})\s+(.+?):\s*$")
_INSN_RE = re.compile(
    r"^\s*[0-9a-fA-F]+:\s*((?:[0-9a-fA-F]{2}\s+)*)(.*)$"
)
_YMM_RE = re.compile(r"%?\bymm([12]?[0-9]|3[01])\b")
_ZMM_RE = re.compile(r"%?\bzmm([12]?[0-9]|3[01])\b")


class DisassemblyFormatError(ValueError):
    """Input text is not a disassembly listing."""


@dataclass
class DisasmFunction:
    """Instruction statistics for one disassembled function."""

    name: str
    source: str = ""
    instructions: List[Tuple[str, str]] = field(default_factory=list)
    total: int = 0
    wide256: int = 0
    wide512: int = 0
    heavy512: int = 0

    def add(self, mnemonic: str, operands: str, heavy_stems: Sequence[str]) -> None:
        self.instructions.append((mnemonic, operands))
        self.total += 1
        width, heavy = classify_instruction(mnemonic, operands, heavy_stems)
        if width == "wide512":
            self.wide512 += 1
            if heavy:
                self.heavy512 += 1
        elif width == "wide256":
            self.wide256 += 1

    @property
    def wide(self) -> int:
        return self.wide256 + self.wide512

    @property
    def ratio(self) -> float:
        return self.wide / self.total if self.total else 0.0


def classify_instruction(
    mnemonic: str, operands: str, heavy_stems: Sequence[str] = DEFAULT_HEAVY_STEMS
) -> Tuple[str, bool]:
    """Classify one instruction by register width.

    Returns (width, heavy) with width one of "none", "wide256", "wide512".
    Width is decided purely by operand register names (zmm beats ymm); the
    heavy flag marks wide multiplies and fused multiply-adds.  Unknown
    mnemonics classify as "none".  Both AT&T (%zmm0) and Intel (zmm0)
    operand spellings are accepted.
    """
    ops = operands.lower()
    if _ZMM_RE.search(ops):
        width = "wide512"
    elif _YMM_RE.search(ops):
        width = "wide256"
    else:
        return "none", False
    m = mnemonic.lower()
    heavy = any(m.startswith(stem) for stem in heavy_stems)
    return width, heavy


def parse_disassembly(
    text: str,
    source: str = "",
    heavy_stems: Sequence[str] = DEFAULT_HEAVY_STEMS,
) -> Tuple[List[DisasmFunction], int]:
    """Parse a disassembler listing into per-function instruction lists.

    Handles objdump-style output: function headers like
    ``0000000000001130 <name>:`` (angle brackets optional) and instruction
    lines ``addr: bytes mnemonic operands``.  Interleaved source lines,
    data-in-text and anything else unrecognised inside a function is
    skipped; the skipped-line count is returned alongside the functions.
    Raises DisassemblyFormatError when no function header is found.
    """
    functions: List[DisasmFunction] = []
    current: Optional[DisasmFunction] = None
    skipped = 0
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line.strip():
            continue
        header = _FUNC_RE.match(line)
        if header:
            name = header.group(2).strip()
            if name.startswith("<") and name.endswith(">"):
                name = name[1:-1]
            current = DisasmFunction(name=name, source=source)
            functions.append(current)
            continue
        insn = _INSN_RE.match(line)
        if insn and current is not None:
            rest = insn.group(2).strip()
            if not rest:
                continue  # bytes-only continuation line
            # strip trailing disassembler comments
            rest = rest.split(" #", 1)[0].split("\t#", 1)[0].strip()
            tokens = rest.split(None, 1)
            mnemonic = tokens[0]
            while tokens and mnemonic.lower() in _PREFIXES:
                rest = tokens[1] if len(tokens) > 1 else ""
                tokens = rest.split(None, 1)
                mnemonic = tokens[0] if tokens else ""
            if not mnemonic or mnemonic.startswith(".") or mnemonic == "(bad)":
                skipped += 1
                continue
            operands = tokens[1] if len(tokens) > 1 else ""
            current.add(mnemonic, operands, heavy_stems)
            continue
        # Anything else: section banners, file-format lines, interleaved
        # source, relocation notes, data in text.
        skipped += 1
    if not functions:
        raise DisassemblyFormatError(
            f"{source or 'input'}: not a disassembly listing (no function headers)"
        )
    return functions, skipped


@dataclass(frozen=True)
class RatioRow:
    function: str
    source: str
    total: int
    wide256: int
    wide512: int
    ratio: float
    heavy: bool


def ratio_report(functions: Iterable[DisasmFunction]) -> List[RatioRow]:
    """Rank functions by wide-vector instruction ratio, descending.

    Empty functions are excluded; ties are broken by name then source so
    the listing is deterministic.
    """
    rows = [
        RatioRow(
            function=f.name,
            source=f.source,
            total=f.total,
            wide256=f.wide256,
            wide512=f.wide512,
            ratio=f.ratio,
            heavy=f.heavy512 > 0,
        )
        for f in functions
        if f.total > 0
    ]
    rows.sort(key=lambda r: (-r.ratio, r.function, r.source))
    return rows


def format_ratio_table(rows: Sequence[RatioRow], min_ratio: float = 0.0) -> str:
    rows = [r for r in rows if r.ratio >= min_ratio]
    name_w = max([len("function")] + [len(r.function) for r in rows])
    src_w = max([len("source")] + [len(r.source) for r in rows])
    lines = [
        f"{'function':<{name_w}}  {'source':<{src_w}}  {'total':>7}  "
        f"{'wide256':>7}  {'wide512':>7}  {'ratio':>6}  heavy"
    ]
    lines.append("-" * len(lines[0]))
    for r in rows:
        lines.append(
            f"{r.function:<{name_w}}  {r.source:<{src_w}}  {r.total:>7}  "
            f"{r.wide256:>7}  {r.wide512:>7}  {r.ratio:>6.3f}  {'yes' if r.heavy else 'no'}"
        )
    return "\n".join(lines)


def emit_folded(attribution) -> str:
    """Render a throttle-attribution table as folded stacks.

    Accepts either a mapping ``(task, label) -> cycles`` or an iterable of
    records with task / label / cycles entries.  One line per pair:
    ``task;label <cycles>``, ordered by descending cycle count then
    lexicographically, consumable by standard flame-graph renderers.
    """
    if isinstance(attribution, dict):
        items = [(task, label, cycles) for (task, label), cycles in attribution.items()]
    else:
        items = [(r["task"], r["label"], r["cycles"]) for r in attribution]
    items = [(t, l, c) for (t, l, c) in items if c > 0]
    items.sort(key=lambda x: (-x[2], x[0], x[1]))
    return "".join(f"{t};{l} {c}\n" for t, l, c in items)

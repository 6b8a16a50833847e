"""Listing and source reconstruction from object images.

Decoding walks the byte stream exactly the way the interpreter fetches
it, macro cursor included, so a macro whose body stops mid-instruction
still renders as the complete instruction it produces in context.  A
listing line for a macro opcode is flagged *** and shows everything the
activation executes.

render_source only accepts macro-free images with canonical encodings:
its output reassembles to the identical byte string, which is the
property the round-trip checks lean on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import asm, isa


class DisasmError(Exception):
    pass


@dataclass
class DecodedInstr:
    name: str
    operand_texts: list
    target_addr: int | None = None
    target_short: bool = False
    noncanonical: str | None = None   # reason, when re-encoding would differ

    def text(self, target_text: str | None = None) -> str:
        parts = list(self.operand_texts)
        if self.target_addr is not None:
            parts.append(target_text if target_text is not None
                         else f"{self.target_addr:04X}")
        if not parts:
            return self.name
        return f"{self.name} {', '.join(parts)}"


@dataclass
class DecodedUnit:
    addr: int
    main_bytes: bytes
    instrs: list
    macro_code: int | None = None

    @property
    def is_macro(self) -> bool:
        return self.macro_code is not None


class _Walker:
    """Cursor-aware byte supplier over an image's code."""

    def __init__(self, image) -> None:
        self.code = image.code
        self.origin = image.origin
        self.end = image.origin + len(image.code)
        self.pos = image.origin
        self.bodies = [m.body for m in image.macros]
        self.body: bytes | None = None
        self.body_off = 0
        self.consumed: list = []

    @property
    def in_body(self) -> bool:
        return self.body is not None

    def at_end(self) -> bool:
        return self.body is None and self.pos >= self.end

    def activate(self, code_byte: int) -> None:
        idx = code_byte - isa.MACRO_OPCODE_BASE
        if idx >= len(self.bodies):
            raise DisasmError(f"unknown opcode {code_byte:#04x} at "
                              f"{self.pos - 1:04X}")
        self.body = self.bodies[idx]
        self.body_off = 0

    def take(self) -> tuple[int, int | None]:
        if self.body is not None:
            byte = self.body[self.body_off]
            self.body_off += 1
            if self.body_off >= len(self.body):
                self.body = None
            return byte, None
        if self.pos >= self.end:
            raise DisasmError("truncated image: instruction runs past "
                              "the end of code")
        byte = self.code[self.pos - self.origin]
        addr = self.pos
        self.pos += 1
        self.consumed.append(byte)
        return byte, addr


def _take_literal(walker) -> tuple[int, str | None]:
    b, _ = walker.take()
    if b >= 0x80:
        return b - 0x80, None
    lo, _ = walker.take()
    value = (b << 8) | lo
    reason = "long-form literal under 0x80" if value <= 0x7F else None
    return value, reason


def _operand(walker, mode: int) -> tuple[asm.Operand, str | None]:
    """Decode one operand per its mode nibble; mirrors vm._resolve."""
    if mode <= isa.REG_XS:
        return asm.Operand("reg", value=mode), None
    if mode in (isa.MODE_IND_XL, isa.MODE_IND_XR):
        return asm.Operand("ind", value=mode), None
    if mode == isa.MODE_POP:
        return asm.Operand("pop"), None
    if mode == isa.MODE_PUSH:
        return asm.Operand("push"), None
    if mode == isa.MODE_MEM1:
        b, _ = walker.take()
        return asm.Operand("mem", value=b), None
    if mode == isa.MODE_MEM2:
        hi, _ = walker.take()
        lo, _ = walker.take()
        value = (hi << 8) | lo
        reason = "2-byte address under 0x100" if value <= 0xFF else None
        return asm.Operand("mem", value=value), reason
    if mode == isa.MODE_LIT:
        value, reason = _take_literal(walker)
        return asm.Operand("lit", value=value), reason
    reg = {isa.MODE_OFF_XL: isa.REG_XL,
           isa.MODE_OFF_XR: isa.REG_XR,
           isa.MODE_OFF_XS: isa.REG_XS}[mode]
    value, reason = _take_literal(walker)
    return asm.Operand("idx", value=value, index_reg=reg), reason


def _take_target(walker) -> tuple[int, bool]:
    b, addr = walker.take()
    if b >= 0x80:
        if addr is None:
            raise DisasmError("short branch byte inside a macro body")
        return (addr + 0xC0 - b) & 0xFFFF, True
    lo, _ = walker.take()
    return (b << 8) | lo, False


def _decode_instr(walker, opcode: int) -> DecodedInstr:
    name = isa.MNEMONICS.get(opcode)
    if name is None:
        raise DisasmError(f"unknown opcode {opcode:#04x}")
    sig = isa.SIGNATURES[name]
    if not sig:
        return DecodedInstr(name, [])
    if name == "BRN":
        header, _ = walker.take()
        target, short = _take_target(walker)
        bad = None if header == isa.MODE_MEM2 else "unexpected BRN header"
        return DecodedInstr(name, [], target, short, bad)
    header, _ = walker.take()
    nibbles = [header & 0x0F, header >> 4]
    texts = []
    noncanonical = None
    for mode in nibbles[:len(sig) - (1 if sig[-1] == "target" else 0)]:
        op, reason = _operand(walker, mode)
        noncanonical = noncanonical or reason
        texts.append(asm._print_operand(op))
    if sig[-1] == "target":
        target, short = _take_target(walker)
        return DecodedInstr(name, texts, target, short, noncanonical)
    if len(sig) == 1 and nibbles[1] != 0:
        noncanonical = noncanonical or "stray high header nibble"
    return DecodedInstr(name, texts, noncanonical=noncanonical)


def decode_image(image) -> list[DecodedUnit]:
    """Decode the whole code region into instruction units."""
    if image.is_raw:
        raise DisasmError("raw container holds packed bytes, not a program")
    walker = _Walker(image)
    units: list[DecodedUnit] = []
    while not walker.at_end():
        start = walker.pos
        walker.consumed = []
        byte, _ = walker.take()
        if byte >= isa.MACRO_OPCODE_BASE:
            walker.activate(byte)
            instrs = []
            while True:
                op, addr = walker.take()
                if op >= isa.MACRO_OPCODE_BASE and addr is None:
                    raise DisasmError("macro opcode inside a macro body")
                instrs.append(_decode_instr(walker, op))
                if not walker.in_body:
                    break
            units.append(DecodedUnit(start, bytes(walker.consumed), instrs,
                                     macro_code=byte))
        else:
            instr = _decode_instr(walker, byte)
            units.append(DecodedUnit(start, bytes(walker.consumed), [instr]))
    return units


# ---------------------------------------------------------------------------
# Listing

_BYTES_PER_LINE = 4


def _hex_chunks(data: bytes) -> list[str]:
    return [" ".join(f"{b:02X}" for b in data[i:i + _BYTES_PER_LINE])
            for i in range(0, len(data), _BYTES_PER_LINE)]


def render_listing(image) -> str:
    if not image.code:
        return ""
    units = decode_image(image)
    width = _BYTES_PER_LINE * 3 - 1
    lines = [f"origin {image.origin:04X}  entry {image.entry:04X}", ""]
    for unit in units:
        chunks = _hex_chunks(unit.main_bytes)
        flag = "***" if unit.is_macro else "   "
        text = " / ".join(i.text() for i in unit.instrs)
        lines.append(f"{unit.addr:04X}  {chunks[0]:<{width}}  {flag}  {text}")
        for chunk in chunks[1:]:
            lines.append(f"      {chunk:<{width}}")
    if image.macros:
        lines.append("")
        lines.append("macro table:")
        for m in image.macros:
            body_hex = " ".join(f"{b:02X}" for b in m.body)
            lines.append(f"  {m.code:02X}  len {len(m.body):<3d} "
                         f"{body_hex:<{width}}  {_body_text(m.body)}")
    return "\n".join(lines) + "\n"


def _body_text(body: bytes) -> str:
    """Best-effort rendering of a body on its own; prefix bodies that stop
    mid-instruction fall back to a plain marker."""

    class _BodyWalker:
        def __init__(self) -> None:
            self.data = body
            self.off = 0

        @property
        def in_body(self) -> bool:
            return self.off < len(self.data)

        def take(self):
            if self.off >= len(self.data):
                raise DisasmError("body exhausted")
            b = self.data[self.off]
            self.off += 1
            return b, None

    bw = _BodyWalker()
    texts = []
    try:
        while bw.in_body:
            op, _ = bw.take()
            if op >= isa.MACRO_OPCODE_BASE:
                raise DisasmError("macro opcode in body")
            texts.append(_decode_instr(bw, op).text())
    except DisasmError:
        return "(instruction prefix)"
    return " / ".join(texts)


def disassemble(image) -> str:
    return render_listing(image)


# ---------------------------------------------------------------------------
# Source reconstruction

def render_source(image) -> str:
    """Reassemblable text for a macro-free, canonically encoded image."""
    if image.macros:
        raise DisasmError("image has a macro table; expand it before "
                          "rendering source")
    units = decode_image(image)
    starts = {u.addr for u in units}
    targets = set()
    for unit in units:
        instr = unit.instrs[0]
        if instr.noncanonical:
            raise DisasmError(f"at {unit.addr:04X}: {instr.noncanonical}; "
                              "source round trip would not be byte-exact")
        if instr.target_addr is not None:
            if instr.target_addr not in starts:
                raise DisasmError(f"branch at {unit.addr:04X} lands inside "
                                  f"an instruction ({instr.target_addr:04X})")
            targets.add(instr.target_addr)
    lines = []
    for unit in units:
        instr = unit.instrs[0]
        label = f"L{unit.addr:04X}" if unit.addr in targets else ""
        target_text = None
        if instr.target_addr is not None:
            target_text = (("+" if instr.target_short else "")
                           + f"L{instr.target_addr:04X}")
        lines.append(f"{label:<7}{instr.text(target_text)}".rstrip())
    return "\n".join(lines) + "\n"

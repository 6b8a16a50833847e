"""Interpreter for assembled images, including macro-table expansion.

The core trick is the macro cursor: fetching an opcode in 0x50..0xFF
switches the byte source to that entry of the macro table, and byte
fetches drain the body before falling back to the saved PC.  Expansion
is one level deep by construction; a macro opcode fetched from a body
is a fault, never a recursion.

A body can end mid-instruction (a macro may cover just an opcode/header
prefix); operand fetches then continue seamlessly from the main stream.
Taken branches drop the cursor outright: the jump target is a main
stream address, so whatever remained of the body is abandoned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import isa


class LoadError(Exception):
    pass


class VmFault(Exception):
    """Internal signal; surfaces to callers as a fault StepEvent."""


@dataclass
class StepEvent:
    kind: str                    # executed | output | halted | fault
    value: int | None = None     # output only
    reason: str | None = None    # fault only


@dataclass
class RunOutcome:
    status: str                  # halted | out-of-fuel | fault
    steps: int
    trace: list
    fault_reason: str | None = None


@dataclass
class VmState:
    memory: bytearray
    regs: list
    pc: int
    macros: list
    cursor: tuple | None = None  # (table index, body offset, resume pc)
    out_trace: list = field(default_factory=list)
    halted: bool = False
    stack_top: int = isa.DEFAULT_STACK_TOP
    stack_bottom: int = isa.DEFAULT_STACK_BOTTOM


def load(image) -> VmState:
    image.validate()
    if image.is_raw:
        raise LoadError("raw container holds packed bytes, not a program")
    if image.origin < isa.WORK_AREA_END:
        raise LoadError(f"origin {image.origin:#06x} overlaps the reserved "
                        f"work area below {isa.WORK_AREA_END:#06x}")
    if image.origin + len(image.code) > 0x10000:
        raise LoadError("image runs past the end of memory")
    if not image.code:
        raise LoadError("image has no code")
    if not image.origin <= image.entry < image.origin + len(image.code):
        raise LoadError(f"entry {image.entry:#06x} outside the loaded code")
    memory = bytearray(0x10000)
    memory[image.origin:image.origin + len(image.code)] = image.code
    regs = [0] * 6
    regs[isa.REG_XS] = isa.DEFAULT_STACK_TOP
    return VmState(memory=memory, regs=regs, pc=image.entry,
                   macros=[m.body for m in image.macros])


# ---------------------------------------------------------------------------
# Byte plumbing

def _fetch(state: VmState) -> tuple[int, int | None]:
    """Next byte and its physical address (None when read from a body)."""
    if state.cursor is not None:
        idx, off, resume = state.cursor
        body = state.macros[idx]
        byte = body[off]
        if off + 1 >= len(body):
            state.cursor = None
            state.pc = resume
        else:
            state.cursor = (idx, off + 1, resume)
        return byte, None
    if state.pc > 0xFFFF:
        raise VmFault("fetch past the end of memory")
    byte = state.memory[state.pc]
    addr = state.pc
    state.pc += 1
    return byte, addr


def _read_word(state: VmState, addr: int) -> int:
    addr &= 0xFFFF
    return (state.memory[addr] << 8) | state.memory[(addr + 1) & 0xFFFF]


def _write_word(state: VmState, addr: int, value: int) -> None:
    addr &= 0xFFFF
    state.memory[addr] = (value >> 8) & 0xFF
    state.memory[(addr + 1) & 0xFFFF] = value & 0xFF


def _fetch_literal(state: VmState) -> int:
    b, _ = _fetch(state)
    if b >= 0x80:
        return b - 0x80
    lo, _ = _fetch(state)
    return (b << 8) | lo


def _fetch_target(state: VmState) -> int:
    """Branch target: one short-form byte or a 2-byte absolute address."""
    b, addr = _fetch(state)
    if b >= 0x80:
        if addr is None:
            raise VmFault("short branch form inside a macro body")
        return (addr + 0xC0 - b) & 0xFFFF
    lo, _ = _fetch(state)
    return (b << 8) | lo


# ---------------------------------------------------------------------------
# Operands

@dataclass
class _Loc:
    kind: str                  # reg | mem | lit
    where: int                 # register index / address / literal value


def _resolve(state: VmState, mode: int) -> _Loc:
    """Decode one operand; consumes its extension bytes and applies any
    stack side effect immediately (operands resolve left to right)."""
    if mode <= isa.REG_XS:
        return _Loc("reg", mode)
    if mode == isa.MODE_IND_XL:
        return _Loc("mem", state.regs[isa.REG_XL])
    if mode == isa.MODE_IND_XR:
        return _Loc("mem", state.regs[isa.REG_XR])
    if mode == isa.MODE_POP:
        addr = state.regs[isa.REG_XS]
        moved = addr + 2
        if moved > state.stack_top:
            raise VmFault("stack underflow")
        state.regs[isa.REG_XS] = moved
        return _Loc("mem", addr)
    if mode == isa.MODE_PUSH:
        moved = state.regs[isa.REG_XS] - 2
        if moved < state.stack_bottom:
            raise VmFault("stack overflow")
        state.regs[isa.REG_XS] = moved
        return _Loc("mem", moved)
    if mode == isa.MODE_MEM1:
        b, _ = _fetch(state)
        return _Loc("mem", b)
    if mode == isa.MODE_MEM2:
        hi, _ = _fetch(state)
        lo, _ = _fetch(state)
        return _Loc("mem", (hi << 8) | lo)
    if mode == isa.MODE_LIT:
        return _Loc("lit", _fetch_literal(state))
    if mode == isa.MODE_OFF_XL:
        return _Loc("mem", state.regs[isa.REG_XL] + _fetch_literal(state))
    if mode == isa.MODE_OFF_XR:
        return _Loc("mem", state.regs[isa.REG_XR] + _fetch_literal(state))
    if mode == isa.MODE_OFF_XS:
        return _Loc("mem", state.regs[isa.REG_XS] + _fetch_literal(state))
    raise VmFault(f"bad operand mode {mode:#x}")


def _read(state: VmState, loc: _Loc) -> int:
    if loc.kind == "reg":
        return state.regs[loc.where]
    if loc.kind == "mem":
        return _read_word(state, loc.where)
    return loc.where


def _write(state: VmState, loc: _Loc, value: int) -> None:
    value &= 0xFFFF
    if loc.kind == "reg":
        state.regs[loc.where] = value
    elif loc.kind == "mem":
        _write_word(state, loc.where, value)
    else:
        raise VmFault("write to a literal operand")


def _jump(state: VmState, target: int) -> None:
    # A taken branch lands in the main stream, so any active body is done.
    state.cursor = None
    state.pc = target & 0xFFFF


# ---------------------------------------------------------------------------
# Stepping

def step(state: VmState) -> StepEvent:
    if state.halted:
        raise ValueError("cannot step a halted machine")
    try:
        return _step(state)
    except VmFault as fault:
        state.halted = True
        return StepEvent("fault", reason=str(fault))


def _step(state: VmState) -> StepEvent:
    op, addr = _fetch(state)
    if op >= isa.MACRO_OPCODE_BASE:
        if addr is None:
            raise VmFault(f"macro opcode {op:#04x} inside a macro body")
        idx = op - isa.MACRO_OPCODE_BASE
        if idx >= len(state.macros):
            raise VmFault(f"undefined opcode {op:#04x}")
        state.cursor = (idx, 0, state.pc)
        op, addr = _fetch(state)
        if op >= isa.MACRO_OPCODE_BASE:
            raise VmFault(f"macro body begins with opcode {op:#04x}")
    name = isa.MNEMONICS.get(op)
    if name is None:
        raise VmFault(f"undefined opcode {op:#04x}")

    if name == "HLT":
        state.halted = True
        return StepEvent("halted")
    if name == "NOP":
        return StepEvent("executed")
    if name == "BRN":
        _fetch(state)  # fixed header, nibble for the code address
        _jump(state, _fetch_target(state))
        return StepEvent("executed")

    header, _ = _fetch(state)
    first = header & 0x0F
    second = header >> 4

    if name in ("BEQ", "BNE", "BLT"):
        a = _read(state, _resolve(state, first))
        b = _read(state, _resolve(state, second))
        target = _fetch_target(state)
        taken = (a == b if name == "BEQ"
                 else a != b if name == "BNE"
                 else a < b)
        if taken:
            _jump(state, target)
        return StepEvent("executed")

    if name == "MOV":
        value = _read(state, _resolve(state, first))
        _write(state, _resolve(state, second), value)
        return StepEvent("executed")
    if name in ("ADD", "SUB"):
        value = _read(state, _resolve(state, first))
        loc = _resolve(state, second)
        old = _read(state, loc)
        _write(state, loc, old + value if name == "ADD" else old - value)
        return StepEvent("executed")
    if name in ("ICV", "DCV"):
        loc = _resolve(state, first)
        old = _read(state, loc)
        _write(state, loc, old + 1 if name == "ICV" else old - 1)
        return StepEvent("executed")
    if name == "ZER":
        _write(state, _resolve(state, first), 0)
        return StepEvent("executed")
    if name == "LCW":
        loc = _resolve(state, first)
        value = _read_word(state, state.regs[isa.REG_XL])
        state.regs[isa.REG_XL] = (state.regs[isa.REG_XL] + 2) & 0xFFFF
        _write(state, loc, value)
        return StepEvent("executed")
    if name == "BRI":
        _jump(state, _read(state, _resolve(state, first)))
        return StepEvent("executed")
    if name == "OUT":
        value = _read(state, _resolve(state, first))
        state.out_trace.append(value)
        return StepEvent("output", value=value)
    raise VmFault(f"unhandled mnemonic {name}")  # unreachable by table


def run(state: VmState, fuel: int) -> RunOutcome:
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    steps = 0
    while steps < fuel:
        event = step(state)
        steps += 1
        if event.kind == "halted":
            return RunOutcome("halted", steps, list(state.out_trace))
        if event.kind == "fault":
            return RunOutcome("fault", steps, list(state.out_trace),
                              fault_reason=event.reason)
    return RunOutcome("out-of-fuel", steps, list(state.out_trace))

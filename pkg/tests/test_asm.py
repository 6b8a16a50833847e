import pytest

from macroforge import asm, objfile
from macroforge.asm import (
    AsmError,
    LayoutError,
    assemble,
    assemble_stream,
    decode_literal,
    decode_short_branch,
    encode_literal,
    encode_short_branch,
    parse_source,
    print_program,
)
from macroforge.objfile import FLAG_RAW, MacroEntry, ObjectError, ObjectImage


def code_for(text, origin=0x100):
    stream, layout = assemble_stream(text, origin)
    return asm.resolve_stream(stream, layout)


# --- frozen instruction encodings -----------------------------------------

def test_mov_register_to_push():
    assert code_for("      MOV XR, -(XS)") == bytes([0x32, 0x94])


def test_compare_literal_branch():
    text = "EXSI1 NOP\n      BNE WA, =0x7FFF, EXSI1\n"
    assert code_for(text) == bytes([0x01, 0x09, 0xB0, 0x7F, 0xFF, 0x01, 0x00])


def test_push_label_address():
    text = "NULLS NOP\n      MOV =NULLS, -(XS)\n"
    assert code_for(text) == bytes([0x01, 0x32, 0x9B, 0x01, 0x00])


def test_raw_hex_lines():
    text = "EXITS LCW 04\n      BRI 03\n      MOV A0, 25\n"
    assert code_for(text) == bytes([0x2A, 0x04, 0x0B, 0x03, 0x32, 0xA0, 0x25])


def test_raw_branch_matches_symbolic():
    raw = "EXSI1 NOP\n      BNE B0, 7FFF, EXSI1\n"
    sym = "EXSI1 NOP\n      BNE WA, =0x7FFF, EXSI1\n"
    assert code_for(raw) == code_for(sym)


def test_memory_modes():
    assert code_for("      MOV @25, WB") == bytes([0x32, 0x1A, 0x25])
    assert code_for("      MOV @1000, WB") == bytes([0x32, 0x1C, 0x10, 0x00])


def test_indexed_offset_uses_literal_form():
    assert code_for("      MOV WA, 2(XR)") == bytes([0x32, 0xE0, 0x82])


def test_add_literal():
    assert code_for("      ADD =5, WA") == bytes([0x10, 0x0B, 0x85])


def test_no_header_instructions():
    assert code_for("      HLT") == bytes([0x00])
    assert code_for("      NOP") == bytes([0x01])


def test_single_operand_headers():
    assert code_for("      ICV WC") == bytes([0x1C, 0x02])
    assert code_for("      ZER WC") == bytes([0x44, 0x02])
    assert code_for("      OUT WA") == bytes([0x40, 0x00])
    assert code_for("      LCW XR") == bytes([0x2A, 0x04])


def test_stack_and_indirect_modes():
    assert code_for("      MOV (XS)+, WA") == bytes([0x32, 0x08])
    assert code_for("      MOV (XL), (XR)") == bytes([0x32, 0x76])


# --- literal encoding ------------------------------------------------------

def test_encode_literal_forms():
    assert encode_literal(0x00) == bytes([0x80])
    assert encode_literal(0x02) == bytes([0x82])
    assert encode_literal(0x7F) == bytes([0xFF])
    assert encode_literal(0x80) == bytes([0x00, 0x80])
    assert encode_literal(0x7FFF) == bytes([0x7F, 0xFF])


def test_encode_literal_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_literal(-1)
    with pytest.raises(ValueError):
        encode_literal(0x8000)


def test_literal_round_trip_and_self_description():
    values = list(range(0, 0x8000, 61)) + [0x7F, 0x80, 0x7FFF]
    for v in values:
        data = encode_literal(v)
        if v <= 0x7F:
            assert len(data) == 1 and data[0] >= 0x80
        else:
            assert len(data) == 2 and data[0] < 0x80
        assert decode_literal(data, 0) == (v, len(data))


# --- short branch ----------------------------------------------------------

def test_short_branch_frozen_points():
    base = 0x0102
    assert encode_short_branch(base, base) == 0xC0
    assert encode_short_branch(base + 0x3F, base) == 0x81
    assert encode_short_branch(base - 0x3F, base) == 0xFF
    assert encode_short_branch(base + 0x40, base) == 0x80
    assert encode_short_branch(base + 0x41, base) is None
    assert encode_short_branch(base - 0x40, base) is None


def test_short_branch_round_trip():
    offset = 0x0141
    for delta in range(-0x3F, 0x41):
        b = encode_short_branch(offset + delta, offset)
        assert 0x80 <= b <= 0xFF
        assert decode_short_branch(b, offset) == offset + delta


# --- relaxation ------------------------------------------------------------

def test_relaxation_cascade():
    # The outer branch starts one byte out of short range and comes into
    # range only after the inner branch relaxes, so the fixpoint needs a
    # second pass.  Final geometry puts FIN exactly 0x3F past the outer
    # offset byte, which must encode as 0x81.
    lines = ["START BRN +FIN", "      BRN +MID", "MID   NOP"]
    lines += ["      NOP"] * 58
    lines += ["FIN   HLT"]
    text = "\n".join(lines) + "\n"
    stream, layout = assemble_stream(text)
    assert layout.size == 66
    assert layout.symbols == {"START": 0x100, "MID": 0x106, "FIN": 0x141}
    code = asm.resolve_stream(stream, layout)
    assert len(code) == 66
    assert code[2] == 0x81
    assert code[5] == 0xBF
    assert code[-1] == 0x00

    rigid_stream = asm.translate_program(parse_source(text))
    rigid = asm.layout_and_resolve(rigid_stream, relax=False)
    assert rigid.size == 68


def test_far_branch_stays_absolute():
    lines = ["      BRN +FIN"] + ["      NOP"] * 0x90 + ["FIN   HLT"]
    code = code_for("\n".join(lines))
    fin = 0x100 + 4 + 0x90
    assert code[:4] == bytes([0x03, 0x0C, fin >> 8, fin & 0xFF])
    assert len(code) == 4 + 0x90 + 1


def test_backward_short_branch():
    text = "LOOP  ICV WC\n      BLT WC, =5, -LOOP\n"
    assert code_for(text) == bytes([0x1C, 0x02, 0x0A, 0xB2, 0x85, 0xC5])


def test_plain_label_ref_is_never_relaxed():
    text = "LOOP  ICV WC\n      BLT WC, =5, LOOP\n"
    assert code_for(text) == bytes([0x1C, 0x02, 0x0A, 0xB2, 0x85, 0x01, 0x00])


# --- parsing ---------------------------------------------------------------

def test_parse_print_round_trip():
    text = (
        "START MOV XR, -(XS)\n"
        "      MOV =NULLS, -(XS)\n"
        "      BNE WA, =0x7FFF, +START\n"
        "NULLS LCW 04\n"
        "      MOV WA, 2(XR)\n"
        "      MOV @25, WB\n"
        "      ADD =5, WA\n"
        "      BRN START\n"
        "      HLT\n"
    )
    prog = parse_source(text)
    assert parse_source(print_program(prog)) == prog


def test_comments_and_blank_lines():
    text = "* full line comment\n; another\n\n      NOP  trailing words ignored\n"
    prog = parse_source(text)
    assert [i.mnemonic for i in prog] == ["NOP"]
    assert prog[0].operands == []


def test_label_rules():
    with pytest.raises(AsmError):
        parse_source("FEED  HLT")       # reads as a 4-digit hex item
    with pytest.raises(AsmError):
        parse_source("TOOLONG HLT")
    with pytest.raises(AsmError):
        parse_source("1ST   HLT")
    assert parse_source("FEEDS HLT")[0].label == "FEEDS"
    assert parse_source("L1$   HLT")[0].label == "L1$"


def test_duplicate_label_reports_both_lines():
    with pytest.raises(AsmError, match="line 2.*line 1"):
        parse_source("L1 NOP\nL1 HLT\n")


def test_unknown_mnemonic():
    with pytest.raises(AsmError, match="line 1"):
        parse_source("      XYZ WA")


def test_style_mixing_rejected():
    with pytest.raises(AsmError, match="mix"):
        parse_source("      MOV WA, 25")


def test_operand_role_validation():
    bad_lines = [
        "      MOV -(XS), WA",   # push cannot be read
        "      MOV WA, (XS)+",   # pop cannot be written
        "      MOV WA, =5",      # literal cannot be written
        "      ADD WA, =5",
        "      BRN WA",
        "      OUT",
        "      ICV WA, WB",
    ]
    for line in bad_lines:
        with pytest.raises(AsmError):
            code_for(line)


def test_value_ranges_enforced():
    with pytest.raises(AsmError):
        parse_source("      MOV =8000, WA")
    with pytest.raises(AsmError):
        parse_source("      MOV @FFFF, WA")


# --- layout errors ---------------------------------------------------------

def test_undefined_label():
    with pytest.raises(LayoutError, match="NOPE"):
        code_for("      BRN NOPE")


def test_label_address_bound():
    with pytest.raises(LayoutError, match="0x8000"):
        assemble_stream("BIG   HLT", origin=0x8000)


def test_program_must_fit_in_memory():
    with pytest.raises(LayoutError):
        assemble_stream("      NOP\n      HLT", origin=0xFFFF)


# --- object container ------------------------------------------------------

def test_assemble_object_round_trip():
    text = (
        "START ZER WC\n"
        "LOOP  ICV WC\n"
        "      BLT WC, =5, -LOOP\n"
        "      HLT\n"
    )
    img = assemble(text, entry="LOOP")
    assert img.entry == 0x102
    back = objfile.parse(img.serialize())
    assert back.code == img.code
    assert back.origin == 0x100
    assert back.entry == 0x102
    assert back.macros == []
    assert back.flags == 0


def test_entry_label_must_exist():
    with pytest.raises(LayoutError):
        assemble("      HLT", entry="NOPE")


def test_container_rejects_garbage():
    img = assemble("      HLT")
    blob = img.serialize()
    with pytest.raises(ObjectError, match="magic"):
        objfile.parse(b"XXXX" + blob[4:])
    with pytest.raises(ObjectError, match="version"):
        objfile.parse(blob[:4] + b"\x09" + blob[5:])
    with pytest.raises(ObjectError, match="truncated"):
        objfile.parse(blob[:-1])
    with pytest.raises(ObjectError, match="trailing"):
        objfile.parse(blob + b"\x00")


def test_container_long_raw_payload():
    img = ObjectImage(code=bytes(70000), origin=0, entry=0, flags=FLAG_RAW)
    back = objfile.parse(img.serialize())
    assert back.code == img.code
    assert back.is_raw


def test_macro_table_validation():
    def img(macros, flags=0):
        return ObjectImage(code=b"\x00", macros=macros, flags=flags)

    with pytest.raises(ObjectError, match="opcode slots"):
        img([MacroEntry(0x50 + i, b"\x01\x01") for i in range(177)]).validate()
    with pytest.raises(ObjectError, match="duplicate"):
        img([MacroEntry(0x50, b"\x01\x01"), MacroEntry(0x50, b"\x01\x01")],
            flags=FLAG_RAW).validate()
    with pytest.raises(ObjectError, match="dense"):
        img([MacroEntry(0x51, b"\x01\x01")]).validate()
    with pytest.raises(ObjectError, match="starts with"):
        img([MacroEntry(0x50, b"\x50\x01")]).validate()
    with pytest.raises(ObjectError, match="under 2"):
        img([MacroEntry(0x50, b"\x01")]).validate()
    with pytest.raises(ObjectError, match="empty"):
        img([MacroEntry(0x50, b"")], flags=FLAG_RAW).validate()
    img([MacroEntry(0x50, b"\x32\x94"), MacroEntry(0x51, b"\x1c\x02")]).validate()

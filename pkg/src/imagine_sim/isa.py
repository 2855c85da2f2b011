"""Instruction set of the GEMV engine overlay: encoding, decoding, assembler.

Instruction word layout (30 bits, stored right-aligned in a 32-bit word):

    [29:26] opcode   4 bits
    [25:20] fn       6 bits   opcode-dependent modifier
    [19:10] addr1   10 bits   register-file row address / id / value
    [ 9: 0] addr2   10 bits   register-file row address / mask / value

Field meaning by opcode:

    NOP                          all fields ignored (canonical form all-zero)
    SET_PARAMS  fn=packed mode bits (see OP_W_CODES below), addr1=Wacc
    SET_PTR     addr1=pointer value
    SEL_BLOCK   addr1=id, addr2=mask   (selected := ((block_id^id)&mask)==0)
    COPY        fn=0 plain W-wide copy, fn=1 widen 2W->Wacc; addr1=src row
    ADD/SUB     fn=0 W-wide, fn=1 accumulate (2W-bit src1 sign-extended to
                Wacc); addr1=src1 row, addr2=src2 row; dest row = pointer
    MULT        addr1=multiplicand row, addr2=multiplier row; 2W-bit product
                written to the fixed product scratch window
    ACC_BLK     fn=stage (0..3), addr1=accumulator row; dest = pointer
    ACC_HOP     fn=hop level, addr1=accumulator row; dest = pointer
    READ_OUT    addr1=accumulator row (captured into the output column)
    SHIFT_OUT   all fields ignored
    HALT        all fields ignored

Single-cycle opcodes execute in one cycle; the multicycle ones are costed by
the processing-core microcode (see pimcore)."""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from enum import IntEnum


class Opcode(IntEnum):
    NOP = 0
    SET_PARAMS = 1
    SET_PTR = 2
    SEL_BLOCK = 3
    COPY = 4
    ADD = 5
    SUB = 6
    MULT = 7
    ACC_BLK = 8
    ACC_HOP = 9
    READ_OUT = 10
    SHIFT_OUT = 11
    HALT = 12
    # codes 13..15 reserved


SINGLE_CYCLE_OPCODES = frozenset(
    {Opcode.NOP, Opcode.SET_PARAMS, Opcode.SET_PTR, Opcode.SEL_BLOCK, Opcode.SHIFT_OUT}
)

# SET_PARAMS fn bit layout: [1:0] W code, [2] signed, [3] radix-4, [4] slice-4
OP_W_CODES = {2: 0, 4: 1, 8: 2, 16: 3}
OP_W_FROM_CODE = {v: k for k, v in OP_W_CODES.items()}

_FIELD_LIMITS = {"fn": 64, "addr1": 1024, "addr2": 1024}


class EncodingError(ValueError):
    """An instruction field is outside its encodable range."""


class IllegalInstructionError(ValueError):
    """A word decodes to an unassigned opcode."""

    def __init__(self, code):
        self.code = code
        super().__init__(f"illegal instruction: unassigned opcode code {code}")


class AssemblyError(ValueError):
    """Source text does not assemble; carries the 1-based line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    fn: int = 0
    addr1: int = 0
    addr2: int = 0

    def __str__(self):
        return f"{self.opcode.name} fn={self.fn} a1={self.addr1} a2={self.addr2}"


@dataclass
class Program:
    """Ordered instruction sequence plus assembler-level symbolic labels."""

    instructions: list[Instruction] = field(default_factory=list)
    labels: dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def validate(self):
        """Check the structural invariants: HALT-terminated, SET_PARAMS
        precedes the first multicycle instruction."""
        if not self.instructions or self.instructions[-1].opcode is not Opcode.HALT:
            raise ValueError("program must end with HALT")
        for instr in self.instructions:
            if instr.opcode is Opcode.SET_PARAMS:
                break
            if instr.opcode not in SINGLE_CYCLE_OPCODES and instr.opcode is not Opcode.HALT:
                raise ValueError(
                    f"{instr.opcode.name} issued before SET_PARAMS set the operation parameters"
                )


def encode(instr: Instruction) -> int:
    """Pack an instruction into its 30-bit word."""
    for name, limit in _FIELD_LIMITS.items():
        value = getattr(instr, name)
        if not 0 <= value < limit:
            raise EncodingError(f"field {name}={value} out of range [0, {limit})")
    opcode = int(instr.opcode)
    if not 0 <= opcode < 16:
        raise EncodingError(f"field opcode={opcode} out of range [0, 16)")
    return (opcode << 26) | (instr.fn << 20) | (instr.addr1 << 10) | instr.addr2


def decode(word: int) -> Instruction:
    """Exact inverse of encode on valid opcodes."""
    if not 0 <= word < (1 << 30):
        raise EncodingError(f"word 0x{word:X} does not fit in 30 bits")
    code = (word >> 26) & 0xF
    try:
        opcode = Opcode(code)
    except ValueError:
        raise IllegalInstructionError(code) from None
    return Instruction(
        opcode=opcode,
        fn=(word >> 20) & 0x3F,
        addr1=(word >> 10) & 0x3FF,
        addr2=word & 0x3FF,
    )


# ---------------------------------------------------------------------------
# Text assembler
#
# Grammar (one statement per line):
#   # comment                 (also allowed after a statement)
#   label:
#   mnemonic [op1[, op2...]]
# Operands are decimal or 0x-hex integers, previously defined label names,
# or key=value pairs for `setp`.

MNEMONICS = {
    "nop": Opcode.NOP,
    "setp": Opcode.SET_PARAMS,
    "setptr": Opcode.SET_PTR,
    "selblk": Opcode.SEL_BLOCK,
    "copy": Opcode.COPY,
    "add": Opcode.ADD,
    "sub": Opcode.SUB,
    "mult": Opcode.MULT,
    "accblk": Opcode.ACC_BLK,
    "acchop": Opcode.ACC_HOP,
    "readout": Opcode.READ_OUT,
    "shiftout": Opcode.SHIFT_OUT,
    "halt": Opcode.HALT,
}

MNEMONIC_OF = {op: name for name, op in MNEMONICS.items()}

# operand-count range and field slots per mnemonic (setp handled separately)
_OPERAND_SLOTS = {
    "nop": ([], []),
    "setptr": (["addr1"], []),
    "selblk": (["addr1", "addr2"], []),
    "copy": (["addr1"], ["fn"]),
    "add": (["addr1", "addr2"], ["fn"]),
    "sub": (["addr1", "addr2"], ["fn"]),
    "mult": (["addr1", "addr2"], []),
    "accblk": (["fn", "addr1"], []),
    "acchop": (["fn", "addr1"], []),
    "readout": (["addr1"], []),
    "shiftout": ([], []),
    "halt": ([], []),
}

_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def pack_params_fn(w: int, signed: bool = True, radix: int = 2, slice_: int = 1) -> int:
    """Build the SET_PARAMS fn field from operation parameters."""
    if w not in OP_W_CODES:
        raise EncodingError(f"unsupported operand width W={w} (must be one of {sorted(OP_W_CODES)})")
    if radix not in (2, 4):
        raise EncodingError(f"radix must be 2 or 4, got {radix}")
    if slice_ not in (1, 4):
        raise EncodingError(f"slice must be 1 or 4, got {slice_}")
    fn = OP_W_CODES[w]
    fn |= int(bool(signed)) << 2
    fn |= (radix == 4) << 3
    fn |= (slice_ == 4) << 4
    return fn


def unpack_params_fn(fn: int):
    """Inverse of pack_params_fn; returns (w, signed, radix, slice)."""
    w = OP_W_FROM_CODE[fn & 0x3]
    signed = bool(fn & 0x4)
    radix = 4 if fn & 0x8 else 2
    slice_ = 4 if fn & 0x10 else 1
    return w, signed, radix, slice_


def make_set_params(w, wacc, signed=True, radix=2, slice_=1) -> Instruction:
    return Instruction(Opcode.SET_PARAMS, fn=pack_params_fn(w, signed, radix, slice_), addr1=wacc)


def _parse_int(token, labels, lineno):
    token = token.strip()
    if token in labels:
        return labels[token]
    try:
        return int(token, 0)
    except ValueError:
        raise AssemblyError(lineno, f"invalid operand {token!r}") from None


def _parse_setp(operands, lineno):
    keys = {"w": None, "acc": None, "signed": 1, "radix": 2, "slice": 1}
    for op in operands:
        if "=" not in op:
            raise AssemblyError(lineno, f"setp operand must be key=value, got {op!r}")
        key, _, value = op.partition("=")
        key = key.strip()
        if key not in keys:
            raise AssemblyError(lineno, f"unknown setp key {key!r}")
        try:
            keys[key] = int(value.strip(), 0)
        except ValueError:
            raise AssemblyError(lineno, f"invalid setp value in {op!r}") from None
    if keys["w"] is None:
        raise AssemblyError(lineno, "setp requires w=<width>")
    if keys["acc"] is None:
        keys["acc"] = 2 * keys["w"]
    try:
        fn = pack_params_fn(keys["w"], bool(keys["signed"]), keys["radix"], keys["slice"])
    except EncodingError as exc:
        raise AssemblyError(lineno, str(exc)) from None
    if not 0 <= keys["acc"] < 1024:
        raise AssemblyError(lineno, f"acc={keys['acc']} out of range [0, 1024)")
    return Instruction(Opcode.SET_PARAMS, fn=fn, addr1=keys["acc"])


def assemble(text: str) -> Program:
    """Assemble source text into a Program. Deterministic: identical source
    bytes always produce identical output."""
    program = Program()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.endswith(":"):
            label = line[:-1].strip()
            if not _LABEL_RE.match(label):
                raise AssemblyError(lineno, f"invalid label {label!r}")
            if label in program.labels:
                raise AssemblyError(lineno, f"duplicate label {label!r}")
            program.labels[label] = len(program.instructions)
            continue
        parts = line.split(None, 1)
        mnemonic = parts[0].lower()
        operands = [p.strip() for p in parts[1].split(",")] if len(parts) > 1 else []
        if mnemonic not in MNEMONICS:
            raise AssemblyError(lineno, f"unknown mnemonic {mnemonic!r}")
        if mnemonic == "setp":
            instr = _parse_setp(operands, lineno)
        else:
            required, optional = _OPERAND_SLOTS[mnemonic]
            if not len(required) <= len(operands) <= len(required) + len(optional):
                raise AssemblyError(
                    lineno,
                    f"{mnemonic} takes {len(required)}"
                    + (f"..{len(required) + len(optional)}" if optional else "")
                    + f" operands, got {len(operands)}",
                )
            fields = {"fn": 0, "addr1": 0, "addr2": 0}
            for slot, token in zip(required + optional, operands):
                fields[slot] = _parse_int(token, program.labels, lineno)
            for name, limit in _FIELD_LIMITS.items():
                if not 0 <= fields[name] < limit:
                    raise AssemblyError(
                        lineno, f"operand {name}={fields[name]} out of range [0, {limit})"
                    )
            instr = Instruction(MNEMONICS[mnemonic], **fields)
        program.instructions.append(instr)
    return program


# ---------------------------------------------------------------------------
# Binary container: magic "IMG1", u32le word count, u32le words

MAGIC = b"IMG1"


def to_bytes(program: Program) -> bytes:
    words = [encode(i) for i in program.instructions]
    return MAGIC + struct.pack("<I", len(words)) + struct.pack(f"<{len(words)}I", *words)


def from_bytes(data: bytes) -> Program:
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    (count,) = struct.unpack_from("<I", data, 4)
    expected = 8 + 4 * count
    if len(data) < expected:
        raise ValueError(f"truncated program: need {expected} bytes, have {len(data)}")
    words = struct.unpack_from(f"<{count}I", data, 8)
    return Program(instructions=[decode(w) for w in words])

"""Bit-accurate emulation of the PIM blocks backing the GEMV engine.

One block is 16 bit-serial PEs sharing a 1024-row register file (one bit
column per PE), a pointer register for the write-stream address, block-ID
predication, and an east-to-west streaming port.  A register file row is a
16-bit value, one bit per PE, so whole-row operations vectorize naturally:
the state of an entire block grid is a uint16 array of shape
(rows, cols, 1024) and every micro-step is a couple of bitwise numpy ops.

Cycle-cost contract of the multicycle operations (D = ALU drain depth):

    add/sub/copy, width B bits      1 + B + D
    multiply, P recode passes       1 + P*(W+2) + D     P = W (radix-2),
                                                        ceil(W/2) (radix-4)
    in-block reduction stage        1 + Wacc + D
    hop reduction level             1 + ceil(Wacc/slice) + D

The leading "+1" is the cycle spent loading parameters from the Op-Params
store.  The register file sustains at most 2 row reads and 1 row write per
cycle; every micro-step below asserts that budget.
"""

from __future__ import annotations

import math
from enum import Enum, IntEnum

import numpy as np

PE_COUNT = 16
REGFILE_ROWS = 1024
PORT_READS_PER_CYCLE = 2
PORT_WRITES_PER_CYCLE = 1
DEFAULT_ALU_DRAIN = 2

# Default logical register map.  The planner may override it; these bases
# only anchor the generated GEMV programs.
MATRIX_BASE = 0  # rows   0..511  matrix operand space
VECTOR_BASE = 512  # rows 512..767  vector operand space
ACC_BASE = 768  # rows 768..895  accumulator
SCRATCH_BASE = 896  # rows 896..1023 scratch (product window)
MATRIX_SPACE = VECTOR_BASE - MATRIX_BASE
VECTOR_SPACE = ACC_BASE - VECTOR_BASE
ACC_SPACE = SCRATCH_BASE - ACC_BASE
SCRATCH_SPACE = REGFILE_ROWS - SCRATCH_BASE

_MASK16 = np.uint16(0xFFFF)


class AluMode(IntEnum):
    ADD = 0
    SUB = 1
    BOOTH_PASS = 2  # operand pass-through (used by copies and streaming)


class OperandSource(Enum):
    OWN_ROW = "own_row"
    EAST_STREAM = "east_stream"
    ZERO = "zero"


class LayoutError(ValueError):
    """Row ranges of an operation partially overlap or fall off the file."""


class UnsupportedWidthError(ValueError):
    """Operand width exceeds the register budget of the PE microcode."""


class InvalidStageError(ValueError):
    """In-block reduction stage outside 0..3."""


def alu_step(a_bits, b_bits, carry, mode=AluMode.ADD):
    """One ALU micro-step over 16 packed PE lanes (or arrays thereof).

    Full-adder semantics per PE: sum = a ^ b ^ c, carry' = majority(a, b, c).
    SUB inverts the b operand; the caller is responsible for seeding the
    carry with 1 (two's complement).  BOOTH_PASS forwards b unchanged.
    """
    a = np.asarray(a_bits, dtype=np.uint16)
    b = np.asarray(b_bits, dtype=np.uint16)
    c = np.asarray(carry, dtype=np.uint16)
    if mode == AluMode.BOOTH_PASS:
        return b.copy(), c.copy()
    if mode == AluMode.SUB:
        b = b ^ _MASK16
    total = a ^ b ^ c
    carry_out = (a & b) | (a & c) | (b & c)
    return total, carry_out


def mult_passes(width: int, radix: int) -> int:
    if radix == 2:
        return width
    if radix == 4:
        return (width + 1) // 2
    raise ValueError(f"radix must be 2 or 4, got {radix}")


def cost_stream(width: int, d_alu: int) -> int:
    return 1 + width + d_alu


def cost_mult(width: int, radix: int, d_alu: int) -> int:
    return 1 + mult_passes(width, radix) * (width + 2) + d_alu


def cost_hop(wacc: int, slice_: int, d_alu: int) -> int:
    return 1 + math.ceil(wacc / slice_) + d_alu


def hop_levels(block_cols: int) -> int:
    """Binary-hop reduction levels needed across block columns."""
    if block_cols < 1:
        raise ValueError("need at least one block column")
    return math.ceil(math.log2(block_cols)) if block_cols > 1 else 0


def _assert_ports(reads, writes):
    assert reads <= PORT_READS_PER_CYCLE, f"{reads} row reads in one cycle"
    assert writes <= PORT_WRITES_PER_CYCLE, f"{writes} row writes in one cycle"


def _check_ranges(*ranges, allow_equal=True):
    """Ranges are (start, length); they must lie in the file and be pairwise
    equal or disjoint (partial overlap is a layout error)."""
    for start, length in ranges:
        if start < 0 or start + length > REGFILE_ROWS:
            raise LayoutError(f"rows [{start}, {start + length}) outside the register file")
    for i, (s1, l1) in enumerate(ranges):
        for s2, l2 in ranges[i + 1 :]:
            if (s1, l1) == (s2, l2) and allow_equal:
                continue
            if s1 < s2 + l2 and s2 < s1 + l1:
                raise LayoutError(
                    f"rows [{s1}, {s1 + l1}) and [{s2}, {s2 + l2}) partially overlap"
                )


class BlockGrid:
    """State of a rows x cols array of PIM blocks stepped in lockstep.

    block_id defaults to the global column index: the hop network reduces
    east-to-west, so column-based selection is the only pattern the
    instruction stream needs.
    """

    def __init__(self, block_rows: int, block_cols: int):
        if block_rows < 1 or block_cols < 1:
            raise ValueError("grid must have at least one block")
        self.block_rows = block_rows
        self.block_cols = block_cols
        self.shape = (block_rows, block_cols)
        self.rf = np.zeros((block_rows, block_cols, REGFILE_ROWS), dtype=np.uint16)
        self.ptr = np.zeros(self.shape, dtype=np.int32)
        self.carry = np.zeros(self.shape, dtype=np.uint16)
        self.booth = np.zeros((2,) + self.shape, dtype=np.uint16)
        self.selected = np.ones(self.shape, dtype=bool)
        self.block_id = np.broadcast_to(
            np.arange(block_cols, dtype=np.int32), self.shape
        ).copy()
        self.west_out = np.zeros(self.shape, dtype=np.int64)
        self.east_in = np.zeros(self.shape, dtype=np.int64)
        self.west_stream = None  # (beats, rows, cols) after stream_west

    def reset(self):
        self.rf.fill(0)
        self.ptr.fill(0)
        self.carry.fill(0)
        self.booth.fill(0)
        self.selected.fill(True)
        self.west_out.fill(0)
        self.east_in.fill(0)
        self.west_stream = None

    # -- host backdoor accessors (no cycles, ignore predication) ----------

    def write_bits(self, block_row, block_col, pe, base_row, width, value):
        """Store value as width bits, LSB at base_row, in one PE column."""
        value &= (1 << width) - 1
        for i in range(width):
            bit = (value >> i) & 1
            row = self.rf[block_row, block_col, base_row + i]
            self.rf[block_row, block_col, base_row + i] = (
                row & ~np.uint16(1 << pe)
            ) | np.uint16(bit << pe)

    def read_bits(self, block_row, block_col, pe, base_row, width, signed=True):
        bits = (self.rf[block_row, block_col, base_row : base_row + width] >> pe) & 1
        value = 0
        for i in range(width):
            value |= int(bits[i]) << i
        if signed and value >= 1 << (width - 1):
            value -= 1 << width
        return value

    def read_rows_signed(self, base_row, width):
        """All PEs of all blocks at once -> int64 array (rows, cols, 16)."""
        rows = self.rf[:, :, base_row : base_row + width].astype(np.int64)
        lanes = (rows[:, :, :, None] >> np.arange(PE_COUNT)) & 1
        weights = 1 << np.arange(width, dtype=np.int64)
        value = np.tensordot(lanes, weights, axes=([2], [0]))
        sign = value >= (1 << (width - 1))
        return value - (sign.astype(np.int64) << width)

    def dump_regfile(self, block_row=0, block_col=0):
        """Debug dump: one 4-hex-digit line per row, row 0 first."""
        return "\n".join(f"{int(v):04x}" for v in self.rf[block_row, block_col])


class PimBlock(BlockGrid):
    """A single PIM block (1x1 grid) with scalar convenience accessors."""

    def __init__(self, block_id=0):
        super().__init__(1, 1)
        self.block_id[0, 0] = block_id

    @property
    def pointer(self):
        return int(self.ptr[0, 0])

    @pointer.setter
    def pointer(self, value):
        if not 0 <= value < REGFILE_ROWS:
            raise ValueError(f"pointer {value} out of range")
        self.ptr[0, 0] = value

    @property
    def is_selected(self):
        return bool(self.selected[0, 0])

    def write_pe(self, pe, base_row, width, value):
        self.write_bits(0, 0, pe, base_row, width, value)

    def read_pe(self, pe, base_row, width, signed=True):
        return self.read_bits(0, 0, pe, base_row, width, signed)


def _active(grid, block_mask):
    if block_mask is None:
        return grid.selected
    return grid.selected & block_mask


def _write_row(grid, row, bits, active, pe_mask=0xFFFF):
    old = grid.rf[:, :, row]
    if pe_mask != 0xFFFF:
        keep = np.uint16(0xFFFF ^ pe_mask)
        bits = (old & keep) | (bits & np.uint16(pe_mask))
    grid.rf[:, :, row] = np.where(active, bits, old)


def _commit_alu_state(grid, carry, active, booth_prev=None):
    grid.carry = np.where(active, carry, grid.carry).astype(np.uint16)
    if booth_prev is not None:
        grid.booth[0] = np.where(active, booth_prev, grid.booth[0]).astype(np.uint16)


def set_block_select(grid, id_value: int, mask: int):
    """selected := ((block_id XOR id) AND mask) == 0; mask 0 selects all.

    Selection updates are never themselves predicated.
    """
    grid.selected = ((grid.block_id ^ id_value) & mask) == 0


def set_pointer(grid, value: int, block_mask=None):
    if not 0 <= value < REGFILE_ROWS:
        raise LayoutError(f"pointer {value} out of range [0, {REGFILE_ROWS})")
    active = _active(grid, block_mask)
    grid.ptr = np.where(active, np.int32(value), grid.ptr)


def exec_add(grid, row_a, row_b, row_d, width, d_alu=DEFAULT_ALU_DRAIN, sub=False, block_mask=None):
    """dest[row_d..+W) = rows[row_a..+W) +/- rows[row_b..+W) mod 2^W per PE.

    Returns the cycle count 1 + W + D.
    """
    _check_ranges((row_a, width), (row_b, width), (row_d, width))
    active = _active(grid, block_mask)
    mode = AluMode.SUB if sub else AluMode.ADD
    carry = np.full(grid.shape, _MASK16 if sub else 0, dtype=np.uint16)
    _assert_ports(1, 0)  # Op-Params fetch cycle
    for i in range(width):
        _assert_ports(2, 1)  # two operand rows in, one result row out
        a = grid.rf[:, :, row_a + i]
        b = grid.rf[:, :, row_b + i]
        total, carry = alu_step(a, b, carry, mode)
        _write_row(grid, row_d + i, total, active)
    _commit_alu_state(grid, carry, active)
    return cost_stream(width, d_alu)


def exec_sub(grid, row_a, row_b, row_d, width, d_alu=DEFAULT_ALU_DRAIN, block_mask=None):
    """dest = rows[row_a] - rows[row_b], mod 2^W."""
    return exec_add(grid, row_a, row_b, row_d, width, d_alu, sub=True, block_mask=block_mask)


def exec_copy(grid, row_s, row_d, width, d_alu=DEFAULT_ALU_DRAIN, block_mask=None):
    """dest[row_d..+W) = rows[row_s..+W); streams through the ALU pass mode."""
    _check_ranges((row_s, width), (row_d, width))
    active = _active(grid, block_mask)
    carry = np.zeros(grid.shape, dtype=np.uint16)
    _assert_ports(1, 0)
    for i in range(width):
        _assert_ports(1, 1)
        bits, carry = alu_step(0, grid.rf[:, :, row_s + i], carry, AluMode.BOOTH_PASS)
        _write_row(grid, row_d + i, bits, active)
    return cost_stream(width, d_alu)


def exec_acc_combine(
    grid,
    row_src,
    src_width,
    row_acc,
    wacc,
    d_alu=DEFAULT_ALU_DRAIN,
    op="add",
    block_mask=None,
):
    """Accumulator-width combine: acc := acc +/- sext(src) or sext(src).

    The source operand is src_width bits and sign-extended on the fly (the
    ALU latches the last source bit); the stream is wacc bits long, so the
    cost is 1 + Wacc + D.  op is "add", "sub", or "copy".
    """
    _check_ranges((row_src, src_width), (row_acc, wacc))
    active = _active(grid, block_mask)
    carry = np.full(grid.shape, _MASK16 if op == "sub" else 0, dtype=np.uint16)
    mode = {"add": AluMode.ADD, "sub": AluMode.SUB, "copy": AluMode.BOOTH_PASS}[op]
    _assert_ports(1, 0)
    for i in range(wacc):
        # beyond src_width the source bit comes from the sign latch, not a read
        _assert_ports(2 if i < src_width else 1, 1)
        src_bit = grid.rf[:, :, row_src + min(i, src_width - 1)]
        if mode == AluMode.BOOTH_PASS:
            total, carry = alu_step(0, src_bit, carry, mode)
        else:
            acc_bit = grid.rf[:, :, row_acc + i]
            if mode == AluMode.SUB:
                total, carry = alu_step(acc_bit, src_bit, carry, AluMode.SUB)
            else:
                total, carry = alu_step(acc_bit, src_bit, carry, AluMode.ADD)
        _write_row(grid, row_acc + i, total, active)
    _commit_alu_state(grid, carry, active)
    return cost_stream(wacc, d_alu)


def _booth_digit_masks(radix, b_cur, b_prev, b_hi=None):
    """Recode lane masks (plus1, plus2, minus1, minus2) for one pass."""
    if radix == 2:
        # digit = b_prev - b_cur
        plus1 = b_prev & (b_cur ^ _MASK16)
        minus1 = b_cur & (b_prev ^ _MASK16)
        zero16 = np.zeros_like(b_cur)
        return plus1, zero16, minus1, zero16
    # radix 4: digit = b_prev + b_cur - 2*b_hi
    not_hi = b_hi ^ _MASK16
    diff = b_cur ^ b_prev
    plus1 = not_hi & diff
    plus2 = not_hi & b_cur & b_prev
    minus1 = b_hi & diff
    minus2 = b_hi & (b_cur ^ _MASK16) & (b_prev ^ _MASK16)
    return plus1, plus2, minus1, minus2


def exec_mult_booth(
    grid, row_a, row_b, row_d, width, radix=2, d_alu=DEFAULT_ALU_DRAIN, block_mask=None
):
    """dest[row_d..+2W) = signed(rows[row_a]) * signed(rows[row_b]) per PE.

    Booth-recoded shift-and-add: P = W passes at radix 2, ceil(W/2) at
    radix 4.  Pass i serially adds digit*multiplicand into the product
    window at bit offset i*step; bits below the window are already final,
    so no shifter is needed and the product lands in place.  Multiplier
    bits are prefetched on cycles whose multiplicand bit comes from the
    sign latch, keeping every cycle within the 2-read port budget.

    Returns 1 + P*(W+2) + D cycles.
    """
    if width > 16:
        raise UnsupportedWidthError(f"W={width} exceeds the 16-bit register budget")
    if radix not in (2, 4):
        raise ValueError(f"radix must be 2 or 4, got {radix}")
    _check_ranges((row_a, width), (row_b, width), allow_equal=True)
    _check_ranges((row_d, 2 * width), (row_a, width), allow_equal=False)
    if (row_b, width) != (row_a, width):
        _check_ranges((row_d, 2 * width), (row_b, width), allow_equal=False)

    active = _active(grid, block_mask)
    step = 1 if radix == 2 else 2
    passes = mult_passes(width, radix)
    _assert_ports(2, 0)  # Op-Params fetch + first multiplier-bit prefetch
    prev = np.zeros(grid.shape, dtype=np.uint16)  # recode bit b[-1] = 0
    carry = np.zeros(grid.shape, dtype=np.uint16)
    for i in range(passes):
        offset = i * step
        b_cur = grid.rf[:, :, row_b + offset]
        if radix == 2:
            p1, p2, m1, m2 = _booth_digit_masks(2, b_cur, prev)
            prev_next = b_cur
        else:
            hi_idx = min(offset + 1, width - 1)  # sign-replicated beyond W
            b_hi = grid.rf[:, :, row_b + hi_idx]
            p1, p2, m1, m2 = _booth_digit_masks(4, b_cur, prev, b_hi)
            prev_next = b_hi
        carry = m1 | m2  # two's complement +1 for subtracting lanes
        # previous pass stored the running sum up to this row (clamped)
        top_own = min((i - 1) * step + width + 1, 2 * width - 1)
        own_sign = np.zeros(grid.shape, dtype=np.uint16)
        for p in range(width + 2):
            pos = offset + p
            if pos >= 2 * width:
                break  # clamped: the exact product fits 2W bits
            # one multiplicand read (the shifted operand uses a 1-bit latch),
            # one running-sum read unless this is the first pass
            _assert_ports((1 if p < width else 0) + (1 if i > 0 and pos <= top_own else 0), 1)
            a1 = grid.rf[:, :, row_a + min(p, width - 1)]
            if p == 0:
                a2 = np.zeros(grid.shape, dtype=np.uint16)
            else:
                a2 = grid.rf[:, :, row_a + min(p - 1, width - 1)]
            addend = (
                (a1 & p1)
                | ((a1 ^ _MASK16) & m1)
                | (a2 & p2)
                | ((a2 ^ _MASK16) & m2)
            )
            if i == 0:
                own = np.zeros(grid.shape, dtype=np.uint16)  # OperandSource.ZERO
            elif pos <= top_own:
                own = grid.rf[:, :, row_d + pos].copy()  # read before this write
                if pos == top_own:
                    own_sign = own  # latch the old sign for the extension bits
            else:
                own = own_sign  # sign extension of the previous partial sum
            total, carry = alu_step(own, addend, carry, AluMode.ADD)
            _write_row(grid, row_d + pos, total, active)
        prev = prev_next
    _commit_alu_state(grid, carry, active, booth_prev=prev)
    return cost_mult(width, radix, d_alu)


def acc_block_stage(grid, stage, row_s, row_d, wacc, d_alu=DEFAULT_ALU_DRAIN, block_mask=None):
    """One zero-copy in-block reduction stage.

    PE p with p mod 2^(stage+1) == 0 adds the accumulator of PE p + 2^stage,
    read through the operand mux from the same row fetch (one read serves
    both operands).  After stages 0..3, PE 0 holds the mod-2^Wacc sum of all
    16 PEs.  Returns 1 + Wacc + D cycles.
    """
    if not 0 <= stage < 4:
        raise InvalidStageError(f"stage {stage} outside 0..3 for 16 PEs")
    _check_ranges((row_s, wacc), (row_d, wacc))
    active = _active(grid, block_mask)
    hop = 1 << stage
    writers = 0
    for p in range(0, PE_COUNT, 2 * hop):
        writers |= 1 << p
    carry = np.zeros(grid.shape, dtype=np.uint16)
    _assert_ports(1, 0)
    for i in range(wacc):
        _assert_ports(1, 1)  # zero-copy: one row read feeds both operands
        row = grid.rf[:, :, row_s + i]
        neighbor = row >> np.uint16(hop)
        total, carry = alu_step(row, neighbor, carry, AluMode.ADD)
        _write_row(grid, row_d + i, total, active, pe_mask=writers)
    _commit_alu_state(grid, carry, active)
    return cost_stream(wacc, d_alu)


def hop_accumulate_level(
    grid, level, row_s, row_d, wacc, slice_=1, d_alu=DEFAULT_ALU_DRAIN, block_mask=None
):
    """One east-to-west binary-hop reduction level across block columns.

    Columns c with c mod 2^(level+1) == 0 add the PE-0 accumulator streamed
    from column c + 2^level (when it exists).  The stream is pipelined over
    the distance, so the level costs 1 + ceil(Wacc/slice) + D regardless of
    how many columns it crosses.
    """
    if level < 0:
        raise ValueError("negative hop level")
    _check_ranges((row_s, wacc), (row_d, wacc))
    dist = 1 << level
    cols = np.arange(grid.block_cols)
    recv_cols = (cols % (2 * dist) == 0) & (cols + dist < grid.block_cols)
    receivers = np.broadcast_to(recv_cols, grid.shape)
    active = _active(grid, block_mask) & receivers
    src_cols = np.where(recv_cols, np.minimum(cols + dist, grid.block_cols - 1), cols)
    carry = np.zeros(grid.shape, dtype=np.uint16)
    _assert_ports(1, 0)
    for i in range(wacc):
        _assert_ports(1, 1)  # own read; the partner bit arrives on east_in
        own = grid.rf[:, :, row_s + i]
        incoming = grid.rf[:, src_cols, row_s + i] & np.uint16(1)
        total, carry = alu_step(own, incoming, carry, AluMode.ADD)
        _write_row(grid, row_d + i, total, active, pe_mask=0x0001)
    _commit_alu_state(grid, carry, active)
    return cost_hop(wacc, slice_, d_alu)


def stream_west(grid, row_s, wacc, slice_=1):
    """Serialize PE 0's accumulator westward, LSB first.

    Loads the beat sequence (slice_ bits per beat) into grid.west_stream and
    latches the first beat on west_out.  Returns the number of beats.
    """
    if slice_ not in (1, 4):
        raise ValueError(f"slice must be 1 or 4, got {slice_}")
    _check_ranges((row_s, wacc))
    beats = math.ceil(wacc / slice_)
    stream = np.zeros((beats,) + grid.shape, dtype=np.int64)
    for i in range(wacc):
        bit = (grid.rf[:, :, row_s + i] & 1).astype(np.int64)
        stream[i // slice_] |= bit << (i % slice_)
    grid.west_stream = stream
    grid.west_out = stream[0].copy()
    return beats

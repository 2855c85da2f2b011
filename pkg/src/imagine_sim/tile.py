"""GEMV tile emulation: FSM controller, Op-Params store, PIM block array.

The controller accepts one instruction at a time.  Single-cycle opcodes
retire every cycle; multicycle opcodes occupy the controller for the cycle
counts defined by the pimcore microcode contract.  Optional pipeline stages
(A/B/C) and the control fanout tree delay delivery uniformly, so they appear
as a one-time fill latency, never as per-instruction throughput loss, and
cannot change results.

A Tile is self-sufficient for single-tile programs; the system module drives
an entire tile grid in lockstep with the same cost table (a grid of tiles
sharing one instruction stream is bit-identical to one wide tile, which is
how the vectorized engine executes it).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import pimcore
from .isa import SINGLE_CYCLE_OPCODES, Instruction, Opcode, unpack_params_fn
from .pimcore import BlockGrid, cost_hop, cost_mult, cost_stream


class TrapError(RuntimeError):
    """Controller trap: malformed instruction stream."""


class ConfigurationError(ValueError):
    """Tile/grid configuration mismatch."""


@dataclass(frozen=True)
class OpParams:
    """Operation parameters loaded by SET_PARAMS and read by the multicycle
    driver: operand width, accumulator width, signedness, multiplier radix,
    and accumulation-stream slice width."""

    w: int
    wacc: int
    signed: bool = True
    radix: int = 2
    slice: int = 1

    def __post_init__(self):
        if self.w not in (2, 4, 8, 16):
            raise ValueError(f"W={self.w} not in {{2,4,8,16}}")
        if self.radix not in (2, 4):
            raise ValueError(f"radix={self.radix} not in {{2,4}}")
        if self.slice not in (1, 4):
            raise ValueError(f"slice={self.slice} not in {{1,4}}")
        if self.wacc < 1:
            raise ValueError("Wacc must be positive")

    @classmethod
    def from_instruction(cls, instr: Instruction) -> "OpParams":
        w, signed, radix, slice_ = unpack_params_fn(instr.fn)
        return cls(w=w, wacc=instr.addr1, signed=signed, radix=radix, slice=slice_)


@dataclass
class TileConfig:
    block_rows: int = 12
    block_cols: int = 2
    pipeline_a: bool = False
    pipeline_b: bool = False
    pipeline_c: bool = False
    fanout_levels: int = 2
    fanout_degree: int = 4
    alu_drain: int = pimcore.DEFAULT_ALU_DRAIN

    def __post_init__(self):
        if self.block_rows < 1 or self.block_cols < 1:
            raise ConfigurationError("tile needs at least a 1x1 block array")
        if self.fanout_levels < 0 or self.alu_drain < 0:
            raise ConfigurationError("fanout levels and ALU drain must be non-negative")

    @property
    def enabled_stages(self) -> int:
        return int(self.pipeline_a) + int(self.pipeline_b) + int(self.pipeline_c)

    @property
    def issue_fill(self) -> int:
        """One-time control-path fill: pipeline stages plus fanout levels."""
        return self.enabled_stages + self.fanout_levels


def instruction_cost(instr: Instruction, params: OpParams | None, d_alu: int) -> int:
    """Busy cycles of an instruction under the current Op-Params.

    HALT is free: the controller stops on decoding it.  Multicycle opcodes
    require SET_PARAMS to have executed first.
    """
    op = instr.opcode
    if op is Opcode.HALT:
        return 0
    if op in SINGLE_CYCLE_OPCODES:
        return 1
    if params is None:
        raise TrapError(f"{op.name} issued before SET_PARAMS")
    if op in (Opcode.ADD, Opcode.SUB, Opcode.COPY):
        width = params.wacc if instr.fn == 1 else params.w
        return cost_stream(width, d_alu)
    if op is Opcode.MULT:
        return cost_mult(params.w, params.radix, d_alu)
    if op is Opcode.ACC_BLK:
        return cost_stream(params.wacc, d_alu)
    if op in (Opcode.ACC_HOP, Opcode.READ_OUT):
        return cost_hop(params.wacc, params.slice, d_alu)
    raise TrapError(f"no cost rule for {op.name}")


def _uniform_pointer(grid: BlockGrid) -> int | None:
    """Pointer value shared by all selected blocks; None if none selected.

    The engine broadcasts one control stream, so the write pointer must
    agree across the blocks that participate in a multicycle op.
    """
    selected = grid.ptr[grid.selected]
    if selected.size == 0:
        return None
    values = set(int(v) for v in selected)
    if len(values) > 1:
        raise TrapError(f"divergent pointer among selected blocks: {sorted(values)}")
    return values.pop()


def apply_instruction(grid: BlockGrid, instr: Instruction, params: OpParams | None, d_alu: int):
    """Retire-time semantics of one instruction on a block grid.

    Cycle-accurate interleaving is not observable from outside an
    instruction (one instruction is in flight at a time and latches exchange
    at boundaries), so state is updated atomically at retirement.
    """
    op = instr.opcode
    if op in (Opcode.NOP, Opcode.HALT, Opcode.SET_PARAMS, Opcode.SHIFT_OUT, Opcode.READ_OUT):
        return  # handled by the controller / system I/O column
    if op is Opcode.SET_PTR:
        pimcore.set_pointer(grid, instr.addr1)
        return
    if op is Opcode.SEL_BLOCK:
        pimcore.set_block_select(grid, instr.addr1, instr.addr2)
        return
    if not grid.selected.any():
        return  # nothing selected: cycles elapse, no state changes
    if op is Opcode.MULT:
        if not params.signed:
            raise TrapError("unsigned multiply is not implemented by the Booth PE")
        # the 2W-bit product always lands in the scratch window, leaving the
        # pointer free to address the accumulator for the following combine
        pimcore.exec_mult_booth(
            grid, instr.addr1, instr.addr2, pimcore.SCRATCH_BASE, params.w, params.radix, d_alu
        )
        return
    dest = _uniform_pointer(grid)
    if op is Opcode.COPY:
        if instr.fn == 1:
            pimcore.exec_acc_combine(
                grid, instr.addr1, 2 * params.w, dest, params.wacc, d_alu, op="copy"
            )
        else:
            pimcore.exec_copy(grid, instr.addr1, dest, params.w, d_alu)
    elif op in (Opcode.ADD, Opcode.SUB):
        kind = "sub" if op is Opcode.SUB else "add"
        if instr.fn == 1:
            pimcore.exec_acc_combine(
                grid, instr.addr1, 2 * params.w, dest, params.wacc, d_alu, op=kind
            )
        else:
            pimcore.exec_add(
                grid, instr.addr1, instr.addr2, dest, params.w, d_alu, sub=(kind == "sub")
            )
    elif op is Opcode.ACC_BLK:
        pimcore.acc_block_stage(grid, instr.fn, instr.addr1, dest, params.wacc, d_alu)
    elif op is Opcode.ACC_HOP:
        pimcore.hop_accumulate_level(
            grid, instr.fn, instr.addr1, dest, params.wacc, params.slice, d_alu
        )
    else:  # pragma: no cover - opcode table is closed
        raise TrapError(f"no executor for {op.name}")


class Tile:
    """One GEMV tile: controller plus its block array.

    The controller is a 2-state machine selecting the single-cycle or the
    multicycle driver; while the multicycle driver is busy, new instructions
    are refused (back-pressure) and state is unchanged.
    """

    def __init__(self, config: TileConfig | None = None, grid: BlockGrid | None = None):
        self.cfg = config or TileConfig()
        self.grid = grid if grid is not None else BlockGrid(self.cfg.block_rows, self.cfg.block_cols)
        if self.grid.block_rows != self.cfg.block_rows or self.grid.block_cols != self.cfg.block_cols:
            raise ConfigurationError("grid shape does not match tile config")
        self.params: OpParams | None = None
        self.busy = 0
        self.current: Instruction | None = None
        self.driver = "idle"
        self.cycle = 0
        self.fill_remaining = self.cfg.issue_fill
        self.halted = False
        self.issued: list[Instruction] = []
        self.output_fifo: list[int] = []
        self.outputs: list[int] = []

    def reset_controller(self):
        self.params = None
        self.busy = 0
        self.current = None
        self.driver = "idle"
        self.cycle = 0
        self.fill_remaining = self.cfg.issue_fill
        self.halted = False
        self.issued.clear()
        self.output_fifo.clear()
        self.outputs.clear()

    @property
    def idle(self) -> bool:
        return self.busy == 0 and self.fill_remaining == 0

    def issue(self, instr: Instruction) -> bool:
        """Hand one instruction to the controller; False means busy."""
        if self.halted or not self.idle:
            return False
        cost = instruction_cost(instr, self.params, self.cfg.alu_drain)
        self.issued.append(instr)
        if instr.opcode is Opcode.HALT:
            self.halted = True
            return True
        self.driver = "single" if instr.opcode in SINGLE_CYCLE_OPCODES else "multi"
        self.current = instr
        self.busy = cost
        return True

    def tile_cycle(self):
        """Advance one clock cycle."""
        self.cycle += 1
        if self.fill_remaining > 0:
            self.fill_remaining -= 1
            return
        if self.busy > 0:
            self.busy -= 1
            if self.busy == 0:
                self._retire(self.current)
                self.current = None
                self.driver = "idle"

    def _retire(self, instr: Instruction):
        if instr.opcode is Opcode.SET_PARAMS:
            self.params = OpParams.from_instruction(instr)
            return
        if instr.opcode is Opcode.READ_OUT:
            self._capture_output(instr)
            return
        if instr.opcode is Opcode.SHIFT_OUT:
            if self.output_fifo:
                self.outputs.append(self.output_fifo.pop(0))
            return
        apply_instruction(self.grid, instr, self.params, self.cfg.alu_drain)

    def _capture_output(self, instr: Instruction):
        """Load the output column from PE 0 of the westmost block column."""
        values = self.grid.read_rows_signed(instr.addr1, self.params.wacc)
        self.output_fifo = [int(v) for v in values[:, 0, 0]]

    def run(self, instructions) -> int:
        """Drive a full instruction sequence with busy-waiting; returns the
        cycle count consumed."""
        start = self.cycle
        for instr in instructions:
            while not self.issue(instr):
                self.tile_cycle()
            if self.halted:
                break
        while self.busy > 0 or self.fill_remaining > 0:
            self.tile_cycle()
        return self.cycle - start


def east_west_exchange(tile_w: Tile, tile_e: Tile):
    """Copy the east tile's westmost west_out latches into the west tile's
    easternmost east_in latches (one per block row) at a cycle boundary."""
    if tile_w.grid.block_rows != tile_e.grid.block_rows:
        raise ConfigurationError(
            f"block row mismatch: {tile_w.grid.block_rows} vs {tile_e.grid.block_rows}"
        )
    tile_w.grid.east_in[:, -1] = tile_e.grid.west_out[:, 0]

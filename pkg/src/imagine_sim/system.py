"""Top-level GEMV engine: tile grid, instruction feed, output column.

The engine broadcasts one instruction stream to every tile through the
input registers and fanout tree, so a tile_rows x tile_cols grid of
12x2-block tiles behaves exactly like one (12*tile_rows) x (2*tile_cols)
block array stepped in lockstep.  The cycle loop is the single source of
time: fanout/pipeline fill is paid once per program, each instruction then
costs the cycles of the shared microcode contract.

Host-side data movement (loading operands, reading the dump) uses a
backdoor that costs no cycles; the instruction set only computes.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, fields

import numpy as np

from . import pimcore
from .isa import Opcode, Program
from .pimcore import ACC_BASE, PE_COUNT, BlockGrid
from .tile import OpParams, TileConfig, apply_instruction, instruction_cost


class ConfigError(ValueError):
    """Malformed system configuration."""


class LoadError(ValueError):
    """Host data does not fit the planned layout."""


class SimTimeout(RuntimeError):
    """Cycle budget exceeded (non-termination guard)."""


@dataclass
class SystemConfig:
    tile_rows: int = 1
    tile_cols: int = 1
    tile: TileConfig = field(default_factory=TileConfig)
    global_fanout_levels: int = 2
    clock_mhz: float = 737.0
    slice: int = 1  # accumulation-network variant used by the planner
    radix: int = 2  # multiplier variant used by the planner
    max_cycles: int = 50_000_000

    def __post_init__(self):
        if self.tile_rows < 1 or self.tile_cols < 1:
            raise ConfigError("tile grid must be at least 1x1")
        if self.clock_mhz <= 0:
            raise ConfigError("clock_mhz must be positive")
        if self.slice not in (1, 4) or self.radix not in (2, 4):
            raise ConfigError("slice must be 1|4 and radix 2|4")
        if self.global_fanout_levels < 0:
            raise ConfigError("global fanout depth must be non-negative")

    @property
    def block_rows(self) -> int:
        return self.tile_rows * self.tile.block_rows

    @property
    def block_cols(self) -> int:
        return self.tile_cols * self.tile.block_cols

    @property
    def pe_count(self) -> int:
        return self.block_rows * self.block_cols * PE_COUNT

    @property
    def issue_fill(self) -> int:
        """One-time latency before the first instruction reaches the PEs."""
        return self.global_fanout_levels + self.tile.issue_fill


_TILE_KEYS = {f.name for f in fields(TileConfig)}
_SYSTEM_KEYS = {f.name for f in fields(SystemConfig)} - {"tile"}


def config_from_dict(data: dict) -> SystemConfig:
    """Build a SystemConfig from a flat key-value mapping; unknown keys are
    rejected so typos cannot silently configure nothing."""
    tile_kwargs, sys_kwargs = {}, {}
    for key, value in data.items():
        if key in _TILE_KEYS:
            tile_kwargs[key] = value
        elif key in _SYSTEM_KEYS:
            sys_kwargs[key] = value
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return SystemConfig(tile=TileConfig(**tile_kwargs), **sys_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return config_from_dict(data)


_PHASE_OF_OPCODE = {
    Opcode.ACC_BLK: "reduce_block",
    Opcode.ACC_HOP: "reduce_hop",
    Opcode.READ_OUT: "readout",
    Opcode.SHIFT_OUT: "readout",
}


@dataclass
class LatencyReport:
    """Cycle counts by phase plus derived execution time."""

    cycles: dict
    instructions: dict
    clock_mhz: float
    outputs: list
    trace: list | None = None

    @property
    def total_cycles(self) -> int:
        return self.cycles["total"]

    @property
    def seconds(self) -> float:
        return self.total_cycles / (self.clock_mhz * 1e6)

    def stats_dict(self) -> dict:
        return {
            "cycles": dict(self.cycles),
            "instructions": dict(sorted(self.instructions.items())),
            "clock_mhz": self.clock_mhz,
            "seconds": self.seconds,
        }

    def stats_json(self) -> str:
        return json.dumps(self.stats_dict(), indent=2, sort_keys=True) + "\n"


class GemvEngine:
    """The simulated engine: block grid, controller, output column."""

    def __init__(self, cfg: SystemConfig | None = None):
        self.cfg = cfg or SystemConfig()
        self.grid = BlockGrid(self.cfg.block_rows, self.cfg.block_cols)
        self.params: OpParams | None = None
        self.output_fifo: list[int] = []
        self.outputs: list[int] = []

    # ------------------------------------------------------------------
    # host backdoor: data loading and dumping (no simulated cycles)

    def _check_plan(self, plan):
        if plan.block_rows != self.cfg.block_rows or plan.block_cols != self.cfg.block_cols:
            raise LoadError(
                f"plan targets a {plan.block_rows}x{plan.block_cols} block grid, "
                f"engine has {self.cfg.block_rows}x{self.cfg.block_cols}"
            )

    def load_matrix(self, a, plan):
        """Scatter the matrix into the operand space of the register files.

        Element a[r][c] lands in the block row serving output row r (fold
        r // block_rows), at the PE lane serving column c, in operand slot
        (fold * cols_per_pe + c % cols_per_pe).
        """
        self._check_plan(plan)
        a = np.asarray(a, dtype=np.int64)
        if a.shape != (plan.m, plan.n):
            raise LoadError(f"matrix shape {a.shape} does not match plan {(plan.m, plan.n)}")
        w = plan.w
        lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
        bad = np.argwhere((a < lo) | (a > hi))
        if bad.size:
            r, c = bad[0]
            raise LoadError(f"entry a[{r}][{c}]={a[r, c]} not representable in {w} signed bits")
        br_count, bc_count = plan.block_rows, plan.block_cols
        slots = np.zeros(
            (plan.rows_per_pe, br_count, bc_count, PE_COUNT, plan.cols_per_pe), dtype=np.int64
        )
        r = np.arange(plan.m)
        c = np.arange(plan.n)
        fold = (r // br_count)[:, None]
        brow = (r % br_count)[:, None]
        lane = c // plan.cols_per_pe
        bcol = (lane // PE_COUNT)[None, :]
        pe = (lane % PE_COUNT)[None, :]
        slot = (c % plan.cols_per_pe)[None, :]
        slots[fold, brow, bcol, pe, slot] = a
        mask = (1 << w) - 1
        bits = slots & mask
        for j in range(plan.rows_per_pe):
            for k in range(plan.cols_per_pe):
                base = plan.matrix_row(j, k)
                for i in range(w):
                    lanes = (bits[j, :, :, :, k] >> i) & 1
                    packed = (lanes << np.arange(PE_COUNT, dtype=np.int64)).sum(axis=2)
                    self.grid.rf[:, :, base + i] = packed.astype(np.uint16)

    def load_vector(self, x, plan):
        """Broadcast the vector slices: each PE lane holds its cols_per_pe
        elements, replicated across all block rows."""
        self._check_plan(plan)
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (plan.n,):
            raise LoadError(f"vector shape {x.shape} does not match plan n={plan.n}")
        w = plan.w
        lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
        bad = np.argwhere((x < lo) | (x > hi))
        if bad.size:
            i = int(bad[0][0])
            raise LoadError(f"entry x[{i}]={x[i]} not representable in {w} signed bits")
        slots = np.zeros((plan.block_cols, PE_COUNT, plan.cols_per_pe), dtype=np.int64)
        c = np.arange(plan.n)
        lane = c // plan.cols_per_pe
        slots[lane // PE_COUNT, lane % PE_COUNT, c % plan.cols_per_pe] = x
        bits = slots & ((1 << w) - 1)
        for k in range(plan.cols_per_pe):
            base = plan.vector_row(k)
            for i in range(w):
                lanes = (bits[:, :, k] >> i) & 1
                packed = (lanes << np.arange(PE_COUNT, dtype=np.int64)).sum(axis=1)
                self.grid.rf[:, :, base + i] = packed.astype(np.uint16)

    def dump_matrix(self, plan):
        """Read the operand space back (inverse of load_matrix)."""
        out = np.zeros((plan.m, plan.n), dtype=np.int64)
        for j in range(plan.rows_per_pe):
            for k in range(plan.cols_per_pe):
                values = self.grid.read_rows_signed(plan.matrix_row(j, k), plan.w)
                for r in range(j * plan.block_rows, min((j + 1) * plan.block_rows, plan.m)):
                    br = r % plan.block_rows
                    for c in range(k, plan.n, plan.cols_per_pe):
                        lane = c // plan.cols_per_pe
                        out[r, c] = values[br, lane // PE_COUNT, lane % PE_COUNT]
        return out

    # ------------------------------------------------------------------
    # instruction execution

    def run(self, program: Program, trace: bool = False) -> LatencyReport:
        """Execute the program to HALT; deterministic.

        The output column and collected outputs restart with the program;
        register-file contents are whatever previous loads/runs left there.
        """
        program.validate()
        self.output_fifo = []
        self.outputs = []
        cycles = {
            "fanout": self.cfg.issue_fill,
            "compute": 0,
            "reduce_block": 0,
            "reduce_hop": 0,
            "readout": 0,
        }
        histogram: Counter = Counter()
        trace_lines: list[str] | None = [] if trace else None
        total = self.cfg.issue_fill
        if trace:
            for i in range(self.cfg.issue_fill):
                trace_lines.append(f"cycle={i} state=fill instr=-")
        for instr in program:
            histogram[instr.opcode.name] += 1
            if instr.opcode is Opcode.HALT:
                break
            cost = instruction_cost(instr, self.params, self.cfg.tile.alu_drain)
            if trace:
                for i in range(cost):
                    trace_lines.append(
                        f"cycle={total + i} state=busy[{i + 1}/{cost}] instr={instr}"
                    )
            total += cost
            if total > self.cfg.max_cycles:
                raise SimTimeout(f"exceeded max_cycles={self.cfg.max_cycles}")
            cycles[_PHASE_OF_OPCODE.get(instr.opcode, "compute")] += cost
            self._retire(instr)
        cycles["total"] = total
        return LatencyReport(
            cycles=cycles,
            instructions=dict(histogram),
            clock_mhz=self.cfg.clock_mhz,
            outputs=list(self.outputs),
            trace=trace_lines,
        )

    def _retire(self, instr):
        op = instr.opcode
        if op is Opcode.SET_PARAMS:
            self.params = OpParams.from_instruction(instr)
        elif op is Opcode.READ_OUT:
            self._capture_output(instr.addr1, self.params.wacc)
        elif op is Opcode.SHIFT_OUT:
            if not self.output_fifo:
                raise SimTimeout("SHIFT_OUT with an empty output column")
            self.outputs.append(self.output_fifo.pop(0))
        else:
            apply_instruction(self.grid, instr, self.params, self.cfg.tile.alu_drain)

    def _capture_output(self, row, wacc):
        """Parallel-load the output column from PE 0 of the westmost block
        column, top block row first; any unshifted leftovers are dropped."""
        values = self.grid.read_rows_signed(row, wacc)
        self.output_fifo = [int(v) for v in values[:, 0, 0]]

    # ------------------------------------------------------------------
    # standalone phase drivers (the GEMV program path uses instructions;
    # these expose the same machinery for direct host use and tests)

    def accumulate_hops(self, wacc, row=ACC_BASE, slice_=None) -> int:
        """Run all ceil(log2(block_cols)) hop levels; returns cycles."""
        slice_ = self.cfg.slice if slice_ is None else slice_
        levels = pimcore.hop_levels(self.cfg.block_cols)
        total = 0
        for level in range(levels):
            total += pimcore.hop_accumulate_level(
                self.grid, level, row, row, wacc, slice_, self.cfg.tile.alu_drain
            )
        return total

    def read_output(self, count: int) -> tuple[list[int], int]:
        """Shift out `count` elements (one per cycle) from the output column.

        Returns (values, cycles).  The column must already hold enough
        captured elements.
        """
        if count < 0 or count > len(self.output_fifo):
            raise ValueError(
                f"cannot shift {count} elements; output column holds {len(self.output_fifo)}"
            )
        values = self.output_fifo[:count]
        self.output_fifo = self.output_fifo[count:]
        self.outputs.extend(values)
        return values, count

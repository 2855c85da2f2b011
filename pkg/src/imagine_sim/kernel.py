"""GEMV planner, code generator, and closed-form cycle model.

Mapping of y = A*x onto the engine: each block row serves one output row
per fold (fold j owns output rows j*block_rows .. j*block_rows+block_rows-1),
and the N dimension is spread over the 16 PEs of each block times the block
columns, cols_per_pe elements per PE lane.  The generated program runs, per
fold, a multiply-accumulate loop over the operand slots, the four in-block
reduction stages, the east-west hop levels, and an output-column capture;
the shifted-out elements then appear in row order.

The closed-form latency below and the simulator share one cost table, and
they must agree cycle-for-cycle; the model is validated against the
simulator, never the other way around.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .isa import Instruction, Opcode, Program, make_set_params
from .pimcore import (
    ACC_BASE,
    ACC_SPACE,
    MATRIX_BASE,
    MATRIX_SPACE,
    PE_COUNT,
    SCRATCH_BASE,
    SCRATCH_SPACE,
    VECTOR_BASE,
    VECTOR_SPACE,
    cost_hop,
    cost_mult,
    cost_stream,
    hop_levels,
)


class CapacityError(ValueError):
    """The problem does not fit the device; names the limiting resource."""


@dataclass(frozen=True)
class GemvProblem:
    m: int
    n: int
    w: int
    signed: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"matrix dimensions must be >= 1, got {self.m}x{self.n}")
        if self.w not in (2, 4, 8, 16):
            raise ValueError(f"W={self.w} not in {{2,4,8,16}}")


@dataclass
class GemvPlan:
    """Data layout, instruction schedule shape, and predicted cycle count."""

    m: int
    n: int
    w: int
    signed: bool
    block_rows: int
    block_cols: int
    cols_per_pe: int
    rows_per_pe: int  # output-row folds per block row
    wacc: int
    radix: int
    slice: int
    schedule: list = field(default_factory=list)
    predicted_cycles: int = 0

    def matrix_row(self, fold: int, slot: int) -> int:
        return MATRIX_BASE + (fold * self.cols_per_pe + slot) * self.w

    def vector_row(self, slot: int) -> int:
        return VECTOR_BASE + slot * self.w

    @property
    def acc_row(self) -> int:
        return ACC_BASE

    @property
    def product_row(self) -> int:
        return SCRATCH_BASE

    @property
    def hop_level_count(self) -> int:
        return hop_levels(self.block_cols)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "w": self.w,
            "signed": self.signed,
            "block_rows": self.block_rows,
            "block_cols": self.block_cols,
            "cols_per_pe": self.cols_per_pe,
            "rows_per_pe": self.rows_per_pe,
            "wacc": self.wacc,
            "radix": self.radix,
            "slice": self.slice,
            "schedule": list(self.schedule),
            "predicted_cycles": self.predicted_cycles,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def plan(problem: GemvProblem, cfg) -> GemvPlan:
    """Map a GEMV problem onto the configured grid.

    cols_per_pe and rows_per_pe are both forced minimal by the geometry;
    Wacc = 2W + ceil(log2 N) guarantees the modular accumulator never wraps.
    """
    br, bc = cfg.block_rows, cfg.block_cols
    lanes = PE_COUNT * bc
    cols_per_pe = math.ceil(problem.n / lanes)
    rows_per_pe = math.ceil(problem.m / br)
    wacc = 2 * problem.w + (math.ceil(math.log2(problem.n)) if problem.n > 1 else 0)

    matrix_rows = rows_per_pe * cols_per_pe * problem.w
    if matrix_rows > MATRIX_SPACE:
        raise CapacityError(
            f"matrix operand space: need {matrix_rows} rows per PE, have {MATRIX_SPACE}"
        )
    vector_rows = cols_per_pe * problem.w
    if vector_rows > VECTOR_SPACE:
        raise CapacityError(
            f"vector operand space: need {vector_rows} rows per PE, have {VECTOR_SPACE}"
        )
    if wacc > ACC_SPACE:
        raise CapacityError(f"accumulator width: need {wacc} rows, have {ACC_SPACE}")
    if 2 * problem.w > SCRATCH_SPACE:
        raise CapacityError(
            f"product scratch: need {2 * problem.w} rows, have {SCRATCH_SPACE}"
        )

    result = GemvPlan(
        m=problem.m,
        n=problem.n,
        w=problem.w,
        signed=problem.signed,
        block_rows=br,
        block_cols=bc,
        cols_per_pe=cols_per_pe,
        rows_per_pe=rows_per_pe,
        wacc=wacc,
        radix=cfg.radix,
        slice=cfg.slice,
    )
    levels = result.hop_level_count
    result.schedule = [
        ("mac", rows_per_pe * cols_per_pe),
        ("reduce_block", rows_per_pe * 4),
        ("reduce_hop", rows_per_pe * levels),
        ("readout", rows_per_pe + problem.m),
    ]
    result.predicted_cycles = latency(result, cfg)
    return result


def codegen(gemv_plan: GemvPlan) -> Program:
    """Emit the instruction program for a plan.

    Per fold: MULT into the product window, then a widening COPY (first
    slot) or accumulate-ADD through the pointer; four in-block stages; the
    hop levels; one output capture.  The first combine is a copy so each
    fold starts from a clean accumulator without a separate clear pass.
    """
    p = gemv_plan
    prog = Program()
    emit = prog.instructions.append
    emit(make_set_params(p.w, p.wacc, p.signed, p.radix, p.slice))
    emit(Instruction(Opcode.SET_PTR, addr1=p.acc_row))
    for fold in range(p.rows_per_pe):
        for slot in range(p.cols_per_pe):
            emit(
                Instruction(
                    Opcode.MULT,
                    addr1=p.matrix_row(fold, slot),
                    addr2=p.vector_row(slot),
                )
            )
            combine = Opcode.COPY if slot == 0 else Opcode.ADD
            emit(Instruction(combine, fn=1, addr1=p.product_row, addr2=p.acc_row))
        for stage in range(4):
            emit(Instruction(Opcode.ACC_BLK, fn=stage, addr1=p.acc_row))
        for level in range(p.hop_level_count):
            emit(Instruction(Opcode.ACC_HOP, fn=level, addr1=p.acc_row))
        emit(Instruction(Opcode.READ_OUT, addr1=p.acc_row))
        for _ in range(min(p.block_rows, p.m - fold * p.block_rows)):
            emit(Instruction(Opcode.SHIFT_OUT))
    emit(Instruction(Opcode.HALT))
    return prog


def latency(gemv_plan: GemvPlan, cfg) -> int:
    """Closed-form cycle count; must equal the simulator exactly."""
    p = gemv_plan
    d = cfg.tile.alu_drain
    c_mult = cost_mult(p.w, p.radix, d)
    c_combine = cost_stream(p.wacc, d)
    c_stage = cost_stream(p.wacc, d)
    c_hop = cost_hop(p.wacc, p.slice, d)
    c_capture = cost_hop(p.wacc, p.slice, d)
    per_fold = (
        p.cols_per_pe * (c_mult + c_combine)
        + 4 * c_stage
        + p.hop_level_count * c_hop
        + c_capture
    )
    return cfg.issue_fill + 2 + p.rows_per_pe * per_fold + p.m


def instruction_count(gemv_plan: GemvPlan) -> int:
    """Number of instructions codegen emits (counted, not measured)."""
    p = gemv_plan
    per_fold = 2 * p.cols_per_pe + 4 + p.hop_level_count + 1
    return 2 + p.rows_per_pe * per_fold + p.m + 1


def reference_gemv(a, x):
    """Exact integer y = A*x, the verification oracle for the simulator."""
    a = np.asarray(a, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    return a @ x

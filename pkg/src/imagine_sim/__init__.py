"""Bit-serial PIM-array GEMV engine: simulator, assembler, performance model.

The package splits along the machine's own seams:

    isa        30-bit instruction set, text assembler, binary container
    pimcore    bit-accurate PIM block grid (PEs, register file, reductions)
    tile       controller FSM, Op-Params, single-tile emulation
    system     full engine, master cycle loop, loaders, stats
    kernel     GEMV planner, code generator, closed-form cycle model
    perfmodel  device scaling and published-clock comparisons
    cli        command-line front end (asm/sim/gemv/sweep/devices/compare)
"""

from .isa import Instruction, Opcode, Program, assemble, decode, encode
from .kernel import GemvPlan, GemvProblem, codegen, latency, plan, reference_gemv
from .pimcore import BlockGrid, PimBlock
from .system import GemvEngine, LatencyReport, SystemConfig, load_config
from .tile import OpParams, Tile, TileConfig

__version__ = "0.1.0"

__all__ = [
    "BlockGrid",
    "GemvEngine",
    "GemvPlan",
    "GemvProblem",
    "Instruction",
    "LatencyReport",
    "Opcode",
    "OpParams",
    "PimBlock",
    "Program",
    "SystemConfig",
    "Tile",
    "TileConfig",
    "assemble",
    "codegen",
    "decode",
    "encode",
    "latency",
    "load_config",
    "plan",
    "reference_gemv",
    "__version__",
]

import numpy as np
import pytest

from imagine_sim.isa import Instruction, Opcode, make_set_params
from imagine_sim.tile import (
    ConfigurationError,
    OpParams,
    Tile,
    TileConfig,
    TrapError,
    east_west_exchange,
    instruction_cost,
)
from imagine_sim.pimcore import stream_west

D = 2

SETP_W8 = make_set_params(8, 16)
SETP_W4 = make_set_params(4, 8)


def fresh_tile(**cfg_kwargs):
    tile = Tile(TileConfig(**cfg_kwargs))
    tile.fill_remaining = 0  # controller already warm for unit tests
    return tile


def test_issue_nop_busy_one_cycle():
    tile = fresh_tile()
    assert tile.issue(Instruction(Opcode.NOP))
    assert tile.busy == 1
    tile.tile_cycle()
    assert tile.idle


def test_issue_add_w8_busy_eleven_cycles():
    tile = fresh_tile()
    tile.params = OpParams(w=8, wacc=16)
    assert tile.issue(Instruction(Opcode.ADD, addr1=0, addr2=8))
    assert tile.busy == 1 + 8 + D == 11


def test_issue_during_busy_is_refused():
    tile = fresh_tile()
    tile.params = OpParams(w=8, wacc=16)
    tile.issue(Instruction(Opcode.ADD, addr1=0, addr2=8))
    snapshot = tile.grid.rf.copy()
    assert not tile.issue(Instruction(Opcode.NOP))
    assert tile.busy == 11
    assert np.array_equal(tile.grid.rf, snapshot)


def test_multicycle_without_params_traps():
    tile = fresh_tile()
    with pytest.raises(TrapError):
        tile.issue(Instruction(Opcode.ADD))


def test_add_completes_and_controller_goes_idle():
    tile = fresh_tile()
    for pe in range(16):
        tile.grid.write_bits(0, 0, pe, 0, 4, pe)
        tile.grid.write_bits(0, 0, pe, 4, 4, 1)
    cycles = tile.run(
        [
            SETP_W4,
            Instruction(Opcode.SET_PTR, addr1=8),
            Instruction(Opcode.ADD, addr1=0, addr2=4),
            Instruction(Opcode.HALT),
        ]
    )
    assert cycles == 1 + 1 + (1 + 4 + D)
    assert tile.idle
    for pe in range(16):
        assert tile.grid.read_bits(0, 0, pe, 8, 4, signed=False) == (pe + 1) % 16


def test_cycling_idle_tile_changes_only_the_counter():
    tile = fresh_tile()
    rf = tile.grid.rf.copy()
    for _ in range(5):
        tile.tile_cycle()
    assert tile.cycle == 5
    assert np.array_equal(tile.grid.rf, rf)


def test_pipeline_stage_adds_one_fill_cycle_and_nothing_else():
    program = [
        SETP_W4,
        Instruction(Opcode.SET_PTR, addr1=8),
        Instruction(Opcode.ADD, addr1=0, addr2=4),
        Instruction(Opcode.HALT),
    ]

    def run(stage_a):
        tile = Tile(TileConfig(pipeline_a=stage_a))
        tile.grid.write_bits(0, 0, 0, 0, 4, 3)
        tile.grid.write_bits(0, 0, 0, 4, 4, 2)
        cycles = tile.run(program)
        return cycles, tile.grid.rf.copy()

    base_cycles, base_rf = run(False)
    a_cycles, a_rf = run(True)
    assert a_cycles == base_cycles + 1
    assert np.array_equal(base_rf, a_rf)


def test_back_pressure_preserves_order():
    program = [
        SETP_W4,
        Instruction(Opcode.SET_PTR, addr1=8),
        Instruction(Opcode.ADD, addr1=0, addr2=4),
        Instruction(Opcode.MULT, addr1=0, addr2=4),
        Instruction(Opcode.NOP),
        Instruction(Opcode.HALT),
    ]
    tile = fresh_tile()
    tile.run(program)
    assert tile.issued == program  # nothing dropped or reordered


def test_blocks_differing_only_in_position_agree():
    tile = fresh_tile()
    for r in range(tile.cfg.block_rows):
        for c in range(tile.cfg.block_cols):
            for pe in range(16):
                tile.grid.write_bits(r, c, pe, 0, 4, (pe * 3 + 1) & 0xF)
                tile.grid.write_bits(r, c, pe, 4, 4, (pe + 5) & 0xF)
    tile.run(
        [
            SETP_W4,
            Instruction(Opcode.SET_PTR, addr1=16),
            Instruction(Opcode.MULT, addr1=0, addr2=4),
            Instruction(Opcode.COPY, fn=1, addr1=896),
            Instruction(Opcode.HALT),
        ]
    )
    reference = tile.grid.rf[0, 0].copy()
    for r in range(tile.cfg.block_rows):
        for c in range(tile.cfg.block_cols):
            assert np.array_equal(tile.grid.rf[r, c], reference)


def test_halt_is_free_and_final():
    tile = fresh_tile()
    cycles = tile.run([Instruction(Opcode.NOP), Instruction(Opcode.HALT)])
    assert cycles == 1
    assert tile.halted
    assert not tile.issue(Instruction(Opcode.NOP))


def test_instruction_cost_table():
    params = OpParams(w=8, wacc=20, radix=4, slice=4)
    cost = lambda op, **kw: instruction_cost(Instruction(op, **kw), params, D)
    assert cost(Opcode.NOP) == 1
    assert cost(Opcode.SET_PARAMS) == 1
    assert cost(Opcode.SET_PTR) == 1
    assert cost(Opcode.SEL_BLOCK) == 1
    assert cost(Opcode.SHIFT_OUT) == 1
    assert cost(Opcode.HALT) == 0
    assert cost(Opcode.ADD) == 1 + 8 + D
    assert cost(Opcode.ADD, fn=1) == 1 + 20 + D
    assert cost(Opcode.MULT) == 1 + 4 * 10 + D  # radix-4: ceil(8/2) passes
    assert cost(Opcode.ACC_BLK) == 1 + 20 + D
    assert cost(Opcode.ACC_HOP) == 1 + 5 + D  # ceil(20/4) beats
    assert cost(Opcode.READ_OUT) == 1 + 5 + D


def test_east_west_exchange_copies_latches():
    west = Tile(TileConfig(block_rows=3, block_cols=1))
    east = Tile(TileConfig(block_rows=3, block_cols=1))
    for r in range(3):
        east.grid.write_bits(r, 0, 0, 0, 8, 0x21 + r)
    stream_west(east.grid, 0, 8, slice_=4)
    assert np.array_equal(west.grid.east_in, np.zeros((3, 1)))  # idle latches stay zero
    east_west_exchange(west, east)
    assert np.array_equal(west.grid.east_in[:, -1], east.grid.west_out[:, 0])
    # bit-exact first beat: low 4 bits of each accumulator
    assert [int(v) for v in west.grid.east_in[:, -1]] == [0x1, 0x2, 0x3]


def test_east_west_exchange_requires_matching_rows():
    with pytest.raises(ConfigurationError):
        east_west_exchange(
            Tile(TileConfig(block_rows=2, block_cols=1)),
            Tile(TileConfig(block_rows=3, block_cols=1)),
        )

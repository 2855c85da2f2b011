# Inside one PIM block: bit-serial arithmetic, Booth passes, and the
# zero-copy in-block reduction, checked against plain integer math.

import numpy as np

from imagine_sim.pimcore import (
    PimBlock,
    acc_block_stage,
    cost_mult,
    exec_add,
    exec_mult_booth,
)

block = PimBlock()

# every PE gets its own operand pair, packed one bit column per PE
rng = np.random.default_rng(0)
pairs = [(int(a), int(b)) for a, b in zip(rng.integers(-128, 128, 16), rng.integers(-128, 128, 16))]
for pe, (a, b) in enumerate(pairs):
    block.write_pe(pe, 0, 8, a & 0xFF)
    block.write_pe(pe, 8, 8, b & 0xFF)

cycles = exec_add(block, 0, 8, 16, 8)
print(f"8-bit add across 16 PEs: {cycles} cycles (1 fetch + 8 bits + 2 drain)")
for pe, (a, b) in enumerate(pairs[:4]):
    print(f"  PE{pe}: {a} + {b} -> {block.read_pe(pe, 16, 8)} (mod 256, signed)")

# Booth multiply: radix-4 halves the number of recode passes
for radix in (2, 4):
    blk = PimBlock()
    blk.write_pe(0, 0, 8, 7)
    blk.write_pe(0, 8, 8, (-3) & 0xFF)
    cycles = exec_mult_booth(blk, 0, 8, 32, 8, radix=radix)
    print(f"7 * -3 at radix {radix}: product {blk.read_pe(0, 32, 16)}, "
          f"{cycles} cycles (model {cost_mult(8, radix, 2)})")

# reduction: PEs hold 0..15, four stages leave the sum in PE 0
blk = PimBlock()
for pe in range(16):
    blk.write_pe(pe, 0, 8, pe)
total_cycles = sum(acc_block_stage(blk, stage, 0, 0, 8) for stage in range(4))
print(f"in-block reduction of 0..15: PE0 holds {blk.read_pe(0, 0, 8)} "
      f"after 4 stages, {total_cycles} cycles")
assert blk.read_pe(0, 0, 8) == sum(range(16))

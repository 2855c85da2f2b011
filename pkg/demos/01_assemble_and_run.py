# Assemble a small program by hand and run it on the simulated engine.
#
# The program multiplies two preloaded 8-bit values in every PE, widens the
# product into the accumulator, and halts.  Data is loaded through the host
# backdoor; instructions only compute.

from imagine_sim import GemvEngine, SystemConfig, assemble
from imagine_sim.pimcore import ACC_BASE, SCRATCH_BASE

source = f"""
# multiply r[0..8) by r[512..520), accumulate into the accumulator region
setp w=8, acc=20
setptr {ACC_BASE}
mult 0, 512          # product -> scratch window
copy {SCRATCH_BASE}, 1       # widening copy into the accumulator
halt
"""

program = assemble(source)
print(f"assembled {len(program)} instructions")

engine = GemvEngine(SystemConfig())
# put a few operand pairs into block (0,0)
for pe, (a, b) in enumerate([(3, 5), (-7, 9), (127, -128), (-1, -1)]):
    engine.grid.write_bits(0, 0, pe, 0, 8, a & 0xFF)
    engine.grid.write_bits(0, 0, pe, 512, 8, b & 0xFF)

report = engine.run(program)
print(f"total cycles: {report.total_cycles}")
print(f"per phase:    {report.cycles}")

for pe, (a, b) in enumerate([(3, 5), (-7, 9), (127, -128), (-1, -1)]):
    got = engine.grid.read_bits(0, 0, pe, ACC_BASE, 20)
    print(f"PE{pe}: {a} * {b} = {got}  (exact: {a * b})")
    assert got == a * b

# A full y = A*x run: plan the layout, generate the program, simulate,
# and verify against exact integer math.

import numpy as np

from imagine_sim import GemvEngine, GemvProblem, SystemConfig, codegen, plan, reference_gemv
from imagine_sim.cli import random_gemv

m, n, w = 40, 48, 8
cfg = SystemConfig()  # one 12x2-block tile, 384 PEs, 737 MHz

problem = GemvProblem(m, n, w)
gemv_plan = plan(problem, cfg)
print("plan:")
print(f"  operand slots per PE lane: {gemv_plan.cols_per_pe}")
print(f"  output-row folds:          {gemv_plan.rows_per_pe}")
print(f"  accumulator width:         {gemv_plan.wacc} bits")
print(f"  hop levels:                {gemv_plan.hop_level_count}")
print(f"  predicted cycles:          {gemv_plan.predicted_cycles}")

program = codegen(gemv_plan)
print(f"program: {len(program)} instructions")

a, x = random_gemv(m, n, w, seed=42)
engine = GemvEngine(cfg)
engine.load_matrix(a, gemv_plan)
engine.load_vector(x, gemv_plan)
report = engine.run(program)

y = np.array(report.outputs)
y_ref = reference_gemv(a, x)
print(f"simulated == exact integer product: {np.array_equal(y, y_ref)}")
print(f"measured cycles: {report.total_cycles} (predicted {gemv_plan.predicted_cycles})")
print(f"cycle breakdown: {report.cycles}")
print(f"wall-clock at {cfg.clock_mhz:g} MHz: {report.seconds * 1e6:.2f} us")
assert np.array_equal(y, y_ref)
assert report.total_cycles == gemv_plan.predicted_cycles

# The closed-form cycle model against the simulator, across problem sizes
# and the radix-4 / slice-4 variants.  The two must agree exactly.

from imagine_sim import GemvEngine, GemvProblem, codegen, plan
from imagine_sim.cli import random_gemv
from imagine_sim.perfmodel import exec_time
from imagine_sim.system import load_config

VARIANTS = [("baseline", 2, 1), ("radix4", 4, 1), ("slice4", 2, 4), ("radix4+slice4", 4, 4)]

print(f"{'dim':>4} {'W':>3} {'variant':<14} {'predicted':>9} {'simulated':>9} {'us @737MHz':>11}")
for w in (8, 16):
    for dim in (16, 64, 256):
        for name, radix, slice_ in VARIANTS:
            cfg = load_config("configs/grid4x4.json")
            cfg.radix, cfg.slice = radix, slice_
            gemv_plan = plan(GemvProblem(dim, dim, w), cfg)
            a, x = random_gemv(dim, dim, w, seed=dim)
            engine = GemvEngine(cfg)
            engine.load_matrix(a, gemv_plan)
            engine.load_vector(x, gemv_plan)
            report = engine.run(codegen(gemv_plan))
            assert report.total_cycles == gemv_plan.predicted_cycles
            micros = exec_time(report.total_cycles, cfg.clock_mhz) * 1e6
            print(f"{dim:>4} {w:>3} {name:<14} {gemv_plan.predicted_cycles:>9} "
                  f"{report.total_cycles:>9} {micros:>11.2f}")

"""Command-line front end.

Subcommands: asm, sim, gemv, sweep, devices, compare.  Exit status contract:
0 success, 1 verification/input failure, 2 usage or configuration error.
Every command is deterministic for a given --seed (default 1); the
IMAGINE_DB environment variable overrides the device database path.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import isa, perfmodel
from .kernel import CapacityError, GemvProblem, codegen, plan, reference_gemv
from .perfmodel import DatabaseError, load_database
from .system import ConfigError, GemvEngine, SystemConfig, load_config

DEFAULT_SEED = 1

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2


def random_gemv(m: int, n: int, w: int, seed: int):
    """Seeded test problem: entries uniform over the full signed W-bit
    range, with both boundary values planted in matrix row 0 and x[0] so
    sign handling is always exercised."""
    rng = np.random.default_rng(seed)
    lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
    a = rng.integers(lo, hi + 1, size=(m, n), dtype=np.int64)
    x = rng.integers(lo, hi + 1, size=n, dtype=np.int64)
    a[0, 0] = lo
    a[0, n - 1] = hi
    x[0] = lo
    return a, x


def _read_csv_ints(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([int(v) for v in line.split(",")])
    return np.asarray(rows, dtype=np.int64)


def _write_csv_vector(path, values):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in values:
            fh.write(f"{int(v)}\n")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_system_config(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    if getattr(args, "radix4", False):
        cfg.radix = 4
    if getattr(args, "slice4", False):
        cfg.slice = 4
    return cfg


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_asm(args) -> int:
    try:
        with open(args.source, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        _fail(f"cannot read {args.source}: {exc.strerror}")
        return EXIT_VERIFY
    try:
        program = isa.assemble(text)
        program.validate()
    except (isa.AssemblyError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_VERIFY
    with open(args.output, "wb") as fh:
        fh.write(isa.to_bytes(program))
    print(f"{args.output}: {len(program)} instructions")
    return EXIT_OK


def cmd_sim(args) -> int:
    cfg = _load_system_config(args)
    try:
        with open(args.program, "rb") as fh:
            program = isa.from_bytes(fh.read())
    except OSError as exc:
        _fail(f"cannot read {args.program}: {exc.strerror}")
        return EXIT_VERIFY
    except (ValueError, isa.IllegalInstructionError) as exc:
        _fail(str(exc))
        return EXIT_VERIFY
    engine = GemvEngine(cfg)
    report = engine.run(program, trace=bool(args.trace))
    if args.trace:
        _write_text(args.trace, "\n".join(report.trace) + "\n")
    if args.stats:
        _write_text(args.stats, report.stats_json())
    print(f"cycles={report.total_cycles} seconds={report.seconds:.9e}")
    return EXIT_OK


def _run_gemv_point(cfg, m, n, w, seed, a=None, x=None, trace=False):
    """Plan, generate, run, and verify one GEMV problem.

    Returns (report, plan, a, x, y, ok_output, ok_cycles, first_bad_index).
    """
    problem = GemvProblem(m, n, w)
    gemv_plan = plan(problem, cfg)
    if a is None or x is None:
        a, x = random_gemv(m, n, w, seed)
    engine = GemvEngine(cfg)
    engine.load_matrix(a, gemv_plan)
    engine.load_vector(x, gemv_plan)
    report = engine.run(codegen(gemv_plan), trace=trace)
    y = np.asarray(report.outputs, dtype=np.int64)
    y_ref = reference_gemv(a, x)
    first_bad = -1
    ok_output = y.shape == y_ref.shape and bool(np.array_equal(y, y_ref))
    if not ok_output and y.shape == y_ref.shape:
        first_bad = int(np.nonzero(y != y_ref)[0][0])
    ok_cycles = report.total_cycles == gemv_plan.predicted_cycles
    return report, gemv_plan, a, x, y, ok_output, ok_cycles, first_bad


def cmd_gemv(args) -> int:
    if args.m < 1 or args.n < 1:
        _fail(f"matrix dimensions must be >= 1, got {args.m}x{args.n}")
        return EXIT_USAGE
    cfg = _load_system_config(args)
    a = x = None
    if args.matrix:
        a = _read_csv_ints(args.matrix)
    if args.vector:
        x = _read_csv_ints(args.vector).reshape(-1)
    report, gemv_plan, a, x, y, ok_output, ok_cycles, first_bad = _run_gemv_point(
        cfg, args.m, args.n, args.w, args.seed, a, x, trace=bool(args.trace)
    )
    stats = report.stats_dict()
    stats.update(
        {
            "problem": {
                "m": args.m,
                "n": args.n,
                "w": args.w,
                "seed": args.seed,
                "radix": cfg.radix,
                "slice": cfg.slice,
            },
            "plan": gemv_plan.to_dict(),
            "predicted_cycles": gemv_plan.predicted_cycles,
            "measured_cycles": report.total_cycles,
            "prediction_match": ok_cycles,
            "output_match": ok_output,
        }
    )
    if args.stats:
        _write_text(args.stats, json.dumps(stats, indent=2, sort_keys=True) + "\n")
    if args.csv:
        _write_csv_vector(args.csv, y)
    if args.trace:
        _write_text(args.trace, "\n".join(report.trace) + "\n")
    print(
        f"gemv {args.m}x{args.n} W={args.w} radix={cfg.radix} slice={cfg.slice}: "
        f"cycles={report.total_cycles} predicted={gemv_plan.predicted_cycles}"
    )
    if not ok_output:
        _fail(f"output mismatch at index {first_bad}" if first_bad >= 0 else "output length mismatch")
        return EXIT_VERIFY
    if not ok_cycles:
        _fail(
            f"cycle model mismatch: predicted {gemv_plan.predicted_cycles}, "
            f"measured {report.total_cycles}"
        )
        return EXIT_VERIFY
    print("verified: output exact, cycle model exact")
    return EXIT_OK


def _parse_int_list(text: str, what: str):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad {what} list {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty {what} list")
    return values


def cmd_sweep(args) -> int:
    base = load_config(args.config) if args.config else SystemConfig()
    variants = [("baseline", 2, 1)]
    if args.radix4:
        variants.append(("radix4", 4, 1))
    if args.slice4:
        variants.append(("slice4", 2, 4))
    if args.radix4 and args.slice4:
        variants.append(("radix4+slice4", 4, 4))
    lines = ["dim,width,variant,cycles,seconds"]
    for w in sorted(args.widths):
        for dim in sorted(args.dims):
            for name, radix, slice_ in variants:
                cfg = load_config(args.config) if args.config else SystemConfig()
                cfg.radix, cfg.slice = radix, slice_
                try:
                    report, gemv_plan, _, _, _, ok_output, ok_cycles, _ = _run_gemv_point(
                        cfg, dim, dim, w, args.seed
                    )
                except CapacityError as exc:
                    _fail(f"point dim={dim} W={w} variant={name}: {exc}")
                    return EXIT_USAGE
                if not (ok_output and ok_cycles):
                    _fail(f"point dim={dim} W={w} variant={name} failed verification")
                    return EXIT_VERIFY
                seconds = perfmodel.exec_time(report.total_cycles, base.clock_mhz)
                lines.append(f"{dim},{w},{name},{report.total_cycles},{seconds:.9e}")
    csv_text = "\n".join(lines) + "\n"
    if args.csv:
        _write_text(args.csv, csv_text)
    else:
        print(csv_text, end="")
    return EXIT_OK


def _print_table(header, rows):
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    for row in [header] + rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip())


def cmd_devices(args) -> int:
    db = load_database()
    rows = [
        (d.id, d.part, d.bram_count, perfmodel.format_pe_count(perfmodel.max_pe(d.bram_count)))
        for d in db.devices
    ]
    _print_table(("id", "part", "bram", "max_pe"), rows)
    if args.csv:
        lines = ["id,part,bram,max_pe"] + [",".join(str(v) for v in r) for r in rows]
        _write_text(args.csv, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    db = load_database()
    clock = db.engine["clock_mhz"]
    rows = []
    for comp in db.competitors:
        rel = perfmodel.relative_freq(comp.f_sys_mhz, comp.bram_fmax_mhz)
        speedup = round(clock / comp.f_sys_mhz, 2)
        rows.append((comp.name, f"{comp.f_sys_mhz:g} MHz", f"{rel}%", f"{speedup:.2f}x"))
    _print_table(("engine", "f_sys", "rel_freq", "speedup"), rows)
    summary = perfmodel.peak_summary(db)
    print()
    print(
        f"peak at W=8: {summary['microcode_peak_tops']:.2f} TOPS from the "
        f"{summary['microcode_mac_cycles']}-cycle raw MAC microcode; published "
        f"{summary['published_peak_tops']:.2f} TOPS implies "
        f"{summary['implied_mac_cycles']:.1f} cycles/MAC end to end"
    )
    if args.csv:
        lines = ["engine,f_sys_mhz,rel_freq,speedup"] + [
            ",".join(str(v) for v in r) for r in rows
        ]
        _write_text(args.csv, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imagine-sim",
        description="Assembler, cycle-accurate simulator, and performance model "
        "for the bit-serial PIM-array GEMV engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble source text into the binary container")
    p.add_argument("source")
    p.add_argument("output")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("sim", help="run an assembled binary on the engine")
    p.add_argument("program")
    p.add_argument("--config", default=None)
    p.add_argument("--radix4", action="store_true")
    p.add_argument("--slice4", action="store_true")
    p.add_argument("--trace", default=None)
    p.add_argument("--stats", default=None)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("gemv", help="generate, run, and verify one GEMV problem")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.add_argument("w", type=int, choices=(2, 4, 8, 16))
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--radix4", action="store_true")
    p.add_argument("--slice4", action="store_true")
    p.add_argument("--matrix", default=None, help="CSV matrix instead of random data")
    p.add_argument("--vector", default=None, help="CSV vector instead of random data")
    p.add_argument("--csv", default=None, help="write the output vector here")
    p.add_argument("--stats", default=None)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_gemv)

    p = sub.add_parser("sweep", help="latency curve over square problem sizes")
    p.add_argument("--dims", type=lambda t: _parse_int_list(t, "dims"), required=True)
    p.add_argument("--widths", type=lambda t: _parse_int_list(t, "widths"), required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--radix4", action="store_true")
    p.add_argument("--slice4", action="store_true")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("devices", help="device scaling table")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_devices)

    p = sub.add_parser("compare", help="clock comparison against published engines")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, CapacityError, DatabaseError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except (OSError, RuntimeError) as exc:  # I/O trouble, controller traps, timeouts
        _fail(str(exc))
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())

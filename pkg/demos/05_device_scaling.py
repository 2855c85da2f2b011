# Device scaling and clock comparison from the shipped database:
# PE counts at 100% BRAM utilization, relative frequencies, the speedup
# range over published engines, and both peak-throughput views.

from imagine_sim.perfmodel import (
    clock_speedup_range,
    format_pe_count,
    ideal_scaling_curve,
    load_database,
    max_pe,
    microcode_mac_cycles,
    peak_summary,
    relative_freq,
)

db = load_database()

print("device scaling (every BRAM used as a PIM block):")
for dev in db.devices:
    print(f"  {dev.id:<5} {dev.part:<16} {dev.bram_count:>5} BRAM -> "
          f"{format_pe_count(max_pe(dev.bram_count)):>4} PEs")

print("\nclock comparison:")
clock = db.engine["clock_mhz"]
for comp in db.competitors:
    rel = relative_freq(comp.f_sys_mhz, comp.bram_fmax_mhz)
    print(f"  {comp.name:<14} {comp.f_sys_mhz:>6g} MHz  {rel:>5.1f}% of BRAM Fmax  "
          f"{clock / comp.f_sys_mhz:>5.2f}x")

others = [c.f_sys_mhz for c in db.competitors if c.name != "IMAGine"]
low, high = clock_speedup_range(clock, others)
print(f"\nspeedup over the published engines: {low}x .. {high}x")
low, high = clock_speedup_range(clock, [278, 231])
print(f"against the fastest large-scale configurations: {low}x .. {high}x")

print("\nideal scaling at the raw 8-bit MAC cost "
      f"({microcode_mac_cycles(8, 2)} cycles):")
for bram, tops in ideal_scaling_curve(db.devices, clock, microcode_mac_cycles(8, 2)):
    print(f"  {bram:>5} BRAM -> {tops:6.3f} TOPS")

summary = peak_summary(db)
print(f"\npeak throughput views at W=8 on {summary['pe_count']} PEs:")
print(f"  raw microcode MAC ({summary['microcode_mac_cycles']} cycles): "
      f"{summary['microcode_peak_tops']:.2f} TOPS")
print(f"  published figure: {summary['published_peak_tops']:.2f} TOPS "
      f"(implies {summary['implied_mac_cycles']:.0f} cycles/MAC end to end)")

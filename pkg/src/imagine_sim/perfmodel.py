"""Analytical device-scaling and clock-comparison model.

Every number here is either shipped data (published clock frequencies and
BRAM counts of FPGA devices and competing PIM engines, in data/devices.json)
or a pure function of that data.  Competing engines' cycle-latency models
are out of scope on purpose: only their published frequencies are compared.

PES_PER_BRAM is the engine's packing constant: the largest supported device
fits 64512 PEs in 2016 BRAMs, i.e. two 16-PE half-BRAM blocks per BRAM.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources

from .pimcore import DEFAULT_ALU_DRAIN, cost_mult, cost_stream

PES_PER_BRAM = 32  # 64512 / 2016, two 16-PE blocks per BRAM

DB_ENV_VAR = "IMAGINE_DB"


@dataclass(frozen=True)
class DeviceEntry:
    id: str
    part: str
    family: str
    bram_count: int
    lut_to_bram_ratio: int
    bram_fmax_mhz: float

    def __post_init__(self):
        if self.bram_count <= 0 or self.bram_fmax_mhz <= 0:
            raise ValueError(f"device {self.id}: counts and frequencies must be positive")


@dataclass(frozen=True)
class CompetitorEntry:
    name: str
    f_sys_mhz: float
    bram_fmax_mhz: float
    source: str = ""

    def __post_init__(self):
        if self.f_sys_mhz <= 0 or self.bram_fmax_mhz <= 0:
            raise ValueError(f"{self.name}: frequencies must be positive")
        if self.f_sys_mhz > self.bram_fmax_mhz:
            raise ValueError(
                f"{self.name}: f_sys {self.f_sys_mhz} exceeds BRAM Fmax {self.bram_fmax_mhz}"
            )


@dataclass(frozen=True)
class PimDesignEntry:
    """PIM tile/block level data point (frequency of the block itself)."""

    name: str
    type: str
    device: str
    bram_fmax_mhz: float
    f_pim_mhz: float
    f_sys_mhz: float | None = None


@dataclass
class Database:
    engine: dict
    devices: list[DeviceEntry]
    competitors: list[CompetitorEntry]
    pim_designs: list[PimDesignEntry]

    def device(self, id_: str) -> DeviceEntry:
        for entry in self.devices:
            if entry.id == id_:
                return entry
        raise KeyError(f"no device {id_!r} in the database")

    def competitor(self, name: str) -> CompetitorEntry:
        for entry in self.competitors:
            if entry.name == name:
                return entry
        raise KeyError(f"no competitor {name!r} in the database")


class DatabaseError(ValueError):
    """Device/competitor database missing fields or malformed."""


def default_db_path() -> str | None:
    """Path override from the IMAGINE_DB environment variable, if set."""
    return os.environ.get(DB_ENV_VAR) or None


def load_database(path: str | None = None) -> Database:
    if path is None:
        path = default_db_path()
    try:
        if path is None:
            text = resources.files("imagine_sim").joinpath("data/devices.json").read_text()
        else:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        raw = json.loads(text)
        return Database(
            engine=dict(raw["engine"]),
            devices=[DeviceEntry(**e) for e in raw["devices"]],
            competitors=[CompetitorEntry(**e) for e in raw["competitors"]],
            pim_designs=[PimDesignEntry(**e) for e in raw.get("pim_designs", [])],
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DatabaseError(f"cannot load device database ({path or 'built-in'}): {exc}") from None


# ---------------------------------------------------------------------------
# scaling and comparison functions


def max_pe(bram_count: int) -> int:
    """PEs when every BRAM is used as a PIM block: exactly linear."""
    if bram_count < 0:
        raise ValueError("bram_count must be non-negative")
    return PES_PER_BRAM * bram_count


def format_pe_count(pe_count: int) -> str:
    """Display form used in the device table: floor thousands with K."""
    return f"{pe_count // 1000}K"


def relative_freq(f_sys_mhz: float, f_bram_mhz: float) -> float:
    """System clock as a percentage of the BRAM Fmax, one decimal."""
    if f_sys_mhz <= 0 or f_bram_mhz <= 0:
        raise ValueError("frequencies must be positive")
    return round(100.0 * f_sys_mhz / f_bram_mhz, 1)


def clock_speedup_range(f_engine_mhz: float, competitor_freqs) -> tuple[float, float]:
    """(min, max) of f_engine / f_competitor over the given list."""
    freqs = list(competitor_freqs)
    if not freqs:
        raise ValueError("competitor list is empty")
    ratios = [round(f_engine_mhz / f, 2) for f in freqs]
    return min(ratios), max(ratios)


def exec_time(cycles: int, f_mhz: float) -> float:
    """Seconds = cycles * clock period."""
    if f_mhz <= 0:
        raise ValueError("frequency must be positive")
    return cycles / (f_mhz * 1e6)


def peak_tops(pe_count: int, f_mhz: float, mac_cycles: float) -> float:
    """Peak throughput at 2 operations per multiply-accumulate."""
    if pe_count < 0 or f_mhz <= 0 or mac_cycles <= 0:
        raise ValueError("pe_count must be >= 0, f_mhz and mac_cycles positive")
    return 2.0 * pe_count * f_mhz * 1e6 / mac_cycles / 1e12


def implied_mac_cycles(pe_count: int, f_mhz: float, tops: float) -> float:
    """Back-solve the per-MAC cycle count a published TOPS figure implies."""
    if tops <= 0:
        raise ValueError("tops must be positive")
    return 2.0 * pe_count * f_mhz * 1e6 / (tops * 1e12)


def microcode_mac_cycles(w: int = 8, radix: int = 2, d_alu: int = DEFAULT_ALU_DRAIN) -> int:
    """Raw MULT + accumulate-ADD cost of this engine's microcode at width w
    (accumulator at the minimal 2W), excluding reduction and readout."""
    return cost_mult(w, radix, d_alu) + cost_stream(2 * w, d_alu)


def ideal_scaling_curve(devices, f_mhz: float, mac_cycles: float):
    """(bram_count, TOPS) per device, sorted by BRAM count: the straight
    line through the origin that 100% BRAM utilization buys."""
    if not devices:
        raise ValueError("device list is empty")
    points = [
        (d.bram_count, peak_tops(max_pe(d.bram_count), f_mhz, mac_cycles)) for d in devices
    ]
    return sorted(points)


def peak_summary(db: Database, w: int = 8) -> dict:
    """Both throughput views of the engine, side by side.

    The microcode-derived figure counts only the raw MULT+ADD cost; the
    published figure amortizes unspecified overheads (reduction, readout,
    loading), so the implied per-MAC latency is reported rather than forced
    to agree.
    """
    engine = db.engine
    u55 = db.device("U55")
    pe_count = max_pe(u55.bram_count)
    clock = engine["clock_mhz"]
    own_mac = microcode_mac_cycles(w=w)
    published = engine["peak_tops_w8"]
    return {
        "pe_count": pe_count,
        "clock_mhz": clock,
        "microcode_mac_cycles": own_mac,
        "microcode_peak_tops": peak_tops(pe_count, clock, own_mac),
        "published_peak_tops": published,
        "implied_mac_cycles": implied_mac_cycles(pe_count, clock, published),
    }

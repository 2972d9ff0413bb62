"""Cycle-cost accounting for page allocation strategies.

Costs are modeled, not measured: every simulated component charges a
named ledger category when it performs work, and experiments compare
ledger totals instead of wall-clock time.  The per-page fault and map
costs come in two built-in profiles (``windows7_x64``,
``linux_2_6_32``) whose constants are piecewise-constant over four
block-size bands, reproducing the measured shape of kernel fault
handling on those systems: cost per page depends on the size of the
block being faulted, not just the page count.

Charging responsibilities (one owner per event class):

===========  ====================================================
category     charged by
===========  ====================================================
fault        demand-fault baseline, per page at first access
map          user-mode allocator, per mapping unit at alloc/grow
zero         frame provider, per page at delivery (kernel-side,
             overlapped with process execution; excluded from
             process-latency totals)
copy         byte-copy fallbacks, units are bytes
walk         translation-cost probes
upcall       frame provider, fixed cost per request submitted
splice       page-table node moves (whole-node remap)
pte          individual page-table entry writes
touch        benchmark workload, per page written
===========  ====================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

PAGE_SIZE = 4096

#: Upper edge of each cost band, inclusive, in bytes.  Blocks larger
#: than the last edge are charged at the last band's rate.
BAND_EDGES = (16 * 1024, 1024 * 1024, 16 * 1024 * 1024, 512 * 1024 * 1024)

CATEGORIES = (
    "fault",
    "map",
    "zero",
    "copy",
    "walk",
    "upcall",
    "splice",
    "pte",
    "touch",
)

#: Categories that model kernel-side work overlapped with process
#: execution.  ``process_cycles`` excludes them by default.
ASYNC_CATEGORIES = ("zero",)


def band_index(block_size: int) -> int:
    """Map a block size in bytes to its cost band.

    Sizes below one page round up to the first band; sizes above the
    last edge clamp to the last band.
    """
    if block_size < 1:
        raise ValueError(f"block_size must be positive, got {block_size}")
    for i, edge in enumerate(BAND_EDGES):
        if block_size <= edge:
            return i
    return len(BAND_EDGES) - 1


def pages_for(size_bytes: int, page_size: int = PAGE_SIZE) -> int:
    if size_bytes < 1:
        raise ValueError(f"size_bytes must be positive, got {size_bytes}")
    return -(-size_bytes // page_size)


@dataclass(frozen=True)
class CostProfile:
    """Per-operation cycle costs for one simulated system.

    ``paged`` holds demand-fault cost per 4 KiB page for each band;
    ``nonpaged`` holds the cost per page of mapping already-resident
    frames.  The remaining fields are single scalars shared across
    bands.
    """

    name: str
    paged: tuple[float, float, float, float]
    nonpaged: tuple[float, float, float, float]
    zero_cycles_per_page: float = 800.0
    copy_cycles_per_byte: float = 0.25
    touch_cycles_per_page: float = 250.0
    pte_write_cycles: float = 14.0
    node_splice_cycles: float = 40.0
    upcall_fixed_cycles: float = 3000.0
    base_walk_cycles: float = 40.0
    # Extra translation cost when page tables themselves live in
    # pageable memory, as a multiplier on the base walk.
    nested_walk_multiplier: float = 1.4

    def __post_init__(self) -> None:
        if len(self.paged) != len(BAND_EDGES) or len(self.nonpaged) != len(BAND_EDGES):
            raise ValueError("profiles need one paged and one nonpaged cost per band")
        for v in (*self.paged, *self.nonpaged):
            if v <= 0:
                raise ValueError(f"per-page costs must be positive, got {v}")

    def paged_per_page(self, block_size: int) -> float:
        """Demand-fault cycles per page for a block of this size."""
        return self.paged[band_index(block_size)]

    def nonpaged_per_page(self, block_size: int) -> float:
        """Map-resident-frame cycles per page for a block of this size."""
        return self.nonpaged[band_index(block_size)]

    def walk_cycles(self, nested: bool = False) -> float:
        if nested:
            return self.base_walk_cycles * self.nested_walk_multiplier
        return self.base_walk_cycles


def builtin_profiles() -> dict[str, CostProfile]:
    """The two calibrated profiles.

    Band constants are cycles per 4 KiB page at block sizes
    4K-16K, 16K-1M, 1M-16M, and 16M-512M.
    """
    return {
        "windows7_x64": CostProfile(
            name="windows7_x64",
            paged=(2367.0, 2286.0, 2994.0, 2841.0),
            nonpaged=(14.51, 81.37, 216.2, 229.9),
        ),
        "linux_2_6_32": CostProfile(
            name="linux_2_6_32",
            paged=(2847.0, 3275.0, 6353.0, 6597.0),
            nonpaged=(15.83, 14.53, 113.4, 115.9),
        ),
    }


def get_profile(name: str) -> CostProfile:
    profiles = builtin_profiles()
    if name not in profiles:
        known = ", ".join(sorted(profiles))
        raise KeyError(f"unknown profile {name!r} (built in: {known})")
    return profiles[name]


_TUPLE_KEYS = ("paged", "nonpaged")
_SCALAR_KEYS = (
    "zero_cycles_per_page",
    "copy_cycles_per_byte",
    "touch_cycles_per_page",
    "pte_write_cycles",
    "node_splice_cycles",
    "upcall_fixed_cycles",
    "base_walk_cycles",
    "nested_walk_multiplier",
)


def load_profile(path: str | Path) -> CostProfile:
    """Read a profile from a flat ``key = value`` file.

    Unknown keys are rejected rather than ignored so that a typo in a
    profile file cannot silently fall back to a default.  ``paged`` and
    ``nonpaged`` take four comma-separated values; a ``base`` key names
    a built-in profile to start from, otherwise ``windows7_x64``
    defaults apply for any field not given.
    """
    path = Path(path)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in raw:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()

    base_name = raw.pop("base", "windows7_x64")
    profile = get_profile(base_name)
    profile = replace(profile, name=raw.pop("name", path.stem))

    updates: dict[str, object] = {}
    for key, value in raw.items():
        if key in _TUPLE_KEYS:
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != len(BAND_EDGES):
                raise ValueError(
                    f"{path}: {key} needs {len(BAND_EDGES)} comma-separated values"
                )
            updates[key] = tuple(float(p) for p in parts)
        elif key in _SCALAR_KEYS:
            updates[key] = float(value)
        else:
            raise ValueError(f"{path}: unknown profile key {key!r}")
    return replace(profile, **updates)


def resolve_profile(spec: str) -> CostProfile:
    """Accept either a built-in profile name or a path to a profile file."""
    if spec in builtin_profiles():
        return get_profile(spec)
    path = Path(spec)
    if path.exists():
        return load_profile(path)
    raise KeyError(f"{spec!r} is neither a built-in profile nor a readable file")


@dataclass(frozen=True)
class CostEvent:
    category: str
    cycles: float
    units: int


class CostLedger:
    """Append-only record of charged work.

    Keeps both an event log (for replay verification) and running
    per-category totals.  Two totals matter downstream:
    ``process_cycles`` is what a thread would wait on and excludes
    asynchronous kernel work; ``total_cycles`` includes everything.
    """

    def __init__(self) -> None:
        self.events: list[CostEvent] = []
        self._cycles: dict[str, float] = {c: 0.0 for c in CATEGORIES}
        self._units: dict[str, int] = {c: 0 for c in CATEGORIES}

    def charge(self, category: str, cycles: float, units: int = 1) -> None:
        if category not in self._cycles:
            raise KeyError(f"unknown cost category {category!r}")
        if cycles < 0 or units < 0:
            raise ValueError("charges must be non-negative")
        self.events.append(CostEvent(category, cycles, units))
        self._cycles[category] += cycles
        self._units[category] += units

    def cycles(self, category: str) -> float:
        return self._cycles[category]

    def units(self, category: str) -> int:
        return self._units[category]

    @property
    def copy_bytes(self) -> int:
        return self._units["copy"]

    @property
    def upcall_count(self) -> int:
        return self._units["upcall"]

    def process_cycles(self, exclude: tuple[str, ...] = ASYNC_CATEGORIES) -> float:
        return sum(v for k, v in self._cycles.items() if k not in exclude)

    def total_cycles(self) -> float:
        return sum(self._cycles.values())

    def snapshot(self) -> dict[str, tuple[float, int]]:
        return {c: (self._cycles[c], self._units[c]) for c in CATEGORIES}

    def delta_since(self, snap: dict[str, tuple[float, int]]) -> dict[str, tuple[float, int]]:
        return {
            c: (self._cycles[c] - snap[c][0], self._units[c] - snap[c][1])
            for c in CATEGORIES
        }

    def replay_consistent(self) -> bool:
        """True when totals equal the sum of the event log."""
        cyc = {c: 0.0 for c in CATEGORIES}
        uni = {c: 0 for c in CATEGORIES}
        for ev in self.events:
            cyc[ev.category] += ev.cycles
            uni[ev.category] += ev.units
        return all(
            math.isclose(cyc[c], self._cycles[c], rel_tol=0, abs_tol=1e-9)
            and uni[c] == self._units[c]
            for c in CATEGORIES
        )


def charge_fault_run(ledger: CostLedger, profile: CostProfile, block_size: int,
                     pages: int) -> float:
    """Charge demand faults for ``pages`` pages of a block.

    The per-page rate follows the size of the whole block, not the
    number of pages faulted here: faulting one page of an 8 MiB block
    costs the 8 MiB band rate.
    """
    cyc = profile.paged_per_page(block_size) * pages
    ledger.charge("fault", cyc, units=pages)
    return cyc


def charge_map_units(ledger: CostLedger, profile: CostProfile, block_size: int,
                     units: int) -> float:
    """Charge mapping of already-resident frames, per mapping unit.

    A unit is one page-table entry written: a 4 KiB page, or one
    2 MiB leaf when large pages are in use.
    """
    cyc = profile.nonpaged_per_page(block_size) * units
    ledger.charge("map", cyc, units=units)
    return cyc


def overhead_percent(profile: CostProfile, block_size: int) -> float:
    """Demand-fault overhead relative to mapping resident frames.

    100 * (paged - nonpaged) / nonpaged at this block size.
    """
    paged = profile.paged_per_page(block_size)
    nonpaged = profile.nonpaged_per_page(block_size)
    return 100.0 * (paged - nonpaged) / nonpaged

"""Benchmark harness comparing two allocation regimes on the cycle ledger.

Two engines expose the same alloc/free/realloc/touch surface:

``faulted_baseline``
    The conventional regime.  Allocation hands out address space
    lazily; the first access to each page takes a synchronous kernel
    grant and charges fault cycles at the block's size band.  Freed
    frames go straight back to the kernel, so every reuse faults
    again.

``umpa``
    The full user-mode stack.  Mapping cycles are charged up front at
    allocation time, first touch charges nothing but the touch itself,
    and freed frames recycle through the process-local cache.

Experiments run both engines on identical inputs and emit rows of
``experiment,engine,size_bytes,metric,value,unit``.  Every value in
the default CSV is ledger-derived and therefore deterministic for a
given (seed, spec, profile); wall-clock rows exist only behind the
opt-in ``timings`` switch so that default outputs stay byte-identical
across runs.  Comparative metrics that need both engines use the
pseudo-engine name ``both``.
"""

from __future__ import annotations

import csv
import math
import random
import statistics
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable

from .allocator import (
    MAX_CLASS,
    SUBPAGE_THRESHOLD,
    AddressSpaceExhausted,
    Arena,
    BlockHandle,
    BlockKind,
    DoubleFree,
    size_class_for,
)
from .cost_model import (
    ASYNC_CATEGORIES,
    PAGE_SIZE,
    CostLedger,
    CostProfile,
    charge_fault_run,
    pages_for,
)
from .page_cache import FreePageCache
from .provider import FrameProvider, SizeClass
from .vmem import LARGE_PAGE_PAGES, MAX_VPN, PageTable, PhysicalStore


class ConfigError(Exception):
    pass


MAX_SIM_BYTES = 512 * 1024 * 1024
#: Sizes mirroring the calibrated band sample points, 4 KiB to 512 MiB.
DEFAULT_SWEEP = tuple(4096 * 4 ** i for i in range(9)) + (MAX_SIM_BYTES,)
#: The scaling experiment covers 4 KiB through 1 MiB in octaves.
SCALING_SWEEP = tuple(4096 * 2 ** i for i in range(9))

#: Categories attributed to the allocator when comparing engines;
#: workload touch cycles are identical by construction and excluded.
ALLOCATOR_CATEGORIES = ("fault", "map", "upcall", "copy", "pte", "splice")

ENGINE_KINDS = ("faulted_baseline", "umpa")


@dataclass
class ExperimentSpec:
    name: str
    profile: CostProfile
    sizes: tuple[int, ...] | None = None
    iterations: int = 5
    seed: int = 0
    engines: tuple[str, ...] = ENGINE_KINDS
    timings: bool = False
    batch_n: int = 100_000
    workload_ops: int = 2000

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        for kind in self.engines:
            if kind not in ENGINE_KINDS:
                raise ConfigError(f"unknown engine {kind!r}")
        if self.sizes is not None:
            for s in self.sizes:
                if s < 1:
                    raise ConfigError(f"size {s} is not positive")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    engine: str
    size_bytes: int
    metric: str
    value: float
    unit: str


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_csv(rows: Iterable[ResultRow], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["experiment", "engine", "size_bytes", "metric", "value", "unit"])
    for r in rows:
        writer.writerow([r.experiment, r.engine, str(r.size_bytes), r.metric,
                         _fmt(r.value), r.unit])


# ---------------------------------------------------------------------------
# engines

class UmpaEngine:
    kind = "umpa"

    def __init__(self, profile: CostProfile, frame_count: int, *,
                 large_pages: bool = False, warm_pages: int = 0,
                 warm_large: int = 0, low_watermark: int = 16,
                 high_watermark: int = 4096, latency_steps: int = 1,
                 frames_per_step: int = 256, seed: int = 0):
        # warm-up charges go to a scratch ledger; measurements start clean
        scratch = CostLedger()
        self.profile = profile
        self.store = PhysicalStore(frame_count)
        self.pt = PageTable(self.store, profile, scratch)
        self.provider = FrameProvider(self.store, profile, scratch,
                                      latency_steps=latency_steps,
                                      frames_per_step=frames_per_step, seed=seed)
        high = max(high_watermark, warm_pages + warm_large * LARGE_PAGE_PAGES)
        self.cache = FreePageCache(self.provider, self.pt,
                                   low_watermark=low_watermark,
                                   high_watermark=high)
        self.arena = Arena(self.pt, self.cache, self.provider, profile, scratch,
                           large_pages=large_pages)
        if warm_large:
            req = self.provider.request_frames(warm_large, SizeClass.LARGE)
            self.provider.pump_until(req)
            self.cache.put(req.frames, SizeClass.LARGE)
        if warm_pages:
            req = self.provider.request_frames(warm_pages, SizeClass.SMALL)
            self.provider.pump_until(req)
            self.cache.put(req.frames, SizeClass.SMALL)
        self.ledger = CostLedger()
        self._attach(self.ledger)

    def _attach(self, ledger: CostLedger) -> None:
        self.ledger = ledger
        self.pt.ledger = ledger
        self.provider.ledger = ledger
        self.arena.ledger = ledger

    def alloc(self, size: int) -> BlockHandle:
        return self.arena.alloc(size)

    def free(self, handle: BlockHandle) -> None:
        self.arena.free(handle)

    def realloc(self, handle: BlockHandle, new_size: int) -> BlockHandle:
        return self.arena.realloc(handle, new_size)

    def batch_alloc(self, count: int, size: int) -> list[BlockHandle]:
        return self.arena.batch_alloc(count, size)

    def batch_free(self, handles: list[BlockHandle]) -> None:
        self.arena.batch_free(handles)

    def touch(self, handle: BlockHandle) -> None:
        """Write one byte in each page of the block."""
        pages = handle._pages if handle.kind is BlockKind.PAGED else 1
        for i in range(pages):
            self.pt.write_bytes(handle.base_addr + i * PAGE_SIZE, b"\x01")
        self.ledger.charge("touch", self.profile.touch_cycles_per_page * pages,
                           units=pages)

    def conserved(self) -> bool:
        return (self.provider.conservation_holds()
                and self.provider.owned_pages == self.pt.mapped_pages + self.cache.pages)

    def teardown(self) -> None:
        if self.arena.live_blocks:
            raise RuntimeError(f"{self.arena.live_blocks} blocks alive at teardown")
        self.cache.flush()
        if self.provider.free_pages != self.store.frame_count:
            raise RuntimeError("frames not conserved at teardown")


@dataclass(eq=False)
class _BaseBlock:
    base_addr: int
    size_bytes: int
    kind: BlockKind
    pages: int
    cls: int = 0
    slab: "_BaseSlab | None" = None
    slot: int = 0
    live: bool = True


@dataclass
class _BaseSlab:
    vpn: int
    cls: int
    slots: int
    free_slots: list[int]
    used: int = 0


class FaultedBaselineEngine:
    """Fault-on-first-access allocation over the same simulated store.

    Address space is handed out by a bump cursor and never recycled
    (the simulated space is 48-bit; experiments cannot exhaust it).
    Frames are granted synchronously inside the access path and
    returned to the kernel pool on free.
    """

    kind = "faulted_baseline"

    def __init__(self, profile: CostProfile, frame_count: int, seed: int = 0):
        self.profile = profile
        self.ledger = CostLedger()
        self.store = PhysicalStore(frame_count)
        self.pt = PageTable(self.store, profile, self.ledger)
        self.provider = FrameProvider(self.store, profile, self.ledger,
                                      latency_steps=0, seed=seed)
        self._cursor = LARGE_PAGE_PAGES
        self._partial: dict[int, list[_BaseSlab]] = {}
        self.live_blocks = 0

    def _bump(self, pages: int) -> int:
        vpn = self._cursor
        if vpn + pages > MAX_VPN:
            raise AddressSpaceExhausted("bump cursor ran off the address space")
        self._cursor += pages
        return vpn

    def _footprint(self, block: _BaseBlock) -> int:
        return block.pages * PAGE_SIZE

    def _ensure(self, first_vpn: int, n_pages: int, band_bytes: int) -> None:
        missing = [vpn for vpn in range(first_vpn, first_vpn + n_pages)
                   if not self.pt.is_mapped(vpn)]
        if not missing:
            return
        frames = self.provider.fault_grant(len(missing))
        for vpn, f in zip(missing, frames):
            self.pt.map_page(vpn, f)
        charge_fault_run(self.ledger, self.profile, band_bytes, len(missing))

    def _ensure_span(self, block: _BaseBlock, offset: int, length: int) -> None:
        if length <= 0:
            return
        start = block.base_addr + offset
        first = start // PAGE_SIZE
        last = (start + length - 1) // PAGE_SIZE
        self._ensure(first, last - first + 1, self._footprint(block))

    def alloc(self, size: int) -> _BaseBlock:
        if size < 1:
            raise ValueError("size must be positive")
        self.live_blocks += 1
        if size < SUBPAGE_THRESHOLD and size_class_for(size) <= MAX_CLASS:
            cls = size_class_for(size)
            partial = self._partial.get(cls)
            if partial:
                slab = partial[-1]
            else:
                slots = PAGE_SIZE // cls
                slab = _BaseSlab(self._bump(1), cls, slots,
                                 free_slots=list(range(slots - 1, -1, -1)))
                self._partial.setdefault(cls, []).append(slab)
            slot = slab.free_slots.pop()
            slab.used += 1
            if not slab.free_slots:
                self._partial[cls].remove(slab)
            return _BaseBlock(slab.vpn * PAGE_SIZE + slot * cls, size,
                              BlockKind.SUBPAGE, 1, cls, slab, slot)
        pages = pages_for(size)
        return _BaseBlock(self._bump(pages) * PAGE_SIZE, size, BlockKind.PAGED, pages)

    def touch(self, block: _BaseBlock) -> None:
        pages = block.pages if block.kind is BlockKind.PAGED else 1
        vpn = block.base_addr // PAGE_SIZE
        self._ensure(vpn, pages, self._footprint(block))
        for i in range(pages):
            self.pt.write_bytes(block.base_addr + i * PAGE_SIZE
                                if block.kind is BlockKind.PAGED
                                else block.base_addr, b"\x01")
        self.ledger.charge("touch", self.profile.touch_cycles_per_page * pages,
                           units=pages)

    def free(self, block: _BaseBlock) -> None:
        if not block.live:
            raise DoubleFree(f"{block!r} already freed")
        block.live = False
        self.live_blocks -= 1
        if block.kind is BlockKind.SUBPAGE:
            slab = block.slab
            slab.free_slots.append(block.slot)
            was_full = slab.used == slab.slots
            slab.used -= 1
            if was_full:
                self._partial.setdefault(slab.cls, []).append(slab)
            if slab.used == 0:
                self._partial[slab.cls].remove(slab)
                if self.pt.is_mapped(slab.vpn):
                    self.provider.release_frames([self.pt.unmap_page(slab.vpn)])
            return
        vpn = block.base_addr // PAGE_SIZE
        frames = [self.pt.unmap_page(vpn + i) for i in range(block.pages)
                  if self.pt.is_mapped(vpn + i)]
        if frames:
            self.provider.release_frames(frames)

    def realloc(self, block: _BaseBlock, new_size: int) -> _BaseBlock:
        """Resize by allocate-copy-free, the regime's only option."""
        if not block.live:
            raise DoubleFree(f"{block!r} already freed")
        if new_size < 1:
            raise ValueError("size must be positive")
        if (block.kind is BlockKind.SUBPAGE
                and new_size < SUBPAGE_THRESHOLD
                and size_class_for(new_size) == block.cls):
            block.size_bytes = new_size
            return block
        moved = self.alloc(new_size)
        n = min(block.size_bytes, new_size)
        if n:
            self._ensure_span(block, 0, n)
            self._ensure_span(moved, 0, n)
            data = self.pt.read_bytes(block.base_addr, n)
            self.pt.write_bytes(moved.base_addr, data)
            self.ledger.charge("copy", self.profile.copy_cycles_per_byte * n,
                               units=n)
        self.free(block)
        return moved

    def batch_alloc(self, count: int, size: int) -> list[_BaseBlock]:
        return [self.alloc(size) for _ in range(count)]

    def batch_free(self, blocks: list[_BaseBlock]) -> None:
        for b in blocks:
            self.free(b)

    def conserved(self) -> bool:
        return (self.provider.conservation_holds()
                and self.provider.owned_pages == self.pt.mapped_pages)

    def teardown(self) -> None:
        if self.live_blocks:
            raise RuntimeError(f"{self.live_blocks} blocks alive at teardown")
        if self.provider.free_pages != self.store.frame_count:
            raise RuntimeError("frames not conserved at teardown")


def _frame_budget(pages: int) -> int:
    return -(-(pages + 4608) // LARGE_PAGE_PAGES) * LARGE_PAGE_PAGES


def build_engine(kind: str, profile: CostProfile, frame_count: int, *,
                 warm_pages: int = 0, warm_large: int = 0,
                 large_pages: bool = False, seed: int = 0,
                 high_watermark: int = 4096) -> UmpaEngine | FaultedBaselineEngine:
    if kind == "umpa":
        return UmpaEngine(profile, frame_count, large_pages=large_pages,
                          warm_pages=warm_pages, warm_large=warm_large,
                          high_watermark=high_watermark, seed=seed)
    if kind == "faulted_baseline":
        return FaultedBaselineEngine(profile, frame_count, seed=seed)
    raise ConfigError(f"unknown engine {kind!r}")


# ---------------------------------------------------------------------------
# experiments

def _process_delta(delta: dict[str, tuple[float, int]]) -> float:
    return sum(c for cat, (c, _) in delta.items() if cat not in ASYNC_CATEGORIES)


def _alloc_touch_free(engine, size: int) -> dict[str, tuple[float, int]]:
    snap = engine.ledger.snapshot()
    h = engine.alloc(size)
    engine.touch(h)
    engine.free(h)
    return engine.ledger.delta_since(snap)


def _check_sweep_sizes(sizes: Iterable[int]) -> None:
    for size in sizes:
        if not PAGE_SIZE <= size <= MAX_SIM_BYTES:
            raise ConfigError(
                f"size {size} outside the simulated range 4 KiB..512 MiB")


def exp_overhead(spec: ExperimentSpec) -> list[ResultRow]:
    """Alloc, touch one byte per page, free; compare cycle totals.

    The ``overhead_percent`` row reduces to the profile's paged versus
    nonpaged constants: both engines do the same page count, so the
    block-level ratio equals the per-page ratio exactly.
    """
    sizes = spec.sizes or DEFAULT_SWEEP
    _check_sweep_sizes(sizes)
    rows: list[ResultRow] = []
    for size in sizes:
        pages = pages_for(size)
        per_kind: dict[str, dict] = {}
        for kind in spec.engines:
            engine = build_engine(kind, spec.profile, _frame_budget(pages),
                                  warm_pages=pages if kind == "umpa" else 0,
                                  seed=spec.seed)
            delta = _alloc_touch_free(engine, size)
            engine.teardown()
            per_kind[kind] = delta
            rows.append(ResultRow("overhead", kind, size, "cycles_total",
                                  _process_delta(delta), "cycles"))
            rows.append(ResultRow("overhead", kind, size, "fault_cycles",
                                  delta["fault"][0], "cycles"))
            rows.append(ResultRow("overhead", kind, size, "map_cycles",
                                  delta["map"][0], "cycles"))
        if "faulted_baseline" in per_kind and "umpa" in per_kind:
            fault = per_kind["faulted_baseline"]["fault"][0]
            mapped = per_kind["umpa"]["map"][0]
            rows.append(ResultRow("overhead", "both", size, "overhead_percent",
                                  100.0 * (fault - mapped) / mapped, "percent"))
    return rows


def exp_fault_cycles(spec: ExperimentSpec) -> list[ResultRow]:
    """Per-page cost of making a page usable, by block size.

    The baseline series is fault cycles per page; the umpa series is
    map cycles per page, the charge that replaces the fault.
    """
    sizes = spec.sizes or DEFAULT_SWEEP
    _check_sweep_sizes(sizes)
    rows: list[ResultRow] = []
    for size in sizes:
        pages = pages_for(size)
        for kind in spec.engines:
            engine = build_engine(kind, spec.profile, _frame_budget(pages),
                                  warm_pages=pages if kind == "umpa" else 0,
                                  seed=spec.seed)
            delta = _alloc_touch_free(engine, size)
            engine.teardown()
            category = "fault" if kind == "faulted_baseline" else "map"
            rows.append(ResultRow("fault", kind, size, "cycles_per_page",
                                  delta[category][0] / pages, "cycles/page"))
    return rows


def exp_scaling(spec: ExperimentSpec) -> list[ResultRow]:
    """Alloc+touch+free totals over the 4 KiB..1 MiB range of both engines.

    With ``timings`` set, also reports the median wall time of the
    simulated operations across ``iterations`` repeats; these rows are
    excluded by default to keep the CSV deterministic.
    """
    sizes = tuple(sorted(spec.sizes or SCALING_SWEEP))
    _check_sweep_sizes(sizes)
    rows: list[ResultRow] = []
    for size in sizes:
        pages = pages_for(size)
        for kind in spec.engines:
            engine = build_engine(kind, spec.profile, _frame_budget(pages),
                                  warm_pages=pages if kind == "umpa" else 0,
                                  seed=spec.seed)
            walls: list[float] = []
            repeats = spec.iterations if spec.timings else 1
            delta = None
            for i in range(repeats):
                t0 = time.perf_counter()
                d = _alloc_touch_free(engine, size)
                walls.append(time.perf_counter() - t0)
                if i == 0:
                    delta = d
            engine.teardown()
            rows.append(ResultRow("scaling", kind, size, "cycles_total",
                                  _process_delta(delta), "cycles"))
            if spec.timings:
                rows.append(ResultRow("scaling", kind, size, "wall_seconds",
                                      statistics.median(walls), "seconds"))
    return rows


def _bucket(size: int) -> int:
    return 1 << max(4, (size - 1).bit_length())


def _speedup_ops(spec: ExperimentSpec) -> list[tuple]:
    """Pre-generated op stream so both engines replay identical inputs."""
    rng = random.Random(spec.seed)
    max_live = 64 * 1024 * 1024
    lo, hi = 16, 8 * 1024 * 1024
    ops: list[tuple] = []
    live: list[int] = []
    total = 0
    for _ in range(spec.workload_ops):
        if live and rng.random() >= 0.6:
            idx = rng.randrange(len(live))
            total -= live.pop(idx)
            ops.append(("free", idx))
            continue
        size = int(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        size = max(lo, min(hi, size))
        while live and total + size > max_live:
            idx = rng.randrange(len(live))
            total -= live.pop(idx)
            ops.append(("free", idx))
        ops.append(("alloc", size))
        live.append(size)
        total += size
    return ops


def exp_allocator_speedup(spec: ExperimentSpec) -> list[ResultRow]:
    """Mixed-size random workload; speedup per power-of-two size bucket.

    Speedup compares allocator-attributable cycles (faults, maps,
    upcalls, copies, page-table edits) between engines on the same op
    stream.  Touch cycles are identical by construction and excluded.
    """
    ops = _speedup_ops(spec)
    # warm cache covers the workload's peak footprint (64 MiB live cap
    # plus slab pages), so the umpa side runs at steady state with no
    # upcalls and the bucket ratios reduce to the band constants
    warm = 24576
    frame_count = _frame_budget(warm)
    per_engine: dict[str, dict[int, float]] = {}
    counts: dict[int, int] = defaultdict(int)
    for kind in spec.engines:
        engine = build_engine(kind, spec.profile, frame_count,
                              warm_pages=warm if kind == "umpa" else 0,
                              high_watermark=frame_count, seed=spec.seed)
        bucket_cycles: dict[int, float] = defaultdict(float)
        handles: list[tuple] = []
        for op in ops:
            snap = engine.ledger.snapshot()
            if op[0] == "alloc":
                h = engine.alloc(op[1])
                engine.touch(h)
                handles.append((h, op[1]))
                bucket = _bucket(op[1])
            else:
                h, size = handles.pop(op[1])
                engine.free(h)
                bucket = _bucket(size)
            delta = engine.ledger.delta_since(snap)
            bucket_cycles[bucket] += sum(delta[c][0] for c in ALLOCATOR_CATEGORIES)
            if kind == spec.engines[0]:
                counts[bucket] += 1
        for h, _ in handles:
            engine.free(h)
        engine.teardown()
        per_engine[kind] = bucket_cycles

    rows: list[ResultRow] = []
    buckets = sorted(set().union(*(d.keys() for d in per_engine.values())))
    for b in buckets:
        for kind in spec.engines:
            rows.append(ResultRow("speedup", kind, b, "allocator_cycles",
                                  per_engine[kind].get(b, 0.0), "cycles"))
        rows.append(ResultRow("speedup", "both", b, "ops", counts[b], "count"))
        if "faulted_baseline" in per_engine and "umpa" in per_engine:
            base = per_engine["faulted_baseline"].get(b, 0.0)
            ours = per_engine["umpa"].get(b, 0.0)
            if ours > 0:
                rows.append(ResultRow("speedup", "both", b, "speedup",
                                      base / ours, "ratio"))
    return rows


def exp_batch(spec: ExperimentSpec) -> list[ResultRow]:
    """N small allocations: a plain loop versus one batch_alloc call.

    Both arms run the umpa engine from a cold cache.  The loop pays
    one provider request per slab page; the batch pays one request
    total.  End states must be identical down to block addresses.
    """
    n = spec.batch_n
    item = 64
    slab_pages = -(-n // (PAGE_SIZE // size_class_for(item)))
    frame_count = _frame_budget(slab_pages)

    def run(arm: str) -> tuple[dict, list[int], tuple]:
        engine = build_engine("umpa", spec.profile, frame_count, seed=spec.seed)
        if arm == "loop":
            handles = [engine.alloc(item) for _ in range(n)]
        else:
            handles = engine.batch_alloc(n, item)
        state = (engine.arena.committed_pages, engine.arena.live_blocks)
        bases = [h.base_addr for h in handles]
        metrics = {
            "upcalls": engine.ledger.upcall_count,
            "cycles_total": engine.ledger.process_cycles(),
        }
        engine.batch_free(handles)
        engine.teardown()
        return metrics, bases, state

    loop_m, loop_bases, loop_state = run("loop")
    batch_m, batch_bases, batch_state = run("batch")

    rows = [
        ResultRow("batch", "umpa_loop", item, "upcalls", loop_m["upcalls"], "count"),
        ResultRow("batch", "umpa_batch", item, "upcalls", batch_m["upcalls"], "count"),
        ResultRow("batch", "umpa_loop", item, "cycles_total",
                  loop_m["cycles_total"], "cycles"),
        ResultRow("batch", "umpa_batch", item, "cycles_total",
                  batch_m["cycles_total"], "cycles"),
        ResultRow("batch", "both", item, "batch_to_loop_ratio",
                  batch_m["cycles_total"] / loop_m["cycles_total"], "ratio"),
        ResultRow("batch", "both", item, "layout_equivalent",
                  loop_bases == batch_bases and loop_state == batch_state, "bool"),
        ResultRow("batch", "both", item, "count", n, "count"),
    ]
    return rows


def exp_realloc(spec: ExperimentSpec) -> list[ResultRow]:
    """Grow a touched 128 KiB block to 256 KiB under both regimes.

    The baseline can only allocate-copy-free; umpa extends the mapping
    in place (or remaps) and copies nothing.  Also reports the shrink
    leg: 256 KiB back to 128 KiB returns 32 frames to the cache.
    """
    grow_from, grow_to = 128 * 1024, 256 * 1024
    frame_count = _frame_budget(pages_for(grow_from) + pages_for(grow_to))
    rows: list[ResultRow] = []
    cycles: dict[str, float] = {}
    for kind in spec.engines:
        engine = build_engine(kind, spec.profile, frame_count,
                              warm_pages=192 if kind == "umpa" else 0,
                              seed=spec.seed)
        h = engine.alloc(grow_from)
        engine.touch(h)
        snap = engine.ledger.snapshot()
        h = engine.realloc(h, grow_to)
        delta = engine.ledger.delta_since(snap)
        cycles[kind] = _process_delta(delta)
        rows.append(ResultRow("realloc", kind, grow_to, "cycles_total",
                              cycles[kind], "cycles"))
        rows.append(ResultRow("realloc", kind, grow_to, "copy_bytes",
                              delta["copy"][1], "bytes"))
        if kind == "umpa":
            before = engine.cache.pages
            h = engine.realloc(h, grow_from)
            rows.append(ResultRow("realloc", kind, grow_from,
                                  "shrink_pages_to_cache",
                                  engine.cache.pages - before, "pages"))
        engine.free(h)
        engine.teardown()
    if "faulted_baseline" in cycles and "umpa" in cycles:
        rows.append(ResultRow("realloc", "both", grow_to, "speedup",
                              cycles["faulted_baseline"] / cycles["umpa"], "ratio"))
    return rows


EXPERIMENTS = {
    "overhead": exp_overhead,
    "fault": exp_fault_cycles,
    "scaling": exp_scaling,
    "speedup": exp_allocator_speedup,
    "batch": exp_batch,
    "realloc": exp_realloc,
}


def run_experiment(name: str, spec: ExperimentSpec) -> list[ResultRow]:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}")
    return EXPERIMENTS[name](spec)


def run_all(spec: ExperimentSpec) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for name in EXPERIMENTS:
        rows.extend(EXPERIMENTS[name](spec))
    return rows

"""Page-granular allocator built on the user-mode paging stack.

An arena owns a page table, a free page cache, and a connection to the
frame provider.  Address space comes from bump-reserved regions
(512-page aligned, with an unreserved gap between regions so no block
or free extent ever spans two regions).  Free address space within
regions is kept as extents in two parallel sorted lists, one by
address for coalescing and one by (size, address) for first-fit
searches that prefer the smallest adequate extent.

Block layout:

 - sizes below one page go to power-of-two slab classes, 16 B to
   2 KiB, carved from dedicated slab pages;
 - page-multiple blocks map one frame per page, or 2 MiB leaf entries
   when the arena runs with large pages and the size allows it.

Resizing policy for paged blocks, in order: grow in place when the
adjacent extent is free, otherwise remap to a larger range by moving
page-table entries.  Bytes are copied only for subpage blocks, whose
slot assignment cannot move any other way.  Once a block is paged it
stays paged even if resized below a page, so its address never gains
a subpage offset retroactively.

Frames recycled through the cache are not re-zeroed; a block may come
back with this process's stale bytes.  Only frames fresh from the
provider arrive zero-filled.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

from .cost_model import CostLedger, CostProfile, charge_map_units, pages_for
from .page_cache import FreePageCache
from .provider import FrameProvider, FrameRequest, OutOfFrames, RequestState, SizeClass
from .vmem import (
    LARGE_PAGE_PAGES,
    MAX_VPN,
    PAGE_SIZE,
    DestinationOccupied,
    PageTable,
)

SUBPAGE_THRESHOLD = PAGE_SIZE
MIN_CLASS = 16
MAX_CLASS = 2048
DEFAULT_REGION_PAGES = 16384  # 64 MiB of address space per region
REGION_GAP_PAGES = 512
BATCH_PREFIX_BYTES = 8


class AddressSpaceExhausted(Exception):
    pass


class DoubleFree(Exception):
    pass


class UnknownHandle(Exception):
    pass


class SubpageBlock(Exception):
    """Operation needs page-aligned blocks but got a slab slot."""


class FootprintMismatch(Exception):
    pass


class BlockKind(Enum):
    SUBPAGE = "subpage"
    PAGED = "paged"


def size_class_for(size: int) -> int:
    if size < 1:
        raise ValueError("size must be positive")
    return max(MIN_CLASS, 1 << (size - 1).bit_length())


@dataclass
class SlabPage:
    vpn: int
    cls: int
    slots: int
    free_slots: list[int]
    used: int = 0


@dataclass(eq=False)
class BlockHandle:
    """Mutable view of one live block; resizing may rebase it."""

    base_addr: int
    size_bytes: int
    kind: BlockKind
    _arena: "Arena"
    _live: bool = True
    _pages: int = 0          # committed footprint, paged blocks
    _large: bool = False     # mapped with 2 MiB leaves
    _slab: SlabPage | None = None
    _slot: int = 0

    def __repr__(self) -> str:
        state = "live" if self._live else "dead"
        return (f"BlockHandle({self.kind.value}, base={self.base_addr:#x}, "
                f"size={self.size_bytes}, {state})")

    @property
    def footprint_pages(self) -> int:
        return self._pages if self.kind is BlockKind.PAGED else 0


@dataclass(frozen=True)
class Region:
    base_vpn: int
    pages: int


@dataclass(frozen=True)
class ArenaStats:
    live_blocks: int
    committed_pages: int
    reserved_pages: int
    free_extent_count: int
    free_extent_pages: int
    cache_hits: int
    cache_misses: int


class Arena:
    def __init__(self, page_table: PageTable, cache: FreePageCache,
                 provider: FrameProvider, profile: CostProfile,
                 ledger: CostLedger, *, large_pages: bool = False,
                 region_pages: int = DEFAULT_REGION_PAGES):
        if region_pages < LARGE_PAGE_PAGES or region_pages % LARGE_PAGE_PAGES:
            raise ValueError("region_pages must be a positive multiple of 512")
        self.pt = page_table
        self.cache = cache
        self.provider = provider
        self.profile = profile
        self.ledger = ledger
        self.large_pages = large_pages
        self.region_pages = region_pages
        self._regions: list[Region] = []
        self._cursor_vpn = LARGE_PAGE_PAGES  # keep page 0 unmapped
        self._ext_by_addr: list[tuple[int, int]] = []   # (start_vpn, pages)
        self._ext_by_size: list[tuple[int, int]] = []   # (pages, start_vpn)
        self._partial: dict[int, list[SlabPage]] = {}
        self.live_blocks = 0
        self.committed_pages = 0
        self.cache_hits = 0
        self.cache_misses = 0

    # -- free extent bookkeeping -------------------------------------------

    def _ext_pop_at(self, i: int) -> tuple[int, int]:
        start, length = self._ext_by_addr.pop(i)
        j = bisect.bisect_left(self._ext_by_size, (length, start))
        self._ext_by_size.pop(j)
        return start, length

    def _ext_add(self, start: int, length: int) -> None:
        if length <= 0:
            return
        i = bisect.bisect_left(self._ext_by_addr, (start, 0))
        if i > 0:
            pstart, plen = self._ext_by_addr[i - 1]
            if pstart + plen == start:
                self._ext_pop_at(i - 1)
                start, length, i = pstart, plen + length, i - 1
        if i < len(self._ext_by_addr):
            nstart, nlen = self._ext_by_addr[i]
            if start + length == nstart:
                self._ext_pop_at(i)
                length += nlen
        self._ext_by_addr.insert(i, (start, length))
        bisect.insort(self._ext_by_size, (length, start))

    def _find_fit(self, pages: int, align: int = 1) -> int | None:
        """Smallest adequate extent, address as tie-break; carves it."""
        i = bisect.bisect_left(self._ext_by_size, (pages, -1))
        while i < len(self._ext_by_size):
            length, start = self._ext_by_size[i]
            aligned = -(-start // align) * align
            if aligned + pages <= start + length:
                j = bisect.bisect_left(self._ext_by_addr, (start, 0))
                self._ext_pop_at(j)
                self._ext_add(start, aligned - start)
                self._ext_add(aligned + pages, start + length - aligned - pages)
                return aligned
            i += 1
        return None

    def _extent_starting_at(self, start: int) -> int | None:
        """Length of the extent that begins exactly at ``start``, if any."""
        i = bisect.bisect_left(self._ext_by_addr, (start, 0))
        if i < len(self._ext_by_addr) and self._ext_by_addr[i][0] == start:
            return self._ext_by_addr[i][1]
        return None

    def reserve(self, pages: int) -> Region:
        """Claim fresh address space and add it to the free extents."""
        if pages < 1:
            raise ValueError("pages must be positive")
        length = -(-pages // LARGE_PAGE_PAGES) * LARGE_PAGE_PAGES
        base = self._cursor_vpn
        if base + length + REGION_GAP_PAGES > MAX_VPN:
            raise AddressSpaceExhausted(
                f"{length} pages at vpn {base:#x} exceed the address space")
        self._cursor_vpn = base + length + REGION_GAP_PAGES
        region = Region(base, length)
        self._regions.append(region)
        self._ext_add(base, length)
        return region

    def _take_va(self, pages: int, align: int = 1) -> int:
        hit = self._find_fit(pages, align)
        if hit is not None:
            return hit
        want = max(self.region_pages, 2 * (-(-pages // LARGE_PAGE_PAGES)) * LARGE_PAGE_PAGES)
        self.reserve(want)
        hit = self._find_fit(pages, align)
        if hit is None:
            raise AddressSpaceExhausted("fresh region did not fit the request")
        return hit

    # -- frame supply ----------------------------------------------------------

    def _acquire(self, units: int, size_class: SizeClass) -> list[int]:
        """Cache first, then one provider request pumped to completion."""
        frames, shortfall = self.cache.take(units, size_class)
        self.cache_hits += units - shortfall
        self.cache_misses += shortfall
        if shortfall == 0:
            return frames
        req = self.provider.request_frames(shortfall, size_class)
        self.provider.pump_until(req)
        if req.state is not RequestState.FULFILLED:
            if req.frames:
                self.provider.release_frames(req.frames, size_class)
            if frames:
                self.cache.put(frames, size_class)
            raise OutOfFrames(
                f"{units} {size_class.value} units requested, provider gave up")
        return frames + req.frames

    # -- subpage slabs -----------------------------------------------------------

    def _new_slab_page(self, cls: int) -> SlabPage:
        vpn = self._take_va(1)
        try:
            frame = self._acquire(1, SizeClass.SMALL)[0]
        except OutOfFrames:
            self._ext_add(vpn, 1)
            raise
        self.pt.map_page(vpn, frame)
        charge_map_units(self.ledger, self.profile, PAGE_SIZE, 1)
        self.committed_pages += 1
        slots = PAGE_SIZE // cls
        slab = SlabPage(vpn, cls, slots, free_slots=list(range(slots - 1, -1, -1)))
        self._partial.setdefault(cls, []).append(slab)
        return slab

    def _alloc_subpage(self, size: int) -> BlockHandle:
        cls = size_class_for(size)
        partial = self._partial.get(cls)
        slab = partial[-1] if partial else self._new_slab_page(cls)
        slot = slab.free_slots.pop()
        slab.used += 1
        if not slab.free_slots:
            self._partial[cls].remove(slab)
        self.live_blocks += 1
        return BlockHandle(
            base_addr=slab.vpn * PAGE_SIZE + slot * cls,
            size_bytes=size,
            kind=BlockKind.SUBPAGE,
            _arena=self,
            _slab=slab,
            _slot=slot,
        )

    def _release_slab_slot(self, handle: BlockHandle, deferred: list[int] | None = None) -> None:
        slab = handle._slab
        slab.free_slots.append(handle._slot)
        was_full = slab.used == slab.slots
        slab.used -= 1
        if was_full:
            self._partial.setdefault(slab.cls, []).append(slab)
        if slab.used == 0:
            self._partial[slab.cls].remove(slab)
            frame = self.pt.unmap_page(slab.vpn)
            self._ext_add(slab.vpn, 1)
            self.committed_pages -= 1
            if deferred is None:
                self.cache.put([frame])
            else:
                deferred.append(frame)

    # -- paged blocks ---------------------------------------------------------------

    def _map_small_run(self, vpn: int, frames: list[int]) -> None:
        for i, f in enumerate(frames):
            self.pt.map_page(vpn + i, f)

    def _alloc_paged(self, size: int) -> BlockHandle:
        pages = pages_for(size)
        large = self.large_pages and pages % LARGE_PAGE_PAGES == 0
        vpn = self._take_va(pages, align=LARGE_PAGE_PAGES if large else 1)
        footprint = pages * PAGE_SIZE
        if large:
            units = pages // LARGE_PAGE_PAGES
            try:
                bases = self._acquire(units, SizeClass.LARGE)
            except OutOfFrames:
                large = False   # grouped runs exhausted; fall back to 4 KiB frames
        if large:
            for i, base in enumerate(bases):
                self.pt.map_large_page(vpn + i * LARGE_PAGE_PAGES, base)
            charge_map_units(self.ledger, self.profile, footprint, units)
        else:
            try:
                frames = self._acquire(pages, SizeClass.SMALL)
            except OutOfFrames:
                self._ext_add(vpn, pages)
                raise
            self._map_small_run(vpn, frames)
            charge_map_units(self.ledger, self.profile, footprint, pages)
        self.committed_pages += pages
        self.live_blocks += 1
        return BlockHandle(
            base_addr=vpn * PAGE_SIZE,
            size_bytes=size,
            kind=BlockKind.PAGED,
            _arena=self,
            _pages=pages,
            _large=large,
        )

    def _unmap_paged(self, handle: BlockHandle,
                     small_out: list[int], large_out: list[int]) -> None:
        vpn = handle.base_addr // PAGE_SIZE
        if handle._large:
            for i in range(handle._pages // LARGE_PAGE_PAGES):
                large_out.append(self.pt.unmap_large_page(vpn + i * LARGE_PAGE_PAGES))
        else:
            for i in range(handle._pages):
                small_out.append(self.pt.unmap_page(vpn + i))
        self._ext_add(vpn, handle._pages)
        self.committed_pages -= handle._pages

    # -- public API -----------------------------------------------------------------

    def alloc(self, size: int) -> BlockHandle:
        if size < 1:
            raise ValueError("size must be positive")
        if size < SUBPAGE_THRESHOLD and size_class_for(size) <= MAX_CLASS:
            return self._alloc_subpage(size)
        return self._alloc_paged(size)

    def _check_live(self, handle: BlockHandle) -> None:
        if not isinstance(handle, BlockHandle) or handle._arena is not self:
            raise UnknownHandle(f"{handle!r} does not belong to this arena")
        if not handle._live:
            raise DoubleFree(f"{handle!r} was already freed")

    def free(self, handle: BlockHandle) -> None:
        self._check_live(handle)
        handle._live = False
        self.live_blocks -= 1
        if handle.kind is BlockKind.SUBPAGE:
            self._release_slab_slot(handle)
            return
        small: list[int] = []
        large: list[int] = []
        self._unmap_paged(handle, small, large)
        if small:
            self.cache.put(small, SizeClass.SMALL)
        if large:
            self.cache.put(large, SizeClass.LARGE)

    def batch_free(self, handles: list[BlockHandle]) -> None:
        """Free many blocks with one cache interaction per size class.

        Validates every handle before touching anything, so a bad
        handle anywhere leaves the whole batch live.
        """
        seen: set[int] = set()
        for h in handles:
            self._check_live(h)
            if id(h) in seen:
                raise DoubleFree(f"{h!r} appears twice in the batch")
            seen.add(id(h))
        small: list[int] = []
        large: list[int] = []
        for h in handles:
            h._live = False
            self.live_blocks -= 1
            if h.kind is BlockKind.SUBPAGE:
                self._release_slab_slot(h, deferred=small)
            else:
                self._unmap_paged(h, small, large)
        if small:
            self.cache.put(small, SizeClass.SMALL)
        if large:
            self.cache.put(large, SizeClass.LARGE)

    # -- resizing -------------------------------------------------------------------

    def _demote_large(self, handle: BlockHandle) -> None:
        """Rewrite 2 MiB leaves as 4 KiB entries; frames and bytes stay put."""
        vpn = handle.base_addr // PAGE_SIZE
        writes = 0
        for i in range(handle._pages // LARGE_PAGE_PAGES):
            chunk = vpn + i * LARGE_PAGE_PAGES
            base = self.pt.unmap_large_page(chunk)
            for k in range(LARGE_PAGE_PAGES):
                self.pt.map_page(chunk + k, base + k)
            writes += LARGE_PAGE_PAGES
        self.ledger.charge("pte", self.profile.pte_write_cycles * writes, units=writes)
        handle._large = False

    def _shrink_paged(self, handle: BlockHandle, new_pages: int) -> None:
        if handle._large and new_pages % LARGE_PAGE_PAGES:
            self._demote_large(handle)
        vpn = handle.base_addr // PAGE_SIZE
        surplus = handle._pages - new_pages
        if handle._large:
            bases = [
                self.pt.unmap_large_page(vpn + i * LARGE_PAGE_PAGES)
                for i in range(new_pages // LARGE_PAGE_PAGES,
                               handle._pages // LARGE_PAGE_PAGES)
            ]
            self.cache.put(bases, SizeClass.LARGE)
        else:
            frames = [self.pt.unmap_page(vpn + new_pages + i) for i in range(surplus)]
            self.cache.put(frames, SizeClass.SMALL)
        self._ext_add(vpn + new_pages, surplus)
        self.committed_pages -= surplus
        handle._pages = new_pages

    def _map_tail(self, handle: BlockHandle, base_vpn: int, extra: int,
                  footprint: int) -> None:
        """Acquire and map ``extra`` pages at the end of a grown block."""
        tail = base_vpn + handle._pages
        if handle._large:
            bases = self._acquire(extra // LARGE_PAGE_PAGES, SizeClass.LARGE)
            for i, base in enumerate(bases):
                self.pt.map_large_page(tail + i * LARGE_PAGE_PAGES, base)
            charge_map_units(self.ledger, self.profile, footprint,
                             extra // LARGE_PAGE_PAGES)
        else:
            frames = self._acquire(extra, SizeClass.SMALL)
            self._map_small_run(tail, frames)
            charge_map_units(self.ledger, self.profile, footprint, extra)

    def _grow_paged(self, handle: BlockHandle, new_pages: int) -> None:
        vpn = handle.base_addr // PAGE_SIZE
        extra = new_pages - handle._pages
        footprint = new_pages * PAGE_SIZE
        if handle._large and extra % LARGE_PAGE_PAGES:
            # the tail cannot be whole 2 MiB units; fall back to 4 KiB entries
            self._demote_large(handle)

        tail = self._extent_starting_at(vpn + handle._pages)
        if tail is not None and tail >= extra:
            # in place: commit the adjacent extent
            self._map_tail(handle, vpn, extra, footprint)
            self._find_fit_exact(vpn + handle._pages, extra)
        else:
            # remap: move the existing entries to a larger range, then map the tail
            align = LARGE_PAGE_PAGES if handle._large else 1
            dst = self._take_va(new_pages, align=align)
            try:
                self.pt.move_mapping(vpn, dst, handle._pages)
                self._map_tail(handle, dst, extra, footprint)
            except OutOfFrames:
                self.pt.move_mapping(dst, vpn, handle._pages)
                self._ext_add(dst, new_pages)
                raise
            self._ext_add(vpn, handle._pages)
            handle.base_addr = dst * PAGE_SIZE
        self.committed_pages += extra
        handle._pages = new_pages

    def _find_fit_exact(self, start: int, pages: int) -> None:
        """Carve [start, start+pages) out of the extent that begins there."""
        length = self._extent_starting_at(start)
        i = bisect.bisect_left(self._ext_by_addr, (start, 0))
        self._ext_pop_at(i)
        self._ext_add(start + pages, length - pages)

    def realloc(self, handle: BlockHandle, new_size: int) -> BlockHandle:
        """Resize; returns the handle to use from now on.

        Paged blocks are never byte-copied: they grow in place or by
        remapping.  A subpage block that changes class is copied into a
        fresh block (at most 2 KiB moves).  A paged block shrunk below
        a page keeps its page; the paged-to-subpage edge never goes
        backwards.
        """
        self._check_live(handle)
        if new_size < 1:
            raise ValueError("size must be positive")

        if handle.kind is BlockKind.SUBPAGE:
            if size_class_for(new_size) == handle._slab.cls:
                handle.size_bytes = new_size
                return handle
            moved = self.alloc(new_size)
            n = min(handle.size_bytes, new_size)
            data = self.pt.read_bytes(handle.base_addr, n)
            self.pt.write_bytes(moved.base_addr, data)
            self.ledger.charge("copy", self.profile.copy_cycles_per_byte * n, units=n)
            self.free(handle)
            return moved

        new_pages = max(1, pages_for(new_size))
        if new_pages == handle._pages:
            handle.size_bytes = new_size
        elif new_pages < handle._pages:
            self._shrink_paged(handle, new_pages)
            handle.size_bytes = new_size
        else:
            self._grow_paged(handle, new_pages)
            handle.size_bytes = new_size
        return handle

    # -- relocation ---------------------------------------------------------------

    def relocate(self, handle: BlockHandle, dst_addr: int | None = None) -> BlockHandle:
        """Move a paged block to a new base without copying bytes."""
        self._check_live(handle)
        if handle.kind is not BlockKind.PAGED:
            raise SubpageBlock("only paged blocks can relocate")
        align = LARGE_PAGE_PAGES if handle._large else 1
        vpn = handle.base_addr // PAGE_SIZE
        if dst_addr is None:
            dst = self._take_va(handle._pages, align=align)
        else:
            if dst_addr % (align * PAGE_SIZE):
                raise ValueError(f"destination must be {align}-page aligned")
            dst = dst_addr // PAGE_SIZE
            i = bisect.bisect_right(self._ext_by_addr, (dst, MAX_VPN)) - 1
            if i < 0:
                raise DestinationOccupied(f"vpn {dst:#x} is not free address space")
            start, ext_len = self._ext_by_addr[i]
            if not (start <= dst and dst + handle._pages <= start + ext_len):
                raise DestinationOccupied(f"vpn {dst:#x} is not free address space")
            self._ext_pop_at(i)
            self._ext_add(start, dst - start)
            self._ext_add(dst + handle._pages, start + ext_len - dst - handle._pages)
        self.pt.move_mapping(vpn, dst, handle._pages)
        self._ext_add(vpn, handle._pages)
        handle.base_addr = dst * PAGE_SIZE
        return handle

    def swap_blocks(self, a: BlockHandle, b: BlockHandle) -> None:
        """Exchange the contents of two equal-footprint paged blocks.

        No bytes move; the page tables are rewired and the handles
        keep naming the bytes they named before, at exchanged bases.
        """
        self._check_live(a)
        self._check_live(b)
        if a is b:
            raise ValueError("cannot swap a block with itself")
        if a.kind is not BlockKind.PAGED or b.kind is not BlockKind.PAGED:
            raise SubpageBlock("only paged blocks can swap")
        if a._pages != b._pages:
            raise FootprintMismatch(f"{a._pages} pages vs {b._pages} pages")
        self.pt.swap_mapping(a.base_addr // PAGE_SIZE, b.base_addr // PAGE_SIZE,
                             a._pages)
        a.base_addr, b.base_addr = b.base_addr, a.base_addr
        a._large, b._large = b._large, a._large

    # -- batching -----------------------------------------------------------------

    def batch_alloc(self, count: int, size: int) -> list[BlockHandle]:
        """Allocate ``count`` same-size blocks with at most one frame request.

        Frame delivery is asynchronous and may arrive in parts; mapping
        and block demarcation are interleaved with scheduler pumps so
        the work overlaps the wait.  Subpage batches get a transient
        8-byte little-endian size prefix written at each block start as
        they become addressable.
        """
        if count < 1:
            raise ValueError("count must be positive")
        if size < 1:
            raise ValueError("size must be positive")
        if size < SUBPAGE_THRESHOLD and size_class_for(size) <= MAX_CLASS:
            return self._batch_subpage(count, size)
        return self._batch_paged(count, size)

    def _batch_frames(self, pages: int) -> tuple[list[int], FrameRequest | None]:
        frames, shortfall = self.cache.take(pages, SizeClass.SMALL)
        self.cache_hits += pages - shortfall
        self.cache_misses += shortfall
        req = self.provider.request_frames(shortfall, SizeClass.SMALL) if shortfall else None
        return frames, req

    def _batch_cleanup(self, vpn: int, pages: int, mapped: int,
                       leftovers: list[int]) -> None:
        frames = [self.pt.unmap_page(vpn + i) for i in range(mapped)]
        self.committed_pages -= mapped
        self._ext_add(vpn, pages)
        if frames or leftovers:
            self.cache.put(frames + leftovers, SizeClass.SMALL)

    def _run_batch_map(self, vpn: int, pages: int, frames: list[int], req,
                       on_page_mapped) -> None:
        """Map pages as frames become available, pumping while starved."""
        mapped = 0
        consumed = 0
        ready = list(frames)
        stalls = 0
        while mapped < pages:
            if mapped < len(ready):
                f = ready[mapped]
                self.pt.map_page(vpn + mapped, f)
                self.committed_pages += 1
                mapped += 1
                on_page_mapped(mapped)
                continue
            if req is None or req.state is RequestState.FAILED:
                self._batch_cleanup(vpn, pages, mapped, ready[mapped:])
                raise OutOfFrames("frame request failed mid-batch")
            self.provider.pump(1)
            if len(req.frames) > consumed:
                ready.extend(req.frames[consumed:])
                consumed = len(req.frames)
                stalls = 0
            else:
                stalls += 1
                if stalls > 10_000:
                    self._batch_cleanup(vpn, pages, mapped, ready[mapped:])
                    raise OutOfFrames("frame delivery stalled mid-batch")

    def _batch_subpage(self, count: int, size: int) -> list[BlockHandle]:
        cls = size_class_for(size)
        slots = PAGE_SIZE // cls
        pages = -(-count // slots)
        vpn = self._take_va(pages)
        frames, req = self._batch_frames(pages)

        prefix = size.to_bytes(BATCH_PREFIX_BYTES, "little")

        def demarcate(mapped_pages: int) -> None:
            page = mapped_pages - 1
            first = page * slots
            for b in range(first, min(first + slots, count)):
                addr = (vpn + page) * PAGE_SIZE + (b - first) * cls
                self.pt.write_bytes(addr, prefix)

        self._run_batch_map(vpn, pages, frames, req, demarcate)
        charge_map_units(self.ledger, self.profile, PAGE_SIZE, pages)

        handles: list[BlockHandle] = []
        for p in range(pages):
            first = p * slots
            on_page = min(slots, count - first)
            slab = SlabPage(
                vpn + p, cls, slots,
                free_slots=list(range(slots - 1, on_page - 1, -1)),
                used=on_page,
            )
            if slab.free_slots:
                self._partial.setdefault(cls, []).append(slab)
            for s in range(on_page):
                handles.append(BlockHandle(
                    base_addr=(vpn + p) * PAGE_SIZE + s * cls,
                    size_bytes=size,
                    kind=BlockKind.SUBPAGE,
                    _arena=self,
                    _slab=slab,
                    _slot=s,
                ))
        self.live_blocks += count
        return handles

    def _batch_paged(self, count: int, size: int) -> list[BlockHandle]:
        bp = pages_for(size)
        total = count * bp
        vpn = self._take_va(total)
        frames, req = self._batch_frames(total)
        self._run_batch_map(vpn, total, frames, req, lambda _: None)
        charge_map_units(self.ledger, self.profile, bp * PAGE_SIZE, total)
        handles = [
            BlockHandle(
                base_addr=(vpn + i * bp) * PAGE_SIZE,
                size_bytes=size,
                kind=BlockKind.PAGED,
                _arena=self,
                _pages=bp,
            )
            for i in range(count)
        ]
        self.live_blocks += count
        return handles

    # -- data access and introspection -----------------------------------------------

    def read(self, handle: BlockHandle, offset: int = 0, length: int | None = None) -> bytes:
        self._check_live(handle)
        if length is None:
            length = handle.size_bytes - offset
        if offset < 0 or length < 0 or offset + length > handle.size_bytes:
            raise ValueError("read outside block bounds")
        return self.pt.read_bytes(handle.base_addr + offset, length)

    def write(self, handle: BlockHandle, data: bytes, offset: int = 0) -> None:
        self._check_live(handle)
        if offset < 0 or offset + len(data) > handle.size_bytes:
            raise ValueError("write outside block bounds")
        self.pt.write_bytes(handle.base_addr + offset, data)

    def stats(self) -> ArenaStats:
        return ArenaStats(
            live_blocks=self.live_blocks,
            committed_pages=self.committed_pages,
            reserved_pages=sum(r.pages for r in self._regions),
            free_extent_count=len(self._ext_by_addr),
            free_extent_pages=sum(p for _, p in self._ext_by_addr),
            cache_hits=self.cache_hits,
            cache_misses=self.cache_misses,
        )

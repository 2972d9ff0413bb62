"""Four-level radix page table over a simulated physical store.

The table maps 48-bit virtual addresses to frames of a flat in-memory
store, 9 index bits per level over 4 KiB pages.  Leaf entries live at
the bottom level; a 2 MiB mapping is a single entry one level up that
covers a 512-page aligned run of frames.  Interior nodes are plain
dicts, which makes whole-node splicing (remapping 2 MiB of address
space by moving one reference) a constant-time operation, and that is
the point: relocation of large mappings should cost page-table edits,
not byte copies.

Because frames are backed by a real ``bytearray``, every remap claim
is byte-testable: move a mapping and read the destination; the bytes
must be the ones written through the source addresses.

All operations validate before mutating, so a raised error leaves the
table unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

PAGE_SIZE = 4096
VA_BITS = 48
INDEX_BITS = 9
LEVELS = 4
FANOUT = 1 << INDEX_BITS
LARGE_PAGE_PAGES = FANOUT  # one entry at the second-lowest level
LARGE_PAGE_BYTES = LARGE_PAGE_PAGES * PAGE_SIZE
MAX_VPN = 1 << (VA_BITS - 12)
VA_LIMIT = 1 << VA_BITS


class VmemError(Exception):
    """Base for page-table errors; state is unchanged when raised."""


class OutOfRange(VmemError):
    pass


class AlreadyMapped(VmemError):
    pass


class NotMapped(VmemError):
    pass


class FrameInUse(VmemError):
    pass


class IsLargePage(VmemError):
    """Operation would need to split or misalign a 2 MiB mapping."""


class SourceHole(VmemError):
    pass


class DestinationOccupied(VmemError):
    pass


class Overlap(VmemError):
    pass


class FaultNotPresent(VmemError):
    def __init__(self, addr: int):
        super().__init__(f"no mapping at address {addr:#x}")
        self.addr = addr
        self.vpn = addr // PAGE_SIZE


class FaultReadOnly(VmemError):
    def __init__(self, addr: int):
        super().__init__(f"write to read-only page at address {addr:#x}")
        self.addr = addr
        self.vpn = addr // PAGE_SIZE


class PhysicalStore:
    """Flat frame array; frame f is bytes [f * page_size, (f+1) * page_size)."""

    def __init__(self, frame_count: int, page_size: int = PAGE_SIZE):
        if frame_count < 1:
            raise ValueError("need at least one frame")
        self.frame_count = frame_count
        self.page_size = page_size
        self._backing = bytearray(frame_count * page_size)

    def _check(self, frame: int, offset: int, length: int) -> int:
        if not 0 <= frame < self.frame_count:
            raise OutOfRange(f"frame {frame} outside store of {self.frame_count}")
        if offset < 0 or length < 0 or offset + length > self.page_size:
            raise ValueError("access crosses frame boundary")
        return frame * self.page_size + offset

    def read(self, frame: int, offset: int, length: int) -> bytes:
        base = self._check(frame, offset, length)
        return bytes(self._backing[base:base + length])

    def write(self, frame: int, offset: int, data: bytes) -> None:
        base = self._check(frame, offset, len(data))
        self._backing[base:base + len(data)] = data

    def zero_run(self, frame: int, count: int = 1) -> None:
        if count < 1 or frame < 0 or frame + count > self.frame_count:
            raise OutOfRange(f"zero of frames [{frame}, {frame + count}) out of store")
        base = frame * self.page_size
        self._backing[base:base + count * self.page_size] = bytes(count * self.page_size)

    def frame_bytes(self, frame: int) -> bytes:
        return self.read(frame, 0, self.page_size)


@dataclass
class PageEntry:
    frame: int
    writable: bool = True
    accessed: bool = False
    dirty: bool = False
    large: bool = False


@dataclass(frozen=True)
class Translation:
    phys: int
    frame: int
    writable: bool
    large: bool


def _split_vpn(vpn: int) -> tuple[int, int, int, int]:
    return (
        (vpn >> 27) & (FANOUT - 1),
        (vpn >> 18) & (FANOUT - 1),
        (vpn >> 9) & (FANOUT - 1),
        vpn & (FANOUT - 1),
    )


class PageTable:
    """Process-owned mapping state plus optional cost charging.

    When ``profile`` and ``ledger`` are attached, remap operations
    charge ``pte`` per entry rewritten and ``splice`` per whole node
    moved.  Plain map/unmap is never charged here; the allocator above
    charges mapping work at block granularity where the size band is
    known.
    """

    def __init__(self, store: PhysicalStore, profile=None, ledger=None,
                 nested_tables: bool = False):
        self.store = store
        self.profile = profile
        self.ledger = ledger
        self.nested_tables = nested_tables
        self._root: dict = {}
        self._frames: set[int] = set()
        self._page_count = 0

    # -- lookups ---------------------------------------------------------

    def _lookup(self, vpn: int) -> tuple[PageEntry | None, int]:
        """Return (entry, base_vpn_of_entry); entry may be a large leaf."""
        i0, i1, i2, i3 = _split_vpn(vpn)
        l1 = self._root.get(i0)
        if l1 is None:
            return None, vpn
        l2 = l1.get(i1)
        if l2 is None:
            return None, vpn
        slot = l2.get(i2)
        if slot is None:
            return None, vpn
        if isinstance(slot, PageEntry):
            return slot, vpn & ~(LARGE_PAGE_PAGES - 1)
        entry = slot.get(i3)
        if entry is None:
            return None, vpn
        return entry, vpn

    def _l2_slot(self, vpn: int, create: bool = False) -> tuple[dict | None, int]:
        """Return (level-2 node, index) for the 2 MiB chunk holding vpn."""
        i0, i1, i2, _ = _split_vpn(vpn)
        l1 = self._root.get(i0)
        if l1 is None:
            if not create:
                return None, i2
            l1 = self._root[i0] = {}
        l2 = l1.get(i1)
        if l2 is None:
            if not create:
                return None, i2
            l2 = l1[i1] = {}
        return l2, i2

    def _prune(self, vpn: int) -> None:
        i0, i1, i2, _ = _split_vpn(vpn)
        l1 = self._root.get(i0)
        if l1 is None:
            return
        l2 = l1.get(i1)
        if l2 is not None:
            slot = l2.get(i2)
            if isinstance(slot, dict) and not slot:
                del l2[i2]
            if not l2:
                del l1[i1]
        if not l1:
            del self._root[i0]

    def _check_vpn_range(self, vpn: int, n_pages: int = 1) -> None:
        if n_pages < 1:
            raise ValueError("page count must be positive")
        if vpn < 0 or vpn + n_pages > MAX_VPN:
            raise OutOfRange(f"vpns [{vpn}, {vpn + n_pages}) exceed {VA_BITS}-bit space")

    # -- map / unmap -----------------------------------------------------

    def map_page(self, vpn: int, frame: int, writable: bool = True) -> None:
        self._check_vpn_range(vpn)
        if not 0 <= frame < self.store.frame_count:
            raise OutOfRange(f"frame {frame} outside store")
        if frame in self._frames:
            raise FrameInUse(f"frame {frame} already mapped")
        entry, _ = self._lookup(vpn)
        if entry is not None:
            raise AlreadyMapped(f"vpn {vpn:#x} already mapped")
        l2, i2 = self._l2_slot(vpn, create=True)
        slot = l2.get(i2)
        if isinstance(slot, PageEntry):
            raise AlreadyMapped(f"vpn {vpn:#x} covered by a large mapping")
        if slot is None:
            slot = l2[i2] = {}
        slot[vpn & (FANOUT - 1)] = PageEntry(frame, writable=writable)
        self._frames.add(frame)
        self._page_count += 1

    def unmap_page(self, vpn: int) -> int:
        self._check_vpn_range(vpn)
        l2, i2 = self._l2_slot(vpn)
        slot = l2.get(i2) if l2 is not None else None
        if isinstance(slot, PageEntry):
            raise IsLargePage(f"vpn {vpn:#x} is inside a 2 MiB mapping")
        if slot is None or (vpn & (FANOUT - 1)) not in slot:
            raise NotMapped(f"vpn {vpn:#x} not mapped")
        entry = slot.pop(vpn & (FANOUT - 1))
        self._prune(vpn)
        self._frames.discard(entry.frame)
        self._page_count -= 1
        return entry.frame

    def map_large_page(self, vpn: int, frame: int, writable: bool = True) -> None:
        self._check_vpn_range(vpn, LARGE_PAGE_PAGES)
        if vpn % LARGE_PAGE_PAGES or frame % LARGE_PAGE_PAGES:
            raise ValueError("large mappings need 512-page alignment of vpn and frame")
        if frame + LARGE_PAGE_PAGES > self.store.frame_count:
            raise OutOfRange(f"frame run [{frame}, {frame + LARGE_PAGE_PAGES}) outside store")
        run = range(frame, frame + LARGE_PAGE_PAGES)
        if any(f in self._frames for f in run):
            raise FrameInUse("frame run overlaps mapped frames")
        l2, i2 = self._l2_slot(vpn, create=True)
        if l2.get(i2) is not None:
            raise AlreadyMapped(f"chunk at vpn {vpn:#x} not empty")
        l2[i2] = PageEntry(frame, writable=writable, large=True)
        self._frames.update(run)
        self._page_count += LARGE_PAGE_PAGES

    def unmap_large_page(self, vpn: int) -> int:
        self._check_vpn_range(vpn, LARGE_PAGE_PAGES)
        if vpn % LARGE_PAGE_PAGES:
            raise ValueError("large mappings need 512-page alignment")
        l2, i2 = self._l2_slot(vpn)
        slot = l2.get(i2) if l2 is not None else None
        if not isinstance(slot, PageEntry):
            raise NotMapped(f"no large mapping at vpn {vpn:#x}")
        del l2[i2]
        self._prune(vpn)
        for f in range(slot.frame, slot.frame + LARGE_PAGE_PAGES):
            self._frames.discard(f)
        self._page_count -= LARGE_PAGE_PAGES
        return slot.frame

    # -- access ----------------------------------------------------------

    def translate(self, addr: int) -> Translation:
        if not 0 <= addr < VA_LIMIT:
            raise OutOfRange(f"address {addr:#x} outside {VA_BITS}-bit space")
        vpn, offset = divmod(addr, PAGE_SIZE)
        entry, base = self._lookup(vpn)
        if entry is None:
            raise FaultNotPresent(addr)
        frame = entry.frame + (vpn - base if entry.large else 0)
        return Translation(
            phys=frame * PAGE_SIZE + offset,
            frame=frame,
            writable=entry.writable,
            large=entry.large,
        )

    def _span_entries(self, addr: int, length: int, for_write: bool) -> list[tuple[int, int, int]]:
        """Validate [addr, addr+length) and return (frame, offset, len) runs.

        Faults identify the lowest faulting address, and nothing is
        touched until the whole span validates.
        """
        if length < 0:
            raise ValueError("negative length")
        if not 0 <= addr <= addr + length <= VA_LIMIT:
            raise OutOfRange(f"range [{addr:#x}, +{length}) outside address space")
        segs: list[tuple[int, int, int]] = []
        pos = addr
        end = addr + length
        while pos < end:
            vpn, offset = divmod(pos, PAGE_SIZE)
            entry, base = self._lookup(vpn)
            if entry is None:
                raise FaultNotPresent(pos)
            if for_write and not entry.writable:
                raise FaultReadOnly(pos)
            take = min(end - pos, PAGE_SIZE - offset)
            frame = entry.frame + (vpn - base if entry.large else 0)
            segs.append((frame, offset, take))
            entry.accessed = True
            if for_write:
                entry.dirty = True
            pos += take
        return segs

    def read_bytes(self, addr: int, length: int) -> bytes:
        out = bytearray()
        for frame, offset, take in self._span_entries(addr, length, for_write=False):
            out += self.store.read(frame, offset, take)
        return bytes(out)

    def write_bytes(self, addr: int, data: bytes) -> None:
        pos = 0
        for frame, offset, take in self._span_entries(addr, len(data), for_write=True):
            self.store.write(frame, offset, data[pos:pos + take])
            pos += take

    # -- remapping -------------------------------------------------------

    def _classify_move(self, src_vpn: int, dst_vpn: int, n_pages: int) -> list[tuple[str, int]]:
        """Break a move into (kind, offset) units: large, splice, or page."""
        units: list[tuple[str, int]] = []
        o = 0
        while o < n_pages:
            vpn = src_vpn + o
            l2, i2 = self._l2_slot(vpn)
            slot = l2.get(i2) if l2 is not None else None
            if isinstance(slot, PageEntry):
                aligned = vpn % LARGE_PAGE_PAGES == 0 and (dst_vpn + o) % LARGE_PAGE_PAGES == 0
                if not aligned or n_pages - o < LARGE_PAGE_PAGES:
                    raise IsLargePage(
                        f"move intersects 2 MiB mapping at vpn {vpn:#x} without covering it aligned"
                    )
                units.append(("large", o))
                o += LARGE_PAGE_PAGES
                continue
            if slot is None:
                raise SourceHole(f"vpn {vpn:#x} not mapped")
            if (
                vpn % LARGE_PAGE_PAGES == 0
                and (dst_vpn + o) % LARGE_PAGE_PAGES == 0
                and n_pages - o >= LARGE_PAGE_PAGES
                and len(slot) == FANOUT
            ):
                units.append(("splice", o))
                o += LARGE_PAGE_PAGES
                continue
            if (vpn & (FANOUT - 1)) not in slot:
                raise SourceHole(f"vpn {vpn:#x} not mapped")
            units.append(("page", o))
            o += 1
        return units

    def _dst_free(self, vpn: int, whole_chunk: bool) -> bool:
        l2, i2 = self._l2_slot(vpn)
        slot = l2.get(i2) if l2 is not None else None
        if slot is None:
            return True
        if whole_chunk or isinstance(slot, PageEntry):
            return False
        return (vpn & (FANOUT - 1)) not in slot

    def _charge_remap(self, pte_writes: int, splices: int) -> None:
        if self.ledger is None or self.profile is None:
            return
        if pte_writes:
            self.ledger.charge("pte", self.profile.pte_write_cycles * pte_writes,
                               units=pte_writes)
        if splices:
            self.ledger.charge("splice", self.profile.node_splice_cycles * splices,
                               units=splices)

    def move_mapping(self, src_vpn: int, dst_vpn: int, n_pages: int) -> None:
        """Remap [src, src+n) to [dst, dst+n) without touching frame bytes.

        Whole 2 MiB chunks move as one spliced node or one large entry;
        everything else moves entry by entry.  The ranges must be
        disjoint and the source fully mapped.
        """
        self._check_vpn_range(src_vpn, n_pages)
        self._check_vpn_range(dst_vpn, n_pages)
        if src_vpn < dst_vpn + n_pages and dst_vpn < src_vpn + n_pages:
            raise Overlap("source and destination ranges overlap")
        units = self._classify_move(src_vpn, dst_vpn, n_pages)
        for kind, o in units:
            if not self._dst_free(dst_vpn + o, whole_chunk=kind != "page"):
                raise DestinationOccupied(f"vpn {dst_vpn + o:#x} already mapped")
        pte_writes = splices = 0
        for kind, o in units:
            src = src_vpn + o
            dst = dst_vpn + o
            sl2, si2 = self._l2_slot(src)
            if kind == "page":
                entry = sl2[si2].pop(src & (FANOUT - 1))
            else:
                entry = sl2.pop(si2)
            # prune before resolving dst: pruning src's emptied path can
            # drop interior nodes the two ranges share, and a dst slot
            # fetched earlier would dangle in an unreachable subtree
            self._prune(src)
            dl2, di2 = self._l2_slot(dst, create=True)
            if kind == "page":
                leaf = dl2.get(di2)
                if leaf is None:
                    leaf = dl2[di2] = {}
                leaf[dst & (FANOUT - 1)] = entry
                pte_writes += 1
            else:
                dl2[di2] = entry
                if kind == "large":
                    pte_writes += 1
                else:
                    splices += 1
        self._charge_remap(pte_writes, splices)

    def swap_mapping(self, a_vpn: int, b_vpn: int, n_pages: int) -> None:
        """Exchange two fully mapped, disjoint, equal-length ranges."""
        self._check_vpn_range(a_vpn, n_pages)
        self._check_vpn_range(b_vpn, n_pages)
        if a_vpn < b_vpn + n_pages and b_vpn < a_vpn + n_pages:
            raise Overlap("ranges overlap")

        units: list[tuple[str, int]] = []
        o = 0
        while o < n_pages:
            va, vb = a_vpn + o, b_vpn + o
            al2, ai2 = self._l2_slot(va)
            bl2, bi2 = self._l2_slot(vb)
            sa = al2.get(ai2) if al2 is not None else None
            sb = bl2.get(bi2) if bl2 is not None else None
            a_large = isinstance(sa, PageEntry)
            b_large = isinstance(sb, PageEntry)
            chunk_ok = (
                va % LARGE_PAGE_PAGES == 0
                and vb % LARGE_PAGE_PAGES == 0
                and n_pages - o >= LARGE_PAGE_PAGES
            )
            if a_large or b_large:
                if not (a_large and b_large and chunk_ok):
                    raise IsLargePage(
                        f"swap mixes 2 MiB and 4 KiB mappings at offset {o}"
                    )
                units.append(("entry", o))
                o += LARGE_PAGE_PAGES
                continue
            if chunk_ok and isinstance(sa, dict) and isinstance(sb, dict) \
                    and len(sa) == FANOUT and len(sb) == FANOUT:
                units.append(("splice", o))
                o += LARGE_PAGE_PAGES
                continue
            for vpn in (va, vb):
                entry, _ = self._lookup(vpn)
                if entry is None:
                    raise SourceHole(f"vpn {vpn:#x} not mapped")
            units.append(("page", o))
            o += 1

        pte_writes = splices = 0
        for kind, o in units:
            va, vb = a_vpn + o, b_vpn + o
            al2, ai2 = self._l2_slot(va)
            bl2, bi2 = self._l2_slot(vb)
            if kind == "page":
                la, lb = al2[ai2], bl2[bi2]
                ia, ib = va & (FANOUT - 1), vb & (FANOUT - 1)
                la[ia], lb[ib] = lb[ib], la[ia]
                pte_writes += 2
            else:
                al2[ai2], bl2[bi2] = bl2[bi2], al2[ai2]
                if kind == "entry":
                    pte_writes += 2
                else:
                    splices += 2
        self._charge_remap(pte_writes, splices)

    # -- costing and introspection ----------------------------------------

    def walk_cost(self, addr: int) -> float:
        """Cycle cost of translating addr, charged to the walk category."""
        self.translate(addr)
        if self.profile is None:
            return 0.0
        cyc = self.profile.walk_cycles(nested=self.nested_tables)
        if self.ledger is not None:
            self.ledger.charge("walk", cyc, units=1)
        return cyc

    @property
    def mapped_pages(self) -> int:
        return self._page_count

    @property
    def frames_in_use(self) -> frozenset[int]:
        return frozenset(self._frames)

    def is_mapped(self, vpn: int) -> bool:
        return self._lookup(vpn)[0] is not None

    def node_count(self) -> int:
        count = 1
        for l1 in self._root.values():
            count += 1
            for l2 in l1.values():
                count += 1
                count += sum(1 for s in l2.values() if isinstance(s, dict))
        return count

    def iter_mappings(self) -> Iterator[tuple[int, int, bool]]:
        """Yield (vpn, frame, large) for every leaf, in vpn order."""
        for i0 in sorted(self._root):
            for i1 in sorted(self._root[i0]):
                l2 = self._root[i0][i1]
                for i2 in sorted(l2):
                    base = (i0 << 27) | (i1 << 18) | (i2 << 9)
                    slot = l2[i2]
                    if isinstance(slot, PageEntry):
                        yield base, slot.frame, True
                    else:
                        for i3 in sorted(slot):
                            yield base | i3, slot[i3].frame, False

    def integrity_violations(self) -> list[str]:
        """Structural checks; an empty list means the table is sound."""
        problems: list[str] = []
        seen: set[int] = set()
        pages = 0
        for vpn, frame, large in self.iter_mappings():
            run = range(frame, frame + (LARGE_PAGE_PAGES if large else 1))
            pages += len(run)
            if large and (vpn % LARGE_PAGE_PAGES or frame % LARGE_PAGE_PAGES):
                problems.append(f"misaligned large mapping at vpn {vpn:#x}")
            if run[-1] >= self.store.frame_count:
                problems.append(f"frame {frame} outside store at vpn {vpn:#x}")
            for f in run:
                if f in seen:
                    problems.append(f"frame {f} mapped twice")
                seen.add(f)
        if seen != self._frames:
            problems.append("frame index diverges from leaf entries")
        if pages != self._page_count:
            problems.append(f"page count {self._page_count} != walked {pages}")
        for l1 in self._root.values():
            if not l1:
                problems.append("empty interior node")
            for l2 in l1.values():
                if not l2:
                    problems.append("empty interior node")
                for slot in l2.values():
                    if isinstance(slot, dict) and not slot:
                        problems.append("empty leaf node")
        return problems

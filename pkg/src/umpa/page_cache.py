"""Process-local cache of free frames.

Frames freed by the allocator land here instead of going back to the
provider, and the next allocation takes them without a request
round-trip or re-zeroing: within one process, recycling dirty frames
is safe because the process only ever sees its own stale bytes.
Zeroing is only needed when frames cross a process boundary, and that
happens on the provider side at delivery.

Reuse is LIFO.  Watermarks are expressed in 4 KiB page equivalents
(a cached 2 MiB run counts as 512).  The cache registers itself as the
provider's pressure handler: advisory pressure trims down to the high
watermark, urgent down to the low watermark, and critical releases
whatever the provider asks for, everything if no target is given.
"""

from __future__ import annotations

from .provider import FrameProvider, FrameRequest, RequestState, Severity, SizeClass
from .vmem import LARGE_PAGE_PAGES, PageTable


class StillMapped(Exception):
    """A frame was put in the cache while still present in the page table."""


class FreePageCache:
    def __init__(self, provider: FrameProvider, page_table: PageTable | None = None, *,
                 low_watermark: int = 16, high_watermark: int = 4096,
                 refill_async: bool = False, register: bool = True):
        if not 0 <= low_watermark <= high_watermark:
            raise ValueError("need 0 <= low_watermark <= high_watermark")
        self.provider = provider
        self.page_table = page_table
        self.low_watermark = low_watermark
        self.high_watermark = high_watermark
        self.refill_async = refill_async
        self._small: list[int] = []   # LIFO: hot end is the tail
        self._large: list[int] = []
        self._refill: FrameRequest | None = None
        if register:
            provider.register_pressure_handler(self.on_pressure)

    @property
    def pages(self) -> int:
        return len(self._small) + len(self._large) * LARGE_PAGE_PAGES

    @property
    def small_count(self) -> int:
        return len(self._small)

    @property
    def large_count(self) -> int:
        return len(self._large)

    def take(self, count: int, size_class: SizeClass = SizeClass.SMALL) -> tuple[list[int], int]:
        """Pop up to ``count`` units; returns (frames, shortfall)."""
        if count < 1:
            raise ValueError("count must be positive")
        self._integrate_refill()
        pool = self._large if size_class is SizeClass.LARGE else self._small
        got = min(count, len(pool))
        frames = pool[len(pool) - got:]
        del pool[len(pool) - got:]
        frames.reverse()  # most recently cached first
        if self.refill_async and size_class is SizeClass.SMALL:
            self._maybe_refill()
        return frames, count - got

    def put(self, frames: list[int], size_class: SizeClass = SizeClass.SMALL) -> None:
        """Cache frames coming off the page table.

        Rejects frames that are still mapped, keeps contents as-is,
        and spills anything above the high watermark back to the
        provider in a single release.
        """
        if self.page_table is not None:
            mapped = self.page_table.frames_in_use
            for f in frames:
                run = range(f, f + LARGE_PAGE_PAGES) if size_class is SizeClass.LARGE else (f,)
                for page in run:
                    if page in mapped:
                        raise StillMapped(f"frame {page} is still mapped")
        pool = self._large if size_class is SizeClass.LARGE else self._small
        pool.extend(frames)
        if self.pages > self.high_watermark:
            self._trim_to(self.high_watermark)

    def _trim_to(self, goal_pages: int) -> int:
        """Release cold-end frames until at or below ``goal_pages``."""
        excess = self.pages - goal_pages
        if excess <= 0:
            return 0
        k = min(len(self._small), excess)
        rel_small = self._small[:k]
        del self._small[:k]
        excess -= k
        n_large = min(len(self._large), -(-excess // LARGE_PAGE_PAGES)) if excess > 0 else 0
        rel_large = self._large[:n_large]
        del self._large[:n_large]
        if rel_small:
            self.provider.release_frames(rel_small, SizeClass.SMALL)
        if rel_large:
            self.provider.release_frames(rel_large, SizeClass.LARGE)
        return len(rel_small) + len(rel_large) * LARGE_PAGE_PAGES

    def on_pressure(self, severity: Severity, target_pages: int | None = None) -> int:
        if severity is Severity.ADVISORY:
            return self._trim_to(self.high_watermark)
        if severity is Severity.URGENT:
            return self._trim_to(self.low_watermark)
        if target_pages is None:
            return self._trim_to(0)
        return self._trim_to(max(0, self.pages - target_pages))

    def flush(self) -> int:
        return self._trim_to(0)

    def set_watermarks(self, low: int, high: int) -> None:
        if not 0 <= low <= high:
            raise ValueError("need 0 <= low <= high")
        self.low_watermark = low
        self.high_watermark = high
        if self.pages > high:
            self._trim_to(high)

    # -- optional background refill ---------------------------------------

    def _maybe_refill(self) -> None:
        if self._refill is not None and self._refill.state is RequestState.PENDING:
            return
        deficit = self.low_watermark - self.pages
        if deficit > 0:
            self._refill = self.provider.request_frames(deficit, SizeClass.SMALL)

    def _integrate_refill(self) -> None:
        req = self._refill
        if req is None or req.state is RequestState.PENDING:
            return
        self._refill = None
        if req.frames:
            self.put(req.frames, req.size_class)

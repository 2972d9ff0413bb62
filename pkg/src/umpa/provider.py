"""Kernel-side frame supply with an asynchronous request queue.

Frames are requested in batches and delivered over explicit scheduler
steps (``pump``), so a caller can keep working between submission and
fulfilment.  Delivery is where frames get zero-filled and where the
zeroing cycles are charged: the cost exists, but it lands on the
kernel side of the ledger instead of stalling the requesting thread.

When the pool runs dry the provider escalates pressure through a
registered handler (advisory, then urgent, then critical) before
failing a request.  Frames released back by the handler are reused
immediately.

Frames are tracked in 512-frame aligned groups so that whole groups
can be granted as 2 MiB units.  Small grants prefer partially broken
groups and keep intact groups in reserve for large requests.
"""

from __future__ import annotations

import bisect
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .vmem import LARGE_PAGE_PAGES, PhysicalStore


class OutOfFrames(Exception):
    """No frames available even after pressure escalation."""


class NotOwned(Exception):
    """Release of a frame the provider did not grant (or already took back)."""


class NoHandler(Exception):
    """Pressure raised with no handler registered."""


class SizeClass(Enum):
    SMALL = "small"   # one 4 KiB frame per unit
    LARGE = "large"   # one aligned 512-frame run per unit


class RequestState(Enum):
    PENDING = "pending"
    FULFILLED = "fulfilled"
    FAILED = "failed"


class Severity(Enum):
    ADVISORY = 1
    URGENT = 2
    CRITICAL = 3


@dataclass
class FrameRequest:
    request_id: int
    count: int
    size_class: SizeClass
    submitted_step: int
    ready_step: int
    state: RequestState = RequestState.PENDING
    frames: list[int] = field(default_factory=list)
    completed_step: int | None = None

    @property
    def delivered(self) -> int:
        return len(self.frames)


def _unit_pages(size_class: SizeClass) -> int:
    return LARGE_PAGE_PAGES if size_class is SizeClass.LARGE else 1


class FrameProvider:
    def __init__(self, store: PhysicalStore, profile=None, ledger=None, *,
                 latency_steps: int = 1, frames_per_step: int = 256,
                 jitter_steps: int = 0, seed: int = 0):
        if latency_steps < 0 or frames_per_step < 1:
            raise ValueError("latency must be >= 0 and frames_per_step >= 1")
        self.store = store
        self.profile = profile
        self.ledger = ledger
        self.latency_steps = latency_steps
        self.frames_per_step = frames_per_step
        self.jitter_steps = jitter_steps
        self._rng = random.Random(seed)
        self.step_count = 0
        self._next_id = 1
        self._pending: deque[FrameRequest] = deque()
        self._owned: set[int] = set()
        # free pool, grouped by aligned 512-frame run; each group's list
        # stays sorted ascending and grants pop from the tail
        self._free: dict[int, list[int]] = {}
        for gid in range(-(-store.frame_count // LARGE_PAGE_PAGES)):
            base = gid * LARGE_PAGE_PAGES
            self._free[gid] = list(range(base, min(base + LARGE_PAGE_PAGES,
                                                   store.frame_count)))
        self._small_gid: int | None = None  # group being drained for small grants
        self._pressure_handler = None
        self.trace: list[tuple] = []

    # -- pool bookkeeping --------------------------------------------------

    @property
    def free_pages(self) -> int:
        return sum(len(s) for s in self._free.values())

    @property
    def owned_pages(self) -> int:
        return len(self._owned)

    def conservation_holds(self) -> bool:
        return self.free_pages + self.owned_pages == self.store.frame_count

    def _group_capacity(self, gid: int) -> int:
        return min(LARGE_PAGE_PAGES, self.store.frame_count - gid * LARGE_PAGE_PAGES)

    def _pick_group(self) -> int | None:
        """Lowest already-broken group, else lowest intact one.

        Preferring broken groups keeps intact runs available for large
        grants.
        """
        partial = intact = None
        for gid in sorted(self._free):
            free = self._free[gid]
            if not free:
                continue
            if len(free) < self._group_capacity(gid):
                partial = gid
                break
            if intact is None:
                intact = gid
        return partial if partial is not None else intact

    def _take_small(self, want: int) -> list[int]:
        got: list[int] = []
        while len(got) < want:
            gid = self._small_gid
            if gid is None or not self._free.get(gid):
                gid = self._pick_group()
                self._small_gid = gid
                if gid is None:
                    break
            free = self._free[gid]
            while free and len(got) < want:
                f = free.pop()
                self._owned.add(f)
                got.append(f)
            if not free:
                del self._free[gid]
                self._small_gid = None
        return got

    def _take_large(self) -> int | None:
        for gid in sorted(self._free):
            if len(self._free[gid]) == LARGE_PAGE_PAGES:
                del self._free[gid]
                if self._small_gid == gid:
                    self._small_gid = None
                base = gid * LARGE_PAGE_PAGES
                self._owned.update(range(base, base + LARGE_PAGE_PAGES))
                return base
        return None

    def _give_back(self, frame: int) -> None:
        self._owned.discard(frame)
        bisect.insort(self._free.setdefault(frame // LARGE_PAGE_PAGES, []), frame)

    # -- requests ------------------------------------------------------------

    def request_frames(self, count: int, size_class: SizeClass = SizeClass.SMALL) -> FrameRequest:
        """Queue a request for ``count`` units; returns immediately.

        One upcall is charged per request regardless of size, which is
        what makes batching pay off.
        """
        if count < 1:
            raise ValueError("count must be positive")
        extra = self._rng.randint(0, self.jitter_steps) if self.jitter_steps else 0
        req = FrameRequest(
            request_id=self._next_id,
            count=count,
            size_class=size_class,
            submitted_step=self.step_count,
            ready_step=self.step_count + self.latency_steps + extra,
        )
        self._next_id += 1
        self._pending.append(req)
        if self.ledger is not None and self.profile is not None:
            self.ledger.charge("upcall", self.profile.upcall_fixed_cycles, units=1)
        self.trace.append(("request", req.request_id, count, size_class.value, self.step_count))
        return req

    def _deliver_units(self, req: FrameRequest, units: int) -> None:
        pages = units * _unit_pages(req.size_class)
        bases = req.frames[-units:]
        if req.size_class is SizeClass.LARGE:
            for base in bases:
                self.store.zero_run(base, LARGE_PAGE_PAGES)
        else:
            for f in bases:
                self.store.zero_run(f, 1)
        if self.ledger is not None and self.profile is not None:
            self.ledger.charge("zero", self.profile.zero_cycles_per_page * pages,
                               units=pages)
        self.trace.append(("deliver", req.request_id, units, self.step_count))

    def _escalate(self, shortfall_pages: int) -> int:
        """Walk the severity ladder until the shortfall is covered."""
        released = 0
        if self._pressure_handler is None:
            return 0
        for sev in (Severity.ADVISORY, Severity.URGENT, Severity.CRITICAL):
            got = self._pressure_handler(sev, shortfall_pages - released)
            released += got
            self.trace.append(("pressure", sev.value, shortfall_pages, got, self.step_count))
            if self.free_pages >= shortfall_pages:
                break
        return released

    def pump(self, steps: int = 1) -> list[int]:
        """Advance the scheduler; returns ids of requests fulfilled."""
        done: list[int] = []
        for _ in range(steps):
            self.step_count += 1
            budget = self.frames_per_step
            while self._pending and budget > 0:
                req = self._pending[0]
                if req.ready_step > self.step_count:
                    break
                unit = _unit_pages(req.size_class)
                want_units = min(req.count - req.delivered, max(1, budget // unit))
                grabbed = 0
                if req.size_class is SizeClass.LARGE:
                    for _ in range(want_units):
                        base = self._take_large()
                        if base is None and self._escalate(unit):
                            base = self._take_large()
                        if base is None:
                            break
                        req.frames.append(base)
                        grabbed += 1
                else:
                    got = self._take_small(want_units)
                    if len(got) < want_units:
                        if self._escalate(req.count - req.delivered - len(got)):
                            got += self._take_small(want_units - len(got))
                    req.frames.extend(got)
                    grabbed = len(got)
                if grabbed:
                    self._deliver_units(req, grabbed)
                    budget -= grabbed * unit
                if req.delivered == req.count:
                    req.state = RequestState.FULFILLED
                    req.completed_step = self.step_count
                    self._pending.popleft()
                    done.append(req.request_id)
                    self.trace.append(("fulfilled", req.request_id, self.step_count))
                    continue
                if grabbed == 0:
                    # pool dry and escalation produced nothing
                    req.state = RequestState.FAILED
                    req.completed_step = self.step_count
                    self._pending.popleft()
                    self.trace.append(("failed", req.request_id, self.step_count))
                    continue
        return done

    def pump_until(self, req: FrameRequest, max_steps: int = 10_000) -> None:
        """Drive the scheduler until ``req`` leaves the pending state."""
        steps = 0
        while req.state is RequestState.PENDING:
            if steps >= max_steps:
                raise RuntimeError(f"request {req.request_id} stuck after {max_steps} steps")
            self.pump(1)
            steps += 1

    # -- synchronous paths ---------------------------------------------------

    def fault_grant(self, count: int = 1) -> list[int]:
        """Immediate zero-filled grant, as a faulting kernel would do.

        No upcall or zero category is charged here: a demand-fault
        baseline accounts for the whole fault (including kernel
        zeroing) through its per-page fault constants.
        """
        if count < 1:
            raise ValueError("count must be positive")
        got = self._take_small(count)
        if len(got) < count:
            self._escalate(count - len(got))
            got += self._take_small(count - len(got))
        if len(got) < count:
            for f in got:
                self._give_back(f)
            raise OutOfFrames(f"wanted {count} frames, pool has {self.free_pages}")
        for f in got:
            self.store.zero_run(f, 1)
        self.trace.append(("grant", count, self.step_count))
        return got

    def release_frames(self, frames: list[int], size_class: SizeClass = SizeClass.SMALL) -> None:
        """Return frames to the pool.  Contents are not cleared here;
        zeroing happens on the next delivery."""
        if size_class is SizeClass.LARGE:
            expanded: list[int] = []
            for base in frames:
                if base % LARGE_PAGE_PAGES:
                    raise ValueError(f"large release of unaligned base {base}")
                expanded.extend(range(base, base + LARGE_PAGE_PAGES))
            frames = expanded
        for f in frames:
            if f not in self._owned:
                raise NotOwned(f"frame {f} not held by any grant")
        for f in frames:
            self._give_back(f)
        self.trace.append(("release", len(frames), size_class.value, self.step_count))

    # -- pressure --------------------------------------------------------------

    def register_pressure_handler(self, handler) -> None:
        """handler(severity, target_pages) -> pages released."""
        self._pressure_handler = handler

    def raise_pressure(self, severity: Severity, target_pages: int | None = None) -> int:
        if self._pressure_handler is None:
            raise NoHandler("no pressure handler registered")
        released = self._pressure_handler(severity, target_pages)
        self.trace.append(("pressure", severity.value, target_pages, released, self.step_count))
        return released

"""Shared fixtures: a fully wired allocation stack."""

from dataclasses import dataclass

import pytest

from umpa.allocator import Arena
from umpa.cost_model import CostLedger, CostProfile, get_profile
from umpa.page_cache import FreePageCache
from umpa.provider import FrameProvider
from umpa.vmem import PageTable, PhysicalStore


@dataclass
class Stack:
    store: PhysicalStore
    pt: PageTable
    provider: FrameProvider
    cache: FreePageCache
    arena: Arena
    ledger: CostLedger
    profile: CostProfile

    def conserved(self) -> bool:
        """Every frame is free, cached, or mapped, with no double counting."""
        if not self.provider.conservation_holds():
            return False
        # len() on the internal set, not frames_in_use: this runs per op
        # in workload tests and a frozenset copy there is pure overhead
        mapped = len(self.pt._frames)
        return self.provider.owned_pages == mapped + self.cache.pages


def build_stack(frames: int = 8192, profile_name: str = "windows7_x64", *,
                large_pages: bool = False, low_watermark: int = 16,
                high_watermark: int = 4096, region_pages: int = 16384,
                latency_steps: int = 1, frames_per_step: int = 256) -> Stack:
    store = PhysicalStore(frames)
    profile = get_profile(profile_name)
    ledger = CostLedger()
    pt = PageTable(store, profile=profile, ledger=ledger)
    provider = FrameProvider(store, profile=profile, ledger=ledger,
                             latency_steps=latency_steps,
                             frames_per_step=frames_per_step)
    cache = FreePageCache(provider, pt, low_watermark=low_watermark,
                          high_watermark=high_watermark)
    arena = Arena(pt, cache, provider, profile, ledger,
                  large_pages=large_pages, region_pages=region_pages)
    return Stack(store, pt, provider, cache, arena, ledger, profile)


@pytest.fixture
def stack() -> Stack:
    return build_stack()


@pytest.fixture
def large_stack() -> Stack:
    return build_stack(frames=16384, large_pages=True)

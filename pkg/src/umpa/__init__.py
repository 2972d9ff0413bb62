"""Simulated user-mode page allocator with a calibrated cycle-cost model."""

from .allocator import (
    AddressSpaceExhausted,
    Arena,
    ArenaStats,
    BlockHandle,
    BlockKind,
    DoubleFree,
    FootprintMismatch,
    SubpageBlock,
    UnknownHandle,
)
from .cost_model import (
    CostLedger,
    CostProfile,
    builtin_profiles,
    get_profile,
    load_profile,
    overhead_percent,
    resolve_profile,
)
from .page_cache import FreePageCache, StillMapped
from .provider import (
    FrameProvider,
    FrameRequest,
    NoHandler,
    NotOwned,
    OutOfFrames,
    RequestState,
    Severity,
    SizeClass,
)
from .vmem import (
    AlreadyMapped,
    DestinationOccupied,
    FaultNotPresent,
    FaultReadOnly,
    FrameInUse,
    IsLargePage,
    NotMapped,
    OutOfRange,
    Overlap,
    PageTable,
    PhysicalStore,
    SourceHole,
    VmemError,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Free page cache: LIFO reuse, watermarks, pressure response."""

import pytest

from umpa.page_cache import FreePageCache, StillMapped
from umpa.provider import FrameProvider, SizeClass
from umpa.vmem import LARGE_PAGE_PAGES, PAGE_SIZE, PageTable, PhysicalStore


def make_cache(frames: int = 4096, **kw):
    store = PhysicalStore(frames)
    provider = FrameProvider(store)
    pt = PageTable(store)
    cache = FreePageCache(provider, pt, **kw)
    return cache, provider, pt


def test_take_from_empty_reports_shortfall():
    cache, _, _ = make_cache()
    frames, shortfall = cache.take(5)
    assert frames == []
    assert shortfall == 5
    with pytest.raises(ValueError):
        cache.take(0)


def test_reuse_is_lifo():
    cache, provider, _ = make_cache()
    a, b, c = provider.fault_grant(3)
    cache.put([a, b, c])
    frames, shortfall = cache.take(2)
    assert frames == [c, b]  # most recently freed first
    assert shortfall == 0
    frames, shortfall = cache.take(5)
    assert frames == [a]
    assert shortfall == 4


def test_cached_frames_keep_their_bytes():
    """Intra-process recycling skips re-zeroing on purpose."""
    cache, provider, _ = make_cache()
    f = provider.fault_grant(1)[0]
    provider.store.write(f, 0, b"stale but mine")
    cache.put([f])
    got, _ = cache.take(1)
    assert got == [f]
    assert provider.store.read(f, 0, 14) == b"stale but mine"


def test_put_rejects_mapped_frames():
    cache, provider, pt = make_cache()
    f = provider.fault_grant(1)[0]
    pt.map_page(10, f)
    with pytest.raises(StillMapped):
        cache.put([f])
    pt.unmap_page(10)
    cache.put([f])  # fine once unmapped


def test_put_rejects_large_run_with_any_page_mapped():
    cache, provider, pt = make_cache()
    req = provider.request_frames(1, SizeClass.LARGE)
    provider.pump_until(req)
    base = req.frames[0]
    pt.map_page(10, base + 100)  # one page in the middle of the run
    with pytest.raises(StillMapped):
        cache.put([base], SizeClass.LARGE)


def test_put_spills_above_high_watermark():
    cache, provider, _ = make_cache(low_watermark=2, high_watermark=8)
    frames = provider.fault_grant(12)
    cache.put(frames)
    assert cache.pages == 8
    # the cold end (earliest puts) went back to the provider
    assert provider.free_pages == 4096 - 8
    hot, _ = cache.take(8)
    assert hot == list(reversed(frames[4:]))


def test_large_runs_count_as_512_page_equivalents():
    cache, provider, _ = make_cache(high_watermark=512)
    req = provider.request_frames(1, SizeClass.LARGE)
    provider.pump_until(req)
    cache.put(req.frames, SizeClass.LARGE)
    assert cache.pages == 512
    assert cache.large_count == 1
    # one more small page tips it over; smalls are trimmed first
    s = provider.fault_grant(1)
    cache.put(s)
    assert cache.pages == 512
    assert cache.small_count == 0
    assert cache.large_count == 1


def test_take_large_only_returns_whole_runs():
    cache, provider, _ = make_cache()
    small = provider.fault_grant(600)  # more than 512 loose pages
    cache.put(small)
    frames, shortfall = cache.take(1, SizeClass.LARGE)
    assert frames == []
    assert shortfall == 1
    req = provider.request_frames(1, SizeClass.LARGE)
    provider.pump_until(req)
    cache.put(req.frames, SizeClass.LARGE)
    frames, shortfall = cache.take(1, SizeClass.LARGE)
    assert frames == req.frames
    assert shortfall == 0


def test_pressure_severity_mapping():
    cache, provider, _ = make_cache(low_watermark=16, high_watermark=64)
    cache.put(provider.fault_grant(100))
    from umpa.provider import Severity

    # put already trimmed to high; advisory is then a no-op
    assert cache.pages == 64
    assert cache.on_pressure(Severity.ADVISORY) == 0
    assert cache.on_pressure(Severity.URGENT) == 48
    assert cache.pages == 16
    assert cache.on_pressure(Severity.CRITICAL, 10) == 10
    assert cache.pages == 6
    assert cache.on_pressure(Severity.CRITICAL) == 6
    assert cache.pages == 0
    assert provider.free_pages == 4096


def test_flush_releases_everything():
    cache, provider, _ = make_cache()
    cache.put(provider.fault_grant(20))
    req = provider.request_frames(1, SizeClass.LARGE)
    provider.pump_until(req)
    cache.put(req.frames, SizeClass.LARGE)
    assert cache.flush() == 20 + 512
    assert cache.pages == 0
    assert provider.free_pages == 4096
    assert provider.conservation_holds()


def test_set_watermarks_trims_and_validates():
    cache, provider, _ = make_cache()
    cache.put(provider.fault_grant(100))
    cache.set_watermarks(8, 32)
    assert cache.pages == 32
    with pytest.raises(ValueError):
        cache.set_watermarks(10, 5)
    with pytest.raises(ValueError):
        FreePageCache(provider, low_watermark=-1, high_watermark=5, register=False)


def test_cache_answers_provider_pressure_automatically():
    """End to end: a dry pool pulls frames back out of the cache."""
    store = PhysicalStore(1024)
    provider = FrameProvider(store)
    cache = FreePageCache(provider, low_watermark=16, high_watermark=4096)
    cache.put(provider.fault_grant(1000))
    assert provider.free_pages == 24
    req = provider.request_frames(200)
    provider.pump_until(req)
    assert req.delivered == 200
    severities = [t[1] for t in provider.trace if t[0] == "pressure"]
    assert severities == [1, 2]  # advisory did nothing, urgent freed the rest
    assert provider.conservation_holds()


def test_no_refill_requests_by_default():
    cache, provider, _ = make_cache(low_watermark=32)
    cache.take(4)
    assert not any(t[0] == "request" for t in provider.trace)


def test_refill_async_tops_up_to_low_watermark():
    cache, provider, _ = make_cache(low_watermark=32, refill_async=True)
    frames, shortfall = cache.take(1)
    assert shortfall == 1
    reqs = [t for t in provider.trace if t[0] == "request"]
    assert len(reqs) == 1 and reqs[0][2] == 32
    provider.pump(1)
    frames, shortfall = cache.take(1)
    assert shortfall == 0
    assert cache.pages == 31
    # cached refill frames arrive zeroed, like any delivery
    assert provider.store.frame_bytes(frames[0]) == bytes(PAGE_SIZE)


def test_refill_does_not_stack_requests():
    cache, provider, _ = make_cache(low_watermark=32, refill_async=True)
    cache.take(1)
    cache.take(1)
    cache.take(1)
    reqs = [t for t in provider.trace if t[0] == "request"]
    assert len(reqs) == 1  # one pending refill at a time

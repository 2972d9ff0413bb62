"""Cost model: band lookup, calibration constants, ledger accounting."""

import math

import pytest

from umpa.cost_model import (
    ASYNC_CATEGORIES,
    BAND_EDGES,
    CATEGORIES,
    CostLedger,
    CostProfile,
    band_index,
    builtin_profiles,
    charge_fault_run,
    charge_map_units,
    get_profile,
    load_profile,
    overhead_percent,
    pages_for,
    resolve_profile,
)

# Calibration table, cycles per 4 KiB page by block-size band.  These are
# the numbers the whole package is built around; if they drift, every
# experiment changes meaning.
CALIBRATION = {
    ("windows7_x64", "paged"): (2367.0, 2286.0, 2994.0, 2841.0),
    ("windows7_x64", "nonpaged"): (14.51, 81.37, 216.2, 229.9),
    ("linux_2_6_32", "paged"): (2847.0, 3275.0, 6353.0, 6597.0),
    ("linux_2_6_32", "nonpaged"): (15.83, 14.53, 113.4, 115.9),
}

# One representative block size strictly inside each band plus the band's
# inclusive upper edge.
BAND_SAMPLES = (
    (0, 4096, 16 * 1024),
    (1, 64 * 1024, 1024 * 1024),
    (2, 8 * 1024 * 1024, 16 * 1024 * 1024),
    (3, 64 * 1024 * 1024, 512 * 1024 * 1024),
)


@pytest.mark.parametrize("profile_name", ["windows7_x64", "linux_2_6_32"])
@pytest.mark.parametrize("kind", ["paged", "nonpaged"])
@pytest.mark.parametrize("band,inside,edge", BAND_SAMPLES)
def test_calibration_constants(profile_name, kind, band, inside, edge):
    """All 16 (system, kind, band) points return the calibrated constant."""
    profile = get_profile(profile_name)
    expected = CALIBRATION[(profile_name, kind)][band]
    lookup = profile.paged_per_page if kind == "paged" else profile.nonpaged_per_page
    assert lookup(inside) == expected
    assert lookup(edge) == expected


@pytest.mark.parametrize(
    "size,expected",
    [
        (1, 0),
        (4096, 0),
        (16 * 1024, 0),
        (16 * 1024 + 1, 1),
        (1024 * 1024, 1),
        (1024 * 1024 + 1, 2),
        (16 * 1024 * 1024, 2),
        (16 * 1024 * 1024 + 1, 3),
        (512 * 1024 * 1024, 3),
        # beyond the table: clamp, no extrapolation
        (512 * 1024 * 1024 + 1, 3),
        (4 * 1024 * 1024 * 1024, 3),
    ],
)
def test_band_index_edges_inclusive(size, expected):
    assert band_index(size) == expected


@pytest.mark.parametrize("bad", [0, -1, -4096])
def test_band_index_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        band_index(bad)


def test_band_edges_are_the_documented_four():
    assert BAND_EDGES == (16 * 1024, 1024 * 1024, 16 * 1024 * 1024, 512 * 1024 * 1024)


@pytest.mark.parametrize(
    "size,pages",
    [(1, 1), (4095, 1), (4096, 1), (4097, 2), (8192, 2), (2 * 1024 * 1024, 512)],
)
def test_pages_for(size, pages):
    assert pages_for(size) == pages


def test_pages_for_rejects_nonpositive():
    with pytest.raises(ValueError):
        pages_for(0)


def test_scalar_costs():
    """Fixed per-event costs shared by both built-in profiles."""
    for profile in builtin_profiles().values():
        assert profile.zero_cycles_per_page == 800.0
        assert profile.copy_cycles_per_byte == 0.25
        assert profile.touch_cycles_per_page == 250.0
        assert profile.pte_write_cycles == 14.0
        assert profile.node_splice_cycles == 40.0
        assert profile.upcall_fixed_cycles == 3000.0
        assert profile.base_walk_cycles == 40.0
        assert profile.nested_walk_multiplier == 1.4


def test_walk_cycles_nested_multiplier():
    profile = get_profile("windows7_x64")
    assert profile.walk_cycles() == 40.0
    assert profile.walk_cycles(nested=True) == 56.0


@pytest.mark.parametrize(
    "profile_name,expected",
    [
        (
            "windows7_x64",
            (
                16212.887663680218,
                2709.389209782475,
                1284.8288621646625,
                1135.7546759460636,
            ),
        ),
        (
            "linux_2_6_32",
            (
                17884.838913455464,
                22439.573296627666,
                5502.292768959435,
                5591.97584124245,
            ),
        ),
    ],
)
def test_overhead_percent_values(profile_name, expected):
    """Fault-vs-map overhead, 100*(paged-nonpaged)/nonpaged, per band."""
    profile = get_profile(profile_name)
    for (_, inside, _), want in zip(BAND_SAMPLES, expected):
        assert overhead_percent(profile, inside) == want


def test_profile_validation():
    with pytest.raises(ValueError):
        CostProfile(name="bad", paged=(1.0, 2.0), nonpaged=(1.0, 2.0, 3.0, 4.0))
    with pytest.raises(ValueError):
        CostProfile(
            name="bad",
            paged=(1.0, 2.0, 3.0, 0.0),
            nonpaged=(1.0, 2.0, 3.0, 4.0),
        )


def test_get_profile_unknown():
    with pytest.raises(KeyError):
        get_profile("solaris")


# ---------------------------------------------------------------- ledger


def test_ledger_starts_empty():
    ledger = CostLedger()
    assert ledger.total_cycles() == 0.0
    assert ledger.process_cycles() == 0.0
    assert ledger.events == []
    for cat in CATEGORIES:
        assert ledger.cycles(cat) == 0.0
        assert ledger.units(cat) == 0


def test_ledger_charge_accumulates():
    ledger = CostLedger()
    ledger.charge("map", 29.02, units=2)
    ledger.charge("map", 14.51, units=1)
    ledger.charge("upcall", 3000.0)
    assert ledger.cycles("map") == pytest.approx(43.53)
    assert ledger.units("map") == 3
    assert ledger.upcall_count == 1
    assert len(ledger.events) == 3


def test_ledger_rejects_bad_charges():
    ledger = CostLedger()
    with pytest.raises(KeyError):
        ledger.charge("rent", 1.0)
    with pytest.raises(ValueError):
        ledger.charge("map", -1.0)
    with pytest.raises(ValueError):
        ledger.charge("map", 1.0, units=-1)


def test_process_cycles_excludes_async_zeroing():
    """Zeroing is kernel-side background work, not process latency."""
    assert ASYNC_CATEGORIES == ("zero",)
    ledger = CostLedger()
    ledger.charge("zero", 800.0 * 16, units=16)
    ledger.charge("map", 14.51 * 16, units=16)
    assert ledger.total_cycles() == pytest.approx(800.0 * 16 + 14.51 * 16)
    assert ledger.process_cycles() == pytest.approx(14.51 * 16)
    # caller can widen or narrow the exclusion
    assert ledger.process_cycles(exclude=()) == ledger.total_cycles()
    assert ledger.process_cycles(exclude=("zero", "map")) == 0.0


def test_copy_bytes_property_counts_units():
    ledger = CostLedger()
    ledger.charge("copy", 0.25 * 1000, units=1000)
    ledger.charge("copy", 0.25 * 24, units=24)
    assert ledger.copy_bytes == 1024


def test_snapshot_delta():
    ledger = CostLedger()
    ledger.charge("fault", 2367.0, units=1)
    snap = ledger.snapshot()
    ledger.charge("fault", 2367.0 * 3, units=3)
    ledger.charge("touch", 250.0 * 4, units=4)
    delta = ledger.delta_since(snap)
    assert delta["fault"] == (pytest.approx(2367.0 * 3), 3)
    assert delta["touch"] == (pytest.approx(1000.0), 4)
    assert delta["map"] == (0.0, 0)
    # snapshot is a copy, not a view
    assert snap["fault"] == (2367.0, 1)


def test_replay_consistent():
    ledger = CostLedger()
    for i in range(50):
        ledger.charge(CATEGORIES[i % len(CATEGORIES)], float(i), units=i)
    assert ledger.replay_consistent()
    # forged totals are detected
    ledger._cycles["map"] += 1.0
    assert not ledger.replay_consistent()


def test_charge_fault_run_uses_whole_block_band():
    """Faulting one page of an 8 MiB block costs the 8 MiB band rate."""
    profile = get_profile("windows7_x64")
    ledger = CostLedger()
    cyc = charge_fault_run(ledger, profile, block_size=8 * 1024 * 1024, pages=1)
    assert cyc == 2994.0
    cyc = charge_fault_run(ledger, profile, block_size=8 * 1024 * 1024, pages=2047)
    assert cyc == pytest.approx(2994.0 * 2047)
    assert ledger.cycles("fault") == pytest.approx(6131712.0)
    assert ledger.units("fault") == 2048


def test_charge_map_units_band_and_totals():
    profile = get_profile("windows7_x64")
    ledger = CostLedger()
    assert charge_map_units(ledger, profile, block_size=8192, units=2) == 29.02
    assert charge_map_units(ledger, profile, block_size=512 * 1024, units=128) == 10415.36
    assert ledger.units("map") == 130
    lin = get_profile("linux_2_6_32")
    assert charge_map_units(ledger, lin, block_size=8 * 1024 * 1024, units=4) == 453.6


# ------------------------------------------------------------- profiles


def test_load_profile_overrides(tmp_path):
    cfg = tmp_path / "tuned.profile"
    cfg.write_text(
        "# tuned variant\n"
        "base = linux_2_6_32\n"
        "name = tuned\n"
        "paged = 100, 200, 300, 400\n"
        "upcall_fixed_cycles = 5000\n"
    )
    profile = load_profile(cfg)
    assert profile.name == "tuned"
    assert profile.paged == (100.0, 200.0, 300.0, 400.0)
    # untouched fields keep the base profile's values
    assert profile.nonpaged == (15.83, 14.53, 113.4, 115.9)
    assert profile.upcall_fixed_cycles == 5000.0


def test_load_profile_name_defaults_to_stem(tmp_path):
    cfg = tmp_path / "mysys.profile"
    cfg.write_text("nonpaged = 1, 2, 3, 4\n")
    profile = load_profile(cfg)
    assert profile.name == "mysys"
    assert profile.paged == (2367.0, 2286.0, 2994.0, 2841.0)


@pytest.mark.parametrize(
    "body,msg",
    [
        ("paged = 1, 2, 3\n", "comma-separated"),
        ("pagedd = 1, 2, 3, 4\n", "unknown profile key"),
        ("upcall_fixed_cycles = 1\nupcall_fixed_cycles = 2\n", "duplicate"),
        ("just some words\n", "key = value"),
    ],
)
def test_load_profile_rejects_malformed(tmp_path, body, msg):
    cfg = tmp_path / "bad.profile"
    cfg.write_text(body)
    with pytest.raises(ValueError, match=msg):
        load_profile(cfg)


def test_resolve_profile(tmp_path):
    assert resolve_profile("windows7_x64").name == "windows7_x64"
    cfg = tmp_path / "x.profile"
    cfg.write_text("base = windows7_x64\n")
    assert resolve_profile(str(cfg)).paged == (2367.0, 2286.0, 2994.0, 2841.0)
    with pytest.raises(KeyError):
        resolve_profile("no_such_profile_or_file")


def test_overhead_percent_is_formula():
    profile = CostProfile(
        name="synthetic",
        paged=(300.0, 300.0, 300.0, 300.0),
        nonpaged=(100.0, 100.0, 100.0, 100.0),
    )
    assert overhead_percent(profile, 4096) == 200.0
    assert math.isclose(overhead_percent(profile, 512 * 1024 * 1024), 200.0)

"""Benchmark harness: engines, experiments, CSV output, CLI."""

import io

import pytest

from umpa.bench import (
    DEFAULT_SWEEP,
    MAX_SIM_BYTES,
    SCALING_SWEEP,
    ConfigError,
    ExperimentSpec,
    FaultedBaselineEngine,
    ResultRow,
    UmpaEngine,
    build_engine,
    run_all,
    run_experiment,
    write_csv,
)
from umpa.cli import main
from umpa.cost_model import get_profile
from umpa.vmem import PAGE_SIZE

WIN = get_profile("windows7_x64")


def small_spec(**kw) -> ExperimentSpec:
    defaults = dict(name="test", profile=WIN, sizes=(4096, 16384),
                    workload_ops=250, batch_n=300)
    defaults.update(kw)
    return ExperimentSpec(**defaults)


def rows_by(rows, **filters):
    def match(r):
        return all(getattr(r, k) == v for k, v in filters.items())
    return [r for r in rows if match(r)]


def one_value(rows, **filters) -> float:
    found = rows_by(rows, **filters)
    assert len(found) == 1, f"expected one row for {filters}, got {found}"
    return found[0].value


# ----------------------------------------------------------------- spec


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(name="x", profile=WIN, iterations=0)
    with pytest.raises(ConfigError):
        ExperimentSpec(name="x", profile=WIN, engines=("umpa", "dlmalloc"))
    with pytest.raises(ConfigError):
        ExperimentSpec(name="x", profile=WIN, sizes=(4096, -1))


def test_sweep_constants():
    assert DEFAULT_SWEEP[0] == 4096
    assert DEFAULT_SWEEP[-1] == MAX_SIM_BYTES == 512 * 1024 * 1024
    assert SCALING_SWEEP == tuple(4096 * 2 ** i for i in range(9))


def test_oversized_sweep_rejected():
    spec = small_spec(sizes=(MAX_SIM_BYTES + 1,))
    with pytest.raises(ConfigError):
        run_experiment("fault", spec)


# ---------------------------------------------------------------- engines


def test_umpa_engine_warmup_is_off_ledger():
    engine = UmpaEngine(WIN, 2048, warm_pages=512)
    assert engine.ledger.total_cycles() == 0.0
    assert engine.cache.pages == 512
    assert engine.conserved()


def test_umpa_engine_warm_alloc_has_no_upcall_or_zeroing():
    engine = UmpaEngine(WIN, 2048, warm_pages=512)
    h = engine.alloc(64 * 1024)
    assert engine.ledger.upcall_count == 0
    assert engine.ledger.units("zero") == 0
    assert engine.ledger.cycles("map") == pytest.approx(81.37 * 16)
    engine.free(h)
    engine.teardown()


def test_umpa_engine_touch_charges_touch_only():
    engine = UmpaEngine(WIN, 2048, warm_pages=64)
    h = engine.alloc(8 * PAGE_SIZE)
    snap = engine.ledger.snapshot()
    engine.touch(h)
    delta = engine.ledger.delta_since(snap)
    assert delta["touch"] == (2000.0, 8)
    assert all(delta[c] == (0.0, 0) for c in delta if c != "touch")
    engine.free(h)


def test_umpa_engine_teardown_rejects_leaks():
    engine = UmpaEngine(WIN, 2048)
    engine.alloc(100)
    with pytest.raises(RuntimeError):
        engine.teardown()


def test_baseline_alloc_is_lazy():
    engine = FaultedBaselineEngine(WIN, 2048)
    h = engine.alloc(8 * PAGE_SIZE)
    assert engine.ledger.total_cycles() == 0.0
    assert engine.provider.owned_pages == 0  # nothing faulted yet
    engine.free(h)
    engine.teardown()


def test_baseline_first_touch_faults_at_footprint_band():
    engine = FaultedBaselineEngine(WIN, 2048)
    h = engine.alloc(2 * PAGE_SIZE)
    engine.touch(h)
    assert engine.ledger.cycles("fault") == 2367.0 * 2
    assert engine.ledger.units("fault") == 2
    # second touch finds the pages mapped; only touch cycles accrue
    snap = engine.ledger.snapshot()
    engine.touch(h)
    assert engine.ledger.delta_since(snap)["fault"] == (0.0, 0)
    engine.free(h)
    assert engine.provider.owned_pages == 0  # straight back to the kernel
    engine.teardown()


def test_baseline_realloc_is_alloc_copy_free():
    engine = FaultedBaselineEngine(WIN, 4096)
    h = engine.alloc(2 * PAGE_SIZE)
    engine.touch(h)
    old_base = h.base_addr
    h2 = engine.realloc(h, 4 * PAGE_SIZE)
    assert h2.base_addr != old_base
    assert not h.live
    assert engine.ledger.copy_bytes == 2 * PAGE_SIZE
    engine.free(h2)
    engine.teardown()


def test_build_engine_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        build_engine("jemalloc", WIN, 1024)


# ------------------------------------------------------------ experiments


def test_fault_experiment_reproduces_band_constants():
    rows = run_experiment("fault", small_spec())
    assert one_value(rows, engine="faulted_baseline", size_bytes=4096) == 2367.0
    assert one_value(rows, engine="umpa", size_bytes=4096) == 14.51
    # 16 KiB is still band 0 (inclusive edge)
    assert one_value(rows, engine="faulted_baseline", size_bytes=16384) == 2367.0
    rows = run_experiment("fault", small_spec(sizes=(65536,)))
    assert one_value(rows, engine="faulted_baseline", size_bytes=65536) == 2286.0
    assert one_value(rows, engine="umpa", size_bytes=65536) == 81.37


def test_overhead_experiment_matches_profile_formula():
    rows = run_experiment("overhead", small_spec(sizes=(4096, 65536)))
    assert one_value(rows, metric="overhead_percent",
                     size_bytes=4096) == 16212.887663680218
    assert one_value(rows, metric="overhead_percent",
                     size_bytes=65536) == 2709.389209782475
    # block-level totals behind the ratio
    assert one_value(rows, engine="faulted_baseline", size_bytes=65536,
                     metric="fault_cycles") == 2286.0 * 16
    assert one_value(rows, engine="umpa", size_bytes=65536,
                     metric="map_cycles") == pytest.approx(81.37 * 16)


def test_overhead_without_baseline_has_no_ratio():
    rows = run_experiment("overhead", small_spec(engines=("umpa",)))
    assert rows_by(rows, metric="overhead_percent") == []


def test_scaling_has_no_wall_rows_by_default():
    spec = small_spec()
    rows = run_experiment("scaling", spec)
    assert rows_by(rows, metric="wall_seconds") == []
    assert len(rows_by(rows, metric="cycles_total")) == 4  # 2 sizes x 2 engines
    timed = run_experiment("scaling", small_spec(timings=True, iterations=3))
    walls = rows_by(timed, metric="wall_seconds")
    assert len(walls) == 4
    assert all(r.value >= 0 for r in walls)


def test_scaling_baseline_grows_with_size():
    rows = run_experiment("scaling", small_spec(sizes=SCALING_SWEEP[:5]))
    base = [r.value for r in rows_by(rows, engine="faulted_baseline",
                                     metric="cycles_total")]
    assert base == sorted(base)
    assert base[0] == 2367.0 + 250.0  # one page: fault + touch


def test_speedup_positive_in_every_bucket():
    rows = run_experiment("speedup", small_spec())
    speedups = rows_by(rows, metric="speedup")
    assert speedups, "no speedup rows produced"
    assert all(r.value > 1.0 for r in speedups)
    ops = sum(r.value for r in rows_by(rows, metric="ops"))
    assert ops >= 250  # frees forced by the live-set cap add extra ops


def test_batch_experiment_single_upcall_and_same_layout():
    rows = run_experiment("batch", small_spec())
    assert one_value(rows, engine="umpa_batch", metric="upcalls") == 1
    loop_upcalls = one_value(rows, engine="umpa_loop", metric="upcalls")
    assert loop_upcalls > 1
    ratio = one_value(rows, metric="batch_to_loop_ratio")
    assert 0 < ratio < 0.5
    assert one_value(rows, metric="layout_equivalent") == 1
    assert one_value(rows, metric="count") == 300


def test_realloc_experiment_values():
    rows = run_experiment("realloc", small_spec())
    assert one_value(rows, engine="faulted_baseline",
                     metric="copy_bytes") == 131072
    assert one_value(rows, engine="umpa", metric="copy_bytes") == 0
    assert one_value(rows, engine="umpa",
                     metric="shrink_pages_to_cache") == 32
    assert one_value(rows, metric="speedup") == 40.67838269632542


def test_run_experiment_unknown_name():
    with pytest.raises(ConfigError):
        run_experiment("warp_drive", small_spec())


def test_run_all_is_deterministic():
    spec_a = small_spec(seed=11)
    spec_b = small_spec(seed=11)
    assert run_all(spec_a) == run_all(spec_b)


def test_seed_changes_the_speedup_workload():
    a = run_experiment("speedup", small_spec(seed=1))
    b = run_experiment("speedup", small_spec(seed=2))
    assert a != b


# ------------------------------------------------------------------- csv


def test_csv_schema_and_formatting():
    rows = [
        ResultRow("fault", "umpa", 4096, "cycles_per_page", 14.51, "cycles/page"),
        ResultRow("batch", "both", 64, "layout_equivalent", True, "bool"),
        ResultRow("batch", "both", 64, "count", 300, "count"),
    ]
    buf = io.StringIO()
    write_csv(rows, buf)
    text = buf.getvalue()
    lines = text.splitlines(keepends=True)
    assert lines[0] == "experiment,engine,size_bytes,metric,value,unit\n"
    assert lines[1] == "fault,umpa,4096,cycles_per_page,14.51,cycles/page\n"
    assert lines[2] == "batch,both,64,layout_equivalent,1,bool\n"
    assert lines[3] == "batch,both,64,count,300,count\n"
    assert "\r" not in text
    # float formatting must round-trip
    assert float(lines[1].split(",")[4]) == 14.51


# ------------------------------------------------------------------- cli


def test_cli_writes_csv_to_stdout(capsys):
    code = main(["--exp", "fault", "--sizes", "4096"])
    assert code == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == "experiment,engine,size_bytes,metric,value,unit"
    assert "fault,faulted_baseline,4096,cycles_per_page,2367.0,cycles/page" in lines
    assert "fault,umpa,4096,cycles_per_page,14.51,cycles/page" in lines


def test_cli_writes_file(tmp_path):
    out = tmp_path / "results.csv"
    code = main(["--exp", "fault", "--sizes", "4096", "--out", str(out)])
    assert code == 0
    data = out.read_bytes()
    assert data.startswith(b"experiment,engine,size_bytes,metric,value,unit\n")
    assert b"\r" not in data


@pytest.mark.parametrize(
    "argv",
    [
        ["--exp", "nonsense"],
        ["--sizes", "abc", "--exp", "fault"],
        ["--sizes", "", "--exp", "fault"],
        ["--sizes", "0", "--exp", "fault"],
        ["--profile", "beos_r5", "--exp", "fault", "--sizes", "4096"],
        ["--iterations", "0", "--exp", "fault", "--sizes", "4096"],
    ],
)
def test_cli_rejects_bad_arguments(argv, capsys):
    assert main(argv) == 2


def test_cli_custom_profile_file(tmp_path, capsys):
    cfg = tmp_path / "flat.profile"
    cfg.write_text("paged = 1000, 1000, 1000, 1000\n")
    code = main(["--exp", "fault", "--sizes", "4096",
                 "--profile", str(cfg)])
    assert code == 0
    out = capsys.readouterr().out
    assert "fault,faulted_baseline,4096,cycles_per_page,1000.0,cycles/page" in out


def test_cli_repeat_runs_are_byte_identical(capsys):
    main(["--exp", "batch", "--batch-n", "300"])
    first = capsys.readouterr().out
    main(["--exp", "batch", "--batch-n", "300"])
    second = capsys.readouterr().out
    assert first == second

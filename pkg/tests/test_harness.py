import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import CALIBRATED_ARCH, FIXTURES, REF_MK, REF_PARAMS
from slicedconv import ConvParams, MkInfo, load_arch, load_suite, out_shape
from slicedconv.harness import (CSV_COLUMNS, ConvCase, format_csv, init_tensors,
                                max_relative_error, parse_case, run_suite)


def test_parse_resnet_stem_record():
    rec = {"id": "stem", "ic": 3, "oc": 64, "ih": 224, "iw": 224,
           "fh": 7, "fw": 7, "stride": 2, "pad": 3}
    case = parse_case(rec, "x")
    assert out_shape(case.params) == (112, 112)
    assert case.repeat == 30


def test_parse_non_square_filter():
    case = parse_case({"ic": 2, "ih": 8, "iw": 8, "oc": 4, "fh": 1, "fw": 7}, "x")
    assert (case.params.fh, case.params.fw) == (1, 7)


def test_parse_rejects_grouped():
    with pytest.raises(ValueError, match="grouped"):
        parse_case({"ic": 4, "ih": 8, "iw": 8, "oc": 4, "fh": 3, "fw": 3,
                    "groups": 2}, "x")


def test_parse_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown"):
        parse_case({"ic": 4, "ih": 8, "iw": 8, "oc": 4, "fh": 3, "fw": 3,
                    "stridee": 2}, "x")


def test_parse_rejects_csv_hostile_id():
    with pytest.raises(ValueError, match="comma"):
        parse_case({"id": "a,b", "ic": 4, "ih": 8, "iw": 8, "oc": 4,
                    "fh": 3, "fw": 3}, "x")


def test_load_suite_reports_bad_records(tmp_path):
    suite = tmp_path / "s.jsonl"
    suite.write_text(
        '{"id": "ok", "ic": 2, "ih": 6, "iw": 6, "oc": 4, "fh": 3, "fw": 3}\n'
        'not json at all\n'
        '{"id": "grp", "ic": 2, "ih": 6, "iw": 6, "oc": 4, "fh": 3, "fw": 3, "groups": 4}\n'
        '{"id": "bad", "ic": 2, "ih": 2, "iw": 6, "oc": 4, "fh": 3, "fw": 3}\n')
    cases, errors = load_suite(suite)
    assert [c.id for c in cases] == ["ok"]
    assert len(errors) == 3
    assert any("grp" in e for e in errors)


def test_init_tensors_deterministic():
    case = ConvCase(id="a", params=REF_PARAMS, repeat=1)
    x1, f1 = init_tensors(case, seed=7, index=3)
    x2, f2 = init_tensors(case, seed=7, index=3)
    assert np.array_equal(x1, x2) and np.array_equal(f1, f2)
    x3, _ = init_tensors(case, seed=8, index=3)
    assert not np.array_equal(x1, x3)
    assert x1.dtype == np.float32 and np.all(np.abs(x1) <= 1.0)


def test_max_relative_error_normalization():
    ref = np.array([0.0, 2.0], dtype=np.float32)
    got = np.array([0.0002, 2.0], dtype=np.float32)
    assert max_relative_error(got, ref) == pytest.approx(1e-4, rel=1e-3)


def test_run_suite_smoke_and_csv_stability():
    cases, errors = load_suite(FIXTURES / "smoke.jsonl")
    assert not errors
    mk = MkInfo(n_win=16, n_f=8)
    arch = load_arch(FIXTURES / "intel.toml")
    r1, _ = run_suite(cases, arch, mk, seed=11, verify_only=True)
    r2, _ = run_suite(cases, arch, mk, seed=11, verify_only=True)
    assert all(r.correct for r in r1)
    stable1 = _non_timing(format_csv(r1))
    stable2 = _non_timing(format_csv(r2))
    assert stable1 == stable2
    r3, _ = run_suite(cases, arch, mk, seed=12, verify_only=True)
    assert _non_timing(format_csv(r3)) != stable1  # the seed matters


def test_run_suite_parallel_matches_serial():
    cases, _ = load_suite(FIXTURES / "smoke.jsonl")
    mk = MkInfo(n_win=16, n_f=8)
    arch = load_arch(FIXTURES / "intel.toml")
    serial, _ = run_suite(cases, arch, mk, seed=5, verify_only=True, jobs=1)
    parallel, _ = run_suite(cases, arch, mk, seed=5, verify_only=True, jobs=4)
    assert _non_timing(format_csv(serial)) == _non_timing(format_csv(parallel))


def test_run_suite_records_infeasible_case():
    from slicedconv import ArchInfo
    p = ConvParams(n=1, ic=8, ih=30, iw=30, oc=32, fh=7, fw=7)
    good = ConvParams(n=1, ic=2, ih=8, iw=8, oc=4, fh=3, fw=3)
    cases = [ConvCase(id="toobig", params=p, repeat=1),
             ConvCase(id="fine", params=good, repeat=1)]
    arch = ArchInfo(l1_bytes=2048, l2_bytes=4096, l3_bytes=0)
    reports, _ = run_suite(cases, arch, MkInfo(n_win=16, n_f=16),
                           verify_only=True)
    assert not reports[0].correct and reports[0].schedule == "-"
    assert reports[1].correct  # the run continued past the failure


def test_run_suite_divisible_case_single_region():
    cases, _ = load_suite(FIXTURES / "smoke.jsonl")
    arch = load_arch(FIXTURES / "intel.toml")
    reports, _ = run_suite(cases, arch, MkInfo(n_win=16, n_f=8), seed=0,
                           verify_only=True)
    by_id = {r.id: r for r in reports}
    assert by_id["divisible_3x3"].regions == 1
    assert by_id["pointwise_8x8"].regions == 1


def test_run_suite_timed_mode_excludes_warmup():
    p = ConvParams(n=1, ic=2, ih=8, iw=8, oc=4, fh=3, fw=3)
    case = ConvCase(id="timed", params=p, repeat=2)
    reports, _ = run_suite([case], CALIBRATED_ARCH, MkInfo(n_win=4, n_f=4),
                           seed=1, verify_only=False)
    r = reports[0]
    assert r.correct and r.gflops > 0 and np.isfinite(r.gflops)
    assert r.seconds > 0


def test_reference_case_region_report():
    case = ConvCase(id="ref75", params=REF_PARAMS, repeat=1)
    reports, regions = run_suite([case], CALIBRATED_ARCH, REF_MK, seed=0,
                                 verify_only=True, collect_regions=True)
    assert reports[0].correct
    assert reports[0].regions == 3
    lens = sorted(r.spatial_len for r in regions["ref75"])
    assert lens == [9, 48, 5568]
    assert (reports[0].nc, reports[0].k2, reports[0].k3) == (32, 32, 87)
    assert reports[0].schedule == "IS"
    assert reports[0].gflops > 0 and np.isfinite(reports[0].gflops)


def _non_timing(csv_text):
    rows = []
    for line in csv_text.strip().splitlines():
        cells = line.split(",")
        rows.append([c for i, c in enumerate(cells)
                     if i not in (CSV_COLUMNS.index("gflops"),
                                  CSV_COLUMNS.index("seconds"))])
    return rows


def _run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "slicedconv.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def test_cli_end_to_end(tmp_path):
    out_csv = tmp_path / "report.csv"
    regions_json = tmp_path / "regions.json"
    proc = _run_cli(["run", "--suite", str(FIXTURES / "smoke.jsonl"),
                     "--arch", str(FIXTURES / "intel.toml"),
                     "--nwin", "16", "--nf", "8", "--verify-only",
                     "--seed", "3", "--out", str(out_csv),
                     "--dump-regions", str(regions_json)], cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 7
    dump = json.loads(regions_json.read_text())
    assert set(dump) == {"pointwise_8x8", "divisible_3x3", "tail_3x3",
                         "strided_pad", "dilated_rect", "batch_2"}


def test_cli_input_error_exit_codes(tmp_path):
    proc = _run_cli(["run", "--suite", "missing.jsonl",
                     "--arch", str(FIXTURES / "intel.toml"),
                     "--nwin", "16", "--nf", "8"], cwd=tmp_path)
    assert proc.returncode == 2

    bad_suite = tmp_path / "bad.jsonl"
    bad_suite.write_text("this is not json\n")
    proc = _run_cli(["run", "--suite", str(bad_suite),
                     "--arch", str(FIXTURES / "intel.toml"),
                     "--nwin", "16", "--nf", "8"], cwd=tmp_path)
    assert proc.returncode == 2

    mixed = tmp_path / "mixed.jsonl"
    mixed.write_text(
        '{"id": "ok", "ic": 2, "ih": 6, "iw": 6, "oc": 4, "fh": 3, "fw": 3, "repeat": 1}\n'
        'garbage\n')
    proc = _run_cli(["run", "--suite", str(mixed),
                     "--arch", str(FIXTURES / "intel.toml"),
                     "--nwin", "4", "--nf", "4", "--verify-only"], cwd=tmp_path)
    assert proc.returncode == 2  # skipped record -> nonzero at end


def test_cli_correctness_failure_exit_code(rng):
    # a garbage microkernel hook must surface as exit code 1
    from slicedconv import clear_microkernel_hook, external_microkernel_hook
    from slicedconv.cli import main

    cases_ok = main(["run", "--suite", str(FIXTURES / "smoke.jsonl"),
                     "--arch", str(FIXTURES / "intel.toml"),
                     "--nwin", "16", "--nf", "8", "--verify-only",
                     "--out", "/dev/null"])
    assert cases_ok == 0

    external_microkernel_hook(lambda pin, pf, acc, k, nw, nf, s: None)
    try:
        rc = main(["run", "--suite", str(FIXTURES / "smoke.jsonl"),
                   "--arch", str(FIXTURES / "intel.toml"),
                   "--nwin", "4", "--nf", "4", "--verify-only",
                   "--out", "/dev/null"])
    finally:
        clear_microkernel_hook()
    assert rc == 1

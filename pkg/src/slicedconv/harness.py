"""Batch driver: load convolution suites, run engine vs oracle, report.

Suite format is JSON Lines, one object per convolution:

    {"id": "resnet_stem", "n": 1, "ic": 3, "ih": 224, "iw": 224,
     "oc": 64, "fh": 7, "fw": 7, "stride": 2, "pad": 3, "repeat": 10}

Scalar "stride", "pad" and "dil" expand to both axes; _h/_w variants set
them independently. Defaults: n=1, stride=1, dil=1, pad=0, repeat=30.
Records with "groups" != 1 are rejected (grouped convolutions are out of
scope); malformed records are reported and skipped.

Tensors are initialized uniform [-1, 1] in f32 from NumPy's PCG64 generator
seeded with (seed, case_index), input tensor drawn before the filter tensor,
so reports are reproducible bit-for-bit for a given suite and seed.

Correctness compares the engine against the f64 naive oracle; the per-case
metric is max |engine - oracle| normalized by the oracle's largest absolute
value, checked on every element against the 1e-4 engine tolerance.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .arch import ArchInfo, MkInfo
from .engine import run_convolution
from .model import DTYPE, ConvParams, out_shape
from .reference import naive_conv
from .regions import KernelRegion

ENGINE_TOLERANCE = 1e-4

_ALLOWED_KEYS = {"id", "n", "ic", "ih", "iw", "oc", "fh", "fw",
                 "stride", "stride_h", "stride_w", "dil", "dil_h", "dil_w",
                 "pad", "pad_h", "pad_w", "repeat", "groups"}

CSV_COLUMNS = ("id", "correct", "max_rel_err", "gflops", "schedule",
               "nc", "k2", "k3", "regions", "seconds")


@dataclass(frozen=True)
class ConvCase:
    id: str
    params: ConvParams
    repeat: int = 30


@dataclass(frozen=True)
class CaseReport:
    id: str
    correct: bool
    max_rel_err: float
    gflops: float
    schedule: str
    nc: int
    k2: int
    k3: int
    regions: int
    seconds: float


def _axis_pair(rec: dict, base: str, default: int) -> tuple[int, int]:
    scalar = rec.get(base, default)
    return rec.get(f"{base}_h", scalar), rec.get(f"{base}_w", scalar)


def parse_case(rec: dict, default_id: str) -> ConvCase:
    unknown = set(rec) - _ALLOWED_KEYS
    if unknown:
        raise ValueError(f"unknown keys: {sorted(unknown)}")
    if rec.get("groups", 1) != 1:
        raise ValueError("grouped convolutions are not supported")
    for key in ("ic", "ih", "iw", "oc", "fh", "fw"):
        if key not in rec:
            raise ValueError(f"missing required key {key!r}")
    case_id = str(rec.get("id", default_id))
    if "," in case_id or "\n" in case_id:
        raise ValueError("id must not contain commas or newlines")
    sh, sw = _axis_pair(rec, "stride", 1)
    dh, dw = _axis_pair(rec, "dil", 1)
    ph, pw = _axis_pair(rec, "pad", 0)
    params = ConvParams(n=rec.get("n", 1), ic=rec["ic"], ih=rec["ih"],
                        iw=rec["iw"], oc=rec["oc"], fh=rec["fh"], fw=rec["fw"],
                        stride_h=sh, stride_w=sw, dil_h=dh, dil_w=dw,
                        pad_h=ph, pad_w=pw)
    return ConvCase(id=case_id, params=params,
                    repeat=int(rec.get("repeat", 30)))


def load_suite(path) -> tuple[list[ConvCase], list[str]]:
    """Parse a JSONL suite; returns (cases, error messages)."""
    cases, errors = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            default_id = f"case{lineno:04d}"
            rec = None
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not a JSON object")
                cases.append(parse_case(rec, default_id))
            except (ValueError, TypeError) as exc:
                rec_id = rec.get("id", default_id) if isinstance(rec, dict) else default_id
                errors.append(f"line {lineno} ({rec_id}): {exc}")
    return cases, errors


def init_tensors(case: ConvCase, seed: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic uniform [-1, 1] input and filter tensors for a case."""
    rng = np.random.default_rng([seed, index])
    p = case.params
    x = rng.uniform(-1.0, 1.0, (p.n, p.ic, p.ih, p.iw)).astype(DTYPE)
    flt = rng.uniform(-1.0, 1.0, (p.oc, p.ic, p.fh, p.fw)).astype(DTYPE)
    return x, flt


def max_relative_error(got: np.ndarray, ref: np.ndarray) -> float:
    """Largest per-element deviation, normalized by the reference magnitude."""
    scale = max(float(np.max(np.abs(ref))), np.finfo(np.float32).tiny)
    return float(np.max(np.abs(got.astype(np.float64) - ref.astype(np.float64))) / scale)


def case_flops(p: ConvParams) -> int:
    oh, ow = out_shape(p)
    return 2 * p.n * p.oc * oh * ow * p.ic * p.fh * p.fw


def _failure_report(case: ConvCase) -> CaseReport:
    # engine refused or crashed on the case; recorded, the run continues
    return CaseReport(id=case.id, correct=False, max_rel_err=float("inf"),
                      gflops=0.0, schedule="-", nc=0, k2=0, k3=0, regions=0,
                      seconds=0.0)


def run_suite(cases: list[ConvCase], arch: ArchInfo, mk: MkInfo, seed: int = 0,
              verify_only: bool = False, jobs: int = 1,
              collect_regions: bool = False
              ) -> tuple[list[CaseReport], dict[str, list[KernelRegion]]]:
    """Run every case; returns (reports, per-case regions when collected).

    Verification passes may run in parallel (jobs > 1); timing passes are
    always serialized to avoid interference.
    """

    def verify(idx: int):
        case = cases[idx]
        x, flt = init_tensors(case, seed, idx)
        t0 = time.perf_counter()
        out, info = run_convolution(x, flt, case.params, arch, mk)
        elapsed = time.perf_counter() - t0
        err = max_relative_error(out, naive_conv(x, flt, case.params))
        return err, info, elapsed

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_guard(verify), range(len(cases))))
    else:
        outcomes = [_guard(verify)(i) for i in range(len(cases))]

    reports = []
    regions_map: dict[str, list[KernelRegion]] = {}
    for idx, case in enumerate(cases):
        outcome = outcomes[idx]
        if isinstance(outcome, Exception):
            reports.append(_failure_report(case))
            continue
        err, info, verify_seconds = outcome
        if collect_regions:
            regions_map[case.id] = list(info.regions)
        if verify_only:
            mean = verify_seconds
        else:
            # The verification pass doubles as warm-up and is excluded.
            x, flt = init_tensors(case, seed, idx)
            times = []
            for _ in range(max(case.repeat, 1)):
                t0 = time.perf_counter()
                run_convolution(x, flt, case.params, arch, mk)
                times.append(time.perf_counter() - t0)
            mean = sum(times) / len(times)
        strat = info.strategy
        reports.append(CaseReport(
            id=case.id, correct=err <= ENGINE_TOLERANCE, max_rel_err=err,
            gflops=case_flops(case.params) / mean / 1e9,
            schedule=strat.schedule.value, nc=strat.nc, k2=strat.k2,
            k3=strat.k3, regions=len(info.regions), seconds=mean))
    return reports, regions_map


def _guard(fn):
    def wrapped(idx):
        try:
            return fn(idx)
        except Exception as exc:  # recorded per case, run continues
            return exc
    return wrapped


def format_csv(reports: list[CaseReport]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in reports:
        lines.append(",".join([
            r.id,
            "true" if r.correct else "false",
            f"{r.max_rel_err:.6e}",
            f"{r.gflops:.3f}",
            r.schedule,
            str(r.nc), str(r.k2), str(r.k3), str(r.regions),
            f"{r.seconds:.6f}",
        ]))
    return "\n".join(lines) + "\n"

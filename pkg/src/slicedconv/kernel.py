"""Two-level tiled macrokernel around an outer-product microkernel.

The loop nest for one region, outermost to innermost:

    batch
    channel blocks of nc                      (layer 5)
    stationary tile sets                      (layer 4)
    non-stationary tile sets                  (layer 3)
    stationary tile within its set            (layer 2)
    non-stationary tile within its set        (layer 1)
    microkernel: acc[f, w] += sum_k pf[k, f] * pi[k, w]

Under the input-stationary schedule the window-tile loops are the stationary
pair (sets of k3 tiles, input tiles packed once each when their set is
entered) and the filter-tile loops stream inside them (multipacked in sets
of k2). The weight-stationary schedule is the mirror image: filter tiles are
packed once each per k2 set and inputs are multipacked per window-tile set.

Partial sums are accumulated directly into the output tensor, which the
driver zero-initializes; an output tile is therefore touched once per
channel block. Regions write disjoint output ranges except across a channel
split, where the two partial sums combine commutatively.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .arch import ConvInfo, MkInfo
from .model import DTYPE
from .packing import pack_filter, pack_input
from .regions import KernelRegion, RegionKind
from .strategy import Schedule, TilingStrategy

_HOOK = None


def external_microkernel_hook(fn):
    """Register fn as the microkernel for Main regions; None restores built-in.

    The hook is called as fn(packed_in, packed_f, acc, k, n_win, n_f,
    strides) with two (k, n) f32 matrices, the (n_f, n_win) accumulator to
    update in place, and the byte strides of all three buffers. Results must
    match the built-in kernel within the engine tolerance.
    """
    global _HOOK
    _HOOK = fn
    return fn


def clear_microkernel_hook():
    global _HOOK
    _HOOK = None


def microkernel(packed_in: np.ndarray, packed_f: np.ndarray,
                acc: np.ndarray) -> np.ndarray:
    """acc[f, w] += sum_k packed_f[k, f] * packed_in[k, w]; no zeroing."""
    k_in, n_win = packed_in.shape
    k_f, n_f = packed_f.shape
    if k_in != k_f:
        raise ValueError(f"reduction mismatch: {k_in} vs {k_f}")
    if acc.shape != (n_f, n_win):
        raise ValueError(f"accumulator shape {acc.shape} != ({n_f}, {n_win})")
    acc += packed_f.T @ packed_in
    return acc


def make_accumulator(n_f: int, n_win: int) -> np.ndarray:
    return np.zeros((n_f, n_win), dtype=DTYPE)


@dataclass(frozen=True)
class LoopSpec:
    dim: str
    extent: int
    step: int


@dataclass(frozen=True)
class LoopNestPlan:
    """Ordered loop descriptors plus packing placement for one region."""

    schedule: Schedule
    loops: tuple[LoopSpec, ...]  # outermost first
    input_pack_loop: str    # loop level at which input tiles get packed
    filter_pack_loop: str   # loop level at which filter tiles get packed
    multipack_dim: str      # which tensor is multipacked ("filter" or "input")
    multipack_nt: int       # tiles per multipack group


@dataclass
class RunCounters:
    """Pack/accumulate instrumentation, keyed by absolute tile coordinates.

    A tile packed once per reuse scope shows up as count 1 under a key that
    names that scope: the stationary tensor's tiles are keyed
    (batch, channel block, tile) and the streamed tensor's tiles additionally
    carry the stationary set they were repacked for.
    """

    input_packs: Counter = field(default_factory=Counter)
    filter_packs: Counter = field(default_factory=Counter)
    acc_touches: Counter = field(default_factory=Counter)  # (b, w_tile, f_tile)


def build_plan(region: KernelRegion, strategy: TilingStrategy,
               mk: MkInfo, n_batches: int = 1) -> LoopNestPlan:
    """Loop nest for a Main region under the chosen schedule."""
    if region.kind is not RegionKind.Main:
        raise ValueError("build_plan expects a Main region")
    wtiles = region.spatial_len // mk.n_win
    ftiles = region.oc_len // mk.n_f
    batch = LoopSpec("batch", n_batches, 1)
    chan = LoopSpec("channel", region.ic_len, strategy.nc)
    wset = LoopSpec("window_set", wtiles, strategy.k3)
    fset = LoopSpec("filter_set", ftiles, strategy.k2)
    wtile = LoopSpec("window_tile", min(strategy.k3, wtiles), 1)
    ftile = LoopSpec("filter_tile", min(strategy.k2, ftiles), 1)
    if strategy.schedule is Schedule.InputStationary:
        return LoopNestPlan(
            schedule=strategy.schedule,
            loops=(batch, chan, wset, fset, wtile, ftile),
            input_pack_loop="window_set", filter_pack_loop="filter_set",
            multipack_dim="filter", multipack_nt=min(strategy.k2, max(ftiles, 1)))
    return LoopNestPlan(
        schedule=strategy.schedule,
        loops=(batch, chan, fset, wset, ftile, wtile),
        input_pack_loop="window_set", filter_pack_loop="filter_set",
        multipack_dim="input", multipack_nt=min(strategy.k3, max(wtiles, 1)))


class _BufPool:
    """Packing buffers allocated once per (tag, shape), reused across sets."""

    def __init__(self):
        self._bufs = {}

    def get(self, tag, shape):
        key = (tag, shape)
        buf = self._bufs.get(key)
        if buf is None:
            buf = np.empty(shape, dtype=DTYPE)
            self._bufs[key] = buf
        return buf


def _channel_blocks(ic_len: int, nc: int):
    off = 0
    while off < ic_len:
        yield off, min(nc, ic_len - off)
        off += nc


def execute_region(x: np.ndarray, filters: np.ndarray, out: np.ndarray,
                   conv: ConvInfo, region: KernelRegion,
                   strategy: TilingStrategy, mk: MkInfo,
                   hook=None, counters: RunCounters | None = None) -> None:
    """Run the tiled pipeline for one Main region; accumulates into out.

    x must be pre-padded (conv carries pad=0); out is (n, oc, oh, ow) and the
    region's output ranges must already hold the partial sums accumulated so
    far (zeros on first touch).
    """
    if region.kind is not RegionKind.Main:
        raise ValueError("execute_region expects a Main region")
    if not out.flags.c_contiguous:
        raise ValueError("output tensor must be C-contiguous")
    p = conv.params
    n_win, n_f = mk.n_win, mk.n_f
    if region.spatial_len % n_win or region.oc_len % n_f:
        raise ValueError("Main region is not aligned to the microkernel tile")
    if hook is None:
        hook = _HOOK

    wtiles = region.spatial_len // n_win
    ftiles = region.oc_len // n_f
    k3 = min(strategy.k3, wtiles)
    k2 = min(strategy.k2, ftiles)
    w_tile0 = region.spatial_start // n_win

    out_flat = out.reshape(p.n, p.oc, conv.ohw)
    pool = _BufPool()
    is_sched = strategy.schedule is Schedule.InputStationary

    for b in range(p.n):
        for ic_off, ncl in _channel_blocks(region.ic_len, strategy.nc):
            if is_sched:
                _run_input_stationary(
                    x, filters, out_flat, conv, region, strategy, mk, pool,
                    b, ic_off, ncl, wtiles, ftiles, k3, k2, w_tile0,
                    hook, counters)
            else:
                _run_weight_stationary(
                    x, filters, out_flat, conv, region, strategy, mk, pool,
                    b, ic_off, ncl, wtiles, ftiles, k3, k2, w_tile0,
                    hook, counters)


def _call_microkernel(in_mat, f_mat, acc, hook):
    if hook is None:
        microkernel(in_mat, f_mat, acc)
    else:
        k, n_win = in_mat.shape
        n_f = f_mat.shape[1]
        hook(in_mat, f_mat, acc, k, n_win, n_f,
             (in_mat.strides, f_mat.strides, acc.strides))


def _run_input_stationary(x, filters, out_flat, conv, region, strategy, mk,
                          pool, b, ic_off, ncl, wtiles, ftiles, k3, k2,
                          w_tile0, hook, counters):
    p = conv.params
    n_win, n_f = mk.n_win, mk.n_f
    kdim = ncl * p.fh * p.fw
    for ws in range(0, wtiles, k3):
        wset = min(k3, wtiles - ws)
        in_buf = pool.get("in", (k3, ncl, p.fh, p.fw, n_win))
        for t in range(wset):
            pack_input(x, conv, region, (ws * n_win, t * n_win), strategy, mk,
                       nt=1, batch=b, ic_off=ic_off, nc=ncl,
                       out=in_buf[t:t + 1])
            if counters is not None:
                counters.input_packs[(b, ic_off, w_tile0 + ws + t)] += 1
        in_mats = in_buf.reshape(k3, kdim, n_win)
        f_tile0 = region.oc_start // n_f
        for fs in range(0, ftiles, k2):
            fset = min(k2, ftiles - fs)
            f_buf = pool.get("flt", (k2, ncl, p.fh, p.fw, n_f))
            pack_filter(filters, region, strategy, mk, nt=fset,
                        f_tile_start=fs, ic_off=ic_off, nc=ncl,
                        out=f_buf[:fset])
            if counters is not None:
                for t in range(fset):
                    counters.filter_packs[
                        (b, ic_off, w_tile0 + ws, f_tile0 + fs + t)] += 1
            f_mats = f_buf.reshape(k2, kdim, n_f)
            for st in range(wset):
                w0 = region.spatial_start + (ws + st) * n_win
                for ft in range(fset):
                    f0 = region.oc_start + (fs + ft) * n_f
                    acc = out_flat[b, f0:f0 + n_f, w0:w0 + n_win]
                    _call_microkernel(in_mats[st], f_mats[ft], acc, hook)
                    if counters is not None:
                        counters.acc_touches[
                            (b, w_tile0 + ws + st,
                             (region.oc_start // n_f) + fs + ft)] += 1


def _run_weight_stationary(x, filters, out_flat, conv, region, strategy, mk,
                           pool, b, ic_off, ncl, wtiles, ftiles, k3, k2,
                           w_tile0, hook, counters):
    p = conv.params
    n_win, n_f = mk.n_win, mk.n_f
    kdim = ncl * p.fh * p.fw
    f_tile0 = region.oc_start // n_f
    for fs in range(0, ftiles, k2):
        fset = min(k2, ftiles - fs)
        f_buf = pool.get("flt", (k2, ncl, p.fh, p.fw, n_f))
        for t in range(fset):
            pack_filter(filters, region, strategy, mk, nt=1,
                        f_tile_start=fs + t, ic_off=ic_off, nc=ncl,
                        out=f_buf[t:t + 1])
            if counters is not None:
                counters.filter_packs[(b, ic_off, f_tile0 + fs + t)] += 1
        f_mats = f_buf.reshape(k2, kdim, n_f)
        for ws in range(0, wtiles, k3):
            wset = min(k3, wtiles - ws)
            in_buf = pool.get("in", (k3, ncl, p.fh, p.fw, n_win))
            pack_input(x, conv, region, (ws * n_win, 0), strategy, mk,
                       nt=wset, batch=b, ic_off=ic_off, nc=ncl,
                       out=in_buf[:wset])
            if counters is not None:
                for t in range(wset):
                    counters.input_packs[
                        (b, ic_off, f_tile0 + fs, w_tile0 + ws + t)] += 1
            in_mats = in_buf.reshape(k3, kdim, n_win)
            for ft in range(fset):
                f0 = region.oc_start + (fs + ft) * n_f
                for st in range(wset):
                    w0 = region.spatial_start + (ws + st) * n_win
                    acc = out_flat[b, f0:f0 + n_f, w0:w0 + n_win]
                    _call_microkernel(in_mats[st], f_mats[ft], acc, hook)
                    if counters is not None:
                        counters.acc_touches[
                            (b, w_tile0 + ws + st,
                             (region.oc_start // n_f) + fs + ft)] += 1


def naive_fallback_region(x: np.ndarray, filters: np.ndarray, out: np.ndarray,
                          conv: ConvInfo, region: KernelRegion) -> None:
    """Direct scalar convolution restricted to a region; accumulates into out.

    Serves remainder regions smaller than the microkernel tile, which bypass
    the tiling and packing pipeline entirely.
    """
    p = conv.params
    if region.spatial_len == 0 or region.oc_len == 0 or region.ic_len == 0:
        return
    if not out.flags.c_contiguous:
        raise ValueError("output tensor must be C-contiguous")
    c0, c1 = region.ic_start, region.ic_start + region.ic_len
    o0, o1 = region.oc_start, region.oc_start + region.oc_len
    flt = filters[o0:o1, c0:c1]
    out_flat = out.reshape(p.n, p.oc, conv.ohw)
    fh_span = p.dil_h * (p.fh - 1) + 1
    fw_span = p.dil_w * (p.fw - 1) + 1
    for b in range(p.n):
        for w in range(region.spatial_start,
                       region.spatial_start + region.spatial_len):
            r, c = divmod(w, conv.ow)
            r0, col0 = r * p.stride_h, c * p.stride_w
            patch = x[b, c0:c1, r0:r0 + fh_span:p.dil_h,
                      col0:col0 + fw_span:p.dil_w]
            out_flat[b, o0:o1, w] += np.tensordot(flt, patch, axes=3)

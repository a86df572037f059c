"""Recursive edge-case splitting of the convolution iteration space.

The full iteration space (flattened output windows x output channels x input
channels) is carved into disjoint rectangular regions before tiling:

  1. a structural split peels the window tail (windows mod n_win) and the
     filter tail (oc mod n_f), both of which bypass the tiled pipeline;
  2. the aligned main region is then split in order k2 -> k3 -> nc wherever
     the corresponding tile-size remainder is nonzero. Every peeled region
     here still spans whole microkernel tiles and re-enters the full tiling
     and packing pipeline with locally recomputed set counts.

Regions record their absolute window offset (e_off) so packing can translate
region-local loop indices into positions of the original tensor.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace

from .arch import ConvInfo, MkInfo
from .strategy import TilingStrategy


class RegionKind(enum.Enum):
    Main = "main"
    Remainder = "remainder"


@dataclass(frozen=True)
class KernelRegion:
    """A rectangular sub-range of the (windows x oc x ic) iteration space."""

    spatial_start: int
    spatial_len: int
    oc_start: int
    oc_len: int
    ic_start: int
    ic_len: int
    kind: RegionKind
    e_off: int

    def __post_init__(self):
        assert self.e_off == self.spatial_start

    def to_dict(self) -> dict:
        return {
            "spatial_start": self.spatial_start, "spatial_len": self.spatial_len,
            "oc_start": self.oc_start, "oc_len": self.oc_len,
            "ic_start": self.ic_start, "ic_len": self.ic_len,
            "kind": self.kind.value, "e_off": self.e_off,
        }


def _region(s0, slen, o0, olen, c0, clen, kind) -> KernelRegion:
    return KernelRegion(spatial_start=s0, spatial_len=slen, oc_start=o0,
                        oc_len=olen, ic_start=c0, ic_len=clen, kind=kind,
                        e_off=s0)


def split_input_domain(total_windows: int, n_win: int,
                       oc_len: int = 1, ic_len: int = 1):
    """Peel the window tail: (main region or None, tail region or None).

    The main region covers floor(total/n_win)*n_win windows; the tail covers
    the rest and is marked Remainder. oc_len/ic_len set the non-spatial
    extents of the produced regions.
    """
    if total_windows < 1 or n_win < 1:
        raise ValueError("total_windows and n_win must be >= 1")
    main_len = (total_windows // n_win) * n_win
    main = None
    if main_len:
        main = _region(0, main_len, 0, oc_len, 0, ic_len, RegionKind.Main)
    tail = None
    if main_len < total_windows:
        tail = _region(main_len, total_windows - main_len, 0, oc_len, 0, ic_len,
                       RegionKind.Remainder)
    return main, tail


def split_by_strategy(region: KernelRegion, strategy: TilingStrategy,
                      mk: MkInfo) -> list[KernelRegion]:
    """Split a main region in order k2 -> k3 -> nc on its local remainders.

    Each step peels the trailing misaligned part of one dimension into its
    own region; peeled regions keep Main kind because they still hold whole
    n_win x n_f tiles and run the full pipeline. Returns regions in peel
    order ending with the fully aligned core.
    """
    if region.kind is not RegionKind.Main:
        raise ValueError("split_by_strategy expects a Main region")
    if region.spatial_len % mk.n_win:
        raise ValueError("main region must be aligned to n_win windows")

    peeled = []
    cur = region

    # k2: output-channel tiles not filling a whole k2 set.
    ftiles = cur.oc_len // mk.n_f
    r_k2 = ftiles % strategy.k2
    keep = (ftiles - r_k2) * mk.n_f
    if r_k2 and keep:
        peeled.append(replace(cur, oc_start=cur.oc_start + keep,
                              oc_len=cur.oc_len - keep))
        cur = replace(cur, oc_len=keep)

    # k3: window tiles not filling a whole k3 set.
    wtiles = cur.spatial_len // mk.n_win
    r_k3 = wtiles % strategy.k3
    keep = (wtiles - r_k3) * mk.n_win
    if r_k3 and keep:
        tail_start = cur.spatial_start + keep
        peeled.append(replace(cur, spatial_start=tail_start,
                              spatial_len=cur.spatial_len - keep,
                              e_off=tail_start))
        cur = replace(cur, spatial_len=keep)

    # nc: input channels beyond the last whole nc block.
    r_nc = cur.ic_len % strategy.nc
    keep = cur.ic_len - r_nc
    if r_nc and keep:
        peeled.append(replace(cur, ic_start=cur.ic_start + keep, ic_len=r_nc))
        cur = replace(cur, ic_len=keep)

    return [cur] + peeled


def plan_regions(conv: ConvInfo, strategy: TilingStrategy,
                 mk: MkInfo) -> list[KernelRegion]:
    """Full region decomposition for a convolution.

    Structural tails (windows mod n_win, oc mod n_f) are Remainder regions
    served by the naive path; everything else comes from split_by_strategy.
    """
    oc = conv.params.oc
    ic = conv.params.ic
    regions = []

    main, tail = split_input_domain(conv.ohw, mk.n_win, oc_len=oc, ic_len=ic)
    if tail is not None:
        regions.append(tail)

    if main is not None:
        oc_main = (oc // mk.n_f) * mk.n_f
        if oc_main < oc:
            regions.append(_region(main.spatial_start, main.spatial_len,
                                   oc_main, oc - oc_main, 0, ic,
                                   RegionKind.Remainder))
        if oc_main:
            aligned = replace(main, oc_len=oc_main)
            regions.extend(split_by_strategy(aligned, strategy, mk))
    return regions


def coverage_check(regions: list[KernelRegion], conv: ConvInfo) -> bool:
    """True iff regions are pairwise disjoint and exactly cover the space."""
    total = conv.ohw * conv.params.oc * conv.params.ic
    vol = 0
    for r in regions:
        if r.spatial_len < 0 or r.oc_len < 0 or r.ic_len < 0:
            return False
        if r.spatial_start < 0 or r.spatial_start + r.spatial_len > conv.ohw:
            return False
        if r.oc_start < 0 or r.oc_start + r.oc_len > conv.params.oc:
            return False
        if r.ic_start < 0 or r.ic_start + r.ic_len > conv.params.ic:
            return False
        vol += r.spatial_len * r.oc_len * r.ic_len
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            if (_overlap(a.spatial_start, a.spatial_len, b.spatial_start, b.spatial_len)
                    and _overlap(a.oc_start, a.oc_len, b.oc_start, b.oc_len)
                    and _overlap(a.ic_start, a.ic_len, b.ic_start, b.ic_len)):
                return False
    return vol == total


def _overlap(s0, l0, s1, l1) -> bool:
    return s0 < s1 + l1 and s1 < s0 + l0


def regions_to_json(regions: list[KernelRegion], indent: int = 2) -> str:
    """Serialize a region list for debug inspection."""
    return json.dumps([r.to_dict() for r in regions], indent=indent)

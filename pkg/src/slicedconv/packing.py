"""Affine-equation packing of filter and input tiles, with multipacking.

Packed layouts, per tile:

  filter: (nc, fh, fw, n_f)   - a pure permutation of the filter slice,
                                stored in order, gathered out of order;
  input:  (nc, fh, fw, n_win) - a gather from the input slice; elements
                                shared by overlapping windows are replicated.

Multipacking packs ``nt`` consecutive tiles in one pass by prepending an nt
axis; tile t of a multipack starts n_f filters (or n_win windows) after tile
t-1.

Input packing is driven by the window arithmetic over the flattened output
spatial dimension. With ``ts`` the absolute starting window of the group
(region offset e_off plus the outer/inner loop iterators), the window packed
at (i_nt, i_nwin) is ``w = ts + i_nt*n_win + i_nwin`` and its element for
filter offset (i_fh, i_fw) sits at tile-relative coordinates

    it_h = (w // ow - ts // ow) * stride_h + i_fh * dil_h
    it_w = (w %  ow - ts %  ow) * stride_w + i_fw * dil_w

relative to the group origin (the input element projected by window ts).
When the group spans a row break, it_w may be negative; the extracted slice
then covers full input rows so the flat offset it_h * row_width + it_w stays
inside the slice. When the whole group sits within one output row, the
simpler single-row form applies: it_h = i_fh * dil_h and
it_w = i_nwin * stride_w + i_fw * dil_w.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import prod

import numpy as np

from .arch import ConvInfo, MkInfo
from .model import DTYPE, ConvParams
from .regions import KernelRegion
from .strategy import TilingStrategy


class TileKind(enum.Enum):
    Filter = "filter"
    Input = "input"


@dataclass
class PackedTile:
    """Contiguous packed buffer for nt tiles plus the per-tile logical shape."""

    data: np.ndarray  # shape (nt, *logical_shape), f32
    logical_shape: tuple
    kind: TileKind
    nt: int

    def __post_init__(self):
        assert self.data.size == self.nt * prod(self.logical_shape)

    def tile(self, i: int) -> np.ndarray:
        return self.data[i]

    def matrix(self, i: int) -> np.ndarray:
        """Tile i as a (K, n_f|n_win) reduction-major matrix."""
        k = prod(self.logical_shape[:-1])
        return self.data[i].reshape(k, self.logical_shape[-1])


def filter_pack_index(i_nc: int, i_fh: int, i_fw: int, i_nf: int,
                      i_nt: int, mk: MkInfo) -> tuple[int, int, int, int]:
    """Source (filter, channel, row, col) for one packed filter element."""
    return (i_nt * mk.n_f + i_nf, i_nc, i_fh, i_fw)


def input_pack_index_simple(i_fh: int, i_fw: int, i_nwin: int,
                            p: ConvParams, tile_w: int) -> int:
    """Tile-relative flat index, single-row case (no row break in the tile)."""
    it_h = i_fh * p.dil_h
    it_w = i_nwin * p.stride_w + i_fw * p.dil_w
    return it_h * tile_w + it_w


def input_pack_index_general(i_oout: int, i_oin: int, i_nwin: int,
                             i_fh: int, i_fw: int, i_nt: int, e_off: int,
                             conv: ConvInfo, tile_w: int,
                             n_win: int) -> int:
    """Tile-relative flat index in the general (row-break capable) case.

    tile_w must be the row width of the extracted slice (the full padded
    input width when row breaks can occur); the returned column offset may
    be negative relative to the group origin. Multipack callers pass the
    group start through i_oout with i_oin = 0.
    """
    p = conv.params
    ts = i_oout + i_oin + e_off
    w = ts + i_nt * n_win + i_nwin
    it_h = (w // conv.ow - ts // conv.ow) * p.stride_h + i_fh * p.dil_h
    it_w = (w % conv.ow - ts % conv.ow) * p.stride_w + i_fw * p.dil_w
    return it_h * tile_w + it_w


def row_break_free(ts: int, windows: int, ow: int) -> bool:
    """True when windows [ts, ts+windows) all lie in one output row."""
    return ts % ow + windows <= ow


def pack_filter(filters: np.ndarray, region: KernelRegion,
                strategy: TilingStrategy, mk: MkInfo, nt: int,
                f_tile_start: int = 0, ic_off: int = 0,
                nc: int | None = None, out: np.ndarray | None = None) -> PackedTile:
    """Pack nt consecutive filter tiles of a region.

    packed[i_nt, i_nc, i_fh, i_fw, i_nf] = filters[f0 + i_nt*n_f + i_nf,
    c0 + i_nc, i_fh, i_fw] with f0/c0 the region-relative starting filter
    and channel. Pure data movement, no replication.
    """
    fh, fw = filters.shape[2], filters.shape[3]
    if nc is None:
        nc = min(strategy.nc, region.ic_len - ic_off)
    f0 = region.oc_start + f_tile_start * mk.n_f
    c0 = region.ic_start + ic_off
    if f0 + nt * mk.n_f > region.oc_start + region.oc_len:
        raise IndexError("filter range overflows the region")
    if c0 + nc > region.ic_start + region.ic_len:
        raise IndexError("channel range overflows the region")

    src = filters[f0:f0 + nt * mk.n_f, c0:c0 + nc]
    src = src.reshape(nt, mk.n_f, nc, fh, fw)
    packed = np.transpose(src, (0, 2, 3, 4, 1))
    if out is not None:
        out[:] = packed
        packed = out
    else:
        packed = np.ascontiguousarray(packed, dtype=DTYPE)
    return PackedTile(data=packed, logical_shape=(nc, fh, fw, mk.n_f),
                      kind=TileKind.Filter, nt=nt)


def pack_input(x: np.ndarray, conv: ConvInfo, region: KernelRegion,
               loop_state: tuple[int, int], strategy: TilingStrategy,
               mk: MkInfo, nt: int, batch: int = 0, ic_off: int = 0,
               nc: int | None = None, out: np.ndarray | None = None) -> PackedTile:
    """Pack nt consecutive window tiles of a region from a pre-padded input.

    loop_state = (i_oout, i_oin) are the outer/inner spatial loop iterators
    in window units; together with the region offset they fix the absolute
    group start ts. Multipack callers pass i_oin = 0.

    packed[i_nt, i_nc, i_fh, i_fw, i_nwin] holds the input element projected
    by window ts + i_nt*n_win + i_nwin under filter offset (i_fh, i_fw).
    """
    p = conv.params
    assert p.pad_h == 0 and p.pad_w == 0, "engine core expects a pre-padded input"
    if nc is None:
        nc = min(strategy.nc, region.ic_len - ic_off)
    c0 = region.ic_start + ic_off
    if c0 + nc > region.ic_start + region.ic_len:
        raise IndexError("channel range overflows the region")

    i_oout, i_oin = loop_state
    ts = region.e_off + i_oout + i_oin
    total = nt * mk.n_win
    if ts < 0 or ts + total > conv.ohw:
        raise IndexError(
            f"window group [{ts}, {ts + total}) outside output domain "
            f"(splitting bug)")

    fh_off = np.arange(p.fh) * p.dil_h
    fw_off = np.arange(p.fw) * p.dil_w
    chans = x[batch, c0:c0 + nc]

    if row_break_free(ts, total, conv.ow):
        # Single-row group: compact slice, simple index form.
        r0 = ts // conv.ow * p.stride_h
        col0 = ts % conv.ow * p.stride_w
        width = (total - 1) * p.stride_w + p.dil_w * (p.fw - 1) + 1
        sl = chans[:, r0:r0 + p.dil_h * (p.fh - 1) + 1, col0:col0 + width]
        it_w = (np.arange(total).reshape(nt, 1, mk.n_win) * p.stride_w
                + fw_off.reshape(1, p.fw, 1))
        gathered = sl[:, fh_off[None, :, None, None],
                      it_w[:, None, :, :]]  # (nc, nt, fh, fw, n_win)
    else:
        # Row breaks inside the group: index against full input rows.
        w = ts + (np.arange(nt)[:, None] * mk.n_win + np.arange(mk.n_win))
        rows = w // conv.ow * p.stride_h  # absolute padded-input coords
        cols = w % conv.ow * p.stride_w
        r_idx = rows[:, None, None, :] + fh_off[None, :, None, None]
        c_idx = cols[:, None, None, :] + fw_off[None, None, :, None]
        gathered = chans[:, r_idx, c_idx]  # (nc, nt, fh, fw, n_win)

    packed = np.transpose(gathered, (1, 0, 2, 3, 4))
    if out is not None:
        out[:] = packed
        packed = out
    else:
        packed = np.ascontiguousarray(packed, dtype=DTYPE)
    return PackedTile(data=packed, logical_shape=(nc, p.fh, p.fw, mk.n_win),
                      kind=TileKind.Input, nt=nt)


def dump_packed(tile: PackedTile) -> str:
    """Flat text form of a packed buffer, one tile per line (golden tests)."""
    lines = [f"# kind={tile.kind.value} nt={tile.nt} "
             f"shape={'x'.join(map(str, tile.logical_shape))}"]
    for i in range(tile.nt):
        vals = tile.tile(i).ravel()
        lines.append(" ".join(f"{float(v):.9g}" for v in vals))
    return "\n".join(lines) + "\n"

"""Fixed-size tile grids over slide pixel space, and local<->global mapping.

Whole-slide images do not fit in detector memory, so inference runs on a grid
of fixed windows and the bookkeeping here maps tile-local detections back to
slide coordinates (and back again).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import FRAME_GLOBAL, FRAME_LOCAL, BBox, Detection, SlideInfo

__all__ = [
    "DEFAULT_TILE_SIZE",
    "FrameMismatchError",
    "Tile",
    "TilePlan",
    "plan_tiles",
    "to_global",
    "to_local",
]

DEFAULT_TILE_SIZE = 1024


class FrameMismatchError(ValueError):
    """A detection's frame/tile does not match the requested mapping.

    Raised instead of silently producing garbage coordinates when a dump was
    already globalized (or references the wrong tile).
    """


@dataclass(frozen=True)
class Tile:
    """One window of a tile grid, in slide pixel coordinates."""

    index: int
    ox: int
    oy: int
    width: int = DEFAULT_TILE_SIZE
    height: int = DEFAULT_TILE_SIZE

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"tile index must be >= 0, got {self.index}")
        if self.ox < 0 or self.oy < 0:
            raise ValueError(f"tile origin must be non-negative, got ({self.ox}, {self.oy})")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"tile must be at least 1x1, got {self.width}x{self.height}")

    def box(self) -> BBox:
        return BBox(self.ox, self.oy, self.ox + self.width, self.oy + self.height)


@dataclass(frozen=True)
class TilePlan:
    """The full tile grid of one slide, row-major, indices dense from 0."""

    slide: SlideInfo
    tile_size: int
    overlap: int
    tiles: tuple[Tile, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tiles", tuple(self.tiles))
        for i, tile in enumerate(self.tiles):
            if tile.index != i:
                raise ValueError(f"tile indices must be dense 0..n-1, tile {i} has index {tile.index}")

    def __len__(self) -> int:
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)

    def tile(self, index: int) -> Tile:
        if not 0 <= index < len(self.tiles):
            raise ValueError(f"tile index {index} out of range for plan with {len(self.tiles)} tiles")
        return self.tiles[index]


def _axis_offsets(extent: int, tile_size: int, stride: int) -> list[int]:
    # Interior offsets advance by stride; the final tile is clamped inward so
    # its far edge lands exactly on the slide edge (no padding needed).
    if extent <= tile_size:
        return [0]
    offsets = list(range(0, extent - tile_size, stride))
    offsets.append(extent - tile_size)
    return offsets


def plan_tiles(slide: SlideInfo, tile_size: int = DEFAULT_TILE_SIZE, overlap: int = 0) -> TilePlan:
    """Row-major grid of tile_size x tile_size tiles covering every slide pixel.

    Slides smaller than the tile along an axis get a single offset 0 there and
    keep the full tile dimensions (the tile may hang past the slide edge, like
    a padded inference window). Requires 0 <= overlap < tile_size.
    """
    if tile_size < 1:
        raise ValueError(f"tile_size must be >= 1, got {tile_size}")
    if not 0 <= overlap < tile_size:
        raise ValueError(f"overlap must satisfy 0 <= overlap < tile_size, got {overlap}")
    stride = tile_size - overlap
    xs = _axis_offsets(slide.width, tile_size, stride)
    ys = _axis_offsets(slide.height, tile_size, stride)
    tiles = tuple(
        Tile(index=i, ox=ox, oy=oy, width=tile_size, height=tile_size)
        for i, (oy, ox) in enumerate((oy, ox) for oy in ys for ox in xs)
    )
    return TilePlan(slide=slide, tile_size=tile_size, overlap=overlap, tiles=tiles)


def to_global(det: Detection, tile: Tile) -> Detection:
    """Translate a tile-local detection into slide coordinates.

    Exact inverse of to_local whenever the shifted coordinates are exactly
    representable (tile origins are ints, so dyadic-rational coordinates
    round-trip bit-exactly; arbitrary floats may differ by rounding).
    """
    if det.frame != FRAME_LOCAL:
        raise FrameMismatchError(f"expected a local-frame detection, got frame={det.frame!r}")
    if det.tile_index != tile.index:
        raise FrameMismatchError(
            f"detection belongs to tile {det.tile_index}, not tile {tile.index}"
        )
    return replace(
        det,
        bbox=det.bbox.translate(tile.ox, tile.oy),
        frame=FRAME_GLOBAL,
        tile_index=None,
    )


def to_local(det: Detection, tile: Tile) -> Detection:
    """Translate a global-frame detection into a tile's coordinates.

    The detection box must intersect the tile; mapping a disjoint box is
    almost certainly a bookkeeping bug upstream.
    """
    if det.frame != FRAME_GLOBAL:
        raise FrameMismatchError(f"expected a global-frame detection, got frame={det.frame!r}")
    if not det.bbox.intersects(tile.box()):
        raise ValueError(f"detection box {det.bbox} is disjoint from tile {tile.index}")
    return replace(
        det,
        bbox=det.bbox.translate(-tile.ox, -tile.oy),
        frame=FRAME_LOCAL,
        tile_index=tile.index,
    )

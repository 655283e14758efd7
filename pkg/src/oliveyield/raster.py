"""Georeferenced multiband rasters and their on-disk format.

A :class:`GridRaster` is an immutable float32 sample cube on a regular grid
described by a six-term affine transform ``(origin_x, pixel_w, 0, origin_y,
0, pixel_h)``. ``pixel_h`` is negative for north-up grids, so row 0 is the
northernmost row. A single finite sentinel value marks missing samples.

On disk a raster is a ``<name>.json`` header next to a raw ``.bin`` blob of
little-endian float32 samples, band-sequential, row-major within each band,
top row first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

FORMAT_VERSION = 1

_HEADER_KEYS = {
    "format_version",
    "width",
    "height",
    "band_count",
    "band_names",
    "dtype",
    "nodata",
    "transform",
    "crs",
    "data_file",
}


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in raster CRS coordinates (meters)."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        for v in (self.min_x, self.min_y, self.max_x, self.max_y):
            if not math.isfinite(v):
                raise ValueError("bbox coordinates must be finite")
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError("bbox must satisfy min_x < max_x and min_y < max_y")


class GridRaster:
    """Immutable georeferenced multiband grid of float32 samples.

    ``values`` has shape ``(band_count, height, width)``; every sample is
    finite or equal to ``nodata``. Instances are safe to share across threads.
    """

    __slots__ = ("values", "transform", "crs_tag", "nodata", "band_names")

    def __init__(self, values, transform, crs_tag, nodata, band_names):
        arr = np.ascontiguousarray(values, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[np.newaxis, :, :]
        if arr.ndim != 3:
            raise ValueError("values must be a (bands, height, width) array")
        bands, height, width = arr.shape
        if bands < 1 or height < 1 or width < 1:
            raise ValueError("raster dimensions must be at least 1x1x1")

        transform = tuple(float(t) for t in transform)
        if len(transform) != 6:
            raise ValueError("transform must have six terms")
        if any(not math.isfinite(t) for t in transform):
            raise ValueError("transform terms must be finite")
        if transform[2] != 0.0 or transform[4] != 0.0:
            raise ValueError("rotated grids are not supported (shear terms must be 0)")
        if transform[1] <= 0.0:
            raise ValueError("pixel_w must be positive")
        if transform[5] == 0.0:
            raise ValueError("pixel_h must be nonzero")

        nodata = float(nodata)
        if not math.isfinite(nodata):
            raise ValueError("nodata sentinel must be finite")

        names = tuple(str(n) for n in band_names)
        if len(names) != bands:
            raise ValueError(f"expected {bands} band names, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError("band names must be unique")

        bad = ~np.isfinite(arr) & (arr != np.float32(nodata))
        if bad.any():
            raise ValueError("samples must be finite or equal to nodata")

        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "transform", transform)
        object.__setattr__(self, "crs_tag", str(crs_tag))
        object.__setattr__(self, "nodata", nodata)
        object.__setattr__(self, "band_names", names)

    def __setattr__(self, name, value):
        raise AttributeError("GridRaster is immutable")

    # -- geometry ----------------------------------------------------------

    @property
    def band_count(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def origin_x(self) -> float:
        return self.transform[0]

    @property
    def origin_y(self) -> float:
        return self.transform[3]

    @property
    def pixel_w(self) -> float:
        return self.transform[1]

    @property
    def pixel_h(self) -> float:
        return self.transform[5]

    def extent(self) -> BBox:
        """Outer bounding box of all pixel cells."""
        x0 = self.origin_x
        x1 = self.origin_x + self.width * self.pixel_w
        y0 = self.origin_y
        y1 = self.origin_y + self.height * self.pixel_h
        return BBox(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))

    def pixel_center(self, col: int, row: int) -> tuple[float, float]:
        x = self.origin_x + (col + 0.5) * self.pixel_w
        y = self.origin_y + (row + 0.5) * self.pixel_h
        return x, y

    # -- bands -------------------------------------------------------------

    def band(self, index: int) -> np.ndarray:
        """Read-only 2-D view of one band."""
        return self.values[index]

    def band_index(self, name: str) -> int:
        try:
            return self.band_names.index(name)
        except ValueError:
            raise KeyError(f"no band named {name!r}") from None

    def valid_mask(self) -> np.ndarray:
        """Boolean (bands, height, width) mask of non-nodata samples."""
        return self.values != np.float32(self.nodata)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridRaster):
            return NotImplemented
        return (
            self.transform == other.transform
            and self.crs_tag == other.crs_tag
            and self.nodata == other.nodata
            and self.band_names == other.band_names
            and self.values.shape == other.values.shape
            and np.array_equal(
                self.values.view(np.uint32), other.values.view(np.uint32)
            )
        )

    def __repr__(self) -> str:
        return (
            f"GridRaster({self.band_count} bands, {self.width}x{self.height}, "
            f"origin=({self.origin_x}, {self.origin_y}), crs={self.crs_tag!r})"
        )


def same_grid(a: GridRaster, b: GridRaster) -> bool:
    """True when two rasters share size, transform and CRS."""
    return (
        a.width == b.width
        and a.height == b.height
        and a.transform == b.transform
        and a.crs_tag == b.crs_tag
    )


# -- file I/O ---------------------------------------------------------------


def write_raster(raster: GridRaster, path) -> None:
    """Write ``<path>`` (a .json header) and its sibling .bin data file."""
    header_path = Path(path)
    if header_path.suffix != ".json":
        header_path = header_path.with_suffix(".json")
    data_name = header_path.with_suffix(".bin").name
    header = {
        "format_version": FORMAT_VERSION,
        "width": raster.width,
        "height": raster.height,
        "band_count": raster.band_count,
        "band_names": list(raster.band_names),
        "dtype": "float32",
        "nodata": raster.nodata,
        "transform": list(raster.transform),
        "crs": raster.crs_tag,
        "data_file": data_name,
    }
    header_path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    blob = raster.values.astype("<f4", copy=False).tobytes()
    (header_path.parent / data_name).write_bytes(blob)


def read_raster(path) -> GridRaster:
    """Read a raster written by :func:`write_raster`.

    Raises ValueError for malformed headers or mismatched data size, and
    OSError if either file is missing or unreadable.
    """
    header_path = Path(path)
    text = header_path.read_text(encoding="utf-8")
    try:
        header = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed raster header {header_path}: {exc}") from exc
    if not isinstance(header, dict):
        raise ValueError(f"malformed raster header {header_path}: not an object")

    missing = _HEADER_KEYS - set(header)
    if missing:
        raise ValueError(f"raster header missing fields: {sorted(missing)}")
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {header['format_version']}")
    if header["dtype"] != "float32":
        raise ValueError(f"unsupported dtype {header['dtype']!r}")

    width = int(header["width"])
    height = int(header["height"])
    bands = int(header["band_count"])
    transform = header["transform"]
    if len(transform) != 6 or any(
        not isinstance(t, (int, float)) or not math.isfinite(t) for t in transform
    ):
        raise ValueError("raster header transform must be six finite numbers")

    data_path = header_path.parent / header["data_file"]
    blob = data_path.read_bytes()
    expected = width * height * bands * 4
    if len(blob) != expected:
        raise ValueError(
            f"data file {data_path} holds {len(blob)} bytes, expected {expected}"
        )
    arr = np.frombuffer(blob, dtype="<f4").reshape(bands, height, width)
    return GridRaster(
        values=arr,
        transform=transform,
        crs_tag=header["crs"],
        nodata=header["nodata"],
        band_names=header["band_names"],
    )


# -- coordinate transforms and grid operations ------------------------------


def world_to_pixel(raster: GridRaster, x: float, y: float) -> tuple[int, int]:
    """Map world coordinates to (col, row) of the containing pixel.

    Pixel ownership is half-open: a point belongs to the cell
    ``[x0, x0+pw) x (y0+ph, y0]``, which floor-based indexing realizes.
    The result may be out of bounds; callers check.
    """
    col = math.floor((x - raster.origin_x) / raster.pixel_w)
    row = math.floor((y - raster.origin_y) / raster.pixel_h)
    return col, row


def band_composite(bands: Sequence[GridRaster]) -> GridRaster:
    """Stack single-band rasters into one multiband raster, order preserved."""
    if len(bands) == 0:
        raise ValueError("band_composite requires at least one input")
    first = bands[0]
    names = []
    for b in bands:
        if b.band_count != 1:
            raise ValueError("band_composite inputs must be single-band")
        if not same_grid(first, b):
            raise ValueError("band_composite inputs must share grid and CRS")
        if b.nodata != first.nodata:
            raise ValueError("band_composite inputs must share the nodata sentinel")
        names.append(b.band_names[0])
    stacked = np.concatenate([b.values for b in bands], axis=0)
    return GridRaster(stacked, first.transform, first.crs_tag, first.nodata, names)


def clip(raster: GridRaster, box: BBox) -> GridRaster:
    """Subset to the pixels whose centers fall inside ``box``.

    Samples are copied unchanged; the transform is shifted to the new origin.
    Raises ValueError when no pixel center lies inside the box.
    """
    cx = raster.origin_x + (np.arange(raster.width) + 0.5) * raster.pixel_w
    cy = raster.origin_y + (np.arange(raster.height) + 0.5) * raster.pixel_h
    keep_x = (cx >= box.min_x) & (cx <= box.max_x)
    keep_y = (cy >= box.min_y) & (cy <= box.max_y)
    if not keep_x.any() or not keep_y.any():
        raise ValueError("clip box does not intersect any pixel center")
    c0 = int(np.argmax(keep_x))
    c1 = int(len(keep_x) - np.argmax(keep_x[::-1]))
    r0 = int(np.argmax(keep_y))
    r1 = int(len(keep_y) - np.argmax(keep_y[::-1]))
    sub = raster.values[:, r0:r1, c0:c1]
    transform = (
        raster.origin_x + c0 * raster.pixel_w,
        raster.pixel_w,
        0.0,
        raster.origin_y + r0 * raster.pixel_h,
        0.0,
        raster.pixel_h,
    )
    return GridRaster(sub, transform, raster.crs_tag, raster.nodata, raster.band_names)

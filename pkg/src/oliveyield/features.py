"""Survey points, the 13-feature table, raster sampling and CSV formats.

The feature table column order is fixed: seven reflectance bands, five
spectral indices, then elevation, with yield in tons per hectare as the
target. Rows with any missing feature are dropped, never imputed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .raster import GridRaster, same_grid, world_to_pixel

FEATURE_COLUMNS = (
    "b1",
    "b2",
    "b3",
    "b4",
    "b5",
    "b6",
    "b7",
    "ndvi",
    "gndvi",
    "savi",
    "ndwi",
    "ci_green",
    "dem",
)
TARGET_COLUMN = "yield_t_ha"

DROP_OUT_OF_BOUNDS = "out_of_bounds"
DROP_NODATA = "nodata_feature"
DROP_SPARSE_WINDOW = "insufficient_valid_window"

SAMPLING_STRATEGIES = ("nearest", "mean3x3")


@dataclass(frozen=True)
class SurveyPoint:
    """One surveyed farm: location in stack CRS and measured yield."""

    id: str
    x: float
    y: float
    yield_t_ha: float
    region: str | None = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point {self.id!r} has non-finite coordinates")
        if not (math.isfinite(self.yield_t_ha) and self.yield_t_ha >= 0.0):
            raise ValueError(f"point {self.id!r} yield must be finite and >= 0")


class FeatureTable:
    """Immutable table of 13 float features plus a nonnegative target."""

    __slots__ = ("ids", "features", "targets")

    def __init__(self, ids: Sequence[str], features, targets):
        ids = tuple(str(i) for i in ids)
        if len(set(ids)) != len(ids):
            raise ValueError("row ids must be unique")
        feats = np.ascontiguousarray(features, dtype=np.float64)
        targs = np.ascontiguousarray(targets, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != len(FEATURE_COLUMNS):
            raise ValueError(
                f"features must be (n, {len(FEATURE_COLUMNS)}), got {feats.shape}"
            )
        if targs.shape != (feats.shape[0],) or len(ids) != feats.shape[0]:
            raise ValueError("ids, features and targets must agree in length")
        if not np.isfinite(feats).all():
            raise ValueError("features must be finite")
        if not np.isfinite(targs).all() or (targs < 0.0).any():
            raise ValueError("targets must be finite and >= 0")
        feats.setflags(write=False)
        targs.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)

    def __setattr__(self, name, value):
        raise AttributeError("FeatureTable is immutable")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def column_names(self) -> tuple[str, ...]:
        return FEATURE_COLUMNS + (TARGET_COLUMN,)

    def subset(self, indices) -> "FeatureTable":
        idx = np.asarray(indices, dtype=np.intp)
        return FeatureTable(
            [self.ids[i] for i in idx], self.features[idx], self.targets[idx]
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureTable):
            return NotImplemented
        return (
            self.ids == other.ids
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.targets, other.targets)
        )


def attach_dem(stack12: GridRaster, dem: GridRaster) -> GridRaster:
    """Append elevation as the 13th band (name ``dem``) of the analysis stack."""
    if stack12.band_count != 12:
        raise ValueError(f"expected a 12-band stack, got {stack12.band_count} bands")
    if dem.band_count != 1:
        raise ValueError("dem must be single-band")
    if not same_grid(stack12, dem):
        raise ValueError("dem grid does not match the stack grid")
    dem_band = dem.values.astype(np.float64)
    dem_band = np.where(
        dem.values == np.float32(dem.nodata), stack12.nodata, dem_band
    ).astype(np.float32)
    out = np.concatenate([stack12.values, dem_band], axis=0)
    names = stack12.band_names + ("dem",)
    return GridRaster(out, stack12.transform, stack12.crs_tag, stack12.nodata, names)


def _sample_nearest(stack: GridRaster, col: int, row: int):
    vec = stack.values[:, row, col].astype(np.float64)
    if (stack.values[:, row, col] == np.float32(stack.nodata)).any():
        return None, DROP_NODATA
    return vec, None


def _sample_mean3x3(stack: GridRaster, col: int, row: int):
    r0, r1 = max(row - 1, 0), min(row + 2, stack.height)
    c0, c1 = max(col - 1, 0), min(col + 2, stack.width)
    window = stack.values[:, r0:r1, c0:c1].astype(np.float64)
    valid = stack.values[:, r0:r1, c0:c1] != np.float32(stack.nodata)
    counts = valid.reshape(stack.band_count, -1).sum(axis=1)
    if (counts < 5).any():
        return None, DROP_SPARSE_WINDOW
    sums = np.where(valid, window, 0.0).reshape(stack.band_count, -1).sum(axis=1)
    return sums / counts, None


def sample_at_points(
    stack13: GridRaster,
    points: Sequence[SurveyPoint],
    strategy: str = "nearest",
) -> tuple[FeatureTable, list[tuple[str, str]]]:
    """Build the feature table by sampling the 13-band stack at each point.

    ``nearest`` reads the pixel containing the point; ``mean3x3`` averages
    the valid pixels of the surrounding 3x3 window per band and needs at
    least 5 of them. Points that cannot produce a complete row are dropped
    and reported as ``(id, reason)`` pairs.
    """
    if stack13.band_count != len(FEATURE_COLUMNS):
        raise ValueError(
            f"expected a {len(FEATURE_COLUMNS)}-band stack, got {stack13.band_count}"
        )
    if strategy not in SAMPLING_STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    sampler = _sample_nearest if strategy == "nearest" else _sample_mean3x3

    ids, rows, targets = [], [], []
    dropped: list[tuple[str, str]] = []
    for p in points:
        col, row = world_to_pixel(stack13, p.x, p.y)
        if not (0 <= col < stack13.width and 0 <= row < stack13.height):
            dropped.append((p.id, DROP_OUT_OF_BOUNDS))
            continue
        vec, reason = sampler(stack13, col, row)
        if vec is None:
            dropped.append((p.id, reason))
            continue
        ids.append(p.id)
        rows.append(vec)
        targets.append(p.yield_t_ha)

    features = (
        np.asarray(rows, dtype=np.float64)
        if rows
        else np.empty((0, len(FEATURE_COLUMNS)))
    )
    return FeatureTable(ids, features, np.asarray(targets, dtype=np.float64)), dropped


# -- CSV formats -------------------------------------------------------------
#
# UTF-8, comma-separated, '.' decimal marker, no quoting needed. Floats are
# written with 17 significant digits so read(write(x)) is exact.

_FLOAT_FMT = "%.17g"

_POINT_HEADER = ("id", "x", "y", TARGET_COLUMN)
_TABLE_HEADER = ("id",) + FEATURE_COLUMNS + (TARGET_COLUMN,)


def _parse_float(cell: str, path, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ValueError(
            f"{path}: line {line}: column {column!r} holds non-numeric {cell!r}"
        ) from None


def read_points_csv(path) -> list[SurveyPoint]:
    """Read survey points; header ``id,x,y,yield_t_ha`` plus optional ``region``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        has_region = header == _POINT_HEADER + ("region",)
        if not has_region and header != _POINT_HEADER:
            raise ValueError(
                f"{path}: header must be {','.join(_POINT_HEADER)}[,region], "
                f"got {','.join(header)}"
            )
        points = []
        seen = set()
        for n, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ValueError(f"{path}: line {n}: expected {len(header)} cells")
            pid = rec[0]
            if pid in seen:
                raise ValueError(f"{path}: duplicate id {pid!r}")
            seen.add(pid)
            points.append(
                SurveyPoint(
                    id=pid,
                    x=_parse_float(rec[1], path, n, "x"),
                    y=_parse_float(rec[2], path, n, "y"),
                    yield_t_ha=_parse_float(rec[3], path, n, TARGET_COLUMN),
                    region=rec[4] if has_region and rec[4] != "" else None,
                )
            )
    return points


def write_points_csv(points: Iterable[SurveyPoint], path) -> None:
    points = list(points)
    with_region = any(p.region is not None for p in points)
    header = _POINT_HEADER + (("region",) if with_region else ())
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p in points:
            row = [p.id, _FLOAT_FMT % p.x, _FLOAT_FMT % p.y, _FLOAT_FMT % p.yield_t_ha]
            if with_region:
                row.append(p.region or "")
            writer.writerow(row)


def write_table_csv(table: FeatureTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_TABLE_HEADER)
        for i, rid in enumerate(table.ids):
            cells = [rid]
            cells += [_FLOAT_FMT % v for v in table.features[i]]
            cells.append(_FLOAT_FMT % table.targets[i])
            writer.writerow(cells)


def read_table_csv(path) -> FeatureTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header != _TABLE_HEADER:
            raise ValueError(
                f"{path}: header must be {','.join(_TABLE_HEADER)}, "
                f"got {','.join(header)}"
            )
        ids, rows, targets = [], [], []
        for n, rec in enumerate(reader, start=2):
            if len(rec) != len(_TABLE_HEADER):
                raise ValueError(f"{path}: line {n}: expected {len(_TABLE_HEADER)} cells")
            ids.append(rec[0])
            rows.append(
                [
                    _parse_float(c, path, n, name)
                    for c, name in zip(rec[1:-1], FEATURE_COLUMNS)
                ]
            )
            targets.append(_parse_float(rec[-1], path, n, TARGET_COLUMN))
    features = np.asarray(rows) if rows else np.empty((0, len(FEATURE_COLUMNS)))
    return FeatureTable(ids, features, np.asarray(targets))

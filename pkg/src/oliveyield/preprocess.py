"""Radiometric normalization and scene mosaicking.

All arithmetic runs in float64 and results are stored back as float32.
Nodata samples pass through every operation untouched.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .raster import GridRaster

DEFAULT_BINS = 256


def rescale_linear(
    raster: GridRaster, gain: float, offset: float, clamp01: bool = False
) -> GridRaster:
    """Apply ``v -> gain * v + offset`` to every valid sample.

    With ``clamp01`` the result is clipped to [0, 1]. Typical use is
    converting stored digital numbers to surface reflectance (for Landsat
    Collection 2 that is gain 2.75e-5, offset -0.2), but no constants are
    assumed here.
    """
    if not (math.isfinite(gain) and math.isfinite(offset)):
        raise ValueError("gain and offset must be finite")
    valid = raster.valid_mask()
    out = raster.values.astype(np.float64)
    scaled = gain * out + offset
    if clamp01:
        scaled = np.clip(scaled, 0.0, 1.0)
    out = np.where(valid, scaled, raster.nodata).astype(np.float32)
    return GridRaster(
        out, raster.transform, raster.crs_tag, raster.nodata, raster.band_names
    )


def _band_cdf(values: np.ndarray, bins: int):
    """Binned CDF of a 1-D sample: (edges, cumulative fractions at edges).

    The first edge carries fraction 0 and the last carries 1, so forward
    lookup and inverse lookup are both linear interpolations on the pair.
    """
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        return None  # constant band, handled by callers
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    fractions = np.concatenate(([0.0], np.cumsum(counts) / values.size))
    return edges, fractions


def histogram_match(
    source: GridRaster, reference: GridRaster, bins: int = DEFAULT_BINS
) -> GridRaster:
    """Map each source band onto the reference band's value distribution.

    Per band, a valid source value ``v`` maps to the reference quantile at
    level ``F_src(v)`` where ``F_src`` is the binned empirical CDF (``bins``
    equal-width bins spanning the band's valid min..max). Quantile inversion
    interpolates linearly between reference bin edges. A constant source band
    has ``F_src == 1`` everywhere and maps to the reference band maximum.
    Source grid geometry and nodata samples are preserved.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    if source.band_count != reference.band_count:
        raise ValueError(
            f"band count mismatch: source has {source.band_count}, "
            f"reference has {reference.band_count}"
        )

    out = source.values.astype(np.float64).copy()
    for b in range(source.band_count):
        src_band = source.band(b)
        ref_band = reference.band(b)
        src_mask = src_band != np.float32(source.nodata)
        ref_mask = ref_band != np.float32(reference.nodata)
        if not src_mask.any():
            raise ValueError(f"source band {b} has no valid pixels")
        if not ref_mask.any():
            raise ValueError(f"reference band {b} has no valid pixels")

        src_vals = src_band[src_mask].astype(np.float64)
        ref_vals = ref_band[ref_mask].astype(np.float64)

        src_cdf = _band_cdf(src_vals, bins)
        levels = (
            np.ones_like(src_vals)
            if src_cdf is None
            else np.interp(src_vals, src_cdf[0], src_cdf[1])
        )

        ref_cdf = _band_cdf(ref_vals, bins)
        if ref_cdf is None:
            matched = np.full_like(src_vals, float(ref_vals[0]))
        else:
            matched = np.interp(levels, ref_cdf[1], ref_cdf[0])

        band_out = out[b]
        band_out[src_mask] = matched
        band_out[~src_mask] = source.nodata

    return GridRaster(
        out.astype(np.float32),
        source.transform,
        source.crs_tag,
        source.nodata,
        source.band_names,
    )


def _check_alignment(reference: GridRaster, scene: GridRaster) -> tuple[int, int]:
    """Integer pixel offset of ``scene`` origin relative to ``reference``."""
    if scene.crs_tag != reference.crs_tag:
        raise ValueError("mosaic inputs must share a CRS")
    if scene.pixel_w != reference.pixel_w or scene.pixel_h != reference.pixel_h:
        raise ValueError("mosaic inputs must share pixel size")
    if scene.band_count != reference.band_count:
        raise ValueError("mosaic inputs must share band count")
    dc = (scene.origin_x - reference.origin_x) / reference.pixel_w
    dr = (scene.origin_y - reference.origin_y) / reference.pixel_h
    if abs(dc - round(dc)) > 1e-6 or abs(dr - round(dr)) > 1e-6:
        raise ValueError("mosaic inputs are not grid-aligned")
    return int(round(dc)), int(round(dr))


def mosaic(
    reference: GridRaster,
    others: Sequence[GridRaster],
    match_first: bool = False,
    bins: int = DEFAULT_BINS,
) -> GridRaster:
    """Merge grid-aligned scenes over the union of their extents.

    The reference scene is placed first and its valid samples win wherever
    scenes overlap; remaining scenes fill still-empty cells in list order.
    With ``match_first`` every other scene is histogram-matched to the
    reference before placement. Cells covered by no valid sample hold the
    reference nodata sentinel.
    """
    scenes = [reference, *others]
    offsets = [(0, 0)] + [_check_alignment(reference, s) for s in others]

    cols = [off[0] for off in offsets]
    rows = [off[1] for off in offsets]
    col0 = min(cols)
    row0 = min(rows)
    col1 = max(off[0] + s.width for off, s in zip(offsets, scenes))
    row1 = max(off[1] + s.height for off, s in zip(offsets, scenes))
    width = col1 - col0
    height = row1 - row0

    out = np.full(
        (reference.band_count, height, width), reference.nodata, dtype=np.float32
    )
    filled = np.zeros_like(out, dtype=bool)

    for i, (scene, (dc, dr)) in enumerate(zip(scenes, offsets)):
        if match_first and i > 0:
            scene = histogram_match(scene, reference, bins)
        r = dr - row0
        c = dc - col0
        window = out[:, r : r + scene.height, c : c + scene.width]
        window_filled = filled[:, r : r + scene.height, c : c + scene.width]
        valid = scene.values != np.float32(scene.nodata)
        place = valid & ~window_filled
        window[place] = scene.values[place]
        window_filled[place] = True

    transform = (
        reference.origin_x + col0 * reference.pixel_w,
        reference.pixel_w,
        0.0,
        reference.origin_y + row0 * reference.pixel_h,
        0.0,
        reference.pixel_h,
    )
    return GridRaster(
        out, transform, reference.crs_tag, reference.nodata, reference.band_names
    )

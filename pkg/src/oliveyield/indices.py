"""Per-pixel spectral index kernels and the 12-band analysis stack.

Scalar kernels return ``nan`` where a formula is undefined (zero
denominator). Raster application additionally emits nodata wherever any
input sample is nodata or a used reflectance is negative; out-of-range
pixels are never clamped, they are dropped downstream.

Index values:

* ndvi      (nir - red) / (nir + red)
* gndvi     (nir - green) / (nir + green)
* savi      (1 + L) * (nir - red) / (nir + red + L), soil factor L >= 0
* ndwi      (swir1 - nir) / (swir1 + nir)
* ci_green  nir / green - 1
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import GridRaster

INDEX_BAND_NAMES = ("ndvi", "gndvi", "savi", "ndwi", "ci_green")


@dataclass(frozen=True)
class IndexParams:
    """Tunable index constants; only SAVI carries one."""

    savi_l: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.savi_l) and self.savi_l >= 0.0):
            raise ValueError("savi_l must be finite and >= 0")


@dataclass(frozen=True)
class BandRoles:
    """Zero-based positions of the bands the index formulas consume.

    Defaults follow the 7-band composite convention where band 3 is green
    (560 nm), band 4 red (655 nm), band 5 near-infrared (865 nm) and band 6
    shortwave-infrared 1.
    """

    green: int = 2
    red: int = 3
    nir: int = 4
    swir1: int = 5


DEFAULT_ROLES = BandRoles()


# -- scalar kernels ----------------------------------------------------------


def ndvi(nir: float, red: float) -> float:
    d = nir + red
    return (nir - red) / d if d != 0.0 else math.nan


def gndvi(nir: float, green: float) -> float:
    d = nir + green
    return (nir - green) / d if d != 0.0 else math.nan


def savi(nir: float, red: float, l: float = 0.5) -> float:
    if l < 0.0:
        raise ValueError("soil adjustment factor must be >= 0")
    d = nir + red + l
    return (1.0 + l) * (nir - red) / d if d != 0.0 else math.nan


def ndwi(swir1: float, nir: float) -> float:
    d = swir1 + nir
    return (swir1 - nir) / d if d != 0.0 else math.nan


def ci_green(nir: float, green: float) -> float:
    return nir / green - 1.0 if green != 0.0 else math.nan


# -- raster-wide application -------------------------------------------------


def _apply(numerator, denominator, inputs, nodata):
    """Evaluate a ratio kernel over arrays, masking invalid pixels.

    A pixel is invalid when any input equals ``nodata``, any input is
    negative, or the denominator is zero.
    """
    valid = np.ones(inputs[0].shape, dtype=bool)
    for arr in inputs:
        valid &= arr != nodata
        valid &= arr >= 0.0
    valid &= denominator != 0.0
    out = np.full(inputs[0].shape, float(nodata), dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(numerator, denominator, out=out, where=valid)
    return out


def ndvi_array(nir, red, nodata):
    nir = np.asarray(nir, dtype=np.float64)
    red = np.asarray(red, dtype=np.float64)
    return _apply(nir - red, nir + red, (nir, red), float(nodata))


def gndvi_array(nir, green, nodata):
    nir = np.asarray(nir, dtype=np.float64)
    green = np.asarray(green, dtype=np.float64)
    return _apply(nir - green, nir + green, (nir, green), float(nodata))


def savi_array(nir, red, nodata, l: float = 0.5):
    if l < 0.0:
        raise ValueError("soil adjustment factor must be >= 0")
    nir = np.asarray(nir, dtype=np.float64)
    red = np.asarray(red, dtype=np.float64)
    return _apply((1.0 + l) * (nir - red), nir + red + l, (nir, red), float(nodata))


def ndwi_array(swir1, nir, nodata):
    swir1 = np.asarray(swir1, dtype=np.float64)
    nir = np.asarray(nir, dtype=np.float64)
    return _apply(swir1 - nir, swir1 + nir, (swir1, nir), float(nodata))


def ci_green_array(nir, green, nodata):
    nir = np.asarray(nir, dtype=np.float64)
    green = np.asarray(green, dtype=np.float64)
    nodata = float(nodata)
    valid = (nir != nodata) & (green != nodata) & (nir >= 0.0) & (green > 0.0)
    out = np.full(nir.shape, nodata, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.divide(nir, green, out=np.zeros_like(out), where=valid)
    out[valid] = ratio[valid] - 1.0
    return out


def compute_index_stack(
    composite: GridRaster,
    params: IndexParams = IndexParams(),
    roles: BandRoles = DEFAULT_ROLES,
) -> GridRaster:
    """Append the five index bands to a 7-band reflectance composite.

    Output band order is the seven inputs followed by ndvi, gndvi, savi,
    ndwi, ci_green. A pixel where any of the seven inputs is nodata gets
    nodata in all five index bands.
    """
    if composite.band_count != 7:
        raise ValueError(
            f"index stack needs a 7-band composite, got {composite.band_count} bands"
        )
    nodata = composite.nodata
    bands = composite.values.astype(np.float64)
    all_valid = (composite.values != np.float32(nodata)).all(axis=0)

    green = bands[roles.green]
    red = bands[roles.red]
    nir = bands[roles.nir]
    swir1 = bands[roles.swir1]

    index_bands = [
        ndvi_array(nir, red, nodata),
        gndvi_array(nir, green, nodata),
        savi_array(nir, red, nodata, params.savi_l),
        ndwi_array(swir1, nir, nodata),
        ci_green_array(nir, green, nodata),
    ]
    stacked = np.stack([np.where(all_valid, b, nodata) for b in index_bands])
    out = np.concatenate([composite.values, stacked.astype(np.float32)], axis=0)
    names = composite.band_names + INDEX_BAND_NAMES
    return GridRaster(out, composite.transform, composite.crs_tag, nodata, names)

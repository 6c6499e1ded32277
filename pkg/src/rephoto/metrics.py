"""Masked image-difference metrics and completeness.

All patch metrics operate on luminance; chrominance differences are covered
by the Cb+Cr error. A pixel's error is defined when the pixel itself is
mask-valid and enough of its patch window is in-bounds and mask-valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rephoto.scene import ValidationError

METRIC_IDS = ("cbcr", "ncc", "zssd", "dssim", "census")

_FLAT_STD = 1e-6
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class MetricConfig:
    """Patch size and validity threshold shared by all patch metrics."""

    patch: int = 15
    min_valid_fraction: float = 0.5

    def __post_init__(self):
        if self.patch < 3 or self.patch % 2 == 0:
            raise ValidationError("patch size must be odd and >= 3")
        if not 0.0 < self.min_valid_fraction <= 1.0:
            raise ValidationError("min_valid_fraction must be in (0, 1]")


@dataclass(frozen=True)
class ErrorImage:
    """Per-pixel nonnegative error with a defined-pixel mask."""

    value: np.ndarray    # (H, W) float, meaningful only where defined
    defined: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.value.shape != self.defined.shape:
            raise ValidationError("error value/defined shapes differ")


def rgb_to_ycbcr(image: np.ndarray) -> np.ndarray:
    """BT.601 full-range YCbCr; Y in [0, 1], Cb/Cr in [-0.5, 0.5]."""
    r, g, b = image[..., 0], image[..., 1], image[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - y) / 1.772
    cr = (r - y) / 1.402
    return np.stack([y, cb, cr], axis=-1)


def luminance(image: np.ndarray) -> np.ndarray:
    return 0.299 * image[..., 0] + 0.587 * image[..., 1] + 0.114 * image[..., 2]


def completeness(mask: np.ndarray) -> float:
    """Fraction of rendered (valid) pixels."""
    return float(np.count_nonzero(mask)) / mask.size


def mean_error(err: ErrorImage) -> float | None:
    """Mean over defined pixels; None when nothing is defined."""
    n = np.count_nonzero(err.defined)
    if n == 0:
        return None
    return float(err.value[err.defined].sum() / n)


def _check_dims(photo, rephoto, mask):
    if photo.shape != rephoto.shape or photo.shape[:2] != mask.shape:
        raise ValidationError("photo/rephoto/mask dimensions differ")


def cbcr_error(photo, rephoto, mask, cfg: MetricConfig | None = None) -> ErrorImage:
    """Pixel-wise sum of absolute chrominance differences, range [0, 2]."""
    _check_dims(photo, rephoto, mask)
    a = rgb_to_ycbcr(photo)
    b = rgb_to_ycbcr(rephoto)
    value = np.abs(a[..., 1] - b[..., 1]) + np.abs(a[..., 2] - b[..., 2])
    value = np.where(mask, value, 0.0)
    return ErrorImage(value=value, defined=mask.copy())


def _window_sums(arr: np.ndarray, patch: int) -> np.ndarray:
    """Sum of arr over the centered patch window, zeros outside the image."""
    h, w = arr.shape
    r = patch // 2
    ii = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(arr, axis=0), axis=1, out=ii[1:, 1:])
    y = np.arange(h)
    x = np.arange(w)
    y0 = np.clip(y - r, 0, h)
    y1 = np.clip(y + r + 1, 0, h)
    x0 = np.clip(x - r, 0, w)
    x1 = np.clip(x + r + 1, 0, w)
    return (ii[np.ix_(y1, x1)] - ii[np.ix_(y0, x1)]
            - ii[np.ix_(y1, x0)] + ii[np.ix_(y0, x0)])


def _patch_moments(ya, yb, mask, cfg):
    """Masked patch statistics shared by ncc/zssd/dssim.

    Returns (defined, n, ma, mb, va, vb, cov) with population variances;
    statistics are valid only where defined.
    """
    valid = mask.astype(np.float64)
    n = _window_sums(valid, cfg.patch)
    defined = mask & (n >= cfg.min_valid_fraction * cfg.patch ** 2)
    ns = np.maximum(n, 1.0)
    a = np.where(mask, ya, 0.0)
    b = np.where(mask, yb, 0.0)
    ma = _window_sums(a, cfg.patch) / ns
    mb = _window_sums(b, cfg.patch) / ns
    va = _window_sums(a * a, cfg.patch) / ns - ma * ma
    vb = _window_sums(b * b, cfg.patch) / ns - mb * mb
    cov = _window_sums(a * b, cfg.patch) / ns - ma * mb
    return defined, n, ma, mb, np.maximum(va, 0.0), np.maximum(vb, 0.0), cov


def ncc_error(photo, rephoto, mask, cfg: MetricConfig | None = None) -> ErrorImage:
    """1 - patchwise normalized cross-correlation on luminance, range [0, 2].

    Flat patches (std below 1e-6) are special-cased: both flat -> 0,
    exactly one flat -> 1.
    """
    cfg = cfg or MetricConfig()
    _check_dims(photo, rephoto, mask)
    defined, _, _, _, va, vb, cov = _patch_moments(
        luminance(photo), luminance(rephoto), mask, cfg)
    sa = np.sqrt(va)
    sb = np.sqrt(vb)
    flat_a = sa < _FLAT_STD
    flat_b = sb < _FLAT_STD
    denom = np.where(flat_a | flat_b, 1.0, sa * sb)
    value = np.clip(1.0 - cov / denom, 0.0, 2.0)
    value = np.where(flat_a & flat_b, 0.0, np.where(flat_a ^ flat_b, 1.0, value))
    value = np.where(defined, value, 0.0)
    return ErrorImage(value=value, defined=defined)


def zssd_error(photo, rephoto, mask, cfg: MetricConfig | None = None) -> ErrorImage:
    """Zero-mean SSD per valid patch position, on luminance."""
    cfg = cfg or MetricConfig()
    _check_dims(photo, rephoto, mask)
    defined, _, _, _, va, vb, cov = _patch_moments(
        luminance(photo), luminance(rephoto), mask, cfg)
    value = np.maximum(va + vb - 2.0 * cov, 0.0)
    value = np.where(defined, value, 0.0)
    return ErrorImage(value=value, defined=defined)


def dssim_error(photo, rephoto, mask, cfg: MetricConfig | None = None) -> ErrorImage:
    """(1 - SSIM) / 2 with a uniform window over valid patch positions."""
    cfg = cfg or MetricConfig()
    _check_dims(photo, rephoto, mask)
    defined, _, ma, mb, va, vb, cov = _patch_moments(
        luminance(photo), luminance(rephoto), mask, cfg)
    ssim = (((2.0 * ma * mb + _SSIM_C1) * (2.0 * cov + _SSIM_C2))
            / ((ma * ma + mb * mb + _SSIM_C1) * (va + vb + _SSIM_C2)))
    value = np.clip((1.0 - ssim) / 2.0, 0.0, 1.0)
    value = np.where(defined, value, 0.0)
    return ErrorImage(value=value, defined=defined)


def census_error(photo, rephoto, mask, cfg: MetricConfig | None = None) -> ErrorImage:
    """Normalized Hamming distance of census bit strings on luminance.

    A bit is 1 iff the neighbor is strictly darker than the center; only
    bit positions valid in both patches are compared, center excluded.
    """
    cfg = cfg or MetricConfig()
    _check_dims(photo, rephoto, mask)
    ya = luminance(photo)
    yb = luminance(rephoto)
    h, w = mask.shape
    r = cfg.patch // 2

    n_valid = _window_sums(mask.astype(np.float64), cfg.patch)
    defined = mask & (n_valid >= cfg.min_valid_fraction * cfg.patch ** 2)

    hamming = np.zeros((h, w), dtype=np.int64)
    compared = np.zeros((h, w), dtype=np.int64)
    for dy in range(-r, r + 1):
        ys0 = max(0, -dy)
        ys1 = min(h, h - dy)
        xs_range = range(-r, r + 1)
        for dx in xs_range:
            if dy == 0 and dx == 0:
                continue
            xs0 = max(0, -dx)
            xs1 = min(w, w - dx)
            if ys0 >= ys1 or xs0 >= xs1:
                continue
            dst = (slice(ys0, ys1), slice(xs0, xs1))
            src = (slice(ys0 + dy, ys1 + dy), slice(xs0 + dx, xs1 + dx))
            ok = mask[src]
            bit_a = ya[src] < ya[dst]
            bit_b = yb[src] < yb[dst]
            hamming[dst] += (ok & (bit_a != bit_b))
            compared[dst] += ok
    value = np.where(compared > 0, hamming / np.maximum(compared, 1), 0.0)
    value = np.where(defined, value, 0.0)
    return ErrorImage(value=value, defined=defined)


METRICS = {
    "cbcr": cbcr_error,
    "ncc": ncc_error,
    "zssd": zssd_error,
    "dssim": dssim_error,
    "census": census_error,
}


def compute_metric(metric_id: str, photo, rephoto, mask,
                   cfg: MetricConfig | None = None) -> ErrorImage:
    if metric_id not in METRICS:
        raise ValidationError(f"unknown metric {metric_id!r}; "
                              f"choose from {', '.join(METRIC_IDS)}")
    return METRICS[metric_id](photo, rephoto, mask, cfg)

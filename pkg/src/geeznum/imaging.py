"""Character-scan normalization: grayscale, threshold, invert, crop, resize, flatten.

Gray images are plain 2-D ``uint8`` arrays. Binary images carry their polarity
so the ink-is-one convention required downstream cannot be silently broken.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyContentError, PolarityError

OUT_ROWS = 45
OUT_COLS = 40
N_FEATURES = OUT_ROWS * OUT_COLS

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class Polarity(enum.Enum):
    INK_IS_ZERO = "ink-is-zero"
    INK_IS_ONE = "ink-is-one"


@dataclass(frozen=True, eq=False)
class BinaryImage:
    pixels: np.ndarray
    polarity: Polarity

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise DimensionError(f"binary image must be a non-empty 2-D raster, got shape {px.shape}")
        if not np.isin(px, (0, 1)).all():
            raise ValueError("binary image pixels must be 0 or 1")
        object.__setattr__(self, "pixels", px.astype(np.uint8))

    @property
    def shape(self):
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return self.polarity is other.polarity and np.array_equal(self.pixels, other.pixels)


def _require(img: BinaryImage, polarity: Polarity, op: str):
    if img.polarity is not polarity:
        raise PolarityError(f"{op} expects a {polarity.value} image, got {img.polarity.value}")


def to_grayscale(image) -> np.ndarray:
    """Rec.601 luma, rounded half-up. 2-D input is returned as-is."""
    arr = np.asarray(image)
    if arr.size == 0 or arr.ndim not in (2, 3):
        raise DimensionError(f"expected a non-empty 2-D or 3-D raster, got shape {arr.shape}")
    if arr.ndim == 2:
        return arr.astype(np.uint8)
    if arr.shape[2] == 1:
        return arr[:, :, 0].astype(np.uint8)
    if arr.shape[2] not in (3, 4):
        raise DimensionError(f"expected 3 color channels, got {arr.shape[2]}")
    rgb = arr[:, :, :3].astype(np.float64)
    luma = rgb @ np.array(LUMA_WEIGHTS)
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(img: np.ndarray) -> int:
    """Otsu's global threshold over the 256-bin histogram.

    The returned ``t`` splits pixels into ``p < t`` and ``p >= t``, the same
    partition ``binarize`` applies. Between-class variance is compared exactly
    in integer arithmetic, so ties resolve to the smallest ``t``. A constant
    image returns its single intensity.
    """
    gray = np.asarray(img)
    if gray.size == 0:
        raise DimensionError("cannot threshold an empty image")
    hist = np.bincount(gray.astype(np.uint8).ravel(), minlength=256)
    levels = np.flatnonzero(hist)
    if levels.size == 1:
        return int(levels[0])

    n_total = int(hist.sum())
    s_total = int(np.dot(hist, np.arange(256)))
    best_t, best_num, best_den = 0, 0, 1
    n_below = s_below = 0
    for t in range(1, 256):
        n_below += int(hist[t - 1])
        s_below += (t - 1) * int(hist[t - 1])
        n_above = n_total - n_below
        if n_below == 0 or n_above == 0:
            continue
        # variance ∝ (s_below*N - S*n_below)^2 / (n_below*n_above); N^2 factor is common
        num = (s_below * n_total - s_total * n_below) ** 2
        den = n_below * n_above
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(img: np.ndarray, t: int) -> BinaryImage:
    """Light pixels (``>= t``) become 1, dark ink becomes 0."""
    if not 0 <= int(t) <= 255:
        raise ValueError(f"threshold must be in 0..255, got {t}")
    gray = np.asarray(img)
    if gray.ndim != 2 or gray.size == 0:
        raise DimensionError(f"expected a non-empty gray raster, got shape {gray.shape}")
    return BinaryImage((gray >= int(t)).astype(np.uint8), Polarity.INK_IS_ZERO)


def invert(img: BinaryImage) -> BinaryImage:
    _require(img, Polarity.INK_IS_ZERO, "invert")
    return BinaryImage(1 - img.pixels, Polarity.INK_IS_ONE)


def content_box(img: BinaryImage) -> tuple[int, int, int, int]:
    """``(first_row, last_row, first_col, last_col)`` of ink, inclusive."""
    _require(img, Polarity.INK_IS_ONE, "content_box")
    rows = np.flatnonzero(img.pixels.any(axis=1))
    if rows.size == 0:
        raise EmptyContentError("blank scan: no ink pixels to crop")
    cols = np.flatnonzero(img.pixels.any(axis=0))
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def crop_to_content(img: BinaryImage) -> BinaryImage:
    r0, r1, c0, c1 = content_box(img)
    return BinaryImage(img.pixels[r0:r1 + 1, c0:c1 + 1], Polarity.INK_IS_ONE)


def resize_nearest(img: BinaryImage, out_rows: int = OUT_ROWS, out_cols: int = OUT_COLS) -> BinaryImage:
    """Nearest-neighbor resampling at pixel centers.

    Output ``(r, c)`` samples input ``(floor((r+0.5)*in_rows/out_rows),
    floor((c+0.5)*in_cols/out_cols))``, evaluated in integers.
    """
    _require(img, Polarity.INK_IS_ONE, "resize_nearest")
    in_rows, in_cols = img.shape
    ri = (2 * np.arange(out_rows) + 1) * in_rows // (2 * out_rows)
    ci = (2 * np.arange(out_cols) + 1) * in_cols // (2 * out_cols)
    return BinaryImage(img.pixels[np.ix_(ri, ci)], Polarity.INK_IS_ONE)


def flatten(img: BinaryImage) -> np.ndarray:
    """Column-major feature vector: ``out[k] = pixel(k % 45, k // 45)``."""
    _require(img, Polarity.INK_IS_ONE, "flatten")
    if img.shape != (OUT_ROWS, OUT_COLS):
        raise DimensionError(f"flatten expects {OUT_ROWS}x{OUT_COLS}, got {img.shape[0]}x{img.shape[1]}")
    return img.pixels.flatten(order="F")


def unflatten(vec) -> BinaryImage:
    v = np.asarray(vec)
    if v.shape != (N_FEATURES,):
        raise DimensionError(f"feature vector must have length {N_FEATURES}, got shape {v.shape}")
    return BinaryImage(v.reshape(OUT_ROWS, OUT_COLS, order="F"), Polarity.INK_IS_ONE)


def preprocess(image, threshold: int | None = None) -> np.ndarray:
    """Run a raw scan through the whole normalization chain.

    Parameters
    ----------
    image : array_like
        Gray ``(rows, cols)`` or color ``(rows, cols, 3)`` raster in 0..255.
    threshold : int, optional
        Fixed binarization threshold. Otsu's method is used when omitted.

    Returns
    -------
    numpy.ndarray
        Length-1800 ``uint8`` vector of 0/1 values.
    """
    gray = to_grayscale(image)
    t = otsu_threshold(gray) if threshold is None else threshold
    ink = invert(binarize(gray, t))
    return flatten(resize_nearest(crop_to_content(ink)))


def render_page(img: BinaryImage) -> np.ndarray:
    """Ink-is-one raster as an 8-bit page: ink 0, paper 255."""
    _require(img, Polarity.INK_IS_ONE, "render_page")
    return np.where(img.pixels == 1, 0, 255).astype(np.uint8)

"""sRGB <-> CIE Lab conversion and mapping of Lab channels to the (-1,1) net range.

Conventions:
  * 8-bit sRGB frames, D65 white point, 2-degree observer.
  * L in [0,100]; a,b clamped to [-128,127] (full signed-8-bit gamut, so the
    affine normalization below round-trips exactly).
  * Network tensors hold luminance clips of shape (H, W, C, 1) and chrominance
    clips of shape (H, W, C, 2), all values in [-1, 1].

The white point is taken as the XYZ of sRGB white under the conversion matrix
itself, which makes every gray (r=g=b) map to a=b=0 to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, ShapeError

# IEC 61966-2-1 sRGB primaries, linear RGB -> XYZ.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = _RGB_TO_XYZ.sum(axis=1)  # == XYZ of RGB (1,1,1); D65 to 1e-7

_DELTA = 6.0 / 29.0

AB_MIN = -128.0
AB_MAX = 127.0


@dataclass(frozen=True)
class RgbFrame:
    """One 8-bit sRGB frame, pixels shaped (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeError(f"RgbFrame expects (H, W, 3) pixels, got {p.shape}")
        if p.dtype != np.uint8:
            if np.any(p < 0) or np.any(p > 255):
                raise ShapeError("RgbFrame channel values must lie in [0, 255]")
            p = p.astype(np.uint8)
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class LabFrame:
    """One frame in CIE Lab: L in [0,100], a and b in [-128,127], each (H, W)."""

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        L, a, b = (np.asarray(c, dtype=np.float64) for c in (self.L, self.a, self.b))
        if L.ndim != 2 or L.shape != a.shape or L.shape != b.shape:
            raise ShapeError("LabFrame channels must share one (H, W) shape")
        if L.min() < -1e-9 or L.max() > 100.0 + 1e-9:
            raise ShapeError("LabFrame L outside [0, 100]")
        for c in (a, b):
            if c.min() < AB_MIN - 1e-9 or c.max() > AB_MAX + 1e-9:
                raise ShapeError("LabFrame a/b outside [-128, 127]")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def height(self) -> int:
        return self.L.shape[0]

    @property
    def width(self) -> int:
        return self.L.shape[1]


@dataclass(frozen=True)
class NormalizedClip:
    """A window of C frames as a network tensor, shape (H, W, C, K), K in {1,2}."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 4 or v.shape[3] not in (1, 2):
            raise ShapeError(f"NormalizedClip expects (H, W, C, K), K in {{1,2}}, got {v.shape}")
        if np.abs(v).max() > 1.0 + 1e-9:
            raise ShapeError("NormalizedClip values outside [-1, 1]")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def channels(self) -> int:
        return self.values.shape[3]


def _srgb_decode(c):
    # 8-bit-scaled sRGB in [0,1] -> linear light
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_encode(c):
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(np.maximum(c, 0.0), 1 / 2.4) - 0.055)


def _lab_f(t):
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3 * _DELTA**2) + 4.0 / 29.0)


def _lab_finv(t):
    return np.where(t > _DELTA, t**3, 3 * _DELTA**2 * (t - 4.0 / 29.0))


def srgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorized sRGB->Lab on an (..., 3) array of 8-bit values (any numeric dtype)."""
    lin = _srgb_decode(np.asarray(rgb, dtype=np.float64) / 255.0)
    xyz = lin @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb_array(lab: np.ndarray) -> np.ndarray:
    """Vectorized Lab->sRGB; out-of-gamut values clamp to [0,255]. Returns uint8."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_finv(fx), _lab_finv(fy), _lab_finv(fz)], axis=-1) * _WHITE
    lin = xyz @ _XYZ_TO_RGB.T
    rgb = _srgb_encode(lin) * 255.0
    return np.rint(np.clip(rgb, 0.0, 255.0)).astype(np.uint8)


def rgb_to_lab(frame: RgbFrame) -> LabFrame:
    """Convert one 8-bit sRGB frame to Lab (D65), clamping a,b into [-128,127]."""
    lab = srgb_to_lab_array(frame.pixels)
    return LabFrame(
        L=np.clip(lab[..., 0], 0.0, 100.0),
        a=np.clip(lab[..., 1], AB_MIN, AB_MAX),
        b=np.clip(lab[..., 2], AB_MIN, AB_MAX),
    )


def lab_to_rgb(frame: LabFrame) -> RgbFrame:
    """Convert one Lab frame back to 8-bit sRGB, clamping out-of-gamut pixels."""
    lab = np.stack([frame.L, frame.a, frame.b], axis=-1)
    return RgbFrame(lab_to_srgb_array(lab))


# Affine channel maps between Lab units and the network's (-1,1) range.


def l_to_unit(L: np.ndarray) -> np.ndarray:
    return np.asarray(L, dtype=np.float64) / 50.0 - 1.0


def unit_to_l(v: np.ndarray) -> np.ndarray:
    return (np.clip(v, -1.0, 1.0) + 1.0) * 50.0


def ab_to_unit(ab: np.ndarray) -> np.ndarray:
    return (np.asarray(ab, dtype=np.float64) - AB_MIN) / (AB_MAX - AB_MIN) * 2.0 - 1.0


def unit_to_ab(v: np.ndarray) -> np.ndarray:
    return (np.clip(v, -1.0, 1.0) + 1.0) / 2.0 * (AB_MAX - AB_MIN) + AB_MIN


def normalize(frames: Sequence[LabFrame]) -> tuple[NormalizedClip, NormalizedClip]:
    """Map C Lab frames to the network pair (x, y).

    Returns luminance x with shape (H, W, C, 1) and chrominance y with shape
    (H, W, C, 2); all frames must share dimensions.
    """
    if len(frames) < 1:
        raise DimensionError("normalize needs at least one frame")
    h, w = frames[0].height, frames[0].width
    for f in frames:
        if f.height != h or f.width != w:
            raise DimensionError(
                f"mismatched frame dimensions: {(f.height, f.width)} vs {(h, w)}"
            )
    L = np.stack([f.L for f in frames], axis=2)
    a = np.stack([f.a for f in frames], axis=2)
    b = np.stack([f.b for f in frames], axis=2)
    x = l_to_unit(L)[..., np.newaxis]
    y = np.stack([ab_to_unit(a), ab_to_unit(b)], axis=3)
    return NormalizedClip(x), NormalizedClip(y)


def denormalize_ab(ab: NormalizedClip | np.ndarray) -> np.ndarray:
    """Map a chrominance clip from (-1,1) back to a,b units.

    Input values outside [-1,1] are clamped first. Returns an (H, W, C, 2)
    float array with entries in [-128, 127].
    """
    v = ab.values if isinstance(ab, NormalizedClip) else np.asarray(ab, dtype=np.float64)
    if v.ndim != 4 or v.shape[3] != 2:
        raise ShapeError(f"expected chrominance clip (H, W, C, 2), got {v.shape}")
    return unit_to_ab(v)

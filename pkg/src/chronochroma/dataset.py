"""Frame-sequence ingestion, train/test splitting, windowing, and augmentation.

Frames are ingested from directories of image files whose lexicographic name
order equals temporal order (frame_%06d.png recommended). Extracting frames
from video containers is left to external tooling; see the README.

A deterministic synthetic generator of moving colored shapes provides the
desk-scale dataset used by the test and acceptance suites.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from . import colorspace
from .colorspace import NormalizedClip, RgbFrame
from .errors import (
    ConfigError,
    DimensionError,
    FrameIOError,
    NoFramesError,
    TooShortError,
)

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass
class FrameSequence:
    """An ordered list of same-sized RGB frames."""

    frames: list[RgbFrame]
    fps: float = 10.0
    source_id: str = ""

    def __post_init__(self):
        if len(self.frames) < 1:
            raise NoFramesError("FrameSequence needs at least one frame")
        h, w = self.frames[0].height, self.frames[0].width
        for i, f in enumerate(self.frames):
            if f.height != h or f.width != w:
                raise DimensionError(
                    f"frame {i} is {(f.height, f.width)}, expected {(h, w)}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width


@dataclass
class ClipSample:
    """One training/inference unit: luminance input x and chrominance target y."""

    x: NormalizedClip
    y: NormalizedClip
    start_index: int = 0


@dataclass
class AugmentConfig:
    flip_probability: float = 0.5
    noise_variance: float = 1.2e-3
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ConfigError("flip_probability must lie in [0, 1]")
        if self.noise_variance < 0.0:
            raise ConfigError("noise_variance must be >= 0")


@dataclass
class SynthConfig:
    height: int = 32
    width: int = 32
    num_frames: int = 200
    num_shapes: int = 5
    palette_size: int = 4
    motion_amplitude: float = 2.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.height < 16 or self.width < 16:
            raise ConfigError("synthetic frames must be at least 16x16")
        if self.num_frames < 2:
            raise ConfigError("synthetic sequences need at least 2 frames")
        if self.num_shapes < 1 or self.palette_size < 1:
            raise ConfigError("num_shapes and palette_size must be >= 1")
        if self.motion_amplitude < 0.0:
            raise ConfigError("motion_amplitude must be >= 0")


def load_frame_sequence(directory: str | Path, fps: float = 10.0) -> FrameSequence:
    """Load all image files from a directory, ordered by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameIOError(f"not a directory: {directory}")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise NoFramesError(f"no image files found in {directory}")
    frames = []
    for p in paths:
        try:
            with Image.open(p) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except OSError as e:
            raise FrameIOError(f"cannot read frame file {p}: {e}") from e
        frames.append(RgbFrame(arr))
    return FrameSequence(frames=frames, fps=fps, source_id=directory.name)


def save_frame_sequence(seq: FrameSequence, directory: str | Path) -> list[Path]:
    """Write frames as frame_%06d.png under `directory`; returns written paths."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FrameIOError(f"cannot create output directory {directory}: {e}") from e
    written = []
    for i, frame in enumerate(seq.frames):
        path = directory / f"frame_{i:06d}.png"
        try:
            Image.fromarray(frame.pixels).save(path)
        except OSError as e:
            raise FrameIOError(f"cannot write frame file {path}: {e}") from e
        written.append(path)
    return written


def split_train_test(seq: FrameSequence, train_fraction: float) -> tuple[FrameSequence, FrameSequence]:
    """Split chronologically: first floor(train_fraction*N) frames train, rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    n = len(seq)
    if n < 2:
        raise TooShortError(f"cannot split a sequence of {n} frame(s)")
    k = math.floor(train_fraction * n)
    if k < 1:
        raise ConfigError(f"train_fraction {train_fraction} leaves an empty train split for N={n}")
    train = FrameSequence(seq.frames[:k], fps=seq.fps, source_id=seq.source_id + "/train")
    test = FrameSequence(seq.frames[k:], fps=seq.fps, source_id=seq.source_id + "/test")
    return train, test


def windows(seq: FrameSequence, C: int) -> list[ClipSample]:
    """All length-C sliding windows of `seq` as normalized clip samples.

    Produces exactly N-C+1 samples with start indices 0..N-C.
    """
    if C < 1:
        raise ConfigError("window length C must be >= 1")
    n = len(seq)
    if n < C:
        raise TooShortError(f"sequence of {n} frame(s) is shorter than window C={C}")
    lab = [colorspace.rgb_to_lab(f) for f in seq.frames]
    samples = []
    for s in range(n - C + 1):
        x, y = colorspace.normalize(lab[s : s + C])
        samples.append(ClipSample(x=x, y=y, start_index=s))
    return samples


def augment(sample: ClipSample, cfg: AugmentConfig, rng: np.random.Generator) -> ClipSample:
    """Randomly mirror a clip along width and add Gaussian noise to its luminance.

    The flip applies to the whole clip (all C frames together) so temporal
    coherence is preserved; noise perturbs only the luminance input x, in
    normalized units, and the result is clamped back into [-1, 1]. The
    chrominance target y is never perturbed.
    """
    flip = rng.random() < cfg.flip_probability
    x, y = sample.x.values, sample.y.values
    if flip:
        x = x[:, ::-1, :, :]
        y = y[:, ::-1, :, :]
    if cfg.noise_variance > 0.0:
        noise = rng.normal(0.0, math.sqrt(cfg.noise_variance), size=x.shape)
        x = np.clip(x + noise, -1.0, 1.0)
    if not flip and cfg.noise_variance == 0.0:
        return sample
    return ClipSample(x=NormalizedClip(np.ascontiguousarray(x)),
                      y=NormalizedClip(np.ascontiguousarray(y)),
                      start_index=sample.start_index)


# Synthetic data: colored shapes gliding over a static textured background.
# Palette colors are chosen with well-separated luminance so gray level is an
# unambiguous cue for color, which makes the colorization task learnable at
# desk scale.
_PALETTE = [
    (36, 52, 168),    # deep blue, dark
    (204, 34, 30),    # red
    (52, 170, 64),    # green
    (242, 150, 40),   # orange
    (250, 232, 64),   # yellow, bright
    (150, 46, 160),   # violet
    (64, 200, 200),   # cyan
    (122, 76, 34),    # brown
]


def synth_generate(cfg: SynthConfig) -> FrameSequence:
    """Deterministically render a sequence of moving colored shapes.

    Same seed -> bit-identical frames; motion_amplitude=0 -> identical frames.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    h, w, n = cfg.height, cfg.width, cfg.num_frames
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    # static near-achromatic textured background
    phase_x, phase_y = rng.uniform(0.0, 1.0, size=2)
    base = 132.0 + 52.0 * np.sin(2 * np.pi * (1.7 * xx / w + phase_x)) * np.sin(
        2 * np.pi * (1.3 * yy / h + phase_y)
    )
    background = np.stack([base * 1.0, base * 0.985, base * 0.955], axis=-1)

    palette = [_PALETTE[i % len(_PALETTE)] for i in range(cfg.palette_size)]
    r_lo, r_hi = min(h, w) / 7.0, min(h, w) / 4.0
    shapes = []
    for s in range(cfg.num_shapes):
        shapes.append(
            {
                "kind": "disc" if rng.random() < 0.5 else "square",
                "radius": rng.uniform(r_lo, r_hi),
                "color": np.array(palette[s % len(palette)], dtype=np.float64),
                "cx0": rng.uniform(r_lo, w - r_lo),
                "cy0": rng.uniform(r_lo, h - r_lo),
                "freq": rng.uniform(0.02, 0.08, size=2) * 2 * np.pi,
                "phase": rng.uniform(0.0, 2 * np.pi, size=2),
            }
        )

    frames = []
    for t in range(n):
        canvas = background.copy()
        for sh in shapes:
            cx = sh["cx0"] + cfg.motion_amplitude * math.sin(sh["freq"][0] * t + sh["phase"][0])
            cy = sh["cy0"] + cfg.motion_amplitude * math.sin(sh["freq"][1] * t + sh["phase"][1])
            if sh["kind"] == "disc":
                mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= sh["radius"] ** 2
            else:
                mask = (np.abs(xx - cx) <= sh["radius"]) & (np.abs(yy - cy) <= sh["radius"])
            canvas[mask] = sh["color"]
        frames.append(RgbFrame(np.rint(np.clip(canvas, 0.0, 255.0)).astype(np.uint8)))
    return FrameSequence(frames=frames, fps=10.0, source_id=f"synthetic-{cfg.rng_seed}")

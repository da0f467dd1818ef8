"""Colorize a monochrome sequence with overlapping sliding windows.

The trained generator is run in eval mode on every length-C window (windows
advance one frame at a time), so interior frames collect C chrominance
estimates. Estimates are fused per frame as a maximum-a-posteriori choice:
under the uninformative prior this is exactly the per-pixel mean. Boundary
frames average whatever estimates cover them. The fused chrominance is
recombined with the input luminance to produce RGB frames.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import colorspace
from .colorspace import LabFrame, RgbFrame
from .dataset import FrameSequence, load_frame_sequence, save_frame_sequence
from .errors import ChronochromaError, ConfigError, DimensionError, TooShortError
from .model import ModelParams, generator_forward, load_checkpoint

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Prior:
    """Distribution over (a, b) used when fusing window estimates.

    The uninformative variant carries no parameters and makes the MAP fuse an
    exact per-pixel mean. A custom prior supplies a log-density over (a, b);
    fusion then scores a small candidate grid around the mean (one refinement
    step) against log-prior plus a Gaussian likelihood of width
    `likelihood_sigma` centered on each estimate.
    """

    kind: str = "uninformative"
    log_density: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    likelihood_sigma: float = 5.0
    grid_radius: float = 10.0
    grid_points: int = 5

    def __post_init__(self):
        if self.kind not in ("uninformative", "custom"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if self.kind == "uninformative" and self.log_density is not None:
            raise ConfigError("the uninformative prior carries no parameters")
        if self.kind == "custom" and self.log_density is None:
            raise ConfigError("a custom prior needs a log_density")

    @classmethod
    def uninformative(cls) -> "Prior":
        return cls()

    @classmethod
    def custom(cls, log_density, likelihood_sigma=5.0, grid_radius=10.0, grid_points=5) -> "Prior":
        return cls(
            kind="custom",
            log_density=log_density,
            likelihood_sigma=likelihood_sigma,
            grid_radius=grid_radius,
            grid_points=grid_points,
        )


@dataclass
class EstimateSet:
    """Per frame, the chrominance estimates contributed by covering windows.

    estimates[t] is a list of (window_start, (H, W, 2) a,b array). For N >= C
    frames, frame t is covered by min(t, N-C) - max(0, t-C+1) + 1 windows;
    interior frames by exactly C.
    """

    num_frames: int
    window: int
    estimates: list[list[tuple[int, np.ndarray]]] = field(default_factory=list)

    def count(self, t: int) -> int:
        return len(self.estimates[t])

    def total_estimates(self) -> int:
        return sum(len(e) for e in self.estimates)

    def expected_count(self, t: int) -> int:
        n, c = self.num_frames, self.window
        return min(t, n - c) - max(0, t - c + 1) + 1

    def validate(self) -> None:
        for t in range(self.num_frames):
            if self.count(t) != self.expected_count(t):
                raise ChronochromaError(
                    f"frame {t} has {self.count(t)} estimates, expected {self.expected_count(t)}"
                )


def _as_luminance_array(luminance_seq) -> np.ndarray:
    arr = np.asarray(luminance_seq, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"expected luminance (N, H, W), got shape {arr.shape}")
    return arr


def sliding_window_estimates(
    luminance_seq,
    params: ModelParams,
    C: int,
    window_batch: int = 8,
) -> EstimateSet:
    """Run the generator over every length-C window of an L-channel sequence.

    `luminance_seq` holds L values in [0, 100], shape (N, H, W). Returns the
    denormalized a,b estimates routed to the frames each window covers.
    """
    if C < 1:
        raise ConfigError("window length C must be >= 1")
    lum = _as_luminance_array(luminance_seq)
    n = lum.shape[0]
    if n < C:
        raise TooShortError(f"sequence of {n} frame(s) is shorter than window C={C}")

    x_unit = colorspace.l_to_unit(lum)  # (N, H, W)
    est = EstimateSet(num_frames=n, window=C, estimates=[[] for _ in range(n)])
    starts = list(range(n - C + 1))
    for i in range(0, len(starts), window_batch):
        chunk = starts[i : i + window_batch]
        # (B, H, W, C, 1)
        xb = np.stack(
            [x_unit[s : s + C].transpose(1, 2, 0)[..., np.newaxis] for s in chunk]
        )
        yb = generator_forward(xb, params, mode="eval")
        for j, s in enumerate(chunk):
            ab = colorspace.denormalize_ab(yb[j])  # (H, W, C, 2)
            for k in range(C):
                est.estimates[s + k].append((s, ab[:, :, k, :]))
    est.validate()
    return est


def aggregate(est: EstimateSet, prior: Prior | None = None) -> np.ndarray:
    """Fuse each frame's estimates into one (N, H, W, 2) chrominance array."""
    if prior is None:
        prior = Prior.uninformative()
    out = []
    for t in range(est.num_frames):
        entries = est.estimates[t]
        if not entries:
            raise ChronochromaError(f"frame {t} has no estimates to aggregate")
        stack = np.stack([ab for _, ab in entries])  # (M, H, W, 2)
        mean = stack.mean(axis=0)
        if prior.kind == "uninformative":
            out.append(mean)
        else:
            out.append(_map_refine(stack, mean, prior))
    return np.stack(out)


def _map_refine(stack: np.ndarray, mean: np.ndarray, prior: Prior) -> np.ndarray:
    """One grid-refinement MAP step around the mean under a custom prior."""
    g = np.linspace(-prior.grid_radius, prior.grid_radius, prior.grid_points)
    offsets = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    inv_two_sigma2 = 1.0 / (2.0 * prior.likelihood_sigma**2)
    best_score = None
    best = None
    for off in offsets:
        cand = np.clip(mean + off, colorspace.AB_MIN, colorspace.AB_MAX)
        sq = ((stack - cand) ** 2).sum(axis=-1).sum(axis=0)  # (H, W)
        score = prior.log_density(cand[..., 0], cand[..., 1]) - inv_two_sigma2 * sq
        if best_score is None:
            best_score, best = score, cand
        else:
            better = score > best_score
            best_score = np.where(better, score, best_score)
            best = np.where(better[..., np.newaxis], cand, best)
    return best


def recombine(luminance_seq, chroma: np.ndarray) -> FrameSequence:
    """Join input luminance with fused a,b chrominance into RGB frames."""
    lum = _as_luminance_array(luminance_seq)
    chroma = np.asarray(chroma, dtype=np.float64)
    if chroma.ndim != 4 or chroma.shape[3] != 2 or chroma.shape[:3] != lum.shape:
        raise DimensionError(
            f"chrominance {chroma.shape} does not match luminance {lum.shape}"
        )
    frames = []
    for t in range(lum.shape[0]):
        lab = LabFrame(
            L=lum[t],
            a=np.clip(chroma[t, :, :, 0], colorspace.AB_MIN, colorspace.AB_MAX),
            b=np.clip(chroma[t, :, :, 1], colorspace.AB_MIN, colorspace.AB_MAX),
        )
        frames.append(colorspace.lab_to_rgb(lab))
    return FrameSequence(frames=frames, source_id="colorized")


def luminance_of(seq: FrameSequence) -> np.ndarray:
    """Extract the L channel of every frame, shape (N, H, W)."""
    return np.stack([colorspace.rgb_to_lab(f).L for f in seq.frames])


def colorize_video(
    input_dir: str | Path,
    checkpoint: str | Path | ModelParams | None,
    C: int,
    out_dir: str | Path,
    prior: Prior | None = None,
    baseline_grayscale: bool = False,
) -> Path:
    """Full pipeline: load frames, colorize, write frames plus a manifest.

    Input frames may already be colored; only their luminance is used. With
    baseline_grayscale=True the model is bypassed and zero chrominance is
    written (the luminance-only baseline). Returns the manifest path.
    """
    prior = prior or Prior.uninformative()
    seq = load_frame_sequence(input_dir)
    lum = luminance_of(seq)

    if baseline_grayscale:
        chroma = np.zeros(lum.shape + (2,))
        ckpt_id = "grayscale-baseline"
    else:
        if checkpoint is None:
            raise ConfigError("colorize_video needs a checkpoint unless baseline_grayscale")
        if isinstance(checkpoint, ModelParams):
            params, ckpt_id = checkpoint, f"in-memory-step{checkpoint.step}"
        else:
            params = load_checkpoint(checkpoint)
            digest = hashlib.sha256(Path(checkpoint).read_bytes()).hexdigest()[:16]
            ckpt_id = f"{Path(checkpoint).name}@{digest}"
        est = sliding_window_estimates(lum, params, C)
        chroma = aggregate(est, prior)

    colored = recombine(lum, chroma)
    out_dir = Path(out_dir)
    save_frame_sequence(colored, out_dir)
    manifest = {
        "checkpoint": ckpt_id,
        "window": C,
        "frame_count": len(colored),
        "prior": prior.kind,
        "source": Path(input_dir).name,
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path

"""Colorization quality metrics: PSNR, Raw Accuracy, and Color Consistency.

PSNR is computed per frame in RGB and averaged in dB. Raw Accuracy integrates,
over thresholds 0..150, the fraction of pixels whose a,b-space error falls
below the threshold; over an empirical distance distribution that integral has
the exact closed form mean(max(0, 1 - d/150)). Color Consistency scores pairs
of consecutive frames by combining per-frame chrominance affinity with the
affinity of frame-to-frame chrominance *change*, so erratic flicker is
penalized even when each frame looks fine on its own. Distances are converted
to similarities in (0, 1] by phi(X) = 1 / floor(60*X/(max(X)+eps) + 1).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import colorspace
from .dataset import FrameSequence
from .errors import DimensionError, TooShortError

PSNR_CAP_DB = 100.0
RAW_ACCURACY_THETA_MAX = 150.0
PHI_EPSILON = 1e-8


@dataclass
class MetricReport:
    psnr_per_frame: list[float]
    mean_psnr: float
    raw_accuracy: float
    cc_per_pair: list[float]
    mean_cc: float | None
    frame_count: int

    @property
    def raw_accuracy_pct(self) -> float:
        return 100.0 * self.raw_accuracy

    @property
    def mean_cc_pct(self) -> float | None:
        return None if self.mean_cc is None else 100.0 * self.mean_cc

    def summary_row(self) -> str:
        cc = "n/a" if self.mean_cc is None else f"{self.mean_cc_pct:.2f}"
        return f"PSNR {self.mean_psnr:.2f}  RA {self.raw_accuracy_pct:.2f}  CC {cc}"


def psnr(pred: colorspace.RgbFrame, gt: colorspace.RgbFrame) -> float:
    """Peak signal-to-noise ratio in dB over all pixels and channels.

    Identical frames have zero MSE; the value is capped at 100 dB to keep
    sequence means finite.
    """
    if pred.pixels.shape != gt.pixels.shape:
        raise DimensionError(
            f"psnr dimension mismatch: {pred.pixels.shape} vs {gt.pixels.shape}"
        )
    diff = pred.pixels.astype(np.float64) - gt.pixels.astype(np.float64)
    mse = np.mean(diff**2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(255.0**2 / mse)), PSNR_CAP_DB)


def raw_accuracy(pred_ab, gt_ab, theta_max: float = RAW_ACCURACY_THETA_MAX) -> float:
    """Threshold-integrated fraction of correctly colored pixels, in [0, 1].

    acc(theta) counts pixels whose Euclidean a,b distance is below theta; RA is
    the mean of acc over thresholds 0..theta_max, which over the empirical
    distance distribution equals mean(max(0, 1 - d/theta_max)) exactly.
    """
    if theta_max <= 0:
        raise DimensionError("theta_max must be > 0")
    p = np.asarray(pred_ab, dtype=np.float64)
    g = np.asarray(gt_ab, dtype=np.float64)
    if p.shape != g.shape or p.shape[-1] != 2:
        raise DimensionError(f"raw_accuracy shape mismatch: {p.shape} vs {g.shape}")
    d = np.sqrt(((p - g) ** 2).sum(axis=-1))
    return float(np.mean(np.maximum(0.0, 1.0 - d / theta_max)))


def phi(X: np.ndarray, epsilon: float = PHI_EPSILON) -> np.ndarray:
    """Convert a nonnegative distance matrix to similarities in (0, 1].

    phi(X) = 1 / floor(60*X/(max(X)+epsilon) + 1), with the max taken over the
    given matrix. Zero distances map to exactly 1, the largest to 1/60.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise DimensionError("phi needs a non-empty matrix")
    if X.min() < 0:
        raise DimensionError("phi requires nonnegative distances")
    if epsilon <= 0:
        raise DimensionError("epsilon must be > 0")
    return 1.0 / np.floor(60.0 * X / (X.max() + epsilon) + 1.0)


def _ab_dist(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sqrt(((u - v) ** 2).sum(axis=-1))


def color_consistency_pair(gt_t, gt_t1, pred_t, pred_t1) -> float:
    """Color consistency of one consecutive-frame pair, in (0, 1].

    Combines the per-frame affinities phi(|gt - pred|) with a cross-frame
    affinity of how well the predicted frame-to-frame chrominance change
    matches the true change.
    """
    gt_t, gt_t1, pred_t, pred_t1 = (
        np.asarray(a, dtype=np.float64) for a in (gt_t, gt_t1, pred_t, pred_t1)
    )
    if not (gt_t.shape == gt_t1.shape == pred_t.shape == pred_t1.shape) or gt_t.shape[-1] != 2:
        raise DimensionError("color_consistency_pair expects four equal (H, W, 2) fields")
    a_t = phi(_ab_dist(gt_t, pred_t))
    a_t1 = phi(_ab_dist(gt_t1, pred_t1))
    a_cross = phi(np.abs(_ab_dist(gt_t, gt_t1) - _ab_dist(pred_t, pred_t1)))
    return float(np.mean(0.5 * (a_t + a_t1) * a_cross))


def color_consistency(gt_seq, pred_seq) -> float:
    """Mean color consistency over all consecutive frame pairs."""
    gt = np.asarray(gt_seq, dtype=np.float64)
    pred = np.asarray(pred_seq, dtype=np.float64)
    if gt.shape != pred.shape:
        raise DimensionError(f"color_consistency shape mismatch: {gt.shape} vs {pred.shape}")
    n = gt.shape[0]
    if n < 2:
        raise TooShortError("color_consistency needs at least 2 frames")
    return float(
        np.mean(
            [
                color_consistency_pair(gt[t], gt[t + 1], pred[t], pred[t + 1])
                for t in range(n - 1)
            ]
        )
    )


def _ab_stack(seq: FrameSequence) -> np.ndarray:
    labs = [colorspace.rgb_to_lab(f) for f in seq.frames]
    return np.stack([np.stack([lf.a, lf.b], axis=-1) for lf in labs])


def evaluate(pred_seq: FrameSequence, gt_seq: FrameSequence) -> MetricReport:
    """All three metrics over a predicted sequence vs its ground truth.

    PSNR runs in RGB; RA and CC on the a,b channels after Lab conversion.
    CC is reported as None for single-frame sequences (no consecutive pairs).
    """
    if len(pred_seq) != len(gt_seq):
        raise DimensionError(
            f"sequence length mismatch: {len(pred_seq)} predictions vs {len(gt_seq)} ground-truth"
        )
    if (pred_seq.height, pred_seq.width) != (gt_seq.height, gt_seq.width):
        raise DimensionError("prediction and ground-truth frame sizes differ")
    psnr_per_frame = [psnr(p, g) for p, g in zip(pred_seq.frames, gt_seq.frames)]
    pred_ab = _ab_stack(pred_seq)
    gt_ab = _ab_stack(gt_seq)
    ra = raw_accuracy(pred_ab, gt_ab)
    n = len(pred_seq)
    cc_pairs = [
        color_consistency_pair(gt_ab[t], gt_ab[t + 1], pred_ab[t], pred_ab[t + 1])
        for t in range(n - 1)
    ]
    return MetricReport(
        psnr_per_frame=psnr_per_frame,
        mean_psnr=float(np.mean(psnr_per_frame)),
        raw_accuracy=ra,
        cc_per_pair=cc_pairs,
        mean_cc=float(np.mean(cc_pairs)) if cc_pairs else None,
        frame_count=n,
    )


def write_report(report: MetricReport, path: str | Path) -> Path:
    """Plain-text key=value report (RA/CC as both fractions and percentages)."""
    path = Path(path)
    cc = "" if report.mean_cc is None else f"{report.mean_cc:.10f}"
    cc_pct = "" if report.mean_cc_pct is None else f"{report.mean_cc_pct:.6f}"
    lines = [
        f"frame_count={report.frame_count}",
        f"mean_psnr_db={report.mean_psnr:.10f}",
        f"raw_accuracy={report.raw_accuracy:.10f}",
        f"raw_accuracy_pct={report.raw_accuracy_pct:.6f}",
        f"mean_cc={cc}",
        f"mean_cc_pct={cc_pct}",
        f"psnr_cap_db={PSNR_CAP_DB:.1f}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_per_frame_csv(report: MetricReport, path: str | Path) -> Path:
    """Per-frame PSNR and per-pair CC values; the CC column lags by one frame."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "psnr_db", "cc_to_next"])
        for t, p in enumerate(report.psnr_per_frame):
            cc = report.cc_per_pair[t] if t < len(report.cc_per_pair) else ""
            writer.writerow([t, f"{p:.10f}", f"{cc:.10f}" if cc != "" else ""])
    return path


def read_report(path: str | Path) -> dict[str, float | int | None]:
    out: dict[str, float | int | None] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if value == "":
            out[key] = None
        elif key == "frame_count":
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out

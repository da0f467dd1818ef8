"""The 3-D convolutional generator and discriminator.

Generator: a U-Net. The encoder and decoder stacks hold `depth` strided
convolutional / deconvolutional layers each, every one followed by batch
normalization and ReLU, except the output deconvolution which ends in tanh so
chrominance predictions stay in (-1, 1). Skip connections concatenate each
encoder activation onto the mirrored decoder input. Kernels span 3 frames in
time with stride 1 (the temporal extent is never reduced), and 4x4 spatially
with stride 2.

Layer shapes are planned for a nominal spatial size: spatial halving stops
once a level's input reaches 1x1, where layers degenerate to 1x1 kernels.
Inputs whose (possibly padded) size is divisible by the plan's total spatial
reduction run unchanged; anything else is reflection-padded up front and
cropped after the decoder.

Discriminator: `num_conv_layers` strided 3-D convolutions (BN + ReLU), global
average pooling, and a dense layer with a sigmoid producing one real/fake
probability per clip.
"""
from __future__ import annotations

import io
import json
import os
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .colorspace import NormalizedClip
from .errors import CheckpointError, ConfigError, ShapeError
from .nn.layers import (
    BatchNorm3d,
    Conv3d,
    ConvTranspose3d,
    Dense,
    GlobalAvgPool,
    ReLU,
    Sigmoid,
    Tanh,
)

CHECKPOINT_FORMAT = "chronochroma-ckpt-v1"


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 8
    base_filters: int = 64
    max_filters: int = 512
    spatial_kernel: int = 4
    temporal_kernel: int = 3
    spatial_stride: int = 2
    temporal_stride: int = 1
    # Spatial size the layer plan is built for; inputs are padded to the next
    # size compatible with this plan and cropped back afterwards.
    nominal_size: tuple[int, int] = (256, 256)

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError("generator depth must be >= 1")
        if self.base_filters < 1 or self.max_filters < self.base_filters:
            raise ConfigError("need 1 <= base_filters <= max_filters")
        if min(self.nominal_size) < 1:
            raise ConfigError("nominal_size must be positive")


@dataclass(frozen=True)
class DiscriminatorConfig:
    num_conv_layers: int = 5
    base_filters: int = 64
    spatial_stride: int = 2
    temporal_stride: int = 1
    condition_on_luminance: bool = False

    def __post_init__(self):
        if self.num_conv_layers < 1:
            raise ConfigError("discriminator needs at least one conv layer")


def _spatial_plan(nominal, n_levels):
    """Per-level (kernel, stride, pad) for one spatial axis.

    Halve with a 4-wide kernel while the level input is larger than 1 pixel;
    after that use 1x1 kernels so the level count stays fixed without negative
    padding.
    """
    size = int(nominal)
    plan = []
    for _ in range(n_levels):
        if size > 1:
            plan.append((4, 2, 1))
            size //= 2
        else:
            plan.append((1, 1, 0))
    return plan


class Generator:
    def __init__(self, cfg: GeneratorConfig, in_channels=1, out_channels=2, dtype=np.float32):
        self.cfg = cfg
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.dtype = dtype
        d = cfg.depth
        widths = [min(cfg.base_filters * 2**i, cfg.max_filters) for i in range(d)]
        self.widths = widths
        plan_h = _spatial_plan(cfg.nominal_size[0], d)
        plan_w = _spatial_plan(cfg.nominal_size[1], d)
        self._halvings = (
            sum(1 for k, s, p in plan_h if s == 2),
            sum(1 for k, s, p in plan_w if s == 2),
        )

        tk, ts = cfg.temporal_kernel, cfg.temporal_stride
        tp = (tk - ts) // 2
        self.enc = []
        for i in range(d):
            (kh, sh, ph), (kw, sw, pw) = plan_h[i], plan_w[i]
            conv = Conv3d(
                f"enc{i}.conv",
                in_channels if i == 0 else widths[i - 1],
                widths[i],
                kernel=(tk, kh, kw),
                stride=(ts, sh, sw),
                pad=(tp, ph, pw),
                dtype=dtype,
            )
            self.enc.append((conv, BatchNorm3d(f"enc{i}.bn", widths[i], dtype=dtype), ReLU()))

        self.dec = []
        for j in range(d):
            e = d - 1 - j  # mirrored encoder level
            (kh, sh, ph), (kw, sw, pw) = plan_h[e], plan_w[e]
            cin = widths[d - 1] if j == 0 else self.dec_widths(j - 1) + widths[e]
            last = j == d - 1
            cout = out_channels if last else widths[d - 2 - j]
            deconv = ConvTranspose3d(
                f"dec{j}.deconv",
                cin,
                cout,
                kernel=(tk, kh, kw),
                stride=(ts, sh, sw),
                pad=(tp, ph, pw),
                bias=last,
                dtype=dtype,
            )
            if last:
                self.dec.append((deconv, Tanh()))
            else:
                self.dec.append((deconv, BatchNorm3d(f"dec{j}.bn", cout, dtype=dtype), ReLU()))

    def dec_widths(self, j):
        d = self.cfg.depth
        return self.out_channels if j == d - 1 else self.widths[d - 2 - j]

    def params(self):
        out = []
        for block in self.enc + self.dec:
            for layer in block:
                out.extend(layer.params())
        return out

    def buffers(self):
        out = {}
        for block in self.enc + self.dec:
            for layer in block:
                out.update(layer.buffers())
        return out

    def parameter_count(self):
        return sum(p.data.size for p in self.params())

    def _padded_size(self, h, w):
        dh, dw = 2 ** self._halvings[0], 2 ** self._halvings[1]
        return -(-h // dh) * dh, -(-w // dw) * dw

    def layer_shapes(self, in_thw):
        """(T, H, W) after each encoder and decoder level, padding included."""
        t, h, w = in_thw
        hp, wp = self._padded_size(h, w)
        shapes = []
        cur = (t, hp, wp)
        for conv, *_ in self.enc:
            cur = conv.output_shape(cur)
            shapes.append(cur)
        for block in self.dec:
            cur = block[0].output_shape(cur)
            shapes.append(cur)
        return shapes

    def forward(self, x, train=True):
        if x.ndim != 5 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"generator expects (B, {self.in_channels}, T, H, W), got {x.shape}"
            )
        b, _, t, h, w = x.shape
        hp, wp = self._padded_size(h, w)
        self._pad_info = (h, w, hp, wp)
        if (hp, wp) != (h, w):
            x = _reflect_pad_hw(x, hp, wp)

        feats = []
        cur = x
        for conv, bn, relu in self.enc:
            cur = relu.forward(bn.forward(conv.forward(cur, train), train), train)
            feats.append(cur)
        self._enc_feats_shapes = [f.shape for f in feats]

        d = self.cfg.depth
        self._concat_splits = []
        for j, block in enumerate(self.dec):
            if j > 0:
                skip = feats[d - 1 - j]
                self._concat_splits.append(cur.shape[1])
                cur = np.concatenate([cur, skip], axis=1)
            for layer in block:
                cur = layer.forward(cur, train)
        if (hp, wp) != (h, w):
            cur = cur[:, :, :, :h, :w]
        return cur

    def backward(self, dy, need_dx=False):
        h, w, hp, wp = self._pad_info
        if (hp, wp) != (h, w):
            full = np.zeros(dy.shape[:3] + (hp, wp), dtype=dy.dtype)
            full[:, :, :, :h, :w] = dy
            dy = full

        d = self.cfg.depth
        denc = [None] * d
        cur = dy
        for j in range(d - 1, -1, -1):
            for layer in reversed(self.dec[j]):
                cur = layer.backward(cur)
            if j > 0:
                split = self._concat_splits[j - 1]
                dskip = cur[:, split:]
                cur = cur[:, :split]
                e = d - 1 - j
                denc[e] = dskip if denc[e] is None else denc[e] + dskip
            else:
                e = d - 1
                denc[e] = cur if denc[e] is None else denc[e] + cur

        grad = None
        for i in range(d - 1, -1, -1):
            g = denc[i] if grad is None else denc[i] + grad if denc[i] is not None else grad
            conv, bn, relu = self.enc[i]
            g = relu.backward(g)
            g = bn.backward(g)
            grad = conv.backward(g, need_dx=(i > 0 or need_dx))
        if not need_dx:
            return None
        if (hp, wp) != (h, w):
            grad = _reflect_pad_hw_backward(grad, h, w)
        return grad


class Discriminator:
    def __init__(self, cfg: DiscriminatorConfig, nominal_size=(256, 256), in_channels=None, dtype=np.float32):
        self.cfg = cfg
        self.nominal_size = tuple(nominal_size)
        self.dtype = dtype
        if in_channels is None:
            in_channels = 3 if cfg.condition_on_luminance else 2
        self.in_channels = in_channels
        n = cfg.num_conv_layers
        widths = [min(cfg.base_filters * 2**i, cfg.base_filters * 8) for i in range(n)]
        self.widths = widths
        plan_h = _spatial_plan(self.nominal_size[0], n)
        plan_w = _spatial_plan(self.nominal_size[1], n)
        self.blocks = []
        for i in range(n):
            (kh, sh, ph), (kw, sw, pw) = plan_h[i], plan_w[i]
            conv = Conv3d(
                f"disc{i}.conv",
                in_channels if i == 0 else widths[i - 1],
                widths[i],
                kernel=(3, kh, kw),
                stride=(1, sh, sw),
                pad=(1, ph, pw),
                dtype=dtype,
            )
            self.blocks.append((conv, BatchNorm3d(f"disc{i}.bn", widths[i], dtype=dtype), ReLU()))
        self.pool = GlobalAvgPool()
        self.dense = Dense("disc.dense", widths[-1], 1, dtype=dtype)
        self.sigmoid = Sigmoid()

    def params(self):
        out = []
        for conv, bn, _ in self.blocks:
            out.extend(conv.params())
            out.extend(bn.params())
        out.extend(self.dense.params())
        return out

    def buffers(self):
        out = {}
        for _, bn, _ in self.blocks:
            out.update(bn.buffers())
        return out

    def parameter_count(self):
        return sum(p.data.size for p in self.params())

    def forward(self, y, train=True):
        if y.ndim != 5 or y.shape[1] != self.in_channels:
            raise ShapeError(
                f"discriminator expects (B, {self.in_channels}, T, H, W), got {y.shape}"
            )
        cur = y
        for conv, bn, relu in self.blocks:
            thw = conv.output_shape(cur.shape[2:])
            if min(thw) < 1:
                raise ShapeError(
                    f"discriminator input {y.shape[2:]} too small for its "
                    f"layer plan (nominal size {self.nominal_size})"
                )
            cur = relu.forward(bn.forward(conv.forward(cur, train), train), train)
        pooled = self.pool.forward(cur, train)
        logit = self.dense.forward(pooled, train)
        return self.sigmoid.forward(logit, train)[:, 0]

    def backward(self, dp, need_dx=True):
        cur = self.sigmoid.backward(dp[:, None])
        cur = self.dense.backward(cur)
        cur = self.pool.backward(cur)
        for i, (conv, bn, relu) in enumerate(reversed(self.blocks)):
            last = i == len(self.blocks) - 1
            cur = relu.backward(cur)
            cur = bn.backward(cur)
            cur = conv.backward(cur, need_dx=(not last) or need_dx)
        return cur


def _reflect_index(n_padded, n):
    idx = np.arange(n_padded)
    if n == 1:
        return np.zeros(n_padded, dtype=int)
    period = 2 * n - 2
    m = idx % period
    return np.where(m < n, m, period - m)


def _reflect_pad_hw(x, hp, wp):
    h, w = x.shape[3], x.shape[4]
    ih = _reflect_index(hp, h)
    iw = _reflect_index(wp, w)
    return np.ascontiguousarray(x[:, :, :, ih, :][:, :, :, :, iw])


def _reflect_pad_hw_backward(g, h, w):
    hp, wp = g.shape[3], g.shape[4]
    ih = _reflect_index(hp, h)
    iw = _reflect_index(wp, w)
    acc_w = np.zeros(g.shape[:4] + (w,), dtype=g.dtype)
    np.add.at(np.moveaxis(acc_w, 4, 0), iw, np.moveaxis(g, 4, 0))
    out = np.zeros(g.shape[:3] + (h, w), dtype=g.dtype)
    np.add.at(np.moveaxis(out, 3, 0), ih, np.moveaxis(acc_w, 3, 0))
    return out


@dataclass
class ModelParams:
    """Generator + discriminator weights, their configs, and training metadata."""

    gen: Generator
    disc: Discriminator
    gcfg: GeneratorConfig
    dcfg: DiscriminatorConfig
    step: int = 0
    seed: int = 0

    @property
    def dtype(self):
        return self.gen.dtype

    def parameter_count(self) -> int:
        return self.gen.parameter_count() + self.disc.parameter_count()

    def all_params(self):
        return self.gen.params() + self.disc.params()

    def all_finite(self) -> bool:
        return all(np.isfinite(p.data).all() for p in self.all_params())


def init_params(
    gcfg: GeneratorConfig,
    dcfg: DiscriminatorConfig,
    seed: int,
    dtype=np.float32,
) -> ModelParams:
    """Build networks and draw all conv/dense weights from N(0, 0.02^2).

    Deterministic per seed: parameters are filled in a fixed traversal order.
    Batch-norm scales start at 1, shifts and biases at 0.
    """
    gen = Generator(gcfg, dtype=dtype)
    disc = Discriminator(dcfg, nominal_size=gcfg.nominal_size, dtype=dtype)
    rng = np.random.default_rng(seed)
    for p in gen.params() + disc.params():
        if p.kind == "weight":
            p.data[...] = rng.normal(0.0, 0.02, size=p.data.shape).astype(dtype)
    return ModelParams(gen=gen, disc=disc, gcfg=gcfg, dcfg=dcfg, step=0, seed=seed)


def _to_internal(values: np.ndarray, dtype) -> np.ndarray:
    # (B, H, W, C, K) -> (B, K, C, H, W)
    return np.ascontiguousarray(values.transpose(0, 4, 3, 1, 2), dtype=dtype)


def _from_internal(values: np.ndarray) -> np.ndarray:
    # (B, K, T, H, W) -> (B, H, W, T, K)
    return np.ascontiguousarray(values.transpose(0, 3, 4, 2, 1), dtype=np.float64)


def _coerce_clip(x, expected_k, what):
    single = False
    v = x.values if isinstance(x, NormalizedClip) else np.asarray(x, dtype=np.float64)
    if v.ndim == 4:
        v = v[np.newaxis]
        single = True
    if v.ndim != 5 or v.shape[4] != expected_k:
        raise ShapeError(f"{what} expects (..., H, W, C, {expected_k}), got {v.shape}")
    return v, single


def generator_forward(x, params: ModelParams, mode: str = "eval"):
    """Predict chrominance for a luminance clip (H, W, C, 1) or batch thereof.

    Returns a NormalizedClip for a single clip or an (B, H, W, C, 2) array for
    a batch. Eval mode is deterministic (running batch-norm statistics).
    """
    v, single = _coerce_clip(x, 1, "generator_forward")
    out = params.gen.forward(_to_internal(v, params.dtype), train=(mode == "train"))
    out = _from_internal(out)
    return NormalizedClip(out[0]) if single else out


def discriminator_forward(y, params: ModelParams, mode: str = "eval"):
    """Score chrominance clips as real/fake; returns p in (0,1) per clip."""
    v, single = _coerce_clip(y, params.disc.in_channels, "discriminator_forward")
    p = params.disc.forward(_to_internal(v, params.dtype), train=(mode == "train"))
    return float(p[0]) if single else p.astype(np.float64)


def save_checkpoint(params: ModelParams, path: str | Path) -> Path:
    """Write a self-describing, byte-deterministic checkpoint archive."""
    path = Path(path)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "generator_config": asdict(params.gcfg),
        "discriminator_config": asdict(params.dcfg),
        "step": params.step,
        "seed": params.seed,
        "dtype": np.dtype(params.dtype).name,
    }
    arrays: dict[str, np.ndarray] = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    for prefix, net in (("gen", params.gen), ("disc", params.disc)):
        for p in net.params():
            arrays[f"{prefix}:{p.name}"] = p.data
        for name, buf in net.buffers().items():
            arrays[f"{prefix}:{name}"] = buf

    tmp = path.with_name(path.name + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(tmp, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            # fixed timestamp keeps checkpoint bytes reproducible run to run
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | Path) -> ModelParams:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if "meta" not in arrays:
        raise CheckpointError(f"{path} is not a chronochroma checkpoint (no meta entry)")
    meta = json.loads(str(arrays["meta"][()]))
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"unsupported checkpoint format {meta.get('format')!r}, expected {CHECKPOINT_FORMAT!r}"
        )
    gdict = dict(meta["generator_config"])
    gdict["nominal_size"] = tuple(gdict["nominal_size"])
    gcfg = GeneratorConfig(**gdict)
    dcfg = DiscriminatorConfig(**meta["discriminator_config"])
    dtype = np.dtype(meta["dtype"]).type
    params = init_params(gcfg, dcfg, seed=meta["seed"], dtype=dtype)
    params.step = int(meta["step"])
    for prefix, net in (("gen", params.gen), ("disc", params.disc)):
        for p in net.params():
            key = f"{prefix}:{p.name}"
            if key not in arrays:
                raise CheckpointError(f"checkpoint {path} is missing tensor {key}")
            if arrays[key].shape != p.data.shape:
                raise CheckpointError(
                    f"checkpoint tensor {key} has shape {arrays[key].shape}, expected {p.data.shape}"
                )
            p.data[...] = arrays[key]
        for name, buf in net.buffers().items():
            key = f"{prefix}:{name}"
            if key not in arrays:
                raise CheckpointError(f"checkpoint {path} is missing tensor {key}")
            buf[...] = arrays[key]
    return params

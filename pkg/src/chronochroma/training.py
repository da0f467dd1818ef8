"""Adversarial + L1 training of the colorization generator.

Per step: one discriminator update on a real batch and the generator's fakes,
then one generator update on the non-saturating adversarial term plus
lambda * L1 against the ground-truth chrominance. The L1 term is the mean over
elements so lambda is comparable across clip sizes. Probabilities are clamped
to [1e-7, 1-1e-7] before any log.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .colorspace import NormalizedClip
from .dataset import AugmentConfig, ClipSample, augment
from .errors import ConfigError, ShapeError, TrainingDivergenceError
from .model import (
    DiscriminatorConfig,
    GeneratorConfig,
    ModelParams,
    init_params,
    save_checkpoint,
)
from .nn.optim import Adam

_P_EPS = 1e-7


@dataclass
class TrainConfig:
    lambda_l1: float = 100.0
    batch_size: int = 4
    num_steps: int = 200
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    seed: int = 0
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.lambda_l1 < 0:
            raise ConfigError("lambda_l1 must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.num_steps < 0:
            raise ConfigError("num_steps must be >= 0")


@dataclass
class LossRecord:
    step: int
    d_loss: float
    g_adv_loss: float
    l1_loss: float
    g_total: float

    def is_finite(self) -> bool:
        return all(
            np.isfinite(v) for v in (self.d_loss, self.g_adv_loss, self.l1_loss, self.g_total)
        )


@dataclass
class OptimizerState:
    gen: Adam
    disc: Adam


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, NormalizedClip) else np.asarray(x)


def l1_loss(y_hat, y) -> float:
    """Mean absolute difference over all elements."""
    a, b = _values(y_hat), _values(y)
    if a.shape != b.shape:
        raise ShapeError(f"l1_loss shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def _clamp_p(p) -> np.ndarray:
    return np.clip(np.atleast_1d(np.asarray(p, dtype=np.float64)), _P_EPS, 1.0 - _P_EPS)


def discriminator_loss(p_real, p_fake) -> float:
    """-[log p_real + log(1 - p_fake)], averaged over the batch."""
    pr, pf = _clamp_p(p_real), _clamp_p(p_fake)
    return float(np.mean(-np.log(pr)) + np.mean(-np.log(1.0 - pf)))


def generator_adv_loss(p_fake) -> float:
    """Non-saturating generator objective -log p_fake, averaged over the batch."""
    return float(np.mean(-np.log(_clamp_p(p_fake))))


def _stack_batch(batch: Sequence[ClipSample], dtype):
    if len(batch) == 0:
        raise ConfigError("train_step needs a non-empty batch")
    x = np.stack([s.x.values for s in batch])
    y = np.stack([s.y.values for s in batch])
    # (B, H, W, C, K) -> (B, K, C, H, W)
    xi = np.ascontiguousarray(x.transpose(0, 4, 3, 1, 2), dtype=dtype)
    yi = np.ascontiguousarray(y.transpose(0, 4, 3, 1, 2), dtype=dtype)
    return xi, yi


def _generator_gradients(params: ModelParams, x5, y5, lambda_l1, y_hat=None):
    """Forward G and D, backprop g_adv + lambda*l1 into the generator grads.

    Returns (g_adv, l1). When `y_hat` from an earlier generator forward is
    passed, its layer caches are reused. Discriminator parameter grads are
    polluted by the pass-through and must be zeroed before the next
    discriminator update.
    """
    gen, disc = params.gen, params.disc
    if y_hat is None:
        y_hat = gen.forward(x5, train=True)
    p_fake = disc.forward(y_hat, train=True)
    pf = _clamp_p(p_fake)
    g_adv = float(np.mean(-np.log(pf)))
    l1 = float(np.mean(np.abs(y_hat - y5)))

    dy = np.zeros_like(y_hat)
    if lambda_l1 != 0.0:
        n = y_hat.size
        dy += (lambda_l1 / n) * np.sign(y_hat - y5).astype(y_hat.dtype)
    dp = (-1.0 / (len(pf) * pf)).astype(y_hat.dtype)
    dy += disc.backward(dp, need_dx=True)
    gen.backward(dy)
    return g_adv, l1


def generator_gradient_vector(batch, params: ModelParams, lambda_l1) -> np.ndarray:
    """Flattened d(g_adv + lambda*l1)/d(generator weights) for a batch; no update."""
    x5, y5 = _stack_batch(batch, params.dtype)
    for p in params.all_params():
        p.grad[...] = 0
    _generator_gradients(params, x5, y5, lambda_l1)
    return np.concatenate([p.grad.ravel().astype(np.float64) for p in params.gen.params()])


def train_step(
    batch: Sequence[ClipSample],
    params: ModelParams,
    cfg: TrainConfig,
    opt_state: OptimizerState | None = None,
) -> tuple[ModelParams, OptimizerState, LossRecord]:
    """One discriminator update followed by one generator update."""
    if opt_state is None:
        opt_state = OptimizerState(
            gen=Adam(params.gen.params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2),
            disc=Adam(params.disc.params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2),
        )
    x5, y5 = _stack_batch(batch, params.dtype)
    gen, disc = params.gen, params.disc
    b = x5.shape[0]

    # discriminator update: fakes are treated as constants (no generator grads)
    y_fake = gen.forward(x5, train=True)
    opt_state.disc.zero_grad()
    p_real = _clamp_p(disc.forward(y5, train=True))
    disc.backward((-1.0 / (b * p_real)).astype(y5.dtype), need_dx=False)
    p_fake = _clamp_p(disc.forward(y_fake, train=True))
    disc.backward((1.0 / (b * (1.0 - p_fake))).astype(y5.dtype), need_dx=False)
    d_loss = float(np.mean(-np.log(p_real)) + np.mean(-np.log(1.0 - p_fake)))
    opt_state.disc.step()

    # generator update against the freshly updated discriminator; the
    # generator's forward caches from y_fake are still valid and are reused
    opt_state.gen.zero_grad()
    for p in disc.params():
        p.grad[...] = 0
    g_adv, l1 = _generator_gradients(params, x5, y5, cfg.lambda_l1, y_hat=y_fake)
    opt_state.gen.step()

    params.step += 1
    record = LossRecord(
        step=params.step,
        d_loss=d_loss,
        g_adv_loss=g_adv,
        l1_loss=l1,
        g_total=g_adv + cfg.lambda_l1 * l1,
    )
    if not record.is_finite():
        raise TrainingDivergenceError(f"non-finite loss at step {record.step}", record=record)
    return params, opt_state, record


def train(
    samples: Sequence[ClipSample],
    cfg: TrainConfig,
    out_dir: str | Path,
    params: ModelParams | None = None,
    gcfg: GeneratorConfig | None = None,
    dcfg: DiscriminatorConfig | None = None,
    augment_cfg: AugmentConfig | None = None,
    log_name: str = "loss_log.ndjson",
) -> Path:
    """Run cfg.num_steps optimization steps over shuffled, augmented batches.

    Writes checkpoints every cfg.checkpoint_every steps plus a final one, and
    appends one JSON loss record per step to the log file. Returns the final
    checkpoint path. Fully deterministic given cfg.seed.
    """
    samples = list(samples)
    if not samples:
        raise ConfigError("training dataset is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if params is None:
        h, w, _, _ = samples[0].x.shape
        if gcfg is None:
            gcfg = GeneratorConfig(nominal_size=(h, w))
        if dcfg is None:
            dcfg = DiscriminatorConfig()
        params = init_params(gcfg, dcfg, seed=cfg.seed)

    rng = np.random.default_rng(cfg.seed)
    log_path = out_dir / log_name
    opt_state = None
    order = rng.permutation(len(samples))
    pos = 0
    with open(log_path, "a", encoding="utf-8") as log:
        for _ in range(cfg.num_steps):
            if pos + cfg.batch_size > len(samples):
                order = rng.permutation(len(samples))
                pos = 0
            idx = order[pos : pos + cfg.batch_size]
            if len(idx) < cfg.batch_size:  # dataset smaller than one batch
                idx = np.resize(order, cfg.batch_size)
            pos += cfg.batch_size
            batch = [samples[i] for i in idx]
            if augment_cfg is not None:
                batch = [augment(s, augment_cfg, rng) for s in batch]
            params, opt_state, record = train_step(batch, params, cfg, opt_state)
            log.write(json.dumps(asdict(record), sort_keys=True) + "\n")
            if cfg.checkpoint_every > 0 and params.step % cfg.checkpoint_every == 0:
                save_checkpoint(params, out_dir / f"checkpoint_step{params.step:06d}.npz")
    final = save_checkpoint(params, out_dir / "checkpoint_final.npz")
    return final


def read_loss_log(path: str | Path) -> list[LossRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(LossRecord(**json.loads(line)))
    return records

"""Validation instruments.

Two instruments live here:

* the two-word-language separability experiment: a quantitative version of
  the geometric argument for feeding the critic softened representations.
  With a two-symbol vocabulary and one time step, real one-hot text occupies
  the two simplex vertices while generator output spans the connecting
  segment, so a binary critic can separate them perfectly. Softened real
  representations occupy short segments near the vertices that overlap the
  generator locus, capping the best achievable discrimination accuracy at
  the Bayes accuracy 1 - overlap/2.

* a finite-difference gradient auditor that compares analytic parameter
  gradients of all three training losses against central differences on a
  downsized 64-bit stack.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch
from torch import nn

from .autoencoder import SequenceAutoencoder, init_ae_params, reconstruction_loss
from .corpus import one_hot
from .gan import (
    Critic,
    Generator,
    critic_loss,
    generator_loss,
    init_gan_params,
    sample_noise,
)
from .optim import Adam


# ---------------------------------------------------------------------------
# Two-word-language separability experiment


@dataclass
class SeparabilityConfig:
    softening_radius: float = 0.2
    hidden: int = 32
    steps: int = 6000
    batch_size: int = 256
    lr: float = 5e-3
    train_samples: int = 8192
    eval_samples: int = 20000
    seed: int = 0


@dataclass
class SeparabilityReport:
    mode: str
    accuracy: float
    iterations: int
    margin_mean: float
    margin_std: float
    bayes_accuracy: float

    def to_text(self) -> str:
        return (
            f"mode={self.mode}\n"
            f"accuracy={self.accuracy:.6f}\n"
            f"iterations={self.iterations}\n"
            f"margin_mean={self.margin_mean:.6f}\n"
            f"margin_std={self.margin_std:.6f}\n"
            f"bayes_accuracy={self.bayes_accuracy:.6f}\n"
        )


def _segment_points(u: np.ndarray) -> np.ndarray:
    """Map positions u in [0, 1] onto the simplex segment (u, 1-u)."""
    return np.stack([u, 1.0 - u], axis=1)


def sample_one_hot_vertices(n: int, rng: np.random.Generator) -> np.ndarray:
    return one_hot(rng.integers(0, 2, size=n), 2).astype(np.float64)


def sample_softened_vertices(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the two vertex-neighborhood segments of length radius."""
    offset = rng.uniform(0.0, radius, size=n)
    vertex = rng.integers(0, 2, size=n)
    u = np.where(vertex == 0, 1.0 - offset, offset)
    return _segment_points(u)


def sample_generator_segment(n: int, rng: np.random.Generator) -> np.ndarray:
    return _segment_points(rng.uniform(0.0, 1.0, size=n))


def softened_bayes_accuracy(radius: float, grid: int = 200001) -> float:
    """Best possible accuracy for softened-vertices vs full-segment classes.

    Brute force over the 1-D position coordinate: both class densities are
    evaluated on a fine grid, the overlap integral of their pointwise minimum
    is accumulated, and the Bayes accuracy is 1 - overlap/2.
    """
    if not 0.0 < radius <= 0.5:
        raise ValueError("radius must lie in (0, 0.5]")
    u = (np.arange(grid) + 0.5) / grid
    in_support = (u <= radius) | (u >= 1.0 - radius)
    density_a = np.where(in_support, 1.0 / (2.0 * radius), 0.0)
    density_b = np.ones(grid)
    overlap = np.minimum(density_a, density_b).mean()
    return 1.0 - overlap / 2.0


def separability_trial(
    sample_real,
    sample_fake,
    cfg: SeparabilityConfig,
    mode: str,
    bayes_accuracy: float,
) -> SeparabilityReport:
    """Train a small binary critic to separate two samplers; report held-out
    accuracy and score margins."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    critic = nn.Sequential(
        nn.Linear(2, cfg.hidden, dtype=torch.float64),
        nn.ReLU(),
        nn.Linear(cfg.hidden, cfg.hidden, dtype=torch.float64),
        nn.ReLU(),
        nn.Linear(cfg.hidden, 1, dtype=torch.float64),
    )
    init_gan_params(critic, np.random.Generator(np.random.PCG64(cfg.seed + 1)))
    opt = Adam({n: p for n, p in critic.named_parameters()}, cfg.lr, 0.9, 0.999)
    bce = nn.BCEWithLogitsLoss()

    train_real = torch.as_tensor(sample_real(cfg.train_samples, rng))
    train_fake = torch.as_tensor(sample_fake(cfg.train_samples, rng))
    train_x = torch.cat([train_real, train_fake])
    train_y = torch.cat([
        torch.ones(cfg.train_samples, dtype=torch.float64),
        torch.zeros(cfg.train_samples, dtype=torch.float64),
    ])
    order_rng = np.random.Generator(np.random.PCG64(cfg.seed + 2))
    for _ in range(cfg.steps):
        idx = torch.as_tensor(order_rng.integers(0, train_x.shape[0], size=cfg.batch_size))
        logits = critic(train_x[idx]).squeeze(1)
        loss = bce(logits, train_y[idx])
        grads = torch.autograd.grad(loss, list(opt.params.values()))
        opt.step(dict(zip(opt.params.keys(), grads)))

    eval_real = torch.as_tensor(sample_real(cfg.eval_samples, rng))
    eval_fake = torch.as_tensor(sample_fake(cfg.eval_samples, rng))
    with torch.no_grad():
        s_real = critic(eval_real).squeeze(1)
        s_fake = critic(eval_fake).squeeze(1)
    correct = float((s_real > 0).double().mean() + (s_fake <= 0).double().mean()) / 2.0
    margins = torch.cat([s_real, -s_fake])
    return SeparabilityReport(
        mode=mode,
        accuracy=correct,
        iterations=cfg.steps,
        margin_mean=float(margins.mean()),
        margin_std=float(margins.std()),
        bayes_accuracy=bayes_accuracy,
    )


def two_word_experiment(
    cfg: SeparabilityConfig = SeparabilityConfig(),
) -> tuple[SeparabilityReport, SeparabilityReport]:
    """Run both discrimination geometries with matched critics and budgets."""
    one_hot_report = separability_trial(
        sample_one_hot_vertices,
        sample_generator_segment,
        cfg,
        mode="one_hot_vs_segment",
        bayes_accuracy=1.0,
    )
    softened = separability_trial(
        lambda n, rng: sample_softened_vertices(n, cfg.softening_radius, rng),
        sample_generator_segment,
        replace(cfg, seed=cfg.seed + 100),
        mode="softened_vs_segment",
        bayes_accuracy=softened_bayes_accuracy(cfg.softening_radius),
    )
    return one_hot_report, softened


def identical_distribution_control(cfg: SeparabilityConfig = SeparabilityConfig()) -> SeparabilityReport:
    """Both classes drawn from the full segment; accuracy should sit near 0.5."""
    return separability_trial(
        sample_generator_segment,
        sample_generator_segment,
        replace(cfg, seed=cfg.seed + 200),
        mode="identical_control",
        bayes_accuracy=0.5,
    )


# ---------------------------------------------------------------------------
# Finite-difference gradient audit


@dataclass
class AuditConfig:
    sentence_len: int = 4
    vocab_size: int = 5
    hidden: int = 8
    channels: int = 8
    noise_dim: int = 8
    batch_size: int = 4
    resblocks: int = 2
    kernel: int = 5
    gp_weight: float = 10.0
    eps: float = 1e-5
    tol: float = 1e-4
    abs_floor: float = 1e-8
    seed: int = 0
    corrupt: str | None = None


@dataclass
class AuditEntry:
    loss: str
    group: str
    max_rel_err: float
    passed: bool


@dataclass
class AuditReport:
    entries: list[AuditEntry]
    tol: float
    eps: float

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_rel_err(self) -> float:
        return max(e.max_rel_err for e in self.entries)

    def failing_groups(self) -> list[str]:
        return [f"{e.loss}:{e.group}" for e in self.entries if not e.passed]

    def to_text(self) -> str:
        lines = [f"eps={self.eps}", f"tol={self.tol}", f"passed={self.passed}"]
        for e in self.entries:
            lines.append(f"{e.loss}.{e.group}={e.max_rel_err:.3e},"
                         f"{'pass' if e.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _rel_err(analytic: torch.Tensor, fd: torch.Tensor, abs_floor: float) -> float:
    diff = (analytic - fd).abs()
    scale = torch.maximum(analytic.abs(), fd.abs())
    rel = torch.where(diff <= abs_floor, torch.zeros_like(diff), diff / scale)
    return float(rel.max()) if rel.numel() else 0.0


def _fd_gradients(loss_fn, params: dict[str, torch.Tensor], eps: float) -> dict[str, torch.Tensor]:
    grads = {}
    for name, p in params.items():
        g = torch.zeros_like(p)
        flat = p.data.view(-1)
        g_flat = g.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            lo_hi = loss_fn()
            flat[i] = orig - eps
            lo_lo = loss_fn()
            flat[i] = orig
            g_flat[i] = (lo_hi - lo_lo) / (2.0 * eps)
        grads[name] = g
    return grads


def _compare(loss_name, loss_fn, params, cfg: AuditConfig) -> list[AuditEntry]:
    analytic = torch.autograd.grad(loss_fn(), list(params.values()))
    analytic = {name: g.detach().clone() for name, g in zip(params.keys(), analytic)}
    for name in params:
        # fault injection target: bare parameter name or loss-qualified form
        if cfg.corrupt in (name, f"{loss_name}:{name}"):
            analytic[name] = analytic[name] * 1.1
    fd = _fd_gradients(lambda: float(loss_fn().detach()), params, cfg.eps)
    entries = []
    for name in params:
        err = _rel_err(analytic[name], fd[name], cfg.abs_floor)
        entries.append(AuditEntry(loss_name, name, err, err < cfg.tol))
    return entries


def grad_audit(cfg: AuditConfig = AuditConfig()) -> AuditReport:
    """Compare analytic gradients of all three losses with central finite
    differences on a downsized 64-bit model stack."""
    torch.set_num_threads(1)
    dtype = torch.float64
    data_rng = np.random.Generator(np.random.PCG64(cfg.seed + 10))

    ae = SequenceAutoencoder(cfg.vocab_size, cfg.hidden, pad_id=0, dtype=dtype)
    init_ae_params(ae, np.random.Generator(np.random.PCG64(cfg.seed + 1)))
    gen = Generator(cfg.noise_dim, cfg.sentence_len, cfg.vocab_size, cfg.channels,
                    cfg.resblocks, cfg.kernel, dtype=dtype)
    init_gan_params(gen, np.random.Generator(np.random.PCG64(cfg.seed + 2)))
    critic = Critic(cfg.sentence_len, cfg.vocab_size, cfg.channels,
                    cfg.resblocks, cfg.kernel, dtype=dtype)
    init_gan_params(critic, np.random.Generator(np.random.PCG64(cfg.seed + 3)))

    ids = data_rng.integers(0, cfg.vocab_size, size=(cfg.batch_size, cfg.sentence_len))
    x = torch.as_tensor(one_hot(ids, cfg.vocab_size), dtype=dtype)
    z = sample_noise(cfg.batch_size, cfg.noise_dim, data_rng, dtype)
    alpha = torch.as_tensor(data_rng.uniform(size=cfg.batch_size), dtype=dtype)
    with torch.no_grad():
        gen_x = gen(z)

    entries: list[AuditEntry] = []
    ae_params = {n: p for n, p in ae.named_parameters()}
    entries += _compare(
        "L_AE", lambda: reconstruction_loss(x, ae.reconstruct(x)), ae_params, cfg
    )
    critic_params = {n: p for n, p in critic.named_parameters()}
    entries += _compare(
        "L_D",
        lambda: critic_loss(critic, x, gen_x, cfg.gp_weight, alpha),
        critic_params,
        cfg,
    )
    gen_params = {n: p for n, p in gen.named_parameters()}
    entries += _compare(
        "L_G", lambda: generator_loss(critic, gen(z)), gen_params, cfg
    )
    return AuditReport(entries=entries, tol=cfg.tol, eps=cfg.eps)

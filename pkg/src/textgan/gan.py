"""Residual-convolutional generator and Wasserstein critic with gradient penalty.

Both networks operate on (B, T, V) row-stochastic sequence tensors: one-hot
rows for real text in the baseline mode, softened autoencoder reconstructions
in distillation mode, and per-step softmax outputs from the generator. The
critic emits one unconstrained real score per sequence (no output
nonlinearity).
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import DivergenceError, RangeError, ShapeError


class ResBlock1d(nn.Module):
    """Two same-width convolutions with pre-activation ReLUs and a scaled skip."""

    def __init__(self, channels: int, kernel: int, scale: float = 0.3,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        pad = kernel // 2
        self.conv1 = nn.Conv1d(channels, channels, kernel, padding=pad, dtype=dtype)
        self.conv2 = nn.Conv1d(channels, channels, kernel, padding=pad, dtype=dtype)
        self.scale = scale

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.relu(x))
        h = self.conv2(F.relu(h))
        return x + self.scale * h


class Generator(nn.Module):
    """Noise vector -> (T, V) sequence of softmax distributions.

    The softmax is structural: every output row is a probability
    distribution for any parameter values.
    """

    def __init__(self, noise_dim: int, sentence_len: int, vocab_size: int,
                 channels: int, blocks: int = 5, kernel: int = 5,
                 res_scale: float = 0.3, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.noise_dim = noise_dim
        self.sentence_len = sentence_len
        self.vocab_size = vocab_size
        self.channels = channels
        self.input_proj = nn.Linear(noise_dim, sentence_len * channels, dtype=dtype)
        self.blocks = nn.Sequential(
            *[ResBlock1d(channels, kernel, res_scale, dtype) for _ in range(blocks)]
        )
        self.output_proj = nn.Conv1d(channels, vocab_size, 1, dtype=dtype)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.ndim != 2 or z.shape[1] != self.noise_dim:
            raise ShapeError(
                f"shape-error: expected (B, {self.noise_dim}) noise, got {tuple(z.shape)}"
            )
        h = self.input_proj(z)
        h = h.view(z.shape[0], self.channels, self.sentence_len)
        h = self.blocks(h)
        logits = self.output_proj(h).transpose(1, 2)
        return F.softmax(logits, dim=-1)


class Critic(nn.Module):
    """(B, T, V) sequence batch -> (B,) unconstrained scores.

    Accepts one-hot and softened inputs alike; there is deliberately a single
    code path for both discrimination modes.
    """

    def __init__(self, sentence_len: int, vocab_size: int, channels: int,
                 blocks: int = 5, kernel: int = 5, res_scale: float = 0.3,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.sentence_len = sentence_len
        self.vocab_size = vocab_size
        self.input_proj = nn.Conv1d(vocab_size, channels, 1, dtype=dtype)
        self.blocks = nn.Sequential(
            *[ResBlock1d(channels, kernel, res_scale, dtype) for _ in range(blocks)]
        )
        self.head = nn.Linear(sentence_len * channels, 1, dtype=dtype)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != self.sentence_len or x.shape[2] != self.vocab_size:
            raise ShapeError(
                f"shape-error: expected (B, {self.sentence_len}, {self.vocab_size}), "
                f"got {tuple(x.shape)}"
            )
        h = self.input_proj(x.transpose(1, 2))
        h = self.blocks(h)
        return self.head(h.flatten(1)).squeeze(1)


def init_gan_params(model: nn.Module, rng: np.random.Generator):
    """He-uniform weights (bound sqrt(6 / fan_in)), small uniform biases.

    Biases draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) rather than zero:
    with ReLU blocks and zero padding, zero biases leave pre-activations
    sitting exactly on the ReLU kink whenever a receptive field is fully
    gated off, which breaks finite-difference gradient audits.
    """
    with torch.no_grad():
        for module in model.modules():
            if not isinstance(module, (nn.Linear, nn.Conv1d)):
                continue
            weight = module.weight
            fan_in = int(np.prod(weight.shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            vals = rng.uniform(-bound, bound, size=tuple(weight.shape))
            weight.copy_(torch.as_tensor(vals, dtype=weight.dtype))
            if module.bias is not None:
                b_bound = 1.0 / np.sqrt(fan_in)
                b_vals = rng.uniform(-b_bound, b_bound, size=tuple(module.bias.shape))
                module.bias.copy_(torch.as_tensor(b_vals, dtype=module.bias.dtype))


def sample_noise(m: int, noise_dim: int, rng: np.random.Generator,
                 dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """m i.i.d. standard-normal noise vectors from the given stream."""
    if m < 1 or noise_dim < 1:
        raise ValueError("m and noise_dim must be >= 1")
    return torch.as_tensor(rng.standard_normal((m, noise_dim)), dtype=dtype)


def generate(generator: Generator, z: torch.Tensor) -> torch.Tensor:
    """Single-vector convenience wrapper: (Z,) noise -> (T, V) output."""
    return generator(z.unsqueeze(0)).squeeze(0)


def critic_score(critic: Critic, x: torch.Tensor) -> float:
    """Score one (T, V) sequence."""
    with torch.no_grad():
        return float(critic(x.unsqueeze(0)).squeeze(0))


def interpolate(x_real: torch.Tensor, x_gen: torch.Tensor,
                alpha: float | torch.Tensor) -> torch.Tensor:
    """Elementwise alpha * x_real + (1 - alpha) * x_gen.

    ``alpha`` may be a scalar or one value per batch element; every value
    must lie in [0, 1].
    """
    if x_real.shape != x_gen.shape:
        raise ShapeError(
            f"shape-error: {tuple(x_real.shape)} vs {tuple(x_gen.shape)}"
        )
    alpha_t = torch.as_tensor(alpha, dtype=x_real.dtype)
    if ((alpha_t < 0) | (alpha_t > 1)).any():
        raise RangeError("range-error: alpha must lie in [0, 1]")
    if alpha_t.ndim == 1:
        alpha_t = alpha_t.view(-1, *([1] * (x_real.ndim - 1)))
    return alpha_t * x_real + (1.0 - alpha_t) * x_gen


def _fd_input_gradients(critic: Critic, x_hat: torch.Tensor, eps: float) -> torch.Tensor:
    """Central-difference estimate of the critic's input gradient.

    Built from plain critic evaluations, so differentiating the resulting
    penalty with respect to the critic parameters needs only first-order
    autograd. Costs 2*T*V critic calls; intended for small configurations.
    """
    batch, steps, vocab = x_hat.shape
    columns = []
    for j in range(steps * vocab):
        delta = torch.zeros(steps * vocab, dtype=x_hat.dtype)
        delta[j] = eps
        delta = delta.view(1, steps, vocab)
        columns.append((critic(x_hat + delta) - critic(x_hat - delta)) / (2.0 * eps))
    return torch.stack(columns, dim=1)


def gradient_penalty(x_hat: torch.Tensor, critic: Critic, gp_weight: float,
                     finite_diff: bool = False, fd_eps: float = 1e-3) -> torch.Tensor:
    """gp_weight * mean((||grad_x f(x)||_2 - 1)^2) over the batch.

    The norm is taken over each example's flattened (T, V) input. With
    ``finite_diff`` the input gradient is approximated by central
    differences, a fallback for substrates without second-order autograd.
    """
    if finite_diff:
        grads = _fd_input_gradients(critic, x_hat, fd_eps)
    else:
        x_hat = x_hat.detach().requires_grad_(True)
        scores = critic(x_hat)
        grads = torch.autograd.grad(scores.sum(), x_hat, create_graph=True)[0]
        grads = grads.flatten(1)
    if not torch.isfinite(grads).all():
        raise DivergenceError("divergence: non-finite critic input gradient")
    norms = (grads * grads).sum(dim=1).sqrt()
    return gp_weight * ((norms - 1.0) ** 2).mean()


def critic_loss(critic: Critic, real: torch.Tensor, gen: torch.Tensor,
                gp_weight: float, alpha: float | torch.Tensor,
                finite_diff: bool = False) -> torch.Tensor:
    """-mean f(real) + mean f(gen) + gradient penalty on the interpolates.

    ``alpha`` carries one independent Uniform[0, 1] draw per batch element;
    it is passed in explicitly so callers control the random stream. ``real``
    and ``gen`` are treated as constants (callers detach them); only the
    critic parameters are meant to receive gradients.
    """
    if real.shape != gen.shape:
        raise ShapeError(
            f"shape-error: real {tuple(real.shape)} vs generated {tuple(gen.shape)}"
        )
    x_hat = interpolate(real, gen, alpha)
    penalty = gradient_penalty(x_hat, critic, gp_weight, finite_diff=finite_diff)
    return -critic(real).mean() + critic(gen).mean() + penalty


def generator_loss(critic: Critic, gen: torch.Tensor) -> torch.Tensor:
    """-mean f(G(z)). Callers take gradients with respect to the generator
    parameters only; the critic acts as a fixed function here."""
    return -critic(gen).mean()

"""Single-layer LSTM sequence autoencoder (the teacher network).

The encoder compresses a one-hot sequence into its final hidden state; the
decoder runs free: each step consumes the argmax of its previous output
(re-embedded as a one-hot, gradients blocked) concatenated with the code, and
emits a softmax distribution over the vocabulary. The reconstruction loss is
the squared Euclidean distance between the one-hot input and the softmax
output, summed over time and vocabulary and averaged over the batch.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import DivergenceError, ShapeError
from .optim import Adam

INIT_SCALE = 0.08


class SequenceAutoencoder(nn.Module):
    def __init__(self, vocab_size: int, hidden: int, pad_id: int = 0,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.vocab_size = vocab_size
        self.hidden = hidden
        self.pad_id = pad_id
        self.encoder_cell = nn.LSTMCell(vocab_size, hidden, dtype=dtype)
        # Decoder input is the previous output one-hot concatenated with the
        # code, so the code is injected at every time step.
        self.decoder_cell = nn.LSTMCell(vocab_size + hidden, hidden, dtype=dtype)
        self.output_proj = nn.Linear(hidden, vocab_size, dtype=dtype)

    def _dtype(self) -> torch.dtype:
        return self.output_proj.weight.dtype

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """Run the encoder over a (B, T, V) batch; returns the (B, H) code."""
        if x.ndim != 3 or x.shape[2] != self.vocab_size:
            raise ShapeError(
                f"shape-error: expected (B, T, {self.vocab_size}), got {tuple(x.shape)}"
            )
        batch = x.shape[0]
        h = x.new_zeros(batch, self.hidden)
        c = x.new_zeros(batch, self.hidden)
        for t in range(x.shape[1]):
            h, c = self.encoder_cell(x[:, t, :], (h, c))
        return h

    def decode(self, code: torch.Tensor, steps: int,
               targets: torch.Tensor | None = None) -> torch.Tensor:
        """Decode a (B, H) code into (B, steps, V) row-softmax outputs.

        Free-running greedy decoding: the first step sees the pad symbol's
        one-hot, later steps see the argmax of the previous output. When
        ``targets`` is given the ground-truth one-hots are fed back instead
        (teacher forcing). Gradients never flow through the fed-back symbol.
        """
        if code.ndim != 2 or code.shape[1] != self.hidden:
            raise ShapeError(
                f"shape-error: expected (B, {self.hidden}) code, got {tuple(code.shape)}"
            )
        batch = code.shape[0]
        h = code.new_zeros(batch, self.hidden)
        c = code.new_zeros(batch, self.hidden)
        prev = code.new_zeros(batch, self.vocab_size)
        prev[:, self.pad_id] = 1.0
        outputs = []
        for t in range(steps):
            h, c = self.decoder_cell(torch.cat([prev, code], dim=1), (h, c))
            probs = F.softmax(self.output_proj(h), dim=-1)
            outputs.append(probs)
            if targets is not None:
                prev = targets[:, t, :]
            else:
                prev = F.one_hot(probs.argmax(dim=-1), self.vocab_size)
                prev = prev.to(code.dtype).detach()
        return torch.stack(outputs, dim=1)

    def reconstruct(self, x: torch.Tensor, teacher_forcing: bool = False) -> torch.Tensor:
        """softmax(decode(encode(x))): the softened representation of x."""
        code = self.encode(x)
        return self.decode(code, x.shape[1], targets=x if teacher_forcing else None)


def init_ae_params(model: SequenceAutoencoder, rng: np.random.Generator):
    """Uniform(-0.08, 0.08) weights, zero biases, forget-gate bias 1."""
    hidden = model.hidden
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "bias" in name:
                p.zero_()
            else:
                vals = rng.uniform(-INIT_SCALE, INIT_SCALE, size=tuple(p.shape))
                p.copy_(torch.as_tensor(vals, dtype=p.dtype))
        # torch LSTM gate layout is (i, f, g, o); offset the forget slice.
        for cell in (model.encoder_cell, model.decoder_cell):
            cell.bias_ih[hidden : 2 * hidden] = 1.0


def reconstruction_loss(x: torch.Tensor, x_tilde: torch.Tensor) -> torch.Tensor:
    """Squared L2 distance summed over (T, V), averaged over the batch."""
    if x.shape != x_tilde.shape:
        raise ShapeError(
            f"shape-error: input {tuple(x.shape)} vs reconstruction {tuple(x_tilde.shape)}"
        )
    if x.ndim == 2:
        x = x.unsqueeze(0)
        x_tilde = x_tilde.unsqueeze(0)
    return ((x - x_tilde) ** 2).sum(dim=(1, 2)).mean()


def ae_train_step(
    batch: torch.Tensor,
    model: SequenceAutoencoder,
    opt: Adam,
    teacher_forcing: bool = False,
) -> float:
    """One Adam update of the autoencoder; returns the pre-update loss."""
    x_tilde = model.reconstruct(batch, teacher_forcing=teacher_forcing)
    loss = reconstruction_loss(batch, x_tilde)
    if not torch.isfinite(loss):
        raise DivergenceError("divergence: non-finite reconstruction loss")
    grads = torch.autograd.grad(loss, list(opt.params.values()))
    opt.step(dict(zip(opt.params.keys(), grads)))
    return float(loss.detach())


def reconstruction_accuracy(model: SequenceAutoencoder, x: torch.Tensor) -> float:
    """Fraction of characters recovered by greedy decoding of the code."""
    with torch.no_grad():
        x_tilde = model.reconstruct(x)
        return float((x_tilde.argmax(dim=-1) == x.argmax(dim=-1)).float().mean())

"""Adam optimizer over named parameter tensors.

Hand-rolled rather than taken from torch.optim so that the first and second
moment arrays have stable names and dtypes for the flat-array checkpoint
format, and so updates are bit-reproducible across library versions.
"""

from __future__ import annotations

import torch


class Adam:
    """Standard Adam update with bias correction.

    ``params`` maps stable names to the tensors being optimized; ``step``
    applies one in-place update from a matching dict of gradients.
    """

    def __init__(
        self,
        params: dict[str, torch.Tensor],
        lr: float,
        beta1: float,
        beta2: float,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: torch.zeros_like(p) for k, p in params.items()}
        self.v = {k: torch.zeros_like(p) for k, p in params.items()}

    @torch.no_grad()
    def step(self, grads: dict[str, torch.Tensor]):
        if set(grads) != set(self.params):
            missing = set(self.params) ^ set(grads)
            raise KeyError(f"gradient names do not match parameters: {sorted(missing)}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m.mul_(self.beta1).add_(g, alpha=1.0 - self.beta1)
            v.mul_(self.beta2).addcmul_(g, g, value=1.0 - self.beta2)
            m_hat = m / bc1
            v_hat = v / bc2
            p.sub_(self.lr * m_hat / (v_hat.sqrt() + self.eps))

    def state_arrays(self) -> dict[str, torch.Tensor]:
        """Moment arrays under stable names, for checkpointing."""
        out: dict[str, torch.Tensor] = {}
        for name in self.params:
            out[f"m.{name}"] = self.m[name]
            out[f"v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, torch.Tensor]):
        with torch.no_grad():
            for name in self.params:
                self.m[name].copy_(arrays[f"m.{name}"])
                self.v[name].copy_(arrays[f"v.{name}"])

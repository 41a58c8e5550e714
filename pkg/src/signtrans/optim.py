"""AdamW with decoupled weight decay, linear warmup/decay schedule, clipping."""

from __future__ import annotations

import math

import numpy as np

from . import ndtensor as nd


class TrainingError(RuntimeError):
    """Raised when training hits non-finite values."""


def lr_schedule(step: int, peak_lr: float, warmup_steps: int, total_steps: int) -> float:
    """Linear 0 -> peak over warmup, then linear peak -> 0 at total_steps."""
    if step <= 0:
        return 0.0
    if warmup_steps > 0 and step <= warmup_steps:
        return peak_lr * step / warmup_steps
    if step >= total_steps:
        return 0.0
    span = max(total_steps - warmup_steps, 1)
    return peak_lr * (total_steps - step) / span


def global_grad_norm(params: dict[str, nd.Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    return math.sqrt(total)


def clip_global_norm(params: dict[str, nd.Tensor], max_norm: float) -> float:
    """Scale all gradients so the global norm is at most ``max_norm``.

    Returns the pre-clip norm.
    """
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor
    return norm


class AdamW:
    """Bias-corrected Adam with decay applied directly to the parameters."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, nd.Tensor], lr: float) -> dict[str, nd.Tensor]:
        """One update; returns replacement parameter tensors."""
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        updated = {}
        for name, p in params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.isfinite(g).all():
                raise TrainingError(f"non-finite gradient in {name} at optimizer step {self.t}")
            m = self.m.get(name)
            if m is None:
                m = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            v = self.v[name]
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name] = m
            self.v[name] = v
            step_dir = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            data = p.data - (lr * step_dir).astype(p.dtype)
            if self.weight_decay:
                data = data - np.asarray(lr * self.weight_decay, dtype=p.dtype) * p.data
            updated[name] = nd.Tensor(data.astype(p.dtype), requires_grad=True)
        return updated

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.m:
            out[f"m.{name}"] = self.m[name]
            out[f"v.{name}"] = self.v[name]
        return out

    def load_state(self, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        self.m = {k[2:]: np.array(v) for k, v in arrays.items() if k.startswith("m.")}
        self.v = {k[2:]: np.array(v) for k, v in arrays.items() if k.startswith("v.")}

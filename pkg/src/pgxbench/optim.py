"""Adam optimizer and Xavier initialization for the tape tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pgxbench.autodiff import Tensor
from pgxbench.seeding import as_rng


def xavier_init(shape: tuple[int, int], rng: int | np.random.Generator, requires_grad: bool = True) -> Tensor:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)); deterministic per rng."""
    if len(shape) != 2 or shape[0] <= 0 or shape[1] <= 0:
        raise ValueError(f"xavier_init needs two positive dims, got {shape}")
    gen = as_rng(rng)
    bound = np.sqrt(6.0 / (shape[0] + shape[1]))
    return Tensor(gen.uniform(-bound, bound, size=shape), requires_grad=requires_grad)


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus the step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float = 1e-3) -> "AdamState":
        state = cls(lr=lr)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(
    params: list[Tensor], grads: list[np.ndarray], state: AdamState
) -> tuple[list[Tensor], AdamState]:
    """One bias-corrected Adam update; rejects non-finite gradients."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state accumulators must align")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ValueError(f"grad {i} has shape {g.shape}, param has {p.data.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.count_nonzero(~np.isfinite(g)))
            raise FloatingPointError(
                f"rejecting Adam step {state.step + 1}: parameter {i} has {bad} non-finite gradient entries"
            )
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        p.data = p.data - state.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
    return params, state

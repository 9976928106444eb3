"""Adam updates, inverted-dropout masks, and the shared seeded RNG.

All randomness in the package flows through ``make_rng``: a PCG64-backed
numpy Generator. PCG64's bit stream is versioned and stable across
platforms, so a seed pins the full training trajectory.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ParamSet


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class AdamState:
    """Per-parameter first/second moment accumulators plus the step counter."""

    def __init__(self, params: ParamSet, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {n: np.zeros_like(t.data) for n, t in params.trainable_items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.trainable_items()}


def adam_step(params: ParamSet, grads: dict[str, np.ndarray], state: AdamState,
              lr: float) -> None:
    """One bias-corrected Adam update of every trainable parameter, in place.

    Frozen parameters are never touched. Gradient shapes must match.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, tensor in params.trainable_items():
        g = grads[name]
        if g.shape != tensor.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter "
                             f"{name} of shape {tensor.data.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


def dropout_mask(shape, keep_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: Bernoulli(keep_prob) scaled by 1/keep_prob.

    Entries are 0 or 1/keep_prob, so the mask has unit mean and inference
    needs no rescaling. keep_prob = 1 short-circuits to an all-ones mask
    without consuming the RNG stream.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if keep_prob == 1.0:
        return np.ones(shape, dtype=np.float64)
    keep = rng.random(shape) < keep_prob
    return keep.astype(np.float64) / keep_prob

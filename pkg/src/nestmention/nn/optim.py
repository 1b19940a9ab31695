from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .autodiff import Parameter


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(opt: AdamState, params: Iterable[Parameter]) -> None:
    """Bias-corrected Adam update of every parameter from its ``grad``, in place."""
    opt.t += 1
    c1 = 1.0 - opt.beta1**opt.t
    c2 = 1.0 - opt.beta2**opt.t
    for p in params:
        m = opt.m.get(p.name)
        if m is None:
            m = opt.m[p.name] = np.zeros_like(p.value)
            opt.v[p.name] = np.zeros_like(p.value)
        v = opt.v[p.name]
        g = p.grad
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        p.value -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


def global_norm(grads: Iterable[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads)))


def clip_global_norm(grads: list[np.ndarray], threshold: float = 3.0) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``threshold``.

    Returns the norm before clipping.
    """
    if threshold <= 0:
        raise ValueError("clip threshold must be positive")
    norm = global_norm(grads)
    if norm > threshold:
        factor = threshold / norm
        for g in grads:
            g *= factor
    return norm


def add_l2_gradient(params: Iterable[Parameter], coefficient: float) -> None:
    """Gradient of ``coefficient / 2 * ||theta||^2`` added to each ``grad``."""
    if coefficient:
        for p in params:
            p.grad += coefficient * p.value

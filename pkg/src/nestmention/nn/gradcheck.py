from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import Parameter, Tape, Tensor


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` must rebuild the loss from the current parameter values and be
    deterministic.  With ``max_entries`` only that many coordinates per
    parameter are probed, preferring ones with a nonzero analytic gradient.
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    analytic = {p.name: p.grad.copy() for p in params}
    rng = rng if rng is not None else np.random.default_rng(0)

    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            nonzero = np.flatnonzero(analytic[p.name].reshape(-1))
            rest = np.setdiff1d(coords, nonzero)
            picked = rng.permutation(nonzero)[: max_entries - max_entries // 4]
            filler = rng.permutation(rest)[: max_entries - len(picked)]
            coords = np.concatenate([picked, filler]).astype(int)
        grad = analytic[p.name].reshape(-1)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + eps
            up = float(loss_fn().value)
            flat[k] = orig - eps
            down = float(loss_fn().value)
            flat[k] = orig
            numeric = (up - down) / (2 * eps)
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError(f"non-finite loss while probing {p.name}[{k}]")
            worst = max(worst, relative_error(float(grad[k]), numeric))
    for p in params:
        p.zero_grad()
    return worst

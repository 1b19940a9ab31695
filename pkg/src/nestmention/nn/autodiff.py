"""Tape-based reverse-mode autodiff over float64 numpy vectors and matrices.

Operations run eagerly.  When a :class:`Tape` is active and an operand
requires a gradient, the op's output is appended to the tape together with a
closure that pushes the output gradient to its inputs; :meth:`Tape.backward`
replays the tape in reverse.  Outside a tape nothing is recorded, which is
the fast path used for decoding.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

DTYPE = np.float64

_active_tapes: list["Tape"] = []


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __len__(self) -> int:
        return len(self.value)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE)
        else:
            self.grad += g


class Parameter(Tensor):
    """A named trainable tensor; its gradient buffer persists across tapes."""

    __slots__ = ("name",)

    def __init__(self, name: str, value):
        super().__init__(value, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Tape:
    """Ordered record of differentiable ops executed inside a ``with`` block."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> Tape:
        _active_tapes.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tapes.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor) -> None:
        if loss.value.size != 1:
            raise ValueError("backward needs a scalar loss")
        loss.accumulate(np.ones_like(loss.value))
        for node in reversed(self.nodes):
            if node.grad is not None:
                node._backward(node.grad)
        self.clear()

    def clear(self) -> None:
        for node in self.nodes:
            node.grad = None
            node._backward = None
            node._parents = ()
        self.nodes = []


def recording() -> bool:
    return bool(_active_tapes)


def _result(value: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(value)
    if _active_tapes and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        _active_tapes[-1].nodes.append(out)
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite values produced by {op}")
    return value


# ---------------------------------------------------------------------------
# elementary ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)

    return _result(a.value + b.value, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * b.value)
        if b.requires_grad:
            b.accumulate(g * a.value)

    return _result(a.value * b.value, (a, b), backward)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.accumulate(g * c)

    return _result(a.value * c, (a,), backward)


def total(a) -> Tensor:
    """Sum of all entries, as a 0-d tensor."""
    a = as_tensor(a)

    def backward(g):
        a.accumulate(np.broadcast_to(g, a.shape))

    return _result(np.asarray(a.value.sum()), (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim not in (1, 2) or b.value.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate(g @ b.value.T)
        if b.requires_grad:
            if a.value.ndim == 1:
                b.accumulate(np.outer(a.value, g))
            else:
                b.accumulate(a.value.T @ g)

    return _result(a.value @ b.value, (a, b), backward)


def affine(W, x, b) -> Tensor:
    """``W^T x + b`` with ``W`` stored as (in, out)."""
    W, x, b = as_tensor(W), as_tensor(x), as_tensor(b)
    if x.value.ndim != 1 or W.value.ndim != 2 or W.shape[0] != x.shape[0] or b.shape != (W.shape[1],):
        raise ValueError(f"affine: incompatible shapes W{W.shape} x{x.shape} b{b.shape}")

    def backward(g):
        if x.requires_grad:
            x.accumulate(W.value @ g)
        if W.requires_grad:
            W.accumulate(np.outer(x.value, g))
        if b.requires_grad:
            b.accumulate(g)

    return _result(x.value @ W.value + b.value, (W, x, b), backward)


def concat(parts: Sequence) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    for p in parts:
        if p.value.ndim != 1:
            raise ValueError("concat expects vectors")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                p.accumulate(g[lo:hi])

    return _result(np.concatenate([p.value for p in parts]), parts, backward)


def slice_(a, start: int, stop: int) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.value)
        full[start:stop] = g
        a.accumulate(full)

    return _result(a.value[start:stop], (a,), backward)


def take(table, index: int) -> Tensor:
    """Row lookup; the gradient is scattered into the single row."""
    table = as_tensor(table)

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.value)
        table.grad[index] += g

    return _result(table.value[index].copy(), (table,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)

    def backward(g):
        a.accumulate(g * (1.0 - y * y))

    return _result(y, (a,), backward)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = _sigmoid(a.value)

    def backward(g):
        a.accumulate(g * y * (1.0 - y))

    return _result(y, (a,), backward)


def dropout(x, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward(g):
        x.accumulate(g * keep)

    return _result(x.value * keep, (x,), backward)


# ---------------------------------------------------------------------------
# LSTM cell
#
# The recurrent state is carried as one vector [h; c] so the cell is a single
# tape node.  Gate layout in W (in + hidden, 4 * hidden): input, forget,
# candidate, output.


def lstm_cell(x, state, W, b) -> Tensor:
    x, state, W, b = as_tensor(x), as_tensor(state), as_tensor(W), as_tensor(b)
    H = state.shape[0] // 2
    if W.shape != (x.shape[0] + H, 4 * H) or b.shape != (4 * H,):
        raise ValueError(f"lstm_cell: W{W.shape} b{b.shape} do not fit x{x.shape} hidden {H}")
    h_prev, c_prev = state.value[:H], state.value[H:]
    xh = np.concatenate([x.value, h_prev])
    z = xh @ W.value + b.value
    i = _sigmoid(z[:H])
    f = _sigmoid(z[H : 2 * H])
    cand = np.tanh(z[2 * H : 3 * H])
    o = _sigmoid(z[3 * H :])
    c = f * c_prev + i * cand
    tc = np.tanh(c)
    h = o * tc

    def backward(g):
        gh, gc = g[:H], g[H:]
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * cand * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - cand * cand),
                gh * tc * o * (1.0 - o),
            ]
        )
        if W.requires_grad:
            W.accumulate(np.outer(xh, dz))
        if b.requires_grad:
            b.accumulate(dz)
        dxh = W.value @ dz
        if x.requires_grad:
            x.accumulate(dxh[: x.shape[0]])
        if state.requires_grad:
            state.accumulate(np.concatenate([dxh[x.shape[0] :], dc * f]))

    return _result(np.concatenate([h, c]), (x, state, W, b), backward)


def lstm_step(x, h, c, W, b) -> tuple[Tensor, Tensor]:
    """One LSTM step on separate hidden and cell vectors."""
    out = lstm_cell(x, concat([h, c]), W, b)
    H = as_tensor(h).shape[0]
    return slice_(out, 0, H), slice_(out, H, 2 * H)


def hidden(state: Tensor) -> Tensor:
    """The ``h`` half of a packed ``[h; c]`` LSTM state."""
    return slice_(state, 0, state.shape[0] // 2)


# ---------------------------------------------------------------------------
# restricted softmax


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the entries where ``mask`` is true; exactly 0 elsewhere."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no action")
    probs = np.zeros_like(logits, dtype=DTYPE)
    z = logits[mask] - logits[mask].max()
    e = np.exp(z)
    probs[mask] = e / e.sum()
    return probs


def masked_softmax_nll(logits, mask: np.ndarray, gold: int) -> tuple[Tensor, np.ndarray]:
    """Negative log-likelihood of ``gold`` under the mask-restricted softmax.

    Returns the scalar loss and the probability vector.
    """
    logits = as_tensor(logits)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no action")
    if not mask[gold]:
        raise ValueError(f"gold action {gold} is masked out")
    probs = masked_softmax(logits.value, mask)
    z = logits.value[mask]
    top = z.max()
    loss = top + np.log(np.exp(z - top).sum()) - logits.value[gold]

    def backward(g):
        d = probs.copy()
        d[gold] -= 1.0
        logits.accumulate(g * d)

    return _result(np.asarray(_check_finite(np.asarray(loss), "masked_softmax_nll")), (logits,), backward), probs

"""Dense real tensors with reverse-mode differentiation on an explicit tape.

The op set is exactly what the piano-roll UNet needs: 3x3 cross-correlation
with zero padding 1 (stride 1 or 2), nearest-neighbor 2x upsampling, channel
concatenation, relu/sigmoid, mean-squared-error loss, and a couple of scalar
reductions. Convolutions run as im2col + BLAS matmul; every backward rule is
hand-written and checked against central finite differences in the tests.

float32 is the training dtype; building tensors from float64 arrays keeps
them in float64, which the gradient-check tests rely on.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

DEFAULT_DTYPE = np.float32


class Tensor:
    """A dense nd-array plus an optional accumulated gradient buffer."""

    __slots__ = ("data", "grad", "tape")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad += g


_ACTIVE = threading.local()


def _active_tape() -> Tape | None:
    stack = getattr(_ACTIVE, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered record of operations for one reverse sweep.

    Use as a context manager; ops executed inside record themselves. Entries
    are appended in execution order, so inputs always precede their
    consumers, and backward() walks the list exactly once in reverse.
    """

    def __init__(self):
        self._entries: list[tuple[Tensor, callable]] = []
        self.consumed = False
        self.backward_visits = 0

    def __enter__(self) -> Tape:
        stack = getattr(_ACTIVE, "stack", None)
        if stack is None:
            stack = _ACTIVE.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.stack.pop()

    def __len__(self) -> int:
        return len(self._entries)

    def record(self, output: Tensor, backward_fn) -> None:
        output.tape = self
        self._entries.append((output, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """Populate grads of everything reachable from a scalar loss."""
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if self.consumed:
            raise RuntimeError("tape already consumed by a previous backward pass")
        if loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        loss.grad = np.ones_like(loss.data)
        for output, backward_fn in reversed(self._entries):
            self.backward_visits += 1
            if output.grad is None:
                continue  # not on any path to the loss
            backward_fn(output.grad)
        self.consumed = True


def backward(loss: Tensor) -> None:
    """Reverse sweep from a recorded scalar loss down to the leaves."""
    if loss.tape is None:
        raise ValueError("loss was not produced by recorded operations")
    loss.tape.backward(loss)


def _record(out: Tensor, backward_fn) -> Tensor:
    tape = _active_tape()
    if tape is not None:
        tape.record(out, backward_fn)
    return out


# ---------------------------------------------------------------------------
# convolution


def _out_hw(h: int, w: int, stride: int) -> tuple[int, int]:
    return -(-h // stride), -(-w // stride)


def _im2col(a: np.ndarray, stride: int) -> np.ndarray:
    """Unfold 3x3 zero-pad-1 patches to a [C*9, Ho*Wo] matrix."""
    c, h, w = a.shape
    ho, wo = _out_hw(h, w, stride)
    padded = np.zeros((c, h + 2, w + 2), dtype=a.dtype)
    padded[:, 1 : h + 1, 1 : w + 1] = a
    cols = np.empty((c, 3, 3, ho, wo), dtype=a.dtype)
    for ki in range(3):
        for kj in range(3):
            cols[:, ki, kj] = padded[
                :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride
            ]
    return cols.reshape(c * 9, ho * wo)


def _col2im(gcols: np.ndarray, shape: tuple[int, int, int], stride: int) -> np.ndarray:
    """Scatter-add the im2col adjoint back to input layout (inverse of _im2col)."""
    c, h, w = shape
    ho, wo = _out_hw(h, w, stride)
    gpad = np.zeros((c, h + 2, w + 2), dtype=gcols.dtype)
    g = gcols.reshape(c, 3, 3, ho, wo)
    for ki in range(3):
        for kj in range(3):
            gpad[
                :, ki : ki + stride * (ho - 1) + 1 : stride, kj : kj + stride * (wo - 1) + 1 : stride
            ] += g[:, ki, kj]
    return gpad[:, 1 : h + 1, 1 : w + 1]


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """3x3 cross-correlation, zero padding 1, stride 1 or 2, per-channel bias.

    Stride 1 preserves HxW; stride 2 yields ceil(H/2) x ceil(W/2).
    """
    if stride not in (1, 2):
        raise ValueError(f"stride must be 1 or 2, got {stride}")
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ValueError(f"conv2d expects [C,H,W] input and [Co,Ci,3,3] filters, got {x.shape} and {w.shape}")
    c_out, c_in, kh, kw = w.shape
    if (kh, kw) != (3, 3):
        raise ValueError(f"filters must be 3x3, got {kh}x{kw}")
    if x.shape[0] != c_in:
        raise ValueError(f"channel mismatch: input has {x.shape[0]}, filters expect {c_in}")
    if b.shape != (c_out,):
        raise ValueError(f"bias must have shape ({c_out},), got {b.shape}")
    if min(x.shape) == 0:
        raise ValueError(f"zero-sized input dimension in {x.shape}")

    _, h, wdt = x.shape
    ho, wo = _out_hw(h, wdt, stride)
    cols = _im2col(x.data, stride)
    out_mat = w.data.reshape(c_out, c_in * 9) @ cols
    out = Tensor(out_mat.reshape(c_out, ho, wo) + b.data[:, None, None])

    def bwd(g: np.ndarray) -> None:
        conv2d_backward(x, w, b, stride, g, cols=cols)

    return _record(out, bwd)


def conv2d_backward(x: Tensor, w: Tensor, b: Tensor, stride: int, g: np.ndarray,
                    cols: np.ndarray | None = None) -> None:
    """Exact adjoint of conv2d; accumulates into x/w/b grads.

    cols, when given, must be _im2col(x.data, stride) from the forward pass;
    it is recomputed otherwise.
    """
    c_out = w.shape[0]
    if g.shape[0] != c_out:
        raise ValueError(f"upstream grad has {g.shape[0]} channels, expected {c_out}")
    g_mat = g.reshape(c_out, -1)
    if cols is None:
        cols = _im2col(x.data, stride)
    _accumulate(b, g.sum(axis=(1, 2)))
    _accumulate(w, (g_mat @ cols.T).reshape(w.shape))
    g_cols = w.data.reshape(c_out, -1).T @ g_mat
    _accumulate(x, _col2im(g_cols, x.shape, stride))


# ---------------------------------------------------------------------------
# resampling and stacking


def upsample_nn2x(x: Tensor) -> Tensor:
    """Duplicate every cell into a 2x2 block: [C,H,W] -> [C,2H,2W]."""
    out = Tensor(x.data.repeat(2, axis=1).repeat(2, axis=2))

    def bwd(g: np.ndarray) -> None:
        c, h2, w2 = g.shape
        _accumulate(x, g.reshape(c, h2 // 2, 2, w2 // 2, 2).sum(axis=(2, 4)))

    return _record(out, bwd)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack b's channels after a's; spatial dims must match."""
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"spatial mismatch: {a.shape} vs {b.shape}")
    c1 = a.shape[0]
    out = Tensor(np.concatenate([a.data, b.data], axis=0))

    def bwd(g: np.ndarray) -> None:
        _accumulate(a, g[:c1])
        _accumulate(b, g[c1:])

    return _record(out, bwd)


# ---------------------------------------------------------------------------
# pointwise ops and reductions


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0))

    def bwd(g: np.ndarray) -> None:
        _accumulate(x, g * (x.data > 0))

    return _record(out, bwd)


def sigmoid(x: Tensor) -> Tensor:
    y = expit(x.data)
    out = Tensor(y)

    def bwd(g: np.ndarray) -> None:
        _accumulate(x, g * y * (1 - y))

    return _record(out, bwd)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all cells of (pred - target)^2; scalar output."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    out = Tensor(np.asarray((diff * diff).mean(), dtype=pred.dtype))

    def bwd(g: np.ndarray) -> None:
        scale = g * 2.0 / diff.size
        _accumulate(pred, scale * diff)
        _accumulate(target, -scale * diff)

    return _record(out, bwd)


def channel_mean(x: Tensor, index: int) -> Tensor:
    """Spatial mean of one channel of a [C,H,W] tensor; scalar output."""
    if not 0 <= index < x.shape[0]:
        raise ValueError(f"channel {index} out of range for {x.shape[0]} channels")
    out = Tensor(np.asarray(x.data[index].mean(), dtype=x.dtype))

    def bwd(g: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[index] = g / x.data[index].size
        _accumulate(x, full)

    return _record(out, bwd)


def tsum(x: Tensor) -> Tensor:
    """Sum of all cells; scalar output."""
    out = Tensor(np.asarray(x.data.sum(), dtype=x.dtype))

    def bwd(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _record(out, bwd)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """First/second moment buffers and the shared step counter."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params, state: AdamState, learning_rate: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """One bias-corrected adaptive-moment update, in place on param data.

    params is a mapping name -> Tensor; a missing grad counts as zero (the
    moments still decay). Non-finite gradients abort with the offending
    parameter's name.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        elif not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter '{name}'")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p.data -= learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)
    return state

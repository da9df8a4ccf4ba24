"""Minimal deterministic float32 tensor library with reverse-mode autodiff.

Scope is intentionally small: exactly the operations needed to train compact
MLP/CNN classifiers. There is no broadcasting beyond bias addition, no views,
and no dtype other than float32. Reductions use numpy's fixed (pairwise)
summation order and BLAS matrix products, so forward results are bitwise
repeatable for identical inputs within one environment.

Gradients are recorded on an explicit :class:`Tape`: each operation executed
while a tape is active appends one record, and ``Tape.backward(loss)`` replays
the records once, in reverse order, accumulating gradients additively into
every ``requires_grad`` tensor reachable from the loss.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFiniteError

__all__ = [
    "Tensor",
    "Tape",
    "matmul",
    "conv2d",
    "relu",
    "add_bias",
    "reshape",
    "flatten",
    "sum_all",
    "softmax_cross_entropy",
    "backward",
]

# backward_fn: gradient w.r.t. the record's output -> [(input, grad contribution)]
BackwardFn = Callable[[np.ndarray], list[tuple["Tensor", np.ndarray]]]


class Tensor:
    """Dense float32 array with an optional gradient slot.

    All axes must have positive extent; zero-sized tensors are rejected rather
    than silently flowing through as empty results. Scalars are rank-0.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float32)
        if any(dim <= 0 for dim in arr.shape):
            raise ValueError(f"zero-sized dimension in tensor shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(())[()])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad = self.grad + g.astype(np.float32, copy=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of operations for one reverse-mode sweep.

    Operations append records in execution order, so inputs always precede the
    records that consume them; ``backward`` walks the records exactly once in
    reverse.
    """

    _stack: list["Tape"] = []

    def __init__(self):
        self._records: list[tuple[Tensor, BackwardFn]] = []
        self._outputs: set[int] = set()

    def __enter__(self) -> "Tape":
        Tape._stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = Tape._stack.pop()
        assert popped is self, "tape stack corrupted"

    @staticmethod
    def current() -> Optional["Tape"]:
        return Tape._stack[-1] if Tape._stack else None

    def record(self, output: Tensor, backward_fn: BackwardFn) -> None:
        self._records.append((output, backward_fn))
        self._outputs.add(id(output))

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` on every requires_grad tensor reachable from loss.

        Gradients accumulate additively: calling backward twice doubles them.
        """
        if loss.data.ndim != 0:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._outputs:
            raise ValueError("loss was not produced under this tape")

        flowing: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float32)}
        holders: dict[int, Tensor] = {id(loss): loss}

        for output, backward_fn in reversed(self._records):
            g = flowing.pop(id(output), None)
            holders.pop(id(output), None)
            if g is None:
                continue
            if output.requires_grad:
                output.accumulate_grad(g)
            for tensor, contribution in backward_fn(g):
                key = id(tensor)
                if key in flowing:
                    flowing[key] = flowing[key] + contribution
                else:
                    flowing[key] = contribution
                    holders[key] = tensor

        # Whatever remains are leaves (tensors never produced by a record).
        for key, tensor in holders.items():
            if tensor.requires_grad:
                tensor.accumulate_grad(flowing[key])


def backward(loss: Tensor) -> None:
    """Run reverse-mode accumulation from a scalar loss on the active tape."""
    tape = Tape.current()
    if tape is None:
        raise ValueError("backward called with no active tape")
    tape.backward(loss)


def _check_finite(arr: np.ndarray, op_name: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op_name} produced non-finite values")


def _emit(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn, op_name: str) -> Tensor:
    data = np.asarray(data, dtype=np.float32)
    _check_finite(data, op_name)
    tape = Tape.current()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        tape.record(out, backward_fn)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-d tensors; inner dimensions must agree."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data

    def backward_fn(g: np.ndarray):
        return [(a, g @ b_data.T), (b, a_data.T @ g)]

    return _emit(a_data @ b_data, (a, b), backward_fn, "matmul")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward_fn(g: np.ndarray):
        return [(x, g * mask)]

    return _emit(np.maximum(x.data, np.float32(0.0)), (x,), backward_fn, "relu")


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-feature (2-d input) or per-channel (4-d input) bias vector."""
    if b.data.ndim != 1:
        raise ValueError(f"bias must be 1-d, got shape {b.shape}")
    if x.data.ndim == 2:
        if b.shape[0] != x.shape[1]:
            raise ValueError(f"bias length {b.shape[0]} does not match features {x.shape[1]}")
        out = x.data + b.data
        reduce_axes: tuple[int, ...] = (0,)
    elif x.data.ndim == 4:
        if b.shape[0] != x.shape[1]:
            raise ValueError(f"bias length {b.shape[0]} does not match channels {x.shape[1]}")
        out = x.data + b.data.reshape(1, -1, 1, 1)
        reduce_axes = (0, 2, 3)
    else:
        raise ValueError(f"add_bias expects 2-d or 4-d input, got shape {x.shape}")

    def backward_fn(g: np.ndarray):
        return [(x, g), (b, g.sum(axis=reduce_axes))]

    return _emit(out, (x, b), backward_fn, "add_bias")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != x.size:
        raise ValueError(f"cannot reshape {x.shape} into {shape}")
    in_shape = x.data.shape

    def backward_fn(g: np.ndarray):
        return [(x, g.reshape(in_shape))]

    return _emit(x.data.reshape(shape), (x,), backward_fn, "reshape")


def flatten(x: Tensor) -> Tensor:
    """Collapse all but the leading (batch) axis."""
    return reshape(x, (x.shape[0], int(np.prod(x.shape[1:]))))


def sum_all(x: Tensor) -> Tensor:
    """Sum over every element, producing a rank-0 tensor."""
    shape = x.data.shape

    def backward_fn(g: np.ndarray):
        return [(x, np.full(shape, g, dtype=np.float32))]

    return _emit(np.sum(x.data, dtype=np.float32), (x,), backward_fn, "sum_all")


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation with zero padding.

    Input is NCHW, the kernel is (out_channels, in_channels, kh, kw), and the
    output spatial size is floor((H + 2*padding - kh) / stride) + 1.
    """
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")
    n, c, h, w = x.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise ValueError(f"kernel channels {kc} do not match input channels {c}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ValueError(
            f"kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}"
        )
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1

    if padding:
        padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        padded = x.data
    # (n, c, h_out, w_out, kh, kw) view of all receptive fields
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride, :, :]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h_out * w_out, c * kh * kw)
    k_mat = kernel.data.reshape(f, c * kh * kw)
    out = (cols @ k_mat.T).reshape(n, h_out, w_out, f).transpose(0, 3, 1, 2)

    def backward_fn(g: np.ndarray):
        g_mat = g.transpose(0, 2, 3, 1).reshape(n * h_out * w_out, f)
        dk = (g_mat.T @ cols).reshape(f, c, kh, kw)
        dcols = (g_mat @ k_mat).reshape(n, h_out, w_out, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
        dpadded = np.zeros_like(padded)
        for u in range(kh):
            for v in range(kw):
                dpadded[:, :, u : u + stride * (h_out - 1) + 1 : stride,
                        v : v + stride * (w_out - 1) + 1 : stride] += dcols[:, :, :, :, u, v]
        if padding:
            dx = dpadded[:, :, padding : padding + h, padding : padding + w]
        else:
            dx = dpadded
        return [(x, np.ascontiguousarray(dx)), (kernel, dk)]

    return _emit(out, (x, kernel), backward_fn, "conv2d")


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray, smoothing: float = 0.0) -> Tensor:
    """Mean cross-entropy of logits against label-smoothed one-hot targets.

    The target for a sample with class y puts (1 - smoothing) + smoothing/K on
    y and smoothing/K on every other class. Returns a rank-0 tensor.
    """
    if logits.data.ndim != 2:
        raise ValueError(f"logits must be 2-d, got shape {logits.shape}")
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {smoothing}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ValueError(
            f"labels shape {labels.shape} does not match logits batch {logits.shape[0]}"
        )
    n, k = logits.shape
    if labels.min() < 0 or labels.max() >= k:
        raise IndexError(f"label out of range [0, {k}): {labels.min()}..{labels.max()}")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    exp_z = np.exp(z)
    sum_exp = exp_z.sum(axis=1, keepdims=True)
    log_probs = z - np.log(sum_exp)
    probs = exp_z / sum_exp

    target = np.full((n, k), np.float32(smoothing / k), dtype=np.float32)
    target[np.arange(n), labels] += np.float32(1.0 - smoothing)

    loss = np.float32(-(target * log_probs).sum() / n)

    def backward_fn(g: np.ndarray):
        return [(logits, (probs - target) * (g / np.float32(n)))]

    return _emit(loss, (logits,), backward_fn, "softmax_cross_entropy")

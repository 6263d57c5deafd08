"""
Minimal reverse-mode differentiation over numpy arrays.

This module provides the Tensor class, a node of a recorded computation
graph, together with the operations the spiking transformer needs:
elementwise arithmetic with broadcasting, matrix products, reductions,
reshaping and indexing, a handful of smooth nonlinearities, 2x2 max
pooling and im2col convolution.

Each operation computes its forward value eagerly and, when any input
requires a gradient, records a closure that maps the output gradient to
the input gradients. ``backward`` walks the graph in reverse topological
order and accumulates gradients into the ``grad`` attribute of leaves.

Example usage::

    from iskra.core.autograd import Tensor

    w = Tensor(np.ones((3, 2), dtype=np.float32), requires_grad=True)
    x = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
    loss = (x @ w).sum()
    loss.backward()
    print(w.grad)
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from iskra.exceptions import DimensionError, UsageError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    """Return True if operations on this thread record a graph."""
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable graph recording on the current thread.

    Examples
    --------
    >>> with no_grad():
    ...     logits = model.forward(images).logits
    """
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """
    A numpy array with an optional recorded gradient history.

    Attributes
    ----------
    data : np.ndarray
        Forward value. The dtype of the inputs is preserved by every
        operation, so float32 graphs stay float32 and float64 graphs (used
        by finite-difference oracles) stay float64.
    grad : np.ndarray or None
        Accumulated gradient for leaves with ``requires_grad``.
    requires_grad : bool
        Whether gradients flow to or through this tensor.
    name : str, optional
        Identifier used in error messages and parameter listings.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    # numpy defers binary operators to Tensor.__r*__ methods
    __array_ufunc__ = None

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str | None = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float32)
        self.data = array
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple["Tensor", ...] = ()
        self._backward: BackwardFn | None = None

    # ------------------------------------------------------------------
    # Graph construction
    # ------------------------------------------------------------------

    @staticmethod
    def _make(
        data: np.ndarray,
        parents: tuple["Tensor", ...],
        backward: BackwardFn,
    ) -> "Tensor":
        out = Tensor(data)
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    @property
    def shape(self) -> tuple[int, ...]:
        """Return the array shape."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """Return the number of axes."""
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        """Return the array dtype."""
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        """Return True if the tensor was not produced by a recorded op."""
        return self._backward is None

    def numpy(self) -> np.ndarray:
        """Return the underlying array (no copy)."""
        return self.data

    def item(self) -> float:
        """Return a Python float for a single-element tensor."""
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Return a tensor sharing data but cut from the graph."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        """Clear the accumulated gradient."""
        self.grad = None

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor; see :func:`backward`."""
        backward(self, seed)

    # ------------------------------------------------------------------
    # Elementwise arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = self._lift(other)
        a_shape, b_shape = self.shape, other.shape

        def _bw(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor._make(self.data + other.data, (self, other), _bw)

    def __radd__(self, other) -> "Tensor":
        return self._lift(other).__add__(self)

    def __sub__(self, other) -> "Tensor":
        other = self._lift(other)
        a_shape, b_shape = self.shape, other.shape

        def _bw(g):
            return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)

        return Tensor._make(self.data - other.data, (self, other), _bw)

    def __rsub__(self, other) -> "Tensor":
        return self._lift(other).__sub__(self)

    def __mul__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self.data, other.data

        def _bw(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._make(a * b, (self, other), _bw)

    def __rmul__(self, other) -> "Tensor":
        return self._lift(other).__mul__(self)

    def __truediv__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self.data, other.data

        def _bw(g):
            return (
                _unbroadcast(g / b, a.shape),
                _unbroadcast(-g * a / (b * b), b.shape),
            )

        return Tensor._make(a / b, (self, other), _bw)

    def __rtruediv__(self, other) -> "Tensor":
        return self._lift(other).__truediv__(self)

    def __neg__(self) -> "Tensor":
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent: float) -> "Tensor":
        a = self.data
        exponent = float(exponent)

        def _bw(g):
            return (g * exponent * a ** (exponent - 1.0),)

        return Tensor._make(a**exponent, (self,), _bw)

    def __matmul__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise DimensionError(
                f"matmul needs operands with >= 2 axes, got {a.shape} @ {b.shape}",
                expected=2,
                actual=min(a.ndim, b.ndim),
            )
        if a.shape[-1] != b.shape[-2]:
            raise DimensionError(
                f"matmul inner dimensions differ: {a.shape} @ {b.shape}",
                expected=a.shape[-1],
                actual=b.shape[-2],
            )

        def _bw(g):
            ga = g @ np.swapaxes(b, -1, -2)
            gb = np.swapaxes(a, -1, -2) @ g
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

        return Tensor._make(a @ b, (self, other), _bw)

    # ------------------------------------------------------------------
    # Reductions and shape manipulation
    # ------------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def _bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), _bw)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor._make(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(original),)
        )

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor._make(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),)
        )

    def swapaxes(self, axis1: int, axis2: int) -> "Tensor":
        return Tensor._make(
            np.swapaxes(self.data, axis1, axis2),
            (self,),
            lambda g: (np.swapaxes(g, axis1, axis2),),
        )

    def __getitem__(self, index) -> "Tensor":
        shape, dtype = self.shape, self.dtype

        basic = _is_basic_index(index)

        def _bw(g):
            full = np.zeros(shape, dtype=dtype)
            if basic:
                full[index] = g
            else:
                np.add.at(full, index, g)
            return (full,)

        return Tensor._make(self.data[index], (self,), _bw)

    # ------------------------------------------------------------------
    # Nonlinearities
    # ------------------------------------------------------------------

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        a = self.data
        return Tensor._make(np.log(a), (self,), lambda g: (g / a,))

    def relu(self) -> "Tensor":
        a = self.data
        return Tensor._make(
            np.maximum(a, 0), (self,), lambda g: (g * (a > 0).astype(a.dtype),)
        )

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self) -> "Tensor":
        out = _stable_sigmoid(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=axis, keepdims=True)

        def _bw(g):
            return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

        return Tensor._make(out, (self,), _bw)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - lse
        soft = np.exp(out)

        def _bw(g):
            return (g - soft * g.sum(axis=axis, keepdims=True),)

        return Tensor._make(out, (self,), _bw)

    def __repr__(self) -> str:
        grad_flag = ", requires_grad=True" if self.requires_grad else ""
        label = f", name='{self.name}'" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{grad_flag}{label})"


def _is_basic_index(index) -> bool:
    """Return True if indexing selects each element at most once."""
    items = index if isinstance(index, tuple) else (index,)
    return all(
        isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None
        for i in items
    )


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Overflow-free logistic function."""
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    e = np.exp(x[~positive])
    out[~positive] = e / (1.0 + e)
    return out


def as_tensor(value) -> Tensor:
    """Wrap arrays and scalars as constant tensors, pass tensors through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Stack tensors along a new axis."""
    tensors = tuple(as_tensor(t) for t in tensors)
    data = np.stack([t.data for t in tensors], axis=axis)

    def _bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._make(data, tensors, _bw)


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an existing axis."""
    tensors = tuple(as_tensor(t) for t in tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._make(data, tensors, _bw)


def take_along_tokens(x: Tensor, index: np.ndarray) -> Tensor:
    """
    Gather tokens per batch row.

    Parameters
    ----------
    x : Tensor
        Array of shape [..., B, N, D].
    index : np.ndarray
        Integer array [B, K] of token positions to keep, in order.

    Returns
    -------
    Tensor
        Array of shape [..., B, K, D].
    """
    lead = x.shape[:-3]
    batch, tokens, channels = x.shape[-3:]
    rows = np.arange(batch)[:, None]
    data = x.data[..., rows, index, :]
    dtype = x.dtype

    def _bw(g):
        full = np.zeros(lead + (batch, tokens, channels), dtype=dtype)
        full[..., rows, index, :] = g
        return (full,)

    return Tensor._make(data, (x,), _bw)


def max_pool2x2(x: Tensor) -> Tensor:
    """
    2x2 max pooling with stride 2 over the last two axes.

    The gradient is routed to the first maximal element of each window,
    which keeps the backward pass well defined on binary spike maps where
    ties are the rule.
    """
    *lead, height, width = x.shape
    if height % 2 or width % 2:
        raise DimensionError(
            f"max_pool2x2 needs even spatial size, got {height}x{width}",
            expected="even",
            actual=(height, width),
        )
    windows = (
        x.data.reshape(*lead, height // 2, 2, width // 2, 2)
        .swapaxes(-3, -2)
        .reshape(*lead, height // 2, width // 2, 4)
    )
    winner = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, winner[..., None], axis=-1)[..., 0]
    dtype = x.dtype

    def _bw(g):
        spread = np.zeros(windows.shape, dtype=dtype)
        np.put_along_axis(spread, winner[..., None], g[..., None], axis=-1)
        spread = (
            spread.reshape(*lead, height // 2, width // 2, 2, 2)
            .swapaxes(-3, -2)
            .reshape(*lead, height, width)
        )
        return (spread,)

    return Tensor._make(out, (x,), _bw)


def conv2d(x: Tensor, weight: Tensor, padding: int = 1) -> Tensor:
    """
    Stride-1 2-D convolution via im2col.

    Parameters
    ----------
    x : Tensor
        Input of shape [M, C, H, W].
    weight : Tensor
        Kernel of shape [O, C, k, k].
    padding : int, optional
        Zero padding on each spatial side (default: 1).

    Returns
    -------
    Tensor
        Output of shape [M, O, H + 2p - k + 1, W + 2p - k + 1].
    """
    batch, channels, height, width = x.shape
    out_channels, in_channels, k, k2 = weight.shape
    if in_channels != channels or k != k2:
        raise DimensionError(
            f"conv2d kernel {weight.shape} does not fit input {x.shape}",
            expected=channels,
            actual=in_channels,
        )
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = height + 2 * padding - k + 1
    out_w = width + 2 * padding - k + 1
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(2, 3))
    # [M, C, Ho, Wo, k, k] -> [M*Ho*Wo, C*k*k]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * out_h * out_w, -1)
    kernel = weight.data.reshape(out_channels, -1)
    out = (cols @ kernel.T).reshape(batch, out_h, out_w, out_channels)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def _bw(g):
        g2d = g.transpose(0, 2, 3, 1).reshape(-1, out_channels)
        grad_w = (g2d.T @ cols).reshape(weight.shape)
        grad_cols = (g2d @ kernel).reshape(batch, out_h, out_w, channels, k, k)
        grad_padded = np.zeros(padded.shape, dtype=padded.dtype)
        for i in range(k):
            for j in range(k):
                grad_padded[:, :, i : i + out_h, j : j + out_w] += grad_cols[
                    :, :, :, :, i, j
                ].transpose(0, 3, 1, 2)
        row_span = slice(padding, padding + height)
        col_span = slice(padding, padding + width)
        grad_x = grad_padded[:, :, row_span, col_span]
        return grad_x, grad_w

    return Tensor._make(out, (x, weight), _bw)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under ``logits`` [B, K]."""
    labels = np.asarray(labels, dtype=np.int64)
    one_hot = np.zeros(logits.shape, dtype=logits.dtype)
    one_hot[np.arange(labels.shape[0]), labels] = 1.0
    return -(logits.log_softmax(axis=-1) * one_hot).sum(axis=-1).mean()


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack_.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack_.append((parent, False))
    return order


def backward(output: Tensor, seed: np.ndarray | None = None) -> None:
    """
    Propagate gradients from ``output`` to every leaf that requires them.

    Parameters
    ----------
    output : Tensor
        Result of a recorded forward pass.
    seed : np.ndarray, optional
        Gradient of the final objective with respect to ``output``
        (default: ones, i.e. d output / d output).

    Raises
    ------
    UsageError
        If ``output`` carries no recorded graph, e.g. because the forward
        pass ran without any parameter requiring gradients or inside
        :func:`no_grad`.
    """
    if not isinstance(output, Tensor) or not output.requires_grad:
        raise UsageError(
            "backward() needs the output of a recorded forward pass; "
            "run the forward pass with parameters that require gradients first"
        )
    if seed is None:
        seed = np.ones(output.shape, dtype=output.dtype)
    seed = np.asarray(seed, dtype=output.dtype)
    if seed.shape != output.shape:
        raise DimensionError(
            f"seed shape {seed.shape} != output shape {output.shape}",
            expected=output.shape,
            actual=seed.shape,
        )

    pending: dict[int, np.ndarray] = {id(output): seed}
    for node in reversed(_topological_order(output)):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node._backward is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + parent_grad
            else:
                pending[key] = parent_grad


def numerical_gradient(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    eps: float = 1e-4,
    indices: Iterable[tuple[int, ...]] | None = None,
) -> np.ndarray:
    """
    Central finite-difference gradient of a scalar function.

    Parameters
    ----------
    fn : callable
        Maps an array shaped like ``x`` to a float. Called 2 times per
        probed element.
    x : np.ndarray
        Point of evaluation; it is perturbed in place and restored.
    eps : float, optional
        Step size (default: 1e-4).
    indices : iterable of tuple, optional
        Elements to check (default: all). Unchecked entries stay 0.

    Returns
    -------
    np.ndarray
        Gradient estimate with the shape and dtype of ``x``.
    """
    grad = np.zeros_like(x)
    if indices is None:
        indices = np.ndindex(*x.shape)
    for idx in indices:
        original = x[idx]
        x[idx] = original + eps
        upper = fn(x)
        x[idx] = original - eps
        lower = fn(x)
        x[idx] = original
        grad[idx] = (upper - lower) / (2.0 * eps)
    return grad

"""
Tensor - Dense float64 tensors with reverse-mode differentiation, a masked softmax that
never touches infinities, finite-difference gradient checking and Adam.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyRowError, GraphConsumedError, ShapeError

ArrayLike = Union[np.ndarray, float, Sequence]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Run forward computations without recording a graph."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """A float64 array plus the bookkeeping reverse-mode differentiation needs."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_consumed")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._consumed = False

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, other)

    def backward(self) -> None:
        """Populate .grad on every leaf that requires it; the graph is consumed."""
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise GraphConsumedError("backward already ran through this graph")
        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._consumed:
                raise GraphConsumedError("backward already ran through part of this graph")
            if not node._parents:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            parent_grads = node._backward(grad)
            node._backward = None
            node._consumed = True
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
            node._parents = ()


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = {id(root)}
    stack: List[Tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, index = stack.pop()
        if index < len(node._parents):
            stack.append((node, index + 1))
            parent = node._parents[index]
            if parent.requires_grad and id(parent) not in seen:
                seen.add(id(parent))
                stack.append((parent, 0))
        else:
            order.append(node)
    return order


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"cannot broadcast {a.shape} with {b.shape}") from e


# Primitives

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as e:
        raise ShapeError(str(e)) from e

    def backward(grad: np.ndarray):
        grad_a = _unbroadcast(np.matmul(grad, np.swapaxes(b.data, -1, -2)), a.shape)
        grad_b = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), grad), b.shape)
        return grad_a, grad_b

    return _result(data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b)

    def backward(grad: np.ndarray):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _result(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with broadcasting."""
    _broadcast_shape(a, b)

    def backward(grad: np.ndarray):
        return _unbroadcast(grad * b.data, a.shape), _unbroadcast(grad * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward)


def mul_scalar(a: Tensor, scalar: float) -> Tensor:
    return _result(a.data * scalar, (a,), lambda grad: (grad * scalar,))


def concat_last_dim(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    leading = tensors[0].shape[:-1]
    for t in tensors:
        if t.shape[:-1] != leading:
            raise ShapeError(f"concat shapes differ before the last axis: {leading} vs {t.shape[:-1]}")
    splits = np.cumsum([t.shape[-1] for t in tensors])[:-1]

    def backward(grad: np.ndarray):
        return tuple(np.split(grad, splits, axis=-1))

    return _result(np.concatenate([t.data for t in tensors], axis=-1), tuple(tensors), backward)


def embedding_lookup(table: Tensor, indices: np.ndarray) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding table must be 2-D, got {table.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ShapeError(f"embedding index out of range for table with {table.shape[0]} rows")

    def backward(grad: np.ndarray):
        grad_table = np.zeros_like(table.data)
        np.add.at(grad_table, indices.reshape(-1), grad.reshape(-1, table.shape[1]))
        return (grad_table,)

    return _result(table.data[indices], (table,), backward)


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """
    Softmax over the last axis restricted to columns where `mask` is True.

    Masked columns get exactly zero probability and zero gradient.
    """
    try:
        allowed = np.broadcast_to(np.asarray(mask, dtype=bool), scores.shape)
    except ValueError as e:
        raise ShapeError(f"mask {np.shape(mask)} does not fit scores {scores.shape}") from e
    if not allowed.any(axis=-1).all():
        raise EmptyRowError("a softmax row has no allowed column")
    lowest = np.finfo(np.float64).min
    row_max = np.where(allowed, scores.data, lowest).max(axis=-1, keepdims=True)
    exps = np.where(allowed, np.exp(np.where(allowed, scores.data - row_max, 0.0)), 0.0)
    probs = exps / exps.sum(axis=-1, keepdims=True)

    def backward(grad: np.ndarray):
        return (probs * (grad - (grad * probs).sum(axis=-1, keepdims=True)),)

    return _result(probs, (scores,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(f"layer norm parameters must have shape ({width},)")
    mean = x.data.mean(axis=-1, keepdims=True)
    centred = x.data - mean
    inv_std = 1.0 / np.sqrt((centred ** 2).mean(axis=-1, keepdims=True) + eps)
    normed = centred * inv_std

    def backward(grad: np.ndarray):
        grad_normed = grad * gain.data
        grad_x = inv_std / width * (
            width * grad_normed
            - grad_normed.sum(axis=-1, keepdims=True)
            - normed * (grad_normed * normed).sum(axis=-1, keepdims=True)
        )
        grad_gain = (grad * normed).reshape(-1, width).sum(axis=0)
        grad_bias = grad.reshape(-1, width).sum(axis=0)
        return grad_x, grad_gain, grad_bias

    return _result(normed * gain.data + bias.data, (x, gain, bias), backward)


def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    return _result(np.where(active, x.data, 0.0), (x,), lambda grad: (grad * active,))


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore_index: Optional[int] = None) -> Tensor:
    """Mean token cross-entropy over targets that are not `ignore_index`."""
    targets = np.asarray(targets, dtype=np.int64)
    vocab = logits.shape[-1]
    if logits.shape[:-1] != targets.shape:
        raise ShapeError(f"logits {logits.shape} do not match targets {targets.shape}")
    flat_logits = logits.data.reshape(-1, vocab)
    flat_targets = targets.reshape(-1)
    valid = np.ones_like(flat_targets, dtype=bool) if ignore_index is None else flat_targets != ignore_index
    if valid.any() and (flat_targets[valid].min() < 0 or flat_targets[valid].max() >= vocab):
        raise ShapeError(f"target id out of range for {vocab} classes")
    count = int(valid.sum())
    shifted = flat_logits - flat_logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    safe_targets = np.where(valid, flat_targets, 0)
    picked = log_probs[np.arange(flat_targets.size), safe_targets]
    loss = -(picked * valid).sum() / count if count else 0.0

    def backward(grad: np.ndarray):
        if not count:
            return (np.zeros_like(logits.data),)
        probs = np.exp(log_probs)
        probs[np.arange(flat_targets.size), safe_targets] -= 1.0
        probs *= valid[:, None] / count
        return ((probs * grad).reshape(logits.shape),)

    return _result(np.array(loss), (logits,), backward)


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(str(e)) from e
    return _result(data, (x,), lambda grad: (grad.reshape(x.shape),))


def transpose(x: Tensor, axes: Tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return _result(np.transpose(x.data, axes), (x,), lambda grad: (np.transpose(grad, inverse),))


def gather_last(x: Tensor, index: np.ndarray) -> Tensor:
    """
    out[..., j] = x[..., index[..., j]] with `index` broadcast over the leading axes of x.

    Used to look up relative-distance scores, where the last axis of x is short.
    """
    index = np.asarray(index, dtype=np.int64)
    target = x.shape[:-1] + index.shape[-1:]
    try:
        full_index = np.broadcast_to(index, target)
    except ValueError as e:
        raise ShapeError(f"index {index.shape} does not fit {x.shape}") from e
    width = x.shape[-1]
    data = np.take_along_axis(x.data, full_index, axis=-1)

    def backward(grad: np.ndarray):
        grad_x = np.empty(x.shape)
        for row in range(width):
            grad_x[..., row] = np.where(full_index == row, grad, 0.0).sum(axis=-1)
        return (grad_x,)

    return _result(data, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    return _result(np.array(x.data.sum()), (x,), lambda grad: (np.broadcast_to(grad, x.shape).copy(),))


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when rate is 0 or no generator is given (evaluation)."""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(keep))


# Gradient checking

def finite_diff_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5,
                      max_coords: int = 500, seed: int = 0) -> float:
    """
    Largest relative error between backprop and central-difference gradients.

    Up to `max_coords` coordinates per tensor are sampled; relative error is
    |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
    """
    for param in params:
        param.zero_grad()
    loss_fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for param, grad in zip(params, analytic):
            flat = param.data.reshape(-1)
            flat_grad = grad.reshape(-1)
            if flat.size <= max_coords:
                coords = np.arange(flat.size)
            else:
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
            for coord in coords:
                original = flat[coord]
                flat[coord] = original + eps
                upper = loss_fn().item()
                flat[coord] = original - eps
                lower = loss_fn().item()
                flat[coord] = original
                numeric = (upper - lower) / (2 * eps)
                error = abs(flat_grad[coord] - numeric) / max(1e-8, abs(flat_grad[coord]) + abs(numeric))
                worst = max(worst, error)
    return worst


# Optimization

@dataclass
class AdamState:
    step: int = 0
    first: List[np.ndarray] = field(default_factory=list)
    second: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(0, [np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied in place to the parameter data."""
    if len(params) != len(grads) or len(params) != len(state.first):
        raise ShapeError("parameter, gradient and optimizer state lists differ in length")
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for param, grad, first, second in zip(params, grads, state.first, state.second):
        if grad is None:
            grad = np.zeros_like(param.data)
        if grad.shape != param.shape or first.shape != param.shape:
            raise ShapeError(f"gradient/state shape mismatch for parameter {param.name or param.shape}")
        first *= beta1
        first += (1.0 - beta1) * grad
        second *= beta2
        second += (1.0 - beta2) * grad * grad
        param.data -= lr * (first / correction1) / (np.sqrt(second / correction2) + eps)
    return state


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most `max_norm`."""
    total = math.sqrt(sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None))
    if total > max_norm > 0:
        scale = max_norm / total
        for param in params:
            if param.grad is not None:
                param.grad *= scale
    return total


class Adam:
    """Adam over a fixed parameter list, reading gradients from each tensor's .grad."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.for_params(self.params)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state,
                  self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

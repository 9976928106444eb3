"""Dense float64 tensors with reverse-mode gradient recording.

Every operation appends a node to an implicit tape (the graph hanging off
its output tensor) together with a hand-derived backward closure. Calling
``backward()`` on a scalar runs the closures in reverse topological order.
Gradients of each op are verified against central finite differences in the
test suite; composition is then automatic.

Shapes are kept 1-D or 2-D throughout. Elementwise ops broadcast like numpy
and the backward pass sums gradients over broadcast axes.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / evaluation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` by summing over broadcast axes."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array plus the tape bookkeeping needed for backprop.

    ``requires_grad`` marks tensors that participate in gradient
    computation; it propagates through ops. Constants built from data keep
    it False so the backward pass never walks into them.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad and _GRAD_ENABLED
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def constant(data) -> "Tensor":
        return Tensor(data, requires_grad=False)

    @staticmethod
    def parameter(data) -> "Tensor":
        t = Tensor(data, requires_grad=True)
        t.requires_grad = True  # parameters stay trainable even under no_grad
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- backward pass --------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode sweep from this scalar through the recorded graph."""
        if self.data.shape != ():
            raise ValueError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    # -- elementwise arithmetic (numpy broadcasting rules) ---------------------

    def _coerce(self, other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = Tensor(self.data + other.data,
                     requires_grad=self.requires_grad or other.requires_grad,
                     parents=(self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g, other.data.shape))
            out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(-g)
        return out

    def __sub__(self, other):
        other = self._coerce(other)
        out = Tensor(self.data - other.data,
                     requires_grad=self.requires_grad or other.requires_grad,
                     parents=(self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-g, other.data.shape))
            out._backward = backward
        return out

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        out = Tensor(self.data * other.data,
                     requires_grad=self.requires_grad or other.requires_grad,
                     parents=(self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g * other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g * self.data, other.data.shape))
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        out = Tensor(self.data / other.data,
                     requires_grad=self.requires_grad or other.requires_grad,
                     parents=(self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g / other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-g * self.data / (other.data * other.data),
                                                   other.data.shape))
            out._backward = backward
        return out

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    # -- linear algebra ---------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        """Strict 2-D matrix product (m,k) @ (k,n) -> (m,n)."""
        other = self._coerce(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError(f"matmul needs 2-D operands, got {self.data.shape} @ {other.data.shape}")
        if self.data.shape[1] != other.data.shape[0]:
            raise ValueError(f"matmul shape mismatch: {self.data.shape} @ {other.data.shape}")
        out = Tensor(self.data @ other.data,
                     requires_grad=self.requires_grad or other.requires_grad,
                     parents=(self, other))
        if out.requires_grad:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(g @ other.data.T)
                if other.requires_grad:
                    other._accumulate(self.data.T @ g)
            out._backward = backward
        return out

    def __matmul__(self, other):
        return self.matmul(other)

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ValueError(f"transpose needs a 2-D tensor, got shape {self.data.shape}")
        out = Tensor(self.data.T, requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g.T)
        return out

    def reshape(self, *shape) -> "Tensor":
        out = Tensor(self.data.reshape(*shape), requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g.reshape(self.data.shape))
        return out

    # -- nonlinearities ----------------------------------------------------------

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        out = Tensor(y, requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * (1.0 - y * y))
        return out

    def sigmoid(self) -> "Tensor":
        # stable two-branch logistic, no overflow for large |x|
        x = self.data
        y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        out = Tensor(y, requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * y * (1.0 - y))
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g / self.data)
        return out

    def clip_min(self, floor: float) -> "Tensor":
        """max(x, floor); gradient passes only where x > floor."""
        keep = self.data > floor
        out = Tensor(np.maximum(self.data, floor), requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * keep)
        return out

    # -- reductions ----------------------------------------------------------------

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(np.broadcast_to(g, self.data.shape))
        return out

    def mean(self) -> "Tensor":
        return self.sum() / float(self.data.size)

    def row_sums(self) -> "Tensor":
        """(B,K) -> (B,1) row totals, for per-row renormalization."""
        if self.data.ndim != 2:
            raise ValueError(f"row_sums needs a 2-D tensor, got shape {self.data.shape}")
        out = Tensor(self.data.sum(axis=1, keepdims=True),
                     requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(np.broadcast_to(g, self.data.shape))
        return out

    # -- structural ops ---------------------------------------------------------------

    def cols(self, start: int, length: int) -> "Tensor":
        """Column slice [:, start:start+length] of a 2-D tensor."""
        if self.data.ndim != 2:
            raise ValueError(f"cols needs a 2-D tensor, got shape {self.data.shape}")
        out = Tensor(self.data[:, start:start + length],
                     requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            def backward(g):
                full = np.zeros_like(self.data)
                full[:, start:start + length] = g
                self._accumulate(full)
            out._backward = backward
        return out

    def take_rows(self, indices) -> "Tensor":
        """Gather rows by integer index; backward scatter-adds (shared rows sum)."""
        idx = np.asarray(indices, dtype=np.intp)
        out = Tensor(self.data[idx], requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            def backward(g):
                full = np.zeros_like(self.data)
                np.add.at(full, idx, g)
                self._accumulate(full)
            out._backward = backward
        return out

    def pick_rows(self, indices) -> "Tensor":
        """(B,K) with per-row column index -> (B,) gathered entries."""
        if self.data.ndim != 2:
            raise ValueError(f"pick_rows needs a 2-D tensor, got shape {self.data.shape}")
        idx = np.asarray(indices, dtype=np.intp)
        rows = np.arange(self.data.shape[0])
        out = Tensor(self.data[rows, idx], requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            def backward(g):
                full = np.zeros_like(self.data)
                np.add.at(full, (rows, idx), g)
                self._accumulate(full)
            out._backward = backward
        return out

    def pick(self, index: int) -> "Tensor":
        """Scalar entry of a 1-D tensor."""
        if self.data.ndim != 1:
            raise ValueError(f"pick needs a 1-D tensor, got shape {self.data.shape}")
        out = Tensor(self.data[index], requires_grad=self.requires_grad, parents=(self,))
        if out.requires_grad:
            def backward(g):
                full = np.zeros_like(self.data)
                full[index] = g
                self._accumulate(full)
            out._backward = backward
        return out


def hconcat(tensors: list) -> Tensor:
    """Concatenate 2-D tensors along axis 1."""
    datas = [t.data for t in tensors]
    out = Tensor(np.concatenate(datas, axis=1),
                 requires_grad=any(t.requires_grad for t in tensors),
                 parents=tuple(tensors))
    if out.requires_grad:
        widths = [d.shape[1] for d in datas]
        def backward(g):
            offset = 0
            for t, w in zip(tensors, widths):
                if t.requires_grad:
                    t._accumulate(g[:, offset:offset + w])
                offset += w
        out._backward = backward
    return out


def concat(tensors: list) -> Tensor:
    """Concatenate 1-D tensors end to end."""
    datas = [t.data for t in tensors]
    out = Tensor(np.concatenate(datas),
                 requires_grad=any(t.requires_grad for t in tensors),
                 parents=tuple(tensors))
    if out.requires_grad:
        sizes = [d.shape[0] for d in datas]
        def backward(g):
            offset = 0
            for t, n in zip(tensors, sizes):
                if t.requires_grad:
                    t._accumulate(g[offset:offset + n])
                offset += n
        out._backward = backward
    return out


def softmax(v: Tensor) -> Tensor:
    """Probability distribution over a 1-D tensor, max-subtracted for stability.

    Backward uses the closed form s * (g - g.s) of the softmax Jacobian.
    """
    if v.data.ndim != 1:
        raise ValueError(f"softmax needs a 1-D tensor, got shape {v.data.shape}")
    if v.data.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(v.data - v.data.max())
    s = e / e.sum()
    out = Tensor(s, requires_grad=v.requires_grad, parents=(v,))
    if out.requires_grad:
        out._backward = lambda g: v._accumulate(s * (g - float(g @ s)))
    return out


def softmax_rows(m: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor (independent distribution per row)."""
    if m.data.ndim != 2:
        raise ValueError(f"softmax_rows needs a 2-D tensor, got shape {m.data.shape}")
    if m.data.shape[1] == 0:
        raise ValueError("softmax over empty rows")
    e = np.exp(m.data - m.data.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)
    out = Tensor(s, requires_grad=m.requires_grad, parents=(m,))
    if out.requires_grad:
        out._backward = lambda g: m._accumulate(s * (g - (g * s).sum(axis=1, keepdims=True)))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return a.matmul(b)


def tensor(data) -> Tensor:
    """Build a constant tensor from external data, rejecting NaN/Inf."""
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor values must be finite")
    return Tensor(arr)


class ParamSet:
    """Named parameter tensors, each flagged trainable or frozen.

    Frozen entries (pre-trained word embeddings) are visible to the forward
    pass as constants and are never touched by the optimizer. Iteration
    order is insertion order, which keeps training byte-deterministic.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, data, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name} has non-finite values")
        t = Tensor.parameter(arr) if trainable else Tensor.constant(arr)
        self._params[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable_items(self):
        return [(n, t) for n, t in self._params.items() if self._trainable[n]]

    def items(self):
        return list(self._params.items())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def copy_values(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for n, t in self._params.items():
            src = values[n]
            if src.shape != t.data.shape:
                raise ValueError(f"shape mismatch loading {n}: {src.shape} vs {t.data.shape}")
            t.data = np.array(src, dtype=np.float64)


def gradients(loss: Tensor, params: ParamSet) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar loss for every trainable parameter.

    Parameters the loss does not reach get a zero gradient of matching shape.
    """
    if loss.data.shape != ():
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    params.zero_grads()
    loss.backward()
    out = {}
    for name, t in params.trainable_items():
        out[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
    return out

"""Minimal dense-network stack: array-valued reverse-mode autodiff, MLPs, Adam.

Everything is float64. Tensors record their producing operation as a closure;
calling :func:`backward` on a scalar loss walks the recorded graph once in
reverse topological order. This is deliberately small: batched 2-D inputs,
dense layers, and the handful of ops a clipped-surrogate policy-gradient
loop needs.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(RuntimeError):
    """Raised when a NaN/inf shows up where the math requires finite values."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus the tape entry that produced it."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, (self, other))

        def back():
            self._accumulate(_unbroadcast(out.grad, self.data.shape))
            other._accumulate(_unbroadcast(out.grad, other.data.shape))

        out._backward = back
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, (self, other))

        def back():
            self._accumulate(_unbroadcast(out.grad * other.data, self.data.shape))
            other._accumulate(_unbroadcast(out.grad * self.data, other.data.shape))

        out._backward = back
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-(other if isinstance(other, Tensor) else Tensor(other)))

    def __rsub__(self, other):
        return Tensor(other) + (-self)

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            other = Tensor(other)
        out = Tensor(self.data @ other.data, (self, other))

        def back():
            if other.data.ndim == 1:
                # (B, n) @ (n,) -> (B,)
                self._accumulate(np.outer(out.grad, other.data))
                other._accumulate(self.data.T @ out.grad)
            else:
                self._accumulate(out.grad @ other.data.T)
                other._accumulate(self.data.T @ out.grad)

        out._backward = back
        return out

    # -- elementwise --------------------------------------------------------

    def tanh(self):
        y = np.tanh(self.data)
        out = Tensor(y, (self,))

        def back():
            self._accumulate(out.grad * (1.0 - y * y))

        out._backward = back
        return out

    def exp(self):
        y = np.exp(self.data)
        out = Tensor(y, (self,))

        def back():
            self._accumulate(out.grad * y)

        out._backward = back
        return out

    def log(self):
        out = Tensor(np.log(self.data), (self,))

        def back():
            self._accumulate(out.grad / self.data)

        out._backward = back
        return out

    def square(self):
        return self * self

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None):
        out = Tensor(self.data.sum(axis=axis), (self,))

        def back():
            if axis is None:
                self._accumulate(np.full_like(self.data, out.grad))
            else:
                self._accumulate(np.expand_dims(out.grad, axis) * np.ones_like(self.data))

        out._backward = back
        return out

    def mean(self):
        n = self.data.size
        out = Tensor(self.data.mean(), (self,))

        def back():
            self._accumulate(np.full_like(self.data, out.grad / n))

        out._backward = back
        return out

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def clip(t: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only where the input is strictly inside."""
    out = Tensor(np.clip(t.data, lo, hi), (t,))

    def back():
        mask = (t.data > lo) & (t.data < hi)
        t._accumulate(out.grad * mask)

    out._backward = back
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(np.minimum(a.data, b.data), (a, b))

    def back():
        take_a = a.data <= b.data
        a._accumulate(out.grad * take_a)
        b._accumulate(out.grad * ~take_a)

    out._backward = back
    return out


def log_softmax(t: Tensor) -> Tensor:
    """Row-wise log-softmax of a (B, K) tensor, max-subtracted for stability."""
    z = t.data - t.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = z - lse
    out = Tensor(y, (t,))

    def back():
        p = np.exp(y)
        t._accumulate(out.grad - p * out.grad.sum(axis=1, keepdims=True))

    out._backward = back
    return out


def softmax(t: Tensor) -> Tensor:
    """Row-wise softmax of a (B, K) tensor."""
    z = t.data - t.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    out = Tensor(p, (t,))

    def back():
        dot = (out.grad * p).sum(axis=1, keepdims=True)
        t._accumulate(p * (out.grad - dot))

    out._backward = back
    return out


def gather_rows(t: Tensor, index: np.ndarray) -> Tensor:
    """Pick one column per row of a (B, K) tensor: out[b] = t[b, index[b]]."""
    idx = np.asarray(index, dtype=np.int64)
    rows = np.arange(t.data.shape[0])
    out = Tensor(t.data[rows, idx], (t,))

    def back():
        g = np.zeros_like(t.data)
        np.add.at(g, (rows, idx), out.grad)
        t._accumulate(g)

    out._backward = back
    return out


def backward(loss: Tensor) -> None:
    """Populate `.grad` on every tensor that `loss` depends on.

    The loss must be a scalar Tensor produced through recorded ops.
    """
    if not isinstance(loss, Tensor):
        raise TypeError(f"backward expects a Tensor loss, got {type(loss).__name__}")
    if loss.data.shape != ():
        raise ValueError(f"backward expects a scalar loss, got shape {loss.data.shape}")

    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward()


def gradients(loss: Tensor, params: list) -> list:
    """Backward pass returning one gradient array per parameter.

    Parameters not reached by the loss get exact zeros. Parameter `.grad`
    slots are cleared afterwards so successive calls never accumulate.
    """
    backward(loss)
    grads = []
    for p in params:
        grads.append(p.grad if p.grad is not None else np.zeros_like(p.data))
        p.grad = None
    return grads


# -- dense networks ----------------------------------------------------------


def scaled_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float) -> np.ndarray:
    bound = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class DenseNet:
    """MLP with tanh hidden layers and (by default) an identity output layer.

    `out_gain` scales the output-layer init; policy networks use a small
    gain so early action distributions stay near uniform. A tanh output
    turns the net into a feature trunk.
    """

    def __init__(self, sizes, rng: np.random.Generator, out_gain: float = 1.0,
                 out_activation: str = "identity"):
        if len(sizes) < 2:
            raise ValueError("DenseNet needs at least input and output sizes")
        if out_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown activation {out_activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = []
        self.biases = []
        self.activations = []
        last = len(self.sizes) - 2
        for i in range(len(self.sizes) - 1):
            gain = out_gain if i == last else 1.0
            w = scaled_uniform(rng, self.sizes[i], self.sizes[i + 1], gain)
            self.weights.append(Tensor(w))
            self.biases.append(Tensor(np.zeros(self.sizes[i + 1])))
            self.activations.append(out_activation if i == last else "tanh")

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    @property
    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"expected input of shape (B, {self.in_dim}), got {x.shape}"
            )

    def forward(self, x) -> Tensor:
        """Tape-recorded forward pass on a (B, in_dim) batch."""
        h = x if isinstance(x, Tensor) else Tensor(x)
        self._check_input(h.data)
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = h @ w + b
            if act == "tanh":
                h = h.tanh()
        return h

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Plain numpy forward pass; no tape, for rollouts and diagnostics."""
        h = np.asarray(x, dtype=np.float64)
        self._check_input(h)
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = h @ w.data + b.data
            if act == "tanh":
                h = np.tanh(h)
        return h

    def copy_from(self, other: "DenseNet") -> None:
        if self.sizes != other.sizes:
            raise ValueError(f"size mismatch: {self.sizes} vs {other.sizes}")
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine.data = theirs.data.copy()


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Layer-composed output of `net` on a batch; deterministic given both."""
    return net.forward_np(x)


class Adam:
    """Bias-corrected Adam over a fixed parameter list."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("non-finite gradient; update aborted")
        self.step_count += 1
        t = self.step_count
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(opt: Adam, grads) -> None:
    """Apply one Adam update; aborts (raising NonFiniteError) on bad gradients."""
    opt.step(grads)

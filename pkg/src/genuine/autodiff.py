"""Reverse-mode autodiff over dense float64 matrices.

Everything is a 2-D numpy array (scalars are 1x1). A Tape records operation
nodes in forward order; backward walks them in reverse, which is a valid
topological order by construction. Parameters are leaf Variables whose
gradients accumulate additively until zeroed, so gradient accumulation over
a minibatch is just several backward passes between optimizer steps.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class ShapeError(ValueError):
    pass


_TAPE_STACK: list["Tape"] = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    """Records op nodes during forward; replays them in reverse for backward."""

    def __init__(self):
        self._nodes: list[Variable] = []
        self._spent = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def backward(self, loss: "Variable"):
        """Backpropagate from a 1x1 loss through every recorded node once."""
        if self._spent:
            raise RuntimeError("backward already ran on this tape; build a new tape")
        if loss.value.shape != (1, 1):
            raise ShapeError(f"backward needs a 1x1 loss, got {loss.value.shape}")
        self._spent = True
        loss.grad = np.ones((1, 1))
        for node in reversed(self._nodes):
            if node.grad is None or node._bwd is None:
                continue
            for parent, pgrad in zip(node._parents, node._bwd(node.grad)):
                if pgrad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = pgrad.copy()
                else:
                    parent.grad += pgrad


class Variable:
    """A 2-D float64 value plus (optionally) a gradient of the same shape."""

    __slots__ = ("value", "grad", "name", "requires_grad", "_parents", "_bwd")

    def __init__(self, value, requires_grad=False, name=None):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"Variable must be 2-D, got shape {arr.shape}")
        self.value = arr
        self.grad = None
        self.name = name
        self.requires_grad = requires_grad
        self._parents = ()
        self._bwd = None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 value, got {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        tag = self.name or "var"
        return f"Variable({tag}, shape={self.value.shape})"

    # operator sugar; dispatches on the right operand
    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        if other.value.shape == self.value.shape:
            return add(self, other)
        if other.value.shape == (1, 1):
            return add_scalar(self, other)
        if other.value.shape == (1, self.value.shape[1]):
            return add_bias(self, other)
        raise ShapeError(f"add: {self.value.shape} + {other.value.shape}")

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        if other.value.shape == (1, 1):
            return mul_scalar(self, other)
        return hadamard(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return self + (-other)


def parameter(value, name=None) -> Variable:
    return Variable(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def constant(value, name=None) -> Variable:
    return Variable(value, requires_grad=False, name=name)


def zero_grad(params):
    for p in params:
        p.grad = None


def _make(value, parents, bwd) -> Variable:
    tape = _active_tape()
    needs = any(p.requires_grad for p in parents)
    out = Variable(value, requires_grad=needs)
    if tape is not None and needs:
        out._parents = tuple(parents)
        out._bwd = bwd
        tape._nodes.append(out)
    return out


def matmul(a: Variable, b: Variable) -> Variable:
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul: {a.value.shape} @ {b.value.shape}")
    av, bv = a.value, b.value
    return _make(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a: Variable, b: Variable) -> Variable:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: {a.value.shape} + {b.value.shape}")
    return _make(a.value + b.value, (a, b), lambda g: (g, g))


def add_bias(a: Variable, bias: Variable) -> Variable:
    """Row-vector bias broadcast over the rows of a."""
    if bias.value.shape != (1, a.value.shape[1]):
        raise ShapeError(f"add_bias: {a.value.shape} + {bias.value.shape}")
    return _make(a.value + bias.value, (a, bias),
                 lambda g: (g, g.sum(axis=0, keepdims=True)))


def hadamard(a: Variable, b: Variable) -> Variable:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"hadamard: {a.value.shape} * {b.value.shape}")
    av, bv = a.value, b.value
    return _make(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Variable, c: float) -> Variable:
    return _make(a.value * c, (a,), lambda g: (g * c,))


def mul_scalar(a: Variable, s: Variable) -> Variable:
    """Multiply a matrix by a learnable 1x1 scalar."""
    if s.value.shape != (1, 1):
        raise ShapeError(f"mul_scalar: scalar must be 1x1, got {s.value.shape}")
    av, sv = a.value, float(s.value[0, 0])
    return _make(av * sv, (a, s),
                 lambda g: (g * sv, np.array([[float((g * av).sum())]])))


def add_scalar(a: Variable, s: Variable) -> Variable:
    """Add a learnable 1x1 scalar to every entry of a."""
    if s.value.shape != (1, 1):
        raise ShapeError(f"add_scalar: scalar must be 1x1, got {s.value.shape}")
    return _make(a.value + float(s.value[0, 0]), (a, s),
                 lambda g: (g, np.array([[float(g.sum())]])))


def transpose(a: Variable) -> Variable:
    return _make(a.value.T.copy(), (a,), lambda g: (g.T,))


def relu(a: Variable) -> Variable:
    mask = a.value > 0  # subgradient at 0 is 0
    return _make(a.value * mask, (a,), lambda g: (g * mask,))


def log(a: Variable) -> Variable:
    av = a.value
    return _make(np.log(av), (a,), lambda g: (g / av,))


def _softmax(x, axis):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def row_softmax(a: Variable) -> Variable:
    y = _softmax(a.value, axis=1)
    return _make(y, (a,),
                 lambda g: (y * (g - (g * y).sum(axis=1, keepdims=True)),))


def col_softmax(a: Variable) -> Variable:
    y = _softmax(a.value, axis=0)
    return _make(y, (a,),
                 lambda g: (y * (g - (g * y).sum(axis=0, keepdims=True)),))


def mean_rows(a: Variable) -> Variable:
    m = a.value.shape[0]
    return _make(a.value.mean(axis=0, keepdims=True), (a,),
                 lambda g: (np.repeat(g, m, axis=0) / m,))


def max_rows(a: Variable) -> Variable:
    """Column-wise max over rows; gradient routes to the first argmax row."""
    arg = a.value.argmax(axis=0)

    def bwd(g):
        out = np.zeros_like(a.value)
        out[arg, np.arange(a.value.shape[1])] = g[0]
        return (out,)

    return _make(a.value.max(axis=0, keepdims=True), (a,), bwd)


def reciprocal(a: Variable) -> Variable:
    inv = 1.0 / a.value
    return _make(inv, (a,), lambda g: (-g * inv * inv,))


def scale_rows(a: Variable, col: Variable) -> Variable:
    """Multiply row i of a by col[i, 0]."""
    if col.value.shape != (a.value.shape[0], 1):
        raise ShapeError(f"scale_rows: {a.value.shape} with column {col.value.shape}")
    av, cv = a.value, col.value
    return _make(av * cv, (a, col),
                 lambda g: (g * cv, (g * av).sum(axis=1, keepdims=True)))


def sum_all(a: Variable) -> Variable:
    return _make(np.array([[a.value.sum()]]), (a,),
                 lambda g: (np.full_like(a.value, float(g[0, 0])),))


def concat_cols(a: Variable, b: Variable) -> Variable:
    if a.value.shape[0] != b.value.shape[0]:
        raise ShapeError(f"concat_cols: {a.value.shape} | {b.value.shape}")
    na = a.value.shape[1]
    return _make(np.hstack([a.value, b.value]), (a, b),
                 lambda g: (g[:, :na].copy(), g[:, na:].copy()))


def slice_cols(a: Variable, k: int) -> Variable:
    if not 0 < k <= a.value.shape[1]:
        raise ShapeError(f"slice_cols: k={k} of {a.value.shape}")

    def bwd(g):
        full = np.zeros_like(a.value)
        full[:, :k] = g
        return (full,)

    return _make(a.value[:, :k].copy(), (a,), bwd)


def symmetrize(a: Variable) -> Variable:
    if a.value.shape[0] != a.value.shape[1]:
        raise ShapeError(f"symmetrize: square matrix needed, got {a.value.shape}")
    return _make(0.5 * (a.value + a.value.T), (a,), lambda g: (0.5 * (g + g.T),))


def sym_normalize(a: Variable) -> Variable:
    """Self-loop symmetric normalization: D^{-1/2} (A + I) D^{-1/2}.

    D is the degree matrix of A + I, so isolated nodes stay well-defined.
    Differentiable in A, including through the degrees.
    """
    n = a.value.shape[0]
    if a.value.shape != (n, n):
        raise ShapeError(f"sym_normalize: square matrix needed, got {a.value.shape}")
    b = a.value + np.eye(n)
    d = b.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    ahat = b * np.outer(inv, inv)

    def bwd(g):
        t = g * ahat
        row_term = (t.sum(axis=1) + t.sum(axis=0)) / d
        return (g * np.outer(inv, inv) - 0.5 * row_term[:, None],)

    return _make(ahat, (a,), bwd)


def softmax_cross_entropy(logits: Variable, label: int) -> Variable:
    """Negative log softmax probability of the given class, from raw logits."""
    if logits.value.shape[0] != 1:
        raise ShapeError(f"softmax_cross_entropy: logits must be 1xC, got {logits.value.shape}")
    n_cls = logits.value.shape[1]
    if not (isinstance(label, (int, np.integer)) and 0 <= label < n_cls):
        raise ValueError(f"label must be in 0..{n_cls - 1}, got {label!r}")
    z = logits.value[0]
    zmax = z.max()
    lse = zmax + np.log(np.exp(z - zmax).sum())
    p = np.exp(z - lse)
    loss = np.array([[lse - z[label]]])
    onehot = np.zeros(n_cls)
    onehot[label] = 1.0
    return _make(loss, (logits,),
                 lambda g: (float(g[0, 0]) * (p - onehot)[None, :],))


class Adam:
    """Adam with bias correction; update is lr * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            m_hat = self._m[i] / (1 - b1 ** self.t)
            v_hat = self._v[i] / (1 - b2 ** self.t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def grad_check(loss_fn, params, eps=1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn takes no arguments and returns a 1x1 Variable; it must be a pure
    function of the current parameter values. Relative error uses a
    max(1, |a|, |n|) denominator.
    """
    params = list(params)
    zero_grad(params)
    with Tape() as tape:
        tape.backward(loss_fn())
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.value)
                for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_fn().item()
            flat[i] = orig - eps
            f_minus = loss_fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            a = ana.reshape(-1)[i]
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, rel)
    return worst


def save_params(path, named_values: dict[str, np.ndarray], meta: dict | None = None):
    """Write named float64 matrices plus a JSON meta blob; round-trips bitwise."""
    path = Path(path)
    payload = {f"param/{k}": np.asarray(v, dtype=np.float64) for k, v in named_values.items()}
    payload["__meta__"] = np.frombuffer(
        json.dumps({"format": 1, "meta": meta or {}}).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if header.get("format") != 1:
            raise ValueError(f"unsupported checkpoint format: {header.get('format')!r}")
        named = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
    return named, header["meta"]

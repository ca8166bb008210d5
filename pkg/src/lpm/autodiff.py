"""Tape-based reverse-mode differentiation over numpy arrays.

Values are plain ``float64`` or ``complex128`` arrays. Every operation is
evaluated eagerly; when at least one input is a :class:`Node` the result is
recorded on that node's :class:`Tape` together with a vector-Jacobian
callback. Called with plain arrays only, the same functions just compute.

Cotangent convention
--------------------
For a real scalar loss ``L``:

* a real node ``x`` stores ``dL/dx``;
* a complex node ``w`` stores the Wirtinger cotangent ``dL/d conj(w)``.

With this choice a holomorphic linear map ``y = A w`` has the adjoint
``A^H`` as its vjp, so the unitary mixers pull cotangents back through
their inverse. Where a complex-valued op consumes a real input, the real
gradient is recovered as ``2 * Re(cotangent)``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import spectral

ARG_EPS = 1e-12
FOLD_EPS = 1e-12


class AutodiffError(Exception):
    """Base class for structured engine errors."""


class ShapeError(AutodiffError, ValueError):
    def __init__(self, op: str, shapes: Sequence[tuple], detail: str = ""):
        self.op = op
        self.shapes = tuple(shapes)
        msg = f"{op}: incompatible shapes {', '.join(map(str, self.shapes))}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NonFiniteError(AutodiffError, FloatingPointError):
    def __init__(self, op: str, stage: str = "forward"):
        self.op = op
        self.stage = stage
        super().__init__(f"{op}: non-finite values produced in {stage} pass")


class DomainError(AutodiffError, ValueError):
    pass


class Node:
    """A recorded value on a tape."""

    __slots__ = ("value", "tape", "parents", "vjp", "op", "name", "index")

    def __init__(self, value, tape, parents=(), vjp=None, op="leaf", name=None):
        self.value = value
        self.tape = tape
        self.parents = tuple(parents)
        self.vjp = vjp
        self.op = op
        self.name = name
        self.index = -1

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.value)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node({self.op}{label}, shape={self.shape}, dtype={self.value.dtype})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Node):
            raise TypeError("division by a Node is not supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)


class Tape:
    """Ordered record of nodes; replaying it backwards yields gradients."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _append(self, node: Node) -> Node:
        node.index = len(self.nodes)
        self.nodes.append(node)
        return node

    def leaf(self, value, name: str | None = None) -> Node:
        arr = np.array(value, dtype=np.complex128 if np.iscomplexobj(value) else np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"leaf {name or ''}".strip())
        return self._append(Node(arr, self, name=name))

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes if n.op == "leaf"]

    def gradient(self, loss: Node, wrt: Iterable[Node]) -> list[np.ndarray]:
        """Gradients of the real scalar ``loss`` with respect to each node in ``wrt``.

        Leaves the loss does not depend on get a zero array.
        """
        if not isinstance(loss, Node) or loss.tape is not self:
            raise AutodiffError("loss is not a node on this tape")
        if loss.is_complex:
            raise AutodiffError("loss must be real-valued")
        if loss.value.size != 1:
            raise AutodiffError(f"loss must be a scalar, got shape {loss.shape}")

        cot: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        for node in reversed(self.nodes[: loss.index + 1]):
            if node.vjp is None:
                continue
            g = cot.pop(node.index, None)
            if g is None:
                continue
            contributions = node.vjp(g)
            for parent, c in zip(node.parents, contributions):
                if parent is None or c is None:
                    continue
                c = _to_parent(c, parent, node.is_complex)
                if not np.all(np.isfinite(c)):
                    raise NonFiniteError(node.op, stage="backward")
                if parent.index in cot:
                    cot[parent.index] = cot[parent.index] + c
                else:
                    cot[parent.index] = c

        grads = []
        for node in wrt:
            if node.tape is not self:
                raise AutodiffError(f"{node!r} belongs to another tape")
            g = cot.get(node.index)
            grads.append(np.zeros_like(node.value) if g is None else g)
        return grads


def backward(tape: Tape, loss: Node) -> dict[str, np.ndarray]:
    """Gradients for every named leaf on ``tape``."""
    leaves = [n for n in tape.leaves() if n.name is not None]
    return dict(zip((n.name for n in leaves), tape.gradient(loss, leaves)))


def value(x):
    return x.value if isinstance(x, Node) else x


def _to_parent(c, parent: Node, out_complex: bool):
    if out_complex and not parent.is_complex:
        c = 2.0 * np.real(c)
    elif not out_complex and not parent.is_complex:
        c = np.real(c)
    return _unbroadcast(np.asarray(c), parent.shape)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _apply(op: str, forward: Callable, make_vjp: Callable, *inputs, check=True):
    tape = None
    nodes = []
    vals = []
    for x in inputs:
        if isinstance(x, Node):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise AutodiffError(f"{op}: inputs recorded on different tapes")
            nodes.append(x)
            vals.append(x.value)
        else:
            nodes.append(None)
            vals.append(x)
    try:
        out = forward(*vals)
    except ValueError as exc:
        raise ShapeError(op, [np.shape(v) for v in vals], str(exc)) from None
    out = np.asarray(out)
    if out.dtype.kind not in "fc":
        out = out.astype(np.float64)
    if check and not np.isfinite(out).all():
        raise NonFiniteError(op)
    if tape is None:
        return out
    return tape._append(Node(out, tape, nodes, make_vjp(out, *vals), op))


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    return _apply("add", np.add, lambda out, a, b: lambda g: (g, g), a, b)


def sub(a, b):
    return _apply("sub", np.subtract, lambda out, a, b: lambda g: (g, -g), a, b)


def neg(a):
    return _apply("neg", np.negative, lambda out, a: lambda g: (-g,), a)


def mul(a, b):
    """Elementwise product, real or complex, with broadcasting."""
    return _apply(
        "mul", np.multiply,
        lambda out, a, b: lambda g: (g * np.conj(b), g * np.conj(a)),
        a, b,
    )


def scale(a, s: float):
    return _apply("scale", lambda a: a * s, lambda out, a: lambda g: (g * np.conj(s),), a)


# ---------------------------------------------------------------------------
# complex plumbing


def expi(phi):
    """Unit phasor ``exp(i*phi)`` from real angles."""
    if np.iscomplexobj(value(phi)):
        raise DomainError("expi expects real angles")
    return _apply(
        "expi", lambda p: np.exp(1j * p),
        lambda out, p: lambda g: (g * np.conj(1j * out),),
        phi,
    )


def angle(z):
    """Principal argument in (-pi, pi].

    The vjp clamps the modulus at ``ARG_EPS`` so states passing near the
    origin do not blow up the gradient.
    """
    def make_vjp(out, z):
        mod2 = np.maximum(np.abs(z), ARG_EPS) ** 2
        return lambda g: (g * 1j * z / (2.0 * mod2),)

    return _apply("angle", np.angle, make_vjp, z)


def absolute(z):
    def make_vjp(out, z):
        if np.iscomplexobj(z):
            return lambda g: (g * z / (2.0 * np.maximum(out, ARG_EPS)),)
        return lambda g: (g * np.sign(z),)

    return _apply("abs", np.abs, make_vjp, z)


def real(z):
    def make_vjp(out, z):
        if np.iscomplexobj(z):
            return lambda g: (0.5 * g + 0j,)
        return lambda g: (g,)

    return _apply("real", np.real, make_vjp, z)


def imag(z):
    return _apply("imag", np.imag, lambda out, z: lambda g: (0.5j * g,), z)


# ---------------------------------------------------------------------------
# real nonlinearities


def sin(x):
    return _apply("sin", np.sin, lambda out, x: lambda g: (g * np.cos(x),), x)


def arcsin(x):
    """arcsin on [-1, 1]; the derivative at the endpoints is taken as 0."""
    v = value(x)
    if np.any(np.abs(v) > 1.0):
        raise DomainError("arcsin argument outside [-1, 1]")

    def make_vjp(out, x):
        inner = 1.0 - x * x
        d = np.where(inner > 0.0, 1.0 / np.sqrt(np.where(inner > 0.0, inner, 1.0)), 0.0)
        return lambda g: (g * d,)

    return _apply("arcsin", np.arcsin, make_vjp, x)


def fold_angle(phi: np.ndarray) -> np.ndarray:
    """``arcsin(sin(phi))`` computed piecewise, exact on [-pi/2, pi/2]."""
    phi = np.asarray(phi, dtype=np.float64)
    r = phi - (2.0 * np.pi) * np.round(phi / (2.0 * np.pi))
    out = np.where(r > np.pi / 2, np.pi - r, np.where(r < -np.pi / 2, -np.pi - r, r))
    return np.clip(out, -np.pi / 2, np.pi / 2)


def fold(phi):
    """Fused ``arcsin(sin(phi))`` with derivative ``sign(cos phi)``.

    The slope is set to 0 where ``|cos phi| < FOLD_EPS`` (the fold points).
    """
    def make_vjp(out, p):
        c = np.cos(p)
        d = np.where(np.abs(c) < FOLD_EPS, 0.0, np.sign(c))
        return lambda g: (g * d,)

    return _apply("fold", fold_angle, make_vjp, phi)


def tanh(x):
    return _apply("tanh", np.tanh, lambda out, x: lambda g: (g * (1.0 - out * out),), x)


def arctanh(x, limit: float = 1.0 - 1e-9):
    """arctanh of ``x`` clamped to ``[-limit, limit]``; zero slope where clamped."""
    def make_vjp(out, x):
        inside = np.abs(x) <= limit
        d = np.where(inside, 1.0 / (1.0 - np.where(inside, x, 0.0) ** 2), 0.0)
        return lambda g: (g * d,)

    return _apply("arctanh", lambda x: np.arctanh(np.clip(x, -limit, limit)), make_vjp, x)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x):
    """GELU, tanh approximation."""
    def inner(x):
        return np.tanh(_GELU_C * (x + 0.044715 * (x * x * x)))

    def fwd(x):
        return 0.5 * x * (1.0 + inner(x))

    def make_vjp(out, x):
        def vjp(g):
            t = inner(x)
            d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
            return (g * d,)
        return vjp

    return _apply("gelu", fwd, make_vjp, x)


def softmax(x, axis: int = -1):
    def fwd(x):
        e = np.exp(x - np.max(x, axis=axis, keepdims=True))
        return e / np.sum(e, axis=axis, keepdims=True)

    def make_vjp(out, x):
        return lambda g: (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _apply("softmax", fwd, make_vjp, x)


def layer_norm(x, weight, bias, eps: float = 1e-5):
    """Normalise over the last axis, then scale and shift."""
    def fwd(x, w, b):
        mu = x.mean(axis=-1, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
        return (x - mu) / np.sqrt(var + eps) * w + b

    def make_vjp(out, x, w, b):
        mu = x.mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(((x - mu) ** 2).mean(axis=-1, keepdims=True) + eps)
        xhat = (x - mu) * inv

        def vjp(g):
            gx = g * w
            dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                        - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            return dx, g * xhat, g

        return vjp

    return _apply("layer_norm", fwd, make_vjp, x, weight, bias)


# ---------------------------------------------------------------------------
# reductions, shapes, linear maps


def sum(x, axis=None, keepdims: bool = False):
    def make_vjp(out, x):
        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, x.shape),)
        return vjp

    return _apply("sum", lambda x: np.sum(x, axis=axis, keepdims=keepdims), make_vjp, x)


def mean(x, axis=None, keepdims: bool = False):
    v = value(x)
    count = v.size if axis is None else v.shape[axis]
    if count == 0:
        raise ShapeError("mean", [v.shape], "empty reduction")
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def getitem(x, key):
    def make_vjp(out, x):
        def vjp(g):
            full = np.zeros_like(x, dtype=np.result_type(x, g))
            full[key] += g
            return (full,)
        return vjp

    return _apply("getitem", lambda x: x[key], make_vjp, x)


def take(x, index: int, axis: int = -1):
    """Select one position along ``axis``, dropping that axis."""
    key = [slice(None)] * value(x).ndim
    key[axis] = index
    return getitem(x, tuple(key))


def reshape(x, shape):
    return _apply(
        "reshape", lambda x: np.reshape(x, shape),
        lambda out, x: lambda g: (np.reshape(g, x.shape),),
        x,
    )


def swapaxes(x, a1: int, a2: int):
    return _apply(
        "swapaxes", lambda x: np.swapaxes(x, a1, a2),
        lambda out, x: lambda g: (np.swapaxes(g, a1, a2),),
        x,
    )


def matmul(a, b):
    """Batched matrix product; 1-D operands follow ``np.matmul`` rules."""
    def make_vjp(out, a, b):
        def vjp(g):
            a2 = a[None, :] if a.ndim == 1 else a
            b2 = b[:, None] if b.ndim == 1 else b
            g2 = g
            if a.ndim == 1:
                g2 = np.expand_dims(g2, -2)
            if b.ndim == 1:
                g2 = np.expand_dims(g2, -1)
            ga = g2 @ np.conj(np.swapaxes(b2, -1, -2))
            gb = np.conj(np.swapaxes(a2, -1, -2)) @ g2
            if a.ndim == 1:
                ga = _unbroadcast(ga, (1, a.shape[0])).reshape(a.shape)
            if b.ndim == 1:
                gb = _unbroadcast(gb, (b.shape[0], 1)).reshape(b.shape)
            return ga, gb
        return vjp

    return _apply("matmul", np.matmul, make_vjp, a, b)


def dft(z):
    """Unitary DFT along the last axis; the vjp is the inverse transform."""
    return _apply("dft", spectral.dft, lambda out, z: lambda g: (spectral.idft(g),), z)


def idft(z):
    return _apply("idft", spectral.idft, lambda out, z: lambda g: (spectral.dft(g),), z)


# ---------------------------------------------------------------------------
# losses


def mse_loss(pred, target):
    diff = sub(pred, target)
    return mean(mul(diff, diff))


def mae_loss(pred, target):
    return mean(absolute(sub(pred, target)))

"""Tape-based reverse-mode differentiation over a small, fixed op vocabulary.

Every op works on float64 ndarrays and accepts leading batch axes, so a
minibatch of ``(B, rows, cols)`` activations can flow through the same
graph as a single ``(rows, cols)`` matrix.  Gradients flowing into
lower-rank operands (weights, biases) are summed over the extra leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

OP_KINDS = (
    "matmul",
    "add",
    "add_bias",
    "scale",
    "relu",
    "softmax",
    "layer_norm",
    "concat",
    "slice",
    "mse_loss",
    "transpose",
)

LAYER_NORM_EPS = 1e-10


class ShapeError(ValueError):
    """Operand shapes do not conform to the requested op."""

    def __init__(self, kind: str, shapes, detail: str = ""):
        self.kind = kind
        self.shapes = [tuple(s) for s in shapes]
        msg = f"{kind}: incompatible shapes {self.shapes}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@dataclass
class Record:
    kind: str
    inputs: tuple[int, ...]
    output: int
    saved: dict[str, Any] = field(default_factory=dict)
    attrs: dict[str, Any] = field(default_factory=dict)


class Var:
    """Handle to one node on a tape."""

    __slots__ = ("tape", "id")

    def __init__(self, tape: "Tape", node_id: int):
        self.tape = tape
        self.id = node_id

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.id]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self):
        return f"Var(id={self.id}, shape={self.shape})"


class Tape:
    """Single-owner record of one forward pass."""

    def __init__(self):
        self.values: list[np.ndarray] = []
        self.records: list[Record] = []
        self.requires_grad: list[bool] = []
        self.param_names: dict[int, str] = {}

    def _new_node(self, value: np.ndarray, requires_grad: bool) -> int:
        self.values.append(value)
        self.requires_grad.append(requires_grad)
        return len(self.values) - 1

    def constant(self, value) -> Var:
        arr = np.asarray(value, dtype=np.float64)
        return Var(self, self._new_node(arr, False))

    def parameter(self, name: str, value) -> Var:
        arr = np.asarray(value, dtype=np.float64)
        node = self._new_node(arr, True)
        self.param_names[node] = name
        return Var(self, node)

    def apply(self, kind: str, *inputs: Var, **attrs) -> Var:
        return forward_op(kind, list(inputs), self, **attrs)

    def backward(self, loss: Var) -> dict[str, np.ndarray]:
        return backward(self, loss)


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_matmul(a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", [a.shape, b.shape])
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", [a.shape, b.shape], "batch axes") from None


def forward_op(kind: str, inputs: list[Var], tape: Tape, **attrs) -> Var:
    """Evaluate ``kind`` on ``inputs`` and append one record to ``tape``."""
    if kind not in OP_KINDS:
        raise ValueError(f"unknown op kind {kind!r}")
    vals = [v.value for v in inputs]
    saved: dict[str, Any] = {}

    if kind == "matmul":
        a, b = vals
        _check_matmul(a, b)
        out = a @ b
    elif kind == "add":
        a, b = vals
        if a.shape != b.shape:
            raise ShapeError(kind, [a.shape, b.shape])
        out = a + b
    elif kind == "add_bias":
        x, b = vals
        if b.ndim != 1 or x.shape[-1] != b.shape[0]:
            raise ShapeError(kind, [x.shape, b.shape])
        out = x + b
    elif kind == "scale":
        (x,) = vals
        out = x * float(attrs["factor"])
    elif kind == "relu":
        (x,) = vals
        mask = x > 0
        saved["mask"] = mask
        out = np.where(mask, x, 0.0)
    elif kind == "softmax":
        (x,) = vals
        if x.ndim < 1 or x.shape[-1] == 0:
            raise ShapeError(kind, [x.shape])
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        out = e / e.sum(axis=-1, keepdims=True)
        saved["y"] = out
    elif kind == "layer_norm":
        x, gain, offset = vals
        width = x.shape[-1]
        if gain.shape != (width,) or offset.shape != (width,):
            raise ShapeError(kind, [x.shape, gain.shape, offset.shape])
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + LAYER_NORM_EPS)
        xhat = centered * inv_std
        saved["xhat"] = xhat
        saved["inv_std"] = inv_std
        out = xhat * gain + offset
    elif kind == "concat":
        axis = attrs.get("axis", -2)
        try:
            out = np.concatenate(vals, axis=axis)
        except ValueError:
            raise ShapeError(kind, [v.shape for v in vals]) from None
        saved["sizes"] = [v.shape[axis] for v in vals]
    elif kind == "slice":
        (x,) = vals
        axis = attrs.get("axis", -2)
        start, stop = attrs["start"], attrs["stop"]
        if not (0 <= start <= stop <= x.shape[axis]):
            raise ShapeError(kind, [x.shape], f"rows {start}:{stop}")
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(start, stop)
        out = x[tuple(idx)]
    elif kind == "mse_loss":
        pred, target = vals
        if pred.shape != target.shape:
            raise ShapeError(kind, [pred.shape, target.shape])
        resid = pred - target
        saved["resid"] = resid
        out = np.asarray(np.mean(resid**2))
    else:  # transpose
        (x,) = vals
        if x.ndim < 2:
            raise ShapeError(kind, [x.shape])
        out = _swap(x)

    requires = any(tape.requires_grad[v.id] for v in inputs)
    node = tape._new_node(np.asarray(out, dtype=np.float64), requires)
    tape.records.append(Record(kind, tuple(v.id for v in inputs), node, saved, attrs))
    return Var(tape, node)


def _input_grads(rec: Record, g: np.ndarray, vals: list[np.ndarray]) -> list[np.ndarray]:
    kind = rec.kind
    if kind == "matmul":
        a, b = vals
        return [_unbroadcast(g @ _swap(b), a.shape), _unbroadcast(_swap(a) @ g, b.shape)]
    if kind == "add":
        return [g, g]
    if kind == "add_bias":
        x, b = vals
        return [g, g.reshape(-1, b.shape[0]).sum(axis=0)]
    if kind == "scale":
        return [g * float(rec.attrs["factor"])]
    if kind == "relu":
        return [np.where(rec.saved["mask"], g, 0.0)]
    if kind == "softmax":
        y = rec.saved["y"]
        return [y * (g - (g * y).sum(axis=-1, keepdims=True))]
    if kind == "layer_norm":
        x, gain, _ = vals
        xhat, inv_std = rec.saved["xhat"], rec.saved["inv_std"]
        gy = g * gain
        gx = inv_std * (
            gy - gy.mean(axis=-1, keepdims=True) - xhat * (gy * xhat).mean(axis=-1, keepdims=True)
        )
        width = gain.shape[0]
        return [gx, (g * xhat).reshape(-1, width).sum(axis=0), g.reshape(-1, width).sum(axis=0)]
    if kind == "concat":
        axis = rec.attrs.get("axis", -2)
        bounds = np.cumsum(rec.saved["sizes"])[:-1]
        return np.split(g, bounds, axis=axis)
    if kind == "slice":
        (x,) = vals
        axis = rec.attrs.get("axis", -2)
        full = np.zeros_like(x)
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(rec.attrs["start"], rec.attrs["stop"])
        full[tuple(idx)] = g
        return [full]
    if kind == "mse_loss":
        resid = rec.saved["resid"]
        gp = g * 2.0 * resid / resid.size
        return [gp, -gp]
    return [_swap(g)]  # transpose


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    """Gradients of a scalar node with respect to every parameter on the tape."""
    if loss.tape is not tape:
        raise ValueError("loss node belongs to a different tape")
    if loss.value.size != 1 or loss.value.ndim > 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.value)}
    for rec in reversed(tape.records):
        g = grads.pop(rec.output, None)
        if g is None:
            continue
        vals = [tape.values[i] for i in rec.inputs]
        for node, gi in zip(rec.inputs, _input_grads(rec, g, vals)):
            if not tape.requires_grad[node]:
                continue
            if node in grads:
                grads[node] = grads[node] + gi
            else:
                grads[node] = gi
    out = {}
    for node, name in tape.param_names.items():
        g = grads.get(node)
        out[name] = np.zeros_like(tape.values[node]) if g is None else g.reshape(tape.values[node].shape)
    return out


# convenience wrappers; each is a single forward_op call


def matmul(a: Var, b: Var) -> Var:
    return a.tape.apply("matmul", a, b)


def add(a: Var, b: Var) -> Var:
    return a.tape.apply("add", a, b)


def add_bias(x: Var, b: Var) -> Var:
    return x.tape.apply("add_bias", x, b)


def scale(x: Var, factor: float) -> Var:
    return x.tape.apply("scale", x, factor=factor)


def relu(x: Var) -> Var:
    return x.tape.apply("relu", x)


def softmax(x: Var) -> Var:
    return x.tape.apply("softmax", x)


def layer_norm(x: Var, gain: Var, offset: Var) -> Var:
    return x.tape.apply("layer_norm", x, gain, offset)


def concat(parts: list[Var], axis: int = -2) -> Var:
    return parts[0].tape.apply("concat", *parts, axis=axis)


def slice_rows(x: Var, start: int, stop: int, axis: int = -2) -> Var:
    return x.tape.apply("slice", x, start=start, stop=stop, axis=axis)


def mse_loss(pred: Var, target: Var) -> Var:
    return pred.tape.apply("mse_loss", pred, target)


def transpose(x: Var) -> Var:
    return x.tape.apply("transpose", x)

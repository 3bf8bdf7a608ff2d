"""Dense float64 tensors with a reverse-mode tape and an Adam optimizer.

The tape is a single-writer, append-only record of the forward pass:
operations executed inside a ``with Tape() as tape:`` block are recorded
together with a closure that maps the output gradient to input
gradients.  ``tape.backward(loss)`` walks the record once in reverse,
accumulating gradients into every parameter leaf that participated.
Outside a tape, the same operations run as plain numpy with no
bookkeeping, which is what numeric differencing and inference use.

Sized for small models (hidden widths around 16): operations favor
explicit shape checks and per-operation gradient rules over kernel
performance.  All buffers are float64; any operation whose inputs are
finite but whose output is not raises FloatingPointError rather than
letting NaN or Inf propagate silently.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, DimensionError, StateError

__all__ = [
    "Tensor",
    "Tape",
    "Adam",
    "constant",
    "parameter",
    "add",
    "sub",
    "neg",
    "mul",
    "div",
    "matmul",
    "transpose",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "clamp",
    "sum_all",
    "concat",
    "stack_rows",
    "row",
    "take_rows",
    "column",
    "element",
    "segment",
    "reshape",
    "softmax",
    "log_softmax",
    "conv1d_same",
    "lstm_step",
    "dropout",
    "grad_check",
]

_ACTIVE_TAPE: "Tape | None" = None


class Tensor:
    """A float64 array plus the bookkeeping reverse mode needs.

    ``grad`` is populated (accumulating across backward calls) only for
    tensors created with ``is_param=True``; everything else is treated
    as an intermediate value owned by the tape that produced it.
    """

    __slots__ = ("data", "grad", "is_param", "name", "all_finite")

    def __init__(self, data, *, is_param: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if is_param:
            arr = np.array(arr, dtype=np.float64, copy=True)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.is_param = is_param
        self.name = name
        self.all_finite = bool(np.isfinite(arr.sum()))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, shape is {self.data.shape}")
        return float(self.data.reshape(()))

    def to_list(self):
        return self.data.tolist()

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # Operator sugar; scalars are wrapped as constants.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def constant(data, name: str = "") -> Tensor:
    """Wrap an array-like as a non-parameter tensor."""
    return Tensor(data, is_param=False, name=name)


def parameter(data, name: str) -> Tensor:
    """Wrap an array-like as a trainable leaf with its own buffer."""
    if not name:
        raise ContractError("parameters must be named")
    return Tensor(data, is_param=True, name=name)


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if isinstance(value, (int, float)):
        return Tensor(float(value))
    raise TypeError(f"expected Tensor or scalar, got {type(value).__name__}")


class Tape:
    """Ordered single-use record of one forward pass.

    At most one tape records at a time; entering a second raises
    StateError, as does calling backward twice on the same tape.
    """

    __slots__ = ("_records", "_params", "_used", "_entered")

    def __init__(self) -> None:
        self._records: list = []
        self._params: dict[int, Tensor] = {}
        self._used = False
        self._entered = False

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise StateError("another tape is already recording")
        if self._entered:
            raise StateError("a tape records exactly one forward pass; create a fresh one")
        self._entered = True
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Accumulate d(loss)/d(param) into every recorded parameter.

        Returns the gradient of each parameter leaf that appeared on the
        tape; a parameter the loss does not depend on maps to zeros.
        Gradients also accumulate into each parameter's ``.grad``.
        """
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is self:
            raise StateError("cannot run backward while the tape is still recording")
        if self._used:
            raise StateError("backward was already run on this tape")
        if not isinstance(loss, Tensor):
            raise ContractError("loss must be a Tensor")
        if loss.data.shape != ():
            raise ContractError(f"loss must be a scalar, got shape {loss.data.shape}")
        self._used = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for out, inputs, rule in reversed(self._records):
            gout = grads.pop(id(out), None)
            if gout is None:
                continue
            for tensor, gin in zip(inputs, rule(gout)):
                if gin is None:
                    continue
                key = id(tensor)
                held = grads.get(key)
                # Rebind instead of += : a scalar gradient decays to an
                # immutable numpy scalar, and a rule may pass gout through
                # unchanged, so in-place accumulation would drop or alias.
                grads[key] = gin if held is None else held + gin

        result: dict[Tensor, np.ndarray] = {}
        for key, p in self._params.items():
            g = grads.get(key)
            if g is None:
                g = np.zeros_like(p.data)
            else:
                g = np.asarray(g, dtype=np.float64).reshape(p.data.shape)
            result[p] = g
            if p.grad is None:
                p.grad = g.copy()
            else:
                p.grad += g
        return result


def _emit(out_data: np.ndarray, inputs: tuple, rule: Callable) -> Tensor:
    """Finish an operation: finiteness check, wrap, record if taping."""
    finite_in = True
    for t in inputs:
        if not t.all_finite:
            finite_in = False
            break
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.is_param = False
    out.name = ""
    finite_out = bool(np.isfinite(out_data.sum()))
    if finite_in and not finite_out:
        raise FloatingPointError("operation produced a non-finite value from finite inputs")
    out.all_finite = finite_in and finite_out
    tape = _ACTIVE_TAPE
    if tape is not None:
        tape._records.append((out, inputs, rule))
        for t in inputs:
            if t.is_param:
                tape._params[id(t)] = t
    return out


def _sum_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if shape == ():
        return np.asarray(grad.sum())
    return grad


def _check_binary_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape and a.data.shape != () and b.data.shape != ():
        raise DimensionError(f"{op}: shapes {a.data.shape} and {b.data.shape} are incompatible")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("add", a, b)
    out = a.data + b.data

    def rule(g, a=a, b=b):
        return _sum_to(g, a.data.shape), _sum_to(g, b.data.shape)

    return _emit(out, (a, b), rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("sub", a, b)
    out = a.data - b.data

    def rule(g, a=a, b=b):
        return _sum_to(g, a.data.shape), _sum_to(-g, b.data.shape)

    return _emit(out, (a, b), rule)


def neg(a: Tensor) -> Tensor:
    def rule(g):
        return (-g,)

    return _emit(-a.data, (a,), rule)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("div", a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def rule(g, a=a, b=b):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _sum_to(ga, a.data.shape), _sum_to(gb, b.data.shape)

    return _emit(out, (a, b), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("mul", a, b)
    out = a.data * b.data

    def rule(g, a=a, b=b):
        return _sum_to(g * b.data, a.data.shape), _sum_to(g * a.data, b.data.shape)

    return _emit(out, (a, b), rule)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix, matrix-vector, vector-matrix, and dot products."""
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0 or ad.ndim > 2 or bd.ndim > 2:
        raise DimensionError(f"matmul: shapes {ad.shape} and {bd.shape} are not 1D/2D")
    if ad.shape[-1] != bd.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {ad.shape} vs {bd.shape}")
    out = ad @ bd

    if ad.ndim == 2 and bd.ndim == 2:
        def rule(g, a=a, b=b):
            return g @ b.data.T, a.data.T @ g
    elif ad.ndim == 2 and bd.ndim == 1:
        def rule(g, a=a, b=b):
            return np.outer(g, b.data), a.data.T @ g
    elif ad.ndim == 1 and bd.ndim == 2:
        def rule(g, a=a, b=b):
            return b.data @ g, np.outer(a.data, g)
    else:
        def rule(g, a=a, b=b):
            return g * b.data, g * a.data

    return _emit(np.asarray(out), (a, b), rule)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose needs a 2D tensor, got shape {a.data.shape}")

    def rule(g):
        return (g.T,)

    return _emit(a.data.T.copy(), (a,), rule)


def relu(a: Tensor) -> Tensor:
    # Subgradient at exactly zero is taken as zero.
    mask = a.data > 0.0

    def rule(g, mask=mask):
        return (g * mask,)

    return _emit(np.where(mask, a.data, 0.0), (a,), rule)


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def rule(g, out=out):
        return (g * out * (1.0 - out),)

    return _emit(out, (a,), rule)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def rule(g, out=out):
        return (g * (1.0 - out * out),)

    return _emit(out, (a,), rule)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)

    def rule(g, out=out):
        return (g * out,)

    return _emit(out, (a,), rule)


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def rule(g, a=a):
        return (g / a.data,)

    return _emit(out, (a,), rule)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    if not lo <= hi:
        raise ConfigurationError(f"clamp bounds are inverted: [{lo}, {hi}]")
    inside = (a.data >= lo) & (a.data <= hi)

    def rule(g, inside=inside):
        return (g * inside,)

    return _emit(np.clip(a.data, lo, hi), (a,), rule)


def sum_all(a: Tensor) -> Tensor:
    def rule(g, a=a):
        return (np.full(a.data.shape, float(g)),)

    return _emit(np.asarray(a.data.sum()), (a,), rule)


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis; all other axes must agree."""
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    ndim = tensors[0].data.ndim
    if ndim not in (1, 2):
        raise DimensionError(f"concat supports 1D/2D, got {tensors[0].data.shape}")
    for t in tensors[1:]:
        if t.data.ndim != ndim or (ndim == 2 and t.data.shape[0] != tensors[0].data.shape[0]):
            raise DimensionError(
                f"concat: shapes {[u.data.shape for u in tensors]} do not align on the last axis"
            )
    widths = [t.data.shape[-1] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=-1)

    def rule(g, widths=tuple(widths)):
        pieces = []
        start = 0
        for w in widths:
            pieces.append(g[..., start:start + w])
            start += w
        return tuple(pieces)

    return _emit(out, tuple(tensors), rule)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-length 1D tensors into a (n, d) matrix."""
    if not tensors:
        raise ContractError("stack_rows needs at least one tensor")
    d = tensors[0].data.shape
    for t in tensors:
        if t.data.ndim != 1 or t.data.shape != d:
            raise DimensionError(f"stack_rows: all rows must be 1D of shape {d}, got {t.data.shape}")
    out = np.stack([t.data for t in tensors], axis=0)

    def rule(g):
        return tuple(g[i] for i in range(g.shape[0]))

    return _emit(out, tuple(tensors), rule)


def row(a: Tensor, i: int) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"row needs a 2D tensor, got shape {a.data.shape}")
    if not 0 <= i < a.data.shape[0]:
        raise DimensionError(f"row {i} out of range for shape {a.data.shape}")

    def rule(g, a=a, i=i):
        full = np.zeros_like(a.data)
        full[i] = g
        return (full,)

    return _emit(a.data[i].copy(), (a,), rule)


def take_rows(a: Tensor, idx: Sequence[int]) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"take_rows needs a 2D tensor, got shape {a.data.shape}")
    idx = list(idx)
    for i in idx:
        if not 0 <= i < a.data.shape[0]:
            raise DimensionError(f"row {i} out of range for shape {a.data.shape}")

    def rule(g, a=a, idx=tuple(idx)):
        full = np.zeros_like(a.data)
        np.add.at(full, list(idx), g)
        return (full,)

    return _emit(a.data[idx].copy(), (a,), rule)


def column(a: Tensor, j: int) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"column needs a 2D tensor, got shape {a.data.shape}")
    if not 0 <= j < a.data.shape[1]:
        raise DimensionError(f"column {j} out of range for shape {a.data.shape}")

    def rule(g, a=a, j=j):
        full = np.zeros_like(a.data)
        full[:, j] = g
        return (full,)

    return _emit(a.data[:, j].copy(), (a,), rule)


def element(a: Tensor, i: int) -> Tensor:
    if a.data.ndim != 1:
        raise DimensionError(f"element needs a 1D tensor, got shape {a.data.shape}")
    if not 0 <= i < a.data.shape[0]:
        raise DimensionError(f"element {i} out of range for shape {a.data.shape}")

    def rule(g, a=a, i=i):
        full = np.zeros_like(a.data)
        full[i] = g
        return (full,)

    return _emit(np.asarray(a.data[i]), (a,), rule)


def segment(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 1:
        raise DimensionError(f"segment needs a 1D tensor, got shape {a.data.shape}")
    if not 0 <= start <= stop <= a.data.shape[0]:
        raise DimensionError(f"segment [{start}:{stop}] out of range for shape {a.data.shape}")

    def rule(g, a=a, start=start, stop=stop):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)

    return _emit(a.data[start:stop].copy(), (a,), rule)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    if int(np.prod(shape)) != a.data.size:
        raise DimensionError(f"cannot reshape {a.data.shape} to {shape}")

    def rule(g, a=a):
        return (g.reshape(a.data.shape),)

    return _emit(a.data.reshape(shape).copy(), (a,), rule)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    x = a.data
    if x.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError(f"softmax needs a non-empty axis, got shape {x.shape}")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def rule(g, out=out, axis=axis):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _emit(out, (a,), rule)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    if x.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError(f"log_softmax needs a non-empty axis, got shape {x.shape}")
    shifted = x - x.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def rule(g, out=out, axis=axis):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _emit(out, (a,), rule)


def conv1d_same(seq: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Length-preserving 1D convolution over a (t, c_in) sequence.

    Rows are time steps. ``weights`` has shape (c_out, c_in, k) with odd
    k; the sequence is zero-padded by k//2 on both ends so the output
    keeps t rows. k may not exceed 2t + 1 (the kernel would then reach
    only padding).
    """
    s, w, b = seq.data, weights.data, bias.data
    if s.ndim != 2 or w.ndim != 3 or b.ndim != 1:
        raise DimensionError(
            f"conv1d_same: expected (t,c_in), (c_out,c_in,k), (c_out,), got {s.shape}, {w.shape}, {b.shape}"
        )
    t, c_in = s.shape
    c_out, w_cin, k = w.shape
    if w_cin != c_in or b.shape[0] != c_out:
        raise DimensionError(f"conv1d_same: channel mismatch between {s.shape}, {w.shape}, {b.shape}")
    if k % 2 == 0:
        raise ConfigurationError(f"conv1d_same kernel width must be odd, got {k}")
    if k > 2 * t + 1:
        raise ConfigurationError(f"conv1d_same kernel width {k} exceeds 2*t+1 for t={t}")
    half = k // 2
    padded = np.zeros((t + k - 1, c_in), dtype=np.float64)
    padded[half:half + t] = s
    out = np.tile(b, (t, 1))
    for o in range(k):
        out += padded[o:o + t] @ w[:, :, o].T

    def rule(g, seq=seq, weights=weights, t=t, k=k, half=half, padded=padded):
        w = weights.data
        d_pad = np.zeros_like(padded)
        d_w = np.zeros_like(w)
        for o in range(k):
            d_pad[o:o + t] += g @ w[:, :, o]
            d_w[:, :, o] = g.T @ padded[o:o + t]
        return d_pad[half:half + t], d_w, g.sum(axis=0)

    return _emit(out, (seq, weights, bias), rule)


def lstm_step(h: Tensor, c: Tensor, x: Tensor, w_ih: Tensor, w_hh: Tensor, b: Tensor) -> tuple:
    """One step of a standard LSTM cell; gate order is (input, forget, cell, output).

    Composed from primitive operations, so gradients come for free.
    All of h, c, x are 1D of width d; the stacked weights are (4d, d).
    """
    d = h.data.shape[0] if h.data.ndim == 1 else -1
    for name, t, want in (
        ("h", h, (d,)),
        ("c", c, (d,)),
        ("x", x, (d,)),
        ("w_ih", w_ih, (4 * d, d)),
        ("w_hh", w_hh, (4 * d, d)),
        ("b", b, (4 * d,)),
    ):
        if d <= 0 or t.data.shape != want:
            raise DimensionError(
                f"lstm_step: {name} has shape {t.data.shape}, expected {want} "
                f"(h={h.data.shape}, c={c.data.shape}, x={x.data.shape})"
            )
    gates = add(add(matmul(w_ih, x), matmul(w_hh, h)), b)
    i_gate = sigmoid(segment(gates, 0, d))
    f_gate = sigmoid(segment(gates, d, 2 * d))
    candidate = tanh(segment(gates, 2 * d, 3 * d))
    o_gate = sigmoid(segment(gates, 3 * d, 4 * d))
    c_next = add(mul(f_gate, c), mul(i_gate, candidate))
    h_next = mul(o_gate, tanh(c_next))
    return h_next, c_next


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return mul(a, constant(keep))


class Adam(object):
    """Adam with bias correction over a fixed list of parameter leaves.

    Moment buffers live here, keyed by parameter identity; a parameter
    whose ``.grad`` is None (or all zeros) is left untouched by ``step``
    up to the epsilon in the update rule.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        params = list(params)
        if not params:
            raise ConfigurationError("Adam needs at least one parameter")
        for p in params:
            if not p.is_param:
                raise ContractError(f"Adam given a non-parameter tensor {p!r}")
        if lr <= 0 or not 0 <= beta1 < 1 or not 0 <= beta2 < 1 or eps <= 0:
            raise ConfigurationError(
                f"bad Adam settings: lr={lr}, beta1={beta1}, beta2={beta2}, eps={eps}"
            )
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.moment1 = [np.zeros_like(p.data) for p in params]
        self.moment2 = [np.zeros_like(p.data) for p in params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.moment1, self.moment2):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif g.shape != p.data.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def glorot(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Glorot-uniform sample: U(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    elif len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 3:
        fan_out, fan_in = shape[0], shape[1] * shape[2]
    else:
        raise DimensionError(f"glorot supports 1D-3D shapes, got {shape}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Worst relative error between tape gradients and central differences.

    ``f`` must rebuild the forward pass from the current parameter
    values on every call and return a scalar loss.  Relative error for
    each coordinate is |a - n| / (max(|a|, |n|) + 1e-12).
    """
    params = list(params)
    with Tape() as tape:
        loss = f()
    grads = tape.backward(loss)
    worst = 0.0
    for p in params:
        analytic = grads.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f().item()
            flat[i] = orig - eps
            f_minus = f().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(aflat[i]), abs(numeric)) + 1e-12
            rel = abs(aflat[i] - numeric) / denom
            if rel > worst:
                worst = rel
    return worst

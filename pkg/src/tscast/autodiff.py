"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations executed inside a ``with Tape():`` block are recorded in
execution order; :func:`backward` replays the records once, in reverse,
and accumulates gradients into every recorded tensor that requires them.
Outside a tape block the same functions run as plain numpy computations,
which makes inference on frozen parameters free of bookkeeping.

The operation set is deliberately small: matrix products, causal 1-d
convolution, the pointwise nonlinearities relu / sigmoid / tanh, and the
shape and reduction helpers the forecaster needs. Everything is computed
in double precision with a fixed, deterministic summation order, so that
identical inputs give bit-identical values and gradients. The relu
derivative at exactly zero is defined as zero.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "DimensionError",
    "Tape",
    "Tensor",
    "add_colvec",
    "add_rowvec",
    "backward",
    "causal_conv1d",
    "column",
    "concat",
    "constant",
    "finite_diff_grad",
    "matmul",
    "mean_all",
    "pointwise",
    "relu",
    "reshape",
    "sigmoid",
    "stack",
    "step_cols",
    "tanh",
    "transpose",
]


class DimensionError(ValueError):
    """Raised when operand shapes do not fit an operation's contract."""


_state = threading.local()


def _tape_stack() -> list:
    stack = getattr(_state, "tapes", None)
    if stack is None:
        stack = []
        _state.tapes = stack
    return stack


class Tape:
    """Ordered record of one forward pass, replayed once by backward().

    A tape is single-writer: one forward/backward pass at a time. Separate
    tapes are independent, so e.g. cross-validation folds may run in
    parallel threads, each under its own tape.
    """

    def __init__(self):
        self._records = []  # (output Tensor, Node) in execution order

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tape_stack().pop()

    def __len__(self) -> int:
        return len(self._records)


def active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Node:
    """Producing operation of a recorded tensor: inputs plus gradient rule."""

    __slots__ = ("inputs", "grad_fn", "tape", "index")

    def __init__(self, inputs, grad_fn, tape, index):
        self.inputs = inputs
        self.grad_fn = grad_fn  # maps output grad -> per-input grads (or None)
        self.tape = tape
        self.index = index


class Tensor:
    """A dense float64 array with an optional gradient slot.

    Tensors made directly (parameters, data) are leaves; tensors returned
    by operations under an active tape carry a ``node`` back-reference to
    the record that produced them. Tensors without a node are immutable by
    convention and safe to share across threads.
    """

    __slots__ = ("values", "grad", "node", "requires_grad")

    def __init__(self, values, requires_grad: bool = False):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim > 0 and not v.flags["C_CONTIGUOUS"]:
            v = np.ascontiguousarray(v)  # row-major storage; keeps 0-d scalars 0-d
        self.values = v
        self.grad: np.ndarray | None = None
        self.node: Node | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad = None

    def copy(self) -> "Tensor":
        out = Tensor(self.values.copy(), requires_grad=self.requires_grad)
        return out

    def item(self) -> float:
        if self.values.size != 1:
            raise DimensionError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self) -> str:
        flags = "param" if self.requires_grad else ("op" if self.node else "const")
        return f"Tensor(shape={self.shape}, {flags})"

    # arithmetic sugar; scalars are treated as constants
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(values) -> Tensor:
    """Wrap an array as a non-differentiable leaf."""
    return Tensor(values)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _live(t: Tensor) -> bool:
    return t.requires_grad or t.node is not None


def _record(out: Tensor, inputs: tuple, grad_fn) -> Tensor:
    tape = active_tape()
    if tape is None or not any(_live(t) for t in inputs):
        return out
    node = Node(inputs, grad_fn, tape, len(tape._records))
    out.node = node
    tape._records.append((out, node))
    return out


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.values + b.values)

    def grad_fn(g, needs):
        ga = _reduce_to(g, a.shape) if needs[0] else None
        gb = _reduce_to(g, b.shape) if needs[1] else None
        return ga, gb

    return _record(out, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.values - b.values)

    def grad_fn(g, needs):
        ga = _reduce_to(g, a.shape) if needs[0] else None
        gb = _reduce_to(-g, b.shape) if needs[1] else None
        return ga, gb

    return _record(out, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.values * b.values)

    def grad_fn(g, needs):
        ga = _reduce_to(g * b.values, a.shape) if needs[0] else None
        gb = _reduce_to(g * a.values, b.shape) if needs[1] else None
        return ga, gb

    return _record(out, (a, b), grad_fn)


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to a (possibly scalar-broadcast) operand shape."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape) if shape == () else np.full(shape, np.sum(g))


def add_rowvec(x, b) -> Tensor:
    """Add a length-n vector to every row of an (m, n) matrix."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.values.ndim != 2 or b.values.ndim != 1 or x.shape[1] != b.shape[0]:
        raise DimensionError(f"add_rowvec: shapes {x.shape} and {b.shape}")
    out = Tensor(x.values + b.values[None, :])

    def grad_fn(g, needs):
        gx = g if needs[0] else None
        gb = g.sum(axis=0) if needs[1] else None
        return gx, gb

    return _record(out, (x, b), grad_fn)


def add_colvec(x, b) -> Tensor:
    """Add a length-m vector to every column of an (m, n) matrix."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.values.ndim != 2 or b.values.ndim != 1 or x.shape[0] != b.shape[0]:
        raise DimensionError(f"add_colvec: shapes {x.shape} and {b.shape}")
    out = Tensor(x.values + b.values[:, None])

    def grad_fn(g, needs):
        gx = g if needs[0] else None
        gb = g.sum(axis=1) if needs[1] else None
        return gx, gb

    return _record(out, (x, b), grad_fn)


# ---------------------------------------------------------------------------
# linear maps


def matmul(a, b) -> Tensor:
    """Matrix product; also matrix @ vector and vector @ matrix."""
    a, b = _as_tensor(a), _as_tensor(b)
    av, bv = a.values, b.values
    if av.ndim == 2 and bv.ndim == 2:
        if av.shape[1] != bv.shape[0]:
            raise DimensionError(f"matmul: inner dims of {av.shape} and {bv.shape} disagree")

        out = Tensor(av @ bv)

        def grad_fn(g, needs):
            ga = g @ bv.T if needs[0] else None
            gb = av.T @ g if needs[1] else None
            return ga, gb

    elif av.ndim == 2 and bv.ndim == 1:
        if av.shape[1] != bv.shape[0]:
            raise DimensionError(f"matmul: inner dims of {av.shape} and {bv.shape} disagree")

        out = Tensor(av @ bv)

        def grad_fn(g, needs):
            ga = np.outer(g, bv) if needs[0] else None
            gb = av.T @ g if needs[1] else None
            return ga, gb

    elif av.ndim == 1 and bv.ndim == 2:
        if av.shape[0] != bv.shape[0]:
            raise DimensionError(f"matmul: inner dims of {av.shape} and {bv.shape} disagree")

        out = Tensor(av @ bv)

        def grad_fn(g, needs):
            ga = bv @ g if needs[0] else None
            gb = np.outer(av, g) if needs[1] else None
            return ga, gb

    else:
        raise DimensionError(f"matmul: unsupported ranks {av.shape} @ {bv.shape}")

    return _record(out, (a, b), grad_fn)


def causal_conv1d(x, w, b) -> Tensor:
    """Causal 1-d convolution: left-pad with K-1 zeros, keep length.

    ``x`` is (C_in, T) or batched (B, C_in, T); ``w`` is (C_out, C_in, K)
    and ``b`` is (C_out,). The kernel's last tap w[..., K-1] multiplies the
    current time step, so output at time t depends only on inputs at
    times <= t.
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    xv, wv, bv = x.values, w.values, b.values
    if wv.ndim != 3 or bv.ndim != 1 or wv.shape[0] != bv.shape[0]:
        raise DimensionError(f"causal_conv1d: weight {wv.shape} / bias {bv.shape}")
    if xv.ndim not in (2, 3) or xv.shape[-2] != wv.shape[1]:
        raise DimensionError(
            f"causal_conv1d: input {xv.shape} does not match weight {wv.shape}"
        )
    c_out, c_in, k = wv.shape
    t_len = xv.shape[-1]
    if t_len < 1 or c_in < 1 or c_out < 1 or k < 1:
        raise DimensionError(
            f"causal_conv1d: empty operand (input {xv.shape}, weight {wv.shape})"
        )

    batched = xv.ndim == 3
    pad = [(0, 0)] * (xv.ndim - 1) + [(k - 1, 0)]
    xp = np.pad(xv, pad)
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)
    if batched:
        out_v = np.einsum("oik,bitk->bot", wv, win) + bv[None, :, None]
    else:
        out_v = np.einsum("oik,itk->ot", wv, win) + bv[:, None]
    out = Tensor(out_v)

    def grad_fn(g, needs):
        gx = gw = gb = None
        if needs[0]:
            gxp = np.zeros_like(xp)
            for tap in range(k):
                if batched:
                    gxp[:, :, tap : tap + t_len] += np.einsum("oi,bot->bit", wv[:, :, tap], g)
                else:
                    gxp[:, tap : tap + t_len] += wv[:, :, tap].T @ g
            gx = gxp[..., k - 1 :]
        if needs[1]:
            gw = np.einsum("bot,bitk->oik", g, win) if batched else np.einsum("ot,itk->oik", g, win)
        if needs[2]:
            gb = g.sum(axis=(0, 2)) if batched else g.sum(axis=1)
        return gx, gw, gb

    return _record(out, (x, w, b), grad_fn)


# ---------------------------------------------------------------------------
# pointwise nonlinearities


def relu(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.maximum(x.values, 0.0))
    mask = x.values > 0.0  # subgradient at 0 is 0

    def grad_fn(g, needs):
        return (g * mask,) if needs[0] else (None,)

    return _record(out, (x,), grad_fn)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.values))
    out = Tensor(s)

    def grad_fn(g, needs):
        return (g * s * (1.0 - s),) if needs[0] else (None,)

    return _record(out, (x,), grad_fn)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    th = np.tanh(x.values)
    out = Tensor(th)

    def grad_fn(g, needs):
        return (g * (1.0 - th * th),) if needs[0] else (None,)

    return _record(out, (x,), grad_fn)


_POINTWISE = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def pointwise(op: str, x) -> Tensor:
    """Apply one of {relu, sigmoid, tanh} elementwise."""
    try:
        fn = _POINTWISE[op]
    except KeyError:
        raise ValueError(f"pointwise: unknown op {op!r}, expected one of {sorted(_POINTWISE)}")
    return fn(x)


# ---------------------------------------------------------------------------
# shape helpers


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat: no tensors")
    out = Tensor(np.concatenate([t.values for t in tensors], axis=axis))
    sizes = [t.values.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g, needs):
        pieces = []
        for i in range(len(tensors)):
            if needs[i]:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(offsets[i], offsets[i + 1])
                pieces.append(g[tuple(sl)])
            else:
                pieces.append(None)
        return tuple(pieces)

    return _record(out, tuple(tensors), grad_fn)


def stack(tensors) -> Tensor:
    """Stack same-shaped tensors along a new leading axis."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("stack: no tensors")
    out = Tensor(np.stack([t.values for t in tensors], axis=0))

    def grad_fn(g, needs):
        return tuple(g[i] if needs[i] else None for i in range(len(tensors)))

    return _record(out, tuple(tensors), grad_fn)


def column(x, j: int) -> Tensor:
    """Column j of a matrix, as a vector."""
    x = _as_tensor(x)
    if x.values.ndim != 2:
        raise DimensionError(f"column: expected a matrix, got shape {x.shape}")
    out = Tensor(x.values[:, j].copy())

    def grad_fn(g, needs):
        if not needs[0]:
            return (None,)
        gx = np.zeros(x.shape)
        gx[:, j] = g
        return (gx,)

    return _record(out, (x,), grad_fn)


def step_cols(x, t: int) -> Tensor:
    """Time step t of a batched (B, C, T) tensor, returned as (C, B)."""
    x = _as_tensor(x)
    if x.values.ndim != 3:
        raise DimensionError(f"step_cols: expected (B, C, T), got shape {x.shape}")
    out = Tensor(x.values[:, :, t].T.copy())

    def grad_fn(g, needs):
        if not needs[0]:
            return (None,)
        gx = np.zeros(x.shape)
        gx[:, :, t] = g.T
        return (gx,)

    return _record(out, (x,), grad_fn)


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    if x.values.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got shape {x.shape}")
    out = Tensor(x.values.T.copy())

    def grad_fn(g, needs):
        return (g.T,) if needs[0] else (None,)

    return _record(out, (x,), grad_fn)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.values.reshape(shape))

    def grad_fn(g, needs):
        return (g.reshape(x.shape),) if needs[0] else (None,)

    return _record(out, (x,), grad_fn)


def mean_all(x) -> Tensor:
    """Mean over all entries, as a scalar tensor."""
    x = _as_tensor(x)
    n = x.values.size
    out = Tensor(np.mean(x.values))

    def grad_fn(g, needs):
        return (np.full(x.shape, float(np.asarray(g).reshape(())) / n),) if needs[0] else (None,)

    return _record(out, (x,), grad_fn)


# ---------------------------------------------------------------------------
# reverse sweep


def backward(loss: Tensor) -> None:
    """Accumulate dLoss/dt into t.grad for every recorded tensor with
    requires_grad, overwriting previous contents. Recorded tensors that do
    not influence the loss receive a zero gradient.
    """
    if not isinstance(loss, Tensor) or loss.values.size != 1:
        got = loss.shape if isinstance(loss, Tensor) else type(loss)
        raise ValueError(f"backward: loss must be a scalar tensor, got {got}")
    if loss.node is None:
        raise ValueError("backward: loss is not connected to a tape")

    tape = loss.node.tape
    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    touched: list[Tensor] = []

    for out, node in reversed(tape._records[: loss.node.index + 1]):
        g = grads.get(id(out))
        if out.requires_grad:
            touched.append(out)
        for t in node.inputs:
            if t.requires_grad:
                touched.append(t)
        if g is None:
            continue
        needs = tuple(_live(t) for t in node.inputs)
        in_grads = node.grad_fn(g, needs)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi

    # also cover parameters recorded after the loss position on this tape
    for out, node in tape._records[loss.node.index + 1 :]:
        for t in node.inputs:
            if t.requires_grad:
                touched.append(t)

    for t in touched:
        t.grad = grads.get(id(t), np.zeros(t.shape))


def finite_diff_grad(f, theta, eps: float) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate.

    ``f`` receives a plain ndarray shaped like ``theta`` and must return a
    finite scalar. This is the independent oracle the analytic gradients
    are checked against; it never touches the tape machinery.
    """
    if eps <= 0:
        raise ValueError(f"finite_diff_grad: eps must be positive, got {eps}")
    base = theta.values if isinstance(theta, Tensor) else np.asarray(theta, dtype=np.float64)
    flat = base.reshape(-1).copy()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(f(flat.reshape(base.shape)))
        flat[i] = orig - eps
        f_minus = float(f(flat.reshape(base.shape)))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(
                f"finite_diff_grad: non-finite function value at coordinate {i}"
            )
        grad[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad.reshape(base.shape)

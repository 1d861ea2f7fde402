"""The hybrid forecaster: three resolution streams (two causal conv layers
plus a GRU encoder each), one linear output head per horizon step over the
concatenated final hidden states, and a linear autoregressive shortcut on
the most recent inputs, shared across variables. The network output and
the shortcut output are summed.

Parameters live in small dataclasses of autodiff Tensors. All forward
functions accept either single instances (the documented contracts) or a
batched leading dimension, which the trainer uses; both paths share the
same primitive operations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import autodiff as ad
from .autodiff import Tensor, constant
from .preprocess import downsample_avg

__all__ = [
    "ForecasterConfig",
    "ForecasterParams",
    "GruParams",
    "HeadParams",
    "ShortcutParams",
    "StreamParams",
    "ar_predict",
    "conv_features",
    "count_parameters",
    "forecast",
    "forecast_batch",
    "gru_encode",
    "gru_step",
    "head_predict",
    "init_forecaster",
    "load_checkpoint",
    "multiscale_inputs",
    "ridge_fit",
    "save_checkpoint",
]

CHECKPOINT_FORMAT = "tscast-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class ForecasterConfig:
    """Architecture hyperparameters.

    The input length T must be a positive multiple of 4 so the window can
    be downsampled to half and quarter resolution; ar_window is the number
    of trailing observations the linear shortcut regresses on.
    """

    v: int
    T: int = 64
    L: int = 1
    n_filters: int = 32
    kernel_size: int = 7
    gru_hidden: int = 64
    ar_window: int = 5
    use_ar_shortcut: bool = True
    seed: int = 0

    def __post_init__(self):
        positive = {
            "v": self.v,
            "T": self.T,
            "L": self.L,
            "n_filters": self.n_filters,
            "kernel_size": self.kernel_size,
            "gru_hidden": self.gru_hidden,
            "ar_window": self.ar_window,
        }
        for name, value in positive.items():
            if int(value) != value or value < 1:
                raise ValueError(f"config field {name} must be a positive integer, got {value}")
        if self.T % 4 != 0:
            raise ValueError(f"input length T={self.T} must be a multiple of 4")
        if self.ar_window > self.T:
            raise ValueError(
                f"ar_window={self.ar_window} cannot exceed the input length T={self.T}"
            )


@dataclass
class GruParams:
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor


@dataclass
class StreamParams:
    """One resolution stream: two causal conv layers and a GRU."""

    conv1_w: Tensor
    conv1_b: Tensor
    conv2_w: Tensor
    conv2_b: Tensor
    gru: GruParams


@dataclass
class HeadParams:
    w: Tensor  # (3H, v)
    b: Tensor  # (v,)


@dataclass
class ShortcutParams:
    w: Tensor  # (ar_window, L), shared across variables
    b: Tensor  # (L,)


@dataclass
class ForecasterParams:
    full: StreamParams
    half: StreamParams
    quarter: StreamParams
    heads: list[HeadParams]
    shortcut: ShortcutParams | None

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for stream_name in ("full", "half", "quarter"):
            stream: StreamParams = getattr(self, stream_name)
            out.append((f"{stream_name}.conv1_w", stream.conv1_w))
            out.append((f"{stream_name}.conv1_b", stream.conv1_b))
            out.append((f"{stream_name}.conv2_w", stream.conv2_w))
            out.append((f"{stream_name}.conv2_b", stream.conv2_b))
            for gate in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"):
                out.append((f"{stream_name}.gru.{gate}", getattr(stream.gru, gate)))
        for i, head in enumerate(self.heads, start=1):
            out.append((f"head_{i}.w", head.w))
            out.append((f"head_{i}.b", head.b))
        if self.shortcut is not None:
            out.append(("ar.w", self.shortcut.w))
            out.append(("ar.b", self.shortcut.b))
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def n_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def copy(self) -> "ForecasterParams":
        def copy_stream(s: StreamParams) -> StreamParams:
            return StreamParams(
                conv1_w=s.conv1_w.copy(),
                conv1_b=s.conv1_b.copy(),
                conv2_w=s.conv2_w.copy(),
                conv2_b=s.conv2_b.copy(),
                gru=GruParams(**{k: getattr(s.gru, k).copy() for k in GruParams.__dataclass_fields__}),
            )

        return ForecasterParams(
            full=copy_stream(self.full),
            half=copy_stream(self.half),
            quarter=copy_stream(self.quarter),
            heads=[HeadParams(w=h.w.copy(), b=h.b.copy()) for h in self.heads],
            shortcut=None
            if self.shortcut is None
            else ShortcutParams(w=self.shortcut.w.copy(), b=self.shortcut.b.copy()),
        )


def count_parameters(config: ForecasterConfig) -> int:
    """Closed-form learnable parameter count for a given configuration."""
    v, L = config.v, config.L
    nf, k, h = config.n_filters, config.kernel_size, config.gru_hidden
    per_stream = (nf * v * k + nf) + (nf * nf * k + nf) + 3 * (h * nf + h * h + h)
    total = 3 * per_stream + L * (3 * h * v + v)
    if config.use_ar_shortcut:
        total += config.ar_window * L + L
    return total


# ---------------------------------------------------------------------------
# initialization


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def init_forecaster(config: ForecasterConfig) -> ForecasterParams:
    """Glorot-uniform weights, zero biases, deterministic in config.seed."""
    rng = np.random.default_rng(config.seed)
    v, nf, k, h = config.v, config.n_filters, config.kernel_size, config.gru_hidden

    def make_stream() -> StreamParams:
        conv1_w = _glorot(rng, (nf, v, k), fan_in=v * k, fan_out=nf * k)
        conv2_w = _glorot(rng, (nf, nf, k), fan_in=nf * k, fan_out=nf * k)
        gates = {}
        for gate in ("z", "r", "h"):
            gates[f"w_{gate}"] = _glorot(rng, (h, nf), fan_in=nf, fan_out=h)
            gates[f"u_{gate}"] = _glorot(rng, (h, h), fan_in=h, fan_out=h)
            gates[f"b_{gate}"] = _zeros(h)
        return StreamParams(
            conv1_w=conv1_w,
            conv1_b=_zeros(nf),
            conv2_w=conv2_w,
            conv2_b=_zeros(nf),
            gru=GruParams(**gates),
        )

    heads = [
        HeadParams(w=_glorot(rng, (3 * h, v), fan_in=3 * h, fan_out=v), b=_zeros(v))
        for _ in range(config.L)
    ]
    shortcut = None
    if config.use_ar_shortcut:
        shortcut = ShortcutParams(
            w=_glorot(rng, (config.ar_window, config.L), fan_in=config.ar_window, fan_out=config.L),
            b=_zeros(config.L),
        )
    return ForecasterParams(
        full=make_stream(), half=make_stream(), quarter=make_stream(), heads=heads, shortcut=shortcut
    )


# ---------------------------------------------------------------------------
# forward pieces


def multiscale_inputs(window: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The input block plus its half- and quarter-resolution averages."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape[0] % 4 != 0:
        raise ValueError(f"window length {window.shape[0]} must be a multiple of 4")
    return window, downsample_avg(window, 2), downsample_avg(window, 4)


def conv_features(x, stream: StreamParams) -> Tensor:
    """Two causal conv layers with relu; output length equals input length.

    ``x`` is (v, T_r) channel-major, or (B, v, T_r) batched.
    """
    if not isinstance(x, Tensor):
        x = constant(x)
    q = ad.relu(ad.causal_conv1d(x, stream.conv1_w, stream.conv1_b))
    return ad.relu(ad.causal_conv1d(q, stream.conv2_w, stream.conv2_b))


def _affine_gate(w: Tensor, x: Tensor, u: Tensor, h: Tensor, b: Tensor) -> Tensor:
    s = ad.matmul(w, x) + ad.matmul(u, h)
    if s.values.ndim == 1:
        return s + b
    return ad.add_colvec(s, b)


def gru_step(h, x, gru: GruParams) -> Tensor:
    """One GRU recurrence step.

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    cand = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * cand

    ``h`` is (H,) and ``x`` is (C,); column-batched (H, B) / (C, B) inputs
    work identically.
    """
    if not isinstance(h, Tensor):
        h = constant(h)
    if not isinstance(x, Tensor):
        x = constant(x)
    z = ad.sigmoid(_affine_gate(gru.w_z, x, gru.u_z, h, gru.b_z))
    r = ad.sigmoid(_affine_gate(gru.w_r, x, gru.u_r, h, gru.b_r))
    cand = ad.tanh(_affine_gate(gru.w_h, x, gru.u_h, r * h, gru.b_h))
    return (1.0 - z) * h + z * cand


def gru_encode(g_seq, gru: GruParams) -> Tensor:
    """Run the GRU over a feature sequence from a zero state; return the
    final hidden state.

    ``g_seq`` is (C, T_r), or (B, C, T_r) batched, in which case the result
    is (H, B).
    """
    if not isinstance(g_seq, Tensor):
        g_seq = constant(g_seq)
    hidden = gru.u_z.shape[0]
    if g_seq.values.ndim == 2:
        t_len = g_seq.shape[1]
        if t_len < 1:
            raise ValueError("gru_encode: empty sequence")
        h = constant(np.zeros(hidden))
        for t in range(t_len):
            h = gru_step(h, ad.column(g_seq, t), gru)
    elif g_seq.values.ndim == 3:
        t_len = g_seq.shape[2]
        if t_len < 1:
            raise ValueError("gru_encode: empty sequence")
        h = constant(np.zeros((hidden, g_seq.shape[0])))
        for t in range(t_len):
            h = gru_step(h, ad.step_cols(g_seq, t), gru)
    else:
        raise ad.DimensionError(f"gru_encode: expected (C, T) or (B, C, T), got {g_seq.shape}")
    return h


def head_predict(h_full: Tensor, h_half: Tensor, h_quarter: Tensor, t: int, heads: list[HeadParams]) -> Tensor:
    """Affine map of [h, h', h''] through output step t's own head; t is 1-based."""
    if not 1 <= t <= len(heads):
        raise ValueError(f"output step t={t} outside 1..{len(heads)}")
    head = heads[t - 1]
    cat = ad.concat([h_full, h_half, h_quarter], axis=0)
    if cat.values.ndim == 1:
        return ad.matmul(cat, head.w) + head.b
    return ad.add_rowvec(ad.matmul(ad.transpose(cat), head.w), head.b)  # (B, v)


def ar_predict(window, shortcut: ShortcutParams, ar_window: int) -> Tensor:
    """Linear forecast of each variable from its last ar_window values.

    The weight matrix (ar_window, L) and bias (L,) are shared across
    variables; returns (L, v).
    """
    if shortcut is None:
        raise ValueError("ar_predict: this model was built without the shortcut")
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if ar_window > window.shape[0]:
        raise ValueError(
            f"ar_window={ar_window} exceeds the available {window.shape[0]} input steps"
        )
    recent = constant(window[-ar_window:].T)  # (v, ar_window)
    per_var = ad.add_rowvec(ad.matmul(recent, shortcut.w), shortcut.b)  # (v, L)
    return ad.transpose(per_var)


def forecast(window, params: ForecasterParams, config: ForecasterConfig) -> Tensor:
    """Full model prediction for one input window; returns (L, v).

    The nonlinear path encodes the three resolutions and applies one head
    per output step; the shortcut path, when enabled, adds the shared
    linear regression on the trailing inputs.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape != (config.T, config.v):
        raise ValueError(f"window shape {window.shape} does not match (T={config.T}, v={config.v})")

    s_full, s_half, s_quarter = multiscale_inputs(window)
    h_full = gru_encode(conv_features(s_full.T, params.full), params.full.gru)
    h_half = gru_encode(conv_features(s_half.T, params.half), params.half.gru)
    h_quarter = gru_encode(conv_features(s_quarter.T, params.quarter), params.quarter.gru)

    steps = [head_predict(h_full, h_half, h_quarter, t, params.heads) for t in range(1, config.L + 1)]
    out = ad.stack(steps)  # (L, v)
    if config.use_ar_shortcut:
        out = out + ar_predict(window, params.shortcut, config.ar_window)
    return out


def forecast_batch(windows, params: ForecasterParams, config: ForecasterConfig) -> Tensor:
    """Batched forecast over (B, T, v) windows; returns (L, B, v).

    Numerically equivalent to stacking per-window :func:`forecast` calls
    (up to floating-point contraction order); used by the trainer.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or windows.shape[1:] != (config.T, config.v):
        raise ValueError(
            f"batch shape {windows.shape} does not match (B, T={config.T}, v={config.v})"
        )
    b = windows.shape[0]

    states = []
    for stream, factor in ((params.full, 1), (params.half, 2), (params.quarter, 4)):
        if factor == 1:
            block = windows
        else:
            block = windows.reshape(b, config.T // factor, factor, config.v).mean(axis=2)
        x = np.swapaxes(block, 1, 2)  # (B, v, T_r)
        states.append(gru_encode(conv_features(x, stream), stream.gru))  # (H, B)

    cat = ad.concat(states, axis=0)  # (3H, B)
    cat_t = ad.transpose(cat)  # (B, 3H)

    ar_rows = None
    if config.use_ar_shortcut:
        if params.shortcut is None:
            raise ValueError("forecast_batch: config enables the shortcut but the model has none")
        recent = np.swapaxes(windows[:, -config.ar_window :, :], 1, 2)  # (B, v, ar)
        flat = constant(recent.reshape(b * config.v, config.ar_window))
        ar_rows = ad.add_rowvec(ad.matmul(flat, params.shortcut.w), params.shortcut.b)  # (B*v, L)

    steps = []
    for t in range(1, config.L + 1):
        head = params.heads[t - 1]
        o_t = ad.add_rowvec(ad.matmul(cat_t, head.w), head.b)  # (B, v)
        if ar_rows is not None:
            l_t = ad.reshape(ad.column(ar_rows, t - 1), (b, config.v))
            o_t = o_t + l_t
        steps.append(o_t)
    return ad.stack(steps)  # (L, B, v)


# ---------------------------------------------------------------------------
# ridge baseline


def ridge_fit(X, y, lam: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ridge regression on mean-centered data.

    Solves (X'X + lam I) w = X'y by Cholesky factorization; the intercept
    restores the means. lam=0 requires X'X to be invertible.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"ridge_fit: X must be 2-d, got shape {X.shape}")
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"ridge_fit: {X.shape[0]} rows of X vs {y.shape[0]} of y")
    if lam < 0:
        raise ValueError(f"ridge_fit: lam must be >= 0, got {lam}")

    x_mean = X.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = X - x_mean
    yc = y - y_mean
    gram = xc.T @ xc + lam * np.eye(X.shape[1])
    try:
        w = cho_solve(cho_factor(gram), xc.T @ yc)
    except np.linalg.LinAlgError as err:
        raise FloatingPointError(
            f"ridge_fit: singular normal equations ({err}); use lam > 0"
        ) from None
    intercept = y_mean - x_mean @ w
    if squeeze:
        return w[:, 0], intercept[0]
    return w, intercept


# ---------------------------------------------------------------------------
# checkpointing


def save_checkpoint(path, params: ForecasterParams, config: ForecasterConfig) -> None:
    """Write config plus all parameter arrays as a versioned JSON document.

    Floats are serialized with shortest round-trip repr, so values survive
    a save/load cycle bit-exactly and re-saving a loaded checkpoint
    reproduces the file byte for byte.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "params": {
            name: {"shape": list(t.shape), "data": t.values.reshape(-1).tolist()}
            for name, t in params.named_parameters()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> tuple[ForecasterParams, ForecasterConfig]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    config = ForecasterConfig(**payload["config"])
    params = init_forecaster(config)
    stored = payload["params"]
    expected = [name for name, _ in params.named_parameters()]
    if sorted(stored) != sorted(expected):
        raise ValueError(f"{path}: checkpoint parameter names do not match the config")
    for name, tensor in params.named_parameters():
        entry = stored[name]
        values = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if values.shape != tensor.shape:
            raise ValueError(f"{path}: shape mismatch for {name}")
        tensor.values[...] = values
    return params, config

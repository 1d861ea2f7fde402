"""Dataset preparation: normalization, Gaussian smoothing, multi-resolution
downsampling, supervised window construction, and blocked fold splitting.

All functions are pure: they return new arrays/frames and never mutate
their inputs, so they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ForecastWindow",
    "NormStats",
    "SeriesFrame",
    "apply_normalizer",
    "blocked_kfold",
    "build_windows",
    "downsample_avg",
    "fit_normalizer",
    "gaussian_kernel",
    "gaussian_smooth",
    "invert_normalizer",
    "preprocess_frame",
]

CONSTANT_STD_FLOOR = 1e-8


@dataclass
class SeriesFrame:
    """A multivariate time series: T_total x v values plus variable names."""

    names: list[str]
    data: np.ndarray
    norm_stats: "NormStats | None" = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValueError(f"SeriesFrame data must be 2-d, got shape {data.shape}")
        if len(self.names) != data.shape[1]:
            raise ValueError(
                f"{len(self.names)} variable names for {data.shape[1]} columns"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("SeriesFrame data contains non-finite values")
        self.data = data

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def n_variables(self) -> int:
        return self.data.shape[1]


@dataclass
class NormStats:
    """Per-variable mean / population std; constant columns use std 1."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool mask of variables flagged as constant


@dataclass
class ForecastWindow:
    """One supervised instance: a T x v input block and the L x v block
    immediately following it in the source series."""

    input: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        if self.input.shape[0] % 4 != 0:
            raise ValueError(
                f"window length {self.input.shape[0]} must be a multiple of 4 "
                "(required by the multi-resolution downsampling)"
            )
        if self.target.shape[0] < 1:
            raise ValueError("target horizon must be at least 1")
        if self.input.shape[1] != self.target.shape[1]:
            raise ValueError("input and target variable counts differ")


def fit_normalizer(frame: SeriesFrame) -> NormStats:
    """Per-variable mean and population (1/N) standard deviation.

    Variables with std below 1e-8 are flagged constant and given std 1 so
    that normalization is well defined.
    """
    if frame.length < 2:
        raise ValueError(f"need at least 2 rows to fit a normalizer, got {frame.length}")
    mean = frame.data.mean(axis=0)
    std = frame.data.std(axis=0)  # population, ddof=0
    constant = std < CONSTANT_STD_FLOOR
    std = np.where(constant, 1.0, std)
    return NormStats(mean=mean, std=std, constant=constant)


def apply_normalizer(frame: SeriesFrame, stats: NormStats) -> SeriesFrame:
    _check_arity(frame, stats)
    data = (frame.data - stats.mean) / stats.std
    return SeriesFrame(list(frame.names), data, norm_stats=stats)


def invert_normalizer(frame: SeriesFrame, stats: NormStats) -> SeriesFrame:
    """Exact inverse of apply_normalizer."""
    _check_arity(frame, stats)
    data = frame.data * stats.std + stats.mean
    return SeriesFrame(list(frame.names), data, norm_stats=None)


def _check_arity(frame: SeriesFrame, stats: NormStats) -> None:
    if stats.mean.shape != (frame.n_variables,) or stats.std.shape != (frame.n_variables,):
        raise ValueError(
            f"normalizer arity {stats.mean.shape} does not match {frame.n_variables} variables"
        )


def gaussian_kernel(size: int = 5, std: float = 2.0) -> np.ndarray:
    """Normalized kernel exp(-k^2 / (2 std^2)) for k in [-(size-1)/2, (size-1)/2]."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {size}")
    if std <= 0:
        raise ValueError(f"kernel std must be positive, got {std}")
    half = (size - 1) // 2
    k = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(k**2) / (2.0 * std * std))
    return kernel / kernel.sum()


def gaussian_smooth(frame: SeriesFrame, size: int = 5, std: float = 2.0) -> SeriesFrame:
    """Smooth each variable with a normalized Gaussian kernel.

    Edges use reflect padding (mirror about the edge sample), so constant
    series pass through unchanged and interior points of affine series are
    preserved by the kernel's symmetry.
    """
    kernel = gaussian_kernel(size, std)
    half = (size - 1) // 2
    out = np.empty_like(frame.data)
    for j in range(frame.n_variables):
        col = frame.data[:, j]
        if half > 0:
            padded = np.pad(col, half, mode="reflect")
        else:
            padded = col
        out[:, j] = np.convolve(padded, kernel, mode="valid")
    return SeriesFrame(list(frame.names), out, norm_stats=frame.norm_stats)


def downsample_avg(block: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping groups of `factor` consecutive rows.

    [1, 2, 3, 4] with factor 2 gives [1.5, 3.5]; with factor 4 gives [2.5].
    """
    block = np.asarray(block, dtype=np.float64)
    squeeze = block.ndim == 1
    if squeeze:
        block = block[:, None]
    t_len = block.shape[0]
    if factor not in (2, 4):
        raise ValueError(f"downsample factor must be 2 or 4, got {factor}")
    if t_len % factor != 0:
        raise ValueError(f"length {t_len} is not divisible by factor {factor}")
    out = block.reshape(t_len // factor, factor, block.shape[1]).mean(axis=1)
    return out[:, 0] if squeeze else out


def build_windows(frame: SeriesFrame, T: int, L: int, stride: int = 1) -> list[ForecastWindow]:
    """Chronological sliding windows: inputs of length T, targets of length L."""
    if T % 4 != 0 or T < 4:
        raise ValueError(
            f"input window length T={T} must be a positive multiple of 4 "
            "(required by the multi-resolution downsampling)"
        )
    if L < 1:
        raise ValueError(f"horizon L must be >= 1, got {L}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if T + L > frame.length:
        raise ValueError(
            f"series of length {frame.length} cannot fit one window of T={T} plus L={L}"
        )
    windows = []
    offset = 0
    while offset + T + L <= frame.length:
        windows.append(
            ForecastWindow(
                input=frame.data[offset : offset + T].copy(),
                target=frame.data[offset + T : offset + T + L].copy(),
            )
        )
        offset += stride
    return windows


def blocked_kfold(n_windows: int, k: int = 5) -> list[tuple[np.ndarray, np.ndarray]]:
    """Contiguous test blocks partitioning range(n_windows) into k folds.

    Block sizes differ by at most one; the remainder goes to the earliest
    blocks. Train indices are the complement of each test block.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n_windows < k:
        raise ValueError(f"{n_windows} windows cannot form {k} folds")
    base, rem = divmod(n_windows, k)
    folds = []
    start = 0
    everything = np.arange(n_windows)
    for i in range(k):
        size = base + (1 if i < rem else 0)
        test = everything[start : start + size]
        train = np.concatenate([everything[:start], everything[start + size :]])
        folds.append((train, test))
        start += size
    return folds


def preprocess_frame(
    frame: SeriesFrame, smooth_size: int = 5, smooth_std: float = 2.0
) -> tuple[SeriesFrame, NormStats]:
    """Standard pipeline: fit per-variable normalization on the full series,
    apply it, then Gaussian-smooth each variable.

    Statistics are fit globally, before any fold splitting; see the README
    for the leakage caveat this implies.
    """
    stats = fit_normalizer(frame)
    normalized = apply_normalizer(frame, stats)
    return gaussian_smooth(normalized, smooth_size, smooth_std), stats

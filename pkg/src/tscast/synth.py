"""Synthetic corpus of trending, periodic series, and the paired
with/without-shortcut experiment that uses it.

Each series is trend + sinusoid + Gaussian noise:

    s_t = slope * t + amplitude * sin(2 pi t / period + phase) + noise_t

with slope, amplitude, period and phase drawn per series from the spec
ranges. The ground-truth components are returned alongside the series so
the construction can be audited (they sum to the series exactly).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .metrics import dtw_multivariate
from .model import ForecasterConfig
from .preprocess import SeriesFrame, build_windows, preprocess_frame
from .train import TrainConfig, sliding_forecast, train_model

__all__ = [
    "AblationArm",
    "AblationResult",
    "SynthSeries",
    "SynthSpec",
    "ablation_run",
    "corpus_to_frame",
    "default_ablation_model_config",
    "default_ablation_train_config",
    "evaluate_arm",
    "generate",
]


@dataclass
class SynthSpec:
    n_series: int = 80
    length: int = 120
    slope_range: tuple[float, float] = (-0.05, 0.05)
    period_range: tuple[float, float] = (8.0, 30.0)
    amplitude_range: tuple[float, float] = (0.5, 2.0)
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_series < 1:
            raise ValueError(f"n_series must be >= 1, got {self.n_series}")
        if self.length < 8:
            raise ValueError(f"series length must be >= 8, got {self.length}")
        for name in ("slope_range", "period_range", "amplitude_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} is not well ordered: ({lo}, {hi})")
        if self.period_range[0] <= 0:
            raise ValueError("periods must be positive")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")


@dataclass
class SynthSeries:
    values: np.ndarray
    trend: np.ndarray
    periodic: np.ndarray
    noise: np.ndarray
    slope: float
    period: float
    amplitude: float
    phase: float


def generate(spec: SynthSpec) -> list[SynthSeries]:
    """Deterministic corpus of univariate series with per-series components."""
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length, dtype=np.float64)
    corpus = []
    for _ in range(spec.n_series):
        slope = rng.uniform(*spec.slope_range)
        period = rng.uniform(*spec.period_range)
        amplitude = rng.uniform(*spec.amplitude_range)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        trend = slope * t
        periodic = amplitude * np.sin(2.0 * np.pi * t / period + phase)
        noise = rng.normal(0.0, spec.noise_std, size=spec.length) if spec.noise_std > 0 else np.zeros(spec.length)
        corpus.append(
            SynthSeries(
                values=trend + periodic + noise,
                trend=trend,
                periodic=periodic,
                noise=noise,
                slope=slope,
                period=period,
                amplitude=amplitude,
                phase=phase,
            )
        )
    return corpus


def corpus_to_frame(corpus: list[SynthSeries]) -> SeriesFrame:
    """Bundle a corpus as one frame, series as columns (the CLI's format)."""
    data = np.stack([s.values for s in corpus], axis=1)
    names = [f"s{i:03d}" for i in range(len(corpus))]
    return SeriesFrame(names, data)


# ---------------------------------------------------------------------------
# with/without-shortcut experiment


def default_ablation_model_config(seed: int = 0) -> ForecasterConfig:
    return ForecasterConfig(
        v=1, T=16, L=4, n_filters=4, kernel_size=5, gru_hidden=8, ar_window=5, seed=seed
    )


def default_ablation_train_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(learning_rate=5e-3, epochs=60, batch_size=64, patience=10, seed=seed)


@dataclass
class AblationArm:
    use_ar_shortcut: bool
    mse_per_series: list[float]
    dtw_per_series: list[float]

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse_per_series))

    @property
    def mean_dtw(self) -> float:
        return float(np.mean(self.dtw_per_series))


@dataclass
class AblationResult:
    seed: int
    eval_steps: int
    with_shortcut: AblationArm
    without_shortcut: AblationArm
    traces: list[dict]


def evaluate_arm(
    corpus: list[SynthSeries],
    model_config: ForecasterConfig,
    train_config: TrainConfig,
    eval_steps: int = 20,
    holdout_fraction: float = 0.2,
    stride: int = 2,
) -> tuple[AblationArm, list[dict]]:
    """Train one model on the leading series, score sliding multi-step
    forecasts on the held-out tail series. Returns the arm result plus a
    forecast-vs-truth trace per held-out series.
    """
    n_holdout = max(1, int(round(holdout_fraction * len(corpus))))
    if n_holdout >= len(corpus):
        raise ValueError("holdout fraction leaves no training series")
    train_series = corpus[:-n_holdout]
    eval_series = corpus[-n_holdout:]

    processed: dict[int, np.ndarray] = {}
    windows = []
    for idx, series in enumerate(corpus):
        frame, _ = preprocess_frame(SeriesFrame(["y"], series.values[:, None]))
        processed[idx] = frame.data
        if idx < len(train_series):
            windows.extend(build_windows(frame, model_config.T, model_config.L, stride))

    params, _ = train_model(windows, model_config, train_config)

    mse_list, dtw_list, traces = [], [], []
    for offset, series in enumerate(eval_series):
        idx = len(train_series) + offset
        data = processed[idx]
        start = data.shape[0] - eval_steps
        pred = sliding_forecast(params, model_config, data, start, eval_steps)
        truth = data[start:]
        mse_list.append(float(np.mean((pred - truth) ** 2)))
        dtw_list.append(dtw_multivariate(pred, truth, radius=None))
        traces.append(
            {
                "series_index": idx,
                "start": start,
                "truth": data[:, 0].copy(),
                "prediction": pred[:, 0].copy(),
            }
        )
    arm = AblationArm(
        use_ar_shortcut=model_config.use_ar_shortcut,
        mse_per_series=mse_list,
        dtw_per_series=dtw_list,
    )
    return arm, traces


def ablation_run(
    spec: SynthSpec | None = None,
    model_config: ForecasterConfig | None = None,
    train_config: TrainConfig | None = None,
    eval_steps: int = 20,
    holdout_fraction: float = 0.2,
    stride: int = 2,
) -> AblationResult:
    """Train two models identical except for the shortcut flag and compare
    held-out sliding multi-step error."""
    spec = spec or SynthSpec()
    model_config = model_config or default_ablation_model_config(seed=spec.seed)
    train_config = train_config or default_ablation_train_config(seed=spec.seed)
    corpus = generate(spec)

    arm_on, traces_on = evaluate_arm(
        corpus,
        replace(model_config, use_ar_shortcut=True),
        train_config,
        eval_steps=eval_steps,
        holdout_fraction=holdout_fraction,
        stride=stride,
    )
    arm_off, traces_off = evaluate_arm(
        corpus,
        replace(model_config, use_ar_shortcut=False),
        train_config,
        eval_steps=eval_steps,
        holdout_fraction=holdout_fraction,
        stride=stride,
    )

    traces = []
    for on, off in zip(traces_on, traces_off):
        traces.append(
            {
                "series_index": on["series_index"],
                "start": on["start"],
                "truth": on["truth"],
                "with_shortcut": on["prediction"],
                "without_shortcut": off["prediction"],
            }
        )
    return AblationResult(
        seed=spec.seed,
        eval_steps=eval_steps,
        with_shortcut=arm_on,
        without_shortcut=arm_off,
        traces=traces,
    )

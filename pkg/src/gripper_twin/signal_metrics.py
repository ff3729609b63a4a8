"""Tip-trajectory analysis: smoothing, extrema, overshoots, settling time.

A release experiment produces the vertical tip position over time; the
damping calibration compares its settling time and overshoot count between
simulation and measurement. An overshoot is a pair of consecutive extrema
whose vertical gap exceeds a threshold (1 mm by default); the settling time
is the last moment the signal sits outside a tolerance band around its
final value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

DEFAULT_OVERSHOOT_THRESHOLD = 1e-3  # m
DEFAULT_SETTLING_BAND = 1e-3  # m
TRAILING_FRACTION = 0.05  # share of samples averaged into the final value


@dataclass
class TimeSeries:
    """Uniformly sampled scalar signal."""

    sample_rate: float
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.sample_rate = float(self.sample_rate)
        self.t0 = float(self.t0)
        if self.sample_rate <= 0:
            raise ModelError("sample_rate must be positive")
        if self.values.ndim != 1 or self.values.size < 2:
            raise ModelError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(self.values)):
            raise ModelError("time series contains non-finite samples")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return (self.values.size - 1) / self.sample_rate

    def to_csv(self, path) -> None:
        header = "t,tip_y"
        data = np.column_stack([self.times, self.values])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10g")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 2 or data.shape[0] < 2:
            raise ModelError(f"{path}: expected two columns t,tip_y with >= 2 rows")
        t = data[:, 0]
        dt = np.diff(t)
        if dt.min() <= 0 or (dt.max() - dt.min()) > 1e-6 * max(dt.mean(), 1e-12):
            raise ModelError(f"{path}: time stamps are not uniformly spaced")
        return cls(sample_rate=1.0 / dt.mean(), values=data[:, 1], t0=t[0])


@dataclass(frozen=True)
class Extremum:
    time: float
    value: float
    kind: str  # "max" or "min"


@dataclass
class SettlingReport:
    """Summary of a settling trajectory."""

    settling_time: float
    overshoot_count: int
    final_value: float
    extrema: list = field(default_factory=list)  # (time, value) pairs

    def to_dict(self) -> dict:
        return {
            "settling_time_s": self.settling_time,
            "overshoot_count": self.overshoot_count,
            "final_value_m": self.final_value,
            "extrema": [[t, v] for t, v in self.extrema],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def gaussian_smooth(series: TimeSeries, sigma: float) -> TimeSeries:
    """Convolve with a normalized discrete Gaussian (sigma in samples).

    Boundaries are reflect-padded (edge sample repeated); sigma = 0 returns
    the input unchanged. Kernel radius is ceil(4 * sigma).
    """
    if sigma < 0:
        raise ModelError("sigma must be >= 0")
    if sigma == 0:
        return TimeSeries(series.sample_rate, series.values.copy(), series.t0)
    radius = int(np.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(series.values, radius, mode="symmetric")
    smoothed = np.convolve(padded, kernel, mode="valid")
    return TimeSeries(series.sample_rate, smoothed, series.t0)


def find_extrema(series: TimeSeries) -> list[Extremum]:
    """Strict interior local maxima and minima, alternating in kind.

    Plateaus (runs of equal samples) report their center sample. Endpoints
    are never extrema. Alternation follows from run-length classification:
    between two maxima the signal must pass through a minimum run.
    """
    vals = series.values
    boundaries = np.flatnonzero(np.diff(vals) != 0)
    starts = np.concatenate([[0], boundaries + 1])
    ends = np.concatenate([boundaries, [vals.size - 1]])
    out: list[Extremum] = []
    times = series.times
    for r in range(1, len(starts) - 1):
        v = vals[starts[r]]
        prev_v = vals[starts[r - 1]]
        next_v = vals[starts[r + 1]]
        if prev_v < v > next_v:
            kind = "max"
        elif prev_v > v < next_v:
            kind = "min"
        else:
            continue
        center = (starts[r] + ends[r]) // 2
        out.append(Extremum(float(times[center]), float(v), kind))
    return out


def settling_metrics(series: TimeSeries,
                     overshoot_threshold: float = DEFAULT_OVERSHOOT_THRESHOLD,
                     band: float = DEFAULT_SETTLING_BAND) -> SettlingReport:
    """Settling time, overshoot count, and final value of a trajectory.

    * final value: mean of the trailing 5% of samples
    * overshoot count: consecutive-extrema pairs separated vertically by
      more than ``overshoot_threshold``
    * settling time: time (from t0) of the last sample outside
      ``final +- band``; 0 if the signal never leaves the band
    """
    if overshoot_threshold <= 0:
        raise ModelError("overshoot_threshold must be positive")
    if band <= 0:
        raise ModelError("band must be positive")
    n = series.values.size
    if n < 20:
        raise ModelError("settling metrics need at least 20 samples")
    tail = max(1, int(round(TRAILING_FRACTION * n)))
    final_value = float(series.values[-tail:].mean())
    extrema = find_extrema(series)
    values = np.array([e.value for e in extrema])
    overshoots = int(np.sum(np.abs(np.diff(values)) > overshoot_threshold)) if len(values) > 1 else 0
    outside = np.flatnonzero(np.abs(series.values - final_value) > band)
    settling_time = float(outside[-1] / series.sample_rate) if outside.size else 0.0
    return SettlingReport(
        settling_time=settling_time,
        overshoot_count=overshoots,
        final_value=final_value,
        extrema=[(e.time, e.value) for e in extrema],
    )

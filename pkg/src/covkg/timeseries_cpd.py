"""Daily aggregation, rolling means, peak detection, and exact PELT changepoints.

The changepoint objective is the within-segment sum of squared deviations plus
a linear penalty per changepoint; PELT prunes candidate segment starts without
losing exactness (the pruning inequality holds for this cost).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import DataError


@dataclass(frozen=True)
class DailySeries:
    """Per-date values with strictly increasing dates."""

    dates: tuple[date, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.dates) != len(self.values):
            raise DataError("dates and values length mismatch")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ChangePointSet:
    """Segment boundaries tau_1 < ... < tau_m < tau_{m+1} = n.

    Boundaries count points: a boundary tau means the segment ends after the
    tau-th value (1-based).  The terminal boundary n is always present; the
    interior boundaries are the detected changepoints.
    """

    boundaries: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DataError("series must contain at least one point")
        if not self.boundaries or self.boundaries[-1] != self.n:
            raise DataError("terminal boundary must equal the series length")
        if any(b <= a for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise DataError("boundaries must be strictly increasing")
        if self.boundaries[0] < 1:
            raise DataError("boundaries must be >= 1")

    @property
    def interior(self) -> tuple[int, ...]:
        return self.boundaries[:-1]

    def segments(self) -> list[tuple[int, int]]:
        """Half-open (start, end) index pairs covering 0..n."""
        out = []
        start = 0
        for b in self.boundaries:
            out.append((start, b))
            start = b
        return out


def save_series(series: DailySeries, sink) -> None:
    """Write ``date,value`` CSV with ISO dates and 6-decimal values."""
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        fh.write("date,value\n")
        for day, value in zip(series.dates, series.values):
            fh.write(f"{day.isoformat()},{value:.6f}\n")
    finally:
        if own:
            fh.close()


def load_series(source) -> DailySeries:
    """Read a ``date,value`` CSV back into a DailySeries."""
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        header = fh.readline().strip()
        if header != "date,value":
            raise DataError(f"expected 'date,value' header, got {header!r}")
        dates: list[date] = []
        values: list[float] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            day_text, sep, value_text = line.strip().partition(",")
            if not sep:
                raise DataError(f"series line {lineno}: expected date,value")
            try:
                dates.append(date.fromisoformat(day_text))
                values.append(float(value_text))
            except ValueError as exc:
                raise DataError(f"series line {lineno}: {exc}") from exc
        return DailySeries(tuple(dates), tuple(values))
    finally:
        if own:
            fh.close()


def daily_mean(observations: Iterable[tuple[date, float]]) -> DailySeries:
    """Arithmetic mean of the observations on each date, dates sorted."""
    sums: dict[date, float] = {}
    counts: dict[date, int] = {}
    for day, value in observations:
        sums[day] = sums.get(day, 0.0) + float(value)
        counts[day] = counts.get(day, 0) + 1
    days = sorted(sums)
    return DailySeries(tuple(days), tuple(sums[d] / counts[d] for d in days))


def rolling_mean(series: DailySeries, window: int = 7) -> DailySeries:
    """Trailing-window mean; positions with fewer than ``window`` predecessors
    average what is available."""
    if window < 1:
        raise DataError(f"window must be >= 1, got {window}")
    values = np.asarray(series.values, dtype=np.float64)
    out = np.empty_like(values)
    for i in range(len(values)):
        out[i] = values[max(0, i - window + 1) : i + 1].mean()
    return DailySeries(series.dates, tuple(float(v) for v in out))


def detect_peaks(values: Sequence[float], prominence_factor: float = 3.0) -> list[int]:
    """Positions of local maxima whose prominence is at least
    ``prominence_factor`` times the series standard deviation."""
    if prominence_factor <= 0:
        raise DataError("prominence factor must be positive")
    values = np.asarray(values, dtype=np.float64)
    sigma = float(values.std())
    if sigma == 0.0:
        return []
    peaks, _ = find_peaks(values, prominence=prominence_factor * sigma)
    return [int(p) for p in peaks]


def _prefix_sums(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s1 = np.concatenate([[0.0], np.cumsum(values)])
    s2 = np.concatenate([[0.0], np.cumsum(values * values)])
    return s1, s2


def _segment_cost(s1: np.ndarray, s2: np.ndarray, a: int, b: int) -> float:
    """Sum of squared deviations from the mean over the half-open segment [a, b)."""
    length = b - a
    seg_sum = s1[b] - s1[a]
    return float(s2[b] - s2[a] - seg_sum * seg_sum / length)


def pelt(
    values: Sequence[float], penalty: float, with_objective: bool = False
) -> ChangePointSet | tuple[ChangePointSet, float]:
    """Exact minimizer of sum-of-segment costs plus ``penalty`` per changepoint.

    Ties between optimal segmentations resolve toward the earliest admissible
    previous boundary, making the result deterministic.  With
    ``with_objective`` the minimized objective value is returned as well.
    """
    y = np.asarray(values, dtype=np.float64)
    n = len(y)
    if n < 1:
        raise DataError("series must contain at least one point")
    if penalty < 0:
        raise DataError("penalty must be nonnegative")
    s1, s2 = _prefix_sums(y)

    best = np.empty(n + 1)
    best[0] = -penalty
    prev = np.zeros(n + 1, dtype=np.int64)
    candidates = [0]
    for t in range(1, n + 1):
        costs = [best[s] + _segment_cost(s1, s2, s, t) + penalty for s in candidates]
        arg = int(np.argmin(costs))
        best[t] = costs[arg]
        prev[t] = candidates[arg]
        # Pruning: a start that already exceeds the new optimum can never win
        # later because the cost is superadditive under splitting.
        candidates = [
            s for s, c in zip(candidates, costs) if c - penalty <= best[t]
        ]
        candidates.append(t)

    boundaries = []
    t = n
    while t > 0:
        boundaries.append(t)
        t = prev[t]
    cps = ChangePointSet(tuple(reversed(boundaries)), n)
    if with_objective:
        return cps, float(best[n])
    return cps


def segmentation_cost(values: Sequence[float], cps: ChangePointSet, penalty: float) -> float:
    """Objective value of a segmentation: segment costs plus penalty per interior boundary."""
    y = np.asarray(values, dtype=np.float64)
    s1, s2 = _prefix_sums(y)
    total = sum(_segment_cost(s1, s2, a, b) for a, b in cps.segments())
    return float(total + penalty * len(cps.interior))


def changepoint_dates(series: DailySeries, cps: ChangePointSet) -> list[date]:
    """Map interior boundaries to the last date of their segment."""
    return [series.dates[b - 1] for b in cps.interior]


def tune_penalty(
    series: DailySeries,
    target_dates: Sequence[date],
    penalty_grid: Sequence[float],
    window: int | None = None,
) -> float:
    """Grid value minimizing the symmetric mean nearest-neighbor day distance
    between detected interior changepoint dates and the targets.

    A penalty detecting no interior changepoints scores infinitely bad; ties
    resolve to the larger penalty (fewer changepoints).
    """
    if not target_dates:
        raise DataError("target date set is empty")
    if not penalty_grid:
        raise DataError("penalty grid is empty")
    working = rolling_mean(series, window) if window else series

    def distance(detected: list[date]) -> float:
        if not detected:
            return float("inf")
        total = 0.0
        for d in detected:
            total += min(abs((d - t).days) for t in target_dates)
        for t in target_dates:
            total += min(abs((d - t).days) for d in detected)
        return total / (len(detected) + len(target_dates))

    best_penalty = None
    best_dist = float("inf")
    for penalty in penalty_grid:
        cps = pelt(working.values, penalty)
        dist = distance(changepoint_dates(working, cps))
        if best_penalty is None or dist < best_dist or (dist == best_dist and penalty > best_penalty):
            best_penalty = penalty
            best_dist = dist
    return float(best_penalty)

"""
Daily series, rolling means, and exact changepoint detection
============================================================

Sentiment observations aggregate into a daily series; a trailing 7-day
mean smooths it; PELT then finds the exact minimizer of the within-
segment variance plus a per-changepoint penalty.  The last day always
closes the final segment.
"""

from datetime import date, timedelta

import numpy as np

from covkg import (
    changepoint_dates,
    daily_mean,
    detect_peaks,
    pelt,
    rolling_mean,
    tune_penalty,
)

rng = np.random.default_rng(3)
start = date(2020, 3, 11)

# Mood drops sharply on day 30 and recovers on day 60.
observations = []
for i in range(90):
    level = 0.3 if i < 30 else (-0.4 if i < 60 else 0.2)
    day = start + timedelta(days=i)
    for _ in range(int(rng.integers(3, 8))):
        observations.append((day, level + 0.15 * rng.normal()))

series = daily_mean(observations)
smooth = rolling_mean(series, window=7)
print(f"{len(series)} days, raw mean range "
      f"[{min(series.values):+.2f}, {max(series.values):+.2f}]")

cps = pelt(smooth.values, penalty=0.2)
print("segment boundaries (positions):", cps.boundaries)
print("changepoint dates:", [d.isoformat() for d in changepoint_dates(smooth, cps)])

# Penalty tuning against known important dates.
targets = [start + timedelta(days=30), start + timedelta(days=60)]
best = tune_penalty(smooth, targets, penalty_grid=[0.02, 0.2, 2.0, 20.0])
print("tuned penalty:", best)

# Volume peaks: a burst of activity stands out by prominence.
volume = [10.0] * 40 + [60.0] + [10.0] * 49
print("volume peaks at positions:", detect_peaks(volume, prominence_factor=3.0))

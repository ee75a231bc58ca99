"""Coincidence-histogram construction from timestamp streams.

Counts all start/stop pairs whose lag falls inside a symmetric window
(start-stop-free correlation, not first-stop-only), using a two-pointer
sweep over the sorted streams. Bins are half-open [lo, hi) in ps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .simulate import TimestampStream

_PAIR_CHUNK = 1 << 22


@dataclass
class CorrelationHistogram:
    """Binned coincidence counts versus start-stop lag."""

    config: str
    bin_width_ps: float
    tau_min_ps: float
    tau_max_ps: float
    counts: np.ndarray
    total_pairs: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        n = (self.tau_max_ps - self.tau_min_ps) / self.bin_width_ps
        if abs(n - round(n)) > 1e-9 or counts.size != round(n):
            raise ValueError(
                f"expected {n} bins for span/bin_width, got {counts.size}"
            )
        self.counts = counts

    @property
    def n_bins(self) -> int:
        return self.counts.size

    def bin_centers(self) -> np.ndarray:
        return (
            self.tau_min_ps
            + (np.arange(self.n_bins) + 0.5) * self.bin_width_ps
        )

    def bin_edges(self) -> np.ndarray:
        return self.tau_min_ps + np.arange(self.n_bins + 1) * self.bin_width_ps

    def rebinned(self, factor: int) -> "CorrelationHistogram":
        """Merge ``factor`` adjacent bins (n_bins must be divisible)."""
        if self.n_bins % factor:
            raise ValueError(f"{self.n_bins} bins not divisible by {factor}")
        counts = self.counts.reshape(-1, factor).sum(axis=1)
        return replace(
            self, counts=counts, bin_width_ps=self.bin_width_ps * factor
        )


def _validate_sorted(stream: TimestampStream) -> np.ndarray:
    t = stream.times_ps
    if t.size and np.any(np.diff(t) < 0):
        raise ValueError(f"stream {stream.channel} is not sorted")
    return t.astype(np.int64)


def correlate_streams(
    start: TimestampStream,
    stop: TimestampStream,
    bin_width_ps: float,
    window_ps: tuple[float, float] = (-50_000_000, 50_000_000),
    exclude_self_pairs: bool = False,
) -> CorrelationHistogram:
    """Histogram of lags (stop - start) over all pairs within the window.

    ``exclude_self_pairs`` removes the index-diagonal when correlating a
    stream with itself (same channel identity); distinct events landing on
    the same tick still count.
    """
    tau_min, tau_max = window_ps
    if tau_max <= tau_min:
        raise ValueError("window must have positive width")
    n_bins = (tau_max - tau_min) / bin_width_ps
    if abs(n_bins - round(n_bins)) > 1e-9:
        raise ValueError("window span must be divisible by bin width")
    n_bins = round(n_bins)

    s = _validate_sorted(start)
    t = _validate_sorted(stop)
    counts = np.zeros(n_bins, dtype=np.int64)
    total = 0
    if s.size and t.size:
        lo = np.searchsorted(t, s + tau_min, side="left")
        hi = np.searchsorted(t, s + tau_max, side="left")
        per_start = hi - lo
        # chunk the pair expansion to bound memory
        boundaries = [0]
        acc = 0
        for i, c in enumerate(per_start):
            acc += int(c)
            if acc >= _PAIR_CHUNK:
                boundaries.append(i + 1)
                acc = 0
        if boundaries[-1] != s.size:
            boundaries.append(s.size)
        for a, b in zip(boundaries[:-1], boundaries[1:]):
            n_pairs = int(per_start[a:b].sum())
            if n_pairs == 0:
                continue
            # flat indices of every stop event paired with each start in [a, b)
            offsets = np.repeat(
                lo[a:b] - np.concatenate(([0], np.cumsum(per_start[a:b])[:-1])),
                per_start[a:b],
            )
            flat = offsets + np.arange(n_pairs)
            lags = t[flat] - np.repeat(s[a:b], per_start[a:b])
            bins = ((lags - tau_min) // bin_width_ps).astype(np.int64)
            counts += np.bincount(bins, minlength=n_bins)
            total += n_pairs

    same_identity = start.channel == stop.channel and s.size == t.size and np.array_equal(s, t)
    if exclude_self_pairs and same_identity and tau_min <= 0 < tau_max:
        zero_bin = int((0 - tau_min) // bin_width_ps)
        counts[zero_bin] -= s.size
        total -= s.size

    return CorrelationHistogram(
        config=f"{start.channel}-{stop.channel}",
        bin_width_ps=float(bin_width_ps),
        tau_min_ps=float(tau_min),
        tau_max_ps=float(tau_max),
        counts=counts,
        total_pairs=total,
    )


def extract_window(
    h: CorrelationHistogram, center_ps: float, width_ps: float
) -> CorrelationHistogram:
    """Exact sub-histogram covering [center - width/2, center + width/2)."""
    if width_ps <= 0:
        raise ValueError("window width must be positive")
    lo = center_ps - width_ps / 2.0
    hi = center_ps + width_ps / 2.0
    if lo < h.tau_min_ps or hi > h.tau_max_ps:
        raise ValueError(
            f"window [{lo}, {hi}) outside histogram span "
            f"[{h.tau_min_ps}, {h.tau_max_ps})"
        )
    i0 = int(round((lo - h.tau_min_ps) / h.bin_width_ps))
    i1 = int(round((hi - h.tau_min_ps) / h.bin_width_ps))
    i1 = max(i1, i0 + 1)
    return replace(
        h,
        counts=h.counts[i0:i1].copy(),
        tau_min_ps=h.tau_min_ps + i0 * h.bin_width_ps,
        tau_max_ps=h.tau_min_ps + i1 * h.bin_width_ps,
        total_pairs=int(h.counts[i0:i1].sum()),
    )


def g2_pulsed(
    h: CorrelationHistogram, rep_period_ps: float, min_side_peaks: int = 20
) -> tuple[float, float]:
    """Pulsed g2(0): central-peak area over the mean side-peak area.

    Integrates one repetition period around each comb position; returns the
    estimate with its Poisson standard error.
    """
    half_span = min(-h.tau_min_ps, h.tau_max_ps)
    k_max = int(half_span // rep_period_ps + 0.5) - 1
    if 2 * k_max < min_side_peaks:
        raise ValueError(
            f"histogram spans only {2 * k_max} side peaks, need {min_side_peaks}"
        )

    def peak_area(k: int) -> float:
        w = extract_window(h, center_ps=k * rep_period_ps, width_ps=rep_period_ps)
        return float(w.counts.sum())

    central = peak_area(0)
    side = np.array([peak_area(k) for k in range(-k_max, k_max + 1) if k != 0])
    side_mean = side.mean()
    if side_mean <= 0:
        raise ValueError("no coincidences in side peaks")
    g2 = central / side_mean
    # Poisson errors on the peak areas; var(mean side) = sum(side) / K^2
    var = max(central, 1.0) / side_mean**2
    var += central**2 * side.sum() / (side.size**2 * side_mean**4)
    return g2, math.sqrt(var)


def concatenate(h1: CorrelationHistogram, h2: CorrelationHistogram) -> CorrelationHistogram:
    """Sum histograms from disjoint-time acquisitions of the same axes."""
    for attr in ("bin_width_ps", "tau_min_ps", "tau_max_ps"):
        if getattr(h1, attr) != getattr(h2, attr):
            raise ValueError(f"histograms differ in {attr}")
    return replace(
        h1,
        counts=h1.counts + h2.counts,
        total_pairs=h1.total_pairs + h2.total_pairs,
    )

"""Repetition-period estimation and alignment of correlation datasets.

Pipeline: (1) coarse period from the FFT of the histogram comb, (2) period
refinement and time-zero location by cross-correlating side-peak windows at
the two ends of the span, (3) rebinning a second dataset onto the reference
time axis (count-conserving) and shifting it by the cross-correlation lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .correlate import CorrelationHistogram, extract_window


class AlignmentError(RuntimeError):
    pass


@dataclass
class RepRateEstimate:
    period_ps: float
    uncertainty_ps: float


@dataclass
class AlignmentResult:
    rep_period_a_ps: float
    rep_period_b_ps: float
    tau_zero_a_ps: float
    tau_zero_b_ps: float
    applied_shift_ps: float
    residual_lag_bins: int
    quality: float

    def to_dict(self) -> dict:
        return {
            "rep_period_a_ps": self.rep_period_a_ps,
            "rep_period_b_ps": self.rep_period_b_ps,
            "tau_zero_a_ps": self.tau_zero_a_ps,
            "tau_zero_b_ps": self.tau_zero_b_ps,
            "applied_shift_ps": self.applied_shift_ps,
            "residual_lag_bins": self.residual_lag_bins,
            "quality": self.quality,
        }


def _parabolic_refine(y: np.ndarray, i: int) -> float:
    """Sub-sample peak position from a parabola through (i-1, i, i+1)."""
    if i <= 0 or i >= y.size - 1:
        return float(i)
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom == 0:
        return float(i)
    return i + 0.5 * (y[i - 1] - y[i + 1]) / denom


def estimate_rep_rate(
    h: CorrelationHistogram,
    max_bin_ps: float = 1000.0,
    pad_factor: int = 4,
    min_peak_ratio: float = 5.0,
) -> RepRateEstimate:
    """Coarse repetition period from the comb line in the magnitude spectrum.

    The histogram is first rebinned to at most ``max_bin_ps`` (the comb
    fundamental sits far below the resulting Nyquist frequency), the spectrum
    is zero-padded, and the lowest-frequency comb line is refined by parabolic
    interpolation. The uncertainty reflects the FFT resolution 1/span.
    """
    work = h
    factor = 1
    while work.bin_width_ps * 2 <= max_bin_ps and work.n_bins % 2 == 0:
        work = work.rebinned(2)
        factor *= 2

    y = work.counts.astype(float)
    y -= y.mean()
    n = int(pad_factor * 2 ** math.ceil(math.log2(max(y.size, 2))))
    mag = np.abs(np.fft.rfft(y, n))
    d_ps = work.bin_width_ps
    freqs = np.fft.rfftfreq(n, d=d_ps)  # cycles per ps

    # ignore the near-DC region (below two cycles over the span)
    span_ps = h.tau_max_ps - h.tau_min_ps
    i_min = int(np.searchsorted(freqs, 2.0 / span_ps))
    peak_mag = mag[i_min:].max()
    noise = np.median(mag[i_min:])
    if noise <= 0 or peak_mag < min_peak_ratio * noise:
        raise AlignmentError("no comb line above the noise floor")

    # the comb fundamental: lowest local maximum comparable to the strongest
    threshold = 0.25 * peak_mag
    candidates = np.flatnonzero(
        (mag[1:-1] > threshold)
        & (mag[1:-1] >= mag[:-2])
        & (mag[1:-1] >= mag[2:])
    ) + 1
    candidates = candidates[candidates >= i_min]
    if candidates.size == 0:
        raise AlignmentError("no comb line above the noise floor")
    i = int(candidates[0])
    f0 = np.interp(_parabolic_refine(mag, i), np.arange(freqs.size), freqs)
    period = 1.0 / f0
    # frequency resolution of the unpadded span
    df = 1.0 / span_ps
    return RepRateEstimate(period_ps=period, uncertainty_ps=df / f0**2)


def _central_peak_ps(h: CorrelationHistogram) -> float:
    i = int(np.argmax(h.counts))
    return h.tau_min_ps + (_parabolic_refine(h.counts.astype(float), i) + 0.5) * h.bin_width_ps


def _window_xcorr_lag(
    w_ref: np.ndarray, w_mov: np.ndarray, ambiguity_ratio: float = 0.9
) -> tuple[float, float]:
    """Sub-bin lag (mov relative to ref) maximizing the cross-correlation."""
    a = w_ref.astype(float) - w_ref.mean()
    b = w_mov.astype(float) - w_mov.mean()
    xc = np.correlate(b, a, mode="full")
    i = int(np.argmax(xc))
    peak = xc[i]
    # ambiguity check: a second, well-separated candidate close to the max.
    # Exclude the whole main lobe (contiguous region above half the peak) so
    # broad peaks are not flagged against their own shoulders.
    others = xc.copy()
    lo_cut = i
    while lo_cut > 0 and xc[lo_cut - 1] > 0.5 * peak:
        lo_cut -= 1
    hi_cut = i
    while hi_cut < xc.size - 1 and xc[hi_cut + 1] > 0.5 * peak:
        hi_cut += 1
    others[max(0, lo_cut - 1) : hi_cut + 2] = -np.inf
    runner = others.max()
    if peak > 0 and runner > ambiguity_ratio * peak:
        j = int(np.argmax(others))
        raise AlignmentError(
            f"ambiguous cross-correlation: lags {i - (a.size - 1)} and "
            f"{j - (a.size - 1)} within {100 * (1 - ambiguity_ratio):.0f}% of max"
        )
    return _parabolic_refine(xc, i) - (a.size - 1), float(peak)


def refine_rep_rate(
    h: CorrelationHistogram, coarse: RepRateEstimate | float
) -> tuple[RepRateEstimate, float]:
    """Refine the period from end-of-span side peaks; locate time zero.

    Returns the refined estimate and the time-zero position [ps]. The
    refinement is iterated with increasing side-peak separation so that the
    accumulated period error never exceeds half a period per step.
    """
    period = coarse.period_ps if isinstance(coarse, RepRateEstimate) else float(coarse)
    sigma = (
        coarse.uncertainty_ps
        if isinstance(coarse, RepRateEstimate)
        else period * 1e-4
    )
    tau0 = _central_peak_ps(h)
    quality = 0.0

    while True:
        k_pos = int((h.tau_max_ps - tau0 - period) // period)
        k_neg = int((tau0 - h.tau_min_ps - period) // period)
        if k_pos < 1 or k_neg < 1:
            raise AlignmentError("histogram span too short for side-peak windows")
        # keep the possible drift across the separation below half a period
        limit = max(1, int(0.2 * period / max(3.0 * sigma, 1e-6)))
        k_pos_use = min(k_pos, limit)
        k_neg_use = min(k_neg, limit)
        w_neg = extract_window(h, tau0 - k_neg_use * period, period)
        w_pos = extract_window(h, tau0 + k_pos_use * period, period)
        if w_neg.counts.sum() == 0 or w_pos.counts.sum() == 0:
            raise AlignmentError("empty side-peak window")
        # positive lag: the late window trails the early one, period too small
        lag_bins, quality = _window_xcorr_lag(w_neg.counts, w_pos.counts)
        period += lag_bins * h.bin_width_ps / (k_pos_use + k_neg_use)
        sigma = h.bin_width_ps / (k_pos_use + k_neg_use)
        if k_pos_use == k_pos and k_neg_use == k_neg:
            break

    # time zero: sub-bin position of the central peak
    tau0 = _central_peak_ps(h)
    est = RepRateEstimate(period_ps=period, uncertainty_ps=sigma)
    return est, tau0


def rebin_onto(
    h_mov: CorrelationHistogram,
    h_ref: CorrelationHistogram,
    scale: float,
    shift_ps: float = 0.0,
    anchor_ps: float = 0.0,
) -> CorrelationHistogram:
    """Resample ``h_mov`` onto ``h_ref``'s axis under t -> anchor + scale*(t-anchor) + shift.

    Count-conserving linear redistribution: the cumulative count function is
    interpolated at the mapped reference bin edges.
    """
    cum = np.concatenate(([0.0], np.cumsum(h_mov.counts.astype(float))))
    mov_edges = h_mov.bin_edges()
    ref_edges = h_ref.bin_edges()
    # invert the map to find which original time lands on each ref edge
    src = anchor_ps + (ref_edges - shift_ps - anchor_ps) / scale
    cum_at = np.interp(src, mov_edges, cum, left=0.0, right=cum[-1])
    counts = np.diff(cum_at)
    return replace(
        h_ref,
        config=h_mov.config,
        counts=counts,
        total_pairs=h_mov.total_pairs,
    )


def apply_alignment(
    h_mov: CorrelationHistogram,
    h_ref: CorrelationHistogram,
    result: AlignmentResult,
) -> CorrelationHistogram:
    """Apply a previously computed alignment to another histogram.

    Intended for sibling histograms recorded on the same clock as the one
    that produced ``result`` (e.g. align the AB histogram, then bring the AA
    histogram from the same run onto the reference axis with the identical
    transform, preserving their relative timing).
    """
    scale = result.rep_period_a_ps / result.rep_period_b_ps
    return rebin_onto(
        h_mov,
        h_ref,
        scale,
        shift_ps=result.applied_shift_ps,
        anchor_ps=result.tau_zero_b_ps,
    )


def align_datasets(
    h_ref: CorrelationHistogram,
    h_mov: CorrelationHistogram,
    n_shift_windows: int = 8,
) -> tuple[AlignmentResult, CorrelationHistogram]:
    """Bring ``h_mov`` onto ``h_ref``'s time axis.

    Each dataset's period is refined independently; ``h_mov`` is rescaled by
    the period ratio about its time zero, then shifted by the lag that
    maximizes the summed cross-correlation over side-peak windows spread
    across the span (sub-bin, via parabolic interpolation).
    """
    est_ref, tau0_ref = refine_rep_rate(h_ref, estimate_rep_rate(h_ref))
    est_mov, tau0_mov = refine_rep_rate(h_mov, estimate_rep_rate(h_mov))
    scale = est_ref.period_ps / est_mov.period_ps

    # initial shift estimate: match the time-zero peaks
    shift0 = tau0_ref - tau0_mov
    resampled = rebin_onto(h_mov, h_ref, scale, shift_ps=shift0, anchor_ps=tau0_mov)

    period = est_ref.period_ps
    k_max = int((min(-h_ref.tau_min_ps + tau0_ref, h_ref.tau_max_ps - tau0_ref) - period) // period)
    if k_max < 1:
        raise AlignmentError("histogram span too short for alignment windows")
    ks = np.unique(
        np.round(np.linspace(-k_max, k_max, n_shift_windows)).astype(int)
    )
    ks = ks[ks != 0]
    # fixed window length so the per-window correlations share a lag axis
    m = int(period // h_ref.bin_width_ps) - 1
    xc_sum = None
    for k in ks:
        center = tau0_ref + k * period
        w_ref = extract_window(h_ref, center, period)
        w_mov = extract_window(resampled, center, period)
        a = w_ref.counts.astype(float)[:m]
        b = w_mov.counts.astype(float)[:m]
        xc = np.correlate(b - b.mean(), a - a.mean(), mode="full")
        xc_sum = xc if xc_sum is None else xc_sum + xc
    i = int(np.argmax(xc_sum))
    lag_bins = _parabolic_refine(xc_sum, i) - (xc_sum.size - 1) // 2
    fine_shift = -lag_bins * h_ref.bin_width_ps
    total_shift = shift0 + fine_shift

    aligned = rebin_onto(
        h_mov, h_ref, scale, shift_ps=total_shift, anchor_ps=tau0_mov
    )

    # residual check on one extreme side peak
    center = tau0_ref + k_max * period
    w_ref = extract_window(h_ref, center, period)
    w_al = extract_window(aligned, center, period)
    res_lag, quality = _window_xcorr_lag(w_ref.counts, w_al.counts)
    result = AlignmentResult(
        rep_period_a_ps=est_ref.period_ps,
        rep_period_b_ps=est_mov.period_ps,
        tau_zero_a_ps=tau0_ref,
        tau_zero_b_ps=tau0_mov,
        applied_shift_ps=total_shift,
        residual_lag_bins=int(round(res_lag)),
        quality=quality,
    )
    return result, aligned

"""Two-stage weighted least-squares fit of the correlation model.

Stage 1 fits the different-port histogram (phase fixed at zero) for the
amplitude, splitting frequency, time zero and jitter width; stage 2 pins
those and fits the same-port histogram for the chiral phase (and an
independent amplitude). The jitter convolution of the exponential-cosine
model is evaluated in closed form through the Faddeeva function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .correlate import CorrelationHistogram
from .params import PortPair

SQRT2 = math.sqrt(2.0)

#: beyond this |erfc argument| the closed form switches to brute-force
#: convolution (never reached for physical parameters; kept as a guard)
_ERFC_ARG_LIMIT = 25.0


class FitError(RuntimeError):
    pass


@dataclass
class FitResult:
    """Best-fit values with 1-sigma confidence intervals."""

    values: dict[str, float]
    stderr: dict[str, float]
    fixed: dict[str, float]
    redchi: float
    covariance: np.ndarray
    converged: bool
    config: str = ""
    at_bound: list[str] = field(default_factory=list)
    fallback_convolution: bool = False

    def to_dict(self) -> dict:
        return {
            "values": self.values,
            "stderr": self.stderr,
            "fixed": self.fixed,
            "redchi": self.redchi,
            "covariance": self.covariance.tolist(),
            "converged": self.converged,
            "config": self.config,
            "at_bound": self.at_bound,
        }


def _smeared_exponential(t: np.ndarray, z: complex, sigma: float) -> np.ndarray:
    """Convolution of exp(-z t) for t >= 0 with a unit-area Gaussian of width sigma.

    Two algebraically identical forms are used, picked per point for numeric
    stability of the Faddeeva evaluation.
    """
    if sigma == 0.0:
        return np.where(t >= 0, np.exp(-z * np.maximum(t, 0.0)), 0.0)
    w = (sigma * z - t / sigma) / SQRT2
    out = np.empty_like(t, dtype=complex)
    stable = w.real >= 0  # wofz is accurate in the upper half-plane
    out[stable] = 0.5 * np.exp(-(t[stable] ** 2) / (2.0 * sigma**2)) * special.wofz(
        1j * w[stable]
    )
    rest = ~stable
    out[rest] = 0.5 * np.exp(0.5 * (sigma * z) ** 2 - z * t[rest]) * special.erfc(
        w[rest]
    )
    return out


def _needs_fallback(t: np.ndarray, z: complex, sigma: float) -> bool:
    # the erfc branch overflows once the oscillatory part of the argument,
    # sigma*|Im z|/sqrt(2), grows large; physical parameters stay far below
    if sigma == 0.0:
        return False
    return sigma * abs(z.imag) / SQRT2 > _ERFC_ARG_LIMIT


def _numeric_convolution(
    t: np.ndarray, gamma: float, s: float, shift: float, sigma: float,
    step: float = 2.5e-5,
) -> np.ndarray:
    """Brute-force Gaussian convolution of the truncated model on a fine grid."""
    lo = min(t.min() - 8 * sigma, 0.0)
    hi = t.max() + 8 * sigma
    # grid aligned so the truncation point tau=0 is exactly a sample
    grid = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1) * step
    f = np.where(
        grid >= 0, np.exp(-gamma * grid) * (1.0 + np.cos(s * grid + shift)), 0.0
    )
    # trapezoid weight at the truncation edge; the step discontinuity
    # otherwise dominates the quadrature error
    edge = int(np.argmin(np.abs(grid)))
    if abs(grid[edge]) < 0.5 * step:
        f[edge] *= 0.5
    half = int(math.ceil(8 * sigma / step))
    kg = np.arange(-half, half + 1) * step
    kernel = np.exp(-(kg**2) / (2 * sigma**2))
    kernel /= kernel.sum()
    from scipy.signal import fftconvolve

    smooth = fftconvolve(f, kernel, mode="same")
    return np.interp(t, grid, smooth)


def model_curve(
    tau_ns,
    amplitude: float,
    gamma_x: float,
    fss: float,
    phi: float,
    tau0: float,
    sigma: float,
    config: PortPair,
    force_numeric: bool = False,
) -> np.ndarray:
    """Jitter-convolved coincidence model on a grid of delays [ns].

    amplitude * [Gaussian(sigma) conv P_config](tau - tau0), where P_config is
    the exponential-cosine density truncated at tau0. The Gaussian has unit
    area, so amplitude carries the counts-per-ns scale.
    """
    if gamma_x <= 0:
        raise ValueError("gamma_x must be positive")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    tau = np.asarray(tau_ns, dtype=float)
    t = tau - tau0
    config = PortPair(config)
    shift = {PortPair.AA: 2.0 * phi, PortPair.BB: -2.0 * phi}.get(config, 0.0)
    z_osc = gamma_x - 1j * fss
    if force_numeric or _needs_fallback(t, z_osc, sigma):
        body = _numeric_convolution(t, gamma_x, fss, shift, sigma)
    else:
        base = _smeared_exponential(t, complex(gamma_x), sigma).real
        osc = (np.exp(1j * shift) * _smeared_exponential(t, z_osc, sigma)).real
        body = base + osc
    out = amplitude * 4.0 * gamma_x**2 * body
    return out if out.ndim else float(out)


def _histogram_window(
    h: CorrelationHistogram, tau0_ns: float, gamma_x: float, sigma_ns: float
) -> tuple[np.ndarray, np.ndarray]:
    """Bin centers [ns] and counts of the cascade fit window.

    Window: tau0 - 3 sigma to tau0 + 6/gamma (captures essentially all of the
    cascade signal, excludes side peaks).
    """
    centers_ns = h.bin_centers() * 1e-3
    lo = tau0_ns - 3.0 * sigma_ns
    hi = tau0_ns + 6.0 / gamma_x
    sel = (centers_ns >= lo) & (centers_ns < hi)
    if sel.sum() < 8:
        raise FitError("fit window contains too few bins")
    return centers_ns[sel], h.counts[sel].astype(float)


#: search band for the splitting guess [GHz]; presets span 5-20 GHz
_FSS_BAND_GHZ = (2.0, 45.0)


def _fss_candidates(
    tt: np.ndarray, yy: np.ndarray, n_candidates: int = 3
) -> list[float]:
    """Matched-filter scan for the oscillation frequency [rad/ns].

    The counts are whitened against a moving-average envelope (removing the
    exponential decay without amplifying late-time noise) and projected on
    complex exponentials over the physical splitting band; well-separated
    local maxima are returned strongest first.
    """
    k = max(5, yy.size // 10)
    env = np.convolve(yy, np.ones(k) / k, mode="same")
    w = (yy / np.maximum(env, 1.0) - 1.0) * np.hanning(yy.size)
    span = tt[-1] - tt[0]
    step_ghz = 0.25 / span
    freqs = np.arange(_FSS_BAND_GHZ[0], _FSS_BAND_GHZ[1], step_ghz)
    s_grid = 2.0 * math.pi * freqs
    amp = np.abs(np.exp(1j * np.outer(s_grid, tt)) @ w)
    peaks = np.flatnonzero(
        (amp[1:-1] >= amp[:-2]) & (amp[1:-1] >= amp[2:])
    ) + 1
    peaks = peaks[np.argsort(amp[peaks])[::-1]]
    out: list[float] = []
    # keep candidates at least one spectral resolution element apart
    min_gap = 2.0 * math.pi * 1.0 / span
    for i in peaks:
        s = s_grid[int(i)]
        if all(abs(s - prev) > min_gap for prev in out):
            out.append(float(s))
        if len(out) == n_candidates:
            break
    if not out:
        raise FitError("no oscillation candidate found in the splitting band")
    return out


def _initial_guesses(h: CorrelationHistogram, gamma_x: float) -> dict:
    centers_ns = h.bin_centers() * 1e-3
    i = int(np.argmax(h.counts))
    tau0 = centers_ns[i]
    sigma0 = 0.02
    t, y = _histogram_window(h, tau0, gamma_x, sigma0)
    sel = t > tau0 + 3.0 * sigma0
    if sel.sum() < 8:
        raise FitError("too few bins after the peak for a splitting guess")
    candidates = _fss_candidates(t[sel], y[sel])
    bin_ns = h.bin_width_ps * 1e-3
    amp0 = float(h.counts[i]) / (8.0 * gamma_x**2 * bin_ns)
    return {
        "amplitude": amp0,
        "fss": candidates[0],
        "fss_candidates": candidates,
        "tau0": tau0,
        "sigma": sigma0,
    }


def _run_least_squares(
    t: np.ndarray,
    y: np.ndarray,
    bin_ns: float,
    predict,
    x0: np.ndarray,
    bounds: tuple,
    names: list[str],
) -> tuple[optimize.OptimizeResult, np.ndarray, float]:
    weights = 1.0 / np.sqrt(np.maximum(y, 1.0))

    def residuals(x):
        return (predict(x) * bin_ns - y) * weights

    res = optimize.least_squares(
        residuals, x0, bounds=bounds, method="trf", xtol=1e-12, ftol=1e-10,
        gtol=1e-12, max_nfev=2000,
    )
    dof = max(t.size - len(names), 1)
    redchi = 2.0 * res.cost / dof
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.full((len(names), len(names)), np.nan)
    return res, cov, redchi


def _flag_bounds(x, bounds, names, rel=1e-6) -> list[str]:
    lo, hi = bounds
    out = []
    for i, name in enumerate(names):
        span = hi[i] - lo[i]
        if math.isfinite(span) and (
            x[i] - lo[i] < rel * span or hi[i] - x[i] < rel * span
        ):
            out.append(name)
        elif not math.isfinite(span) and x[i] == lo[i]:
            out.append(name)
    return out


def fit_stage1(h_ab: CorrelationHistogram, gamma_x: float) -> FitResult:
    """Fit the different-port histogram with the phase fixed at zero.

    Free parameters: amplitude, splitting, time zero, jitter width. Poisson
    weights with a unit floor for empty bins.
    """
    guess = _initial_guesses(h_ab, gamma_x)
    t, y = _histogram_window(h_ab, guess["tau0"], gamma_x, guess["sigma"])
    bin_ns = h_ab.bin_width_ps * 1e-3
    names = ["amplitude", "fss", "tau0", "sigma"]

    # multi-start over the splitting candidates; keep the best chi-square
    best = None
    for s0 in guess["fss_candidates"]:
        x0 = np.array([guess["amplitude"], s0, guess["tau0"], guess["sigma"]])
        period0 = 2 * math.pi / s0
        bounds_c = (
            [0.0, s0 * 0.7, guess["tau0"] - period0, 1e-4],
            [np.inf, s0 * 1.3, guess["tau0"] + period0, 0.2],
        )

        def predict(x):
            return model_curve(
                t, amplitude=x[0], gamma_x=gamma_x, fss=x[1], phi=0.0,
                tau0=x[2], sigma=x[3], config=PortPair.AB,
            )

        res_c, cov_c, redchi_c = _run_least_squares(
            t, y, bin_ns, predict, x0, bounds_c, names
        )
        if res_c.success and (best is None or redchi_c < best[2]):
            best = (res_c, cov_c, redchi_c, bounds_c)
    if best is None:
        raise FitError("stage-1 fit did not converge for any splitting candidate")
    res, cov, redchi, bounds = best
    stderr = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(
        values=dict(zip(names, map(float, res.x))),
        stderr=dict(zip(names, map(float, stderr))),
        fixed={"gamma_x": gamma_x, "phi": 0.0},
        redchi=redchi,
        covariance=cov,
        converged=bool(res.success),
        config=h_ab.config,
        at_bound=_flag_bounds(res.x, bounds, names),
    )


def fit_stage2(
    h_aa: CorrelationHistogram, stage1: FitResult, gamma_x: float
) -> FitResult:
    """Fit the same-port histogram for the chiral phase.

    Splitting, time zero and jitter width are pinned from stage 1; the
    amplitude is freed because the two acquisitions have independent
    collection efficiencies. The phase is bounded to [0, pi/2] (sign and
    branch are not identifiable from a single same-port configuration).
    """
    if not stage1.converged:
        raise FitError("stage-1 result did not converge")
    s = stage1.values["fss"]
    tau0 = stage1.values["tau0"]
    sigma = stage1.values["sigma"]
    t, y = _histogram_window(h_aa, tau0, gamma_x, sigma)
    bin_ns = h_aa.bin_width_ps * 1e-3
    names = ["phi", "amplitude"]
    amp0 = max(float(h_aa.counts.max()) / (8.0 * gamma_x**2 * bin_ns), 1e-12)
    x0 = np.array([0.25 * math.pi, amp0])
    bounds = ([0.0, 0.0], [math.pi / 2.0, np.inf])

    def predict(x):
        return model_curve(
            t, amplitude=x[1], gamma_x=gamma_x, fss=s, phi=x[0],
            tau0=tau0, sigma=sigma, config=PortPair.AA,
        )

    res, cov, redchi = _run_least_squares(t, y, bin_ns, predict, x0, bounds, names)
    if not res.success:
        raise FitError(f"stage-2 fit did not converge: {res.message}")
    stderr = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(
        values=dict(zip(names, map(float, res.x))),
        stderr=dict(zip(names, map(float, stderr))),
        fixed={"gamma_x": gamma_x, "fss": s, "tau0": tau0, "sigma": sigma},
        redchi=redchi,
        covariance=cov,
        converged=bool(res.success),
        config=h_aa.config,
        at_bound=_flag_bounds(res.x, bounds, names),
    )


def overlay_table(
    h: CorrelationHistogram, result: FitResult, gamma_x: float
) -> np.ndarray:
    """(tau_ps, data, model) rows over the fitted window, for plotting."""
    p = {**result.fixed, **result.values}
    config = PortPair.AA if "phi" in result.values else PortPair.AB
    t, y = _histogram_window(h, p["tau0"], gamma_x, p["sigma"])
    bin_ns = h.bin_width_ps * 1e-3
    model = model_curve(
        t, amplitude=p["amplitude"], gamma_x=gamma_x, fss=p["fss"],
        phi=p.get("phi", 0.0), tau0=p["tau0"], sigma=p["sigma"], config=config,
    ) * bin_ns
    return np.column_stack([t * 1e3, y, model])

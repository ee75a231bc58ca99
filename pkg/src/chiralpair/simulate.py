"""Monte Carlo generation of synthetic detector timestamp streams.

Emulates a pulsed cascade experiment: per laser pulse a photon pair may be
produced, its delay and port pair are drawn from the model's joint statistics,
and instrument effects (finite detection efficiency, Gaussian timing jitter
per detection, dark counts, slow repetition-period drift, 4 ps time-tagger
quantization) are applied. Detector dead time is not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import coincidence_probability, total_coincidence_probability
from .params import TICK_PS, EmitterParams, InstrumentParams, PortPair

#: Channel labels: transition @ collection port.
CHANNELS = ("XX@A", "XX@B", "X@A", "X@B")

_REJECTION_STALL = 10**6

#: Pulses are generated in fixed-size chunks, each with its own spawned RNG
#: substream, so results do not depend on how generation is batched.
_CHUNK_PULSES = 1 << 20


class RejectionStallError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimestampStream:
    """Sorted detection times of one channel, in integer 4 ps ticks."""

    channel: str
    times: np.ndarray
    duration_ps: int
    tick_ps: int = TICK_PS

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.uint64)
        if t.size and np.any(np.diff(t.astype(np.int64)) < 0):
            raise ValueError("timestamps must be sorted non-decreasing")
        if t.size and int(t[-1]) * self.tick_ps > self.duration_ps:
            raise ValueError("timestamp beyond acquisition duration")
        object.__setattr__(self, "times", t)

    @property
    def times_ps(self) -> np.ndarray:
        return self.times.astype(np.int64) * self.tick_ps

    def shifted(self, offset_ps: float) -> "TimestampStream":
        """Shift all times by an optical-path offset, dropping out-of-range hits."""
        t = self.times_ps + offset_ps
        t = t[(t >= 0) & (t <= self.duration_ps)]
        ticks = np.sort(np.round(t / self.tick_ps).astype(np.uint64))
        return replace(self, times=ticks)


def _quantize(times_ns: np.ndarray, duration_ps: int) -> np.ndarray:
    t_ps = times_ns * 1e3
    t_ps = t_ps[(t_ps >= 0) & (t_ps <= duration_ps)]
    ticks = np.round(t_ps / TICK_PS).astype(np.uint64)
    ticks.sort()
    return ticks


def _pulse_times_ns(p: EmitterParams, inst: InstrumentParams, k: np.ndarray) -> np.ndarray:
    """Nominal pulse times, with an optional slow linear period drift."""
    t0 = p.rep_period * k
    d = inst.rep_rate_drift
    if d == 0.0:
        return t0
    # dt/dk = P0 (1 + d * t[s]); exact solution of the linear drift law
    return (1e9 / d) * np.expm1(d * t0 / 1e9)


def _sample_delays(
    p: EmitterParams, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw delays from the normalized total coincidence density by rejection.

    Proposal: Exp(gamma_x). The acceptance ratio is
    (4 + 2 cos(S tau)(1 + cos 2 phi)) / (4 + 2 (1 + cos 2 phi)) <= 1.
    """
    ceiling = 4.0 + 2.0 * (1.0 + math.cos(2.0 * p.phi))
    out = np.empty(n)
    pending = np.arange(n)
    stall = 0
    while pending.size:
        tau = rng.exponential(1.0 / p.gamma_x, size=pending.size)
        ratio = (
            4.0 + 2.0 * np.cos(p.fss * tau) * (1.0 + math.cos(2.0 * p.phi))
        ) / ceiling
        assert ratio.max() <= 1.0 + 1e-12, "rejection envelope violated"
        accept = rng.random(pending.size) < ratio
        out[pending[accept]] = tau[accept]
        pending = pending[~accept]
        stall = 0 if accept.any() else stall + pending.size
        if stall > _REJECTION_STALL:
            raise RejectionStallError(
                f"{stall} consecutive rejections; ceiling={ceiling}, "
                f"params={p}"
            )
    return out


def _sample_ports(
    p: EmitterParams, tau: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Categorical port-pair index (AA, AB, BA, BB) conditioned on the delay."""
    weights = np.stack(
        [coincidence_probability(p, tau, c) for c in PortPair]
    )  # (4, n)
    cdf = np.cumsum(weights, axis=0)
    u = rng.random(tau.size) * cdf[-1]
    return (u[None, :] >= cdf).sum(axis=0)


def _detect(
    emission_ns: np.ndarray,
    efficiency: float,
    jitter_sigma_ns: float,
    rng: np.random.Generator,
) -> np.ndarray:
    kept = emission_ns[rng.random(emission_ns.size) < efficiency]
    if jitter_sigma_ns > 0 and kept.size:
        kept = kept + rng.normal(0.0, jitter_sigma_ns, size=kept.size)
    return kept


def _dark_counts(
    rate_per_ns: float, duration_ns: float, rng: np.random.Generator
) -> np.ndarray:
    if rate_per_ns <= 0:
        return np.empty(0)
    n = rng.poisson(rate_per_ns * duration_ns)
    return rng.uniform(0.0, duration_ns, size=n)


def simulate_run(
    p: EmitterParams, inst: InstrumentParams
) -> dict[str, TimestampStream]:
    """Simulate one acquisition; returns the four channel streams.

    Deterministic for fixed seed and parameters.
    """
    duration_ns = inst.duration * 1e9
    duration_ps = int(duration_ns * 1e3)
    n_pulses = int(duration_ns // p.rep_period)
    if n_pulses < 1:
        raise ValueError("duration shorter than one repetition period")

    root = np.random.SeedSequence(inst.seed)
    n_chunks = (n_pulses + _CHUNK_PULSES - 1) // _CHUNK_PULSES
    children = root.spawn(n_chunks + 1)
    parts: dict[str, list[np.ndarray]] = {c: [] for c in CHANNELS}

    for i in range(n_chunks):
        rng = np.random.default_rng(children[i])
        k = np.arange(
            i * _CHUNK_PULSES, min((i + 1) * _CHUNK_PULSES, n_pulses), dtype=float
        )
        t_pulse = _pulse_times_ns(p, inst, k)
        excited = rng.random(k.size) < inst.pair_probability
        t_pulse = t_pulse[excited]
        n = t_pulse.size
        if n == 0:
            continue
        t_xx = t_pulse + rng.exponential(1.0 / p.gamma_xx, size=n)
        tau = _sample_delays(p, n, rng)
        t_x = t_xx + tau
        ports = _sample_ports(p, tau, rng)
        port_label = np.array(["AA", "AB", "BA", "BB"])[ports]
        for channel in CHANNELS:
            transition, port = channel.split("@")
            if transition == "XX":
                sel = np.char.startswith(port_label, port)
                emitted = t_xx[sel]
            else:
                sel = np.char.endswith(port_label, port)
                emitted = t_x[sel]
            eff = inst.efficiency(transition, port)
            parts[channel].append(_detect(emitted, eff, p.jitter_sigma, rng))

    dark_rng = np.random.default_rng(children[-1])
    streams = {}
    for channel in CHANNELS:
        times = np.concatenate(parts[channel]) if parts[channel] else np.empty(0)
        dark = _dark_counts(inst.dark_rate, duration_ns, dark_rng)
        all_times = np.concatenate([times, dark])
        streams[channel] = TimestampStream(
            channel=channel,
            times=_quantize(all_times, duration_ps),
            duration_ps=duration_ps,
        )
    return streams


def contamination_for_g2(target_g2: float, pair_probability: float) -> float:
    """Multi-photon probability per excited pulse giving a target pulsed g2(0).

    For a source emitting one photon per excited pulse plus an extra with
    probability eps, the pulsed estimator converges to
    g2(0) = 2 eps / (p (1 + eps)^2); this returns the small root in eps.
    """
    g = target_g2 * pair_probability
    if g <= 0:
        return 0.0
    if g >= 1.0:
        raise ValueError("target g2(0) unattainably large for this pair probability")
    disc = (2.0 - 2.0 * g) ** 2 - 4.0 * g * g
    return ((2.0 - 2.0 * g) - math.sqrt(disc)) / (2.0 * g)


def simulate_g2_single(
    transition: str,
    p: EmitterParams,
    inst: InstrumentParams,
    multi_photon_prob: float = 0.0,
) -> tuple[TimestampStream, TimestampStream]:
    """Simulate one transition's emission routed through a 50:50 splitter.

    An ideal source emits at most one photon per pulse; ``multi_photon_prob``
    adds an independent second photon per excited pulse for g2(0) > 0 studies.
    Uses the channel-A efficiency of the chosen transition for both detectors.
    """
    transition = transition.upper()
    if transition not in ("X", "XX"):
        raise ValueError(f"transition must be 'X' or 'XX', got {transition!r}")
    if not 0.0 <= multi_photon_prob < 1.0:
        raise ValueError("multi_photon_prob must be in [0, 1)")

    duration_ns = inst.duration * 1e9
    duration_ps = int(duration_ns * 1e3)
    n_pulses = int(duration_ns // p.rep_period)
    if n_pulses < 1:
        raise ValueError("duration shorter than one repetition period")

    eff = inst.efficiency(transition, "A")

    def emission_times(t_pulse: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        t = t_pulse + rng.exponential(1.0 / p.gamma_xx, size=t_pulse.size)
        if transition == "X":
            t = t + rng.exponential(1.0 / p.gamma_x, size=t_pulse.size)
        return t

    root = np.random.SeedSequence(inst.seed)
    n_chunks = (n_pulses + _CHUNK_PULSES - 1) // _CHUNK_PULSES
    children = root.spawn(n_chunks + 1)
    arms: list[list[np.ndarray]] = [[], []]

    for i in range(n_chunks):
        rng = np.random.default_rng(children[i])
        k = np.arange(
            i * _CHUNK_PULSES, min((i + 1) * _CHUNK_PULSES, n_pulses), dtype=float
        )
        t_pulse = _pulse_times_ns(p, inst, k)
        excited = rng.random(k.size) < inst.pair_probability
        t_pulse = t_pulse[excited]
        photons = [emission_times(t_pulse, rng)]
        extra = t_pulse[rng.random(t_pulse.size) < multi_photon_prob]
        if extra.size:
            photons.append(emission_times(extra, rng))
        times = np.concatenate(photons)
        arm = rng.random(times.size) < 0.5
        for j, sel in enumerate((arm, ~arm)):
            arms[j].append(_detect(times[sel], eff, p.jitter_sigma, rng))

    dark_rng = np.random.default_rng(children[-1])
    out = []
    for j in range(2):
        times = np.concatenate(arms[j]) if arms[j] else np.empty(0)
        dark = _dark_counts(inst.dark_rate, duration_ns, dark_rng)
        out.append(
            TimestampStream(
                channel=f"{transition}@split{j + 1}",
                times=_quantize(np.concatenate([times, dark]), duration_ps),
                duration_ps=duration_ps,
            )
        )
    return out[0], out[1]


def expected_coincidence_density(
    p: EmitterParams,
    inst: InstrumentParams,
    config: PortPair,
    tau_ns: np.ndarray,
    n_pulses: int,
) -> np.ndarray:
    """Expected coincidence counts per ns at the given signed delays.

    Analytic counterpart of simulate_run + correlate for the central peak:
    the per-pulse coincidence density in one port configuration, thinned by
    the two channel efficiencies and convolved with the per-detection jitter
    of both detectors (sqrt(2) * jitter_sigma on the delay axis).
    """
    from .fit import model_curve  # local import to avoid a cycle

    config = PortPair(config)
    # normalization of the joint (delay, ports) density
    z, _ = _total_density_norm(p)
    eff = inst.efficiency("XX", config.xx_port) * inst.efficiency("X", config.x_port)
    scale = n_pulses * inst.pair_probability * eff / z
    curve = model_curve(
        tau_ns,
        amplitude=scale,
        gamma_x=p.gamma_x,
        fss=p.fss,
        phi=p.phi,
        tau0=0.0,
        sigma=p.jitter_sigma * math.sqrt(2.0),
        config=config,
    )
    return curve


def _total_density_norm(p: EmitterParams) -> tuple[float, float]:
    """Integral over tau of the summed coincidence density, and its max."""
    g, s = p.gamma_x, p.fss
    c = 1.0 + math.cos(2.0 * p.phi)
    integral = 4.0 * g * g * (4.0 / g + 2.0 * c * g / (g * g + s * s))
    peak = 4.0 * g * g * (4.0 + 2.0 * c)
    return integral, peak

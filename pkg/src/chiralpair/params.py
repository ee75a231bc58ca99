"""Physical and instrument parameter containers, plus published device presets.

Unit conventions used throughout the package:

* time in nanoseconds (ns), except detector timestamps / histogram axes which
  are picoseconds (ps) on a 4 ps tick grid,
* decay rates in 1/ns,
* the fine-structure splitting and any other angular frequency in rad/ns
  (CLI-facing inputs take GHz for the splitting over 2*pi and convert).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

#: Time-tagger resolution; all timestamp streams are quantized to this.
TICK_PS = 4


def ghz_to_angular(f_ghz: float) -> float:
    """Convert a splitting quoted as frequency in GHz to rad/ns."""
    return TWO_PI * f_ghz


def angular_to_ghz(s: float) -> float:
    return s / TWO_PI


def wrap_phase(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    phi = math.fmod(phi, TWO_PI)
    if phi > math.pi:
        phi -= TWO_PI
    elif phi <= -math.pi:
        phi += TWO_PI
    return phi


class PortPair(str, enum.Enum):
    """Which waveguide port detected the first (cascade) and second photon."""

    AA = "AA"
    AB = "AB"
    BA = "BA"
    BB = "BB"

    @property
    def xx_port(self) -> str:
        return self.value[0]

    @property
    def x_port(self) -> str:
        return self.value[1]


PORT_PAIRS = (PortPair.AA, PortPair.AB, PortPair.BA, PortPair.BB)


@dataclass(frozen=True)
class EmitterParams:
    """Physical constants of one quantum dot in a waveguide.

    gamma_x      exciton radiative decay rate [1/ns]; the cascade's initial
                 level decays at 2*gamma_x (not stored separately).
    fss          fine-structure splitting as angular frequency [rad/ns]
    phi          chiral phase at the emitter position [rad], wrapped to (-pi, pi]
    jitter_sigma detector timing-jitter standard deviation [ns]
    rep_period   excitation-laser repetition period [ns]
    """

    gamma_x: float
    fss: float
    phi: float
    jitter_sigma: float = 0.0
    rep_period: float = 13.0

    def __post_init__(self):
        if not self.gamma_x > 0:
            raise ValueError(f"gamma_x must be positive, got {self.gamma_x}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if not self.rep_period > 0:
            raise ValueError(f"rep_period must be positive, got {self.rep_period}")
        object.__setattr__(self, "phi", wrap_phase(self.phi))

    @property
    def gamma_xx(self) -> float:
        """Cascade initial-level decay rate, fixed at twice the exciton rate."""
        return 2.0 * self.gamma_x

    def replace(self, **kw) -> "EmitterParams":
        d = {
            "gamma_x": self.gamma_x,
            "fss": self.fss,
            "phi": self.phi,
            "jitter_sigma": self.jitter_sigma,
            "rep_period": self.rep_period,
        }
        d.update(kw)
        return EmitterParams(**d)


@dataclass(frozen=True)
class InstrumentParams:
    """Detection-chain model for the Monte Carlo simulator.

    Efficiencies are per-channel detection probabilities (they absorb
    collection, spectral filtering and detector efficiency). ``dark_rate``
    is per channel in 1/ns. ``pair_probability`` is the probability that one
    laser pulse produces a cascade. ``rep_rate_drift`` is the fractional
    change of the repetition period per second of lab time (ppm-scale).
    ``duration`` is the acquisition time in seconds.
    """

    efficiency_xx_a: float = 0.2
    efficiency_xx_b: float = 0.2
    efficiency_x_a: float = 0.2
    efficiency_x_b: float = 0.2
    dark_rate: float = 0.0
    pair_probability: float = 0.5
    rep_rate_drift: float = 0.0
    duration: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("efficiency_xx_a", "efficiency_xx_b", "efficiency_x_a",
                     "efficiency_x_b", "pair_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.dark_rate < 0:
            raise ValueError("dark_rate must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    def efficiency(self, transition: str, port: str) -> float:
        return getattr(self, f"efficiency_{transition.lower()}_{port.lower()}")


# Published parameters of the measured dot (qd1). The qd2/qd3 presets carry
# placeholder splittings/phases: only qualitative descriptions were published
# (qd2: smaller splitting, qd3: larger), flagged via ``placeholder``.
REP_PERIOD_QD1_NS = 1e3 / 76.148  # 76.148 MHz repetition rate

PRESETS: dict[str, dict] = {
    "qd1": {
        "emitter": {
            "gamma_x": 8.35,
            "fss": ghz_to_angular(12.78),
            "phi": 0.12 * math.pi,
            "jitter_sigma": 0.015,
            "rep_period": REP_PERIOD_QD1_NS,
        },
        "placeholder": False,
    },
    "qd2": {
        "emitter": {
            "gamma_x": 8.35,
            "fss": ghz_to_angular(5.0),
            "phi": 0.10 * math.pi,
            "jitter_sigma": 0.015,
            "rep_period": REP_PERIOD_QD1_NS,
        },
        "placeholder": True,
    },
    "qd3": {
        "emitter": {
            "gamma_x": 8.35,
            "fss": ghz_to_angular(20.0),
            "phi": 0.10 * math.pi,
            "jitter_sigma": 0.015,
            "rep_period": REP_PERIOD_QD1_NS,
        },
        "placeholder": True,
    },
}


def preset_emitter(name: str) -> EmitterParams:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return EmitterParams(**spec["emitter"])

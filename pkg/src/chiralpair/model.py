"""Closed-form two-photon state of the cascaded decay in a chiral waveguide.

The emitted pair is described, as a function of the delay ``tau`` between the
two photons, by four complex amplitudes over the path basis
{AA, AB, BA, BB} (first letter: cascade photon port, second: second photon).
Everything here is an elementary function of the emitter parameters; the
amplitudes are deliberately kept unnormalized (the overall scale is not
observable) and an explicit norm is provided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import EmitterParams, PortPair

SQRT2 = np.sqrt(2.0)

#: Norms below this are treated as a degenerate (all-zero) state.
DEGENERATE_NORM = 1e-30


class DegenerateStateError(ValueError):
    """All four amplitudes vanished simultaneously; the state is undefined."""


@dataclass(frozen=True)
class TwoPhotonAmplitudes:
    """The four path amplitudes at one delay. Units of gamma_x (1/ns)."""

    psi_aa: complex
    psi_ab: complex
    psi_ba: complex
    psi_bb: complex
    tau: float

    def as_vector(self) -> np.ndarray:
        """Amplitudes as a length-4 vector ordered (AA, AB, BA, BB)."""
        return np.array([self.psi_aa, self.psi_ab, self.psi_ba, self.psi_bb])

    def __getitem__(self, config: PortPair) -> complex:
        return {
            PortPair.AA: self.psi_aa,
            PortPair.AB: self.psi_ab,
            PortPair.BA: self.psi_ba,
            PortPair.BB: self.psi_bb,
        }[PortPair(config)]


def _check_tau(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError(
            "tau must be >= 0: the state is defined for the cascade photon "
            "arriving before the second photon"
        )
    return tau


def amplitude_vector(p: EmitterParams, tau) -> np.ndarray:
    """Evaluate all four amplitudes on an array of delays.

    Returns an array of shape (4,) + tau.shape ordered (AA, AB, BA, BB).
    """
    tau = _check_tau(tau)
    g, s, phi = p.gamma_x, p.fss, p.phi
    envelope = np.exp(-g * tau / 2.0)
    half = s * tau / 2.0
    pre = -SQRT2 * g * envelope
    aa = pre * (np.exp(-1j * (half + 2.0 * phi)) + np.exp(1j * half))
    bb = pre * (np.exp(-1j * (half - 2.0 * phi)) + np.exp(1j * half))
    ab = (-2.0 * SQRT2 * g * np.cos(half) * envelope).astype(complex)
    return np.stack([aa, ab, ab, bb])


def amplitudes(p: EmitterParams, tau: float) -> TwoPhotonAmplitudes:
    """The four path amplitudes of the two-photon state at delay ``tau`` [ns]."""
    aa, ab, ba, bb = amplitude_vector(p, float(tau))
    return TwoPhotonAmplitudes(psi_aa=complex(aa), psi_ab=complex(ab),
                               psi_ba=complex(ba), psi_bb=complex(bb),
                               tau=float(tau))


def coincidence_probability(p: EmitterParams, tau, config: PortPair):
    """Unnormalized coincidence probability density for one port pair.

    AA: 4 g^2 e^{-g tau} (1 + cos(S tau + 2 phi))
    BB: same with -2 phi; AB = BA: 4 g^2 e^{-g tau} (1 + cos(S tau)).
    Accepts scalar or array ``tau`` [ns]; result scales as 1/ns^2.
    """
    tau = _check_tau(tau)
    config = PortPair(config)
    g, s = p.gamma_x, p.fss
    if config is PortPair.AA:
        shift = 2.0 * p.phi
    elif config is PortPair.BB:
        shift = -2.0 * p.phi
    else:
        shift = 0.0
    out = 4.0 * g * g * np.exp(-g * tau) * (1.0 + np.cos(s * tau + shift))
    return out if out.ndim else float(out)


def total_coincidence_probability(p: EmitterParams, tau):
    """Sum of the coincidence densities over the four port pairs."""
    tau = _check_tau(tau)
    g, s = p.gamma_x, p.fss
    bracket = 4.0 + 2.0 * np.cos(s * tau) * (1.0 + np.cos(2.0 * p.phi))
    out = 4.0 * g * g * np.exp(-g * tau) * bracket
    return out if out.ndim else float(out)


def amplitude_norm(a: TwoPhotonAmplitudes) -> float:
    """Sum of squared amplitude magnitudes; sqrt(N) normalizes the state.

    Raises DegenerateStateError when all amplitudes are simultaneously zero.
    """
    vec = a.as_vector()
    n = float(np.sum(np.abs(vec) ** 2))
    if n < DEGENERATE_NORM:
        raise DegenerateStateError(
            f"state norm {n:.3e} below {DEGENERATE_NORM:.0e} at tau={a.tau}"
        )
    return n

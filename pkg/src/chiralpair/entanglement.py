"""Entanglement measures of the path-encoded pair state.

Covers the reduced density matrix of the second photon's path qubit, its von
Neumann entropy, the closed-form concurrence of the pure state, and the
detector-jitter-averaged 4x4 density matrix with its Wootters concurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    DegenerateStateError,
    TwoPhotonAmplitudes,
    amplitude_norm,
    amplitude_vector,
    amplitudes,
)
from .params import EmitterParams

#: sigma_y (x) sigma_y in the (AA, AB, BA, BB) basis; used for spin flips.
_SY_SY = np.array(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
    ],
    dtype=float,
)

#: Eigenvalues of an averaged density matrix may dip this far below zero
#: before the matrix is considered invalid.
PSD_FLOOR = 1e-10


class QuadratureError(RuntimeError):
    """The adaptive jitter-average quadrature failed to converge."""


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """2x2 density matrix of the second photon's path qubit, basis {A, B}."""

    elements: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.elements, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-12:
            raise ValueError(f"trace is {np.trace(m).real}, expected 1")
        object.__setattr__(self, "elements", m)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)

    def purity(self) -> float:
        return float(np.trace(self.elements @ self.elements).real)


@dataclass(frozen=True)
class JitterAveragedDensityMatrix:
    """Gaussian-jitter-averaged 4x4 density matrix over (port, port) pairs.

    ``elements`` is the unnormalized average of the amplitude outer products;
    dividing by ``norm`` yields a unit-trace matrix. ``center_tau`` is the
    delay on which the Gaussian weight is centered [ns].
    """

    elements: np.ndarray
    center_tau: float
    norm: float

    def normalized(self) -> np.ndarray:
        return np.asarray(self.elements) / self.norm

    def validate(self, floor: float = PSD_FLOOR) -> None:
        m = self.normalized()
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise ValueError("jitter-averaged matrix is not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -floor:
            raise ValueError(f"matrix not positive semidefinite: min eig {ev.min():.3e}")


def reduced_density(a: TwoPhotonAmplitudes) -> ReducedDensityMatrix:
    """Trace the cascade photon's path out of the pure pair state."""
    n = amplitude_norm(a)  # raises on the degenerate state
    aa, ab, ba, bb = a.psi_aa, a.psi_ab, a.psi_ba, a.psi_bb
    top = abs(aa) ** 2 + abs(ab) ** 2
    bot = abs(ba) ** 2 + abs(bb) ** 2
    off = aa * np.conj(ba) + ab * np.conj(bb)
    rho = np.array([[top, off], [np.conj(off), bot]]) / n
    return ReducedDensityMatrix(rho)


def _binary_entropy_bits(p1: float) -> float:
    p1 = min(max(p1, 0.0), 1.0)
    p2 = 1.0 - p1
    h = 0.0
    for p in (p1, p2):
        if p > 0.0:
            h -= p * math.log2(p)
    return h


def entropy(rho) -> float:
    """Entanglement entropy in bits.

    Accepts either a ReducedDensityMatrix (diagonalized numerically) or
    TwoPhotonAmplitudes, for which the closed-form eigenvalues
    P_{1,2} = (1 +- sqrt(1 - (4/N^2) |psi_AA psi_BB - psi_AB psi_BA|^2)) / 2
    are used.
    """
    if isinstance(rho, TwoPhotonAmplitudes):
        n = amplitude_norm(rho)
        det = rho.psi_aa * rho.psi_bb - rho.psi_ab * rho.psi_ba
        disc = 1.0 - 4.0 * abs(det) ** 2 / n**2
        p1 = 0.5 * (1.0 + math.sqrt(max(disc, 0.0)))
    elif isinstance(rho, ReducedDensityMatrix):
        p1 = float(rho.eigenvalues().max())
    else:
        raise TypeError(f"unsupported input type {type(rho).__name__}")
    return _binary_entropy_bits(p1)


def concurrence_pure(p: EmitterParams, tau: float) -> float:
    """Concurrence of the jitter-free pair state at delay ``tau``.

    Closed form: sin^2(phi) / (1 + cos(S tau) cos^2(phi)).
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    s2 = math.sin(p.phi) ** 2
    c2 = math.cos(p.phi) ** 2
    return s2 / (1.0 + math.cos(p.fss * tau) * c2)


def _gauss_window(tau: float, sigma: float) -> tuple[float, float]:
    # Gaussian mass beyond 8 sigma is < 1e-15; clip at tau' = 0.
    return max(0.0, tau - 8.0 * sigma), tau + 8.0 * sigma


def jitter_averaged_density(
    p: EmitterParams,
    tau: float,
    rel_tol: float = 1e-8,
    max_nodes: int = 1 << 16,
) -> JitterAveragedDensityMatrix:
    """Average the amplitude outer products over a Gaussian emission-time blur.

    Each element is integral over tau' in [0, inf) of
    exp(-(tau' - tau)^2 / (2 sigma^2)) psi_ij(tau') conj(psi_kl(tau')),
    evaluated by Gauss-Legendre quadrature with node doubling until every
    element is converged to ``rel_tol`` (relative to the matrix norm).
    For sigma = 0 the pure-state outer product is returned with norm N.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    sigma = p.jitter_sigma
    if sigma == 0.0:
        vec = amplitude_vector(p, tau)
        rho = np.outer(vec, vec.conj())
        n = float(np.trace(rho).real)
        if n <= 0.0:
            raise DegenerateStateError(f"zero-norm state at tau={tau}")
        return JitterAveragedDensityMatrix(elements=rho, center_tau=tau, norm=n)

    lo, hi = _gauss_window(tau, sigma)

    def evaluate(n_nodes: int) -> np.ndarray:
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        tp = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        weight = w * 0.5 * (hi - lo) * np.exp(-((tp - tau) ** 2) / (2.0 * sigma**2))
        psi = amplitude_vector(p, tp)  # (4, n_nodes)
        return np.einsum("in,kn,n->ik", psi, psi.conj(), weight)

    n_nodes = 64
    rho = evaluate(n_nodes)
    while True:
        n_nodes *= 2
        if n_nodes > max_nodes:
            err = np.abs(rho_next - rho)
            worst = np.unravel_index(np.argmax(err), err.shape)
            raise QuadratureError(
                f"jitter average did not converge to {rel_tol:g}; worst element "
                f"{worst} with error {err[worst]:.3e}"
            )
        rho_next = evaluate(n_nodes)
        scale = max(np.abs(rho_next).max(), 1e-300)
        if np.abs(rho_next - rho).max() <= rel_tol * scale:
            rho = rho_next
            break
        rho = rho_next

    norm = float(np.trace(rho).real)
    if norm <= 0.0:
        raise DegenerateStateError(f"zero-norm averaged state at tau={tau}")
    return JitterAveragedDensityMatrix(elements=rho, center_tau=tau, norm=norm)


def wootters_concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of an arbitrary normalized two-qubit density matrix."""
    # With rho = A A^H, the Wootters lambdas are the singular values of
    # A^T (sy x sy) A.  Discarding numerically-zero eigenvalues keeps
    # rank-deficient (e.g. pure) states exact instead of sqrt(eps)-noisy.
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    w[w < 64 * np.finfo(float).eps * w.max()] = 0.0
    a = v * np.sqrt(w)
    lam = np.linalg.svd(a.T @ _SY_SY @ a, compute_uv=False)
    lam = np.sort(np.concatenate([lam, np.zeros(4)]))[::-1]
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_jittered(rho: JitterAveragedDensityMatrix) -> float:
    """Concurrence of a jitter-averaged state."""
    rho.validate()
    return wootters_concurrence(rho.normalized())


def concurrence_sweep(p: EmitterParams, tau_grid) -> np.ndarray:
    """Concurrence versus delay; returns an array of (tau, C) rows.

    Uses the jitter-averaged matrix when jitter_sigma > 0, the closed form
    otherwise.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.ndim != 1:
        raise ValueError("tau_grid must be one-dimensional")
    if np.any(np.diff(tau_grid) <= 0):
        raise ValueError("tau_grid must be sorted strictly ascending")
    if np.any(tau_grid < 0):
        raise ValueError("tau_grid must be non-negative")
    out = np.empty((tau_grid.size, 2))
    out[:, 0] = tau_grid
    if p.jitter_sigma == 0.0:
        out[:, 1] = [concurrence_pure(p, t) for t in tau_grid]
    else:
        out[:, 1] = [
            concurrence_jittered(jitter_averaged_density(p, t)) for t in tau_grid
        ]
    return out

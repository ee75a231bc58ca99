"""Field-map diagnostics and the grating back-reflection phase model.

Operates on externally supplied Bloch-mode field grids (two complex in-plane
components per cell); produces per-cell maps of the local phase between the
components, the emission directionality, and the predicted pair concurrence.
Masked cells (both components zero) propagate as NaN sentinels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entanglement import (
    concurrence_jittered,
    concurrence_pure,
    jitter_averaged_density,
)
from .params import EmitterParams

SQRT2 = math.sqrt(2.0)

#: Sentinel emitted for masked cells in all map outputs.
MASKED = float("nan")


@dataclass(frozen=True)
class FieldGrid:
    """Complex in-plane field components sampled on a rectangular grid.

    ``ex`` and ``ey`` have shape (ny, nx); ``spacing`` is the grid pitch in
    units of the lattice constant. Cells where both components vanish are
    masked.
    """

    ex: np.ndarray
    ey: np.ndarray
    spacing: float = 1.0
    mask: np.ndarray = field(init=False)

    def __post_init__(self):
        ex = np.asarray(self.ex, dtype=complex)
        ey = np.asarray(self.ey, dtype=complex)
        if ex.shape != ey.shape or ex.ndim != 2:
            raise ValueError("ex and ey must be 2-D arrays of identical shape")
        if not (np.all(np.isfinite(ex.view(float))) and np.all(np.isfinite(ey.view(float)))):
            raise ValueError("field components must be finite")
        object.__setattr__(self, "ex", ex)
        object.__setattr__(self, "ey", ey)
        object.__setattr__(self, "mask", (np.abs(ex) == 0) & (np.abs(ey) == 0))

    @property
    def ny(self) -> int:
        return self.ex.shape[0]

    @property
    def nx(self) -> int:
        return self.ex.shape[1]


def local_phase(grid: FieldGrid) -> np.ndarray:
    """Per-cell phase difference between the x and y field components.

    Wrapped to (-pi, pi]; masked cells are NaN.
    """
    phi = np.angle(grid.ex) - np.angle(grid.ey)
    phi = np.mod(phi + np.pi, 2.0 * np.pi) - np.pi
    # np.mod maps the branch point to -pi; the convention here is (-pi, pi]
    phi[phi == -np.pi] = np.pi
    phi[grid.mask] = MASKED
    return phi


def directionality(grid: FieldGrid) -> np.ndarray:
    """Per-cell forward/backward emission asymmetry, in [-1, 1].

    D = 2 sin(phi) |ex| |ey| / (|ex|^2 + |ey|^2); masked cells are NaN.
    """
    ax = np.abs(grid.ex)
    ay = np.abs(grid.ey)
    denom = ax**2 + ay**2
    with np.errstate(invalid="ignore", divide="ignore"):
        d = 2.0 * np.sin(local_phase(grid)) * ax * ay / denom
    d[grid.mask] = MASKED
    return d


def directionality_projection(grid: FieldGrid) -> np.ndarray:
    """Directionality from circular-polarization projections (cross-check form).

    Projects the forward mode and its time-reversed (conjugate) counterpart on
    the sigma+ unit vector: (|e . s+|^2 - |e* . s+|^2) / |e|^2.
    """
    ex, ey = grid.ex, grid.ey
    fwd = (ex + 1j * ey) / SQRT2
    bwd = (np.conj(ex) + 1j * np.conj(ey)) / SQRT2
    denom = np.abs(ex) ** 2 + np.abs(ey) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        d = (np.abs(fwd) ** 2 - np.abs(bwd) ** 2) / denom
    d[grid.mask] = MASKED
    return d


def concurrence_map(grid: FieldGrid, p: EmitterParams, tau: float) -> np.ndarray:
    """Predicted pair concurrence per cell, substituting the local phase.

    Uses the jitter-averaged concurrence when p.jitter_sigma > 0, the closed
    form otherwise. Masked cells are NaN.
    """
    phi_map = local_phase(grid)
    out = np.full(phi_map.shape, MASKED)
    # identical phases share one evaluation; field maps are heavily degenerate
    cache: dict[float, float] = {}
    it = np.nditer(phi_map, flags=["multi_index"])
    for val in it:
        phi = float(val)
        if math.isnan(phi):
            continue
        if phi not in cache:
            pp = p.replace(phi=phi)
            if p.jitter_sigma > 0:
                cache[phi] = concurrence_jittered(jitter_averaged_density(pp, tau))
            else:
                cache[phi] = concurrence_pure(pp, tau)
        out[it.multi_index] = cache[phi]
    return out


def _check_reflectance(r: float) -> None:
    if not 0.0 <= r < 1.0:
        raise ValueError(f"reflectance amplitude must be in [0, 1), got {r}")


def phase_reduction(ideal_phi: float, r: float) -> float:
    """Observed phase of a chiral point behind a weakly reflecting grating.

    Inverts r = sin((phi0 - phi)/2) / sin((phi0 + phi)/2) via the
    tan-half-angle identity: phi = 2 atan(((1-r)/(1+r)) tan(phi0/2)).
    """
    _check_reflectance(r)
    if not 0.0 < ideal_phi < math.pi:
        raise ValueError(f"ideal phase must be in (0, pi), got {ideal_phi}")
    return 2.0 * math.atan((1.0 - r) / (1.0 + r) * math.tan(ideal_phi / 2.0))


def ideal_phase_from(observed_phi: float, r: float) -> float:
    """Back out the reflection-free phase from the observed one."""
    _check_reflectance(r)
    if not 0.0 < observed_phi < math.pi:
        raise ValueError(f"observed phase must be in (0, pi), got {observed_phi}")
    return 2.0 * math.atan((1.0 + r) / (1.0 - r) * math.tan(observed_phi / 2.0))


def reflectance_from_phases(ideal_phi: float, observed_phi: float) -> float:
    """Forward formula: amplitude reflectance from the two phases."""
    return math.sin(0.5 * (ideal_phi - observed_phi)) / math.sin(
        0.5 * (ideal_phi + observed_phi)
    )


def fringe_reflectance(fringe_amplitude: float) -> float:
    """Power reflectance r^2 from the transmission fringe contrast A.

    r^2 = (1 - A) / (1 + A) for A in (0, 1].
    """
    if not 0.0 < fringe_amplitude <= 1.0:
        raise ValueError(
            f"fringe amplitude must be in (0, 1], got {fringe_amplitude}"
        )
    return (1.0 - fringe_amplitude) / (1.0 + fringe_amplitude)

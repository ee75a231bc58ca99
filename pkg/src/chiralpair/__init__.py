"""Simulation and analysis toolkit for a waveguide dual-rail photon-pair source."""

from .params import (
    EmitterParams,
    InstrumentParams,
    PortPair,
    ghz_to_angular,
    preset_emitter,
)
from .model import TwoPhotonAmplitudes, amplitudes, amplitude_norm, coincidence_probability
from .entanglement import (
    concurrence_jittered,
    concurrence_pure,
    concurrence_sweep,
    entropy,
    jitter_averaged_density,
    reduced_density,
)
from .simulate import TimestampStream, simulate_g2_single, simulate_run
from .correlate import CorrelationHistogram, correlate_streams, extract_window, g2_pulsed
from .timematch import align_datasets, apply_alignment, estimate_rep_rate, refine_rep_rate
from .fit import FitResult, fit_stage1, fit_stage2, model_curve

__version__ = "0.1.0"

__all__ = [
    "EmitterParams",
    "InstrumentParams",
    "PortPair",
    "ghz_to_angular",
    "preset_emitter",
    "TwoPhotonAmplitudes",
    "amplitudes",
    "amplitude_norm",
    "coincidence_probability",
    "concurrence_jittered",
    "concurrence_pure",
    "concurrence_sweep",
    "entropy",
    "jitter_averaged_density",
    "reduced_density",
    "TimestampStream",
    "simulate_g2_single",
    "simulate_run",
    "CorrelationHistogram",
    "correlate_streams",
    "extract_window",
    "g2_pulsed",
    "align_datasets",
    "apply_alignment",
    "estimate_rep_rate",
    "refine_rep_rate",
    "FitResult",
    "fit_stage1",
    "fit_stage2",
    "model_curve",
]

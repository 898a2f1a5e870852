"""Shaped-pulse control and emission of a driven two-level emitter."""

from __future__ import annotations

__version__ = "0.1.0"

from .propagator import Trajectory, evolve, final_population
from .pulseshape import PulseSpec, SampledEnvelope, build_spectrum, make_envelope, synthesize_envelope
from .quantum import CLOSED, DensityMatrix, EmitterParams

__all__ = [
    "CLOSED",
    "DensityMatrix",
    "EmitterParams",
    "PulseSpec",
    "SampledEnvelope",
    "Trajectory",
    "__version__",
    "build_spectrum",
    "evolve",
    "final_population",
    "make_envelope",
    "synthesize_envelope",
]

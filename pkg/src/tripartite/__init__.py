"""Exact dynamics of a Lambda atom driven by two quantized, Kerr-nonlinear modes."""

__version__ = "0.1.0"

from .blocks import BlockPropagator, CouplingForm, ModelParams, evolve  # noqa: E402,F401
from .fock import FieldKind, FieldSpec, FockAmplitudes, choose_cutoff, prepare  # noqa: E402,F401

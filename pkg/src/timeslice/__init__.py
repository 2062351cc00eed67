"""Finite time-slice approximants for exactly solvable spin and oscillator models."""
from .core import (
    DeltaComb,
    ExpPoly,
    ModelSpec,
    ThermoCurve,
    ThermoSample,
    as_rational,
    comb_moment,
    comb_pair,
    exppoly_ddbeta,
    exppoly_eval,
    exppoly_mul,
    exppoly_pow,
    exppoly_taylor,
    inverse_laplace,
    laplace,
)

__version__ = "0.1.0"

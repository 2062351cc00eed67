"""Single spin ``s`` with self-interaction ``H = -J S.S``.

The static (one-slice) density matrix is a multiple of the identity, so the
``L``-slice partition function is ``(2s+1) * (Z_1(beta/L) / (2s+1))**L``,
which is kept as an exact :class:`~timeslice.core.ExpPoly`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .core import (
    DeltaComb,
    ExpPoly,
    as_rational,
    energy_from_z,
    energy_limit_high_t,
    energy_limit_low_t,
    exppoly_pow,
    exppoly_rescale,
    heat_capacity_from_z,
    inverse_laplace,
)

__all__ = [
    "SpinExact",
    "spin_exact",
    "spin_z1_exppoly",
    "spin_zl_exppoly",
    "spin_ul",
    "spin_ul_closed_form",
    "spin_ul_limits",
    "spin_utilde",
    "spin_heat_capacity",
    "spin_dos",
    "spin_zl",
]


def _spin(s) -> Fraction:
    s = as_rational(s)
    if (2 * s).denominator != 1 or s <= 0:
        raise ValueError(f"spin must be a positive half-integer, got {s}")
    return s


def _m_values(s: Fraction) -> list[Fraction]:
    return [-s + k for k in range(int(2 * s) + 1)]


@dataclass(frozen=True)
class SpinExact:
    Z: float
    U: Fraction
    dos: DeltaComb


def spin_exact(s, J, beta: float) -> SpinExact:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    s, J = _spin(s), as_rational(J)
    e0 = J * s * (s + 1)
    return SpinExact(
        Z=float(2 * s + 1) * math.exp(beta * float(e0)),
        U=-e0,
        dos=DeltaComb.from_terms([(-e0, 0, 2 * s + 1)]),
    )


@lru_cache(maxsize=None)
def _z1(s: Fraction, J: Fraction) -> ExpPoly:
    return ExpPoly.from_terms(([1, 2 * m * m * J], m * m * J) for m in _m_values(s))


def spin_z1_exppoly(s, J) -> ExpPoly:
    """Static partition function ``sum_m (1 + 2 m^2 beta J) exp(m^2 beta J)``."""
    return _z1(_spin(s), as_rational(J))


@lru_cache(maxsize=None)
def _zl(s: Fraction, J: Fraction, L: int) -> ExpPoly:
    dim = 2 * s + 1
    per_slice = exppoly_rescale(_z1(s, J), L) * (1 / dim)
    return exppoly_pow(per_slice, L) * dim


def spin_zl_exppoly(s, J, L: int) -> ExpPoly:
    if int(L) != L or L < 1:
        raise ValueError(f"L must be a positive integer, got {L}")
    return _zl(_spin(s), as_rational(J), int(L))


def spin_zl(s, J, L: int, beta: float) -> float:
    return spin_zl_exppoly(s, J, L)(beta)


def spin_ul(s, J, L: int, beta: float) -> float:
    """``-d ln Z_L / d beta`` through the exact derivative of ``Z_L``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return energy_from_z(spin_zl_exppoly(s, J, L), beta)


def spin_ul_closed_form(s, J, L: int, beta: float) -> float:
    """Ratio of two Boltzmann-like sums over ``m``; equals ``U_1(beta/L)``."""
    s, J = _spin(s), float(as_rational(J))
    x = beta * J / L
    num = den = 0.0
    for m in _m_values(s):
        m2 = float(m * m)
        w = math.exp(m2 * x)
        num += (3 * m2 + 2 * m2 * m2 * x) * w
        den += (1 + 2 * m2 * x) * w
    return -J * num / den


def spin_ul_limits(s, J, L: int) -> tuple[Fraction, Fraction]:
    """Exact ``(T -> 0, T -> inf)`` limits of ``U_L``."""
    z = spin_zl_exppoly(s, J, L)
    return energy_limit_low_t(z), energy_limit_high_t(z)


def spin_utilde(s, J) -> Fraction:
    """Thermal average of ``H`` under ``rho_L``; independent of ``L`` and beta."""
    s = _spin(s)
    return -as_rational(J) * s * (s + 1)


def spin_heat_capacity(s, J, L: int, beta: float) -> float:
    return heat_capacity_from_z(spin_zl_exppoly(s, J, L), beta)


def spin_dos(s, J, L: int) -> DeltaComb:
    return inverse_laplace(spin_zl_exppoly(s, J, L))

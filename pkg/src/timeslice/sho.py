"""Harmonic oscillator with a finite number of Matsubara frequencies.

Energies are in units of the oscillator quantum, so ``beta`` is
dimensionless. ``L`` (odd) counts the retained frequencies ``2*pi*n/beta``
with ``|n| <= (L-1)/2``.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import integrate

__all__ = [
    "sho_z",
    "sho_dos",
    "sho_dos_prefactor",
    "sho_u",
    "sho_heat_capacity",
    "sho_exact_z",
    "sho_exact_u",
    "sho_exact_heat_capacity",
    "sho_laplace_of_dos",
]


def _check_L(L: int) -> None:
    if int(L) != L or L < 1 or L % 2 == 0:
        raise ValueError(f"L must be an odd positive integer, got {L}")


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def _matsubara(L: int) -> np.ndarray:
    return 2 * np.pi * np.arange(1, (L - 1) // 2 + 1)


def sho_z(L: int, beta: float) -> float:
    _check_L(L)
    _check_beta(beta)
    a = _matsubara(L)
    return float(1.0 / beta / np.prod(1.0 + (beta / a) ** 2))


def sho_dos_prefactor(L: int) -> Fraction:
    """Exact normalization ``2**(L-1) * ((L-1)/2)!**2 / (L-1)!``."""
    _check_L(L)
    m = (L - 1) // 2
    return Fraction(2 ** (L - 1) * math.factorial(m) ** 2, math.factorial(L - 1))


def sho_dos(L: int, E):
    """Smooth density of states; the step at ``E = 0`` takes the value 1."""
    _check_L(L)
    E = np.asarray(E, dtype=float)
    g = float(sho_dos_prefactor(L)) * np.sin(np.pi * E) ** (L - 1)
    g = np.where(E >= 0, g, 0.0)
    return float(g) if g.ndim == 0 else g


def sho_u(L: int, beta: float) -> float:
    _check_L(L)
    _check_beta(beta)
    a = _matsubara(L)
    return float(1.0 / beta + np.sum(2 * beta / (a**2 + beta**2)))


def sho_heat_capacity(L: int, beta: float) -> float:
    _check_L(L)
    _check_beta(beta)
    a = _matsubara(L)
    b2 = beta * beta
    return float(1.0 + np.sum(2 * b2 * (b2 - a**2) / (a**2 + b2) ** 2))


def sho_exact_z(beta: float) -> float:
    _check_beta(beta)
    return 0.5 / math.sinh(beta / 2)


def sho_exact_u(beta: float) -> float:
    _check_beta(beta)
    return 0.5 / math.tanh(beta / 2)


def sho_exact_heat_capacity(beta: float) -> float:
    _check_beta(beta)
    x = beta / 2
    return (x / math.sinh(x)) ** 2


def sho_laplace_of_dos(L: int, beta: float) -> float:
    """Numerical Laplace transform of :func:`sho_dos` at ``beta``.

    ``sin**(L-1)`` has unit period, so only ``[0, 1]`` is integrated and the
    remaining periods are summed as a geometric series in ``exp(-beta)``.
    """
    _check_L(L)
    _check_beta(beta)
    one_period, _ = integrate.quad(
        lambda E: math.exp(-beta * E) * sho_dos(L, E), 0.0, 1.0,
        epsabs=1e-14, epsrel=1e-13, limit=200,
    )
    return one_period / -math.expm1(-beta)

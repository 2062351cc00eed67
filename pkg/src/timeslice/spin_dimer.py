"""Spin-1/2 dimer ``H = -J'(S1.S1 + S2.S2) - 2J S1.S2``.

The ``L``-slice density matrix is diagonal in the triplet/singlet projectors,
``rho_L = c1**L * exp(beta J'/2) P1 + c0**L * exp(beta J'/2) P0``, where the
per-slice brackets ``c1``, ``c0`` are exponential polynomials in ``beta/L``.
They come from a convergent Gaussian integral (``J' > |J|``) continued
analytically in ``J'``, which is why ``c0`` may turn negative at ``J' = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import optimize

from .core import (
    DeltaComb,
    ExpPoly,
    as_rational,
    energy_from_z,
    energy_limit_high_t,
    energy_limit_low_t,
    exppoly_eval_array,
    exppoly_pow,
    exppoly_taylor,
    heat_capacity_from_z,
    inverse_laplace,
    ratio_limit_low_t,
)

__all__ = [
    "ProjectorWeights",
    "dimer_eigenvalues",
    "dimer_weights",
    "dimer_zl_exppoly",
    "dimer_zl",
    "dimer_exact_z",
    "dimer_exact_u",
    "dimer_ul",
    "dimer_ul_limits",
    "dimer_utilde",
    "dimer_utilde_exppolys",
    "dimer_utilde_limit",
    "dimer_heat_capacity",
    "dimer_dos",
    "dimer_series",
    "dimer_negative_weight_region",
    "dimer_utilde_minimum",
]


@dataclass(frozen=True)
class ProjectorWeights:
    """Per-slice triplet (``c1``) and singlet (``c0``) brackets.

    Both are ExpPolys in ``beta`` with ``beta/L`` already substituted; the
    common factor ``exp(beta * J'/2)`` of ``rho_L`` is ``shift * beta``.
    """

    c1: ExpPoly
    c0: ExpPoly
    shift: Fraction
    L: int


def dimer_eigenvalues(J, Jprime) -> tuple[Fraction, Fraction]:
    """Triplet and singlet energies, from ``S1.S2 = 1/4, -3/4`` and ``S.S = 3/4``."""
    J, Jp = as_rational(J), as_rational(Jprime)
    return -3 * Jp / 2 - J / 2, -3 * Jp / 2 + 3 * J / 2


def _params(J, Jprime, L) -> tuple[Fraction, Fraction, int]:
    J, Jp = as_rational(J), as_rational(Jprime)
    if J == 0:
        raise ValueError(
            "J = 0 is outside the projector formulas; the dimer then factorizes "
            "into two single spins with coupling J', Z_L = spin_zl_exppoly(1/2, J', L)**2"
        )
    if int(L) != L or L < 1:
        raise ValueError(f"L must be a positive integer, got {L}")
    return J, Jp, int(L)


@lru_cache(maxsize=None)
def _weights(J: Fraction, Jp: Fraction, L: int) -> ProjectorWeights:
    r = J / (2 * L)
    q = Jp * Jp / (J * J)
    c1 = ExpPoly.from_terms([
        ([Fraction(5, 6) - q / 6, (J + Jp) ** 2 / (3 * L * J)], r),
        ([Fraction(1, 6) + q / 6, -(J - Jp) ** 2 / (6 * L * J)], -r),
    ])
    c0 = ExpPoly.from_terms([
        ([Fraction(-1, 2) + q / 2], r),
        ([Fraction(3, 2) - q / 2, -(J - Jp) ** 2 / (2 * L * J)], -r),
    ])
    return ProjectorWeights(c1=c1, c0=c0, shift=Jp / 2, L=L)


def dimer_weights(J, Jprime, L: int) -> ProjectorWeights:
    return _weights(*_params(J, Jprime, L))


@lru_cache(maxsize=None)
def _zl(J: Fraction, Jp: Fraction, L: int) -> ExpPoly:
    w = _weights(J, Jp, L)
    shift = ExpPoly.exp(w.shift)
    return (exppoly_pow(w.c1, L) * 3 + exppoly_pow(w.c0, L)) * shift


def dimer_zl_exppoly(J, Jprime, L: int) -> ExpPoly:
    return _zl(*_params(J, Jprime, L))


def _slice_values(J, Jprime, L, beta):
    w = dimer_weights(J, Jprime, L)
    c1 = exppoly_eval_array(w.c1, beta)
    c0 = exppoly_eval_array(w.c0, beta)
    return c1**L, c0**L, np.exp(np.asarray(beta, dtype=float) * float(w.shift))


def dimer_zl(J, Jprime, L: int, beta: float) -> float:
    """Float ``Z_L`` from the factored form (no expansion of the powers)."""
    p1, p0, e = _slice_values(J, Jprime, L, beta)
    return float((3 * p1 + p0) * e)


def dimer_exact_z(J, Jprime, beta: float) -> float:
    et, es = dimer_eigenvalues(J, Jprime)
    return 3 * math.exp(-beta * float(et)) + math.exp(-beta * float(es))


def dimer_exact_u(J, Jprime, beta: float) -> float:
    et, es = (float(x) for x in dimer_eigenvalues(J, Jprime))
    # shift by the lower level to keep the exponentials bounded
    e0 = min(et, es)
    wt, ws = 3 * math.exp(-beta * (et - e0)), math.exp(-beta * (es - e0))
    return (wt * et + ws * es) / (wt + ws)


def dimer_ul(J, Jprime, L: int, beta: float) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    return energy_from_z(dimer_zl_exppoly(J, Jprime, L), beta)


def dimer_ul_limits(J, Jprime, L: int) -> tuple[Fraction, Fraction]:
    """Exact ``(T -> 0, T -> inf)`` limits of ``U_L``."""
    z = dimer_zl_exppoly(J, Jprime, L)
    return energy_limit_low_t(z), energy_limit_high_t(z)


def dimer_utilde(J, Jprime, L: int, beta: float) -> float:
    """Thermal average of the true Hamiltonian under ``rho_L``; vectorized over beta."""
    if np.any(np.asarray(beta) < 0):
        raise ValueError("beta must be nonnegative")
    et, es = (float(x) for x in dimer_eigenvalues(J, Jprime))
    p1, p0, _ = _slice_values(J, Jprime, L, beta)
    # measured from the triplet level so that p0 >= 0 cannot round below it
    u = et + p0 * (es - et) / (3 * p1 + p0)
    return float(u) if np.ndim(u) == 0 else u


def dimer_utilde_exppolys(J, Jprime, L: int) -> tuple[ExpPoly, ExpPoly]:
    """Exact numerator ``Tr(rho_L H)`` and denominator ``Z_L``."""
    J, Jp, L = _params(J, Jprime, L)
    w = _weights(J, Jp, L)
    et, es = dimer_eigenvalues(J, Jp)
    shift = ExpPoly.exp(w.shift)
    p1, p0 = exppoly_pow(w.c1, L), exppoly_pow(w.c0, L)
    return (p1 * (3 * et) + p0 * es) * shift, _zl(J, Jp, L)


def dimer_utilde_limit(J, Jprime, L: int) -> Fraction:
    return ratio_limit_low_t(*dimer_utilde_exppolys(J, Jprime, L))


def dimer_heat_capacity(J, Jprime, L: int, beta: float) -> float:
    return heat_capacity_from_z(dimer_zl_exppoly(J, Jprime, L), beta)


def dimer_dos(J, Jprime, L: int) -> DeltaComb:
    return inverse_laplace(dimer_zl_exppoly(J, Jprime, L))


def dimer_series(J, Jprime, L: int, order: int) -> list[Fraction]:
    if not 0 <= order <= 8:
        raise ValueError(f"series order must be in [0, 8], got {order}")
    return exppoly_taylor(dimer_zl_exppoly(J, Jprime, L), order)


def dimer_negative_weight_region(J, L: int, beta_max: float, *, step: float = 0.01,
                                 tol: float = 1e-9) -> tuple[float, float] | None:
    """Sub-interval of ``(0, beta_max]`` where the singlet weight ``c0**L`` is negative.

    Scans ``c0(beta)**L`` on a grid of spacing ``step`` for a sign change and
    refines the crossing by bisection to ``tol``. ``None`` if no negative
    weight occurs (always so for even ``L``).
    """
    J = as_rational(J)
    if J <= 0:
        raise ValueError("the negative-weight scan assumes J > 0")
    c0 = dimer_weights(J, 0, L).c0

    def weight(b):
        return exppoly_eval_array(c0, b) ** L

    grid = np.arange(step, beta_max + step / 2, step)
    negative = np.flatnonzero(weight(grid) < 0)
    if negative.size == 0:
        return None
    i = int(negative[0])
    if i == 0:
        return (0.0, float(beta_max))
    root = optimize.bisect(lambda b: float(weight(b)), grid[i - 1], grid[i], xtol=tol)
    return (float(root), float(beta_max))


def dimer_utilde_minimum(J, Jprime, L: int, beta_lo: float = 0.1, beta_hi: float = 50.0,
                         step: float = 0.01) -> tuple[float, float]:
    """Grid scan of ``U~_L`` on ``[beta_lo, beta_hi]`` refined by golden section.

    Returns ``(beta, U~_L(beta))`` at the located minimum.
    """
    grid = np.arange(beta_lo, beta_hi + step / 2, step)
    vals = dimer_utilde(J, Jprime, L, grid)
    i = int(np.argmin(vals))
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(
            lambda b: dimer_utilde(J, Jprime, L, b),
            bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
            options={"xtol": 1e-10},
        )
        if res.fun <= vals[i]:
            return float(res.x), float(res.fun)
    return float(grid[i]), float(vals[i])

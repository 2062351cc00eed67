"""Exact exponential-polynomial algebra and delta-comb densities of states.

Every finite-slice partition function of the spin models is a finite sum
``sum_i p_i(beta) * exp(rate_i * beta)`` with rational polynomials ``p_i`` and
rational rates. :class:`ExpPoly` stores such sums exactly; its inverse Laplace
image is a :class:`DeltaComb`, a finite sum of Dirac deltas and derivatives.

All algebra here is done in :class:`fractions.Fraction`. Floating point only
appears in :func:`exppoly_eval` and the thermodynamic helpers built on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

Rational = Fraction

__all__ = [
    "Rational",
    "as_rational",
    "rational_str",
    "ExpPoly",
    "DeltaComb",
    "ModelSpec",
    "ThermoSample",
    "ThermoCurve",
    "exppoly_mul",
    "exppoly_pow",
    "exppoly_eval",
    "exppoly_eval_array",
    "exppoly_ddbeta",
    "exppoly_taylor",
    "exppoly_rescale",
    "inverse_laplace",
    "laplace",
    "comb_pair",
    "comb_moment",
    "energy_from_z",
    "heat_capacity_from_z",
    "energy_limit_low_t",
    "energy_limit_high_t",
    "ratio_limit_low_t",
]


def as_rational(x) -> Fraction:
    """Convert ``x`` to an exact rational.

    Strings may be ``"p/q"`` or decimals (``"0.1"`` is exactly 1/10). Floats
    go through their shortest repr, so ``0.1`` also becomes 1/10 rather than
    the binary double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"cannot represent {x!r} exactly")
        return Fraction(repr(x))
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def rational_str(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _trim(poly: Iterable) -> tuple[Fraction, ...]:
    coeffs = [Fraction(c) for c in poly]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def _poly_add(p: Sequence[Fraction], q: Sequence[Fraction]) -> tuple[Fraction, ...]:
    n = max(len(p), len(q))
    out = [Fraction(0)] * n
    for i, c in enumerate(p):
        out[i] += c
    for i, c in enumerate(q):
        out[i] += c
    return _trim(out)


def _poly_mul(p: Sequence[Fraction], q: Sequence[Fraction]) -> tuple[Fraction, ...]:
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _trim(out)


@dataclass(frozen=True)
class ExpPoly:
    """Exact sum ``sum_i poly_i(beta) * exp(rate_i * beta)``.

    ``terms`` is a tuple of ``(rate, poly)`` pairs, ``poly`` in ascending
    degree, sorted by rate, with distinct rates and no zero polynomials.
    Build instances through :meth:`from_terms` (or the arithmetic operators),
    which canonicalizes; equality is then structural.
    """

    terms: tuple[tuple[Fraction, tuple[Fraction, ...]], ...] = ()

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[Iterable, object]]) -> "ExpPoly":
        """Build from ``(poly, rate)`` pairs; equal rates are merged."""
        acc: dict[Fraction, tuple[Fraction, ...]] = {}
        for poly, rate in terms:
            r = as_rational(rate)
            acc[r] = _poly_add(acc.get(r, ()), [as_rational(c) for c in poly])
        return cls(tuple((r, p) for r, p in sorted(acc.items()) if p))

    @classmethod
    def constant(cls, c=1) -> "ExpPoly":
        return cls.from_terms([([c], 0)])

    @classmethod
    def exp(cls, rate, coeff=1) -> "ExpPoly":
        return cls.from_terms([([coeff], rate)])

    @property
    def rates(self) -> tuple[Fraction, ...]:
        return tuple(r for r, _ in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly.constant(other)
        return ExpPoly.from_terms(
            [(p, r) for r, p in self.terms] + [(p, r) for r, p in other.terms]
        )

    __radd__ = __add__

    def __neg__(self):
        return ExpPoly(tuple((r, tuple(-c for c in p)) for r, p in self.terms))

    def __sub__(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ExpPoly):
            return exppoly_mul(self, other)
        c = as_rational(other)
        if c == 0:
            return ExpPoly()
        return ExpPoly(tuple((r, tuple(c * x for x in p)) for r, p in self.terms))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        return exppoly_pow(self, n)

    def __call__(self, beta) -> float:
        return exppoly_eval(self, beta)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for r, p in self.terms:
            poly = " + ".join(
                rational_str(c) + ("" if k == 0 else "*b" if k == 1 else f"*b^{k}")
                for k, c in enumerate(p)
                if c != 0
            )
            parts.append(f"({poly})" + ("" if r == 0 else f"*exp({rational_str(r)}*b)"))
        return " + ".join(parts)

    def to_json(self) -> dict:
        return {
            "terms": [
                {"poly": [rational_str(c) for c in p], "rate": rational_str(r)}
                for r, p in self.terms
            ]
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExpPoly":
        return cls.from_terms((t["poly"], t["rate"]) for t in obj["terms"])


@dataclass(frozen=True)
class DeltaComb:
    """Distribution ``sum_i coeff_i * delta^(order_i)(E - center_i)``.

    ``terms`` holds ``(center, order, coeff)`` triples sorted by
    ``(center, order)`` with nonzero coefficients.
    """

    terms: tuple[tuple[Fraction, int, Fraction], ...] = ()

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[object, int, object]]) -> "DeltaComb":
        acc: dict[tuple[Fraction, int], Fraction] = {}
        for center, order, coeff in terms:
            if order < 0:
                raise ValueError("derivative order must be nonnegative")
            key = (as_rational(center), int(order))
            acc[key] = acc.get(key, Fraction(0)) + as_rational(coeff)
        return cls(tuple((c, k, v) for (c, k), v in sorted(acc.items()) if v != 0))

    @property
    def centers(self) -> tuple[Fraction, ...]:
        return tuple(sorted({c for c, _, _ in self.terms}))

    @property
    def max_order(self) -> int:
        return max((k for _, k, _ in self.terms), default=0)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        out = []
        for c, k, v in self.terms:
            d = "delta" + ("'" * k if k <= 2 else f"^({k})")
            out.append(f"{rational_str(v)}*{d}(E{'-' if c >= 0 else '+'}{rational_str(abs(c))})")
        return " + ".join(out)

    def to_json(self) -> dict:
        return {
            "terms": [
                {"center": rational_str(c), "order": k, "coeff": rational_str(v)}
                for c, k, v in self.terms
            ]
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DeltaComb":
        return cls.from_terms((t["center"], t["order"], t["coeff"]) for t in obj["terms"])


def exppoly_mul(a: ExpPoly, b: ExpPoly) -> ExpPoly:
    return ExpPoly.from_terms(
        (_poly_mul(p, q), ra + rb) for ra, p in a.terms for rb, q in b.terms
    )


def exppoly_pow(a: ExpPoly, L: int) -> ExpPoly:
    if L < 1:
        raise ValueError(f"power must be >= 1, got {L}")
    result = None
    base = a
    while L:
        if L & 1:
            result = base if result is None else exppoly_mul(result, base)
        L >>= 1
        if L:
            base = exppoly_mul(base, base)
    return result


def exppoly_rescale(a: ExpPoly, L) -> ExpPoly:
    """Substitute ``beta -> beta / L`` exactly."""
    L = as_rational(L)
    if L == 0:
        raise ValueError("cannot rescale by zero")
    return ExpPoly.from_terms(
        ([c / L**k for k, c in enumerate(p)], r / L) for r, p in a.terms
    )


def exppoly_ddbeta(a: ExpPoly) -> ExpPoly:
    out = []
    for r, p in a.terms:
        dp = [k * c for k, c in enumerate(p)][1:]
        out.append((_poly_add(dp, [r * c for c in p]), r))
    return ExpPoly.from_terms(out)


def exppoly_taylor(a: ExpPoly, order: int) -> list[Fraction]:
    """Taylor coefficients about ``beta = 0`` up to and including ``order``."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    inv_fact = [Fraction(1, math.factorial(k)) for k in range(order + 1)]
    out = [Fraction(0)] * (order + 1)
    for r, p in a.terms:
        rpow = [r**k for k in range(order + 1)]
        for j, c in enumerate(p[: order + 1]):
            for n in range(j, order + 1):
                out[n] += c * rpow[n - j] * inv_fact[n - j]
    return out


def _mp_terms(a: ExpPoly, beta: mpmath.mpf):
    for r, p in a.terms:
        poly = mpmath.mpf(0)
        for c in reversed(p):
            poly = poly * beta + mpmath.mpf(c.numerator) / c.denominator
        yield poly * mpmath.exp(mpmath.mpf(r.numerator) / r.denominator * beta)


def _mp_eval(a: ExpPoly, beta) -> mpmath.mpf:
    """Evaluate with enough working precision to survive cancellation.

    Binomially expanded powers such as ``c0(beta)**L`` carry alternating terms
    far larger than their sum, so the precision grows until the result is
    resolved relative to the sum of absolute terms (or until it is negligible
    at the double-precision scale of that sum).
    """
    if not a.terms:
        return mpmath.mpf(0)
    prec = 96
    while True:
        with mpmath.workprec(prec):
            b = _to_mpf(beta)
            terms = list(_mp_terms(a, b))
            total = mpmath.fsum(terms)
            bound = mpmath.fsum(abs(t) for t in terms)
            resolved = abs(total) * mpmath.mpf(2) ** (prec - 64) >= bound
            # a sum this small relative to its terms is zero for all purposes
            negligible = prec > 1200 + max(int(mpmath.log(bound, 2)), 0)
            if total == 0 or resolved or negligible:
                return +total
        prec *= 2


def _to_mpf(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def exppoly_eval(a: ExpPoly, beta) -> float:
    return float(_mp_eval(a, beta))


def exppoly_eval_array(a: ExpPoly, beta):
    """Plain double-precision evaluation, vectorized over ``beta``.

    Only for short ExpPolys without heavy cancellation (the per-slice
    brackets); expanded high powers need :func:`exppoly_eval`.
    """
    beta = np.asarray(beta, dtype=float)
    out = np.zeros_like(beta)
    for r, p in a.terms:
        out += np.polynomial.polynomial.polyval(beta, [float(c) for c in p]) * np.exp(float(r) * beta)
    return out


def inverse_laplace(a: ExpPoly) -> DeltaComb:
    """``c * beta**k * exp(rate*beta)`` maps to ``c * delta^(k)(E + rate)``."""
    return DeltaComb.from_terms(
        (-r, k, c) for r, p in a.terms for k, c in enumerate(p) if c != 0
    )


def laplace(comb: DeltaComb) -> ExpPoly:
    terms = []
    for center, k, c in comb.terms:
        poly = [Fraction(0)] * k + [c]
        terms.append((poly, -center))
    return ExpPoly.from_terms(terms)


def comb_pair(comb: DeltaComb, poly: Sequence) -> Fraction:
    """Exact pairing of the comb with a polynomial test function in E."""
    f = [as_rational(c) for c in poly]
    total = Fraction(0)
    for center, k, c in comb.terms:
        # k-th derivative of f at center
        deriv = Fraction(0)
        for n in range(k, len(f)):
            deriv += f[n] * math.perm(n, k) * center ** (n - k)
        total += c * (-1) ** k * deriv
    return total


def comb_moment(comb: DeltaComb, k: int) -> Fraction:
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    return comb_pair(comb, [0] * k + [1])


# -- model description and curve carriers -------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """One of the three solvable models, with its slice count ``L``.

    ``kind`` is ``"sho"``, ``"spin"`` (single self-interacting spin) or
    ``"dimer"``. Couplings are stored exactly.
    """

    kind: str
    L: int = 1
    s: Fraction = Fraction(1, 2)
    J: Fraction = Fraction(1)
    Jprime: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("sho", "spin", "dimer"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        object.__setattr__(self, "s", as_rational(self.s))
        object.__setattr__(self, "J", as_rational(self.J))
        object.__setattr__(self, "Jprime", as_rational(self.Jprime))
        if self.kind == "sho" and self.L % 2 == 0:
            raise ValueError("the oscillator needs an odd number of Matsubara frequencies")
        if self.kind == "spin":
            two_s = 2 * self.s
            if two_s.denominator != 1 or two_s < 1:
                raise ValueError(f"spin must be a positive half-integer, got {self.s}")
        if self.kind == "dimer" and self.s != Fraction(1, 2):
            raise ValueError("the dimer is built from spin-1/2 sites")

    def with_L(self, L: int) -> "ModelSpec":
        return ModelSpec(self.kind, L, self.s, self.J, self.Jprime)


@dataclass(frozen=True)
class ThermoSample:
    beta: float
    T: float
    Z: float
    U: float
    Utilde: float | None
    C: float


@dataclass
class ThermoCurve:
    """Tabulated thermodynamics for one model; ``L=None`` marks the exact curve."""

    model: ModelSpec | None
    L: int | None
    samples: list[ThermoSample] = field(default_factory=list)

    def __post_init__(self):
        betas = [s.beta for s in self.samples]
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("betas must be strictly increasing")


# -- thermodynamics from an exact partition function ---------------------------


def energy_from_z(z: ExpPoly, beta) -> float:
    """``-d ln Z / d beta`` evaluated through the exact derivative."""
    with mpmath.workdps(30):
        num = _mp_eval(exppoly_ddbeta(z), beta)
        den = _mp_eval(z, beta)
        return float(-num / den)


def heat_capacity_from_z(z: ExpPoly, beta) -> float:
    """``beta**2 * d^2 ln Z / d beta^2``, i.e. ``-beta**2 dU/dbeta``."""
    d1 = exppoly_ddbeta(z)
    d2 = exppoly_ddbeta(d1)
    with mpmath.workdps(30):
        z0, z1, z2 = (_mp_eval(x, beta) for x in (z, d1, d2))
        b = _to_mpf(beta)
        return float(b * b * (z2 / z0 - (z1 / z0) ** 2))


def _leading(a: ExpPoly) -> tuple[Fraction, int, Fraction]:
    rate, poly = a.terms[-1]
    return rate, len(poly) - 1, poly[-1]


def ratio_limit_low_t(num: ExpPoly, den: ExpPoly) -> Fraction:
    """Exact ``lim_{beta->inf} num(beta)/den(beta)``; must be finite."""
    if den.is_zero():
        raise ZeroDivisionError("denominator is identically zero")
    if num.is_zero():
        return Fraction(0)
    rn, dn, cn = _leading(num)
    rd, dd, cd = _leading(den)
    if (rn, dn) < (rd, dd):
        return Fraction(0)
    if (rn, dn) > (rd, dd):
        raise ArithmeticError("ratio diverges as beta -> infinity")
    return cn / cd


def energy_limit_low_t(z: ExpPoly) -> Fraction:
    """Exact zero-temperature limit of ``-d ln Z / d beta``: minus the top rate."""
    if z.is_zero():
        raise ZeroDivisionError("partition function is identically zero")
    return -z.terms[-1][0]


def energy_limit_high_t(z: ExpPoly) -> Fraction:
    """Exact ``beta -> 0`` limit of ``-d ln Z / d beta``."""
    c0, c1 = exppoly_taylor(z, 1)
    return -c1 / c0

"""Acceptance suite: one check per criterion, each printing a single PASS/FAIL line.

Run under pytest (lines are collected into the terminal summary) or directly
with ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate

from timeslice.core import (
    DeltaComb,
    ModelSpec,
    comb_moment,
    exppoly_ddbeta,
    exppoly_rescale,
    inverse_laplace,
)
from timeslice.fieldint import monte_carlo_u, monte_carlo_z, quadrature_z
from timeslice.sho import sho_dos, sho_heat_capacity, sho_z
from timeslice.spin_dimer import (
    dimer_dos,
    dimer_exact_z,
    dimer_negative_weight_region,
    dimer_series,
    dimer_ul,
    dimer_utilde,
    dimer_utilde_minimum,
    dimer_zl,
    dimer_zl_exppoly,
)
from timeslice.spin_single import (
    spin_exact,
    spin_ul,
    spin_ul_limits,
    spin_z1_exppoly,
    spin_zl,
    spin_zl_exppoly,
)

HALF = F(1, 2)
RESULTS: dict[int, str] = {}


def record(number: int, title: str, passed: bool, detail: str, elapsed: float, limit: float | None):
    within = limit is None or elapsed < limit
    ok = passed and within
    budget = "" if limit is None else f" / {limit:g}s"
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail} ({elapsed:.2f}s{budget})"
    RESULTS[number] = line
    print(line)
    return ok


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# -- 1 ----------------------------------------------------------------------------


def criterion_1():
    expected = DeltaComb.from_terms(
        [(F(-1, 2), 0, 2), (F(1, 2), 0, 2), (F(-1, 2), 1, 1), (F(1, 2), 1, -1)]
    )
    got, dt = timed(lambda: inverse_laplace(dimer_zl_exppoly(1, 0, 1)))
    return record(1, "dimer L=1 delta comb", got == expected,
                  f"{len(got.terms)} terms, exact equality {got == expected}", dt, 1.0)


# -- 2 ----------------------------------------------------------------------------


def quartic_formula(L):
    return F(21 * L**3 - 72 * L**2 + 116 * L - 60, 96 * L**3)


def criterion_2():
    def run():
        bad = []
        for L in range(1, 7):
            want = [F(4), F(0), F(3, 2), F(-(L - 1) * (L - 2), 2 * L * L), quartic_formula(L)]
            got = dimer_series(1, 0, L, 4)
            if got != want:
                bad.append((L, got, want))
        return bad

    bad, dt = timed(run)
    detail = "L=1..6 exact" if not bad else "; ".join(
        f"L={L}: engine {[str(c) for c in g]} vs {[str(c) for c in w]}" for L, g, w in bad)
    return record(2, "high-temperature series", not bad, detail, dt, 1.0)


# -- 3 ----------------------------------------------------------------------------


def criterion_3():
    def run():
        diffs = {L: dimer_zl_exppoly(1, 0, L) - dimer_zl_exppoly(-1, 0, L) for L in (1, 2, 3)}
        cubic = dimer_series(1, 0, 3, 3)[3] - dimer_series(-1, 0, 3, 3)[3]
        return diffs, cubic

    (diffs, cubic), dt = timed(run)
    ok = diffs[1].is_zero() and diffs[2].is_zero() and not diffs[3].is_zero() and cubic == F(-2, 9)
    return record(3, "evenness in J", ok,
                  f"L=1,2 difference zero: {diffs[1].is_zero() and diffs[2].is_zero()}; "
                  f"L=3 beta^3 difference {cubic}", dt, 1.0)


# -- 4 ----------------------------------------------------------------------------


def criterion_4():
    def run():
        lows = {L: spin_ul_limits(HALF, 1, L)[0] for L in range(1, 11)}
        small = max(abs(spin_ul(HALF, 1, L, 1e-6) + 0.75) for L in range(1, 11))
        z1 = spin_z1_exppoly(HALF, 1)
        dz1 = exppoly_ddbeta(z1)
        identity = all(
            exppoly_ddbeta(spin_zl_exppoly(HALF, 1, L)) * exppoly_rescale(z1, L)
            == spin_zl_exppoly(HALF, 1, L) * exppoly_rescale(dz1, L)
            for L in range(1, 11)
        )
        return lows, small, identity

    (lows, small, identity), dt = timed(run)
    ok = all(v == F(-1, 4) for v in lows.values()) and small <= 1e-6 and identity
    return record(4, "single-spin energy limits", ok,
                  f"T->0 limits {sorted(set(map(str, lows.values())))}, "
                  f"max |U(1e-6)+3/4| {small:.2e}, U_L(b)=U_1(b/L) exact {identity}", dt, None)


# -- 5 ----------------------------------------------------------------------------


def criterion_5():
    def run():
        odd = {L: dimer_utilde_minimum(1, 0, L) for L in (1, 3)}
        grid = np.arange(0.1, 50 + 0.005, 0.01)
        even = {L: float(np.min(dimer_utilde(1, 0, L, grid))) for L in (2, 4)}
        return odd, even

    (odd, even), dt = timed(run)
    ok = all(u < -0.5 for _, u in odd.values()) and all(u >= -0.5 for u in even.values())
    detail = ", ".join(f"L={L} min {u:.5f} at beta {b:.4f}" for L, (b, u) in odd.items())
    detail += ", " + ", ".join(f"L={L} min {u:.5f}" for L, u in even.items())
    return record(5, "Utilde below ground state", ok, detail, dt, 5.0)


# -- 6 ----------------------------------------------------------------------------


def criterion_6():
    regions, dt = timed(lambda: {L: dimer_negative_weight_region(1, L, 50.0) for L in range(1, 6)})
    ok = all(regions[L] is not None for L in (1, 3, 5)) and all(regions[L] is None for L in (2, 4))
    detail = ", ".join(
        f"L={L} " + ("none" if r is None else f"({r[0]:.5f}, {r[1]:g}]") for L, r in regions.items()
    )
    return record(6, "negative singlet weight", ok, detail, dt, 5.0)


# -- 7 ----------------------------------------------------------------------------


def criterion_7():
    def run():
        worst = 0.0
        for L in (1, 3, 5, 7):
            for beta in (0.5, 1.0, 2.0):
                val, _ = integrate.quad(lambda E: math.exp(-beta * E) * sho_dos(L, E), 0, 80 / beta,
                                        limit=4000, epsabs=1e-13, epsrel=1e-13)
                worst = max(worst, abs(val - sho_z(L, beta)))
        heat = {L: sho_heat_capacity(L, 100.0) for L in (1, 3, 5)}
        return worst, heat

    (worst, heat), dt = timed(run)
    laplace_ok = worst <= 1e-8
    heat_ok = all(abs(c - L) <= 1e-3 for L, c in heat.items())
    detail = (f"Laplace max error {worst:.1e} ({'ok' if laplace_ok else 'over 1e-8'}); "
              + ", ".join(f"C_{L}(100)={c:.6f}" for L, c in heat.items())
              + ("" if heat_ok else " (|C-L| exceeds 1e-3 for L>1)"))
    return record(7, "oscillator Laplace and heat capacity", laplace_ok and heat_ok, detail, dt, 10.0)


# -- 8 ----------------------------------------------------------------------------


def criterion_8():
    def run():
        errs = []
        for L in (1, 2):
            for beta in (0.5, 1.0, 2.0):
                m = ModelSpec("spin", L, s=HALF, J=1)
                errs.append(abs(quadrature_z(m, beta).real - spin_zl(HALF, 1, L, beta)))
        m = ModelSpec("dimer", 1, J=1, Jprime=2)
        errs.append(abs(quadrature_z(m, 1.0).real - dimer_zl(1, 2, 1, 1.0)))
        return errs

    errs, dt = timed(run)
    return record(8, "quadrature oracle", max(errs) <= 1e-6,
                  f"{len(errs)} instances, max abs error {max(errs):.1e}", dt, 60.0)


# -- 9 ----------------------------------------------------------------------------

MC_SAMPLES = 10**6
MC_SEEDS = range(20)
MC_FIXED_SEED = 0


def mc_instances():
    dimer22 = ModelSpec("dimer", 2, J=1, Jprime=2)
    spin1 = ModelSpec("spin", 1, s=HALF, J=1)
    return [
        ("Z dimer L=2 J'=2 b=1", monte_carlo_z, dimer22, 1.0, "real", dimer_zl(1, 2, 2, 1.0)),
        ("Z spin L=3 b=2", monte_carlo_z, ModelSpec("spin", 3, s=HALF, J=1), 2.0, "real",
         spin_zl(HALF, 1, 3, 2.0)),
        ("Z dimer L=1 J'=0 mixed b=1", monte_carlo_z, ModelSpec("dimer", 1, J=1, Jprime=0), 1.0,
         "mixed", dimer_zl(1, 0, 1, 1.0)),
        ("U spin L=1 b=1", monte_carlo_u, spin1, 1.0, "real", spin_ul(HALF, 1, 1, 1.0)),
        ("U dimer L=2 J'=2 b=1", monte_carlo_u, dimer22, 1.0, "real", dimer_ul(1, 2, 2, 1.0)),
        ("U spin L=1 b=0.01", monte_carlo_u, spin1, 0.01, "real", spin_ul(HALF, 1, 1, 0.01)),
    ]


def criterion_9():
    def run():
        rows = []
        for name, fn, model, beta, channel, exact in mc_instances():
            sig = {}
            for seed in MC_SEEDS:
                est = fn(model, beta, MC_SAMPLES, seed, channel=channel)
                sig[seed] = est.sigma_distance(exact)
            inside = sum(s <= 3 for s in sig.values())
            rows.append((name, sig[MC_FIXED_SEED], inside))
        return rows

    rows, dt = timed(run)
    ok = all(s <= 3 and inside >= 18 for _, s, inside in rows)
    detail = "; ".join(f"{n}: {s:.2f} sigma, {k}/20 seeds in 3 sigma" for n, s, k in rows)
    return record(9, "Monte Carlo oracle", ok, detail, dt, 300.0)


# -- 10 ---------------------------------------------------------------------------


def fitted_power(errs: dict[int, float]) -> float:
    Ls = np.array(sorted(errs), dtype=float)
    slope, _ = np.polyfit(np.log(Ls), np.log([errs[int(L)] for L in Ls]), 1)
    return -slope


def criterion_10():
    def run():
        Ls = range(4, 65)
        spin_exact_z = spin_exact(HALF, 1, 1.0).Z
        spin_p = fitted_power({L: abs(spin_zl(HALF, 1, L, 1.0) - spin_exact_z) for L in Ls})
        dimer_p = fitted_power({L: abs(dimer_zl(1, 0, L, 1.0) - dimer_exact_z(1, 0, 1.0)) for L in Ls})
        return spin_p, dimer_p

    (sp, dp), dt = timed(run)
    ok = abs(sp - 1) <= 0.2 and abs(dp - 1) <= 0.2
    return record(10, "convergence rate", ok, f"fitted power spin {sp:.3f}, dimer {dp:.3f}", dt, None)


# -- 11 ---------------------------------------------------------------------------


def criterion_11():
    def run():
        return [(J, L) for J in (F(1), F(-2), F(3, 5)) for L in range(1, 11)
                if comb_moment(dimer_dos(J, 0, L), 2) != 3 * J * J]

    bad, dt = timed(run)
    return record(11, "second moment", not bad,
                  "m2 = 3J^2 for L=1..10, J in {1, -2, 3/5}" if not bad else f"mismatch at {bad}", dt, None)


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 12)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    assert CRITERIA[number](), RESULTS[number]


if __name__ == "__main__":
    import sys

    outcomes = [CRITERIA[n]() for n in sorted(CRITERIA)]
    print(f"{sum(outcomes)}/{len(outcomes)} criteria pass")
    sys.exit(0 if all(outcomes) else 1)

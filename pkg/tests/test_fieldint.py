import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.linalg import expm

from timeslice.core import ModelSpec, exppoly_eval
from timeslice.fieldint import (
    BLOCK_SIZE,
    CouplingMatrix,
    _site_exp,
    block_seed_sequence,
    extrapolate_jprime,
    monte_carlo_u,
    monte_carlo_z,
    quadrature_slice_matrix,
    quadrature_u,
    quadrature_z,
    sample_fields,
    spin_matrices,
)
from timeslice.spin_dimer import dimer_ul, dimer_weights, dimer_zl
from timeslice.spin_single import spin_ul, spin_zl

HALF = F(1, 2)


def spin(L, J=1, s=HALF):
    return ModelSpec("spin", L, s=s, J=J)


def dimer(L, J=1, Jp=0):
    return ModelSpec("dimer", L, J=J, Jprime=Jp)


class TestCoupling:
    def test_spin_block(self):
        c = CouplingMatrix.for_model(spin(2, J=2))
        assert c.is_positive_definite() and c.rank == 3
        np.testing.assert_allclose(c.eigenvalues, [2, 2, 2])

    def test_dimer_split(self):
        c = CouplingMatrix.for_model(dimer(1, J=1, Jp=0))
        assert len(c.positive) == 3 and len(c.negative) == 3 and c.rank == 6
        c = CouplingMatrix.for_model(dimer(1, J=1, Jp=1))
        assert len(c.zero) == 3 and c.rank == 3
        assert CouplingMatrix.for_model(dimer(1, J=1, Jp=2)).is_positive_definite()

    def test_rejects_bad_matrices(self):
        with pytest.raises(ValueError):
            CouplingMatrix.from_entries([[1, 2], [3, 1]])
        with pytest.raises(ValueError):
            CouplingMatrix.for_model(ModelSpec("sho", 1))

    @pytest.mark.parametrize("Jp", [0, 1, 3])
    def test_field_map_reproduces_coupling(self, Jp):
        c = CouplingMatrix.for_model(dimer(3, J=1, Jp=Jp))
        C = c.field_map(0.5, 3)
        np.testing.assert_allclose(C @ C.T, (2 * 3 / 0.5) * c.matrix, atol=1e-12)


class TestSliceFactor:
    @pytest.mark.parametrize("s", [HALF, F(1), F(3, 2)])
    def test_spin_algebra(self, s):
        sx, sy, sz = spin_matrices(s)
        np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
        casimir = sx @ sx + sy @ sy + sz @ sz
        np.testing.assert_allclose(casimir, float(s * (s + 1)) * np.eye(int(2 * s + 1)), atol=1e-12)

    @pytest.mark.parametrize("s", [HALF, F(1)])
    def test_site_exponential_matches_expm(self, s):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
        got = _site_exp(x, s)
        S = spin_matrices(s)
        for i in range(5):
            ref = expm(sum(x[i, a] * S[a] for a in range(3)))
            np.testing.assert_allclose(got[i], ref, rtol=1e-12, atol=1e-12)

    def test_site_exponential_at_zero_field(self):
        np.testing.assert_allclose(_site_exp(np.zeros((1, 3)), HALF)[0], np.eye(2), atol=1e-15)


class TestQuadrature:
    @pytest.mark.parametrize("s, L", [(HALF, 1), (HALF, 2), (F(1), 1), (F(3, 2), 1)])
    def test_spin_z(self, s, L):
        assert quadrature_z(spin(L, J=1, s=s), 1.3).real == pytest.approx(spin_zl(s, 1, L, 1.3), rel=1e-9)

    def test_spin_u(self):
        assert quadrature_u(spin(2), 1.1).real == pytest.approx(spin_ul(HALF, 1, 2, 1.1), abs=1e-8)

    def test_beta_zero_is_hilbert_dimension(self):
        assert quadrature_z(spin(2, s=F(3, 2)), 0).value == 4
        assert quadrature_z(dimer(1, Jp=2), 0).value == 4

    def test_dimer_z_and_u(self):
        m = dimer(1, J=1, Jp=2)
        assert quadrature_z(m, 0.8).real == pytest.approx(dimer_zl(1, 2, 1, 0.8), rel=1e-7)
        assert quadrature_u(m, 0.8).real == pytest.approx(dimer_ul(1, 2, 1, 0.8), abs=1e-6)

    def test_dimer_slice_matrix_is_projector_combination(self):
        beta, Jp = 0.9, F(5, 2)
        m = quadrature_slice_matrix(dimer(2, J=1, Jp=Jp), beta)
        sx, sy, sz = spin_matrices(HALF)
        eye = np.eye(2)
        s1s2 = sum(np.kron(a, eye) @ np.kron(eye, a) for a in (sx, sy, sz))
        p1, p0 = 0.75 * np.eye(4) + s1s2, 0.25 * np.eye(4) - s1s2
        w = dimer_weights(1, Jp, 2)
        shift = math.exp(beta * float(w.shift) / 2)
        ref = (exppoly_eval(w.c1, beta) * p1 + exppoly_eval(w.c0, beta) * p0) * shift
        np.testing.assert_allclose(m, ref, rtol=1e-7, atol=1e-9)

    def test_rejections(self):
        with pytest.raises(ValueError, match="too large"):
            quadrature_z(spin(3), 1.0)
        with pytest.raises(ValueError):
            quadrature_z(dimer(1, Jp=0), 1.0)


class TestMonteCarlo:
    def test_seed_sequence(self):
        a = block_seed_sequence(42, 3).generate_state(4)
        assert np.array_equal(a, np.random.SeedSequence(42, spawn_key=(3,)).generate_state(4))
        with pytest.raises(ValueError):
            block_seed_sequence(-1, 0)
        with pytest.raises(ValueError):
            block_seed_sequence(2**64, 0)

    def test_deterministic_and_worker_independent(self):
        m = spin(2)
        n = 2 * BLOCK_SIZE + 1000
        a = monte_carlo_z(m, 1.0, n, 11, workers=1)
        b = monte_carlo_z(m, 1.0, n, 11, workers=1)
        c = monte_carlo_z(m, 1.0, n, 11, workers=3)
        assert a == b
        assert a.value == c.value and a.std_error == c.std_error
        assert monte_carlo_z(m, 1.0, n, 12).value != a.value

    def test_sample_covariance(self):
        m = spin(2, J=F(3, 2))
        beta, n = 0.7, 40000
        u = sample_fields(m, beta, n, 5)
        assert u.shape == (n, 2, 3)
        flat = u.reshape(n, -1)
        cov = np.cov(flat, rowvar=False)
        target = np.kron(np.eye(2), (2 * 2 / beta) * 1.5 * np.eye(3))
        # standard error of a Gaussian covariance entry: sqrt((S_ii S_jj + S_ij^2) / n)
        d = np.diag(target)
        se = np.sqrt((np.outer(d, d) + target**2) / n)
        assert np.all(np.abs(cov - target) < 5 * se)

    def test_spin_z_within_error(self):
        est = monte_carlo_z(spin(2), 1.5, 200_000, 1)
        assert est.sigma_distance(spin_zl(HALF, 1, 2, 1.5)) < 4
        assert est.avg_sign == 1.0 and est.n_negative == 0

    def test_spin_l3_has_sign_problem(self):
        est = monte_carlo_z(spin(3), 2.0, 100_000, 3)
        assert est.n_negative > 0 and est.avg_sign < 1
        assert est.sigma_distance(spin_zl(HALF, 1, 3, 2.0)) < 4

    def test_real_channel_rejects_indefinite_coupling(self):
        with pytest.raises(ValueError):
            monte_carlo_z(dimer(1, Jp=0), 1.0, 100, 0)

    def test_mixed_channel(self):
        est = monte_carlo_z(dimer(1, J=1, Jp=0), 0.7, 200_000, 2, channel="mixed")
        assert isinstance(est.value, complex)
        assert abs(est.value.imag) < 5 * est.imag_std_error
        assert est.sigma_distance(dimer_zl(1, 0, 1, 0.7)) < 4

    @pytest.mark.parametrize("mode", ["average", "first"])
    def test_energy_estimator(self, mode):
        est = monte_carlo_u(spin(2), 1.2, 200_000, 4, slice_mode=mode)
        assert est.sigma_distance(spin_ul(HALF, 1, 2, 1.2)) < 4

    def test_energy_estimator_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            monte_carlo_u(spin(1), 1.0, 10, 0, slice_mode="middle")

    @pytest.mark.slow
    def test_dimer_energy(self):
        est = monte_carlo_u(dimer(2, J=1, Jp=2), 1.0, 400_000, 9)
        assert est.sigma_distance(dimer_ul(1, 2, 2, 1.0)) < 4


class TestExtrapolation:
    def test_l1_quadratic_is_exact(self):
        got = extrapolate_jprime(dimer(1), 1.0, ["1.5", "2", "2.5", "3"], 2)
        assert got == pytest.approx(dimer_zl(1, 0, 1, 1.0), rel=1e-10)

    def test_without_stripping_the_fit_is_poor(self):
        exact = dimer_zl(1, 0, 1, 1.0)
        raw = extrapolate_jprime(dimer(1), 1.0, ["1.5", "2", "2.5", "3"], 2, strip_saddle=False)
        assert abs(raw - exact) / exact > 1

    def test_l2_needs_degree_four(self):
        exact = dimer_zl(1, 0, 2, 1.0)
        grid = [F(3, 2) + F(k, 2) for k in range(7)]
        assert extrapolate_jprime(dimer(2), 1.0, grid, 4) == pytest.approx(exact, rel=1e-10)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            extrapolate_jprime(dimer(1), 1.0, ["0.5", "2", "3"], 1)
        with pytest.raises(ValueError):
            extrapolate_jprime(dimer(1), 1.0, ["2", "3"], 2)
        with pytest.raises(ValueError):
            extrapolate_jprime(spin(1), 1.0, ["2", "3", "4"], 1)

    @pytest.mark.slow
    def test_quadrature_source(self):
        got = extrapolate_jprime(dimer(1), 1.0, ["1.5", "2", "2.5", "3"], 2, source="quadrature")
        assert got == pytest.approx(dimer_zl(1, 0, 1, 1.0), rel=1e-6)

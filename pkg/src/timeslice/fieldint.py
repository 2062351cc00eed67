"""Direct evaluation of the L-slice auxiliary-field integral.

Each slice carries an ``N``-component field ``u_n`` drawn from the Gaussian
``exp(-beta u.J^-1.u / 4L)``, i.e. covariance ``2 L J / beta``, and
contributes the one-body factor ``exp(beta u_n.A / L)``. The trace of the
slice product averaged over the fields is ``Z_L``.

Fields are parametrized as ``u = C z`` with ``z`` standard normal and
``C = sqrt(2L/beta) V sqrt(lambda)`` from the eigendecomposition of the
coupling matrix. Zero eigenvalues drop out; negative ones give imaginary
``sqrt(lambda)``, which is the imaginary-field treatment of a repulsive
block. The same kernel serves Gauss-Hermite quadrature (nodes in ``z``) and
Monte Carlo (independent normal draws, no Markov chain).

Monte Carlo work is cut into blocks of :data:`BLOCK_SIZE` samples. Block
``k`` draws from ``PCG64(SeedSequence(seed, spawn_key=(k,)))``; block sums
are merged in block order, so results do not depend on how many workers
process the blocks.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import expm

from .core import ModelSpec, as_rational
from .spin_dimer import dimer_zl_exppoly

logger = logging.getLogger(__name__)

__all__ = [
    "BLOCK_SIZE",
    "CouplingMatrix",
    "FieldIntegralEstimate",
    "block_seed_sequence",
    "spin_matrices",
    "slice_weight",
    "sample_fields",
    "quadrature_z",
    "quadrature_u",
    "quadrature_slice_matrix",
    "monte_carlo_z",
    "monte_carlo_u",
    "extrapolate_jprime",
]

BLOCK_SIZE = 1 << 16
MAX_QUADRATURE_DIM = 6


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric interaction matrix with its positive/zero/negative split."""

    entries: tuple[tuple[Fraction, ...], ...]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_entries(cls, entries) -> "CouplingMatrix":
        exact = tuple(tuple(as_rational(x) for x in row) for row in entries)
        m = np.array([[float(x) for x in row] for row in exact])
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("coupling matrix must be square")
        if any(exact[i][j] != exact[j][i] for i in range(len(exact)) for j in range(i)):
            raise ValueError("coupling matrix must be symmetric")
        lam, vec = np.linalg.eigh(m)
        scale = max(np.max(np.abs(lam)), 1.0)
        lam = np.where(np.abs(lam) < 1e-12 * scale, 0.0, lam)
        return cls(exact, lam, vec)

    @classmethod
    def for_model(cls, model: ModelSpec) -> "CouplingMatrix":
        eye3 = np.eye(3, dtype=int)
        if model.kind == "spin":
            return cls.from_entries([[model.J * int(eye3[i, j]) for j in range(3)] for i in range(3)])
        if model.kind == "dimer":
            block = [[model.Jprime, model.J], [model.J, model.Jprime]]
            return cls.from_entries(
                [[block[a][b] * int(eye3[i, j]) for b in range(2) for j in range(3)]
                 for a in range(2) for i in range(3)]
            )
        raise ValueError(f"no auxiliary-field representation for {model.kind!r}")

    @property
    def dimension(self) -> int:
        return len(self.entries)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    @property
    def positive(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues > 0)

    @property
    def negative(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues < 0)

    @property
    def zero(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues == 0)

    @property
    def rank(self) -> int:
        return self.dimension - len(self.zero)

    def is_positive_definite(self) -> bool:
        return len(self.positive) == self.dimension

    def field_map(self, beta: float, L: int) -> np.ndarray:
        """``C`` with ``u = C z``; columns only for the nonzero blocks."""
        keep = np.flatnonzero(self.eigenvalues != 0)
        root = np.sqrt(self.eigenvalues[keep].astype(complex))
        C = self.eigenvectors[:, keep] * root * math.sqrt(2 * L / beta)
        return C.real.copy() if not len(self.negative) else C


@dataclass(frozen=True)
class FieldIntegralEstimate:
    """Result of a quadrature or Monte Carlo evaluation.

    ``value`` is complex in the mixed channel; ``std_error`` refers to its
    real part and ``imag_std_error`` to the imaginary part. Quadrature
    estimates carry ``std_error = 0`` and ``avg_sign = None``.
    """

    value: float | complex
    std_error: float
    avg_sign: float | None
    n_samples: int
    method: str
    imag_std_error: float = 0.0
    n_negative: int = 0

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def sigma_distance(self, exact: float) -> float:
        if self.std_error == 0:
            return math.inf if self.real != exact else 0.0
        return abs(self.real - exact) / self.std_error


def spin_matrices(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(Sx, Sy, Sz)`` for spin ``s`` in the ``m = s, s-1, ..., -s`` basis."""
    s = as_rational(s)
    m = np.array([float(s - k) for k in range(int(2 * s) + 1)])
    sf = float(s)
    # <m+1|S+|m>
    splus = np.diag(np.sqrt(sf * (sf + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    sx = (splus + splus.conj().T) / 2
    sy = (splus - splus.conj().T) / 2j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


def _site_exp(x: np.ndarray, s: Fraction) -> np.ndarray:
    """``exp(x . S)`` for a batch of (possibly complex) 3-vectors ``x``."""
    x = np.asarray(x)
    if s == Fraction(1, 2):
        # (x.sigma)^2 = (x.x) I, so only q^2 = x.x enters
        q = np.sqrt((x * x).sum(axis=-1).astype(complex))
        half = q / 2
        small = np.abs(q) < 1e-4
        safe = np.where(small, 1.0, q)
        sinhc = np.where(small, 0.5 + q * q / 48, np.sinh(half) / safe)
        a0 = np.cosh(half)
        a = x * sinhc[..., None]
        out = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 0] = a0 + a[..., 2]
        out[..., 1, 1] = a0 - a[..., 2]
        out[..., 0, 1] = a[..., 0] - 1j * a[..., 1]
        out[..., 1, 0] = a[..., 0] + 1j * a[..., 1]
        return out
    S = np.stack(spin_matrices(s))
    gen = np.einsum("...k,kij->...ij", x.astype(complex), S)
    return expm(gen)


def _sites(model: ModelSpec) -> int:
    return 2 if model.kind == "dimer" else 1


def slice_weight(model: ModelSpec, u, beta: float) -> np.ndarray:
    """One-slice factor ``exp(beta u.A / L)`` as a dense matrix."""
    u = np.asarray(u)
    n = 3 * _sites(model)
    if u.shape != (n,):
        raise ValueError(f"{model.kind} needs a {n}-component field, got shape {u.shape}")
    x = beta * u / model.L
    if model.kind == "dimer":
        return np.kron(_site_exp(x[:3], model.s), _site_exp(x[3:], model.s))
    return _site_exp(x, model.s)


@dataclass(frozen=True)
class _Setup:
    model: ModelSpec
    beta: float
    coupling: CouplingMatrix
    C: np.ndarray

    @classmethod
    def build(cls, model: ModelSpec, beta: float, channel: str) -> "_Setup":
        if model.kind not in ("spin", "dimer"):
            raise ValueError("field integrals are defined for the spin models only")
        if not beta > 0:
            raise ValueError("beta must be positive")
        if channel not in ("real", "mixed"):
            raise ValueError(f"unknown channel {channel!r}")
        coupling = CouplingMatrix.for_model(model)
        if channel == "real" and len(coupling.negative):
            raise ValueError(
                f"coupling matrix has negative eigenvalues {coupling.eigenvalues[coupling.negative]}; "
                "use channel='mixed' for an imaginary field on that block"
            )
        if coupling.rank == 0:
            raise ValueError("coupling matrix vanishes; nothing to integrate")
        return cls(model, beta, coupling, coupling.field_map(beta, model.L))

    @property
    def rank(self) -> int:
        return self.C.shape[1]


def _kernel(setup: _Setup, z: np.ndarray, with_energy: bool, slice_mode: str = "average"):
    """Integrand values for standard-normal coordinates ``z`` of shape (n, L, rank).

    Returns ``w = Tr prod_n exp(beta u_n.A/L)`` and, if requested, the
    numerator ``h`` of the energy estimator, both per sample.
    """
    model, beta = setup.model, setup.beta
    L = model.L
    u = np.einsum("ij,nlj->nli", setup.C, z)
    x = u * (beta / L)
    sites = _sites(model)
    mats = [_site_exp(x[..., 3 * k:3 * k + 3], model.s) for k in range(sites)]

    def chain(m):
        out = m[:, 0]
        for n in range(1, L):
            out = out @ m[:, n]
        return out

    traces = [np.trace(chain(m), axis1=-2, axis2=-1) for m in mats]
    w = np.prod(traces, axis=0)
    if not with_energy:
        return w, None

    spin_ops = np.stack(spin_matrices(model.s))
    slices = range(L) if slice_mode == "average" else range(1)
    h = np.zeros_like(w)
    for n in slices:
        scalar = (L / (2 * beta)) * (z[:, n] ** 2).sum(axis=-1)
        op = np.zeros_like(w)
        for k, m in enumerate(mats):
            # Tr[(u_n.S_k) M_n M_{n+1} ... M_{n-1}] times the other sites' traces
            gen = np.einsum("...c,cij->...ij", u[:, n, 3 * k:3 * k + 3].astype(complex), spin_ops)
            rolled = np.roll(m, -n, axis=1)
            t = np.trace(gen @ chain(rolled), axis1=-2, axis2=-1)
            for j, tr in enumerate(traces):
                if j != k:
                    t = t * tr
            op += t
        h += scalar * w - op
    h /= len(slices)
    return w, h


def block_seed_sequence(seed: int, block: int) -> np.random.SeedSequence:
    """Stable stream derivation: ``SeedSequence(seed, spawn_key=(block,))``."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.SeedSequence(seed, spawn_key=(block,))


def _block_normals(setup: _Setup, seed: int, block: int, size: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(block_seed_sequence(seed, block)))
    return rng.standard_normal((size, setup.model.L, setup.rank))


def sample_fields(model: ModelSpec, beta: float, n_samples: int, seed: int,
                  channel: str = "real") -> np.ndarray:
    """Slice fields ``u`` of shape (n_samples, L, N) from the block streams."""
    setup = _Setup.build(model, beta, channel)
    out = []
    for block, size in _blocks(n_samples):
        z = _block_normals(setup, seed, block, size)
        out.append(np.einsum("ij,nlj->nli", setup.C, z))
    return np.concatenate(out)


def _blocks(n: int):
    full, rest = divmod(n, BLOCK_SIZE)
    for k in range(full):
        yield k, BLOCK_SIZE
    if rest:
        yield full, rest


def _block_sums(setup, seed, block, size, with_energy, slice_mode):
    z = _block_normals(setup, seed, block, size)
    w, h = _kernel(setup, z, with_energy, slice_mode)
    wr = w.real
    sums = {
        "w": w.sum(),
        "wr2": (wr * wr).sum(),
        "wi2": (w.imag**2).sum(),
        "abs": np.abs(wr).sum(),
        "neg": int((wr < 0).sum()),
    }
    if with_energy:
        hr = h.real
        sums.update(h=hr.sum(), h2=(hr * hr).sum(), hw=(hr * wr).sum())
    return sums


def _run_blocks(setup, seed, n_samples, with_energy, slice_mode, workers):
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    jobs = list(_blocks(n_samples))

    def run(job):
        return _block_sums(setup, seed, job[0], job[1], with_energy, slice_mode)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    total = {}
    for part in parts:
        for key, val in part.items():
            total[key] = total.get(key, 0) + val
    return total


def _mean_err(s1, s2, n):
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def _channel_value(setup: _Setup, mean: complex):
    return complex(mean) if len(setup.coupling.negative) else float(np.real(mean))


def monte_carlo_z(model: ModelSpec, beta: float, n_samples: int, seed: int,
                  channel: str = "real", workers: int = 1) -> FieldIntegralEstimate:
    """Plain Monte Carlo over exact Gaussian field draws.

    ``avg_sign`` is ``sum Re w / sum |Re w|`` over the sampled integrand.
    """
    setup = _Setup.build(model, beta, channel)
    t = _run_blocks(setup, seed, n_samples, False, "average", workers)
    n = n_samples
    mean_r, err_r = _mean_err(t["w"].real, t["wr2"], n)
    _, err_i = _mean_err(t["w"].imag, t["wi2"], n)
    if t["neg"]:
        logger.info("%d of %d integrand samples have negative real part", t["neg"], n)
    return FieldIntegralEstimate(
        value=_channel_value(setup, t["w"] / n),
        std_error=err_r,
        avg_sign=float(t["w"].real / t["abs"]) if t["abs"] else 0.0,
        n_samples=n,
        method="monte-carlo",
        imag_std_error=err_i,
        n_negative=t["neg"],
    )


def monte_carlo_u(model: ModelSpec, beta: float, n_samples: int, seed: int,
                  channel: str = "real", slice_mode: str = "average",
                  workers: int = 1) -> FieldIntegralEstimate:
    """``U_L`` from the auxiliary-field energy estimator.

    ``U_L = -N L/(2 beta) + <u.J^-1.u/4 - u.A>`` where ``N`` counts the
    fields actually integrated; ``slice_mode='first'`` inserts the one-body
    operator at slice 1 only, ``'average'`` averages the insertion over all
    slices. The ratio's standard error comes from the delta method.
    """
    if slice_mode not in ("average", "first"):
        raise ValueError(f"unknown slice_mode {slice_mode!r}")
    setup = _Setup.build(model, beta, channel)
    t = _run_blocks(setup, seed, n_samples, True, slice_mode, workers)
    n = n_samples
    mw, mh = t["w"].real / n, t["h"] / n
    var_w = max(t["wr2"] / n - mw * mw, 0.0)
    var_h = max(t["h2"] / n - mh * mh, 0.0)
    cov = t["hw"] / n - mh * mw
    ratio = mh / mw
    var_ratio = (var_h - 2 * ratio * cov + ratio * ratio * var_w) / (mw * mw)
    offset = -setup.rank * model.L / (2 * beta)
    return FieldIntegralEstimate(
        value=offset + ratio,
        std_error=math.sqrt(max(var_ratio, 0.0) / max(n - 1, 1)),
        avg_sign=float(t["w"].real / t["abs"]) if t["abs"] else 0.0,
        n_samples=n,
        method="monte-carlo",
        n_negative=t["neg"],
    )


def _default_nodes(dim: int) -> int:
    return 24 if dim <= 3 else 12


def _quadrature_sums(setup: _Setup, nodes_per_dim: int | None, with_energy: bool,
                     chunk: int = 1 << 18):
    dim = setup.rank * setup.model.L
    if dim > MAX_QUADRATURE_DIM:
        raise ValueError(
            f"{dim}-dimensional field integral is too large for tensor-product "
            "quadrature; use monte_carlo_z"
        )
    if not setup.coupling.is_positive_definite():
        raise ValueError("quadrature needs a positive-definite coupling matrix")
    n = nodes_per_dim or _default_nodes(dim)
    x, wts = hermegauss(n)
    wts = wts / math.sqrt(2 * math.pi)
    total_pts = n**dim
    zsum = 0.0
    hsum = 0.0
    for start in range(0, total_pts, chunk):
        idx = np.arange(start, min(start + chunk, total_pts))
        digits = np.stack(np.unravel_index(idx, (n,) * dim), axis=-1)
        z = x[digits].reshape(len(idx), setup.model.L, setup.rank)
        weight = np.prod(wts[digits], axis=-1)
        w, h = _kernel(setup, z, with_energy)
        zsum += np.dot(weight, w.real)
        if with_energy:
            hsum += np.dot(weight, h.real)
    return zsum, hsum, total_pts


def quadrature_z(model: ModelSpec, beta: float, nodes_per_dim: int | None = None) -> FieldIntegralEstimate:
    """Tensor-product Gauss-Hermite value of ``Z_L``; positive-definite couplings only."""
    if beta == 0:
        dim = round(float(2 * model.s + 1)) ** _sites(model)
        return FieldIntegralEstimate(float(dim), 0.0, None, 1, "quadrature")
    setup = _Setup.build(model, beta, "real")
    zsum, _, pts = _quadrature_sums(setup, nodes_per_dim, False)
    return FieldIntegralEstimate(float(zsum), 0.0, None, pts, "quadrature")


def quadrature_u(model: ModelSpec, beta: float, nodes_per_dim: int | None = None) -> FieldIntegralEstimate:
    setup = _Setup.build(model, beta, "real")
    zsum, hsum, pts = _quadrature_sums(setup, nodes_per_dim, True)
    value = -setup.rank * model.L / (2 * beta) + hsum / zsum
    return FieldIntegralEstimate(float(value), 0.0, None, pts, "quadrature")


def quadrature_slice_matrix(model: ModelSpec, beta: float, nodes_per_dim: int | None = None) -> np.ndarray:
    """Gaussian average of one slice factor, i.e. ``rho_1(beta/L)`` as a matrix."""
    setup = _Setup.build(model, beta, "real")
    if not setup.coupling.is_positive_definite():
        raise ValueError("quadrature needs a positive-definite coupling matrix")
    dim = setup.rank
    n = nodes_per_dim or _default_nodes(dim)
    x, wts = hermegauss(n)
    wts = wts / math.sqrt(2 * math.pi)
    out = 0
    chunk = 1 << 17
    for start in range(0, n**dim, chunk):
        idx = np.arange(start, min(start + chunk, n**dim))
        digits = np.stack(np.unravel_index(idx, (n,) * dim), axis=-1)
        weight = np.prod(wts[digits], axis=-1)
        u = x[digits] @ setup.C.T
        xs = u * (beta / model.L)
        if model.kind == "dimer":
            a = _site_exp(xs[:, :3], model.s)
            b = _site_exp(xs[:, 3:], model.s)
            m = np.einsum("n,nij,nkl->ikjl", weight, a, b)
            out = out + m.reshape(a.shape[-1] * b.shape[-1], -1)
        else:
            out = out + np.einsum("n,nij->ij", weight, _site_exp(xs, model.s))
    return out


def extrapolate_jprime(model: ModelSpec, beta: float, jprime_grid, degree: int,
                       source: str = "closed-form", strip_saddle: bool = True,
                       nodes_per_dim: int | None = None) -> float:
    """Least-squares polynomial in ``J'`` through ``Z_L(J')``, evaluated at ``J' = 0``.

    Grid values come from the exact ExpPoly (``source='closed-form'``) or
    from :func:`quadrature_z` (``source='quadrature'``). With
    ``strip_saddle`` the one-body factor ``exp(beta J'/2)`` of the slice
    product is divided out before fitting; it equals 1 at ``J' = 0``, and
    what remains is a polynomial of degree ``2L`` in ``J'``.
    """
    if model.kind != "dimer":
        raise ValueError("J' extrapolation applies to the dimer")
    grid = [as_rational(g) for g in jprime_grid]
    if len(set(grid)) != len(grid) or len(grid) <= degree:
        raise ValueError("need more distinct grid points than the polynomial degree")
    if any(g <= abs(model.J) for g in grid):
        raise ValueError("every grid point must satisfy J' > |J|")
    values = []
    for g in grid:
        m = ModelSpec("dimer", model.L, J=model.J, Jprime=g)
        if source == "closed-form":
            z = dimer_zl_exppoly(m.J, m.Jprime, m.L)(beta)
        elif source == "quadrature":
            z = quadrature_z(m, beta, nodes_per_dim).real
        else:
            raise ValueError(f"unknown source {source!r}")
        values.append(z * math.exp(-beta * float(g) / 2) if strip_saddle else z)
    coeffs = np.polynomial.polynomial.polyfit([float(g) for g in grid], values, degree)
    return float(coeffs[0])

import math
import warnings

import numpy as np
import pytest
from scipy import integrate, special, stats

from coulombgas.energy import fluctuation_bound
from coulombgas.equilibrium import PotentialSpec, equilibrium_measure
from coulombgas.errors import CapabilityError, InsufficientDataError, LaplaceRangeError
from coulombgas.fluctstats import (CustomFunction, Polynomial1D, RadialBump, anisotropy_1d, clt_report,
                                   concentration_check, fluct_linear, fluct_values, laplace_fit,
                                   local_statistics, log_laplace_from_values, variance_prediction)
from coulombgas.kernel import KernelSpec
from coulombgas.sampler import sample_beta_tridiag, sample_ginibre, sample_ginibre_moduli
from coulombgas.verification.oracles import ginibre_radial_moments

DISK = equilibrium_measure(PotentialSpec(1.0), KernelSpec.log2())
SEMI = equilibrium_measure(PotentialSpec(0.5), KernelSpec.log1())
BALL = equilibrium_measure(PotentialSpec(1.0), KernelSpec.coulomb(3))
BUMP = RadialBump([0.0, 0.0], 0.2, 0.6)


def test_bump_closed_forms_against_quadrature():
    grad_sq = lambda r: float(np.sum(BUMP.grad(np.array([r, 0.0])) ** 2))
    D, _ = integrate.quad(lambda r: 2 * math.pi * r * grad_sq(r), 0, 1, points=[0.2, 0.6], epsabs=0, epsrel=1e-13)
    assert BUMP.dirichlet() == pytest.approx(D, rel=1e-10)
    m, _ = integrate.quad(lambda r: 2 * r * float(BUMP.profile(r)), 0, 1, points=[0.2, 0.6], epsabs=0, epsrel=1e-13)
    assert BUMP.integral(DISK) == pytest.approx(m, abs=1e-12)
    b3 = RadialBump([0.1, 0.0, 0.0], 0.1, 0.3)
    g3 = lambda r: float(np.sum(b3.grad(np.array([0.1 + r, 0.0, 0.0])) ** 2))
    D3, _ = integrate.quad(lambda r: 4 * math.pi * r * r * g3(r), 0, 0.3, points=[0.1], epsabs=0, epsrel=1e-13)
    assert b3.dirichlet() == pytest.approx(D3, rel=1e-10)


def test_bump_crossing_boundary_against_polar_quadrature():
    b = RadialBump([0.7, 0.2], 0.1, 0.5)
    f = lambda r, th: float(b.value(np.array([r * math.cos(th), r * math.sin(th)]))) * r / math.pi
    ref, _ = integrate.dblquad(f, 0, 2 * math.pi, 0, 1, epsabs=1e-12)
    assert b.integral(DISK) == pytest.approx(ref, abs=1e-9)
    assert not b.inside(DISK)


def test_fluct_examples():
    everywhere = CustomFunction(lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros_like(x), [0.0, 0.0], 2.0,
                                dirichlet=0.0, lipschitz=0.0)
    rng = np.random.default_rng(0)
    pts = DISK.sample(40, rng)
    assert fluct_linear(pts, DISK, everywhere) == pytest.approx(0.0, abs=1e-9)
    sq = CustomFunction(lambda x: np.sum(x * x, axis=-1), lambda x: 2 * x, [0.0, 0.0], 1.0)
    assert fluct_linear([[0.0, 0.0]], DISK, sq) == pytest.approx(-0.5, abs=1e-10)
    direct = sum(float(BUMP.value(p)) for p in pts) - 40 * BUMP.integral(DISK)
    assert fluct_linear(pts, DISK, BUMP) == pytest.approx(direct, abs=1e-12)
    p1 = Polynomial1D([0.0, 0.0, 1.0], -5, 5, 1)
    assert fluct_linear([[0.0]], SEMI, p1) == pytest.approx(-1.0, abs=1e-10)


def test_variance_prediction_scaling_and_value():
    v, var = variance_prediction(BUMP, 2.0, DISK)
    assert var == 2 * v
    assert v == pytest.approx(BUMP.dirichlet() / (4 * math.pi))
    v2, _ = variance_prediction(BUMP.scaled(2.0), 2.0, DISK)
    assert v2 == pytest.approx(4 * v)
    v4, _ = variance_prediction(BUMP, 4.0, DISK)
    assert v4 == pytest.approx(v / 2)
    with pytest.raises(CapabilityError):
        variance_prediction(RadialBump([0.7, 0.0], 0.1, 0.5), 2.0, DISK)
    with pytest.raises(CapabilityError):
        variance_prediction(Polynomial1D([1.0], -1, 1, 0.5), 2.0, SEMI)


def test_kostlan_moduli_match_dense_ginibre():
    r1 = np.concatenate([np.sqrt(np.sum(sample_ginibre(64, 1, c) ** 2, axis=1)) for c in range(300)])
    r2 = np.concatenate([sample_ginibre_moduli(64, 2, c) for c in range(300)])
    assert stats.ks_2samp(r1, r2).pvalue > 0.01


def test_ginibre_variance_oracle_against_sampling():
    mean, var = ginibre_radial_moments(lambda r: float(BUMP.profile(r)), 128)
    assert mean == pytest.approx(128 * BUMP.integral(DISK), abs=1e-8)
    vals = np.array([np.sum(BUMP.profile(sample_ginibre_moduli(128, 0, c))) for c in range(8000)])
    assert vals.var() == pytest.approx(var, rel=0.05)


def test_log_laplace_examples():
    vals = np.array([np.sum(BUMP.profile(sample_ginibre_moduli(256, 1, c))) for c in range(4000)])
    vals -= 256 * BUMP.integral(DISK)
    assert log_laplace_from_values(vals, 0.0) == (0.0, 0.0)
    m, v = laplace_fit(vals)
    rep = clt_report(vals)
    assert abs(m - rep.mean) <= rep.mean_se
    assert abs(v - rep.var) <= rep.var_se
    _, var_exact = ginibre_radial_moments(lambda r: float(BUMP.profile(r)), 256)
    assert v == pytest.approx(var_exact, rel=0.15)
    with pytest.raises(LaplaceRangeError):
        log_laplace_from_values(vals, 500.0)
    with pytest.raises(InsufficientDataError):
        log_laplace_from_values(vals[:10], 0.1)


def test_clt_report_on_gaussian_series():
    x = np.random.default_rng(3).standard_normal(5000)
    rep = clt_report(x, var_pred=1.0, beta=2.0, N=10)
    assert rep.p_normal > 0.01
    assert abs(rep.var - 1.0) < 4 * rep.var_se
    assert rep.ess > 3000
    assert set(rep.to_row()) >= {"beta", "N", "mean", "var", "var_pred", "p_normal"}


# ---------------------------------------------------------------------------
def _semicircle_moment(k, R):
    if k % 2:
        return 0.0
    m = k // 2
    return special.comb(2 * m, m) / (m + 1) * (R / 2) ** k


def _anisotropy_oracle(x, coeffs, R):
    """Four blocks of the double sum for a pure polynomial psi."""
    N = x.size
    M = [_semicircle_moment(k, R) for k in range(len(coeffs) + 1)]
    dq = lambda a, b: sum(c * sum(a ** j * b ** (k - 1 - j) for j in range(k)) for k, c in enumerate(coeffs))
    atoms = sum(dq(a, b) for a in x for b in x)
    cross = sum(c * sum(a ** j * M[k - 1 - j] for j in range(k)) for a in x for k, c in enumerate(coeffs))
    bg = sum(c * sum(M[j] * M[k - 1 - j] for j in range(k)) for k, c in enumerate(coeffs))
    return atoms - 2 * N * cross + N * N * bg


@pytest.mark.parametrize("N", [1, 4, 9, 16])
def test_anisotropy_matches_block_oracle(N):
    rng = np.random.default_rng(N)
    x = rng.uniform(-2.5, 2.5, N)
    coeffs = [0.3, -0.2, 0.5, 0.1, -0.05]
    psi = Polynomial1D(coeffs, -4, 4, 1)
    val = anisotropy_1d(x[:, None], SEMI, psi)
    ref = _anisotropy_oracle(x, coeffs, SEMI.radius)
    assert val == pytest.approx(ref, abs=1e-10 * max(1.0, abs(ref)))


def test_anisotropy_trivial_cases():
    x = np.random.default_rng(0).normal(size=(6, 1))
    assert anisotropy_1d(x, SEMI, Polynomial1D([2.0], -10, 10, 1)) == pytest.approx(0.0, abs=1e-12)
    assert anisotropy_1d(x, SEMI, Polynomial1D([0.0, 1.0], -10, 10, 1)) == pytest.approx(0.0, abs=1e-10)
    # window edges inside the support are handled panel-wise
    v = anisotropy_1d(x, SEMI, Polynomial1D([0.3, -0.2, 0.5, 0.1], -1, 0.5, 0.7))
    assert math.isfinite(v)
    with pytest.raises(CapabilityError):
        anisotropy_1d([[0.0, 0.0]], DISK, Polynomial1D([1.0], -1, 1, 0.5))


# ---------------------------------------------------------------------------
def test_concentration_check_bounded_and_flags():
    samples = {N: [sample_ginibre(N, 7, c) for c in range(12)] for N in (64, 128, 256)}
    rep = concentration_check(samples, DISK, 2.0, xi=BUMP)
    assert rep.bounded
    assert all(abs(r["exp_moment"]) <= 10 for r in rep.rows)
    assert "var_fluct" in rep.rows[0]
    bad = concentration_check({64: samples[64][:1]}, DISK, 2.0)
    assert bad.flags and not bad.bounded


def test_lipschitz_variance_stays_bounded_in_N():
    lip = RadialBump([0.0, 0.0], 0.0, 0.8)
    prof = lambda r: float(lip.profile(r))
    v64 = ginibre_radial_moments(prof, 64)[1]
    v256 = ginibre_radial_moments(prof, 256)[1]
    assert v256 < 2 * v64


def test_fluctuation_bound_constant():
    ratios = []
    for c in range(2):
        x = sample_ginibre(32, 3, c)
        lhs, rhs, ratio = fluctuation_bound(x, DISK, BUMP, BUMP.lipschitz, [0.0, 0.0], 0.6)
        ratios.append(ratio)
    assert max(ratios) <= 10


# ---------------------------------------------------------------------------
def test_local_statistics_lattice():
    a = 0.05
    g = np.arange(-20, 21) * a
    pts = np.array([[u, v] for u in g for v in g])
    pts = pts[np.sum(pts ** 2, axis=1) < 0.95]
    rep = local_statistics([pts], DISK, [[0.0, 0.0]], window=6.0 * a * math.sqrt(pts.shape[0]))
    assert np.allclose(rep.nn, a * math.sqrt(pts.shape[0]))


def test_local_statistics_poisson_and_rigidity():
    rng = np.random.default_rng(5)
    iid = [SEMI.sample(2000, rng) for _ in range(20)]
    rep = local_statistics(iid, SEMI, [[0.0]], window=200.0)
    assert rep.poisson_ks() < 0.05
    assert rep.normalized_gap_variance() == pytest.approx(1.0, abs=0.15)
    tri = [sample_beta_tridiag(2000, 2.0, 1, c) for c in range(20)]
    rep2 = local_statistics(tri, SEMI, [[0.0]], window=200.0)
    assert rep2.normalized_gap_variance() < rep.normalized_gap_variance()
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        local_statistics(tri[:2], SEMI, [[0.0], [1.99]], window=200.0)
    assert any("leaves the support" in str(m.message) for m in w)

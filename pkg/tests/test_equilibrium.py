import math

import numpy as np
import pytest

from coulombgas.equilibrium import (PotentialSpec, equilibrium_measure, h_mu, h_mu_grad, iv_and_c,
                                    zeta)
from coulombgas.errors import CapabilityError, DomainError
from coulombgas.kernel import KernelSpec, cd_const
from coulombgas.verification import oracles

DISK = equilibrium_measure(PotentialSpec(1.0), KernelSpec.log2())
SEMI = equilibrium_measure(PotentialSpec(0.5), KernelSpec.log1())
BALL = equilibrium_measure(PotentialSpec(1.0), KernelSpec.coulomb(3))
ALL = [DISK, SEMI, BALL, equilibrium_measure(PotentialSpec(0.7), KernelSpec.log2()),
       equilibrium_measure(PotentialSpec(2.0), KernelSpec.log1()),
       equilibrium_measure(PotentialSpec(1.3), KernelSpec.coulomb(4))]


def _rand(eqm, n, lo, hi, rng):
    u = rng.standard_normal((n, eqm.d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rng.uniform(lo, hi, size=(n, 1))


def test_descriptors():
    assert DISK.descriptor == "disk" and DISK.radius == pytest.approx(1.0)
    assert DISK.density == pytest.approx(1 / math.pi)
    assert SEMI.descriptor == "semicircle" and SEMI.radius == pytest.approx(2.0)
    assert BALL.radius == pytest.approx(1.0) and BALL.density == pytest.approx(3 / (4 * math.pi))


@pytest.mark.parametrize("eqm", ALL, ids=lambda e: f"{e.descriptor}{e.d}-{e.a}")
def test_total_mass_one(eqm):
    if eqm.descriptor == "semicircle":
        assert float(eqm.cdf(eqm.radius) - eqm.cdf(-eqm.radius)) == pytest.approx(1.0, abs=1e-12)
    else:
        vol = math.pi ** (eqm.d / 2) / math.gamma(eqm.d / 2 + 1) * eqm.radius ** eqm.d
        assert eqm.density * vol == pytest.approx(1.0, rel=1e-12)
        assert eqm.mass_in_ball(np.zeros(eqm.d), 2 * eqm.radius) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("eqm", ALL, ids=lambda e: f"{e.descriptor}{e.d}-{e.a}")
def test_c_identity(eqm):
    I, c = iv_and_c(eqm)
    assert c == pytest.approx(I - 0.5 * eqm.int_V, abs=1e-10)


@pytest.mark.parametrize("eqm", [DISK, BALL, equilibrium_measure(PotentialSpec(1.3), KernelSpec.coulomb(4))])
def test_density_from_laplacian_of_V(eqm):
    assert eqm.density == pytest.approx(2 * eqm.d * eqm.a / (2 * cd_const(eqm.d)), rel=1e-12)


def test_closed_form_constants_match_quadrature_oracles():
    I, vpart = oracles.energy_disk(1.0)
    assert DISK.I_V == pytest.approx(I, abs=1e-9) and DISK.int_V == pytest.approx(vpart, abs=1e-12)
    assert DISK.I_V == 0.75 and DISK.c == 0.5
    I, vpart = oracles.energy_semicircle(0.5)
    assert SEMI.I_V == pytest.approx(I, abs=1e-9) and SEMI.int_V == pytest.approx(vpart, abs=1e-12)
    I, vpart = oracles.energy_ball3(1.0)
    assert BALL.I_V == pytest.approx(I, abs=1e-9) and BALL.int_V == pytest.approx(vpart, abs=1e-12)
    assert BALL.c == pytest.approx(1.5) and BALL.I_V == pytest.approx(1.8)


def test_nonunit_coefficients_match_oracles():
    e = equilibrium_measure(PotentialSpec(2.0), KernelSpec.log1())
    assert e.I_V == pytest.approx(oracles.energy_semicircle(2.0)[0], abs=1e-9)
    e = equilibrium_measure(PotentialSpec(0.7), KernelSpec.log2())
    assert e.I_V == pytest.approx(oracles.energy_disk(0.7)[0], abs=1e-9)


def test_h_examples():
    assert h_mu(DISK, [2.0, 0.0]) == pytest.approx(-math.log(2), abs=1e-14)
    assert h_mu(DISK, [0.0, 0.0]) == pytest.approx(0.5)
    assert h_mu(SEMI, 1.0) == pytest.approx(SEMI.c - 0.25)
    assert h_mu(SEMI, 1.0) == pytest.approx(oracles.log_potential_semicircle(1.0), abs=1e-9)


@pytest.mark.parametrize("r", [0.0, 0.3, 0.99, 1.0, 1.5, 4.0])
def test_h_against_oracles(r):
    assert h_mu(DISK, [r, 0.0]) == pytest.approx(oracles.log_potential_disk(r), abs=1e-9)
    assert h_mu(BALL, [0.0, r, 0.0]) == pytest.approx(oracles.coulomb_potential_ball3(r), abs=1e-9)


@pytest.mark.parametrize("x", [-5.0, -2.5, -2.0, -1.2, 0.0, 0.7, 2.0, 2.0001, 3.0, 30.0])
def test_semicircle_potential_on_line_and_plane(x):
    ref = oracles.log_potential_semicircle(x)
    assert h_mu(SEMI, x) == pytest.approx(ref, abs=1e-8)
    # extended-plane evaluation on the axis agrees with the line values
    assert h_mu(SEMI, np.array([[x, 0.0]]))[0] == pytest.approx(ref, abs=1e-8)
    assert h_mu(SEMI, np.array([[x, -0.0]]))[0] == pytest.approx(ref, abs=1e-8)


def test_semicircle_plane_potential_off_axis():
    from scipy import integrate
    for (x, y) in [(0.3, 0.5), (-1.0, 2.0), (3.0, -0.1), (0.0, 1e-3)]:
        f = lambda t: -0.5 * math.log((x - t) ** 2 + y * y) * math.sqrt(4 - t * t) / (2 * math.pi)
        ref, _ = integrate.quad(f, -2, 2, points=[x] if -2 < x < 2 else None, epsabs=1e-12, limit=200)
        assert h_mu(SEMI, np.array([[x, y]]))[0] == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("eqm", ALL, ids=lambda e: f"{e.descriptor}{e.d}-{e.a}")
def test_euler_lagrange(eqm):
    rng = np.random.default_rng(3)
    inside = _rand(eqm, 1000, 0, eqm.radius, rng)
    outside = _rand(eqm, 1000, eqm.radius * 1.0000001, 5 * eqm.radius, rng)
    hin = np.asarray(h_mu(eqm, inside)).ravel()
    assert np.max(np.abs(hin + 0.5 * eqm.V(inside) - eqm.c)) <= 1e-10
    hout = np.asarray(h_mu(eqm, outside)).ravel()
    assert np.min(hout + 0.5 * eqm.V(outside) - eqm.c) >= -1e-10


def test_zeta():
    assert zeta(DISK, [0.3, 0.2]) == 0.0
    assert zeta(DISK, [2.0, 0.0]) == pytest.approx(1.5 - math.log(2), abs=1e-14)
    rng = np.random.default_rng(0)
    for eqm in (DISK, SEMI, BALL):
        x = _rand(eqm, 10_000, 0, 5, rng)
        assert np.min(zeta(eqm, x)) >= -1e-12
        assert np.all(zeta(eqm, x)[np.linalg.norm(x, axis=1) <= eqm.radius] == 0.0)
        assert np.all(zeta(eqm, x)[np.linalg.norm(x, axis=1) > eqm.radius * 1.01] > 0.0)


@pytest.mark.parametrize("eqm", [DISK, BALL])
def test_minus_laplacian_of_h(eqm):
    rng = np.random.default_rng(4)
    step = 1e-3
    for x in _rand(eqm, 20, 0, 0.8 * eqm.radius, rng):
        lap = 0.0
        for k in range(eqm.d):
            e = np.zeros(eqm.d)
            e[k] = step
            lap += (h_mu(eqm, x + e) - 2 * h_mu(eqm, x) + h_mu(eqm, x - e)) / step ** 2
        assert -lap == pytest.approx(cd_const(eqm.d) * eqm.density, rel=1e-4)


def test_far_field_2d():
    assert abs(h_mu(DISK, [1e3, 0.0]) + math.log(1e3)) <= 1e-5


@pytest.mark.parametrize("eqm", [DISK, BALL, SEMI])
def test_gradient_matches_finite_differences(eqm):
    rng = np.random.default_rng(5)
    pts = _rand(eqm, 30, 0.05, 3.0, rng)
    if eqm.d == 1:
        pts = np.column_stack([pts[:, 0], rng.uniform(0.05, 2.0, size=30) * rng.choice([-1, 1], 30)])
    step = 1e-6
    g = h_mu_grad(eqm, pts)
    for k in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[k] = step
        fd = (h_mu(eqm, pts + e) - h_mu(eqm, pts - e)) / (2 * step)
        np.testing.assert_allclose(g[:, k], fd, atol=1e-7)


def test_semicircle_real_gradient():
    x = np.array([-3.0, -1.0, 0.5, 2.5])
    step = 1e-6
    fd = (h_mu(SEMI, x + step) - h_mu(SEMI, x - step)) / (2 * step)
    np.testing.assert_allclose(h_mu_grad(SEMI, x)[:, 0], fd, atol=1e-7)


def test_mass_in_ball_against_monte_carlo():
    rng = np.random.default_rng(6)
    for eqm in (DISK, BALL, SEMI):
        pts = eqm.sample(400_000, rng)
        for center, r in [(np.full(eqm.d, 0.5), 0.4), (np.full(eqm.d, 0.9), 0.7), (np.zeros(eqm.d), 0.3)]:
            emp = np.mean(np.linalg.norm(pts - center, axis=1) < r)
            assert eqm.mass_in_ball(center, r) == pytest.approx(emp, abs=4e-3)


def test_rejections():
    with pytest.raises(CapabilityError):
        equilibrium_measure(PotentialSpec(1.0), KernelSpec.riesz(2, 1.0))
    with pytest.raises(DomainError):
        PotentialSpec(-1.0)
    with pytest.raises(DomainError):
        PotentialSpec(1.0, perturbation=object(), t=5.0)

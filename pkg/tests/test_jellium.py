import cmath
import math

import numpy as np
import pytest

from coulombgas.errors import CapabilityError, NeutralityError, NumericToleranceError
from coulombgas.jellium import (LatticeSpec, PeriodicConfig, lattice_energy_2d, lattice_scan_2d,
                                minimizer_expansion_check, renorm_energy_eta, renorm_energy_periodic,
                                renorm_energy_zero, scale_renorm)
from coulombgas.kernel import KernelSpec
from coulombgas.verification.oracles import circle_log_constant, dedekind_eta, lattice_energy_kronecker

TRI = complex(0.5, math.sqrt(3) / 2)


def test_dedekind_eta_at_i():
    assert abs(dedekind_eta(1j)) == pytest.approx(math.gamma(0.25) / (2 * math.pi ** 0.75), rel=1e-14)


@pytest.mark.parametrize("tau", [1j, TRI, complex(0.2, 1.3), complex(-0.4, 0.95), complex(0.1, 2.5)])
def test_lattice_energy_matches_kronecker_formula(tau):
    assert lattice_energy_2d(tau) == pytest.approx(lattice_energy_kronecker(tau), abs=1e-10)


def test_known_lattice_values():
    assert lattice_energy_2d(1j) == pytest.approx(-8.234321224662, abs=1e-9)
    assert lattice_energy_2d(TRI) == pytest.approx(-8.300825615358, abs=1e-9)


def test_integer_lattice_against_fourier_oracle():
    pc = PeriodicConfig(LatticeSpec.integers(1.0), [[0.0]])
    W = renorm_energy_periodic(pc).value
    assert W == pytest.approx(-2 * math.pi * math.log(2 * math.pi), abs=1e-10)
    assert W == pytest.approx(2 * math.pi * circle_log_constant(), abs=1e-8)


def test_modular_invariance():
    for tau in [complex(0.2, 1.3), complex(0.45, 0.9), TRI]:
        w = lattice_energy_2d(tau)
        assert lattice_energy_2d(tau + 1) == pytest.approx(w, abs=1e-8)
        assert lattice_energy_2d(-1 / tau) == pytest.approx(w, abs=1e-8)


def test_ewald_split_independence():
    rng = np.random.default_rng(0)
    pc2 = PeriodicConfig(LatticeSpec(np.eye(2) * 2), rng.uniform(0, 2, (4, 2)))
    pc3 = PeriodicConfig(LatticeSpec.cubic(2.0), rng.uniform(0, 2, (8, 3)))
    for pc in (pc2, pc3):
        a = renorm_energy_zero(pc, alpha=0.8)
        b = renorm_energy_zero(pc, alpha=2.0)
        assert a == pytest.approx(b, rel=1e-8)


def test_supercells_give_the_same_energy():
    one = PeriodicConfig(LatticeSpec.square(), [[0.0, 0.0]])
    four = PeriodicConfig(LatticeSpec(np.eye(2) * 2), [[0, 0], [1, 0], [0, 1], [1, 1]])
    assert renorm_energy_zero(four) == pytest.approx(renorm_energy_zero(one), abs=1e-10)
    c1 = PeriodicConfig(LatticeSpec.cubic(), [[0.0, 0.0, 0.0]])
    c8 = PeriodicConfig(LatticeSpec.cubic(2.0), np.array(np.meshgrid([0, 1], [0, 1], [0, 1])).reshape(3, -1).T)
    assert renorm_energy_zero(c8) == pytest.approx(renorm_energy_zero(c1), abs=1e-10)


def test_neutrality_and_capability():
    with pytest.raises(NeutralityError):
        PeriodicConfig(LatticeSpec.square(), [[0.0, 0.0], [0.5, 0.5]], m=1.0)
    pc = PeriodicConfig(LatticeSpec.square(), [[0.0, 0.0]])
    with pytest.raises(CapabilityError):
        renorm_energy_zero(pc, KernelSpec.riesz(2, 1.0))


@pytest.mark.parametrize("kernel,lattice,pts,m", [
    (KernelSpec.log1(), LatticeSpec.integers(1.0), [[0.0]], 3.0),
    (KernelSpec.log2(), LatticeSpec.from_tau(complex(0.3, 1.1)), [[0.0, 0.0]], 2.5),
    (KernelSpec.coulomb(3), LatticeSpec.cubic(), [[0.0, 0.0, 0.0]], 5.0),
    (KernelSpec.log2(), LatticeSpec(np.eye(2) * 2), [[0, 0], [0.7, 0.2], [1.3, 1.1], [0.4, 1.6]], 0.4),
])
def test_scaling_relation(kernel, lattice, pts, m):
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    base = PeriodicConfig(lattice, pts, n / lattice.covolume)
    assert base.m == pytest.approx(1.0)
    w1 = renorm_energy_periodic(base, kernel).value
    lam = m ** (-1.0 / lattice.d)
    scaled = PeriodicConfig(LatticeSpec(lattice.basis * lam), pts * lam, m)
    assert renorm_energy_periodic(scaled, kernel).value == pytest.approx(scale_renorm(w1, m, kernel), abs=1e-8)


def test_dimerization_raises_energy():
    L = LatticeSpec.integers(2.0)
    w0 = renorm_energy_periodic(PeriodicConfig(L, [[0.0], [1.0]])).value
    assert w0 == pytest.approx(-2 * math.pi * math.log(2 * math.pi), abs=1e-10)
    prev = w0
    for delta in (0.05, 0.1, 0.2, 0.4):
        w = renorm_energy_periodic(PeriodicConfig(L, [[0.0], [1.0 + delta]])).value
        assert w > prev
        prev = w


def test_truncated_energy_is_continuous_when_balls_start_to_overlap():
    pc = PeriodicConfig(LatticeSpec(np.eye(2) * 2), [[0, 0], [0.1, 0], [1, 1], [1.5, 0.3]])
    lo = renorm_energy_eta(pc, 0.05 - 1e-7)
    hi = renorm_energy_eta(pc, 0.05 + 1e-7)
    assert lo == pytest.approx(hi, abs=1e-5)


def test_extrapolation_error_is_reported():
    pc = PeriodicConfig(LatticeSpec.integers(2.0), [[0.0], [1.1]])
    res = renorm_energy_periodic(pc)
    assert res.error < 1e-10 and res.power == 1
    with pytest.raises(NumericToleranceError):
        renorm_energy_periodic(pc, eta_sequence=[0.8, 0.4, 0.2, 0.1])


def test_lattice_scan_minimum_at_triangular():
    taus, W, best = lattice_scan_2d()
    assert W.shape == (50, 50)
    step = abs(taus[1, 0] - taus[0, 0]) + abs(taus[0, 1] - taus[0, 0])
    assert abs(best - cmath.exp(1j * math.pi / 3)) <= step
    assert np.min(W) == pytest.approx(lattice_energy_2d(TRI), abs=1e-12)


def test_minimizer_trend_toward_lattice_prediction():
    # heuristic: the per-particle next-order energy of local minimizers
    obs, pred = zip(*(minimizer_expansion_check(N) for N in (16, 64)))
    assert abs(obs[1] - pred[1]) < abs(obs[0] - pred[0])
    assert abs(obs[1] - pred[1]) < 0.1 * abs(pred[1])

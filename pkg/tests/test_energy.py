import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coulombgas import _kernels
from coulombgas.energy import (Configuration, GridParams, TruncationVector, discrepancy,
                               electric_energy, electric_identity_terms, hamiltonian,
                               next_order_energy, splitting_residual, splitting_terms,
                               truncated_field_grid)
from coulombgas.equilibrium import PotentialSpec, equilibrium_measure, h_mu
from coulombgas.errors import ConsistencyError, DomainError, NumericToleranceError, SingularityError
from coulombgas.kernel import KernelSpec
from coulombgas.verification import oracles

LOG2 = KernelSpec.log2()
LOG1 = KernelSpec.log1()
COUL3 = KernelSpec.coulomb(3)
V1 = PotentialSpec(1.0)
DISK = equilibrium_measure(V1, LOG2)
SEMI = equilibrium_measure(PotentialSpec(0.5), LOG1)
BALL = equilibrium_measure(V1, COUL3)


def test_hamiltonian_examples():
    assert hamiltonian([[0.3, -0.2]], V1, LOG2) == pytest.approx(0.13)
    assert hamiltonian([[0.0, 0.0], [1.0, 0.0]], V1, LOG2) == pytest.approx(2.0)
    assert hamiltonian(np.array([[-1.0], [0.0], [1.0]]), PotentialSpec(0.5), LOG1) == pytest.approx(3 - 2 * math.log(2))


def test_coincident_points_identified():
    pts = [[0.1, 0.2], [0.5, 0.5], [0.3, 0.0], [0.5, 0.5]]
    with pytest.raises(SingularityError) as exc:
        hamiltonian(pts, V1, LOG2)
    assert exc.value.pair == (1, 3)


def test_configuration_validation():
    with pytest.raises(DomainError):
        Configuration(np.array([[np.nan, 0.0]]))
    with pytest.raises(DomainError):
        Configuration(np.zeros((0, 2)))
    with pytest.raises(DomainError):
        TruncationVector([0.1, 0.7])


def test_next_order_examples():
    assert next_order_energy([[0.0, 0.0]], DISK) == pytest.approx(-0.75, abs=1e-15)
    r = 0.4
    pts = np.array([[r, 0.0], [-r, 0.0]])
    # brute-force oracle: pair term, quadrature potential, quadrature energy
    pair = -2.0 * math.log(2 * r)
    pot = 2 * oracles.log_potential_disk(r)
    I, vpart = oracles.energy_disk(1.0)
    expected = pair - 2 * 2 * pot + 4 * (I - vpart)
    assert next_order_energy(pts, DISK) == pytest.approx(expected, abs=1e-8)


def test_splitting_far_point_against_oracle():
    x = np.array([[2.0, 0.0]])
    terms = splitting_terms(x, V1, DISK)
    assert terms["H_N"] == pytest.approx(4.0)
    F1 = -2 * oracles.log_potential_disk(2.0) + (oracles.energy_disk(1.0)[0] - 0.5)
    rhs = 0.75 + 2 * (1.5 - math.log(2)) + F1
    assert terms["H_N"] == pytest.approx(rhs, abs=1e-9)
    assert splitting_residual([[0.0, 0.0]], V1, DISK) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("eqm,pot", [(SEMI, PotentialSpec(0.5)), (DISK, V1), (BALL, V1),
                                     (equilibrium_measure(PotentialSpec(2.0), LOG2), PotentialSpec(2.0))],
                         ids=["semicircle", "disk", "ball", "disk-a2"])
@pytest.mark.parametrize("N", [2, 8, 32])
def test_splitting_identity(eqm, pot, N):
    rng = np.random.default_rng(N)
    for _ in range(20):
        # points inside and outside the support
        pts = rng.standard_normal((N, eqm.d)) * eqm.radius * 0.9
        res = splitting_residual(pts, pot, eqm)
        H = hamiltonian(pts, pot, eqm.kernel)
        assert abs(res) <= 1e-8 * max(1.0, abs(H))


def test_splitting_rejects_mismatched_measure():
    with pytest.raises(ConsistencyError):
        splitting_residual([[0.1, 0.2]], PotentialSpec(2.0), DISK)
    with pytest.raises(ConsistencyError):
        splitting_residual([[0.1, 0.2]], V1, DISK, kernel=KernelSpec.riesz(2, 1.0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(2, 40))
def test_permutation_invariance_bit_exact(seed, N):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((N, 2))
    perm = rng.permutation(N)
    assert hamiltonian(pts, V1, LOG2) == hamiltonian(pts[perm], V1, LOG2)
    assert next_order_energy(pts, DISK) == next_order_energy(pts[perm], DISK)


def test_numba_and_numpy_pair_sums_agree():
    rng = np.random.default_rng(0)
    for kcode, s in [(0, 0.0), (1, 1.0), (1, 1.5)]:
        x = rng.standard_normal((60, 3))
        a = _kernels._pair_energy_nb(x, kcode, s)[0]
        b = _kernels._pair_energy_np(x, kcode, s)[0]
        assert a == pytest.approx(b, rel=1e-13)


def test_numba_and_numpy_point_field_agree():
    rng = np.random.default_rng(1)
    nodes = rng.standard_normal((500, 2))
    pts = rng.standard_normal((7, 2))
    etas = np.full(7, 0.2)
    out = []
    for f in (_kernels._point_field_nb, _kernels._point_field_np):
        v = np.empty(500)
        g = np.empty((500, 2))
        f(nodes, pts, etas, 0, 0.0, v, g)
        out.append((v, g))
    np.testing.assert_allclose(out[0][0], out[1][0], rtol=1e-12)
    np.testing.assert_allclose(out[0][1], out[1][1], rtol=1e-10, atol=1e-12)


def test_discrepancy_examples():
    rng = np.random.default_rng(2)
    pts = DISK.sample(50, rng)
    assert discrepancy(pts, DISK, [0.0, 0.0], 3.0) == pytest.approx(0.0, abs=1e-12)
    assert discrepancy([[0.0, 0.0]], DISK, [0.0, 0.0], 0.5) == pytest.approx(0.75)
    assert discrepancy([[0.0]], SEMI, [0.0], 5.0) == pytest.approx(0.0, abs=1e-12)
    b = BALL.sample(30, rng)
    assert discrepancy(b, BALL, [0.0, 0.0, 0.0], 2.0) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# truncated field and electric energy
def test_field_radial_single_charge():
    eta = 0.05
    fld = truncated_field_grid([[0.0, 0.0]], DISK, TruncationVector.uniform(1, eta))
    r = np.linspace(0.001, 2.0, 50)
    x = np.column_stack([r, np.zeros_like(r)])
    H, _ = fld.evaluate(x)
    hv = np.where(r <= 1, (1 - r * r) / 2, -np.log(r))
    expected = np.minimum(-np.log(r), -math.log(eta)) - hv
    np.testing.assert_allclose(H, expected, atol=1e-13)


def test_field_truncation_sphere_and_far_field():
    rng = np.random.default_rng(3)
    pts = DISK.sample(6, rng)
    etas = TruncationVector.uniform(6, 0.05)
    fld = truncated_field_grid(pts, DISK, etas)
    # on the truncation sphere the truncated potential equals the full one
    u = np.array([0.6, 0.8])
    x = pts[0] + 0.05 * u
    H, _ = fld.evaluate(x[None, :])
    full = -np.sum(np.log(np.linalg.norm(x - pts, axis=1))) - 6 * h_mu(DISK, x)
    assert H[0] == pytest.approx(full, abs=1e-12)
    # dipole decay: |H| |x| stays bounded far away
    for radius in (50 * 2, 100 * 2, 400 * 2):
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        xs = radius * np.column_stack([np.cos(ang), np.sin(ang)])
        H, _ = fld.evaluate(xs)
        assert np.max(np.abs(H) * radius) <= 2 * np.linalg.norm(pts.sum(axis=0)) + 1.0


def test_semicircle_field_uses_extended_plane():
    fld = truncated_field_grid(np.array([[0.3], [-0.8]]), SEMI, TruncationVector.uniform(2, 0.05))
    assert fld.nodes.shape[1] == 2 and fld.half_plane
    assert np.all(fld.nodes[:, 1] > 0)


def test_electric_identity_single_charge():
    eta = 1e-2
    fld = truncated_field_grid([[0.0, 0.0]], DISK, TruncationVector.uniform(1, eta))
    ee = electric_energy(fld)
    assert ee.value == pytest.approx(-0.75 + eta ** 2, abs=max(5 * ee.error, 1e-6))
    assert ee.error < 1e-4


@pytest.mark.parametrize("eqm,eta,N", [(DISK, 0.02, 6), (SEMI, 0.02, 6), (BALL, 0.05, 3)],
                         ids=["disk", "semicircle", "ball"])
def test_electric_identity_matches_exact_bookkeeping(eqm, eta, N):
    rng = np.random.default_rng(11)
    pts = eqm.sample(N, rng)
    trunc = TruncationVector.uniform(N, eta)
    ee = electric_energy(truncated_field_grid(pts, eqm, trunc))
    t = electric_identity_terms(pts, eqm, trunc)
    exact = t["F_N"] + t["background"] - t["overlap"]
    assert abs(ee.value - exact) <= ee.error + 1e-4


def test_electric_overlap_inequality_branch():
    pts = np.array([[0.1, 0.1], [0.112, 0.1], [-0.4, 0.3]])
    trunc = TruncationVector.uniform(3, 0.01)
    ee = electric_energy(truncated_field_grid(pts, DISK, trunc))
    t = electric_identity_terms(pts, DISK, trunc)
    assert t["overlap"] > 0
    assert ee.value <= t["F_N"] + t["background"] + ee.error
    assert ee.value == pytest.approx(t["F_N"] + t["background"] - t["overlap"], abs=ee.error + 1e-4)


def test_halving_spacing_shrinks_change():
    from coulombgas.energy import _coarsen, _grid_integral
    pts = np.array([[0.2, 0.1], [-0.3, 0.4]])
    fld = truncated_field_grid(pts, DISK, TruncationVector.uniform(2, 0.05), GridParams(h0=1 / 128))
    c1 = _coarsen(fld)
    c2 = _coarsen(c1)
    i0, i1, i2 = (_grid_integral(f) for f in (fld, c1, c2))
    assert abs(i1 - i2) >= 3 * abs(i0 - i1)


def test_tolerance_failure_reports_estimate():
    fld = truncated_field_grid([[0.2, 0.0]], DISK, TruncationVector.uniform(1, 0.05), GridParams(h0=1 / 32))
    with pytest.raises(NumericToleranceError) as exc:
        electric_energy(fld, tol=1e-12)
    assert exc.value.achieved > 1e-12

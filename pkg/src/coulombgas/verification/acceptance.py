"""Acceptance suite: nine criteria with pinned parameters and tolerances.

Each criterion returns a ``CriterionResult`` made of named checks. A check
compares a measured value with a tolerance; informational checks are
reported but do not affect the verdict. Runtime against the budget is a
check of its own.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np

from .. import energy, fluctstats, jellium, thermo
from .._pool import run_tasks
from ..energy import TruncationVector, electric_energy, electric_identity_terms, truncated_field_grid
from ..equilibrium import PotentialSpec, equilibrium_measure
from ..kernel import KernelSpec
from ..sampler import (GibbsParams, chain_rng, gap_values, ks_compare, line_cdf_distance, mcmc_run,
                       one_point_values, radial_cdf_distance, radial_cdf_two_sample, sample_beta_tridiag,
                       sample_ginibre)
from . import oracles

LOG1 = KernelSpec.log1()
LOG2 = KernelSpec.log2()
COUL3 = KernelSpec.coulomb(3)

# stream ranges under the suite seed, one per use
S_CONFIGS, S_MCMC, S_ORACLE, S_STATS = 1 << 20, 2 << 20, 3 << 20, 4 << 20


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    relation: str = "<"
    informational: bool = False
    bound_text: str = None

    def text(self):
        tag = "info" if self.informational else ("ok" if self.passed else "FAIL")
        bound = self.bound_text or f"{self.relation} {self.tolerance:.6g}"
        return f"{self.name}={self.value:.6g} {bound} [{tag}]"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    runtime: float = 0.0
    budget: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks if not c.informational)

    def add(self, name, value, tolerance, relation="<", informational=False):
        value = float(value)
        ok = {"<": value < tolerance, "<=": value <= tolerance, ">": value > tolerance,
              ">=": value >= tolerance}[relation] if relation in ("<", "<=", ">", ">=") else bool(relation)
        self.checks.append(Check(name, value, float(tolerance), bool(ok), relation, informational))
        return ok

    def add_range(self, name, value, lo, hi):
        ok = lo <= value <= hi
        self.checks.append(Check(name, float(value), float(hi), ok, "in", bound_text=f"in [{lo}, {hi}]"))
        return ok

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        body = "; ".join(c.text() for c in self.checks)
        return f"criterion {self.number} {verdict} {self.title}: {body} ({self.runtime:.1f} s)"

    def rows(self):
        return [{"criterion": self.number, "check": c.name, "value": c.value, "tolerance": c.tolerance,
                 "passed": c.passed or c.informational} for c in self.checks]


def _timed(number, title, budget):
    def wrap(fn):
        def run(seed=0, workers=1):
            res = CriterionResult(number, title, budget=budget)
            t0 = time.perf_counter()
            fn(res, seed, workers)
            res.runtime = time.perf_counter() - t0
            res.add("runtime_s", res.runtime, budget)
            return res
        run.number = number
        return run
    return wrap


# ---------------------------------------------------------------------------
@_timed(1, "splitting identity", 5.0)
def criterion_1(res, seed, workers):
    rng = chain_rng(seed, S_CONFIGS + 1)
    cases = [(LOG1, PotentialSpec(0.5)), (LOG2, PotentialSpec(1.0)), (COUL3, PotentialSpec(1.0))]
    worst = 0.0
    for kernel, pot in cases:
        eqm = equilibrium_measure(pot, kernel)
        for N in (2, 8, 32):
            for _ in range(100):
                # points spread beyond the support so zeta is exercised
                x = rng.uniform(-1.5, 1.5, (N, kernel.d)) * eqm.radius
                t = energy.splitting_terms(x, pot, eqm, kernel)
                worst = max(worst, abs(t["residual"]) / max(1.0, abs(t["H_N"])))
    res.add("max_relative_residual", worst, 1e-8, "<=")


ELECTRIC_N, ELECTRIC_ETA, ELECTRIC_C = 10, 1e-2, 10.0


@_timed(2, "electric identity", 120.0)
def criterion_2(res, seed, workers):
    eqm = equilibrium_measure(PotentialSpec(1.0), LOG2)
    rng = chain_rng(seed, S_CONFIGS + 2)
    while True:
        x = eqm.sample(ELECTRIC_N, rng)
        dist = np.sqrt(np.sum((x[:, None] - x[None]) ** 2, axis=-1)) + np.eye(ELECTRIC_N)
        if dist.min() > 2 * ELECTRIC_ETA:
            break
    trunc = TruncationVector.uniform(ELECTRIC_N, ELECTRIC_ETA)
    ee = electric_energy(truncated_field_grid(x, eqm, trunc))
    F = energy.next_order_energy(x, eqm, LOG2)
    allowed = max(0.01 * abs(F), ELECTRIC_C * ELECTRIC_N * ELECTRIC_ETA ** 2 + ee.error)
    res.add("disjoint_abs_diff", abs(ee.value - F), allowed, "<=")
    t = electric_identity_terms(x, eqm, trunc)
    res.add("exact_bookkeeping_diff", abs(ee.value - (t["F_N"] + t["background"])), ee.error + 1e-4, "<=",
            informational=True)
    # overlapping balls: the identity becomes an inequality
    y = x.copy()
    y[1] = y[0] + np.array([1.2 * ELECTRIC_ETA, 0.0])
    ee2 = electric_energy(truncated_field_grid(y, eqm, trunc))
    t2 = electric_identity_terms(y, eqm, trunc)
    res.add("overlap_excess", ee2.value - (t2["F_N"] + t2["background"]), ee2.error, "<=")


CIRCLE_N, CIRCLE_SWEEPS, CIRCLE_THIN, CIRCLE_ORACLE = 128, 200_000, 100, 1000


@_timed(3, "circle law", 600.0)
def criterion_3(res, seed, workers):
    params = GibbsParams(2.0, CIRCLE_N, LOG2, PotentialSpec(1.0))
    mc = mcmc_run(params, CIRCLE_SWEEPS, seed=seed, chain=S_MCMC + 3, thinning=CIRCLE_THIN).samples
    orc = [sample_ginibre(CIRCLE_N, seed, S_ORACLE + c) for c in range(CIRCLE_ORACLE)]
    res.add("mcmc_vs_circle_law", radial_cdf_distance(mc), 0.05)
    res.add("ginibre_vs_circle_law", radial_cdf_distance(orc), 0.03)
    res.add("mcmc_vs_ginibre", radial_cdf_two_sample(mc, orc), 0.05)
    # distance of the oracle to the exact finite-N radial law (Kostlan)
    r = np.sort(np.concatenate([np.sqrt(np.sum(c ** 2, axis=1)) for c in orc]))
    res.add("ginibre_vs_finite_N_law", _sup_distance(r, lambda s: oracles.ginibre_radial_cdf(s, CIRCLE_N)), 0.03,
            informational=True)
    res.add("circle_law_edge_bias_at_N", oracles.ginibre_radial_cdf_gap(CIRCLE_N), 0.03, informational=True)


def _sup_distance(sorted_x, cdf):
    n = sorted_x.size
    F = cdf(sorted_x)
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))


SEMI_N, SEMI_ORACLE, SEMI_MC_N, SEMI_MC_SWEEPS, SEMI_MC_THIN = 256, 40, 64, 40_000, 10


@_timed(4, "semicircle and confinement normalization", 300.0)
def criterion_4(res, seed, workers):
    semi = equilibrium_measure(PotentialSpec(0.5), LOG1)
    tri = [sample_beta_tridiag(SEMI_N, 2.0, seed, S_ORACLE + c) for c in range(SEMI_ORACLE)]
    res.add("tridiagonal_vs_semicircle", line_cdf_distance(tri, semi), 0.02)
    orc = [sample_beta_tridiag(SEMI_MC_N, 2.0, seed, S_ORACLE + 1000 + c) for c in range(4000)]
    rng = chain_rng(seed, S_STATS + 4)
    a, b = one_point_values(orc, rng), gap_values(orc, rng)
    passes = 0
    for rep in range(4):
        params = GibbsParams(2.0, SEMI_MC_N, LOG1, PotentialSpec(0.5))
        s = mcmc_run(params, SEMI_MC_SWEEPS, seed=seed, chain=S_MCMC + 40 + rep, thinning=SEMI_MC_THIN).samples
        p1 = ks_compare(one_point_values(s, rng), a)[1]
        p2 = ks_compare(gap_values(s, rng), b)[1]
        passes += min(p1, p2) > 0.01
    res.add("repeats_with_p_above_0.01", passes, 3, ">=")
    # the other normalization, V = x^2, is clearly rejected
    wrong = mcmc_run(GibbsParams(2.0, SEMI_MC_N, LOG1, PotentialSpec(1.0)), SEMI_MC_SWEEPS, seed=seed,
                     chain=S_MCMC + 49, thinning=SEMI_MC_THIN).samples
    res.add("p_value_with_V_x_squared", ks_compare(one_point_values(wrong, rng), a)[1], 0.01, informational=True)


CLT_N, CLT_SWEEPS, CLT_THIN, CLT_BETAS = 256, 40_000, 10, (1.0, 2.0, 4.0)
BUMP = fluctstats.RadialBump([0.0, 0.0], 0.2, 0.6)
LIPSCHITZ = fluctstats.RadialBump([0.0, 0.0], 0.0, 0.8)
_CHAIN_CACHE = {}


def _radial_observer(N):
    eqm = equilibrium_measure(PotentialSpec(1.0), LOG2)
    mb, ml = BUMP.integral(eqm), LIPSCHITZ.integral(eqm)

    def obs(c):
        r = np.sqrt(np.sum(c * c, axis=1))
        return (math.fsum(np.sort(BUMP.profile(r))) - N * mb, math.fsum(np.sort(LIPSCHITZ.profile(r))) - N * ml)
    return obs


def _disk_chain(N, beta, seed):
    params = GibbsParams(beta, N, LOG2, PotentialSpec(1.0))
    run = mcmc_run(params, CLT_SWEEPS, seed=seed, chain=S_MCMC + 500 + int(4 * beta) + 1000 * N,
                   thinning=CLT_THIN, observe=_radial_observer(N))
    return np.asarray(run.samples)


def disk_statistics(N, beta, seed, workers=1):
    """(bump, lipschitz) fluctuation values from one MCMC chain, cached per run."""
    key = (N, beta, seed)
    if key not in _CHAIN_CACHE:
        _CHAIN_CACHE[key] = _disk_chain(N, beta, seed)
    return _CHAIN_CACHE[key]


def _prefetch(keys, seed, workers):
    todo = [k for k in keys if (k[0], k[1], seed) not in _CHAIN_CACHE]
    for k, v in zip(todo, run_tasks(_disk_chain, [(N, b, seed) for N, b in todo], workers)):
        _CHAIN_CACHE[(k[0], k[1], seed)] = v


@_timed(5, "CLT for a smooth linear statistic", 1800.0)
def criterion_5(res, seed, workers):
    eqm = equilibrium_measure(PotentialSpec(1.0), LOG2)
    _prefetch([(CLT_N, b) for b in CLT_BETAS], seed, workers)
    reps = {}
    for beta in CLT_BETAS:
        vals = disk_statistics(CLT_N, beta, seed)[:, 0]
        reps[beta] = fluctstats.clt_report(vals, beta=beta, N=CLT_N)
        res.add(f"normality_p_beta{beta:g}", reps[beta].p_normal, 0.01, ">")
    res.add_range("var_ratio_beta1_over_beta2", reps[1.0].var / reps[2.0].var, 1.6, 2.4)
    res.add_range("var_ratio_beta2_over_beta4", reps[2.0].var / reps[4.0].var, 1.6, 2.4)
    _, exact = oracles.ginibre_radial_moments(lambda r: float(BUMP.profile(r)), CLT_N)
    res.add("beta2_var_rel_error_vs_ginibre", abs(reps[2.0].var / exact - 1.0), 0.15, "<=")
    # recorded, not asserted: beta * var against (1/pi) int |grad xi|^2
    target = BUMP.dirichlet() / math.pi
    for beta in CLT_BETAS:
        r = reps[beta]
        res.add(f"beta{beta:g}_var_over_dirichlet_over_pi_beta", beta * r.var / target, beta * r.var_se / target,
                "+-", informational=True)


@_timed(6, "concentration of Lipschitz statistics", 900.0)
def criterion_6(res, seed, workers):
    _prefetch([(64, 2.0), (CLT_N, 2.0)], seed, workers)
    v64 = float(np.var(disk_statistics(64, 2.0, seed)[:, 1], ddof=1))
    v256 = float(np.var(disk_statistics(CLT_N, 2.0, seed)[:, 1], ddof=1))
    res.add("var_growth_64_to_256", v256 / v64, 2.0)
    # i.i.d. points from the equilibrium measure for contrast
    eqm = equilibrium_measure(PotentialSpec(1.0), LOG2)
    rng = chain_rng(seed, S_STATS + 6)
    iid = {N: fluctstats.fluct_values([eqm.sample(N, rng) for _ in range(2000)], eqm, LIPSCHITZ) for N in (64, 256)}
    res.add("iid_var_growth_64_to_256", iid[256].var() / iid[64].var(), 4.0, "~", informational=True)


@_timed(7, "jellium ordering", 300.0)
def criterion_7(res, seed, workers):
    sq = jellium.renorm_energy_periodic(jellium.PeriodicConfig(jellium.LatticeSpec.square(), [[0.0, 0.0]]))
    tri = jellium.renorm_energy_periodic(jellium.PeriodicConfig(jellium.LatticeSpec.triangular(), [[0.0, 0.0]]))
    gap = sq.value - tri.value
    res.add("square_minus_triangular_over_10x_error", gap / (10 * (sq.error + tri.error)), 1.0, ">")
    taus, W, best = jellium.lattice_scan_2d()
    step = abs(taus[1, 0] - taus[0, 0]) + abs(taus[0, 1] - taus[0, 0])
    res.add("scan_argmin_distance_to_exp_i_pi_3", abs(best - complex(0.5, math.sqrt(3) / 2)), step, "<=")
    L = jellium.LatticeSpec.integers(2.0)
    wz = jellium.renorm_energy_periodic(jellium.PeriodicConfig(L, [[0.0], [1.0]]))
    wd = jellium.renorm_energy_periodic(jellium.PeriodicConfig(L, [[0.0], [1.1]]))
    res.add("dimerized_minus_Z_over_error", (wd.value - wz.value) / (wd.error + wz.error), 1.0, ">")
    worst = 0.0
    for kernel, lat, pts in [(LOG1, jellium.LatticeSpec.integers(1.0), [[0.0]]),
                             (LOG2, jellium.LatticeSpec.triangular(), [[0.0, 0.0]]),
                             (COUL3, jellium.LatticeSpec.cubic(), [[0.0, 0.0, 0.0]])]:
        w1 = jellium.renorm_energy_periodic(jellium.PeriodicConfig(lat, pts), kernel).value
        for m in (0.5, 3.0):
            lam = m ** (-1.0 / lat.d)
            pc = jellium.PeriodicConfig(jellium.LatticeSpec(lat.basis * lam), np.asarray(pts) * lam, m)
            wm = jellium.renorm_energy_periodic(pc, kernel).value
            worst = max(worst, abs(wm - jellium.scale_renorm(w1, m, kernel)))
    res.add("scaling_relation_abs_error", worst, 1e-8, "<=")


LOGZ_NS, LOGZ_BETA = (8, 16, 32, 64), 2.0


@_timed(8, "partition function expansion", 1200.0)
def criterion_8(res, seed, workers):
    eqm = equilibrium_measure(PotentialSpec(0.5), LOG1)
    I_V = oracles.energy_semicircle(0.5)[0]
    z = [thermo.logz_closed_form(n, LOGZ_BETA, LOG1) for n in LOGZ_NS]
    rep = thermo.expansion_fit(LOGZ_NS, z, LOGZ_BETA, LOG1, I_V, entropy=thermo.density_entropy(eqm))
    lead = -0.5 * LOGZ_BETA * I_V
    res.add("N2_coef_rel_error", abs(rep.coef[0] - lead) / abs(lead), 0.05, "<=")
    res.add("NlogN_coef_rel_error_vs_one_half", abs(rep.coef[1] - 0.5) / 0.5, 0.15, "<=")
    res.add("NlogN_coef_rel_error_vs_beta_over_2d", abs(rep.coef[1] - LOGZ_BETA / 2) / (LOGZ_BETA / 2), 0.15, "<=",
            informational=True)
    ext = thermo.expansion_fit(LOGZ_NS + (128,), z + [thermo.logz_closed_form(128, LOGZ_BETA, LOG1)],
                               LOGZ_BETA, LOG1, I_V)
    res.add("order_N_coef_shift_adding_128", abs(ext.coef[-1] - rep.coef[-1]) / abs(rep.coef[-1]), 0.2, "<=",
            informational=True)
    ratios = thermo.leading_order_ratios(LOGZ_NS, LOGZ_BETA, LOG1)
    res.add("leading_ratio_monotone", float(np.all(np.diff(ratios) < 0) and np.all(ratios > lead)), 1.0, ">=",
            informational=True)
    params = GibbsParams(LOGZ_BETA, 16, LOG1, PotentialSpec(0.5))
    ti = thermo.logz_estimate_ti(params, 2.0, 4.0, grid=5, sweeps=20_000, seed=seed, workers=workers)
    exact = thermo.logz_closed_form(16, 4.0, LOG1)
    res.add("TI_rel_error_beta4_N16", abs(ti.value - exact) / abs(exact), 0.02, "<=")
    res.add("TI_discrepancy_in_errors", abs(ti.value - exact) / ti.error, 3.0, "<=", informational=True)
    bound = max([thermo.upper_bound_constant(v, n, LOGZ_BETA, LOG1, I_V) for v, n in zip(z, LOGZ_NS)]
                + [thermo.upper_bound_constant(ti.value, 16, 4.0, LOG1, I_V)])
    res.add("upper_bound_constant", bound, 10.0, "<=")


@_timed(9, "closed forms at N=2", 60.0)
def criterion_9(res, seed, workers):
    worst = max(abs(thermo.logz_closed_form(2, b, LOG1) - oracles.logz_two_particles_1d(b)) for b in (1.0, 2.0, 4.0))
    res.add("1d_abs_error", worst, 1e-6, "<=")
    est, se = oracles.logz_two_particles_2d_mc(2.0, seed=seed)
    res.add("2d_error_in_standard_errors", abs(thermo.logz_closed_form(2, 2.0, LOG2) - est) / se, 3.0, "<=")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9]


def run_all(only=None, seed=0, workers=1):
    out = []
    for crit in CRITERIA:
        if only is None or crit.number in only:
            out.append(crit(seed=seed, workers=workers))
    return out

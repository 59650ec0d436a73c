"""Partition functions: closed forms, thermodynamic integration, expansion fits.

Conventions: Z = int exp(-(beta/2) N^e H_N) dX with e = min(2/d - 1, 0),
H_N the ordered-pair energy plus N sum V(x_i), V = a|x|^2.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate, special

from ._pool import run_tasks
from ._series import batch_means, effective_sample_size
from .energy import hamiltonian
from .equilibrium import PotentialSpec, equilibrium_measure
from .errors import CapabilityError, ConsistencyError, DomainError, InsufficientDataError, NumericToleranceError
from .kernel import LOG1, LOG2, KernelSpec
from .sampler import GibbsParams, mcmc_run

MIN_ESS = 20


def logz_closed_form(N, beta, kernel, a=None):
    """Exact log Z where it is known.

    Supported: N = 1 for any kernel; Log1 with any beta (Gaussian beta-ensemble
    via Mehta's integral); Log2 at beta = 2 (Ginibre normalization).

    Parameters
    ----------
    N : int
    beta : float
    kernel : KernelSpec
    a : float, optional
        Confinement strength; defaults to 1/2 on the line and 1 in the plane.

    Raises
    ------
    CapabilityError
        No closed form for this case.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    N = int(N)
    d = kernel.d
    if a is None:
        a = 0.5 if kernel.case == LOG1 else 1.0
    if N == 1:
        # the single-particle weight is exp(-(beta/2) a |x|^2)
        return 0.5 * d * math.log(2.0 * math.pi / (a * beta))
    if kernel.case == LOG1:
        s = beta * N * a
        j = np.arange(1, N + 1)
        gam = math.fsum(special.gammaln(1.0 + j * beta / 2.0) - special.gammaln(1.0 + beta / 2.0))
        return (-0.5 * N * math.log(s) - 0.25 * beta * N * (N - 1) * math.log(s)
                + 0.5 * N * math.log(2.0 * math.pi) + gam)
    if kernel.case == LOG2 and beta == 2.0:
        s = N * a
        return (-N * math.log(s) - 0.5 * N * (N - 1) * math.log(s) + N * math.log(math.pi)
                + math.fsum(special.gammaln(np.arange(2, N + 2))))
    raise CapabilityError(f"no closed-form partition function for {kernel.case} at beta={beta}")


def has_closed_form(N, beta, kernel):
    return N == 1 or kernel.case == LOG1 or (kernel.case == LOG2 and beta == 2.0)


@dataclass
class EnergyEstimate:
    mean: float
    se: float
    ess: float
    n: int


def mean_energy_estimate(params, samples):
    """Batch-means estimate of E[H_N] from a chain.

    Parameters
    ----------
    params : GibbsParams
    samples : sequence
        Configurations, or precomputed energies as a 1D array.

    Raises
    ------
    InsufficientDataError
        Effective sample size below 20.
    """
    arr = np.asarray(samples, dtype=float) if len(samples) else np.zeros(0)
    if arr.ndim == 1:
        h = arr
    else:
        h = np.array([hamiltonian(x, params.potential, params.kernel) for x in samples])
    ess = effective_sample_size(h) if h.size >= 4 else float(h.size)
    if ess < MIN_ESS:
        raise InsufficientDataError(f"effective sample size {ess:.1f} below {MIN_ESS}")
    mean, se = batch_means(h, n_batches=min(20, max(2, h.size // 50)))
    return EnergyEstimate(mean, se, float(ess), int(h.size))


def _node_energy(params_dict, sweeps, seed, chain, thinning):
    params = GibbsParams.from_dict(params_dict)
    obs = lambda c: hamiltonian(c, params.potential, params.kernel)
    run = mcmc_run(params, sweeps, seed=seed, chain=chain, thinning=thinning, observe=obs)
    est = mean_energy_estimate(params, np.asarray(run.samples))
    return est.mean, est.se


@dataclass
class TIResult:
    """Thermodynamic-integration estimate of log Z at ``beta_target``.

    ``error`` combines the Richardson quadrature error and the propagated
    statistical error in quadrature.
    """

    value: float
    error: float
    quad_error: float
    stat_error: float
    anchor: float
    beta_anchor: float
    beta_target: float
    betas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy_se: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _trapezoid(x, y):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def ti_quadrature(betas, f, f_se=None):
    """Trapezoid integral on a uniform odd grid with its error estimates.

    Returns (integral, quadrature error, statistical error); the quadrature
    error is the Richardson estimate |T_h - T_2h| / 3.
    """
    betas = np.asarray(betas, dtype=float)
    f = np.asarray(f, dtype=float)
    fse = np.zeros_like(f) if f_se is None else np.asarray(f_se, dtype=float)
    fine = _trapezoid(betas, f)
    quad = abs(fine - _trapezoid(betas[::2], f[::2])) / 3.0
    w = np.full(betas.size, abs(betas[1] - betas[0]))
    w[0] = w[-1] = 0.5 * w[1]
    return fine, quad, float(math.sqrt(np.sum((w * fse) ** 2)))


def logz_estimate_ti(params, beta_anchor, beta_target, grid=5, sweeps=20_000, seed=0, thinning=5,
                     tol=None, max_nodes=65, workers=1):
    """log Z at ``beta_target`` integrated from an exactly known anchor.

    d log Z / d beta = -(1/2) N^e E_beta[H_N]. The mean energy is estimated by
    an independent chain at every node; the trapezoid rule on a uniform grid
    is refined by halving the spacing until the Richardson error estimate
    (difference to the coarser grid over 3) drops below ``tol/2``.

    Parameters
    ----------
    params : GibbsParams
        Supplies N, kernel and potential; its beta is ignored.
    grid : int or sequence of float
        Initial number of nodes (odd count) or explicit uniform nodes.
    tol : float, optional
        Requested total error; NumericToleranceError if it is not reached.
    """
    N, kernel, pot = params.N, params.kernel, params.potential
    if not has_closed_form(N, beta_anchor, kernel):
        raise CapabilityError("the anchor inverse temperature needs a closed-form partition function")
    anchor = logz_closed_form(N, beta_anchor, kernel, pot.a)
    if beta_target == beta_anchor:
        return TIResult(anchor, 0.0, 0.0, 0.0, anchor, beta_anchor, beta_target)
    if np.ndim(grid) == 0:
        n = int(grid)
        if n < 3 or n % 2 == 0:
            raise DomainError("grid must have an odd number (>= 3) of nodes")
    else:
        g = np.asarray(grid, dtype=float)
        if g[0] != beta_anchor or g[-1] != beta_target or g.size % 2 == 0:
            raise DomainError("explicit grid must run from anchor to target with an odd number of nodes")
        if not np.allclose(np.diff(g), np.diff(g)[0]):
            raise DomainError("explicit grid must be uniform")
        n = g.size
    scale = 0.5 * N ** params.norm_exponent
    span = beta_target - beta_anchor
    cache = {}

    def chain_of(b):
        # stream keyed by the node position so refinements reuse earlier nodes
        return int(round((b - beta_anchor) / span * 2 ** 20))

    def evaluate(betas):
        todo = [b for b in betas if chain_of(b) not in cache]
        tasks = [(GibbsParams(float(b), N, kernel, pot).to_dict(), sweeps, seed, chain_of(b), thinning)
                 for b in todo]
        for b, out in zip(todo, run_tasks(_node_energy, tasks, workers)):
            cache[chain_of(b)] = out
        vals = np.array([cache[chain_of(b)] for b in betas])
        return -scale * vals[:, 0], scale * vals[:, 1]

    while True:
        betas = np.linspace(beta_anchor, beta_target, n)
        f, fse = evaluate(betas)
        fine, quad, stat = ti_quadrature(betas, f, fse)
        err = math.hypot(quad, stat)
        if tol is None or quad <= tol / 2.0 or 2 * n - 1 > max_nodes:
            break
        n = 2 * n - 1
    res = TIResult(anchor + fine, err, quad, stat, anchor, beta_anchor, beta_target, betas, -f / scale, fse / scale)
    if tol is not None and err > tol:
        raise NumericToleranceError(f"thermodynamic integration error {err:.3g} above {tol:.3g}", achieved=err)
    return res


# ---------------------------------------------------------------------------
def leading_exponent(d):
    return min(2.0, 2.0 / d + 1.0)


def upper_bound_constant(logz, N, beta, kernel, I_V):
    """Smallest C with log Z <= -(beta/2) N^p I_V + (beta/4) N log N 1_log + C (1+beta) N."""
    p = leading_exponent(kernel.d)
    nlogn = 0.25 * beta * N * math.log(N) if kernel.is_log else 0.0
    return (logz + 0.5 * beta * N ** p * I_V - nlogn) / ((1.0 + beta) * N)


def density_entropy(eqm):
    """int mu log mu over the support."""
    if eqm.kernel.case == LOG2 or (eqm.kernel.d >= 2 and np.ndim(eqm.density) == 0):
        return math.log(float(eqm.density))
    R = eqm.radius
    f = lambda x: (lambda m: m * math.log(m) if m > 0 else 0.0)(float(np.ravel(eqm.density_at(np.array([x])))[0]))
    val, _ = integrate.quad(f, -R, R, limit=200, epsabs=1e-12)
    return val


@dataclass
class FreeEnergyReport:
    """Fit of log Z against {N^p, N log N, N}.

    ``coef`` holds the fitted coefficients in that order (no N log N column
    for non-log kernels). ``predicted`` holds -(beta/2) I_V and beta/(2d).
    ``C_fit`` is the potential-independent order-N constant implied by the
    order-N coefficient, reported with its error bar and never asserted.
    """

    N: list
    beta: float
    logz: np.ndarray
    logz_se: np.ndarray
    exact: np.ndarray
    coef: np.ndarray
    coef_se: np.ndarray
    predicted: dict
    residuals: np.ndarray
    C_fit: float
    C_fit_se: float
    bound_constants: np.ndarray

    def relative_error(self, name):
        i = {"leading": 0, "nlogn": 1}[name]
        return abs(self.coef[i] - self.predicted[name]) / abs(self.predicted[name])

    def to_rows(self):
        return [{"N": n, "beta": self.beta, "logz": float(z), "se": float(s), "exact": bool(e),
                 "residual": float(r), "bound_C": float(c)}
                for n, z, s, e, r, c in zip(self.N, self.logz, self.logz_se, self.exact,
                                            self.residuals, self.bound_constants)]


def expansion_fit(Ns, logz, beta, kernel, I_V, logz_se=None, exact=None, entropy=None):
    """Least-squares fit of log Z over several N.

    Raises
    ------
    InsufficientDataError
        Fewer than four values of N.
    ConsistencyError
        Rank-deficient design matrix.
    """
    Ns = np.asarray(Ns, dtype=float)
    z = np.asarray(logz, dtype=float)
    if Ns.size < 4 or np.unique(Ns).size < 4:
        raise InsufficientDataError("need log Z at four or more distinct N")
    se = np.zeros_like(z) if logz_se is None else np.asarray(logz_se, dtype=float)
    exact = np.ones(z.size, dtype=bool) if exact is None else np.asarray(exact, dtype=bool)
    p = leading_exponent(kernel.d)
    cols = [Ns ** p] + ([Ns * np.log(Ns)] if kernel.is_log else []) + [Ns]
    A = np.column_stack(cols)
    # scale columns for conditioning
    norms = np.linalg.norm(A, axis=0)
    if np.linalg.matrix_rank(A / norms) < A.shape[1]:
        raise ConsistencyError("rank-deficient expansion fit")
    wts = 1.0 / np.where(se > 0, se, 1.0) if np.any(se > 0) else np.ones_like(z)
    Aw = A / norms * wts[:, None]
    coef_s, *_ = np.linalg.lstsq(Aw, z * wts, rcond=None)
    coef = coef_s / norms
    resid = z - A @ coef
    dof = max(1, z.size - A.shape[1])
    sigma2 = float(np.sum((resid * wts) ** 2) / dof)
    cov = np.linalg.inv(Aw.T @ Aw) * sigma2 / np.outer(norms, norms)
    if np.any(se > 0):
        cov = cov + np.linalg.inv(Aw.T @ Aw) / np.outer(norms, norms)
    coef_se = np.sqrt(np.abs(np.diag(cov)))
    predicted = {"leading": -0.5 * beta * I_V}
    if kernel.is_log:
        predicted["nlogn"] = beta / (2.0 * kernel.d)
    c1, c1_se = coef[-1], coef_se[-1]
    if kernel.is_log and entropy is not None:
        C = -c1 - (1.0 - beta / (2.0 * kernel.d)) * entropy
    else:
        C = -c1
    bounds = np.array([upper_bound_constant(zz, int(n), beta, kernel, I_V) for zz, n in zip(z, Ns)])
    return FreeEnergyReport([int(n) for n in Ns], beta, z, se, exact, coef, coef_se, predicted, resid,
                            float(C), float(c1_se), bounds)


def closed_form_report(Ns, beta, kernel, a=None):
    """Expansion fit fed with exact values."""
    pot = PotentialSpec(a if a is not None else (0.5 if kernel.case == LOG1 else 1.0))
    eqm = equilibrium_measure(pot, kernel)
    z = [logz_closed_form(n, beta, kernel, pot.a) for n in Ns]
    return expansion_fit(Ns, z, beta, kernel, eqm.I_V, entropy=density_entropy(eqm))


def leading_order_ratios(Ns, beta, kernel, a=None):
    """(log Z)/N^p for each N, for the monotone approach to -(beta/2) I_V."""
    pot = PotentialSpec(a if a is not None else (0.5 if kernel.case == LOG1 else 1.0))
    p = leading_exponent(kernel.d)
    return np.array([logz_closed_form(n, beta, kernel, pot.a) / n ** p for n in Ns])

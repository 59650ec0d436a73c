"""Linear statistics of the gas and their fluctuation theory.

Test functions expose their value, gradient, Dirichlet integral and their
integral against an equilibrium measure. Fluctuations are
Fluct_N(xi) = sum_i xi(x_i) - N * int xi d mu.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, special, stats
from scipy.spatial import cKDTree

from . import _series
from .energy import _sphere_fraction_inside, as_points, next_order_energy
from .errors import (CapabilityError, DomainError, InsufficientDataError, LaplaceRangeError,
                     NumericToleranceError)
from .kernel import LOG2, sphere_area

QUAD_TOL = 1e-10

# quintic smoothstep S(t) = 10t^3 - 15t^4 + 6t^5, C^2 with S(0)=0, S(1)=1
_STEP = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
_DSTEP = P.polyder(_STEP)


def _step(t):
    t = np.clip(t, 0.0, 1.0)
    return P.polyval(t, _STEP)


def _dstep(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, P.polyval(np.clip(t, 0.0, 1.0), _DSTEP), 0.0)


def _quad(f, a, b, points=None):
    pts = None
    if points:
        pts = sorted({p for p in points if a < p < b})
    val, err = integrate.quad(f, a, b, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-12)
    if err > QUAD_TOL:
        raise NumericToleranceError(f"quadrature error estimate {err:.3g} exceeds {QUAD_TOL:g}", achieved=err)
    return val


def _semicircle_integral(eqm, f, breaks=()):
    """int f d mu for the semicircle law, through y = R cos(theta)."""
    R = eqm.radius
    th_breaks = [math.acos(min(1.0, max(-1.0, b / R))) for b in breaks if -R < b < R]
    g = lambda th: float(f(R * math.cos(th))) * math.sin(th) ** 2 * (2.0 / math.pi)
    return _quad(g, 0.0, math.pi, th_breaks)


class TestFunction:
    """Compactly supported C^2 function used as a linear statistic.

    Subclasses provide ``value``, ``grad``, ``dirichlet`` and ``integral``.
    Points are arrays whose trailing axis holds the d coordinates.
    """

    __test__ = False  # not a pytest class

    d = None
    center = None
    radius = None

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def dirichlet(self):
        """int |grad xi|^2 over R^d."""
        raise NotImplementedError

    def integral(self, eqm):
        """int xi d mu."""
        raise NotImplementedError

    @property
    def lipschitz(self):
        raise NotImplementedError

    def inside(self, eqm):
        """True when the support lies in the interior of the support of ``eqm``."""
        c = np.asarray(self.center, dtype=float)
        return float(np.sqrt(c @ c)) + self.radius < eqm.radius

    def __call__(self, x):
        return self.value(x)

    def scaled(self, factor):
        return _Scaled(self, factor)


class _Scaled(TestFunction):
    def __init__(self, base, factor):
        self.base, self.factor = base, float(factor)
        self.d, self.center, self.radius = base.d, base.center, base.radius

    def value(self, x):
        return self.factor * self.base.value(x)

    def grad(self, x):
        return self.factor * self.base.grad(x)

    def dirichlet(self):
        return self.factor ** 2 * self.base.dirichlet()

    def integral(self, eqm):
        return self.factor * self.base.integral(eqm)

    @property
    def lipschitz(self):
        return abs(self.factor) * self.base.lipschitz


class RadialBump(TestFunction):
    """Equal to 1 on B(center, r_in), smoothly decaying to 0 at r_out.

    The profile is 1 - S((r - r_in)/(r_out - r_in)) with the quintic
    smoothstep S, so the function is C^2.
    """

    def __init__(self, center, r_in, r_out):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.d = self.center.size
        if not (0.0 <= r_in < r_out):
            raise DomainError("need 0 <= r_in < r_out")
        self.r_in, self.radius = float(r_in), float(r_out)
        self.width = self.radius - self.r_in

    def _r(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        diff = x - self.center
        return diff, np.sqrt(np.sum(diff * diff, axis=-1))

    def profile(self, r):
        return 1.0 - _step((np.asarray(r) - self.r_in) / self.width)

    def value(self, x):
        _, r = self._r(x)
        return self.profile(r)

    def grad(self, x):
        diff, r = self._r(x)
        dr = -_dstep((r - self.r_in) / self.width) / self.width
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, diff / r[..., None], 0.0)
        return dr[..., None] * unit

    @property
    def lipschitz(self):
        return 1.875 / self.width  # max of S' is 30/16

    def _radial_moment(self, poly_in_s, lo, hi):
        """Exact int_lo^hi poly(s) ds for a polynomial in s."""
        anti = P.polyint(poly_in_s)
        return float(P.polyval(hi, anti) - P.polyval(lo, anti))

    def dirichlet(self):
        # s = r_in + width * t, ds = width dt
        t_of_s = np.array([-self.r_in / self.width, 1.0 / self.width])
        dS = _compose(_DSTEP, t_of_s)
        integrand = P.polymul(P.polymul(dS, dS), _monomial(self.d - 1))
        return sphere_area(self.d) / self.width ** 2 * self._radial_moment(integrand, self.r_in, self.radius)

    def _profile_mass(self):
        """int xi dx over R^d, exact."""
        A = sphere_area(self.d)
        inner = self.r_in ** self.d / self.d
        t_of_s = np.array([-self.r_in / self.width, 1.0 / self.width])
        prof = P.polysub(np.array([1.0]), _compose(_STEP, t_of_s))
        outer = self._radial_moment(P.polymul(prof, _monomial(self.d - 1)), self.r_in, self.radius)
        return A * (inner + outer)

    def integral(self, eqm):
        if eqm.d != self.d:
            raise DomainError("test function and measure live in different dimensions")
        if eqm.descriptor == "semicircle":
            c = float(self.center[0])
            brk = [c - self.radius, c - self.r_in, c + self.r_in, c + self.radius]
            return _semicircle_integral(eqm, lambda y: self.profile(abs(y - c)), brk)
        if self.inside(eqm):
            return eqm.density * self._profile_mass()
        # support crosses the boundary: radial integral weighted by the
        # fraction of each sphere S(center, s) inside the support
        A = sphere_area(self.d)
        f = lambda s: float(self.profile(s)) * s ** (self.d - 1) * _sphere_fraction_inside(eqm, self.center, s)
        D0 = float(np.linalg.norm(self.center))
        brk = [self.r_in, abs(eqm.radius - D0), eqm.radius + D0]
        return eqm.density * A * _quad(f, 0.0, self.radius, brk)


def _monomial(k):
    c = np.zeros(k + 1)
    c[k] = 1.0
    return c


def _compose(p, q):
    """Coefficients of p(q(s)) for polynomials p and q."""
    out = np.array([0.0])
    power = np.array([1.0])
    for coef in p:
        out = P.polyadd(out, coef * power)
        power = P.polymul(power, q)
    return out


class Polynomial1D(TestFunction):
    """Polynomial times a C^2 window on the line.

    The window equals 1 on [lo, hi] and decays to 0 over ``width`` on each
    side through the quintic smoothstep.
    """

    d = 1

    def __init__(self, coeffs, lo, hi, width):
        if not (hi > lo and width > 0):
            raise DomainError("window needs hi > lo and width > 0")
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.dcoeffs = P.polyder(self.coeffs) if self.coeffs.size > 1 else np.array([0.0])
        self.lo, self.hi, self.width = float(lo), float(hi), float(width)
        self.center = np.array([0.5 * (lo + hi)])
        self.radius = 0.5 * (hi - lo) + width

    def _x(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim >= 1 and x.shape[-1] == 1:
            x = x[..., 0]
        return x

    def _window(self, x):
        left = (self.lo - x) / self.width
        right = (x - self.hi) / self.width
        w = (1.0 - _step(left)) * (1.0 - _step(right))
        dw = (_dstep(left) * (1.0 - _step(right)) - (1.0 - _step(left)) * _dstep(right)) / self.width
        return w, dw

    def value(self, x):
        x = self._x(x)
        w, _ = self._window(x)
        return P.polyval(x, self.coeffs) * w

    def derivative(self, x):
        x = self._x(x)
        w, dw = self._window(x)
        return P.polyval(x, self.dcoeffs) * w + P.polyval(x, self.coeffs) * dw

    def grad(self, x):
        return self.derivative(x)[..., None]

    @property
    def breaks(self):
        return [self.lo - self.width, self.lo, self.hi, self.hi + self.width]

    @property
    def lipschitz(self):
        xs = np.linspace(self.lo - self.width, self.hi + self.width, 4001)
        return float(np.max(np.abs(self.derivative(xs))))

    def dirichlet(self):
        f = lambda x: float(self.derivative(x)) ** 2
        return _quad(f, self.lo - self.width, self.hi + self.width, self.breaks)

    def integral(self, eqm):
        if eqm.descriptor != "semicircle":
            raise DomainError("Polynomial1D integrates against one-dimensional measures only")
        return _semicircle_integral(eqm, lambda y: float(self.value(y)), self.breaks)


class CustomFunction(TestFunction):
    """User-supplied function supported in B(center, radius).

    Parameters
    ----------
    value, grad : callable
        Vectorized over a trailing coordinate axis.
    center, radius : support ball.
    dirichlet, lipschitz : float, optional
        Closed-form values; computed by quadrature (Dirichlet) or sampling
        (Lipschitz) when omitted.
    """

    def __init__(self, value, grad, center, radius, dirichlet=None, lipschitz=None):
        self._value, self._grad = value, grad
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.d = self.center.size
        self.radius = float(radius)
        self._dirichlet, self._lipschitz = dirichlet, lipschitz

    def value(self, x):
        return np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)

    def grad(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    @property
    def lipschitz(self):
        if self._lipschitz is None:
            rng = np.random.default_rng(0)
            pts = self.center + self.radius * (2 * rng.random((20000, self.d)) - 1)
            g = self.grad(pts)
            self._lipschitz = float(np.max(np.sqrt(np.sum(g * g, axis=-1))))
        return self._lipschitz

    def _ball_integral(self, f):
        """int f over B(center, radius) by nested adaptive quadrature."""
        c, R = self.center, self.radius
        if self.d == 1:
            return _quad(lambda x: float(f(np.array([x]))), c[0] - R, c[0] + R)
        if self.d == 2:
            g = lambda r, th: float(f(c + r * np.array([math.cos(th), math.sin(th)]))) * r
            val, err = integrate.dblquad(g, 0.0, 2 * math.pi, 0.0, R, epsabs=1e-12, epsrel=1e-11)
        elif self.d == 3:
            def g(r, th, ph):
                u = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
                return float(f(c + r * u)) * r * r * math.sin(th)
            val, err = integrate.tplquad(g, 0.0, 2 * math.pi, 0.0, math.pi, 0.0, R, epsabs=1e-11, epsrel=1e-10)
        else:
            raise CapabilityError("custom test functions support d <= 3")
        if err > QUAD_TOL:
            raise NumericToleranceError(f"quadrature error estimate {err:.3g} exceeds {QUAD_TOL:g}", achieved=err)
        return val

    def dirichlet(self):
        if self._dirichlet is None:
            self._dirichlet = self._ball_integral(lambda x: float(np.sum(self.grad(x) ** 2)))
        return self._dirichlet

    def integral(self, eqm):
        if eqm.descriptor == "semicircle":
            c, R = float(self.center[0]), self.radius
            return _semicircle_integral(eqm, lambda y: float(self.value(np.array([y]))), [c - R, c + R])
        return self._ball_integral(lambda x: float(self.value(x)) * float(np.ravel(eqm.density_at(x))[0]))


# ---------------------------------------------------------------------------
def fluct_linear(config, eqm, xi):
    """sum_i xi(x_i) - N int xi d mu."""
    pts = as_points(config, eqm.d)
    vals = np.asarray(xi.value(pts), dtype=float).reshape(-1)
    return math.fsum(np.sort(vals)) - pts.shape[0] * xi.integral(eqm)


def fluct_values(samples, eqm, xi):
    """Fluct_N(xi) for every configuration in ``samples``."""
    mass = xi.integral(eqm)
    out = np.empty(len(samples))
    for k, cfg in enumerate(samples):
        pts = as_points(cfg, eqm.d)
        out[k] = math.fsum(np.sort(np.asarray(xi.value(pts)).reshape(-1))) - pts.shape[0] * mass
    return out


def variance_prediction(xi, beta, eqm):
    """Coefficient v_xi = (1/(2 pi beta)) int |grad xi|^2 and the variance 2 v_xi.

    Only for the two-dimensional log gas with xi supported inside the
    droplet; the harmonic-extension case is not implemented.
    """
    if eqm.kernel.case != LOG2:
        raise CapabilityError("variance predictions are available for the 2D log gas only")
    if not beta > 0:
        raise DomainError("beta must be positive")
    if not xi.inside(eqm):
        raise CapabilityError("test function support touches the boundary of the droplet")
    v = xi.dirichlet() / (2.0 * math.pi * beta)
    return v, 2.0 * v


# ---------------------------------------------------------------------------
def log_laplace_from_values(values, s, min_samples=1000):
    """log mean exp(s F) with a jackknife standard error.

    Raises
    ------
    LaplaceRangeError
        When a single sample carries more than half of the total weight, so
        the empirical mean is meaningless; use a smaller ``s``.
    """
    F = np.asarray(values, dtype=float)
    n = F.size
    if n < min_samples:
        raise InsufficientDataError(f"need at least {min_samples} samples, got {n}")
    if s == 0:
        return 0.0, 0.0
    z = s * F
    m = z.max()
    w = np.exp(z - m)
    S = w.sum()
    if not np.isfinite(S) or w.max() / S > 0.5:
        raise LaplaceRangeError(f"exp(s * Fluct) is dominated by one sample at s = {s}; use a smaller s")
    val = m + math.log(S / n)
    loo = m + np.log((S - w) / (n - 1))
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(val), float(se)


def empirical_log_laplace(samples, eqm, xi, s, min_samples=1000):
    """log of the empirical mean of exp(s Fluct_N(xi)) over configurations."""
    return log_laplace_from_values(fluct_values(samples, eqm, xi), s, min_samples)


def laplace_fit(values, s_grid=(-0.2, -0.1, 0.1, 0.2), min_samples=1000):
    """Fit log L(s) = m s + (v/2) s^2 through the origin; returns (m, v)."""
    s = np.asarray(s_grid, dtype=float)
    L = np.array([log_laplace_from_values(values, si, min_samples)[0] for si in s])
    A = np.column_stack([s, 0.5 * s * s])
    (m, v), *_ = np.linalg.lstsq(A, L, rcond=None)
    return float(m), float(v)


# ---------------------------------------------------------------------------
def _diff_quotient(psi, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    dx = x - y
    near = np.abs(dx) < 1e-7
    with np.errstate(invalid="ignore", divide="ignore"):
        q = (psi.value(x) - psi.value(y)) / np.where(near, 1.0, dx)
    return np.where(near, psi.derivative(0.5 * (x + y)), q)


def _semicircle_rule(eqm, breaks, n):
    """Composite Gauss-Legendre rule for the semicircle law in y = R cos(theta).

    Panels are split at the images of ``breaks`` so piecewise-smooth
    integrands are integrated panel by panel.
    """
    R = eqm.radius
    th = sorted({0.0, math.pi} | {math.acos(b / R) for b in breaks if -R < b < R})
    t, w = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for a, b in zip(th[:-1], th[1:]):
        x = 0.5 * (b - a) * (t + 1.0) + a
        nodes.append(R * np.cos(x))
        weights.append(0.5 * (b - a) * w * np.sin(x) ** 2 * (2.0 / math.pi))
    return np.concatenate(nodes), np.concatenate(weights)


def _anisotropy_blocks(x, eqm, psi, n):
    brk = list(getattr(psi, "breaks", []))
    y, w = _semicircle_rule(eqm, brk, n)
    cross = float(np.sum(_diff_quotient(psi, x[:, None], y[None, :]) @ w))
    background = float(w @ _diff_quotient(psi, y[:, None], y[None, :]) @ w)
    return cross, background


def anisotropy_1d(config, eqm, psi, n=64):
    """Double integral of (psi(x) - psi(y))/(x - y) against fluct x fluct.

    The diagonal is psi'(x). The atomic block is an O(N^2) sum; the cross and
    background blocks use composite Gauss-Legendre rules against the
    semicircle law, with the error estimated by doubling the order.

    Raises
    ------
    NumericToleranceError
        If the order-doubling estimate exceeds 1e-10.
    """
    if eqm.d != 1:
        raise CapabilityError("the anisotropy functional is one-dimensional")
    if not hasattr(psi, "derivative"):
        raise DomainError("psi must provide a derivative")
    x = np.sort(as_points(config, 1)[:, 0])
    N = x.size
    atoms = math.fsum(_diff_quotient(psi, x[:, None], x[None, :]).ravel())
    c1, b1 = _anisotropy_blocks(x, eqm, psi, n)
    c2, b2 = _anisotropy_blocks(x, eqm, psi, 2 * n)
    err = 2.0 * N * abs(c2 - c1) + N * N * abs(b2 - b1)
    if err > QUAD_TOL * max(1.0, N * N):
        raise NumericToleranceError(f"anisotropy quadrature estimate {err:.3g} too large", achieved=err)
    return atoms - 2.0 * N * c2 + N * N * b2


# ---------------------------------------------------------------------------
@dataclass
class CltReport:
    """Summary of a sample of linear statistics.

    Standard errors use batch means (20 batches); ``ess`` is the effective
    sample size from the integrated autocorrelation time.
    """

    n: int
    mean: float
    mean_se: float
    var: float
    var_se: float
    ess: float
    p_normal: float
    var_pred: float = float("nan")
    beta: float = float("nan")
    N: int = 0

    def to_row(self):
        return {"beta": self.beta, "N": self.N, "mean": self.mean, "mean_se": self.mean_se,
                "var": self.var, "var_se": self.var_se, "var_pred": self.var_pred,
                "p_normal": self.p_normal, "ess": self.ess, "n": self.n}


def clt_report(values, var_pred=float("nan"), beta=float("nan"), N=0, n_batches=20):
    """Mean, variance with batch-means errors, and D'Agostino normality p-value."""
    F = np.asarray(values, dtype=float)
    if F.size < max(2 * n_batches, 20):
        raise InsufficientDataError(f"need at least {max(2 * n_batches, 20)} values, got {F.size}")
    mean, mse = _series.batch_means(F, n_batches)
    var, vse = _series.variance_se(F, n_batches)
    ess = _series.effective_sample_size(F)
    # normality on (approximately) decorrelated values
    step = max(1, int(round(F.size / ess)))
    p = float(stats.normaltest(F[::step]).pvalue) if F[::step].size >= 20 else float("nan")
    return CltReport(F.size, mean, mse, var, vse, ess, p, var_pred, beta, N)


# ---------------------------------------------------------------------------
@dataclass
class ConcentrationReport:
    """Per-N exponential moment of the next-order energy and fluctuation variance."""

    rows: list = field(default_factory=list)
    bound: float = 10.0
    flags: list = field(default_factory=list)

    @property
    def bounded(self):
        vals = [r["exp_moment"] for r in self.rows if np.isfinite(r["exp_moment"])]
        return bool(vals) and max(abs(v) for v in vals) <= self.bound and not self.flags


def concentration_check(samples_by_n, eqm, beta, xi=None, bound=10.0):
    """Check boundedness of (1/N) log E exp((beta/4)(F_N + (N/d) log N 1_log)).

    Parameters
    ----------
    samples_by_n : dict
        Maps N to a list of configurations of N points.
    eqm : EquilibriumMeasure
    beta : float
    xi : TestFunction, optional
        If given, Var(Fluct_N(xi)) is reported per N as well.
    """
    rep = ConcentrationReport(bound=bound)
    d = eqm.d
    for N in sorted(samples_by_n):
        samples = samples_by_n[N]
        row = {"N": N, "n": len(samples)}
        if len(samples) < 2:
            rep.flags.append(f"insufficient data at N={N}")
            row.update(exp_moment=float("nan"), exp_moment_se=float("nan"))
            rep.rows.append(row)
            continue
        F = np.array([next_order_energy(c, eqm) for c in samples])
        shift = (N / d) * math.log(N) if eqm.kernel.is_log else 0.0
        z = 0.25 * beta * (F + shift)
        lme = special.logsumexp(z) - math.log(z.size)
        loo = np.array([special.logsumexp(np.delete(z, k)) - math.log(z.size - 1) for k in range(z.size)])
        se = math.sqrt((z.size - 1) / z.size * np.sum((loo - loo.mean()) ** 2))
        row.update(exp_moment=lme / N, exp_moment_se=se / N, mean_F=float(F.mean()))
        if xi is not None:
            fv = fluct_values(samples, eqm, xi)
            row["var_fluct"] = float(fv.var(ddof=1))
            if fv.size >= 40:
                row["var_fluct_se"] = _series.variance_se(fv)[1]
        rep.rows.append(row)
    return rep


# ---------------------------------------------------------------------------
@dataclass
class LocalStats:
    """Blown-up local statistics around tag points."""

    nn: np.ndarray
    gaps: np.ndarray
    r_bins: np.ndarray
    pair_corr: np.ndarray
    density: float
    tags_used: list
    n_windows: int
    dim: int = 1

    def poisson_ks(self):
        """KS distance of the NN distances to the Poisson law at the local density."""
        rho, d = self.density, self.dim
        if d == 1:  # nearest of two independent exponential gaps
            cdf = lambda r: 1.0 - np.exp(-2.0 * rho * r)
        else:
            vol = sphere_area(d) / d
            cdf = lambda r: 1.0 - np.exp(-rho * vol * r ** d)
        return float(stats.kstest(self.nn, cdf).statistic)

    def normalized_gap_variance(self):
        """Variance of gaps divided by their mean (1 for a Poisson process)."""
        g = self.gaps / self.gaps.mean()
        return float(g.var(ddof=1))


def local_statistics(samples, eqm, tags, window=10.0, n_bins=20):
    """Nearest-neighbour and pair statistics after blow-up by N^(1/d).

    Around each tag point, configurations are mapped by y = N^(1/d)(x - tag).
    Points with |y|_inf <= window/2 are the centres; their neighbours are
    searched among all points, so there is no edge bias up to distance
    window/2. Tags whose enlarged window leaves the support are skipped with
    a warning.
    """
    d = eqm.d
    tags = np.asarray(tags, dtype=float).reshape(-1, d)
    N = as_points(samples[0], d).shape[0]
    scale = N ** (1.0 / d)
    r_max = 0.5 * window
    edges = np.linspace(0.0, r_max, n_bins + 1)
    hist = np.zeros(n_bins)
    nn, gaps, used, dens = [], [], [], []
    centres = 0
    for tag in tags:
        reach = float(np.linalg.norm(tag)) + (0.5 * window * math.sqrt(d) + r_max) / scale
        if reach >= eqm.radius:
            warnings.warn(f"window around tag {tag.tolist()} leaves the support; skipped", stacklevel=2)
            continue
        used.append(tag.tolist())
        dens.append(float(np.ravel(eqm.density_at(tag))[0]))
        for cfg in samples:
            y = scale * (as_points(cfg, d) - tag)
            inside = np.all(np.abs(y) <= 0.5 * window, axis=1)
            if not np.any(inside):
                continue
            tree = cKDTree(y)
            dist, _ = tree.query(y[inside], k=2)
            nn.append(dist[:, 1])
            if d == 1:
                ys = np.sort(y[:, 0])
                g = np.diff(ys)
                mid = 0.5 * (ys[1:] + ys[:-1])
                gaps.append(g[np.abs(mid) <= 0.5 * window])
            dd = tree.sparse_distance_matrix(cKDTree(y[inside]), r_max, output_type="ndarray")
            r = dd["v"][dd["v"] > 0]
            hist += np.histogram(r, edges)[0]
            centres += int(inside.sum())
    if not used:
        raise DomainError("no tag point has its window inside the support")
    rho = float(np.mean(dens))
    shell = sphere_area(d) / d * (edges[1:] ** d - edges[:-1] ** d)
    with np.errstate(invalid="ignore", divide="ignore"):
        pc = hist / (centres * rho * shell)
    return LocalStats(np.concatenate(nn) if nn else np.zeros(0),
                      np.concatenate(gaps) if gaps else np.zeros(0),
                      0.5 * (edges[1:] + edges[:-1]), pc, rho, used,
                      len(used) * len(samples), d)

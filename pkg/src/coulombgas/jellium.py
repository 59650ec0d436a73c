"""Renormalized energy of periodic jellium configurations.

A periodic configuration has n points per cell of volume |L| and a uniform
neutralizing background of density m = n/|L|. With G the zero-mean periodic
Green function (-Laplace G = delta - 1/|L|) and R = lim_{x->0} (G(x) - g(x)/c_d),
the eta-truncated energy per unit volume is

    W_eta = (c_d^2/|L|) [sum_{i != j} G(x_i - x_j) + n R] + corr(eta) - overlap(eta)/|L|

where corr(eta) = c_d^2 m^2 eta^2 / d in dimension d >= 2 and 8 pi m^2 eta for
points on the line (field in the plane), and the overlap term is nonzero only
when two truncation balls intersect. G is evaluated by Ewald summation in 2D
and 3D and by its closed form -log|2 sin(pi x / L)|/(2 pi) on the line.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from .energy import _smeared_pair
from .errors import CapabilityError, DomainError, NeutralityError, NumericToleranceError
from .kernel import COUL, LOG1, LOG2, KernelSpec, cd_const, g_eval

_EWALD_DIGITS = 7.0  # cutoffs where the Gaussian factors fall below exp(-49)


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice spanned by the rows of ``basis`` (d x d)."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if B.shape[0] != B.shape[1] or B.shape[0] not in (1, 2, 3):
            raise DomainError("basis must be a square matrix of size 1, 2 or 3")
        if abs(np.linalg.det(B)) < 1e-12:
            raise DomainError("basis vectors are linearly dependent")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def d(self):
        return self.basis.shape[0]

    @property
    def covolume(self):
        return abs(float(np.linalg.det(self.basis)))

    def scaled_to(self, covolume):
        """Same shape, rescaled to the given cell volume."""
        return LatticeSpec(self.basis * (covolume / self.covolume) ** (1.0 / self.d))

    @classmethod
    def from_tau(cls, tau, covolume=1.0):
        """2D lattice Z + tau Z rescaled to the given covolume."""
        tau = complex(tau)
        if tau.imag <= 0:
            raise DomainError("tau must lie in the upper half plane")
        B = np.array([[1.0, 0.0], [tau.real, tau.imag]])
        return cls(B * math.sqrt(covolume / tau.imag))

    @classmethod
    def square(cls):
        return cls.from_tau(1j)

    @classmethod
    def triangular(cls):
        return cls.from_tau(complex(0.5, math.sqrt(3.0) / 2.0))

    @classmethod
    def cubic(cls, side=1.0):
        return cls(np.eye(3) * side)

    @classmethod
    def integers(cls, period=1.0):
        return cls(np.array([[float(period)]]))


@dataclass(frozen=True)
class PeriodicConfig:
    """Points in one cell of a lattice with uniform background density ``m``."""

    lattice: LatticeSpec
    points: np.ndarray
    m: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, self.lattice.d)
        if p.ndim != 2 or p.shape[1] != self.lattice.d or p.shape[0] < 1:
            raise DomainError("points must be an (n, d) array matching the lattice dimension")
        if not self.m > 0:
            raise DomainError("background density must be positive")
        expected = self.m * self.lattice.covolume
        if abs(expected - p.shape[0]) > 1e-9 * max(1.0, expected):
            raise NeutralityError(f"{p.shape[0]} points per cell but background carries {expected:.12g}")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.lattice.d


def _lattice_points(B, r_cut):
    """All integer combinations of the rows of B with norm <= r_cut."""
    d = B.shape[0]
    Binv = np.linalg.inv(B)
    reach = [int(math.ceil(r_cut * np.linalg.norm(Binv[:, i]))) for i in range(d)]
    axes = [np.arange(-r, r + 1) for r in reach]
    coef = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    L = coef @ B
    return L[np.sum(L * L, axis=1) <= r_cut * r_cut]


def _reciprocal(B):
    """Rows k with k . b_i in 2 pi Z."""
    return 2.0 * math.pi * np.linalg.inv(B).T


@dataclass
class _Ewald:
    B: np.ndarray
    alpha: float
    real: np.ndarray = field(init=False)
    recip: np.ndarray = field(init=False)

    def __post_init__(self):
        d = self.B.shape[0]
        vol = abs(np.linalg.det(self.B))
        self.vol = vol
        self.real = _lattice_points(self.B, _EWALD_DIGITS / self.alpha + np.max(np.linalg.norm(self.B, axis=1)))
        K = _lattice_points(_reciprocal(self.B), 2.0 * self.alpha * _EWALD_DIGITS)
        self.recip = K[np.sum(K * K, axis=1) > 0]
        k2 = np.sum(self.recip ** 2, axis=1)
        self.kweight = np.exp(-k2 / (4.0 * self.alpha ** 2)) / (k2 * vol)
        self.d = d

    def _real_kernel(self, r):
        if self.d == 2:
            return special.exp1(self.alpha ** 2 * r * r) / (4.0 * math.pi)
        return special.erfc(self.alpha * r) / (4.0 * math.pi * r)

    def green(self, x):
        """G at the displacement x (not a lattice point)."""
        x = np.asarray(x, dtype=float)
        y = x + self.real
        r = np.sqrt(np.sum(y * y, axis=1))
        real = math.fsum(self._real_kernel(r))
        recip = math.fsum(self.kweight * np.cos(self.recip @ x))
        return real + recip - 1.0 / (4.0 * self.alpha ** 2 * self.vol)

    def regular_part(self):
        """lim_{x->0} G(x) - g(x)/c_d."""
        L = self.real
        r = np.sqrt(np.sum(L * L, axis=1))
        r = r[r > 0]
        if self.d == 2:
            local = (-np.euler_gamma - 2.0 * math.log(self.alpha)) / (4.0 * math.pi)
        else:
            local = -self.alpha / (2.0 * math.pi ** 1.5)
        return (local + math.fsum(self._real_kernel(r)) + math.fsum(self.kweight)
                - 1.0 / (4.0 * self.alpha ** 2 * self.vol))


def _default_alpha(B):
    vol = abs(np.linalg.det(B))
    return math.sqrt(math.pi) / vol ** (1.0 / B.shape[0])


def _kernel_for(pc, kernel):
    if kernel is None:
        kernel = {1: KernelSpec.log1(), 2: KernelSpec.log2(), 3: KernelSpec.coulomb(3)}[pc.d]
    if kernel.case == LOG1 and pc.d == 1:
        return kernel
    if kernel.case == LOG2 and pc.d == 2:
        return kernel
    if kernel.case == COUL and kernel.d == 3 and pc.d == 3:
        return kernel
    raise CapabilityError("periodic energies exist for Log1 (d=1), Log2 (d=2) and Coulomb d=3")


def _pair_sum(pc, kernel, alpha=None):
    """sum_{i != j} G(x_i - x_j) + n R for the cell."""
    pts = pc.points
    n = pc.n
    if kernel.case == LOG1:
        L = float(pc.lattice.basis[0, 0])
        L = abs(L)
        R = -math.log(2.0 * math.pi / L) / (2.0 * math.pi)
        terms = [n * R]
        for i in range(n):
            for j in range(n):
                if i != j:
                    s = abs(math.sin(math.pi * (pts[i, 0] - pts[j, 0]) / L))
                    if s == 0.0:
                        raise DomainError("two points coincide modulo the period")
                    terms.append(-math.log(2.0 * s) / (2.0 * math.pi))
        return math.fsum(terms)
    B = pc.lattice.basis
    ew = _Ewald(B, alpha or _default_alpha(B))
    terms = [n * ew.regular_part()]
    for i in range(n):
        for j in range(i + 1, n):
            terms.append(2.0 * ew.green(_wrap(pts[i] - pts[j], B)))
    return math.fsum(terms)


def _wrap(x, B):
    """Reduce a displacement to the cell around the origin."""
    c = np.linalg.solve(B.T, x)
    c -= np.round(c)
    y = c @ B
    if np.allclose(y, 0.0, atol=1e-14):
        raise DomainError("two points coincide modulo the lattice")
    return y


def renorm_energy_zero(pc, kernel=None, alpha=None):
    """eta -> 0 value of the renormalized energy per unit volume (closed form)."""
    kernel = _kernel_for(pc, kernel)
    c = cd_const(kernel.electric_dim)
    return c * c / pc.lattice.covolume * _pair_sum(pc, kernel, alpha)


def _eta_correction(kernel, m, eta):
    c = cd_const(kernel.electric_dim)
    if kernel.case == LOG1:
        return 8.0 * math.pi * m * m * eta
    return c * c * m * m * eta * eta / kernel.d


def _overlap(pc, kernel, eta):
    """sum over intersecting truncation balls (with images) of g - smeared pair energy."""
    pts = pc.points
    B = pc.lattice.basis
    images = _lattice_points(B, 2.0 * eta + 1e-12 + float(np.max(np.linalg.norm(B, axis=1))))
    total = []
    for i in range(pc.n):
        for j in range(pc.n):
            for L in images:
                if i == j and not np.any(L):
                    continue
                dvec = pts[j] + L - pts[i]
                dist = float(np.linalg.norm(dvec))
                if dist < 2.0 * eta:
                    xi = np.zeros(kernel.electric_dim)
                    xj = np.zeros(kernel.electric_dim)
                    xj[: dvec.size] = dvec
                    total.append(g_eval(kernel, dist) - _smeared_pair(kernel, xi, xj, eta, eta))
    return cd_const(kernel.electric_dim) * math.fsum(total)


def renorm_energy_eta(pc, eta, kernel=None, alpha=None):
    """Truncated energy per unit volume at truncation radius ``eta``."""
    kernel = _kernel_for(pc, kernel)
    if not eta > 0:
        raise DomainError("eta must be positive")
    w0 = renorm_energy_zero(pc, kernel, alpha)
    return w0 + _eta_correction(kernel, pc.m, eta) - _overlap(pc, kernel, eta) / pc.lattice.covolume


@dataclass
class RenormEnergy:
    value: float
    error: float
    etas: np.ndarray
    w_eta: np.ndarray
    power: int


def renorm_energy_periodic(pc, kernel=None, eta_sequence=None, tol=1e-8, alpha=None):
    """Renormalized energy extrapolated from a decreasing truncation sequence.

    Parameters
    ----------
    pc : PeriodicConfig
    kernel : KernelSpec, optional
        Defaults to the log/Coulomb kernel matching the lattice dimension.
    eta_sequence : sequence of float, optional
        Decreasing radii; default {0.2, 0.1, 0.05, 0.025} times the mean spacing.
    tol : float
        Largest acceptable extrapolation error estimate.

    Returns
    -------
    RenormEnergy
        ``value`` is the intercept of a fit a + b eta^p (p = 2, or 1 on the
        line) over the smallest three radii; ``error`` compares it with the fit
        over all radii and adds the fit residual.
    """
    kernel = _kernel_for(pc, kernel)
    spacing = pc.m ** (-1.0 / pc.d)
    etas = np.asarray(eta_sequence if eta_sequence is not None else
                      [0.2 * spacing, 0.1 * spacing, 0.05 * spacing, 0.025 * spacing], dtype=float)
    if etas.size < 3 or np.any(np.diff(etas) >= 0):
        raise DomainError("need at least three strictly decreasing radii")
    p = 1 if kernel.case == LOG1 else 2
    w = np.array([renorm_energy_eta(pc, e, kernel, alpha) for e in etas])

    def fit(sel):
        A = np.column_stack([np.ones(sel.sum()), etas[sel] ** p])
        coef, *_ = np.linalg.lstsq(A, w[sel], rcond=None)
        return coef, float(np.max(np.abs(A @ coef - w[sel])))

    last = np.zeros(etas.size, dtype=bool)
    last[-3:] = True
    (a3, _), res3 = fit(last)
    (a_all, _), res_all = fit(np.ones(etas.size, dtype=bool))
    err = abs(a3 - a_all) + res3 + 1e-13 * max(1.0, abs(a3))
    if err > tol * max(1.0, abs(a3)):
        raise NumericToleranceError(f"eta extrapolation did not converge (estimate {err:.3g})", achieved=err)
    return RenormEnergy(float(a3), float(err), etas, w, p)


def scale_renorm(W_value, m, kernel):
    """Energy at density m from the density-one value for the rescaled configuration."""
    if not m > 0:
        raise DomainError("density must be positive")
    d = kernel.d
    if kernel.is_log:
        return m * W_value - (2.0 * math.pi / d) * m * math.log(m)
    return m ** (2.0 - 2.0 / d) * W_value


def lattice_energy_2d(tau, alpha=None):
    """W for the unit-covolume lattice Z + tau Z with one point per cell."""
    pc = PeriodicConfig(LatticeSpec.from_tau(tau), np.zeros((1, 2)), 1.0)
    return renorm_energy_zero(pc, KernelSpec.log2(), alpha)


def tau_grid(n_re=50, n_im=50, im_max=2.0):
    """Grid on the half fundamental domain 0 <= Re tau <= 1/2, |tau| >= 1.

    Rows follow Re tau; columns move from the unit circle up to ``im_max``.
    The triangular point exp(i pi/3) is the node (n_re - 1, 0).
    """
    re = np.linspace(0.0, 0.5, n_re)
    s = np.linspace(0.0, 1.0, n_im)
    out = np.empty((n_re, n_im), dtype=complex)
    for a, u in enumerate(re):
        lo = math.sqrt(1.0 - u * u)
        out[a] = u + 1j * (lo + s * (im_max - lo))
    return out


def lattice_scan_2d(taus=None):
    """W over a grid of lattice shapes; returns (taus, W, argmin tau)."""
    taus = tau_grid() if taus is None else np.asarray(taus, dtype=complex)
    W = np.vectorize(lattice_energy_2d, otypes=[float])(taus)
    k = np.unravel_index(int(np.argmin(W)), W.shape)
    return taus, W, complex(taus[k])


# ---------------------------------------------------------------------------
def minimizer_expansion_check(N, seed=0, starts=3):
    """Locally minimized 2D Log energy versus the lattice prediction.

    Minimizes H_N with V = |x|^2 from jittered hexagonal starts and returns
    (observed, predicted) where observed = [H_N - N^2 I_V + (N/2) log N]/N and
    predicted = -(1/2) int mu log mu + W(triangular)/(2 pi). Heuristic only:
    global minimality is not certified.
    """
    from scipy import optimize

    from .energy import hamiltonian
    from .equilibrium import PotentialSpec, equilibrium_measure

    pot = PotentialSpec(1.0)
    kernel = KernelSpec.log2()
    eqm = equilibrium_measure(pot, kernel)
    rng = np.random.default_rng(seed)

    def energy_and_grad(flat):
        x = flat.reshape(N, 2)
        diff = x[:, None, :] - x[None, :, :]
        r2 = np.sum(diff * diff, axis=-1)
        np.fill_diagonal(r2, 1.0)
        e = -0.5 * np.sum(np.log(r2)) + N * np.sum(x * x)
        g = -2.0 * np.sum(diff / r2[..., None], axis=1) + 2.0 * N * x
        return e, g.ravel()

    best = np.inf
    for _ in range(starts):
        # hexagonal patch of roughly N points inside the disk
        k = int(math.ceil(math.sqrt(N))) + 3
        i, j = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1))
        P = np.column_stack([(i + 0.5 * j).ravel(), (j * math.sqrt(3) / 2).ravel()])
        P = P[np.argsort(np.sum(P * P, axis=1))][:N]
        P = P / np.max(np.linalg.norm(P, axis=1)) * 0.95 + 0.01 * rng.standard_normal(P.shape)
        res = optimize.minimize(energy_and_grad, P.ravel(), jac=True, method="L-BFGS-B",
                                options={"maxiter": 20000, "gtol": 1e-10})
        best = min(best, hamiltonian(res.x.reshape(N, 2), pot, kernel))
    observed = (best - N * N * eqm.I_V + 0.5 * N * math.log(N)) / N
    mu_log_mu = math.log(eqm.density)
    predicted = -0.5 * mu_log_mu + lattice_energy_2d(complex(0.5, math.sqrt(3) / 2)) / (2.0 * math.pi)
    return observed, predicted

"""Independent brute-force quadrature oracles.

These routines deliberately avoid the closed forms of the library core: they
integrate the defining formulas numerically with adaptive scipy quadrature
(absolute tolerance around 1e-10) so that derived constants can be
reproduced from first principles.
"""

import math
import warnings

import numpy as np
from scipy import integrate

_TOL = 1e-10


def _semicircle_density(R):
    return lambda t: 2.0 / (math.pi * R * R) * math.sqrt(max(R * R - t * t, 0.0))


def log_potential_disk(r, R=1.0):
    """Integral of -log|x - y| over the uniform disk of radius R, at |x| = r."""
    rho = 1.0 / (math.pi * R * R)

    def ring(s):
        # angular integral of log|r - s e^{i theta}| over [0, 2 pi]
        f = lambda th: 0.5 * math.log(max(r * r + s * s - 2 * r * s * math.cos(th), 1e-300))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(f, 0.0, math.pi, limit=200, epsabs=_TOL, epsrel=_TOL)
        return 2.0 * val * s

    pts = [r] if 0 < r < R else None
    val, _ = integrate.quad(ring, 0.0, R, points=pts, limit=200, epsabs=_TOL, epsrel=_TOL)
    return -rho * val


def coulomb_potential_ball3(r, R=1.0):
    """Integral of 1/|x - y| over the uniform 3-ball of radius R, at |x| = r."""
    rho = 3.0 / (4.0 * math.pi * R ** 3)

    def shell(s):
        # polar-angle integral of 1/|x - y| over the sphere |y| = s, done with
        # the elementary antiderivative in u = cos(angle)
        if s == 0.0 or r == 0.0:
            return 4.0 * math.pi * s * s / max(r, s) if s > 0 else 0.0
        return 2.0 * math.pi * s * s * ((r + s) - abs(r - s)) / (r * s)

    pts = [r] if 0 < r < R else None
    val, _ = integrate.quad(shell, 0.0, R, points=pts, limit=200, epsabs=_TOL, epsrel=_TOL)
    return rho * val


def log_potential_semicircle(x, R=2.0):
    """Integral of -log|x - t| against the semicircle law on [-R, R]."""
    dens = _semicircle_density(R)
    f = lambda t: -math.log(abs(x - t)) * dens(t) if t != x else 0.0
    pts = [x] if -R < x < R else None
    val, _ = integrate.quad(f, -R, R, points=pts, limit=400, epsabs=_TOL, epsrel=_TOL)
    return val


def energy_disk(a=1.0, n=24):
    """I_V for the disk case: quadrature potential integrated against the disk.

    Returns (I_V, integral of V). The radial outer integral uses Gauss-Legendre
    nodes; the potential at each node comes from ``log_potential_disk``.
    """
    R = 1.0 / math.sqrt(a)
    rho = 1.0 / (math.pi * R * R)
    t, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * R * (t + 1.0)
    w = 0.5 * R * w * rho * 2.0 * math.pi * r
    pot = np.array([log_potential_disk(ri, R) for ri in r])
    vpart = float(np.sum(w * a * r * r))
    return float(np.sum(w * pot)) + vpart, vpart


def energy_semicircle(a=0.5, n=24):
    """I_V for the semicircle case via Gauss-Chebyshev (second kind) outer nodes."""
    R = math.sqrt(2.0 / a)
    k = np.arange(1, n + 1)
    t = np.cos(k * math.pi / (n + 1))
    w = math.pi / (n + 1) * np.sin(k * math.pi / (n + 1)) ** 2 * (2.0 / math.pi)
    x = R * t
    pot = np.array([log_potential_semicircle(xi, R) for xi in x])
    vpart = float(np.sum(w * a * x * x))
    return float(np.sum(w * pot)) + vpart, vpart


def energy_ball3(a=1.0, n=24):
    """I_V for the 3D Coulomb ball via Gauss-Legendre radial nodes."""
    R = (1.0 / a) ** (1.0 / 3.0)
    rho = 3.0 / (4.0 * math.pi * R ** 3)
    t, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * R * (t + 1.0)
    w = 0.5 * R * w * rho * 4.0 * math.pi * r * r
    pot = np.array([coulomb_potential_ball3(ri, R) for ri in r])
    vpart = float(np.sum(w * a * r * r))
    return float(np.sum(w * pot)) + vpart, vpart


def logz_two_particles_1d(beta, a=0.5):
    """log Z for N = 2 on the line by direct 2D quadrature.

    The Gibbs weight is exp(-(beta/2) H) with H = 2 g(x1 - x2) + 2 (V(x1) + V(x2)).
    Rotating to centre-of-mass coordinates u = x1 + x2, v = x1 - x2 (Jacobian 1/2)
    separates the integral, but we integrate the weight in the original
    variables to keep the oracle independent.
    """
    def weight(x2, x1):
        dx = abs(x1 - x2)
        if dx == 0.0:
            return 0.0
        h = -2.0 * math.log(dx) + 2.0 * a * (x1 * x1 + x2 * x2)
        return math.exp(-0.5 * beta * h)

    L = 12.0 / math.sqrt(beta * a)
    # split the inner integral at the diagonal, where the weight has a kink
    lower, _ = integrate.dblquad(weight, -L, L, lambda x1: -L, lambda x1: x1, epsabs=1e-13, epsrel=1e-11)
    upper, _ = integrate.dblquad(weight, -L, L, lambda x1: x1, lambda x1: L, epsabs=1e-13, epsrel=1e-11)
    return math.log(lower + upper)


def logz_two_particles_2d_mc(beta, a=1.0, n=400_000, seed=0):
    """log Z for N = 2 in the plane by importance-sampled Monte Carlo.

    Returns (estimate, standard error). Proposal: independent Gaussians with
    variance 1/(2 beta a) per coordinate, which matches the confinement term.
    """
    rng = np.random.default_rng(seed)
    sig = math.sqrt(1.0 / (2.0 * beta * a))
    x = rng.normal(0.0, sig, size=(n, 2, 2))
    r2 = np.sum((x[:, 0] - x[:, 1]) ** 2, axis=1)
    # weight / proposal: the Gaussian part cancels, leaving |x1 - x2|^beta
    w = r2 ** (beta / 2.0)
    norm = (2.0 * math.pi * sig * sig) ** 2
    mean = w.mean()
    se = w.std(ddof=1) / math.sqrt(n)
    return math.log(mean * norm), se / mean


def ginibre_radial_moments(profile, N):
    """Exact mean and variance of sum_i f(|z_i|) for Ginibre eigenvalues.

    Uses Kostlan's theorem: with entry variance 1/N the squared moduli are
    distributed as independent Gamma(k, 1)/N variables, k = 1..N. Each term
    is a one-dimensional integral done by adaptive quadrature in t = |z|^2 N.
    """
    from scipy import special

    mean = 0.0
    var = 0.0
    for k in range(1, N + 1):
        lg = special.gammaln(k)
        dens = lambda t: math.exp((k - 1) * math.log(t) - t - lg) if t > 0 else (1.0 if k == 1 else 0.0)
        f = lambda t: profile(math.sqrt(t / N))
        lo = max(0.0, k - 40.0 * math.sqrt(k))
        hi = k + 40.0 * math.sqrt(k) + 40.0
        brk = [min(max(k - 1.0, lo), hi)]
        m1, _ = integrate.quad(lambda t: f(t) * dens(t), lo, hi, points=brk, limit=400, epsabs=1e-14, epsrel=1e-12)
        m2, _ = integrate.quad(lambda t: f(t) ** 2 * dens(t), lo, hi, points=brk, limit=400, epsabs=1e-14, epsrel=1e-12)
        mean += m1
        var += m2 - m1 * m1
    return mean, var


def dedekind_eta(tau, terms=200):
    """Dedekind eta function by its q-product, q = exp(2 pi i tau)."""
    q = np.exp(2j * math.pi * complex(tau))
    n = np.arange(1, terms + 1)
    return np.exp(2j * math.pi * complex(tau) / 24.0) * np.prod(1.0 - q ** n)


def lattice_energy_kronecker(tau):
    """Renormalized energy of the unit-covolume lattice Z + tau Z (one point per cell).

    Kronecker's first limit formula gives the regular part of the zero-mean
    lattice Green function: R = -log(2 pi sqrt(Im tau) |eta(tau)|^2)/(2 pi), and
    the energy is (2 pi)^2 R.
    """
    tau = complex(tau)
    R = -math.log(2 * math.pi * math.sqrt(tau.imag) * abs(dedekind_eta(tau)) ** 2) / (2 * math.pi)
    return 4 * math.pi ** 2 * R


def circle_log_constant(modes=1_000_000, eps=(1e-3, 5e-4, 2.5e-4)):
    """lim_{e->0} sum_k exp(-2 pi k e)/k + log e by partial Fourier sums.

    The limit is -log(2 pi); the error of each term is linear in e, so the
    three values are Richardson extrapolated.
    """
    k = np.arange(1, modes + 1, dtype=float)
    vals = [math.fsum(np.exp(-2 * math.pi * k * e) / k) + math.log(e) for e in eps]
    e1, e2, e3 = eps
    # two rounds of Richardson for geometric ratios of 2
    r1 = 2 * vals[1] - vals[0]
    r2 = 2 * vals[2] - vals[1]
    return (4 * r2 - r1) / 3


def ginibre_radial_cdf(r, N):
    """Exact CDF of the modulus of a uniformly chosen Ginibre eigenvalue.

    By Kostlan's theorem, (1/N) sum_k P(Gamma(k, 1) <= N r^2).
    """
    from scipy import special
    r = np.asarray(r, dtype=float)
    k = np.arange(1, N + 1, dtype=float)
    t = N * r.reshape(-1, 1) ** 2
    return special.gammainc(k, t).mean(axis=1).reshape(r.shape)


def ginibre_radial_cdf_gap(N, n_grid=20001):
    """sup_r |finite-N radial CDF - min(r^2, 1)| on a fine grid of [0, 2]."""
    r = np.linspace(0.0, 2.0, n_grid)
    return float(np.max(np.abs(ginibre_radial_cdf(r, N) - np.minimum(r * r, 1.0))))
